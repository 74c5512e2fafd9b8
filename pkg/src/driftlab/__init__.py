"""driftlab: spectra of drift Laplacians on model weighted manifolds.

The toolkit discretizes the weighted (drift) Laplacian on 1-D model
manifolds and on the rotationally symmetric 2-sphere, solves the resulting
generalized eigenproblems, and checks closed-form eigenvalue bounds,
heat-kernel identities, Sobolev-type inequalities, and the thin-domain
collapse limit against the computed spectra.
"""

__version__ = "0.1.0"

from . import bounds, collapse, eigensolve, geometry, heatkernel, operators, sobolev

__all__ = [
    "__version__",
    "bounds",
    "collapse",
    "eigensolve",
    "geometry",
    "heatkernel",
    "operators",
    "sobolev",
]
