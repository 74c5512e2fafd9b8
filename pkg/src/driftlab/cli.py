"""Experiment driver: config parsing, subcommands, and report merging.

Subcommands
    spectrum     solve the configured geometry and export the spectrum
    bounds       run the bound battery against the computed spectrum
    sobolev      estimate the Sobolev constant and check the inequality chain
    heat         heat-kernel identity checks and trace bounds
    collapse     thin-strip convergence study
    verify-all   the full acceptance battery on the built-in suite
    report       merge JSON artifacts of a directory into one summary table

Configs are YAML with strict key checking: unknown keys are rejected with
their path, since silent typos are the main operational hazard of batch
experiments.  Exit status is 0 iff nothing was violated (advisory verdicts
do not fail a run).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, bounds, collapse, heatkernel, operators, reporting, sobolev, suite
from .eigensolve import attach_richardson, merge_mode_spectra, solve_lowest
from .errors import ConfigError, DriftLabError
from .geometry import (
    build_circle,
    build_interval,
    build_sphere_symmetric,
    builtin_phi,
    curvature_summary,
    phi_from_table,
)

_GEOMETRY_KEYS = {
    "id", "topology", "radius", "a", "b", "bc", "n_points", "azimuthal_mode_cap", "phi",
}
_PHI_KEYS = {"name", "amplitude", "frequency", "center", "width", "depth", "path"}
_SOLVER_KEYS = {"k", "tol", "seed"}
_BOUNDS_KEYS = {"j_max"}
_SOBOLEV_KEYS = {"nu", "alpha", "battery_size", "safety"}
_HEAT_KEYS = {"t_min", "t_max", "t_points", "tol"}
_COLLAPSE_KEYS = {"epsilons", "k_indices", "ns", "nx0", "nx_max"}
_OUTPUT_KEYS = {"directory", "formats"}
_TOP_KEYS = {"geometry", "solver", "bounds", "sobolev", "heat", "collapse", "output"}


def _check_keys(section: dict, allowed: set, path: str):
    if not isinstance(section, dict):
        raise ConfigError(f"config section {path!r} must be a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"unknown config keys at {path!r}: {sorted(unknown)} (allowed: {sorted(allowed)})"
        )


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    if cfg is None:
        cfg = {}
    _check_keys(cfg, _TOP_KEYS, "<top>")
    for name, allowed in (
        ("geometry", _GEOMETRY_KEYS),
        ("solver", _SOLVER_KEYS),
        ("bounds", _BOUNDS_KEYS),
        ("sobolev", _SOBOLEV_KEYS),
        ("heat", _HEAT_KEYS),
        ("collapse", _COLLAPSE_KEYS),
        ("output", _OUTPUT_KEYS),
    ):
        if name in cfg:
            _check_keys(cfg[name], allowed, name)
    if "geometry" in cfg and "phi" in cfg["geometry"]:
        phi = cfg["geometry"]["phi"]
        if phi is not None:
            _check_keys(phi, _PHI_KEYS, "geometry.phi")
    return cfg


def _build_phi(phi_cfg, config_dir: Path):
    if phi_cfg is None:
        return None
    name = phi_cfg.get("name")
    if name is None:
        raise ConfigError("geometry.phi needs a 'name'")
    if name == "table":
        path = phi_cfg.get("path")
        if path is None:
            raise ConfigError("geometry.phi.name=table needs a 'path'")
        table = np.loadtxt(config_dir / path, delimiter=",", ndmin=2)
        if table.shape[1] != 2:
            raise ConfigError("phi table must have two columns: coordinate, phi")
        return phi_from_table(table[:, 0], table[:, 1])
    params = {k: v for k, v in phi_cfg.items() if k != "name"}
    return builtin_phi(name, **params)


def build_geometry_from_config(cfg: dict, config_dir: Path):
    gcfg = cfg.get("geometry")
    if gcfg is None:
        raise ConfigError("config needs a 'geometry' section")
    topo = gcfg.get("topology")
    phi = _build_phi(gcfg.get("phi"), config_dir)
    n = int(gcfg.get("n_points", 1024))
    name = gcfg.get("id", "")
    if topo == "circle":
        return build_circle(float(gcfg.get("radius", 1.0)), phi, n, name=name)
    if topo == "interval":
        if "a" not in gcfg or "b" not in gcfg:
            raise ConfigError("interval geometry needs 'a' and 'b'")
        return build_interval(
            float(gcfg["a"]), float(gcfg["b"]), gcfg.get("bc", "neumann"), phi, n, name=name
        )
    if topo == "sphere":
        return build_sphere_symmetric(
            float(gcfg.get("radius", 1.0)),
            phi,
            n,
            int(gcfg.get("azimuthal_mode_cap", 0)),
            name=name,
        )
    raise ConfigError(f"unknown topology {topo!r} (circle | interval | sphere)")


def _meta(cfg, seed):
    return {
        "geometry": cfg.get("geometry", {}).get("id", "geometry"),
        "params_hash": reporting.params_hash({**cfg, "seed": seed}),
        "toolkit_version": __version__,
        "seed": seed,
    }


def _solve_from_config(cfg, config_dir, seed):
    geom = build_geometry_from_config(cfg, config_dir)
    scfg = cfg.get("solver", {})
    k = int(scfg.get("k", 10))
    tol = float(scfg.get("tol", 1e-10))
    probs = operators.assemble_drift_laplacian(geom)
    if isinstance(probs, list):
        problems = {p.mode: p for p in probs}
        specs = {m: solve_lowest(problems[m], k, tol=tol, seed=seed + m) for m in problems}
        merged = merge_mode_spectra(specs)
        return geom, problems, specs, merged
    spec = solve_lowest(probs, k, tol=tol, seed=seed)
    return geom, probs, {0: spec}, None


def cmd_spectrum(cfg, config_dir, out_dir, seed, formats):
    geom, problems, specs, merged = _solve_from_config(cfg, config_dir, seed)
    meta = _meta(cfg, seed)
    for m, spec in sorted(specs.items()):
        tag = f"_m{m}" if merged is not None else ""
        if "csv" in formats:
            reporting.write_spectrum_csv(out_dir / f"spectrum{tag}.csv", spec, meta)
            reporting.write_eigenfunctions_csv(out_dir / f"eigenfunctions{tag}.csv", spec)
    if merged is not None and "csv" in formats:
        rows = [
            {"index": i, "eigenvalue": e.value, "mode": e.mode, "sin_copy": e.sin_copy}
            for i, e in enumerate(merged.entries)
        ]
        reporting.write_csv(out_dir / "spectrum_merged.csv", ["index", "eigenvalue", "mode", "sin_copy"], rows, meta)
    if "json" in formats:
        payload = {
            "eigenvalues": (merged.eigenvalues if merged is not None else specs[0].eigenvalues),
            **meta,
        }
        reporting.write_json(out_dir / "spectrum.json", payload)
    return 0


def cmd_bounds(cfg, config_dir, out_dir, seed, formats):
    geom, problems, specs, merged = _solve_from_config(cfg, config_dir, seed)
    curv = curvature_summary(geom)
    spectrum = merged if merged is not None else specs[0]
    j_max = int(cfg.get("bounds", {}).get("j_max", 5))
    reports = bounds.evaluate_bound_battery(geom, curv, spectrum, j_max=j_max)
    ratios = bounds.ratio_diagnostics(
        geom, spectrum, j_max, curv.weighted_volume_V_phi
    )
    meta = _meta(cfg, seed)
    if "csv" in formats:
        reporting.write_csv(
            out_dir / "bounds.csv",
            ["bound", "direction", "hypothesis_ok", "bound_value", "target_index",
             "target_value", "verdict", "margin", "tolerance"],
            [r.row() for r in reports],
            meta,
        )
        reporting.write_csv(out_dir / "ratios.csv", ["j", "mu_j", "ratio_to_mu1"], ratios.rows, meta)
    if "json" in formats:
        reporting.write_json(
            out_dir / "bounds.json",
            {
                "reports": [r.row() for r in reports],
                "ratio_fitted_constant": ratios.fitted_constant,
                "sigma_grad_phi": ratios.sigma_grad_phi,
                **meta,
            },
        )
    for r in reports:
        print(f"{r.bound_name:24s} {r.verdict:14s} bound={reporting.fmt(r.bound_value):22s} target={reporting.fmt(r.target_value)}")
    violated = [r for r in reports if r.verdict == bounds.VIOLATED]
    return 1 if violated else 0


def cmd_sobolev(cfg, config_dir, out_dir, seed, formats):
    geom, problems, specs, merged = _solve_from_config(cfg, config_dir, seed)
    problem = problems[0] if isinstance(problems, dict) else problems
    spec = specs[0]
    scfg = cfg.get("sobolev", {})
    est = sobolev.estimate_sobolev_constant(
        problem,
        spec,
        nu=float(scfg.get("nu", 4.0)),
        alpha=scfg.get("alpha"),
        battery_size=int(scfg.get("battery_size", 200)),
        seed=seed,
        safety=float(scfg.get("safety", 0.25)),
    )
    rep = sobolev.gradient_interpolation_check(problem, spec, est, battery_size=1000, seed=seed + 13)
    meta = _meta(cfg, seed)
    if "json" in formats:
        reporting.write_json(
            out_dir / "sobolev.json",
            {
                "nu": est.nu, "alpha": est.alpha, "c_o_estimate": est.c_o_estimate,
                "max_ratio": est.max_ratio, "battery_size": est.battery_size,
                "c1": est.c1_value, "lambda1": est.lambda1, "v_phi": est.v_phi,
                "warnings": est.warnings,
                "interpolation_min_slack": rep.min_slack,
                "holder_step_min": rep.holder_step_min,
                **meta,
            },
        )
    if "csv" in formats:
        rows = [
            {"coordinate": float(x), "extremal": float(v)}
            for x, v in zip(problem.nodes, est.extremal_function)
        ]
        reporting.write_csv(out_dir / "sobolev_extremal.csv", ["coordinate", "extremal"], rows, meta)
    print(f"c_o estimate {est.c_o_estimate:.6g} (battery max ratio {est.max_ratio:.6g}), c1 {est.c1_value:.6g}")
    print(f"interpolation min slack {rep.min_slack:.3e}, hoelder step min {rep.holder_step_min:.3e}")
    return 0 if rep.min_slack >= 0 and rep.holder_step_min >= -1e-12 else 1


def cmd_heat(cfg, config_dir, out_dir, seed, formats):
    geom, problems, specs, merged = _solve_from_config(cfg, config_dir, seed)
    hcfg = cfg.get("heat", {})
    tol = float(hcfg.get("tol", 1e-8))
    if merged is not None:
        model = heatkernel.build_heat_model(merged, problems=problems, tol=tol)
        zonal_problem, zonal_spec = problems[0], specs[0]
    else:
        model = heatkernel.build_heat_model(specs[0], problems, tol=tol)
        zonal_problem, zonal_spec = problems, specs[0]
    t_lo = max(float(hcfg.get("t_min", 0.05)), model.t_min)
    t_hi = float(hcfg.get("t_max", 10.0))
    t_grid = np.logspace(math.log10(t_lo), math.log10(t_hi), int(hcfg.get("t_points", 30)))
    est = sobolev.estimate_sobolev_constant(zonal_problem, zonal_spec, seed=seed)
    c1 = est.c1_value
    tb = heatkernel.trace_bound_check(model, c1, est.nu, t_grid)
    kr = heatkernel.centered_kernel_checks(model, [t_lo, min(1.0, t_hi), t_hi], seed=seed)
    n = model.profiles.shape[0]
    comp = max(
        heatkernel.stochastic_completeness_check(model, ix, t)
        for ix in (n // 5, n // 2) for t in (t_lo, min(1.0, t_hi))
    )
    lam = merged.eigenvalues if merged is not None else model.lambdas
    growth = []
    for k in range(1, 11):
        try:
            b, ok, margin = heatkernel.eigenvalue_growth_bound(lam, k, c1, est.nu, model.v_phi)
        except DriftLabError:
            break
        growth.append({"k": k, "bound": b, "satisfied": ok, "margin": margin})
    meta = _meta(cfg, seed)
    if "csv" in formats:
        rows = [
            {"t": float(t), "trace": heatkernel.heat_trace(model, t),
             "bound": heatkernel.trace_upper_bound(c1, est.nu, model.v_phi, t)}
            for t in t_grid
        ]
        reporting.write_csv(out_dir / "heat_trace.csv", ["t", "trace", "bound"], rows, meta)
    if "json" in formats:
        reporting.write_json(
            out_dir / "heat.json",
            {
                "t_min_certified": model.t_min,
                "completeness_dev": comp,
                "mean_zero_dev": kr.mean_zero_dev,
                "semigroup_dev": kr.semigroup_dev,
                "l1_bound_max": kr.l1_bound_max,
                "trace_bound_passed": tb.passed and tb.pointwise_passed,
                "trace_bound_worst_ratio": tb.worst_ratio,
                "growth_bounds": growth,
                "c1": c1,
                **meta,
            },
        )
    print(f"completeness dev {comp:.3e}, mean-zero {kr.mean_zero_dev:.3e}, semigroup {kr.semigroup_dev:.3e}")
    print(f"trace bound: {'ok' if tb.passed else 'VIOLATED'} (worst ratio {tb.worst_ratio:.3g})")
    ok = tb.passed and tb.pointwise_passed and all(g["satisfied"] for g in growth)
    return 0 if ok else 1


def cmd_collapse(cfg, config_dir, out_dir, seed, formats):
    gcfg = cfg.get("geometry")
    if gcfg is None:
        raise ConfigError("config needs a 'geometry' section")
    phi = _build_phi(gcfg.get("phi"), config_dir)
    topo = gcfg.get("topology")
    name = gcfg.get("id", "collapse")
    if topo == "circle":
        factory = lambda n: build_circle(float(gcfg.get("radius", 1.0)), phi, n, name=name)
    elif topo == "interval":
        factory = lambda n: build_interval(
            float(gcfg["a"]), float(gcfg["b"]), gcfg.get("bc", "neumann"), phi, n, name=name
        )
    else:
        raise ConfigError("collapse needs a circle or interval base")
    ccfg = cfg.get("collapse", {})
    study = collapse.run_collapse_study(
        factory,
        k_indices=[int(k) for k in ccfg.get("k_indices", [1, 2])],
        epsilons=[float(e) for e in ccfg.get("epsilons", [0.2, 0.1, 0.05, 0.025])],
        ns=int(ccfg.get("ns", 8)),
        nx0=int(ccfg.get("nx0", 64)),
        nx_max=int(ccfg.get("nx_max", 4096)),
        seed=seed,
    )
    meta = _meta(cfg, seed)
    if "csv" in formats:
        reporting.write_csv(
            out_dir / "collapse_study.csv",
            ["epsilon", "k", "mu_eps", "mu_limit", "diff", "ratio_to_eps2"],
            study.rows,
            meta,
        )
    if "json" in formats:
        reporting.write_json(
            out_dir / "collapse_study.json",
            {
                "k_indices": study.k_indices,
                "epsilons": study.epsilons,
                "fitted_order": study.fitted_order,
                "extrapolated": study.extrapolated,
                "mu_limit": study.mu_limit,
                "mu_reference": study.mu_reference,
                "base_estimate": study.base_estimate,
                "exact": study.exact,
                "nx": study.nx,
                "ns": study.ns,
                **meta,
            },
        )
    if study.exact:
        print("study: exact (differences at solver-noise level)")
    else:
        orders = ", ".join("none" if o is None else f"{o:.3f}" for o in study.fitted_order)
        print(f"fitted orders: [{orders}] at nx={study.nx}")
    return 0


def cmd_verify_all(cfg, config_dir, out_dir, seed, formats, jobs):
    report = suite.run_verify_all(seed=seed, out_dir=out_dir, formats=formats, jobs=jobs)
    return report.exit_code


def cmd_report(out_dir, formats):
    """Merge every *.json artifact in the directory into one summary table."""
    rows = []
    for path in sorted(Path(out_dir).glob("*.json")):
        if path.name == "merged_report.json":
            continue
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        rows.append(
            {
                "artifact": path.name,
                "geometry": payload.get("geometry", ""),
                "toolkit_version": payload.get("toolkit_version", ""),
                "seed": payload.get("seed", ""),
                "summary": _summarize_payload(payload),
            }
        )
    if "csv" in formats:
        reporting.write_csv(
            Path(out_dir) / "merged_report.csv",
            ["artifact", "geometry", "toolkit_version", "seed", "summary"],
            rows,
        )
    if "json" in formats:
        reporting.write_json(Path(out_dir) / "merged_report.json", {"artifacts": rows})
    for r in rows:
        print(f"{r['artifact']:40s} {r['summary']}")
    return 0


def _summarize_payload(payload: dict) -> str:
    if "checks" in payload:
        n_pass = sum(1 for c in payload["checks"] if c.get("passed"))
        return f"{n_pass}/{len(payload['checks'])} checks passed"
    if "reports" in payload:
        verdicts = [r.get("verdict") for r in payload["reports"]]
        return f"{verdicts.count('satisfied')} satisfied, {verdicts.count('violated')} violated, {verdicts.count('advisory')} advisory"
    if "fitted_order" in payload:
        orders = payload["fitted_order"]
        return "exact" if payload.get("exact") else f"orders {orders}"
    if "c_o_estimate" in payload:
        return f"c_o {payload['c_o_estimate']:.6g}"
    if "trace_bound_passed" in payload:
        return f"trace bound {'ok' if payload['trace_bound_passed'] else 'VIOLATED'}"
    if "eigenvalues" in payload:
        return f"{len(payload['eigenvalues'])} eigenvalues"
    return ""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftlab",
        description="Spectra of drift Laplacians on model weighted manifolds",
    )
    parser.add_argument("--version", action="version", version=f"driftlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "bounds", "sobolev", "heat", "collapse"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        _common_flags(p)
    p = sub.add_parser("verify-all")
    p.add_argument("--config", required=False, help="ignored: the built-in suite is fixed")
    _common_flags(p)
    p = sub.add_parser("report")
    p.add_argument("--out", required=True, help="artifact directory to merge")
    p.add_argument("--format", default="both", choices=["csv", "json", "both"])

    args = parser.parse_args(argv)
    formats = ("csv", "json") if getattr(args, "format", "both") == "both" else (args.format,)
    try:
        if args.command == "report":
            return cmd_report(args.out, formats)
        seed = args.seed
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "verify-all":
            return cmd_verify_all(None, None, out_dir, seed, formats, args.jobs)
        cfg = load_config(args.config)
        config_dir = Path(args.config).resolve().parent
        handler = {
            "spectrum": cmd_spectrum,
            "bounds": cmd_bounds,
            "sobolev": cmd_sobolev,
            "heat": cmd_heat,
            "collapse": cmd_collapse,
        }[args.command]
        return handler(cfg, config_dir, out_dir, seed, formats)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DriftLabError as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1


def _common_flags(p):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="solver seed (reproducibility)")
    p.add_argument("--format", default="both", choices=["csv", "json", "both"])
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")


if __name__ == "__main__":
    sys.exit(main())
