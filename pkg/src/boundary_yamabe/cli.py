"""Command-line front end: ``boundary-yamabe {eigen,solve,verify,oracle} --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 pipeline error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, build_from_config, load_config
from .errors import ConfigError, YamabeError
from .io import read_field_csv, read_report, write_field_csv, write_report

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE, EXIT_VERIFY = 0, 2, 3, 4
ORACLE_MAX_NODES = 12
ORACLE_INSTANCES = 100
ORACLE_SOLVE_TOL = 1e-10
ORACLE_EIGEN_TOL = 1e-8


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _geometry_block(geom) -> dict:
    return {"n": geom.dim.n, "r0": geom.r0, "r1": geom.r1, "N": geom.num_nodes, "synthetic": geom.synthetic,
            "h_inner": geom.h_inner, "h_outer": geom.h_outer, "volume": geom.volume,
            "R_min": float(np.min(geom.R)), "R_max": float(np.max(geom.R))}


def cmd_eigen(cfg: RunConfig, echo=print) -> dict:
    from .spectral import spectral_report

    geom = build_from_config(cfg.geometry)
    rep = spectral_report(geom, seed=cfg.solver.seed)
    out = _out_dir(cfg)
    report = {
        "command": "eigen",
        "geometry": _geometry_block(geom),
        "eta1": rep.eta1,
        "classification": rep.sign.label,
        "eta1_coarse": rep.sign.eta1_coarse,
        "zero_threshold": rep.sign.threshold,
        "lambda_M": rep.lambda_M,
        "sharp_bound": rep.sharp_bound,
        "seed": cfg.solver.seed,
    }
    if "csv" in cfg.output.formats:
        write_field_csv(out / "eigenfunction.csv", geom.nodes, {"phi": rep.phi})
    if "json" in cfg.output.formats:
        write_report(out / "eigen_report.json", report)
    echo(f"eta1 = {rep.eta1:.12g}  ({rep.sign.label}, zero threshold {rep.sign.threshold:.3e})")
    echo(f"lambda(M) = {rep.lambda_M:.12g}   hemisphere bound = {rep.sharp_bound:.12g}")
    return report


def cmd_solve(cfg: RunConfig, echo=print) -> dict:
    from .solver import solve
    from .verification import verify_solution

    geom = build_from_config(cfg.geometry)
    s = cfg.solver
    res = solve(geom, case=cfg.case, lam=cfg.lam, tol=s.tol, max_iter=s.max_iter, tau0=s.tau0,
                steps=s.steps, seed=s.seed, strategy=s.strategy)
    ver = verify_solution(geom, res.solution, res.lam, res.zeta)
    out = _out_dir(cfg)
    report = {
        "command": "solve",
        "geometry": _geometry_block(geom),
        "case": res.case_tag,
        "source": res.source,
        "lambda": res.lam,
        "zeta": res.zeta,
        "seed": s.seed,
        "diagnostics": res.diagnostics,
        "verification": ver.summary(),
    }
    if res.pair is not None:
        report["barriers"] = {"A": res.pair.A, "tau": res.pair.tau, "diagnostics": res.pair.diagnostics}
    it = res.iteration
    if it is not None:
        report["iteration"] = {"iterations": it.iterations, "ordering_violations": it.ordering_violations,
                               "ordering_worst": it.ordering_worst, "A": it.A, "A_doublings": it.A_doublings,
                               "residual_history": it.residual_history.tolist(),
                               "increment_history": it.increment_history.tolist()}
    if res.trace is not None:
        tr = res.trace
        report["continuation"] = {
            "tau": [st.tau for st in tr.steps], "lambda_tau": [st.lambda_tau for st in tr.steps],
            "norm_p": [st.norm_p for st in tr.steps], "norm_r": [st.norm_r for st in tr.steps],
            "r_exponent": tr.r_exponent, "source": [st.source for st in tr.steps],
            "failures": [st.failure for st in tr.steps], "diagnostics": tr.diagnostics}
    if "csv" in cfg.output.formats:
        resid = ver.curvature - res.lam
        write_field_csv(out / "solution.csv", geom.nodes, {"u": res.solution})
        write_field_csv(out / "curvature.csv", geom.nodes, {"R_conformal": ver.curvature, "deviation": resid})
        if res.pair is not None:
            write_field_csv(out / "barriers.csv", geom.nodes, {"u_minus": res.pair.u_minus, "u_plus": res.pair.u_plus})
        if it is not None and it.iterates_kept:
            cols = {f"u_{k}": v for k, v in enumerate(it.iterates_kept)}
            write_field_csv(out / "iterates.csv", geom.nodes, cols)
    if "json" in cfg.output.formats:
        write_report(out / "solve_report.json", report)
    echo(f"case {res.case_tag} via {res.source}: lambda = {res.lam:.12g}, zeta = {res.zeta:.12g}")
    echo(f"max |R - lambda| = {ver.max_dR:.3e} at r = {ver.worst_r:.6g};  max |h - zeta| = {ver.max_dh:.3e}")
    report["passed"] = ver.passed
    for msg in ver.failures:
        echo(f"verification: {msg}")
    return report


def cmd_verify(cfg: RunConfig, solution=None, lam=None, zeta=None, echo=print) -> dict:
    """Re-check a stored solution; targets come from flags or the neighbouring solve report."""
    from .verification import verify_solution

    geom = build_from_config(cfg.geometry)
    path = Path(solution) if solution else Path(cfg.output.directory) / "solution.csv"
    nodes, cols = read_field_csv(path)
    if nodes.shape != geom.nodes.shape or np.max(np.abs(nodes - geom.nodes)) > 1e-12 * geom.r1:
        raise ConfigError(f"{path}: grid does not match the configured geometry")
    u = next(iter(cols.values()))
    report_path = path.parent / "solve_report.json"
    stored = read_report(report_path) if report_path.exists() else {}
    lam = float(stored.get("lambda", 0.0)) if lam is None else float(lam)
    zeta = float(stored.get("zeta", 0.0)) if zeta is None else float(zeta)
    ver = verify_solution(geom, u, lam, zeta)
    report = {"command": "verify", "solution": str(path), "lambda": lam, "zeta": zeta,
              "verification": ver.summary(), "passed": ver.passed}
    if "json" in cfg.output.formats:
        write_report(_out_dir(cfg) / "verify_report.json", report)
    echo(f"verify {path}: {'pass' if ver.passed else 'FAIL'} (max |R - lambda| = {ver.max_dR:.3e}, "
         f"node {ver.worst_node})")
    for msg in ver.failures:
        echo(f"  {msg}")
    return report


def cmd_oracle(cfg: RunConfig, echo=print) -> dict:
    """Banded/inverse-power results against the dense reference on small random instances."""
    from .linalg import smallest_eig_generalized, solve_banded
    from .operators import box_system
    from .oracles import gauss_solve, smallest_eig_bisection

    if cfg.geometry.num_nodes > ORACLE_MAX_NODES:
        raise ConfigError(f"oracle runs need N <= {ORACLE_MAX_NODES}, got {cfg.geometry.num_nodes}")
    geom = build_from_config(cfg.geometry)
    sys0 = box_system(geom)
    rng = np.random.default_rng(cfg.solver.seed)
    solve_dev, eig_dev = 0.0, 0.0
    for _ in range(ORACLE_INSTANCES):
        K = sys0.form_K.shifted(rng.uniform(-1.0, 1.0, geom.num_nodes) * sys0.mass_M)
        shifted = K.shifted(np.abs(K.diag) + 1.0)
        b = rng.normal(size=geom.num_nodes)
        x = solve_banded(shifted, b)
        y = gauss_solve(shifted.to_dense(), b)
        solve_dev = max(solve_dev, float(np.max(np.abs(x - y)) / max(1.0, float(np.max(np.abs(y))))))
        eta, _ = smallest_eig_generalized(K, sys0.mass_M)
        ref = smallest_eig_bisection(K.to_dense(), sys0.mass_M)
        eig_dev = max(eig_dev, abs(eta - ref) / max(1.0, abs(ref)))
    passed = solve_dev <= ORACLE_SOLVE_TOL and eig_dev <= ORACLE_EIGEN_TOL
    report = {"command": "oracle", "instances": ORACLE_INSTANCES, "N": geom.num_nodes,
              "solve_deviation": solve_dev, "eigen_deviation": eig_dev, "passed": passed}
    if "json" in cfg.output.formats:
        write_report(_out_dir(cfg) / "oracle_report.json", report)
    echo(f"banded vs dense solve: {solve_dev:.3e} (limit {ORACLE_SOLVE_TOL:.0e})")
    echo(f"inverse power vs bisection: {eig_dev:.3e} (limit {ORACLE_EIGEN_TOL:.0e})")
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boundary-yamabe", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("eigen", "solve", "verify", "oracle"))
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", help="output directory (overrides [output] directory)")
    ap.add_argument("--force-case", choices=("zero", "negative", "positive"))
    ap.add_argument("--lambda", dest="lam", type=float, help="target lambda for the negative case")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--solution", help="verify: solution CSV (default <out>/solution.csv)")
    ap.add_argument("--zeta", type=float, help="verify: target zeta (default from the solve report)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(case=args.force_case, seed=args.seed, out=args.out,
                                                      lam=args.lam if args.command != "verify" else None)
        if args.command == "eigen":
            cmd_eigen(cfg)
            return EXIT_OK
        if args.command == "solve":
            return EXIT_OK if cmd_solve(cfg)["passed"] else EXIT_VERIFY
        if args.command == "verify":
            rep = cmd_verify(cfg, args.solution, args.lam, args.zeta)
            return EXIT_OK if rep["passed"] else EXIT_VERIFY
        return EXIT_OK if cmd_oracle(cfg)["passed"] else EXIT_VERIFY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except YamabeError as exc:
        print(f"pipeline error [{exc.stage}]: {exc}", file=sys.stderr)
        for key, value in exc.details.items():
            if np.ndim(value) == 0:
                print(f"  {key} = {value}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
