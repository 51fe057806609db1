"""Command-line entry points: run, validate, certify, audit.

Exit codes: 0 success, 1 certification or audit threshold breached,
2 configuration error, 3 run aborted (partial artifacts written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .diagnostics import GaussianMixtureSampler, full_audit, holder_probe, one_sided_lipschitz_probe
from .grid import DistributionState, in_feasible_set, make_grid, mass, moment, snapshot_dict
from .integrator import DIAGNOSTIC_COLUMNS, TrajectoryRecord, evolve
from .oracle import certify_collisions, certify_roots, certify_surfaces
from .physics import DomainError, PhysicalParams, measure_gamma_cap
from .scenario import ConfigError, Scenario


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def versions() -> dict:
    return {
        "qbkinetic": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def derived_constants(params: PhysicalParams) -> dict:
    d = params.derived()
    d["gamma_cap"] = params.gamma_cap if params.gamma_cap is not None else measure_gamma_cap(params)
    d["gamma_cap_measured"] = params.gamma_cap is None
    return d


def diagnostics_csv(traj: TrajectoryRecord) -> str:
    """CSV text with every float in shortest round-trip form."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAGNOSTIC_COLUMNS)
    for row in traj.rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def read_diagnostics_csv(path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != DIAGNOSTIC_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        return [tuple(float(x) for x in row) for row in r]


def _probes(scn: Scenario, grid, params) -> dict:
    seed = scn.config["run"]["seed"]
    n = scn.config["audits"]["probe_pairs"]
    pairs = GaussianMixtureSampler(seed, grid.u_max).state_pairs(grid, n)
    out = {"seed": seed, "pairs": n}
    for which in ("c12", "c22_1", "c22_2"):
        r = holder_probe(pairs, 2.0, which, params)
        out[f"holder_{which}"] = {"max_ratio": r["max_ratio"], "finite": r["finite"]}
    r = one_sided_lipschitz_probe(pairs, 2.0, params)
    out["one_sided_lipschitz"] = {"max_constant": r["max_constant"], "finite": r["finite"]}
    return out


def _audits(scn, traj, params, grid) -> dict:
    a = scn.config["audits"]
    rep = full_audit(traj, params, relaxation=a["relaxation"])
    if a["tol_entropy"] is not None:
        from .diagnostics import h_theorem_audit

        rep["h_theorem"] = h_theorem_audit(traj, a["tol_entropy"])
    if a["probes"]:
        rep["probes"] = _probes(scn, grid, params)
    rep["config_hash"] = scn.hash()
    rep["seed"] = scn.config["run"]["seed"]
    return rep


def run_scenario(scn: Scenario, out_dir=None, threads: int = 1) -> int:
    """Evolve a scenario and write all artifacts; returns the exit code."""
    out = Path(out_dir or scn.config["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    params = scn.params()
    grid = scn.grid()
    state0 = scn.initial_state(grid)
    controls = scn.controls()
    feasible = scn.feasible()
    traj = evolve(state0, controls, params, feasible=feasible)
    (out / "diagnostics.csv").write_text(diagnostics_csv(traj))
    if scn.config["output"]["snapshots"]:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        h = params.digest()
        for k, (st, row) in enumerate(zip(traj.states, traj.rows)):
            (snap / f"{k:04d}.json").write_text(json.dumps(snapshot_dict(st, h, row[0])) + "\n")
    meta = {
        "config": scn.to_mapping(),
        "config_hash": scn.hash(),
        "params_hash": params.digest(),
        "derived": derived_constants(params),
        "grid": grid.describe(),
        "versions": versions(),
        "seed": scn.config["run"]["seed"],
        "threads": threads,
        "steps": traj.steps,
        "records": len(traj),
        "clamp_total": traj.clamp_total,
        "min_f": traj.min_f_all,
        "csv_columns": list(DIAGNOSTIC_COLUMNS),
        "abort": traj.abort,
    }
    (out / "run_meta.json").write_text(_dump(meta))
    if scn.config["audits"]["enabled"]:
        (out / "audits.json").write_text(_dump(_audits(scn, traj, params, grid)))
    return 3 if traj.abort is not None else 0


def validate_scenario(scn: Scenario) -> tuple[dict, list]:
    """Dry run: derived constants, grid and initial-state checks."""
    params = scn.params()
    grid = scn.grid()
    state0 = scn.initial_state(grid)
    warnings = []
    report = {
        "config_hash": scn.hash(),
        "derived": derived_constants(params),
        "grid": grid.describe(),
        "initial": {
            "mass": mass(state0, params),
            "energy": moment(state0, 1.0, params),
            "m_nstar": moment(state0, scn.controls().n_star, params),
            "max_f": float(state0.values.max()),
            "tail_ratio": float(state0.values[-1] / max(state0.values.max(), 1e-300)),
        },
    }
    if report["initial"]["tail_ratio"] > 1e-6:
        warnings.append(f"initial state is not small at u_max (f(u_N)/max f = {report['initial']['tail_ratio']:.3e})")
    spec = scn.feasible()
    if spec is not None:
        fr = in_feasible_set(state0, spec, params)
        report["feasible"] = fr.as_dict()
        if not fr.mass_ok:
            warnings.append(f"mass {fr.mass:.6g} exceeds the cap c0 = {spec.c0:.6g}")
        if not fr.energy_ok:
            warnings.append(f"energy {fr.energy:.6g} differs from c1 = {spec.c1:.6g}")
        if not fr.moment_ok:
            warnings.append(f"moment {fr.moment:.6g} exceeds c_nstar = {spec.c_nstar:.6g}")
    for k in ("mass", "energy", "m_nstar"):
        if not math.isfinite(report["initial"][k]):
            warnings.append(f"initial {k} is not finite")
    report["warnings"] = warnings
    return report, warnings


def certify_scenario(scn: Scenario, out_dir=None, nodes_per_panel: int = 8, panels: int = 4) -> tuple[dict, bool]:
    """Manifold and collision certifications on a coarse grid."""
    params = scn.params()
    u_max = scn.config["grid"]["u_max"]
    grid = make_grid(u_max, panels, nodes_per_panel, 1.0, 1, params)
    bundle = {
        "config_hash": scn.hash(),
        "grid": grid.describe(),
        "roots": certify_roots(params),
        "surfaces": certify_surfaces(params),
        "collisions": certify_collisions(grid, params),
    }
    ok = all(bundle[k]["passed"] for k in ("roots", "surfaces", "collisions"))
    bundle["passed"] = ok
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "certification.json").write_text(_dump(bundle))
    return bundle, ok


def load_trajectory(out_dir, scn: Scenario) -> TrajectoryRecord:
    """Rebuild a trajectory from diagnostics.csv, snapshots and run_meta.json."""
    out = Path(out_dir)
    meta = json.loads((out / "run_meta.json").read_text())
    grid = scn.grid()
    traj = TrajectoryRecord(n_star=scn.controls().n_star)
    traj.rows = read_diagnostics_csv(out / "diagnostics.csv")
    snaps = sorted((out / "snapshots").glob("*.json")) if (out / "snapshots").is_dir() else []
    for p in snaps:
        d = json.loads(p.read_text())
        traj.states.append(DistributionState(grid, np.asarray(d["values"], dtype=float)))
    traj.steps = meta.get("steps", 0)
    traj.clamp_total = meta.get("clamp_total", 0.0)
    traj.min_f_all = meta.get("min_f", math.inf)
    traj.abort = meta.get("abort")
    return traj


def audit_run(out_dir, scn: Scenario | None = None) -> tuple[dict, bool]:
    out = Path(out_dir)
    if scn is None:
        scn = Scenario.from_file(out / "run_meta.json")
    params = scn.params()
    traj = load_trajectory(out, scn)
    rep = _audits(scn, traj, params, scn.grid())
    (out / "audits.json").write_text(_dump(rep))
    ok = rep["h_theorem"]["monotone"] and traj.min_f_all >= 0
    if rep.get("mass_growth"):
        ok = ok and rep["mass_growth"]["certified"]
    return rep, bool(ok)


# -- argument handling --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qbkinetic", description="Radial quantum Boltzmann solver with condensate coupling.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_config=True):
        p.add_argument("--config", required=need_config, help="scenario file (INI or JSON)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads (recorded; evaluation is single-threaded)")
        p.add_argument("--refine", type=int, help="grid refinement multiplier")

    common(sub.add_parser("run", help="evolve a scenario and write artifacts"))
    common(sub.add_parser("validate", help="check a scenario without evolving"))
    common(sub.add_parser("certify", help="oracle certification of the quadratures"))
    common(sub.add_parser("audit", help="recompute audits for a finished run"), need_config=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.command == "audit":
            if args.out is None:
                print("error: audit needs --out pointing at a run directory", file=sys.stderr)
                return 2
            scn = Scenario.from_file(args.config) if args.config else None
            rep, ok = audit_run(args.out, scn)
            print(f"audit written to {Path(args.out) / 'audits.json'}; {'ok' if ok else 'FAILED'}")
            return 0 if ok else 1
        scn = Scenario.from_file(args.config).with_overrides(args.seed, args.refine, args.out)
        if args.command == "validate":
            rep, warnings = validate_scenario(scn)
            sys.stdout.write(_dump(rep))
            for w in warnings:
                print(f"warning: {w}", file=sys.stderr)
            return 0
        if args.command == "certify":
            out = args.out or scn.config["output"]["dir"]
            bundle, ok = certify_scenario(scn, out)
            summary = {
                "roots": bundle["roots"]["passed"],
                "surfaces": bundle["surfaces"]["max_rel_error"],
                "collisions": bundle["collisions"]["max_rel_error"],
            }
            print(_dump(summary), end="")
            print("certification passed" if ok else "certification FAILED")
            return 0 if ok else 1
        code = run_scenario(scn, args.out, threads=args.threads)
        if code == 3:
            print("run aborted; partial artifacts written", file=sys.stderr)
        return code
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


def main_entry() -> None:
    sys.exit(main())
