"""Command-line driver: ``bosekin {run, check-theorem, verify, bench}``.

Exit codes: 0 success, 1 a monitored bound or check failed, 2 configuration or
validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import subprocess
import sys
import traceback
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, bounds, verify
from .collide import benchmark, get_operator, set_threads
from .config import RunConfig, load_config
from .errors import BosekinError, InputError, NaNDetectedError
from .grid import AngularQuadrature, DistributionState, VelocityGrid, moments, write_state
from .kernel import KernelSpec
from .march import TrajectoryRecord, simulate

logger = logging.getLogger("bosekin")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
SCHEMA = 1


def fmt(x: float) -> str:
    """Round-trip float text with 17 significant digits."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def dump_json(payload: dict) -> str:
    body = dict(payload)
    body["schema"] = SCHEMA
    return json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"


def csv_columns(monitors: Sequence[str]) -> List[str]:
    return (["t", "M0", "M1x", "M1y", "M1z", "M2", "L13", "Linf", "drift_mass", "drift_momentum", "drift_energy"]
            + [f"margin_{m}" for m in monitors])


def csv_row(rec: TrajectoryRecord, monitors: Sequence[str]) -> List[str]:
    m = rec.moments
    vals = [rec.time, m.m0, *m.m1, m.m2, m.l13, rec.linf, *rec.conservation_drift]
    vals += [rec.bound_flags[name].margin if name in rec.bound_flags else math.nan for name in monitors]
    return [fmt(v) for v in vals]


def trajectory_csv(records: Sequence[TrajectoryRecord]) -> str:
    monitors = sorted({k for r in records for k in r.bound_flags})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(monitors))
    for rec in records:
        w.writerow(csv_row(rec, monitors))
    return buf.getvalue()


def theorem_report(f0: DistributionState, cfg: RunConfig) -> bounds.TheoremReport:
    n = cfg.cutoff.n if math.isfinite(cfg.cutoff.n) else 1.0
    return bounds.constants_chain(moments(f0), cfg.kernel, cfg.cutoff.K if math.isfinite(cfg.cutoff.K) else None, n)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump_diagnostics(out: Path, exc: BaseException, state: Optional[DistributionState]) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc),
               "traceback": traceback.format_exception(type(exc), exc, exc.__traceback__)}
    for attr in ("residual", "ratio"):
        if hasattr(exc, attr):
            payload[attr] = getattr(exc, attr)
    _write(out / "diagnostics.json", dump_json(payload))
    if state is not None:
        write_state(out / "diagnostic_state.bin", state)


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.out, args.slack, args.K)
    f0 = cfg.build_initial()
    out = cfg.output_dir
    report = theorem_report(f0, cfg)
    last: Dict[str, DistributionState] = {"state": f0}
    snaps = "snapshots" in cfg.formats
    count = [0]

    def on_record(rec: TrajectoryRecord, state: DistributionState) -> None:
        last["state"] = state
        if snaps:
            out.mkdir(parents=True, exist_ok=True)
            write_state(out / f"state_{count[0]:05d}.bin", state)
            count[0] += 1

    op = get_operator(cfg.grid, cfg.kernel, cfg.quadrature)
    try:
        result = simulate(f0, cfg.kernel, cfg.cutoff, cfg.solver, op, on_record=on_record)
    except InputError:
        raise
    except BosekinError as exc:
        state = last["state"]
        if isinstance(exc, NaNDetectedError) and exc.state is not None:
            state = DistributionState(cfg.grid, np.nan_to_num(exc.state, nan=0.0, posinf=0.0, neginf=0.0),
                                      state.time)
        _dump_diagnostics(out, exc, state)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = sorted({name for r in result.records for name, c in r.bound_flags.items() if not c.passed})
    if "csv" in cfg.formats:
        _write(out / "trajectory.csv", trajectory_csv(result.records))
    if "json" in cfg.formats:
        _write(out / "theorem_report.json", dump_json({"report": report.to_dict()}))
        summary = {"records": len(result.records), "t_end": result.records[-1].time,
                   "failed_monitors": failed, "clamped_mass": result.clamped_mass,
                   "renormalizations": result.renormalizations,
                   "picard_intervals": len(result.picard_reports),
                   "picard_max_ratio": max((max(p.ratios) for p in result.picard_reports if p.ratios), default=0.0),
                   "scheme": cfg.solver.scheme, "K": cfg.cutoff.K, "n": cfg.cutoff.n}
        _write(out / "run_summary.json", dump_json(summary))
    print(f"{len(result.records)} records written to {out}; failed monitors: {failed or 'none'}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_check_theorem(args) -> int:
    cfg = load_config(args.config, args.out, args.slack, args.K)
    f0 = cfg.build_initial()
    report = theorem_report(f0, cfg)
    text = dump_json({"report": report.to_dict()})
    sys.stdout.write(text)
    if args.out:
        _write(Path(args.out) / "theorem_report.json", text)
    return EXIT_OK if report.condition_holds else EXIT_FAIL


def cmd_verify(args) -> int:
    cases = verify.run_suites(args.suite, args.trials, args.seed)
    text = verify.report_json(cases) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write(Path(args.out) / "verify_report.json", text)
    return EXIT_OK if all(c.passed for c in cases.values()) else EXIT_FAIL


def _bench_child(args) -> dict:
    if args.config:
        cfg = load_config(args.config)
        grid, spec, quad = cfg.grid, cfg.kernel, cfg.quadrature
    else:
        grid, spec, quad = VelocityGrid(args.L, args.N), KernelSpec.hard_sphere(), AngularQuadrature.gauss_legendre()
    res = benchmark(grid, spec, quad, repeats=args.repeats)
    res.update({"N": grid.points_per_axis, "angles": len(quad)})
    return res


def cmd_bench(args) -> int:
    if args.compare is None:
        sys.stdout.write(dump_json({"bench": _bench_child(args)}))
        return EXIT_OK
    # each thread count runs in a fresh process so the pool size is fixed at import
    results = {}
    for threads in (1, args.compare):
        env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
        cmd = [sys.executable, "-m", "bosekin.cli", "bench", "--N", str(args.N), "--L", str(args.L),
               "--repeats", str(args.repeats)]
        if args.config:
            cmd += ["--config", str(args.config)]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return EXIT_RUNTIME
        results[str(threads)] = json.loads(proc.stdout)["bench"]
    one = results["1"]["seconds"]
    many = results[str(args.compare)]["seconds"]
    payload = {"runs": results, "speedup": one / many, "cpu_count": os.cpu_count()}
    sys.stdout.write(dump_json(payload))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", help="output directory (overrides [output] directory)")
    common.add_argument("--threads", type=int, help="cap on worker threads")
    common.add_argument("--seed", type=int, help="RNG seed for randomized suites")
    common.add_argument("--slack", type=float, help="multiplicative slack for monitored bounds")
    common.add_argument("--K", type=float, help="override the bracket cutoff K")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bosekin", description="Bounded solutions of the spatially homogeneous "
                                "Boltzmann equation for Bose-Einstein particles.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="march an initial datum and write trajectory/report files")
    sub.add_parser("check-theorem", parents=[common], help="evaluate the theorem condition and constants")
    pv = sub.add_parser("verify", parents=[common], help="run randomized property suites")
    pv.add_argument("--suite", default="all", help=f"comma-separated suites or 'all' ({', '.join(verify.SUITES)})")
    pv.add_argument("--trials", type=int, help="trials per suite (default: each suite's own)")
    pb = sub.add_parser("bench", parents=[common], help="collision-operator throughput")
    pb.add_argument("--N", type=int, default=16)
    pb.add_argument("--L", type=float, default=4.5)
    pb.add_argument("--repeats", type=int, default=1)
    pb.add_argument("--compare", type=int, help="also time with this many threads and report the speedup")
    return p


COMMANDS = {"run": cmd_run, "check-theorem": cmd_check_theorem, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("run", "check-theorem") and args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.threads is not None:
            set_threads(args.threads)
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BosekinError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
