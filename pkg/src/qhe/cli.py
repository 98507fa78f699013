"""Command-line entry point ``qhe``.

All numbers are in natural units: energies in delta, temperatures in
delta/k_B, times in hbar/delta.

Exit codes: 0 success, 1 numerical or assertion failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from .engines import CycleMetrics, EngineKind, EngineParams, MetricError, run_engine, run_seq_frag
from .optimize import SWEEP_COLUMNS, Budget, compare_engines, default_jobs, eta_at_tc, ordering_checks, sweep_TU
from .qcore import DomainError
from .verify import GROUPS, run_checks

METRIC_KEYS = ("q_hot", "q_cold_stroke", "q_total", "w_battery", "pcg", "eta", "closure")
ENGINES = [k.value for k in EngineKind]
CONFIG_ALIASES = {"lambda": "lam"}


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    """Numbers serialized with 12 significant digits."""
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; keys are flag names without the leading dashes."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        out[CONFIG_ALIASES.get(key, key)] = value
    return out


def write_text(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def now_iso() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def csv_text(header, rows) -> str:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def json_text(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def metrics_dict(m: CycleMetrics) -> dict:
    d = m.to_dict()
    return {k: d[k] for k in METRIC_KEYS}


# argument plumbing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file mirroring the flags; flags win")
    p.add_argument("--output", "-o", help="output file (default stdout)")


def _add_grid(p: argparse.ArgumentParser, tu_min=10.0, tu_max=60.0, steps=6) -> None:
    p.add_argument("--tu-min", type=float, default=tu_min, help="smallest T_U (delta/k_B)")
    p.add_argument("--tu-max", type=float, default=tu_max, help="largest T_U (delta/k_B)")
    p.add_argument("--tu-steps", type=int, default=steps, help="number of T_U values")
    p.add_argument("--fast", action="store_true", help="5 grid points per dimension instead of 8")
    p.add_argument("--grid-points", type=int, help="override grid points per dimension")
    p.add_argument("--max-iter", type=int, help="override simplex iterations")
    p.add_argument("--jobs", type=int, help="worker processes (default QHE_THREADS or all cores)")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="qhe", description="Qutrit heat engines charging a two-level battery.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    run = sub.add_parser("run", help="run one engine cycle and print its metrics")
    _add_common(run)
    run.add_argument("--engine", choices=ENGINES)
    run.add_argument("--A", type=float, help="qutrit spacing parameter A (delta)")
    run.add_argument("--Th", type=float, help="hot bath temperature")
    run.add_argument("--Tc", type=float, help="cold bath temperature")
    run.add_argument("--lambda", dest="lam", type=float, default=math.pi / 2, help="work-stroke angle (sequential)")
    run.add_argument("--omega-sb", type=float, default=0.0, help="battery coupling (simultaneous)")
    run.add_argument("--t2", type=float, default=0.0, help="joint stroke duration (simultaneous)")
    run.add_argument("--kappa", type=float, default=1e-3, help="bath coupling strength")
    run.add_argument("--cycles", type=int, default=2, help="cycles to run for seq-frag")
    run.add_argument("--format", choices=("json", "csv"), default="json")

    sweep = sub.add_parser("sweep", help="optimal work of one engine against T_U")
    _add_common(sweep)
    sweep.add_argument("--engine", choices=ENGINES)
    _add_grid(sweep)
    sweep.add_argument("--eta-vs-tc", help="seq-out only: comma-separated cold temperatures for extra eta columns")
    sweep.add_argument("--format", choices=("json", "csv"), default="csv")

    cmp_ = sub.add_parser("compare", help="optimal work and efficiency of all four engines")
    _add_common(cmp_)
    _add_grid(cmp_)
    cmp_.add_argument("--format", choices=("json", "csv"), default="csv")

    ver = sub.add_parser("verify", help="run the verification battery")
    ver.add_argument("--config", help=argparse.SUPPRESS)
    ver.add_argument("--only", action="append", choices=GROUPS, help="run only this group (repeatable)")
    ver.add_argument(
        "--tamper", choices=("kappa-sign",), help="negative control: corrupt the dissipator so checks must fail"
    )
    parser.commands = {"run": run, "sweep": sweep, "compare": cmp_, "verify": ver}
    return parser


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = read_config(args.config)
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(config) - known - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        # string defaults are converted by argparse, and explicit flags override them
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def _budget(args) -> Budget:
    base = Budget.fast() if args.fast else Budget()
    n_jobs = args.jobs if args.jobs is not None else default_jobs()
    return Budget(
        grid_points=args.grid_points or base.grid_points,
        max_iter=base.max_iter if args.max_iter is None else args.max_iter,
        n_jobs=n_jobs,
    )


def _tu_grid(args) -> list[float]:
    if args.tu_steps < 1:
        raise UsageError("--tu-steps must be at least 1")
    if args.tu_steps == 1:
        return [args.tu_min]
    if not args.tu_max > args.tu_min:
        raise UsageError("--tu-max must exceed --tu-min")
    return [float(t) for t in np.linspace(args.tu_min, args.tu_max, args.tu_steps)]


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = {"engine": "--engine", "A": "--A", "Th": "--Th", "Tc": "--Tc"}
        raise UsageError("missing required option(s): " + ", ".join(flags.get(n, n) for n in missing))


# commands


def cmd_run(args) -> int:
    _require(args, "engine", "A", "Th", "Tc")
    params = EngineParams(
        kind=args.engine,
        A=args.A,
        T_H=args.Th,
        T_C=args.Tc,
        lam=args.lam,
        omega_sb=args.omega_sb,
        t2=args.t2,
        kappa=args.kappa,
        n_cycles=args.cycles,
    )
    cycles = None
    if params.kind is EngineKind.SEQ_FRAG:
        cycles = run_seq_frag(params)
        metrics = cycles[1]
    else:
        metrics = run_engine(params)
    pdict = params.to_dict()
    del pdict["kind"]
    if args.format == "csv":
        header = list(pdict) + list(METRIC_KEYS)
        rows = [list(pdict.values()) + list(metrics_dict(m).values()) for m in (cycles or [metrics])]
        if cycles:
            header = ["cycle"] + header
            rows = [[i + 1] + r for i, r in enumerate(rows)]
        write_text(csv_text(header, rows), args.output)
        return 0
    payload = {"engine": params.kind.value, "params": pdict, "metrics": metrics_dict(metrics)}
    if cycles:
        payload["cycles"] = [metrics_dict(m) for m in cycles]
    payload["generated_at"] = now_iso()
    write_text(json_text(payload), args.output)
    return 0


def _eta_columns(args, kind: EngineKind) -> list[float]:
    if not args.eta_vs_tc:
        return []
    if kind is not EngineKind.SEQ_OUT:
        raise UsageError("--eta-vs-tc applies to --engine seq-out only")
    try:
        values = [float(v) for v in args.eta_vs_tc.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--eta-vs-tc: {exc}") from exc
    if not values or any(not v > 0 for v in values):
        raise UsageError("--eta-vs-tc needs positive temperatures")
    return values


def cmd_sweep(args) -> int:
    _require(args, "engine")
    kind = EngineKind(args.engine)
    tcs = _eta_columns(args, kind)
    grid = _tu_grid(args)
    rows = sweep_TU(kind, grid, budget=_budget(args))
    header = list(SWEEP_COLUMNS) + [f"eta_tc_{fmt(t)}" for t in tcs]
    table = []
    for r in rows:
        # the work optimum is independent of T_C, so only eta is re-evaluated
        extra = [eta_at_tc(r.result.best_params, min(t, r.th_star)) for t in tcs]
        table.append(list(r.values()) + extra)
    if args.format == "csv":
        write_text(csv_text(header, table), args.output)
    else:
        payload = {
            "engine": kind.value,
            "columns": header,
            "rows": [dict(zip(header, row)) for row in table],
            "generated_at": now_iso(),
        }
        write_text(json_text(payload), args.output)
    return 0


def compare_header() -> list[str]:
    return ["t_u"] + [f"{k.value.replace('-', '_')}_{c}" for k in EngineKind for c in SWEEP_COLUMNS[1:]]


def cmd_compare(args) -> int:
    grid = _tu_grid(args)
    table = compare_engines(grid, budget=_budget(args))
    checks = ordering_checks(table)
    header = compare_header()
    rows = []
    for i, t in enumerate(grid):
        row = [t]
        for k in EngineKind:
            row += list(table[k][i].values())[1:]
        rows.append(row)
    if args.format == "csv":
        write_text(csv_text(header, rows), args.output)
    else:
        payload = {
            "columns": header,
            "rows": [dict(zip(header, r)) for r in rows],
            "orderings": [{"check": c.name, "t_u": c.t_u, "passed": c.passed, "detail": c.detail} for c in checks],
            "generated_at": now_iso(),
        }
        write_text(json_text(payload), args.output)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  T_U={fmt(c.t_u)}  {c.name}: {c.detail}", file=sys.stderr)
    return 1 if failed else 0


def cmd_verify(args) -> int:
    outcomes = run_checks(only=args.only, tamper_kappa_sign=args.tamper == "kappa-sign")
    width = max((len(o.name) for o in outcomes), default=0)
    for o in outcomes:
        print(f"{'PASS' if o.passed else 'FAIL'}  {o.group:<11} {o.name:<{width}}  {o.detail}")
    n_fail = sum(not o.passed for o in outcomes)
    print(f"{len(outcomes) - n_fail}/{len(outcomes)} checks passed")
    return 1 if n_fail else 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MetricError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
