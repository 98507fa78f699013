"""Bounded work maximization over engine parameters and T_U sweeps.

The search is a constraint-filtered grid followed by a bounded Nelder-Mead
refinement from the best grid point. Everything is deterministic: the grid
is fixed, the simplex starts from a fixed shape and ties are broken on the
parameter tuple.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np
from scipy.optimize import minimize

from .engines import (
    CycleMetrics,
    EngineKind,
    EngineParams,
    MetricError,
    analytic_seq_out,
    metrics_from,
    run_engine,
)
from .qcore import DomainError

TEMP_FLOOR = 1e-3
A_FLOOR = 1e-3

# free dimensions per engine kind, in grid order
FREE_DIMS = {
    EngineKind.SEQ_OUT: ("A", "lam", "T_H"),
    EngineKind.SEQ_FRAG: ("A", "lam", "T_H", "T_C"),
    EngineKind.SIM_OUT: ("A", "omega_sb", "T_H", "T_C", "t2"),
    EngineKind.SIM_FRAG: ("A", "omega_sb", "T_H", "T_C", "t2"),
}

SWEEP_COLUMNS = (
    "t_u",
    "w_m",
    "pcg",
    "eta",
    "a_star",
    "th_star",
    "tc_star",
    "lambda_star",
    "omega_sb_star",
    "t2_star",
    "q_total",
)


@dataclass(frozen=True)
class SearchSpace:
    """Closed parameter box; temperature bounds are capped by T_U at search time.

    ``seq_out_tc`` is the cold-bath temperature used to report the efficiency
    of the out-and-out sequential engine, whose work does not depend on T_C.
    """

    A: tuple[float, float] = (0.0, 50.0)
    lam: tuple[float, float] = (0.0, math.pi)
    omega_sb: tuple[float, float] = (0.0, 25.0)
    T_H: tuple[float, float] = (0.0, math.inf)
    T_C: tuple[float, float] = (0.0, math.inf)
    t2: tuple[float, float] = (0.0, 10.0)
    seq_out_tc: float = 15.0

    def __post_init__(self):
        for name in ("A", "lam", "omega_sb", "T_H", "T_C", "t2"):
            lo, hi = getattr(self, name)
            if not (lo <= hi) or math.isnan(lo) or lo < 0:
                raise DomainError(f"bounds for {name} must be ordered and non-negative, got {(lo, hi)}")
            if name not in ("T_H", "T_C") and not math.isfinite(hi):
                raise DomainError(f"bounds for {name} must be finite, got {(lo, hi)}")
        if not self.seq_out_tc > 0:
            raise DomainError(f"seq_out_tc must be positive, got {self.seq_out_tc}")

    def bounds(self, kind, T_U: float) -> list[tuple[str, float, float]]:
        """Effective ``(name, lo, hi)`` of every free dimension at ``T_U``."""
        kind = EngineKind(kind)
        if not (T_U > TEMP_FLOOR and math.isfinite(T_U)):
            raise DomainError(f"T_U must be finite and above {TEMP_FLOOR}, got {T_U}")
        out = []
        for name in FREE_DIMS[kind]:
            lo, hi = getattr(self, name)
            if name in ("T_H", "T_C"):
                lo, hi = max(lo, TEMP_FLOOR), min(hi, T_U)
            elif name == "A":
                lo = max(lo, A_FLOOR)
            if lo > hi:
                raise DomainError(f"empty range for {name} at T_U={T_U}: {(lo, hi)}")
            out.append((name, float(lo), float(hi)))
        return out


@dataclass(frozen=True)
class Budget:
    grid_points: int = 8
    max_iter: int = 200
    n_jobs: int = 1
    keep_trace: bool = False

    def __post_init__(self):
        if self.grid_points < 2:
            raise DomainError(f"grid needs at least 2 points per dimension, got {self.grid_points}")
        if self.max_iter < 0:
            raise DomainError(f"max_iter must be non-negative, got {self.max_iter}")
        if self.n_jobs < 1:
            raise DomainError(f"n_jobs must be at least 1, got {self.n_jobs}")

    @classmethod
    def fast(cls, **kw) -> "Budget":
        return cls(grid_points=5, **kw)


@dataclass
class OptResult:
    best_params: EngineParams
    best_metrics: CycleMetrics
    evaluations: int
    trace: list[tuple[EngineParams, float]] | None = None


@dataclass
class SweepRow:
    t_u: float
    w_m: float
    pcg: float
    eta: float
    a_star: float
    th_star: float
    tc_star: float
    lambda_star: float
    omega_sb_star: float
    t2_star: float
    q_total: float
    result: OptResult | None = field(default=None, repr=False, compare=False)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


# objective


def evaluate(params: EngineParams) -> CycleMetrics:
    """Objective metrics: closed form for seq-out, simulation otherwise."""
    if params.kind is EngineKind.SEQ_OUT:
        q_hot, w = analytic_seq_out(params.A, params.T_H, params.T_C, params.lam)
        return metrics_from(q_hot, q_hot - w, w, params.A)
    return run_engine(params)


def _score(params: EngineParams) -> tuple[float, CycleMetrics | None]:
    try:
        m = evaluate(params)
    except MetricError:
        # work without any heat intake cannot be accounted; treat as infeasible
        return -math.inf, None
    return m.w_battery, m


def _key(params: EngineParams) -> tuple[float, ...]:
    return (params.A, params.lam, params.omega_sb, params.T_H, params.T_C, params.t2)


def _better(a, b) -> bool:
    """True if candidate ``a = (w, params)`` beats ``b``; ties go to the smaller tuple."""
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    return _key(a[1]) < _key(b[1])


class _Search:
    def __init__(self, kind: EngineKind, T_U: float, space: SearchSpace, budget: Budget):
        self.kind = kind
        self.space = space
        self.budget = budget
        self.dims = space.bounds(kind, T_U)
        self.lo = np.array([d[1] for d in self.dims])
        self.span = np.array([d[2] - d[1] for d in self.dims])
        self.cache: dict[tuple, tuple[float, CycleMetrics | None]] = {}
        self.best = None
        self.trace = [] if budget.keep_trace else None

    def params(self, values) -> EngineParams:
        """Build feasible params from raw values, repairing the coupled constraints."""
        p = dict(zip((d[0] for d in self.dims), (float(v) for v in values)))
        if "T_C" in p:
            p["T_C"] = min(p["T_C"], p["T_H"])
        else:
            p["T_C"] = min(self.space.seq_out_tc, p["T_H"])
        if "omega_sb" in p:
            p["omega_sb"] = min(p["omega_sb"], p["A"] / 2)
        return EngineParams(kind=self.kind, **p)

    def from_unit(self, x) -> EngineParams:
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self.params(self.lo + x * self.span)

    def to_unit(self, params: EngineParams) -> np.ndarray:
        raw = np.array([getattr(params, d[0]) for d in self.dims])
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(self.span > 0, (raw - self.lo) / self.span, 0.0)
        return np.clip(x, 0.0, 1.0)

    def record(self, params: EngineParams, score) -> float:
        w, _ = score
        self.cache[_key(params)] = score
        if self.trace is not None:
            self.trace.append((params, w))
        if w > -math.inf and _better((w, params), self.best):
            self.best = (w, params)
        return w

    def score(self, params: EngineParams) -> float:
        hit = self.cache.get(_key(params))
        if hit is not None:
            return hit[0]
        return self.record(params, _score(params))

    def score_many(self, candidates: list[EngineParams]) -> None:
        todo, seen = [], set()
        for p in candidates:
            k = _key(p)
            if k not in self.cache and k not in seen:
                seen.add(k)
                todo.append(p)
        if self.budget.n_jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=self.budget.n_jobs) as pool:
                chunk = max(1, len(todo) // (4 * self.budget.n_jobs))
                scores = list(pool.map(_score, todo, chunksize=chunk))
        else:
            scores = [_score(p) for p in todo]
        # recorded in submission order, so the reduction matches the serial run
        for p, s in zip(todo, scores):
            self.record(p, s)

    def grid(self) -> list[EngineParams]:
        axes = [np.linspace(d[1], d[2], self.budget.grid_points) if d[2] > d[1] else [d[1]] for d in self.dims]
        names = [d[0] for d in self.dims]
        points = []
        for values in product(*axes):
            p = dict(zip(names, values))
            # constraint filtering instead of repair on the grid
            if "T_C" in p and p["T_C"] > p["T_H"]:
                continue
            if "omega_sb" in p and p["omega_sb"] > p["A"] / 2:
                continue
            points.append(self.params(values))
        return points

    def refine(self) -> None:
        if self.budget.max_iter == 0 or not self.span.any():
            return
        x0 = self.to_unit(self.best[1])
        n = len(x0)
        step = 0.5 / (self.budget.grid_points - 1)
        simplex = [x0]
        for i in range(n):
            v = x0.copy()
            v[i] = v[i] + step if v[i] + step <= 1.0 else v[i] - step
            simplex.append(v)
        minimize(
            lambda x: -self.score(self.from_unit(x)),
            x0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * n,
            options={
                "maxiter": self.budget.max_iter,
                "initial_simplex": np.array(simplex),
                "xatol": 1e-10,
                "fatol": 1e-14,
            },
        )


def maximize_work(kind, T_U: float, space: SearchSpace | None = None, budget: Budget | None = None, seeds=()) -> OptResult:
    """Maximize battery work of ``kind`` with all temperatures at most ``T_U``.

    ``seeds`` are extra starting points (e.g. the optimum at a smaller T_U);
    they are projected into the box and compete with the grid points.
    """
    kind = EngineKind(kind)
    space = space or SearchSpace()
    budget = budget or Budget()
    search = _Search(kind, T_U, space, budget)
    candidates = search.grid()
    for seed in seeds:
        candidates.append(search.from_unit(search.to_unit(replace(seed, kind=kind))))
    if not candidates:
        raise DomainError(f"no feasible grid point for {kind.value} at T_U={T_U}")
    search.score_many(candidates)
    if search.best is None:
        raise DomainError(f"no grid point of {kind.value} at T_U={T_U} has a valid objective")
    search.refine()
    w, params = search.best
    metrics = search.cache[_key(params)][1]
    return OptResult(params, metrics, len(search.cache), search.trace)


def row_from(T_U: float, result: OptResult) -> SweepRow:
    p, m = result.best_params, result.best_metrics
    return SweepRow(
        t_u=T_U,
        w_m=m.w_battery,
        pcg=m.pcg,
        eta=m.eta,
        a_star=p.A,
        th_star=p.T_H,
        tc_star=p.T_C,
        lambda_star=p.lam if p.kind.sequential else 0.0,
        omega_sb_star=p.omega_sb,
        t2_star=p.t2,
        q_total=m.q_total,
        result=result,
    )


def sweep_TU(kind, TU_grid, space: SearchSpace | None = None, budget: Budget | None = None) -> list[SweepRow]:
    """One optimum per T_U; each search is seeded with the previous optimum.

    The feasible set grows with T_U, so seeding guarantees a non-decreasing
    maximum whatever the local refinement does.
    """
    TU_grid = [float(t) for t in TU_grid]
    if not TU_grid:
        raise DomainError("empty T_U grid")
    if any(b <= a for a, b in zip(TU_grid, TU_grid[1:])):
        raise DomainError(f"T_U grid must be strictly ascending, got {TU_grid}")
    rows, seeds = [], ()
    for T_U in TU_grid:
        result = maximize_work(kind, T_U, space, budget, seeds=seeds)
        rows.append(row_from(T_U, result))
        seeds = (result.best_params,)
    return rows


def eta_at_tc(params: EngineParams, T_C: float) -> float:
    """Efficiency of a seq-out optimum re-evaluated with another cold bath."""
    if params.kind is not EngineKind.SEQ_OUT:
        raise DomainError("eta_at_tc applies to seq-out only")
    return evaluate(replace(params, T_C=T_C)).eta


def compare_engines(TU_grid, budget: Budget | None = None, space: SearchSpace | None = None) -> dict[EngineKind, list[SweepRow]]:
    return {kind: sweep_TU(kind, TU_grid, space, budget) for kind in EngineKind}


@dataclass(frozen=True)
class OrderingCheck:
    name: str
    t_u: float
    passed: bool
    detail: str


def ordering_checks(table: dict[EngineKind, list[SweepRow]], rel_tol: float = 0.15) -> list[OrderingCheck]:
    """Work and efficiency orderings between the four engines at each T_U."""
    so, sf, mo, mf = (table[k] for k in (EngineKind.SEQ_OUT, EngineKind.SEQ_FRAG, EngineKind.SIM_OUT, EngineKind.SIM_FRAG))
    checks = []
    for a, b, c, d in zip(so, sf, mo, mf):
        t = a.t_u
        rel = abs(b.w_m - c.w_m) / max(abs(c.w_m), 1e-300)
        checks += [
            OrderingCheck("W seq-out >= seq-frag", t, a.w_m >= b.w_m, f"{a.w_m:.6g} vs {b.w_m:.6g}"),
            OrderingCheck(
                f"W seq-frag ~ sim-out within {rel_tol:.0%}", t, rel <= rel_tol, f"{b.w_m:.6g} vs {c.w_m:.6g} (rel {rel:.3g})"
            ),
            OrderingCheck("W sim-out >= sim-frag", t, c.w_m >= d.w_m, f"{c.w_m:.6g} vs {d.w_m:.6g}"),
            OrderingCheck(
                "eta sim-frag > seq-frag > sim-out",
                t,
                d.eta > b.eta > c.eta,
                f"{d.eta:.6g} > {b.eta:.6g} > {c.eta:.6g}",
            ),
        ]
    return checks


def default_jobs() -> int:
    """Worker count from ``QHE_THREADS``, else the number of available cores."""
    env = os.environ.get("QHE_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise DomainError(f"QHE_THREADS must be at least 1, got {env}")
        return n
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
