"""Fixed-seed verification battery behind ``qhe verify``.

Each check returns ``(passed, detail)``. Checks are grouped so the CLI can
run a subset; ``tamper`` switches on deliberate corruptions that the battery
must catch (negative controls).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from types import SimpleNamespace
from typing import Callable

import numpy as np
import scipy.linalg

from .dissipation import BathSpec, build_channels, dissipator_apply, eigenoperator_decomposition
from .dynamics import EvolutionConfig, evolve_to_steady, gksl_rhs, integrate
from .engines import (
    EngineKind,
    EngineParams,
    analytic_seq_out,
    fragmented_cold_coupling,
    fragmented_hot_coupling,
    out_and_out_coupling,
    run_seq_frag,
    run_seq_out,
    joint_stroke_setup,
    total_hamiltonian,
    work_stroke_hamiltonian,
)
from .qcore import (
    BATTERY_GROUND,
    expectation,
    hermitize,
    kron,
    partial_trace,
    qutrit_hamiltonian,
    thermal_state,
    trace_distance,
    unitary_evolve,
)

SEED = 20240611
LISTED_POINT = (50.0, 10.0)  # (A, omega_sb)


@dataclass(frozen=True)
class Check:
    name: str
    group: str
    run: Callable[..., tuple[bool, str]]


@dataclass(frozen=True)
class Outcome:
    name: str
    group: str
    passed: bool
    detail: str


def random_density(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    G = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = G @ G.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return hermitize(G)


def generator_matrix(H, channels) -> np.ndarray:
    """Superoperator assembled column by column from the right-hand side."""
    d = H.shape[0]
    L = np.empty((d * d, d * d), dtype=complex)
    for k in range(d * d):
        E = np.zeros(d * d, dtype=complex)
        E[k] = 1.0
        L[:, k] = gksl_rhs(E.reshape(d, d), H, channels).reshape(-1)
    return L


def exact_evolution(rho0, H, channels, t: float) -> np.ndarray:
    d = H.shape[0]
    v = scipy.linalg.expm(generator_matrix(H, channels) * t) @ np.asarray(rho0, dtype=complex).reshape(-1)
    return v.reshape(d, d)


# reference eigenoperators at (A, omega_sb) = (50, 10), in the S (x) B product basis with the battery index fastest


def _ket(s: int, b: int) -> np.ndarray:
    v = np.zeros(6, dtype=complex)
    v[2 * s + b] = 1.0
    return v


def out_joint_basis() -> list[np.ndarray]:
    r = 1 / math.sqrt(2)
    return [
        _ket(0, 0),
        r * (_ket(1, 0) - _ket(0, 1)),
        r * (_ket(1, 0) + _ket(0, 1)),
        r * (_ket(1, 1) - _ket(2, 0)),
        r * (_ket(1, 1) + _ket(2, 0)),
        _ket(2, 1),
    ]


def frag_joint_basis() -> list[np.ndarray]:
    r = 1 / math.sqrt(2)
    return [
        _ket(0, 0),
        _ket(1, 0),
        _ket(0, 1),
        r * (_ket(1, 1) - _ket(2, 0)),
        r * (_ket(1, 1) + _ket(2, 0)),
        _ket(2, 1),
    ]


def listed_out_operators(A: float, w: float) -> list[tuple[float, np.ndarray]]:
    k = out_joint_basis()

    def op(i, j):
        return np.outer(k[i], k[j].conj())

    r = 1 / math.sqrt(2)
    return [
        ((A + 2 * w) / 2, r * (op(0, 2) + op(3, 5))),
        ((A - 2 * w) / 2, r * (op(0, 1) + op(4, 5))),
        (A + w, r * (op(0, 4) - op(1, 5))),
        (A - w, r * (op(2, 5) - op(0, 3))),
        (A / 2, op(2, 4) - op(1, 3)),
    ]


def listed_frag_operators(A: float, w: float) -> tuple[list, list]:
    k = frag_joint_basis()

    def op(i, j):
        return np.outer(k[i], k[j].conj())

    hot = [(A - w, -op(0, 3)), (A + w, op(0, 4)), (A, op(2, 5))]
    cold = [(A / 2, op(0, 1)), (A / 2 - w, op(2, 3)), (A / 2 + w, op(2, 4))]
    return hot, cold


def span_residual(listed: np.ndarray, computed: np.ndarray) -> float:
    """Relative residual of ``listed`` after projection onto ``computed``."""
    c = np.vdot(computed, listed) / np.vdot(computed, computed)
    return float(np.linalg.norm(listed - c * computed) / np.linalg.norm(listed))


def _match_listed(H, coupling, listed) -> tuple[bool, str]:
    computed = eigenoperator_decomposition(H, coupling)
    if len(computed) != len(listed):
        return False, f"{len(computed)} frequencies, expected {len(listed)}"
    worst_w, worst_r = 0.0, 0.0
    for omega, op in listed:
        match = min(computed, key=lambda c: abs(c[0] - omega))
        worst_w = max(worst_w, abs(match[0] - omega))
        worst_r = max(worst_r, span_residual(op, match[1]))
    return worst_w <= 1e-9 and worst_r <= 1e-9, f"max |dw| {worst_w:.1e}, max residual {worst_r:.1e}"


def check_listed_out() -> tuple[bool, str]:
    A, w = LISTED_POINT
    H = total_hamiltonian(EngineKind.SIM_OUT, A, w)
    return _match_listed(H, kron(out_and_out_coupling(), np.eye(2)), listed_out_operators(A, w))


def check_listed_frag() -> tuple[bool, str]:
    A, w = LISTED_POINT
    H = total_hamiltonian(EngineKind.SIM_FRAG, A, w)
    hot, cold = listed_frag_operators(A, w)
    ok_h, det_h = _match_listed(H, kron(fragmented_hot_coupling(), np.eye(2)), hot)
    ok_c, det_c = _match_listed(H, kron(fragmented_cold_coupling(), np.eye(2)), cold)
    return ok_h and ok_c, f"hot: {det_h}; cold: {det_c}"


# core algebra


def check_core_algebra() -> tuple[bool, str]:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(10):
        a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
        worst = max(worst, np.abs(kron(kron(a, b), c) - kron(a, kron(b, c))).max())
        rs, rb = random_density(rng, 3), random_density(rng, 2)
        joint = kron(rs, rb)
        worst = max(worst, np.abs(partial_trace(joint, [3, 2], 0) - rs).max())
        worst = max(worst, np.abs(partial_trace(joint, [3, 2], 1) - rb).max())
        H = random_hermitian(rng, 4)
        rho = random_density(rng, 4)
        out = unitary_evolve(rho, H, float(rng.uniform(0, 5)))
        worst = max(worst, abs(np.trace(out).real - 1.0))
        worst = max(worst, np.abs(np.linalg.eigvalsh(out) - np.linalg.eigvalsh(rho)).max())
        x, y, z = (random_density(rng, 3) for _ in range(3))
        if trace_distance(x, z) > trace_distance(x, y) + trace_distance(y, z) + 1e-12:
            return False, "triangle inequality violated"
        if abs(trace_distance(x, y) - trace_distance(y, x)) > 1e-14:
            return False, "trace distance not symmetric"
    pops = np.diag(thermal_state(qutrit_hamiltonian(3.0), 1.7)).real
    if not np.all(np.diff(pops) < 0):
        return False, "thermal populations not decreasing"
    return worst <= 1e-12, f"max deviation {worst:.1e}"


def check_eigenoperators() -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 1)
    worst_comm, worst_diss = 0.0, 0.0
    for kind in (EngineKind.SIM_OUT, EngineKind.SIM_FRAG):
        A = float(rng.uniform(5, 50))
        H = total_hamiltonian(kind, A, float(rng.uniform(0, A / 2)))
        channels = build_channels(H, kron(out_and_out_coupling(), np.eye(2)), BathSpec(float(rng.uniform(1, 50))))
        for ch in channels:
            comm = H @ ch.jump - ch.jump @ H
            worst_comm = max(worst_comm, np.abs(comm + ch.omega * ch.jump).max())
        out = dissipator_apply(random_density(rng, 6), channels)
        worst_diss = max(worst_diss, abs(np.trace(out)), np.abs(out - out.conj().T).max())
    ok = worst_comm <= 1e-9 and worst_diss <= 1e-12
    return ok, f"[H,A]+wA {worst_comm:.1e}, dissipator trace/hermiticity {worst_diss:.1e}"


# master equation


def _flip(channels, sign: float):
    return [replace(ch, rate_down=sign * ch.rate_down, rate_up=sign * ch.rate_up) for ch in channels]


def check_gibbs_fixed_point(tamper_kappa_sign: bool = False, n_states: int = 20) -> tuple[bool, str]:
    """Out-and-out baths must relax random 3- and 6-dim states to the Gibbs state."""
    rng = np.random.default_rng(SEED + 2)
    A, w = LISTED_POINT
    cases = [
        (qutrit_hamiltonian(A), out_and_out_coupling()),
        (total_hamiltonian(EngineKind.SIM_OUT, A, w), kron(out_and_out_coupling(), np.eye(2))),
    ]
    cfg = EvolutionConfig(t_max=2000.0, steady_tol=1e-11, steady_check_dt=5.0)
    worst = 0.0
    for i in range(n_states):
        H, X = cases[i % 2]
        T = float(rng.uniform(5, 60))
        channels = build_channels(H, X, BathSpec(T))
        if tamper_kappa_sign:
            channels = _flip(channels, -1.0)
        rho0 = random_density(rng, H.shape[0])
        try:
            rho, _ = evolve_to_steady(rho0, H, channels, cfg)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            return False, f"state {i}: {type(exc).__name__}: {exc}"
        if not np.all(np.isfinite(rho)):
            return False, f"state {i}: evolution diverged"
        worst = max(worst, trace_distance(rho, thermal_state(H, T)))
    return worst <= 1e-6, f"max trace distance to Gibbs {worst:.1e}"


def _sim_params(rng, kind, n):
    out = []
    for _ in range(n):
        A = float(rng.uniform(5, 50))
        T_H = float(rng.uniform(1, 60))
        out.append(
            EngineParams(
                kind,
                A=A,
                T_H=T_H,
                T_C=float(rng.uniform(0.5, T_H)),
                omega_sb=float(rng.uniform(0, min(25.0, A / 2))),
                t2=float(rng.uniform(1, 10)),
            )
        )
    return out


def _joint(p: EngineParams):
    H_T, channels, rho0 = joint_stroke_setup(p)
    rho, ledger = integrate(rho0, H_T, channels, EvolutionConfig(t_max=p.t2))
    return SimpleNamespace(H_T=H_T, channels=channels, rho0=rho0, rho=rho, ledger=ledger)


def check_gksl_integrity() -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 3)
    drift = herm = 0.0
    low = math.inf
    halving = 0.0
    for kind in (EngineKind.SIM_OUT, EngineKind.SIM_FRAG):
        for p in _sim_params(rng, kind, 2):
            s = _joint(p)
            led = s.ledger
            drift = max(drift, led.max_trace_drift_rate)
            herm = max(herm, led.max_hermiticity)
            low = min(low, led.min_eigenvalue)
            half, _ = integrate(s.rho0, s.H_T, s.channels, EvolutionConfig(t_max=p.t2, dt=led.dt / 2))
            halving = max(halving, np.abs(half - s.rho).max())
    ok = drift <= 1e-9 and herm <= 1e-12 and low >= -1e-8 and halving <= 1e-8
    return ok, f"drift {drift:.1e}/t, hermiticity {herm:.1e}, min eig {low:.1e}, dt-halving {halving:.1e}"


def check_superoperator_oracle(n_sets: int = 4) -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 4)
    worst = 0.0
    for i in range(n_sets):
        kind = EngineKind.SIM_OUT if i % 2 == 0 else EngineKind.SIM_FRAG
        (p,) = _sim_params(rng, kind, 1)
        s = _joint(p)
        worst = max(worst, trace_distance(s.rho, exact_evolution(s.rho0, s.H_T, s.channels, p.t2)))
    return worst <= 1e-7, f"max trace distance {worst:.1e}"


def check_heat_ledger() -> tuple[bool, str]:
    rng = np.random.default_rng(SEED + 5)
    worst_first_law = 0.0
    for kind in (EngineKind.SIM_OUT, EngineKind.SIM_FRAG):
        for p in _sim_params(rng, kind, 2):
            s = _joint(p)
            led = s.ledger
            for pos, net in ((led.q_pos_hot, led.q_net_hot), (led.q_pos_cold, led.q_net_cold)):
                if pos < 0 or pos < net:
                    return False, f"positive-part heat {pos} below max(0, {net})"
            dE = expectation(s.H_T, s.rho) - expectation(s.H_T, s.rho0)
            worst_first_law = max(worst_first_law, abs(dE - led.q_net_hot - led.q_net_cold))
    return worst_first_law <= 1e-6, f"first-law residual {worst_first_law:.1e}"


# engines


def check_seq_out_oracle() -> tuple[bool, str]:
    worst = 0.0
    A = 50.0
    for h in np.linspace(0.05, 5, 5):
        for c in np.linspace(0.05, 5, 5):
            for lam in np.linspace(0, math.pi, 5):
                p = EngineParams(EngineKind.SEQ_OUT, A=A, T_H=A / (2 * h), T_C=A / (2 * c), lam=float(lam))
                m = run_seq_out(p)
                q, w = analytic_seq_out(p.A, p.T_H, p.T_C, p.lam)
                worst = max(worst, abs(m.q_hot - q), abs(m.w_battery - w))
    return worst <= 1e-10 * A, f"max deviation {worst:.1e} on 125 points"


def check_seq_out_properties() -> tuple[bool, str]:
    A = 50.0
    lams = np.linspace(0, math.pi, 41)
    ref = [run_seq_out(EngineParams(EngineKind.SEQ_OUT, A, 30.0, 5.0, float(l))).w_battery for l in lams]
    for T_C in (1.0, 15.0, 30.0):
        w = [run_seq_out(EngineParams(EngineKind.SEQ_OUT, A, 30.0, T_C, float(l))).w_battery for l in lams]
        if np.abs(np.subtract(w, ref)).max() > 1e-12 or int(np.argmax(w)) != int(np.argmax(ref)):
            return False, f"work depends on T_C={T_C}"
    for T_H in np.arange(15.0, 101.0, 1.0):
        m = run_seq_out(EngineParams(EngineKind.SEQ_OUT, A, float(T_H), 15.0))
        if m.q_cold_stroke < 0 and abs(m.eta - 1.0) > 1e-12:
            return False, f"eta {m.eta} != 1 with absorbing cold stroke at T_H={T_H}"
        if m.w_battery < 0 or m.pcg > 100:
            return False, f"battery bounds violated at T_H={T_H}"
    # energy of the joint system is conserved along the work stroke
    rho = kron(thermal_state(qutrit_hamiltonian(A), 20.0), BATTERY_GROUND)
    worst = 0.0
    for kind in (EngineKind.SEQ_OUT, EngineKind.SEQ_FRAG):
        H_ws = work_stroke_hamiltonian(kind)
        H_tot = kron(qutrit_hamiltonian(A), np.eye(2)) + kron(np.eye(3), np.diag([-A / 4, A / 4]))
        for lam in np.linspace(0, math.pi, 7):
            out = unitary_evolve(rho, H_ws, float(lam))
            worst = max(worst, abs(expectation(H_tot, out) - expectation(H_tot, rho)))
    return worst <= 1e-10, f"work-stroke energy drift {worst:.1e}"


def check_seq_frag_periodicity() -> tuple[bool, str]:
    p = EngineParams(EngineKind.SEQ_FRAG, A=30.0, T_H=25.0, T_C=2.0, lam=1.2, n_cycles=4)
    cycles = run_seq_frag(p)
    ref = cycles[1]
    worst = 0.0
    for m in cycles[2:]:
        worst = max(worst, abs(m.w_battery - ref.w_battery), abs(m.q_hot - ref.q_hot), abs(m.q_total - ref.q_total))
    return worst <= 1e-3 * p.A, f"max cycle-to-cycle change {worst:.1e}"


def check_optimizer() -> tuple[bool, str]:
    """Seq-out optimum against the closed-form argmax, plus determinism and feasibility."""
    from scipy.optimize import minimize_scalar

    from .engines import analytic_seq_out_wmax
    from .optimize import Budget, maximize_work

    worst = 0.0
    for T_U in (5.0, 20.0, 80.0):
        r = maximize_work(EngineKind.SEQ_OUT, T_U, budget=Budget.fast())
        again = maximize_work(EngineKind.SEQ_OUT, T_U, budget=Budget.fast())
        if again.best_params != r.best_params or again.best_metrics != r.best_metrics:
            return False, f"non-deterministic at T_U={T_U}"
        p = r.best_params
        if not (p.T_C <= p.T_H <= T_U and 0 < p.A <= 50 and 0 <= p.lam <= math.pi):
            return False, f"infeasible optimum {p}"
        ref = minimize_scalar(lambda a: -analytic_seq_out_wmax(a, T_U), bounds=(1e-3, 50.0), method="bounded",
                              options={"xatol": 1e-10})
        worst = max(worst, abs(r.best_metrics.w_battery - (-ref.fun)), abs(p.lam - math.pi / 2), abs(p.T_H - T_U))
    return worst <= 1e-6, f"max deviation from closed-form optimum {worst:.1e}"


CHECKS = [
    Check("core algebra identities", "core", check_core_algebra),
    Check("eigenoperator property and dissipator trace", "dissipation", check_eigenoperators),
    Check("listed out-and-out eigenoperators", "listed", check_listed_out),
    Check("listed fragmented eigenoperators", "listed", check_listed_frag),
    Check("Gibbs state is the attracting fixed point", "gibbs", check_gibbs_fixed_point),
    Check("GKSL integrity and dt halving", "gksl", check_gksl_integrity),
    Check("RK4 against generator exponential", "oracle", check_superoperator_oracle),
    Check("heat ledger first law and positive parts", "gksl", check_heat_ledger),
    Check("seq-out simulation against closed form", "oracle", check_seq_out_oracle),
    Check("seq-out work, efficiency and energy conservation", "engines", check_seq_out_properties),
    Check("seq-frag periodicity after the first cycle", "engines", check_seq_frag_periodicity),
    Check("seq-out optimizer against closed-form optimum", "optimize", check_optimizer),
]

GROUPS = sorted({c.group for c in CHECKS})


def run_checks(only=None, tamper_kappa_sign: bool = False) -> list[Outcome]:
    outcomes = []
    for check in CHECKS:
        if only and check.group not in only:
            continue
        kwargs = {}
        if check.run is check_gibbs_fixed_point:
            kwargs["tamper_kappa_sign"] = tamper_kappa_sign
        try:
            passed, detail = check.run(**kwargs)
        except Exception as exc:  # a crash is a failed check, not a crashed battery
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        outcomes.append(Outcome(check.name, check.group, bool(passed), detail))
    return outcomes
