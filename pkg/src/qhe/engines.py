"""The four qutrit engines and their per-cycle figures of merit.

Engine kinds:

``seq-out``
    heat / work / cold strokes, baths couple every level pair.
``seq-frag``
    same strokes, hot bath couples only |0>-|2>, cold bath only |0>-|1>.
``sim-out``
    one stroke with both baths and the battery switched on at once, then an
    exact re-thermalization of the qutrit with the cold bath.
``sim-frag``
    as ``sim-out`` with the fragmented bath couplings during stroke one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from .dissipation import BathSpec, build_channels
from .dynamics import EvolutionConfig, HeatLedger, evolve_to_steady, integrate
from .qcore import (
    BATTERY_GROUND,
    SIGMA_MINUS,
    SIGMA_PLUS,
    DomainError,
    battery_hamiltonian,
    expectation,
    kron,
    partial_trace,
    qutrit_hamiltonian,
    thermal_state,
    trace_distance,
    transition,
    unitary_evolve,
)

KAPPA = 1e-3
THERMAL_STROKE_TIME = 500.0
OMEGA_SLACK = 1e-12


class MetricError(ArithmeticError):
    """Battery gained energy while no heat was absorbed."""


class EngineKind(str, Enum):
    SEQ_OUT = "seq-out"
    SEQ_FRAG = "seq-frag"
    SIM_OUT = "sim-out"
    SIM_FRAG = "sim-frag"

    @property
    def sequential(self) -> bool:
        return self in (EngineKind.SEQ_OUT, EngineKind.SEQ_FRAG)

    @property
    def fragmented(self) -> bool:
        return self in (EngineKind.SEQ_FRAG, EngineKind.SIM_FRAG)


@dataclass(frozen=True)
class EngineParams:
    """Engine parameters in natural units.

    Sequential engines use ``lam`` (= omega_sb * t1) for the work stroke;
    simultaneous engines use ``omega_sb`` and ``t2``.
    """

    kind: EngineKind
    A: float
    T_H: float
    T_C: float
    lam: float = math.pi / 2
    omega_sb: float = 0.0
    t2: float = 0.0
    kappa: float = KAPPA
    n_cycles: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", EngineKind(self.kind))
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        if not (self.T_H > 0 and self.T_C > 0):
            raise DomainError(f"temperatures must be positive, got T_H={self.T_H}, T_C={self.T_C}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not self.kind.sequential:
            if not 0 <= self.omega_sb <= self.A / 2 + OMEGA_SLACK:
                raise DomainError(f"omega_sb must lie in [0, A/2] = [0, {self.A / 2}], got {self.omega_sb}")
            if not self.t2 >= 0:
                raise DomainError(f"t2 must be non-negative, got {self.t2}")
        if self.kind is EngineKind.SEQ_FRAG and self.n_cycles < 2:
            raise DomainError(f"seq-frag needs at least two cycles, got {self.n_cycles}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class CycleMetrics:
    """Heats, battery work, charge percentage and efficiency of one cycle.

    ``q_cold_stroke`` is the heat released to the cold bath in the last stroke
    (negative when the qutrit absorbs); ``q_cold_in_stroke1`` is the positive
    cold-bath intake during the joint stroke of a simultaneous engine.
    """

    q_hot: float
    q_cold_stroke: float
    q_cold_in_stroke1: float
    q_total: float
    w_battery: float
    pcg: float
    eta: float
    closure: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def out_and_out_coupling() -> np.ndarray:
    return np.ones((3, 3), dtype=complex) - np.eye(3)


def fragmented_hot_coupling() -> np.ndarray:
    return transition(0, 2, 3) + transition(2, 0, 3)


def fragmented_cold_coupling() -> np.ndarray:
    return transition(0, 1, 3) + transition(1, 0, 3)


def ladder_raise() -> np.ndarray:
    """J+ = |1><0| + |2><1| on the qutrit."""
    return transition(1, 0, 3) + transition(2, 1, 3)


def work_stroke_hamiltonian(kind, omega_sb: float = 1.0) -> np.ndarray:
    """Qutrit-battery interaction; commutes with the bare S+B Hamiltonian."""
    kind = EngineKind(kind)
    if kind.fragmented:
        a12, a21 = transition(1, 2, 3), transition(2, 1, 3)
        H = kron(a12, SIGMA_PLUS) + kron(a21, SIGMA_MINUS)
    else:
        Jp = ladder_raise()
        H = kron(Jp, SIGMA_MINUS) + kron(Jp.conj().T, SIGMA_PLUS)
    return omega_sb * H


def bare_hamiltonian(A: float) -> np.ndarray:
    return kron(qutrit_hamiltonian(A), np.eye(2)) + kron(np.eye(3), battery_hamiltonian(A))


def total_hamiltonian(kind, A: float, omega_sb: float) -> np.ndarray:
    return bare_hamiltonian(A) + work_stroke_hamiltonian(kind, omega_sb)


def heaviside(x: float) -> float:
    return 1.0 if x > 0 else 0.0


def metrics_from(q_hot, q_cold_stroke, w_battery, A, q_cold_in_stroke1=0.0, closure=0.0) -> CycleMetrics:
    """Assemble the cycle metrics from the raw heats and the battery work.

    Absorbed heat counts from the hot stroke (or both baths during a joint
    stroke) plus the cold stroke whenever the qutrit absorbs there; theta(0)=0.
    """
    if not A > 0:
        raise DomainError(f"A must be positive, got {A}")
    q_total = q_hot + q_cold_in_stroke1 - q_cold_stroke * heaviside(-q_cold_stroke)
    if q_total > 0:
        eta = w_battery / q_total
    elif w_battery > 1e-12 * A:
        raise MetricError(f"battery work {w_battery:.6g} with non-positive absorbed heat {q_total:.6g}")
    else:
        eta = 0.0
    return CycleMetrics(
        q_hot=float(q_hot),
        q_cold_stroke=float(q_cold_stroke),
        q_cold_in_stroke1=float(q_cold_in_stroke1),
        q_total=float(q_total),
        w_battery=float(w_battery),
        pcg=float(200.0 * w_battery / A),
        eta=float(eta),
        closure=float(closure),
    )


# closed forms for the sequential out-and-out engine


def analytic_seq_out(A: float, T_H: float, T_C: float, lam: float) -> tuple[float, float]:
    """Hot-bath heat and battery work of the out-and-out sequential engine.

    With h = A/2T_H and c = A/2T_C,
    Q_H = A (2 sinh(c-h) + sinh c - sinh h) / ((2 cosh c + 1)(2 cosh h + 1)) and
    W_B = A (1 + e^h)(1 - cos 2 lam) / (4 (1 + e^h + e^2h)); both are evaluated
    here in an overflow-free rearrangement.
    """
    h = A / (2 * T_H)
    c = A / (2 * T_C)
    eh, ec = math.exp(-h), math.exp(-c)
    # numerator and denominator multiplied by exp(-c-h)
    num = eh * eh - ec * ec + 0.5 * eh * (1 - ec * ec) - 0.5 * ec * (1 - eh * eh)
    den = (1 + ec + ec * ec) * (1 + eh + eh * eh)
    q_hot = A * num / den
    w = A * (eh * eh + eh) * (1 - math.cos(2 * lam)) / (4 * (1 + eh + eh * eh))
    return q_hot, w


def analytic_seq_out_wmax(A: float, T_H: float) -> float:
    """Battery work of the out-and-out sequential engine at lam = pi/2."""
    eh = math.exp(-A / (2 * T_H))
    return A * (eh * eh + eh) / (2 * (1 + eh + eh * eh))


# engine protocols


def run_seq_out(params: EngineParams) -> CycleMetrics:
    p = params
    H_S = qutrit_hamiltonian(p.A)
    H_B = battery_hamiltonian(p.A)
    rho_c = thermal_state(H_S, p.T_C)
    # the out-and-out bath has the Gibbs state as its unique fixed point
    rho_h = thermal_state(H_S, p.T_H)
    q_hot = expectation(H_S, rho_h) - expectation(H_S, rho_c)
    joint = unitary_evolve(kron(rho_h, BATTERY_GROUND), work_stroke_hamiltonian(p.kind), p.lam)
    w = expectation(H_B, partial_trace(joint, [3, 2], 1)) - expectation(H_B, BATTERY_GROUND)
    q_cold = expectation(H_S, partial_trace(joint, [3, 2], 0)) - expectation(H_S, rho_c)
    return metrics_from(q_hot, q_cold, w, p.A)


def run_seq_frag(params: EngineParams, cfg: EvolutionConfig | None = None) -> list[CycleMetrics]:
    """Run ``params.n_cycles`` cycles, each seeded with the previous end state.

    The thermal strokes integrate the single-channel master equations for
    500 hbar/delta (earlier if stationary). A fresh ground-state battery is
    used in every work stroke.
    """
    p = params
    cfg = cfg or EvolutionConfig(t_max=THERMAL_STROKE_TIME)
    H_S = qutrit_hamiltonian(p.A)
    H_B = battery_hamiltonian(p.A)
    hot = build_channels(H_S, fragmented_hot_coupling(), BathSpec(p.T_H, p.kappa, "hot"))
    cold = build_channels(H_S, fragmented_cold_coupling(), BathSpec(p.T_C, p.kappa, "cold"))
    H_SB = work_stroke_hamiltonian(p.kind)
    e_ground = expectation(H_B, BATTERY_GROUND)

    rho = thermal_state(H_S, p.T_C)
    cycles = []
    for _ in range(p.n_cycles):
        start = rho
        rho_h, _ = evolve_to_steady(start, H_S, hot, cfg)
        q_hot = expectation(H_S, rho_h) - expectation(H_S, start)
        joint = unitary_evolve(kron(rho_h, BATTERY_GROUND), H_SB, p.lam)
        w = expectation(H_B, partial_trace(joint, [3, 2], 1)) - e_ground
        rho_s = partial_trace(joint, [3, 2], 0)
        rho, _ = evolve_to_steady(rho_s, H_S, cold, cfg)
        q_cold = expectation(H_S, rho_s) - expectation(H_S, rho)
        cycles.append(metrics_from(q_hot, q_cold, w, p.A, closure=trace_distance(start, rho)))
    return cycles


@dataclass
class JointStroke:
    """Everything produced by the first stroke of a simultaneous engine."""

    H_T: np.ndarray
    channels: list
    rho0: np.ndarray
    rho: np.ndarray
    ledger: HeatLedger
    metrics: CycleMetrics


def joint_stroke_setup(params: EngineParams) -> tuple[np.ndarray, list, np.ndarray]:
    """Hamiltonian, bath channels and initial S (x) B state of the joint stroke."""
    p = params
    if p.kind.sequential:
        raise DomainError(f"{p.kind.value} is not a simultaneous engine")
    H_T = total_hamiltonian(p.kind, p.A, min(p.omega_sb, p.A / 2))
    if p.kind.fragmented:
        hot_x, cold_x = fragmented_hot_coupling(), fragmented_cold_coupling()
    else:
        hot_x = cold_x = out_and_out_coupling()
    I2 = np.eye(2)
    channels = build_channels(H_T, kron(hot_x, I2), BathSpec(p.T_H, p.kappa, "hot")) + build_channels(
        H_T, kron(cold_x, I2), BathSpec(p.T_C, p.kappa, "cold")
    )
    rho0 = kron(thermal_state(qutrit_hamiltonian(p.A), p.T_C), BATTERY_GROUND)
    return H_T, channels, rho0


def simulate_simultaneous(params: EngineParams, cfg: EvolutionConfig | None = None) -> JointStroke:
    p = params
    H_T, channels, rho0 = joint_stroke_setup(p)
    H_S = qutrit_hamiltonian(p.A)
    H_B = battery_hamiltonian(p.A)
    rho_c = thermal_state(H_S, p.T_C)
    cfg = cfg or EvolutionConfig(t_max=p.t2)
    rho, ledger = integrate(rho0, H_T, channels, cfg)
    w = expectation(H_B, partial_trace(rho, [3, 2], 1)) - expectation(H_B, BATTERY_GROUND)
    # stroke two: an out-and-out cold bath returns the qutrit exactly to rho_c
    q2 = expectation(H_S, partial_trace(rho, [3, 2], 0)) - expectation(H_S, rho_c)
    metrics = metrics_from(ledger.q_pos_hot, q2, w, p.A, q_cold_in_stroke1=ledger.q_pos_cold)
    return JointStroke(H_T, channels, rho0, rho, ledger, metrics)


def run_sim_out(params: EngineParams) -> CycleMetrics:
    if params.kind is not EngineKind.SIM_OUT:
        params = replace(params, kind=EngineKind.SIM_OUT)
    return simulate_simultaneous(params).metrics


def run_sim_frag(params: EngineParams) -> CycleMetrics:
    if params.kind is not EngineKind.SIM_FRAG:
        params = replace(params, kind=EngineKind.SIM_FRAG)
    return simulate_simultaneous(params).metrics


def run_engine(params: EngineParams) -> CycleMetrics:
    """Headline metrics of one engine; the second cycle for ``seq-frag``."""
    kind = params.kind
    if kind is EngineKind.SEQ_OUT:
        return run_seq_out(params)
    if kind is EngineKind.SEQ_FRAG:
        return run_seq_frag(params)[1]
    return simulate_simultaneous(params).metrics
