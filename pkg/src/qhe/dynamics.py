"""GKSL time integration with heat-current bookkeeping.

The generator is time independent, so one classical Runge-Kutta step is a
fixed linear map on the vectorized state. ``rk4_propagator`` builds that map
by pushing the identity through the four RK4 stages; whole runs of steps are
then applied as matrix powers of it. Vectorization is row-major:
``vec(rho)[i*d + j] == rho[i, j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dissipation import dissipator_apply
from .qcore import DomainError, check_operator, hermitize

MAX_DT = 0.01
BLOCK = 64  # samples between re-Hermitization of the carried state


class IntegrationAccuracyError(RuntimeError):
    """The integrated state left the set of density matrices; reduce dt."""


@dataclass(frozen=True)
class EvolutionConfig:
    """Integration settings; ``dt=None`` selects the step from the generator.

    ``sample_dt`` spaces the heat-current samples and the positivity checks,
    ``steady_check_dt`` spaces the convergence checks of ``evolve_to_steady``.
    """

    t_max: float
    dt: float | None = None
    sample_dt: float = 0.0025
    steady_tol: float = 1e-10
    steady_check_dt: float = 1.0
    record_currents: bool = False
    accuracy: float = 1e-9

    def __post_init__(self):
        if not self.t_max >= 0:
            raise DomainError(f"t_max must be non-negative, got {self.t_max}")
        if self.dt is not None and not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.sample_dt > 0 or not self.steady_check_dt > 0:
            raise DomainError("sampling intervals must be positive")


@dataclass
class HeatLedger:
    """Heat drawn from each bath; ``q_pos_*`` integrates only positive currents."""

    q_pos_hot: float = 0.0
    q_pos_cold: float = 0.0
    q_net_hot: float = 0.0
    q_net_cold: float = 0.0
    samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    dt: float = 0.0
    max_trace_drift_rate: float = 0.0
    min_eigenvalue: float = 1.0
    max_hermiticity: float = 0.0


def gksl_rhs(rho, H, channels) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if rho.shape != H.shape:
        raise DomainError(f"state shape {rho.shape} does not match Hamiltonian {H.shape}")
    return -1j * (H @ rho - rho @ H) + dissipator_apply(rho, channels)


def _kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n, m = A.shape[0], B.shape[0]
    return (A[:, None, :, None] * B[None, :, None, :]).reshape(n * m, n * m)


def dissipator_superop(channels, dim: int) -> np.ndarray:
    I = np.eye(dim)
    D = np.zeros((dim * dim, dim * dim), dtype=complex)
    for ch in channels:
        if ch.jump.shape != (dim, dim):
            raise DomainError(f"channel dimension {ch.jump.shape} does not match {dim}")
        for rate, A in ((ch.rate_down, ch.jump), (ch.rate_up, ch.jump.conj().T)):
            if not rate:
                continue
            AdA = A.conj().T @ A
            D += rate * (_kron(A, A.conj()) - 0.5 * (_kron(AdA, I) + _kron(I, AdA.T)))
    return D


def commutator_superop(H: np.ndarray) -> np.ndarray:
    I = np.eye(H.shape[0])
    return -1j * (_kron(H, I) - _kron(I, H.T))


def liouvillian(H, channels) -> np.ndarray:
    """Matrix of rho -> -i[H, rho] + D(rho) acting on row-major vec(rho)."""
    H = check_operator(H, hermitian=True, name="Hamiltonian")
    return commutator_superop(H) + dissipator_superop(channels, H.shape[0])


def rk4_step(rho, H, channels, dt: float) -> np.ndarray:
    """One explicit classical RK4 step on the matrix state, without any cleanup."""
    k1 = gksl_rhs(rho, H, channels)
    k2 = gksl_rhs(rho + 0.5 * dt * k1, H, channels)
    k3 = gksl_rhs(rho + 0.5 * dt * k2, H, channels)
    k4 = gksl_rhs(rho + dt * k3, H, channels)
    return rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(L: np.ndarray, dt: float) -> np.ndarray:
    """Linear map of one RK4 step for dv/dt = L v."""
    I = np.eye(L.shape[0], dtype=complex)
    k1 = L
    k2 = L @ (I + 0.5 * dt * k1)
    k3 = L @ (I + 0.5 * dt * k2)
    k4 = L @ (I + dt * k3)
    return I + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def generator_scale(H, channels) -> float:
    """Upper estimate of the generator's spectral radius."""
    energies = np.linalg.eigvalsh(np.asarray(H, dtype=complex))
    spread = float(energies[-1] - energies[0])
    rates = sum((ch.rate_down + ch.rate_up) * float(np.linalg.norm(ch.jump, 2)) ** 2 for ch in channels)
    return spread + rates


def choose_dt(H, channels, t_max: float, accuracy: float = 1e-9) -> float:
    """Largest step whose accumulated RK4 truncation error stays below ``accuracy``.

    The local error of RK4 on a mode of frequency w is (w dt)^5 / 120, so over
    t_max/dt steps the error is about t_max w (w dt)^4 / 120.
    """
    w = generator_scale(H, channels)
    if w <= 0 or t_max <= 0:
        return MAX_DT
    return min(MAX_DT, (120.0 * accuracy / (w * t_max)) ** 0.25 / w)


def _step_grid(cfg: EvolutionConfig, H, channels, interval: float):
    dt = cfg.dt if cfg.dt is not None else choose_dt(H, channels, cfg.t_max, cfg.accuracy)
    n_steps = max(1, math.ceil(cfg.t_max / dt - 1e-9))
    dt = cfg.t_max / n_steps
    stride = max(1, min(n_steps, round(interval / dt)))
    return dt, n_steps, stride


def integrate(rho0, H, channels, cfg: EvolutionConfig):
    """Evolve ``rho0`` for ``cfg.t_max`` and account the heat from each bath.

    Channels are split into hot and cold by their ``bath_label``. The heat
    current of bath X is Tr(H D_X(rho)); it is sampled every ``sample_dt``
    and integrated with the trapezoid rule, once as is (``q_net_*``) and once
    with each panel clamped at zero (``q_pos_*``). Sampled states are
    checked for trace drift, Hermiticity and positivity; the carried state is
    re-Hermitized and renormalized every ``BLOCK`` samples.

    Returns ``(rho, ledger)``.
    """
    rho0 = check_operator(rho0, name="initial state")
    H = check_operator(H, hermitian=True, name="Hamiltonian")
    d = H.shape[0]
    if rho0.shape != H.shape:
        raise DomainError(f"state shape {rho0.shape} does not match Hamiltonian {H.shape}")
    ledger = HeatLedger()
    if cfg.t_max == 0:
        return rho0.copy(), ledger

    dt, n_steps, stride = _step_grid(cfg, H, channels, cfg.sample_dt)
    ledger.dt = dt
    D_hot = dissipator_superop([ch for ch in channels if ch.bath_label == "hot"], d)
    D_cold = dissipator_superop([ch for ch in channels if ch.bath_label == "cold"], d)
    if any(ch.bath_label not in ("hot", "cold") for ch in channels):
        raise DomainError("channels must be labelled 'hot' or 'cold'")
    L = commutator_superop(H) + D_hot + D_cold
    P = rk4_propagator(L, dt)
    Ps = np.linalg.matrix_power(P, stride)

    # Tr(H X) = vec(H^T) . vec(X)
    h_row = H.T.reshape(-1)
    c_hot = h_row @ D_hot
    c_cold = h_row @ D_cold

    n_full, remainder = divmod(n_steps, stride)
    n_samples = n_full + (1 if remainder else 0)
    raw = np.empty((n_samples, d * d), dtype=complex)
    since_cleanup = np.empty(n_samples)
    v = rho0.reshape(-1).copy()
    if n_full:
        # [Ps, Ps^2, ..., Ps^B] applied to the carried state one block at a time
        block = min(BLOCK, n_full)
        stack = np.empty((block, d * d, d * d), dtype=complex)
        stack[0] = Ps
        for k in range(1, block):
            stack[k] = Ps @ stack[k - 1]
        offsets = stride * dt * np.arange(1, block + 1)
        for start in range(0, n_full, block):
            count = min(block, n_full - start)
            raw[start:start + count] = stack[:count] @ v
            since_cleanup[start:start + count] = offsets[:count]
            v = _cleanup(raw[start + count - 1], d)
    elapsed = since_cleanup[n_full - 1] if n_full else 0.0
    if remainder:
        v = np.linalg.matrix_power(P, remainder) @ v
        raw[-1] = v
        since_cleanup[-1] = elapsed + remainder * dt

    states = raw.reshape(-1, d, d)
    traces = np.trace(states, axis1=1, axis2=2)
    ledger.max_trace_drift_rate = float(np.max(np.abs(traces - 1.0) / since_cleanup))
    ledger.max_hermiticity = float(np.abs(states - states.conj().transpose(0, 2, 1)).max())
    states = 0.5 * (states + states.conj().transpose(0, 2, 1))
    states /= np.trace(states, axis1=1, axis2=2).real[:, None, None]
    lowest = np.linalg.eigvalsh(states)[:, 0]
    ledger.min_eigenvalue = float(lowest.min())
    if ledger.min_eigenvalue < -1e-6:
        k = int(np.argmin(lowest))
        raise IntegrationAccuracyError(
            f"state eigenvalue {lowest[k]:.3e} at sample {k}; reduce dt (currently {dt:.3e})"
        )

    t = np.concatenate([[0.0], stride * dt * np.arange(1, n_full + 1), [cfg.t_max] if remainder else []])
    flat = np.concatenate([rho0.reshape(1, -1), states.reshape(n_samples, -1)])
    J = np.column_stack([(flat @ c_hot).real, (flat @ c_cold).real])
    panels = 0.5 * (J[1:] + J[:-1]) * np.diff(t)[:, None]
    ledger.q_net_hot, ledger.q_net_cold = (float(x) for x in panels.sum(axis=0))
    ledger.q_pos_hot, ledger.q_pos_cold = (float(x) for x in np.clip(panels, 0.0, None).sum(axis=0))
    if cfg.record_currents:
        ledger.samples = np.column_stack([t, J])
    return states[-1].copy(), ledger


def _cleanup(v: np.ndarray, d: int) -> np.ndarray:
    state = hermitize(v.reshape(d, d))
    return (state / np.trace(state).real).reshape(-1)


def evolve_to_steady(rho0, H, channels, cfg: EvolutionConfig):
    """Integrate until max|d rho/dt| < ``cfg.steady_tol`` or ``cfg.t_max``.

    Convergence is checked every ``cfg.steady_check_dt``. Returns
    ``(rho, elapsed_time)``; reaching ``t_max`` is not an error.
    """
    rho = check_operator(rho0, name="initial state")
    H = check_operator(H, hermitian=True, name="Hamiltonian")
    d = H.shape[0]
    if rho.shape != H.shape:
        raise DomainError(f"state shape {rho.shape} does not match Hamiltonian {H.shape}")
    L = liouvillian(H, channels)
    v = rho.reshape(-1)
    if cfg.t_max == 0 or np.max(np.abs(L @ v)) < cfg.steady_tol:
        return rho.copy(), 0.0

    dt, n_steps, stride = _step_grid(cfg, H, channels, cfg.steady_check_dt)
    P = rk4_propagator(L, dt)
    chunk = np.linalg.matrix_power(P, stride)
    steps = 0
    while steps < n_steps:
        take = min(stride, n_steps - steps)
        v = (chunk if take == stride else np.linalg.matrix_power(P, take)) @ v
        steps += take
        v = _cleanup(v, d)
        if np.max(np.abs(L @ v)) < cfg.steady_tol:
            break
    lowest = float(np.linalg.eigvalsh(v.reshape(d, d))[0])
    if lowest < -1e-6:
        raise IntegrationAccuracyError(f"state eigenvalue {lowest:.3e}; reduce dt (currently {dt:.3e})")
    return v.reshape(d, d), steps * dt
