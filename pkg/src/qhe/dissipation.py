"""Lindblad channels for bosonic baths in the secular (diagonal) form.

A coupling operator is split into Bohr-frequency components of the
governing Hamiltonian; each component becomes one channel whose emission
and absorption rates satisfy detailed balance at the bath temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import TOL, DomainError, check_operator

OCCUPATION_EXPONENT_CAP = 700.0
MIN_RATE = 1e-300


@dataclass(frozen=True)
class BathSpec:
    T: float
    kappa: float = 1e-3
    label: str = "hot"

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"bath temperature must be positive, got {self.T}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if self.label not in ("hot", "cold"):
            raise DomainError(f"bath label must be 'hot' or 'cold', got {self.label!r}")


@dataclass(frozen=True, eq=False)
class DissipationChannel:
    """One jump operator lowering the energy by ``omega``, with its two rates."""

    jump: np.ndarray
    omega: float
    rate_down: float
    rate_up: float
    bath_label: str = "hot"

    @property
    def dim(self) -> int:
        return self.jump.shape[0]


def planck_occupation(omega: float, T: float) -> float:
    """Mean boson number 1/(exp(omega/T) - 1)."""
    if not omega > 0:
        raise DomainError(f"frequency must be positive, got {omega}")
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")
    x = omega / T
    if x > OCCUPATION_EXPONENT_CAP:
        return 0.0
    return 1.0 / math.expm1(x)


def spectral_density(omega: float, kappa: float) -> float:
    """Ohmic spectral density with the cutoff sent to infinity."""
    return kappa * omega


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(values)
    groups: list[list[int]] = []
    for idx in order:
        if groups and values[idx] - values[groups[-1][-1]] <= tol:
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    return groups


def eigenoperator_decomposition(H, coupling, tol: float = TOL.bohr_grouping):
    """Split ``coupling`` into components A(w) with [H, A(w)] = -w A(w), w > 0.

    Returns a list of ``(omega, jump)`` pairs sorted by increasing ``omega``.
    Degenerate eigenvalues and coinciding Bohr frequencies are merged within
    ``tol``, so each frequency appears exactly once.
    """
    H = check_operator(H, hermitian=True, name="Hamiltonian")
    X = check_operator(coupling, name="coupling operator")
    if X.shape != H.shape:
        raise DomainError(f"coupling shape {X.shape} does not match Hamiltonian {H.shape}")
    energies, vecs = np.linalg.eigh(H)
    levels = []
    for group in _cluster(energies, tol):
        V = vecs[:, group]
        levels.append((float(np.mean(energies[group])), V @ V.conj().T))

    # (omega, lower level, upper level) for every upward gap
    gaps = [(hi[0] - lo[0], a, b) for a, lo in enumerate(levels) for b, hi in enumerate(levels) if b > a]
    gap_values = np.array([g[0] for g in gaps])
    scale = max(1.0, float(np.max(np.abs(X))))
    result = []
    for group in _cluster(gap_values, tol) if gaps else []:
        omega = float(np.mean(gap_values[group]))
        if omega <= tol:
            continue
        jump = np.zeros_like(X)
        for g in group:
            _, a, b = gaps[g]
            jump += levels[a][1] @ X @ levels[b][1]
        if np.max(np.abs(jump)) > 1e-12 * scale:
            result.append((omega, jump))
    return result


def build_channels(H, coupling, bath: BathSpec) -> list[DissipationChannel]:
    channels = []
    for omega, jump in eigenoperator_decomposition(H, coupling):
        J = spectral_density(omega, bath.kappa)
        n = planck_occupation(omega, bath.T)
        rate_down = J * (1.0 + n)
        if rate_down < MIN_RATE:
            continue
        channels.append(DissipationChannel(jump, omega, rate_down, J * n, bath.label))
    return channels


def dissipator_apply(rho, channels) -> np.ndarray:
    """Action of the summed GKSL dissipators of ``channels`` on ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    for ch in channels:
        if ch.jump.shape != rho.shape:
            raise DomainError(f"channel dimension {ch.jump.shape} does not match state {rho.shape}")
        A = ch.jump
        Ad = A.conj().T
        AdA = Ad @ A
        AAd = A @ Ad
        out += ch.rate_down * (A @ rho @ Ad - 0.5 * (AdA @ rho + rho @ AdA))
        if ch.rate_up:
            out += ch.rate_up * (Ad @ rho @ A - 0.5 * (AAd @ rho + rho @ AAd))
    return out
