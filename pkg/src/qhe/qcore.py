"""Dense operator algebra and state primitives for small Hilbert spaces.

Operators and states are plain complex ``numpy`` arrays. The ``check_*``
helpers validate inputs at API boundaries and return a normalized copy.
Tensor products put the qutrit on the left, so the battery index varies
fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_DIM = 8


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


@dataclass(frozen=True)
class NumericTolerances:
    hermitian: float = 1e-12
    trace: float = 1e-9
    positivity: float = 1e-8
    real_part: float = 1e-10
    bohr_grouping: float = 1e-9


TOL = NumericTolerances()


def check_operator(M, *, hermitian: bool = False, name: str = "operator") -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be a square matrix, got shape {M.shape}")
    if not 1 <= M.shape[0] <= MAX_DIM:
        raise DomainError(f"{name} dimension {M.shape[0]} outside 1..{MAX_DIM}")
    if hermitian:
        residual = np.max(np.abs(M - M.conj().T))
        if residual > TOL.hermitian * max(1.0, np.max(np.abs(M))):
            raise DomainError(f"{name} is not Hermitian (residual {residual:.3e})")
    return M


def check_density_matrix(rho, *, tol: NumericTolerances = TOL) -> np.ndarray:
    """Validate ``rho`` as a unit-trace, Hermitian, positive semidefinite matrix."""
    rho = check_operator(rho, name="density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > tol.hermitian:
        raise DomainError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol.trace:
        raise DomainError(f"density matrix trace {tr!r} differs from 1")
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -tol.positivity:
        raise DomainError(f"density matrix has negative eigenvalue {lowest:.3e}")
    return rho


def hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def transition(i: int, j: int, dim: int) -> np.ndarray:
    """Return the matrix unit |i><j| in dimension ``dim``."""
    op = np.zeros((dim, dim), dtype=complex)
    op[i, j] = 1.0
    return op


def projector(i: int, dim: int) -> np.ndarray:
    return transition(i, i, dim)


SIGMA_PLUS = transition(1, 0, 2)
SIGMA_MINUS = transition(0, 1, 2)
BATTERY_GROUND = projector(0, 2)


def qutrit_hamiltonian(A: float) -> np.ndarray:
    """Equally spaced qutrit, diag(-A/2, 0, A/2) in the ladder basis."""
    if not A > 0:
        raise DomainError(f"qutrit gap A must be positive, got {A}")
    return np.diag([-A / 2, 0.0, A / 2]).astype(complex)


def battery_hamiltonian(A: float) -> np.ndarray:
    """Two-level battery (A/4) sigma_z with ground state |0> at -A/4."""
    if not A > 0:
        raise DomainError(f"battery scale A must be positive, got {A}")
    return np.diag([-A / 4, A / 4]).astype(complex)


def thermal_state(H, T: float) -> np.ndarray:
    """Gibbs state exp(-H/T)/Z; ``T = inf`` gives the maximally mixed state."""
    H = check_operator(H, hermitian=True, name="Hamiltonian")
    if not T > 0:
        raise DomainError(f"temperature must be positive, got {T}")
    d = H.shape[0]
    if np.isinf(T):
        return np.eye(d, dtype=complex) / d
    energies, vecs = np.linalg.eigh(H)
    # shift by the ground energy so that T -> 0 does not overflow
    weights = np.exp(-(energies - energies[0]) / T)
    weights /= weights.sum()
    rho = (vecs * weights) @ vecs.conj().T
    return hermitize(rho)


def kron(*ops) -> np.ndarray:
    """Kronecker product, leftmost factor slowest-varying."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Reduced state on the subsystem(s) ``keep`` of a multipartite operator."""
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    n = len(dims)
    if int(np.prod(dims)) != rho.shape[0] or rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"dims {dims} do not match operator of shape {rho.shape}")
    keep = [keep] if np.isscalar(keep) else list(keep)
    if not keep or any(not 0 <= k < n for k in keep) or len(set(keep)) != len(keep):
        raise DomainError(f"invalid subsystem selection {keep} for {n} subsystems")
    keep = sorted(keep)
    tensor = rho.reshape(dims + dims)
    row = list(range(n))
    # traced subsystems share their row label, kept ones get a fresh column label
    col = [n + k if k in keep else k for k in range(n)]
    out_idx = keep + [n + k for k in keep]
    reduced = np.einsum(tensor, row + col, out_idx)
    d_keep = int(np.prod([dims[k] for k in keep]))
    return reduced.reshape(d_keep, d_keep)


def unitary_evolve(rho, H, t: float) -> np.ndarray:
    """Return U rho U^dagger with U = exp(-i H t) from the spectral decomposition."""
    H = check_operator(H, hermitian=True, name="Hamiltonian")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != H.shape:
        raise DomainError(f"state shape {rho.shape} does not match Hamiltonian {H.shape}")
    energies, vecs = np.linalg.eigh(H)
    U = (vecs * np.exp(-1j * energies * t)) @ vecs.conj().T
    return hermitize(U @ rho @ U.conj().T)


def trace_distance(rho, sigma) -> float:
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DomainError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    eigs = np.linalg.eigvalsh(hermitize(rho - sigma))
    return float(0.5 * np.sum(np.abs(eigs)))


def expectation(H, rho) -> float:
    """Real expectation value Tr(H rho) of a Hermitian observable."""
    value = np.trace(np.asarray(H, dtype=complex) @ np.asarray(rho, dtype=complex))
    if abs(value.imag) > TOL.real_part * max(1.0, abs(value.real)):
        raise DomainError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)
