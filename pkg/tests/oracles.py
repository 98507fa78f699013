"""Reference implementations used only by the tests.

They are written from the defining formulas and avoid the package's
production paths: no eigendecomposition for exponentials, no vectorized
Liouvillian, no rearranged closed forms.
"""

import math

import numpy as np


def expm_taylor(M: np.ndarray, terms: int = 30) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    M = np.asarray(M, dtype=complex)
    norm = np.linalg.norm(M, 1)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0.5 else 0
    X = M / 2**s
    out = np.eye(M.shape[0], dtype=complex)
    term = np.eye(M.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ X / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def gibbs(H: np.ndarray, T: float) -> np.ndarray:
    E = expm_taylor(-np.asarray(H, dtype=complex) / T)
    return E / np.trace(E)


def lindblad_rhs(rho, H, jumps):
    """-i[H, rho] + sum_k g_k (L rho L^+ - {L^+ L, rho}/2) for (g_k, L) in ``jumps``."""
    out = -1j * (H @ rho - rho @ H)
    for g, L in jumps:
        Ld = L.conj().T
        out = out + g * (L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L))
    return out


def channel_jumps(channels):
    """Expand package channels into plain (rate, operator) pairs."""
    jumps = []
    for ch in channels:
        jumps.append((ch.rate_down, ch.jump))
        if ch.rate_up:
            jumps.append((ch.rate_up, ch.jump.conj().T))
    return jumps


def generator_columns(H, jumps) -> np.ndarray:
    """Generator matrix on row-major vec(rho), one basis matrix at a time."""
    d = H.shape[0]
    L = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d * d):
        E = np.zeros((d, d), dtype=complex)
        E.flat[k] = 1.0
        L[:, k] = lindblad_rhs(E, H, jumps).reshape(-1)
    return L


def evolve_exact(rho0, H, jumps, t):
    d = H.shape[0]
    v = expm_taylor(generator_columns(H, jumps) * t) @ np.asarray(rho0, dtype=complex).reshape(-1)
    return v.reshape(d, d)


def trace_norm_distance(a, b) -> float:
    return 0.5 * float(np.sum(np.linalg.svd(np.asarray(a) - np.asarray(b), compute_uv=False)))


def seq_out_closed_form(A, T_H, T_C, lam):
    """Hot heat and battery work of the out-and-out sequential engine, textbook form."""
    h, c = A / (2 * T_H), A / (2 * T_C)
    q = A * (2 * math.sinh(c - h) + math.sinh(c) - math.sinh(h)) / ((2 * math.cosh(c) + 1) * (2 * math.cosh(h) + 1))
    w = A * (1 + math.exp(h)) * (1 - math.cos(2 * lam)) / (4 * (1 + math.exp(h) + math.exp(2 * h)))
    return q, w


def seq_out_from_populations(A, T_H, T_C, lam):
    """Same quantities from Gibbs populations and the two-photon swap amplitudes.

    The work stroke only couples |1,0> with |0,1> and |2,0> with |1,1>; each
    pair rotates by the angle ``lam``.
    """
    E = np.array([-A / 2, 0.0, A / 2])

    def pops(T):
        w = np.exp(-(E - E[0]) / T)
        return w / w.sum()

    ph, pc = pops(T_H), pops(T_C)
    q = float(E @ (ph - pc))
    moved = (ph[1] + ph[2]) * math.sin(lam) ** 2
    return q, moved * A / 2


def bohr_spectrum(H) -> list[float]:
    E = np.sort(np.linalg.eigvalsh(H))
    gaps = sorted({round(b - a, 9) for i, a in enumerate(E) for b in E[i + 1 :] if b - a > 1e-9})
    return gaps
