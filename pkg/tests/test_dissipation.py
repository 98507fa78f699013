import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density
from oracles import bohr_spectrum
from qhe.dissipation import (
    BathSpec,
    DissipationChannel,
    build_channels,
    dissipator_apply,
    eigenoperator_decomposition,
    planck_occupation,
    spectral_density,
)
from qhe.engines import (
    EngineKind,
    fragmented_cold_coupling,
    fragmented_hot_coupling,
    out_and_out_coupling,
    total_hamiltonian,
)
from qhe.qcore import TOL, DomainError, kron, qutrit_hamiltonian
from qhe.verify import listed_out_operators, listed_frag_operators, span_residual

I2 = np.eye(2)


def test_planck_occupation():
    assert planck_occupation(1.0, 1.0) == pytest.approx(1 / (math.e - 1), rel=1e-15)
    assert planck_occupation(1e-6, 1.0) == pytest.approx(1e6, rel=1e-6)
    assert planck_occupation(800.0, 1.0) == 0.0
    assert planck_occupation(50.0, 1e-3) == 0.0
    for bad in ((0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)):
        with pytest.raises(DomainError):
            planck_occupation(*bad)


def test_bath_spec_validation():
    with pytest.raises(DomainError):
        BathSpec(0.0)
    with pytest.raises(DomainError):
        BathSpec(1.0, kappa=-1e-3)
    with pytest.raises(DomainError):
        BathSpec(1.0, label="warm")


@given(st.floats(0.1, 100.0), st.floats(0.01, 500.0))
def test_detailed_balance(omega, T):
    (ch,) = build_channels(np.diag([0.0, omega]), np.array([[0, 1], [1, 0]]), BathSpec(T))
    assert ch.omega == pytest.approx(omega)
    assert ch.rate_down == pytest.approx(spectral_density(omega, 1e-3) * (1 + planck_occupation(omega, T)))
    if omega / T < 700:
        assert ch.rate_up / ch.rate_down == pytest.approx(math.exp(-omega / T), rel=1e-10)


def test_qutrit_out_and_out_channels():
    A = 10.0
    chans = eigenoperator_decomposition(qutrit_hamiltonian(A), out_and_out_coupling())
    assert [w for w, _ in chans] == pytest.approx([A / 2, A])
    lower = chans[0][1]
    assert np.allclose(lower, np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]]))


def test_fragmented_couplings_give_one_channel():
    H = qutrit_hamiltonian(8.0)
    (hot,) = eigenoperator_decomposition(H, fragmented_hot_coupling())
    (cold,) = eigenoperator_decomposition(H, fragmented_cold_coupling())
    assert hot[0] == pytest.approx(8.0) and cold[0] == pytest.approx(4.0)
    assert hot[1][0, 2] == 1 and cold[1][0, 1] == 1


@given(st.floats(1.0, 50.0), st.floats(0.0, 1.0), st.sampled_from([EngineKind.SIM_OUT, EngineKind.SIM_FRAG]))
def test_eigenoperator_property(A, frac, kind):
    H = total_hamiltonian(kind, A, frac * A / 2)
    X = kron(out_and_out_coupling(), I2)
    parts = eigenoperator_decomposition(H, X)
    assert all(w > 0 for w, _ in parts)
    # each frequency appears once: neighbours are further apart than the grouping tolerance
    assert np.all(np.diff([w for w, _ in parts]) > TOL.bohr_grouping)
    gaps = bohr_spectrum(H)
    for w, op in parts:
        # [H, A(w)] = -w A(w): the jump lowers the energy by w
        assert np.abs(H @ op - op @ H + w * op).max() <= 1e-9 * max(1.0, A)
        assert min(abs(w - g) for g in gaps) <= 1e-9 * A


def test_decomposition_reassembles_coupling():
    H = total_hamiltonian(EngineKind.SIM_OUT, 30.0, 7.0)
    X = kron(out_and_out_coupling(), I2)
    parts = eigenoperator_decomposition(H, X)
    down = sum(op for _, op in parts)
    # the coupling is Hermitian with no energy-diagonal part in this case
    assert np.abs(down + down.conj().T - X).max() <= 1e-12


def test_listed_out_spectrum_and_span():
    A, w = 50.0, 10.0
    H = total_hamiltonian(EngineKind.SIM_OUT, A, w)
    computed = eigenoperator_decomposition(H, kron(out_and_out_coupling(), I2))
    assert [c[0] for c in computed] == pytest.approx(sorted([A / 2 + w, A / 2 - w, A + w, A - w, A / 2]), abs=1e-12)
    for omega, listed in listed_out_operators(A, w):
        (match,) = [op for f, op in computed if abs(f - omega) < 1e-9]
        assert span_residual(listed, match) <= 1e-9


def test_listed_out_last_operator_needs_no_extra_normalization():
    A, w = 50.0, 10.0
    H = total_hamiltonian(EngineKind.SIM_OUT, A, w)
    computed = dict(eigenoperator_decomposition(H, kron(out_and_out_coupling(), I2)))
    for omega, listed in listed_out_operators(A, w):
        match = computed[min(computed, key=lambda f: abs(f - omega))]
        c = np.vdot(match, listed) / np.vdot(match, match)
        assert abs(abs(c) - 1) <= 1e-12


def test_listed_frag_spectrum_and_span():
    A, w = 50.0, 10.0
    H = total_hamiltonian(EngineKind.SIM_FRAG, A, w)
    hot, cold = listed_frag_operators(A, w)
    for coupling, listed in ((fragmented_hot_coupling(), hot), (fragmented_cold_coupling(), cold)):
        computed = eigenoperator_decomposition(H, kron(coupling, I2))
        assert sorted(c[0] for c in computed) == pytest.approx(sorted(l[0] for l in listed), abs=1e-12)
        for omega, op in listed:
            (match,) = [m for f, m in computed if abs(f - omega) < 1e-9]
            assert span_residual(op, match) <= 1e-9


def test_degenerate_frequencies_merge():
    # at omega_sb = A/4 the gaps A/2 + w and A - w coincide
    A = 40.0
    H = total_hamiltonian(EngineKind.SIM_OUT, A, A / 4)
    parts = eigenoperator_decomposition(H, kron(out_and_out_coupling(), I2))
    freqs = [w for w, _ in parts]
    assert len(freqs) == 4
    assert freqs == pytest.approx([A / 4, A / 2, 3 * A / 4, 5 * A / 4])
    H0 = total_hamiltonian(EngineKind.SIM_OUT, A, 0.0)
    assert [w for w, _ in eigenoperator_decomposition(H0, kron(out_and_out_coupling(), I2))] == pytest.approx(
        [A / 2, A]
    )


@given(st.integers(0, 2**32 - 1), st.floats(0.5, 80.0))
def test_dissipator_traceless_and_hermitian(seed, T):
    rng = np.random.default_rng(seed)
    H = total_hamiltonian(EngineKind.SIM_OUT, float(rng.uniform(2, 50)), 3.0)
    channels = build_channels(H, kron(out_and_out_coupling(), I2), BathSpec(T))
    out = dissipator_apply(random_density(rng, 6), channels)
    assert abs(np.trace(out)) <= 1e-12
    assert np.abs(out - out.conj().T).max() <= 1e-12


def test_dissipator_shape_mismatch():
    ch = DissipationChannel(np.zeros((3, 3)), 1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        dissipator_apply(np.eye(2) / 2, [ch])


def test_negligible_channels_dropped():
    channels = build_channels(qutrit_hamiltonian(1.0), out_and_out_coupling(), BathSpec(1.0, kappa=1e-320))
    assert channels == []
