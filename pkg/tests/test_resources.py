import itertools

import numpy as np
import pytest

from clockgame.game import AncillaSpec, GameConfig, exact_win_probability
from clockgame.qudit import fourier_vector
from clockgame.resources import (
    cost_comparison,
    decode_probability_curve,
    entanglement_audit,
    min_local_dimension,
)


def random_schmidt(rng, D):
    c = rng.normal(size=D) + 1j * rng.normal(size=D)
    return c / np.linalg.norm(c)


def born_decode_probability(c, n=1):
    """Enumerate every Fourier outcome pair of Z^n (x) 1 applied to sum_j c_j |jj>."""
    D = len(c)
    psi = np.zeros(D * D, dtype=complex)
    for j in range(D):
        psi[j * D + j] = c[j] * np.exp(2j * np.pi * j * n / D)
    total = 0.0
    for x, y in itertools.product(range(D), repeat=2):
        if (x + y) % D == n % D:
            total += abs(np.vdot(np.kron(fourier_vector(D, x).amps, fourier_vector(D, y).amps), psi)) ** 2
    return total


def test_audit_maximal_is_tight():
    for N in range(1, 9):
        rep = entanglement_audit(AncillaSpec.maximal(N + 1), N)
        assert abs(rep.measured_entropy - np.log2(N + 1)) < 1e-10
        assert abs(rep.margin) < 1e-9 and rep.satisfied


def test_audit_schmidt_and_product():
    rep = entanglement_audit(AncillaSpec.schmidt([np.sqrt(0.9), np.sqrt(0.1)]), 1)
    assert abs(rep.measured_entropy - 0.4689955935892812) < 1e-12
    assert not rep.satisfied
    for N in (1, 3):
        rep = entanglement_audit(AncillaSpec.product(N + 1), N)
        assert abs(rep.measured_entropy) < 1e-12 and not rep.satisfied
    with pytest.raises(ValueError):
        entanglement_audit(AncillaSpec.maximal(3, K=3), 2)


def test_audit_oversized_maximal_passes_with_margin():
    rep = entanglement_audit(AncillaSpec.maximal(8), 3)
    assert rep.satisfied and abs(rep.margin - 1) < 1e-10


def test_decode_curve_values():
    assert abs(decode_probability_curve(np.full(5, 5**-0.5)) - 1) < 1e-12
    assert abs(decode_probability_curve([np.sqrt(0.9), np.sqrt(0.1)]) - 0.8) < 1e-12
    assert decode_probability_curve([1.0, 0.0]) == 0.5
    with pytest.raises(ValueError):
        decode_probability_curve([1.0, 1.0])
    with pytest.raises(ValueError):
        decode_probability_curve([1.0, 0.0], D=3)


def test_decode_curve_matches_born_enumeration():
    rng = np.random.default_rng(13)
    for D in range(2, 7):
        for _ in range(20):
            c = random_schmidt(rng, D)
            for n in (0, 1, D - 1):
                assert abs(born_decode_probability(c, n) - decode_probability_curve(c)) < 1e-10


def test_uniform_magnitudes_maximize_decode():
    rng = np.random.default_rng(14)
    for D in range(2, 7):
        for _ in range(1000):
            assert decode_probability_curve(random_schmidt(rng, D)) <= 1 + 1e-12


def test_sub_bound_ancilla_loses():
    rng = np.random.default_rng(15)
    for D in (2, 3, 4):
        for _ in range(5):
            mags = rng.uniform(0.1, 1, size=D)
            c = mags / np.linalg.norm(mags) * np.exp(1j * rng.uniform(0, 2 * np.pi, size=D))
            anc = AncillaSpec.schmidt(c)
            assert not entanglement_audit(anc, D - 1).satisfied
            assert exact_win_probability(D - 1, anc, grid=4) < 1 - 1e-9


def test_tightness_iff_decode_one():
    # with D = N+1, audit margin >= 0 exactly when the coefficients have uniform magnitude
    D = 3
    uniform = np.exp(1j * np.array([0.0, 1.0, 2.0])) / np.sqrt(3)
    skewed = np.array([0.7, 0.5, np.sqrt(1 - 0.74)])
    assert entanglement_audit(AncillaSpec.schmidt(uniform), 2).satisfied
    assert not entanglement_audit(AncillaSpec.schmidt(skewed), 2).satisfied
    # phases do not change the entropy, but they do change the decode rate of this strategy
    assert abs(decode_probability_curve(np.full(3, 3**-0.5)) - 1) < 1e-12
    assert decode_probability_curve(uniform) < 1


def test_min_local_dimension():
    assert min_local_dimension(1) == 2
    assert min_local_dimension(7) == 8
    assert min_local_dimension(1023) == 1024
    with pytest.raises(ValueError):
        min_local_dimension(0)
    with pytest.raises(ValueError):
        GameConfig(N=4, D=min_local_dimension(4) - 1)


def test_cost_comparison():
    c = cost_comparison(5, 1023)
    assert (c.gottesman_qubits, c.clockgame_qubits) == (5115, 55)
    c = cost_comparison(2, 1)
    assert (c.gottesman_qubits, c.clockgame_qubits) == (2, 4)
    c = cost_comparison(3, 255)
    assert (c.gottesman_qubits, c.clockgame_qubits) == (765, 27)
    for N in range(1, 300):
        assert cost_comparison(4, N).clockgame_qubits == 4 + 4 * int(np.ceil(np.log2(N + 1)))
    with pytest.raises(ValueError):
        cost_comparison(1, 3)
