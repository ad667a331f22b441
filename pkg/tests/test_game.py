import itertools

import numpy as np
import pytest

from clockgame.game import (
    AncillaSpec,
    GameConfig,
    ReducedRefereeState,
    apply_strategy,
    binomial_pmf,
    decode_distribution,
    decode_timebin,
    exact_win_probability,
    monte_carlo_win,
    phase_family,
    play_round,
    ref_index,
    referee_state,
    referee_verify,
    single_photon_probability,
    state_win_probability,
    stellar_state,
    visibility,
)
from clockgame.qudit import DensityMatrix, HilbertSpace, fourier_vector, partial_trace


def brute_force_win(config, ancilla):
    """Enumerate Fourier outcomes on the explicit joint state; no shared scoring code."""
    ref = referee_state(config)
    joint = apply_strategy(ref, ancilla)
    D, K = ancilla.D, ancilla.K
    target = ref.amps
    if isinstance(joint, DensityMatrix):
        dims = joint.space.dims
        rho = joint.entries
    else:
        dims = joint.space.dims
        rho = np.outer(joint.amps, joint.amps.conj())
    total = 0.0
    for xs in itertools.product(range(D), repeat=K):
        proj = np.ones(1, dtype=complex)
        for x in xs:
            proj = np.kron(proj, fourier_vector(D, x).amps)
        # (1_ref (x) <x~|) rho (1_ref (x) |x~>)
        M = np.kron(np.eye(dims[0]), proj.conj()[None, :])
        post = M @ rho @ M.conj().T
        if sum(xs) % D == config.n % D:
            total += float(np.real(target.conj() @ post @ target))
    return total


def random_schmidt(rng, D):
    c = rng.normal(size=D) + 1j * rng.normal(size=D)
    return c / np.linalg.norm(c)


def test_game_config_validation():
    with pytest.raises(ValueError):
        GameConfig(N=3, D=3)
    with pytest.raises(ValueError):
        GameConfig(N=2, D=3, n=3)
    with pytest.raises(ValueError):
        GameConfig(N=2, D=3, K=3, phases=(0.1,))
    GameConfig(N=3, D=3, allow_oversized=True)


def test_referee_state_layout():
    cfg = GameConfig(N=2, D=3, n=2, phases=(0.7,))
    amps = referee_state(cfg).amps
    assert abs(amps[ref_index(0, 2, 2)] - 2**-0.5) < 1e-15
    assert abs(amps[ref_index(1, 2, 2)] - np.exp(0.7j) * 2**-0.5) < 1e-15
    assert referee_state(GameConfig(N=2, D=3, n=0)).amps[0] == 1


def test_decode_timebin():
    assert decode_timebin([2, 3], 4) == 1
    with pytest.raises(ValueError):
        decode_timebin([4], 4)


@pytest.mark.parametrize("N,K", [(1, 2), (2, 2), (3, 2), (2, 3), (1, 4)])
def test_maximal_ancilla_matches_brute_force(N, K):
    anc = AncillaSpec.maximal(N + 1, K)
    for n in range(N + 1):
        cfg = GameConfig(N, N + 1, K, n, phase_family(K, 1.234))
        assert abs(brute_force_win(cfg, anc) - 1) < 1e-12
        assert abs(state_win_probability(referee_state(cfg), anc) - 1) < 1e-12


def test_random_schmidt_matches_brute_force():
    rng = np.random.default_rng(7)
    for D in (2, 3, 4):
        for _ in range(4):
            anc = AncillaSpec.schmidt(random_schmidt(rng, D))
            for n in range(D):
                cfg = GameConfig(D - 1, D, 2, n, (rng.uniform(0, 2 * np.pi),))
                exact = state_win_probability(referee_state(cfg), anc)
                assert abs(exact - brute_force_win(cfg, anc)) < 1e-12


def test_density_ancilla_matches_brute_force():
    rng = np.random.default_rng(8)
    D = 3
    vecs = [random_schmidt(rng, D * D) for _ in range(3)]
    w = np.array([0.5, 0.3, 0.2])
    rho = sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vecs))
    anc = AncillaSpec.density(DensityMatrix(HilbertSpace((D, D)), rho))
    for n in range(D):
        cfg = GameConfig(2, D, 2, n, (0.4,))
        assert abs(state_win_probability(referee_state(cfg), anc) - brute_force_win(cfg, anc)) < 1e-12


def test_schmidt_win_rate():
    anc = AncillaSpec.schmidt([np.sqrt(0.9), np.sqrt(0.1)])
    assert abs(exact_win_probability(1, anc) - 0.8) < 1e-12


def test_decode_distribution_schmidt():
    rng = np.random.default_rng(2)
    for D in (2, 3, 5):
        c = random_schmidt(rng, D)
        dist = decode_distribution(GameConfig(D - 1, D, 2, 1), AncillaSpec.schmidt(c))
        assert abs(dist[1] - abs(c.sum()) ** 2 / D) < 1e-12
        assert abs(dist.sum() - 1) < 1e-12


def test_post_state_fidelity_maximal():
    for N in (1, 3):
        anc = AncillaSpec.maximal(N + 1)
        cfg = GameConfig(N, N + 1, 2, N, (2.0,))
        rng = np.random.default_rng(0)
        for _ in range(10):
            rec = play_round(cfg, anc, rng)
            assert abs(rec.post_fidelity - 1) < 1e-12
            assert rec.won


def test_product_ancilla_disturbs_referee():
    # a product ancilla in the meter basis gets entangled with the referee
    anc = AncillaSpec.product(2)
    cfg = GameConfig(1, 2, 2, 1, (0.0,))
    joint = apply_strategy(referee_state(cfg), anc)
    ref_marginal = partial_trace(joint, [0])
    fid = ref_marginal.expectation(referee_state(cfg).as_state())
    assert fid < 1 - 1e-6
    assert abs(fid - 0.5) < 1e-12


def test_computational_product_leaves_referee_but_decodes_at_chance():
    anc = AncillaSpec.schmidt([1.0, 0.0])
    cfg = GameConfig(1, 2, 2, 1)
    assert abs(decode_distribution(cfg, anc)[1] - 0.5) < 1e-12


def test_vacuum_round():
    for D in (2, 4):
        anc = AncillaSpec.maximal(D)
        rec = play_round(GameConfig(D - 1, D, 2, 0), anc, 3)
        assert rec.decoded_bin == 0 and rec.won


def test_play_round_reproducible():
    anc = AncillaSpec.schmidt([np.sqrt(0.7), np.sqrt(0.3)])
    cfg = GameConfig(1, 2, 2, 1, (0.3,))
    assert play_round(cfg, anc, 99) == play_round(cfg, anc, 99)


def test_monte_carlo_agrees_with_exact():
    anc = AncillaSpec.schmidt([np.sqrt(0.9), np.sqrt(0.1)])
    p, err = monte_carlo_win(1, anc, 4000, seed=17)
    assert abs(p - 0.8) < 3 * max(err, 1e-3)
    with pytest.raises(ValueError):
        monte_carlo_win(1, anc, 0)


def test_play_round_outcome_frequencies():
    # empirical decode distribution against the exact Born table
    rng = np.random.default_rng(4)
    c = random_schmidt(rng, 3)
    anc = AncillaSpec.schmidt(c)
    cfg = GameConfig(2, 3, 2, 2, (1.0,))
    exact = decode_distribution(cfg, anc)
    trials = 6000
    counts = np.bincount([play_round(cfg, anc, rng).decoded_bin for _ in range(trials)], minlength=3)
    sigma = np.sqrt(exact * (1 - exact) / trials)
    assert np.all(np.abs(counts / trials - exact) < 4 * sigma + 1e-9)


def test_stellar_state_and_visibility():
    nu = visibility([(0.5, 0.0), (0.5, np.pi / 2)])
    assert abs(nu - (0.5 - 0.5j)) < 1e-15
    rho = stellar_state(3, 0.1, [(1.0, 0.4)])
    assert abs(np.trace(rho.entries) - 1) < 1e-12
    eps = single_photon_probability(3, 0.1)
    assert abs(eps - 3 * 0.1 * 0.9**2) < 1e-15
    assert abs(binomial_pmf(1, 3, 0.1) - eps) < 1e-15
    assert abs(rho.entries[0, 0] - (1 - eps)) < 1e-15
    with pytest.raises(ValueError):
        stellar_state(3, 0.1, [(0.6, 0.0)])


def test_stellar_input_wins_with_maximal_ancilla():
    # coherent point source: every block is a pure bin state, so play is perfect
    rho = stellar_state(3, 0.2, [(1.0, 0.9)])
    anc = AncillaSpec.maximal(4)
    assert abs(state_win_probability(rho, anc) - 1) < 1e-12


def test_mixed_source_win_is_linear():
    anc = AncillaSpec.schmidt([np.sqrt(0.8), np.sqrt(0.2), 0.0])
    srcs = [(0.3, 0.2), (0.7, 2.5)]
    mixed = state_win_probability(stellar_state(2, 0.1, srcs), anc)
    parts = sum(p * state_win_probability(stellar_state(2, 0.1, [(1.0, phi)]), anc) for p, phi in srcs)
    assert abs(mixed - parts) < 1e-12


def test_referee_verify_forms():
    cfg = GameConfig(2, 3, 2, 1, (0.5,))
    ref = referee_state(cfg)
    assert abs(referee_verify(ref, cfg) - 1) < 1e-15
    assert abs(referee_verify(ref.as_state(), cfg) - 1) < 1e-12
    assert abs(referee_verify(ref.as_state().density(), cfg) - 1) < 1e-12
    other = ReducedRefereeState(2, 2, referee_state(GameConfig(2, 3, 2, 2)).amps)
    assert referee_verify(other, cfg) < 1e-15
