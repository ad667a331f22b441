"""Clock-game engine: referee states, the CZ^n strategy, decoding and scoring.

The referee's photonic modes are kept in the single-excitation sector with
basis ``{vac} + {(party p, bin m)}``; index 0 is the vacuum and
``(p, m)`` lives at ``1 + p*N + (m - 1)`` with parties counted from 0 and
bins from 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .qudit import (
    DensityMatrix,
    HilbertSpace,
    StateVector,
    fourier_matrix,
    ghz_state,
    measure_subsystem,
    partial_trace,
)
from .seeding import derive_seed


@dataclass(frozen=True)
class GameConfig:
    N: int
    D: int
    K: int = 2
    n: int = 0
    phases: tuple[float, ...] = ()
    allow_oversized: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.D < 2:
            raise ValueError(f"D must be >= 2, got {self.D}")
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not 0 <= self.n <= self.N:
            raise ValueError(f"time-bin n={self.n} outside 0..{self.N}")
        if self.N > self.D - 1 and not self.allow_oversized:
            raise ValueError(f"N={self.N} needs D >= N+1, got D={self.D}")
        phases = tuple(float(p) % (2 * np.pi) for p in self.phases)
        if not phases:
            phases = (0.0,) * (self.K - 1)
        if len(phases) != self.K - 1:
            raise ValueError(f"expected {self.K - 1} phases for K={self.K}, got {len(phases)}")
        object.__setattr__(self, "phases", phases)

    @property
    def phi(self) -> float:
        return self.phases[0]


@dataclass(frozen=True, eq=False)
class ReducedRefereeState:
    N: int
    K: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != self.K * self.N + 1:
            raise ValueError(f"expected {self.K * self.N + 1} amplitudes, got {amps.size}")
        if abs(np.vdot(amps, amps).real - 1) > 1e-12:
            raise ValueError("referee state is not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def space(self) -> HilbertSpace:
        return HilbertSpace((self.K * self.N + 1,))

    def as_state(self) -> StateVector:
        return StateVector(self.space, self.amps)


@dataclass(frozen=True, eq=False)
class AncillaSpec:
    """Shared ancilla for K parties holding one D-level qudit each.

    ``kind`` is ``"maximal"`` (GHZ), ``"schmidt"`` (sum_j c_j |j>^K),
    ``"product"`` (|0~>^K, the all-zero Fourier state, i.e. a product state in
    the meter basis), or ``"density"`` (an arbitrary density matrix).
    """

    kind: str
    D: int
    K: int = 2
    coeffs: np.ndarray | None = None
    rho: DensityMatrix | None = None

    def __post_init__(self):
        if self.kind not in ("maximal", "schmidt", "product", "density"):
            raise ValueError(f"unknown ancilla kind {self.kind!r}")
        if self.kind == "schmidt":
            c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
            if c.size != self.D:
                raise ValueError(f"expected {self.D} Schmidt coefficients, got {c.size}")
            if abs(np.vdot(c, c).real - 1) > 1e-12:
                raise ValueError("Schmidt coefficients are not normalized")
            object.__setattr__(self, "coeffs", c)
        if self.kind == "density":
            if self.rho is None or self.rho.space.dims != (self.D,) * self.K:
                raise ValueError(f"density ancilla must live on {self.K} qudits of dimension {self.D}")

    @classmethod
    def maximal(cls, D: int, K: int = 2) -> "AncillaSpec":
        return cls("maximal", D, K)

    @classmethod
    def schmidt(cls, coeffs: Sequence[complex], K: int = 2) -> "AncillaSpec":
        c = np.asarray(coeffs, dtype=complex)
        return cls("schmidt", c.size, K, coeffs=c)

    @classmethod
    def product(cls, D: int, K: int = 2) -> "AncillaSpec":
        return cls("product", D, K)

    @classmethod
    def density(cls, rho: DensityMatrix) -> "AncillaSpec":
        dims = rho.space.dims
        return cls("density", dims[0], len(dims), rho=rho)

    @property
    def is_pure(self) -> bool:
        return self.kind != "density"

    def state(self) -> StateVector:
        if self.kind == "maximal":
            return ghz_state(self.D, self.K)
        space = HilbertSpace((self.D,) * self.K)
        if self.kind == "schmidt":
            amps = np.zeros(space.dim, dtype=complex)
            stride = sum(self.D**i for i in range(self.K))
            amps[np.arange(self.D) * stride] = self.coeffs
            return StateVector(space, amps)
        if self.kind == "product":
            return StateVector(space, np.full(space.dim, space.dim**-0.5, dtype=complex))
        raise ValueError("density ancilla has no state vector")

    @cached_property
    def amplitudes(self) -> np.ndarray:
        return self.state().amps

    def density_matrix(self) -> DensityMatrix:
        return self.rho if self.kind == "density" else self.state().density()

    def label(self) -> str:
        if self.kind == "schmidt":
            return "schmidt(" + ";".join(f"{c.real:.6g}" if c.imag == 0 else f"{c:.6g}" for c in self.coeffs) + ")"
        return self.kind


@dataclass(frozen=True)
class RoundRecord:
    outcomes: tuple[int, ...]
    decoded_bin: int
    referee_accept: bool
    post_fidelity: float
    seed: int
    timebin: int = 0
    phases: tuple[float, ...] = field(default=())

    @property
    def won(self) -> bool:
        return self.decoded_bin == self.timebin and self.referee_accept


def ref_index(p: int, m: int, N: int) -> int:
    """Position of (party p, bin m) in the reduced referee basis."""
    return 1 + p * N + (m - 1)


def referee_state(config: GameConfig) -> ReducedRefereeState:
    N, K, n = config.N, config.K, config.n
    amps = np.zeros(K * N + 1, dtype=complex)
    if n == 0:
        amps[0] = 1.0
    else:
        phases = (0.0, *config.phases)
        for p in range(K):
            amps[ref_index(p, n, N)] = np.exp(1j * phases[p]) / np.sqrt(K)
    return ReducedRefereeState(N, K, amps)


def binomial_pmf(k: int, N: int, epsilon1: float) -> float:
    from math import comb

    return comb(N, k) * epsilon1**k * (1 - epsilon1) ** (N - k)


def single_photon_probability(N: int, epsilon1: float) -> float:
    """Probability that exactly one of N independent bins carries a photon."""
    return N * epsilon1 * (1 - epsilon1) ** (N - 1)


def visibility(sources: Sequence[tuple[float, float]]) -> complex:
    return complex(sum(p * np.exp(-1j * phi) for p, phi in sources))


def stellar_state(N: int, epsilon1: float, sources: Sequence[tuple[float, float]]) -> DensityMatrix:
    """Weak thermal light over N bins, truncated to at most one photon (two parties).

    ``sources`` lists ``(p_q, phi_q)`` point sources.
    """
    probs = np.array([p for p, _ in sources], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
        raise ValueError(f"source probabilities must be nonnegative and sum to 1, got {probs.sum()!r}")
    if not 0 < epsilon1 < 1:
        raise ValueError(f"epsilon1 must lie in (0, 1), got {epsilon1}")
    eps = single_photon_probability(N, epsilon1)
    rho = np.zeros((2 * N + 1, 2 * N + 1), dtype=complex)
    rho[0, 0] = 1 - eps
    nu = visibility(sources)
    for i in range(1, N + 1):
        a, b = ref_index(0, i, N), ref_index(1, i, N)
        w = eps / N
        rho[a, a] += w / 2
        rho[b, b] += w / 2
        rho[a, b] += w * nu / 2
        rho[b, a] += w * np.conj(nu) / 2
    return DensityMatrix.hermitized(HilbertSpace((2 * N + 1,)), rho)


@lru_cache(maxsize=64)
def _phase_table(N: int, D: int, K: int) -> np.ndarray:
    """exp(2 pi i m j_p / D) for every referee index r=(p,m) and ancilla basis index."""
    digits = np.indices((D,) * K).reshape(K, -1)
    table = np.ones((K * N + 1, D**K), dtype=complex)
    for p in range(K):
        for m in range(1, N + 1):
            table[ref_index(p, m, N)] = np.exp(2j * np.pi * m * digits[p] / D)
    table.setflags(write=False)
    return table


def _row_phases(r: int, N: int, D: int, K: int) -> np.ndarray:
    if r == 0:
        return np.ones(D**K, dtype=complex)
    p, m = divmod(r - 1, N)
    digits = np.indices((D,) * K).reshape(K, -1)[p]
    return np.exp(2j * np.pi * (m + 1) * digits / D)


def apply_strategy(ref: ReducedRefereeState | DensityMatrix, ancilla: AncillaSpec) -> StateVector | DensityMatrix:
    """Apply every party's CZ^m gates, controlled by its bin-m mode, to its ancilla qudit.

    Pure referee and pure ancilla give a ``StateVector`` over dims
    ``(K*N+1, D, ..., D)``; anything mixed gives a ``DensityMatrix``.
    """
    if isinstance(ref, ReducedRefereeState):
        N, K = ref.N, ref.K
        ref_dim = ref.amps.size
    else:
        ref_dim = ref.space.dim
        K = ancilla.K
        N, rem = divmod(ref_dim - 1, K)
        if rem or ref.space.dims != (ref_dim,):
            raise ValueError(f"referee density matrix of dimension {ref_dim} does not fit K={K}")
    if isinstance(ref, ReducedRefereeState) and ref.K != ancilla.K:
        raise ValueError(f"referee has K={ref.K} parties but ancilla has K={ancilla.K}")
    D = ancilla.D
    space = HilbertSpace((ref_dim,) + (D,) * K)
    table = _phase_table(N, D, K)
    if isinstance(ref, ReducedRefereeState) and ancilla.is_pure:
        joint = np.zeros((ref_dim, D**K), dtype=complex)
        a = ancilla.state().amps
        for r in np.flatnonzero(ref.amps):
            joint[r] = ref.amps[r] * table[r] * a
        return StateVector.from_unnormalized(space, joint)
    rho_ref = ref.as_state().density().entries if isinstance(ref, ReducedRefereeState) else ref.entries
    rho_anc = ancilla.density_matrix().entries
    u = table.reshape(-1)
    joint = np.kron(rho_ref, rho_anc) * np.outer(u, u.conj())
    return DensityMatrix.hermitized(space, joint)


def decode_timebin(outcomes: Sequence[int], D: int) -> int:
    if any(not 0 <= x < D for x in outcomes):
        raise ValueError(f"outcomes {list(outcomes)} out of range for D={D}")
    return int(sum(outcomes)) % D


def referee_verify(post: ReducedRefereeState | StateVector | DensityMatrix, config: GameConfig) -> float:
    """Acceptance probability <Psi|rho|Psi> of the referee's projective test."""
    target = referee_state(config).as_state()
    if isinstance(post, ReducedRefereeState):
        return abs(np.vdot(target.amps, post.amps)) ** 2
    if isinstance(post, StateVector):
        return target.fidelity(post)
    return post.expectation(target)


def referee_marginal(joint: StateVector | DensityMatrix) -> DensityMatrix:
    return partial_trace(joint, [0])


def _bin_blocks(diag: np.ndarray, N: int, K: int):
    """Yield (time-bin, weight, referee indices, normalized diagonal weights)."""
    if diag[0] > 0:
        yield 0, float(diag[0]), np.array([0]), np.array([1.0])
    for m in range(1, N + 1):
        idx = np.array([ref_index(p, m, N) for p in range(K)])
        w = float(diag[idx].sum())
        if w > 0:
            yield m, w, idx, diag[idx] / w


def _fourier_amplitudes(vecs: np.ndarray, D: int, K: int) -> np.ndarray:
    """<x~_1 ... x~_K | v> for every outcome tuple (last axis, row-major)."""
    if D**K <= 256:
        return vecs @ _fourier_kron(D, K).conj()
    lead = vecs.shape[:-1]
    t = np.fft.fftn(vecs.reshape(lead + (D,) * K), axes=range(len(lead), len(lead) + K), norm="ortho")
    return t.reshape(lead + (D**K,))


@lru_cache(maxsize=16)
def _fourier_kron(D: int, K: int) -> np.ndarray:
    f = fourier_matrix(D).entries
    out = np.ones((1, 1), dtype=complex)
    for _ in range(K):
        out = np.kron(out, f)
    return out


@lru_cache(maxsize=16)
def _decoded_bins(D: int, K: int) -> np.ndarray:
    return np.indices((D,) * K).reshape(K, -1).sum(axis=0) % D


def _block_outcome_weights(idx, d, N: int, ancilla: AncillaSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-outcome (joint accept, decode) weights for one bin block.

    Accept weight for outcome x is sum_{r,r'} d_r d_r' <x~|V_r rho V_r'^dag|x~>,
    the entanglement fidelity of the block; decode weight is the Born
    probability sum_r d_r <x~|V_r rho V_r^dag|x~>.
    """
    D, K = ancilla.D, ancilla.K
    phases = [_row_phases(int(r), N, D, K) for r in idx]
    if ancilla.is_pure:
        a = ancilla.amplitudes
        amps = _fourier_amplitudes(np.array(phases) * a, D, K)
        accept = np.abs(d @ amps) ** 2
        decode = d @ (np.abs(amps) ** 2)
        return accept, decode
    rho = ancilla.rho.entries
    F = _fourier_kron(D, K)
    # W_r = F^dag diag(u_r); G_x[r,r'] = (W_r rho W_r'^dag)_xx
    W = [F.conj().T * u[None, :] for u in phases]
    accept = np.zeros(D**K)
    decode = np.zeros(D**K)
    for i, wi in enumerate(W):
        wr = wi @ rho
        for j, wj in enumerate(W):
            g = np.einsum("xa,xa->x", wr, wj.conj()).real
            accept += d[i] * d[j] * g
            if i == j:
                decode += d[i] * g
    return accept, decode


def state_win_probability(ref: ReducedRefereeState | DensityMatrix, ancilla: AncillaSpec, D: int | None = None) -> float:
    """Exact win probability of the CZ^n strategy for a given referee state.

    The referee state is split into time-bin blocks; each block is scored by
    summing, over outcome tuples that decode to its bin, the probability that
    the referee's test on that block succeeds.
    """
    D = ancilla.D if D is None else D
    K = ancilla.K
    if isinstance(ref, ReducedRefereeState):
        N = ref.N
        diag = np.abs(ref.amps) ** 2
    else:
        N = (ref.space.dim - 1) // K
        diag = np.real(np.diag(ref.entries))
    bins = _decoded_bins(D, K)
    total = 0.0
    for m, w, idx, d in _bin_blocks(diag, N, K):
        accept, _ = _block_outcome_weights(idx, d, N, ancilla)
        total += w * float(accept[bins == m % D].sum())
    return total


def decode_distribution(config: GameConfig, ancilla: AncillaSpec) -> np.ndarray:
    """Exact distribution of the decoded bin (sum of outcomes mod D)."""
    ref = referee_state(config)
    diag = np.abs(ref.amps) ** 2
    bins = _decoded_bins(ancilla.D, ancilla.K)
    (_, _, idx, d), = list(_bin_blocks(diag, config.N, config.K))
    _, decode = _block_outcome_weights(idx, d, config.N, ancilla)
    return np.bincount(bins, weights=decode, minlength=ancilla.D)


def phase_family(K: int, phi: float) -> tuple[float, ...]:
    """Referee phases for a single grid value: party p gets p * phi."""
    return tuple(p * phi for p in range(1, K))


def phase_grid(size: int) -> np.ndarray:
    return 2 * np.pi * np.arange(size) / size


def play_round(
    config: GameConfig,
    ancilla: AncillaSpec,
    rng: np.random.Generator | int,
    seed: int | None = None,
) -> RoundRecord:
    """One sampled round: CZ^n gates, Fourier measurements, decoding, referee test.

    ``rng`` may be a generator or an integer seed; ``seed`` only labels the record.
    """
    if not ancilla.is_pure:
        raise ValueError("sampled rounds need a pure ancilla; use exact mode for density ancillas")
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    ref = referee_state(config)
    D, K = ancilla.D, ancilla.K
    rows = np.flatnonzero(ref.amps)
    a = ancilla.amplitudes
    table = _phase_table(config.N, D, K)
    # local Fourier measurements on different legs commute, so sample the
    # joint outcome tuple from the product-basis Born distribution
    amps = _fourier_amplitudes(ref.amps[rows, None] * table[rows] * a, D, K)
    probs = np.sum(np.abs(amps) ** 2, axis=0)
    cdf = np.cumsum(probs)
    flat = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), D**K - 1)
    outcomes = [int(x) for x in np.unravel_index(flat, (D,) * K)]
    post = amps[:, flat] / np.sqrt(probs[flat])
    fid = float(abs(np.vdot(ref.amps[rows], post)) ** 2)
    accept = bool(rng.random() < fid)
    return RoundRecord(
        outcomes=tuple(outcomes),
        decoded_bin=decode_timebin(outcomes, ancilla.D),
        referee_accept=accept,
        post_fidelity=fid,
        seed=-1 if seed is None else seed,
        timebin=config.n,
        phases=config.phases,
    )


def win_probability(
    N: int,
    ancilla: AncillaSpec,
    mode: str = "exact",
    *,
    trials: int | None = None,
    grid: int = 32,
    seed: int = 0,
    allow_oversized: bool = False,
) -> float:
    """P_win averaged over n uniform on 0..N and phases on a uniform grid.

    ``mode="exact"`` sums Born probabilities; ``mode="monte_carlo"`` averages
    ``trials`` sampled rounds.
    """
    if mode == "exact":
        return exact_win_probability(N, ancilla, grid=grid, allow_oversized=allow_oversized)
    if mode == "monte_carlo":
        return monte_carlo_win(N, ancilla, trials, grid=grid, seed=seed, allow_oversized=allow_oversized)[0]
    raise ValueError(f"unknown mode {mode!r}")


def exact_win_probability(N: int, ancilla: AncillaSpec, *, grid: int = 32, allow_oversized: bool = False) -> float:
    total = 0.0
    for n in range(N + 1):
        for phi in phase_grid(grid):
            cfg = GameConfig(N, ancilla.D, ancilla.K, n, phase_family(ancilla.K, phi), allow_oversized)
            total += state_win_probability(referee_state(cfg), ancilla)
    return total / ((N + 1) * grid)


def monte_carlo_win(
    N: int,
    ancilla: AncillaSpec,
    trials: int | None,
    *,
    grid: int = 32,
    seed: int = 0,
    allow_oversized: bool = False,
) -> tuple[float, float]:
    """Sampled win rate and its binomial standard error."""
    if not trials or trials < 1:
        raise ValueError("monte_carlo mode needs trials >= 1")
    phis = phase_grid(grid)
    wins = 0
    for t in range(trials):
        s = derive_seed(seed, t)
        rng = np.random.default_rng(s)
        n = int(rng.integers(N + 1))
        phi = float(phis[rng.integers(grid)])
        cfg = GameConfig(N, ancilla.D, ancilla.K, n, phase_family(ancilla.K, phi), allow_oversized)
        wins += play_round(cfg, ancilla, rng, seed=s).won
    p = wins / trials
    return p, float(np.sqrt(p * (1 - p) / trials))
