"""Linear-optics phase extraction with n shared single-photon ancilla pairs.

A configuration of Alice's (left) modes is ``(side, pattern)``: ``side`` is 1
when the stellar photon is on the left, and bit i of ``pattern`` (bit 0 is the
most significant of n) is 1 when ancilla photon i is on the left. Within the
sector of k+1 left photons, configurations with the stellar photon on the
right (group A) come first, then group B, each in increasing pattern order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

SINGULAR_TOL = 1e-9
MAX_SIM_N = 16


@dataclass(frozen=True)
class ExtractionConfig:
    n: int
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one ancilla pair, got n={self.n}")


@dataclass(frozen=True, eq=False)
class SectorState:
    """Amplitudes ``amps[side, pattern]`` of the (n+1)-photon state."""

    n: int
    amps: np.ndarray

    def left_count(self, side: int, pattern: int) -> int:
        return side + bin(pattern).count("1")

    def sector(self, k: int) -> np.ndarray:
        """Amplitudes on the k+1-left-photon sector in canonical order."""
        sides, patterns = sector_configurations(self.n, k)
        return self.amps[sides, patterns]


@dataclass(frozen=True)
class FisherReport:
    n: int
    phi: float
    delta: float
    sector_probabilities: np.ndarray
    contributions: np.ndarray
    total: float

    @property
    def average(self) -> float:
        """Fisher information averaged over phi (independent of this report's phi)."""
        return average_fisher(self.n)


@lru_cache(maxsize=None)
def _popcounts(n: int) -> np.ndarray:
    return np.array([bin(x).count("1") for x in range(2**n)])


@lru_cache(maxsize=None)
def sector_configurations(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(sides, patterns) of the C(n+1, k+1) configurations with k+1 left photons."""
    pc = _popcounts(n)
    group_a = np.flatnonzero(pc == k + 1)
    group_b = np.flatnonzero(pc == k)
    sides = np.concatenate([np.zeros(group_a.size, int), np.ones(group_b.size, int)])
    out = sides, np.concatenate([group_a, group_b])
    for arr in out:
        arr.setflags(write=False)
    return out


def joint_state(config: ExtractionConfig) -> SectorState:
    """Stellar photon (|0>_L|1>_R + e^{i phi}|1>_L|0>_R)/sqrt2 times n ancilla pairs."""
    n = config.n
    if n > MAX_SIM_N:
        raise ValueError(f"state simulation limited to n <= {MAX_SIM_N}")
    ancilla = np.exp(1j * config.delta * _popcounts(n))
    amps = np.stack([ancilla, np.exp(1j * config.phi) * ancilla]) / 2 ** ((n + 1) / 2)
    return SectorState(n, amps)


def _check_k(n: int, k: int) -> None:
    if not 0 <= k <= n - 1:
        raise ValueError(f"k={k} outside 0..{n - 1}")


def interference_contrast(n: int, k: int) -> float:
    return 2 * np.sqrt((n - k) * (k + 1)) / (n + 1)


def outcome_probability(n: int, k: int, phi: float, delta: float, bit: int) -> float:
    """p(bit' | k+1 left photons) for Bob's rotated measurement."""
    _check_k(n, k)
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    sign = 1 if bit == 0 else -1
    return 0.5 * (1 + sign * interference_contrast(n, k) * np.cos(phi - delta))


def sector_probability(n: int, k: int) -> float:
    _check_k(n, k)
    return comb(n + 1, k + 1) / 2 ** (n + 1)


def abort_probability(n: int) -> float:
    return 2 / 2 ** (n + 1)


def sector_fisher(n: int, k: int, phi: float, delta: float = 0.0) -> float:
    """sum_bits (d_phi p)^2 / p for one sector.

    Written as c^2 s^2 / (a^2 + c^2 s^2) with a^2 = 1 - c^2 = ((n-1-2k)/(n+1))^2,
    which is the same quantity without the catastrophic cancellation.
    """
    _check_k(n, k)
    c2 = 4 * (n - k) * (k + 1) / (n + 1) ** 2
    a2 = ((n - 1 - 2 * k) / (n + 1)) ** 2
    s2 = np.sin(phi - delta) ** 2
    den = a2 + c2 * s2
    if den < SINGULAR_TOL:
        # removable singularity at phi = delta (mod pi): limit is 1 when c = 1
        return 1.0 if a2 == 0 else 0.0
    return float(c2 * s2 / den)


def fisher_information(n: int, phi: float, delta: float = 0.0) -> FisherReport:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    probs = np.array([sector_probability(n, k) for k in range(n)])
    contrib = np.array([sector_fisher(n, k, phi, delta) for k in range(n)])
    return FisherReport(n, phi, delta, probs, contrib, float(probs @ contrib))


def average_fisher(n: int, phi_grid_size: int = 256) -> float:
    """Fisher information averaged over a uniform phase grid on [0, 2 pi), delta = 0."""
    if phi_grid_size < 64:
        raise ValueError("phase grid must have at least 64 points")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    phis = 2 * np.pi * np.arange(phi_grid_size) / phi_grid_size
    k = np.arange(n)
    c2 = (4 * (n - k) * (k + 1) / (n + 1) ** 2)[:, None]
    a2 = (((n - 1 - 2 * k) / (n + 1)) ** 2)[:, None]
    s2 = np.sin(phis)[None, :] ** 2
    den = a2 + c2 * s2
    # same continuity rule as sector_fisher
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(den < SINGULAR_TOL, np.where(a2 == 0, 1.0, 0.0), c2 * s2 / den)
    probs = np.array([sector_probability(n, kk) for kk in k])
    return float(np.mean(probs @ contrib))


def average_fisher_exact(n: int) -> float:
    """Continuum phase average; each sector averages to 1 - |n-1-2k|/(n+1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return float(sum(sector_probability(n, k) * (1 - abs(n - 1 - 2 * k) / (n + 1)) for k in range(n)))


def _sector_blocks(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Bob's {|0'>, |1'>} vectors in the sector's configuration order."""
    na, nb = comb(n, k + 1), comb(n, k)
    zero = np.concatenate([np.ones(na), np.zeros(nb)]) / np.sqrt(na)
    one = np.concatenate([np.zeros(na), np.ones(nb)]) / np.sqrt(nb)
    return zero, one


def bob_corrected_states(state: SectorState, k: int) -> np.ndarray:
    """Bob's unnormalized state for every Alice outcome j', after his phase correction.

    Row j' holds Bob's amplitudes over the sector's configurations.
    """
    a = state.sector(k)
    M = a.size
    j = np.arange(M)
    dft = np.exp(2j * np.pi * np.outer(j, j) / M) / np.sqrt(M)  # [j', j]
    conditional = dft * a[None, :]
    return conditional * np.exp(-2j * np.pi * np.outer(j, j) / M)


def exact_outcome_table(config: ExtractionConfig) -> np.ndarray:
    """Joint probabilities ``P[k, bit]`` from the explicit state, no closed forms.

    The missing mass, ``1 - P.sum()``, is the abort probability.
    """
    state = joint_state(config)
    n = config.n
    table = np.zeros((n, 2))
    for k in range(n):
        zero, one = _sector_blocks(n, k)
        plus, minus = (zero + one) / np.sqrt(2), (zero - one) / np.sqrt(2)
        bob = bob_corrected_states(state, k)
        table[k, 0] = np.sum(np.abs(bob @ plus) ** 2)
        table[k, 1] = np.sum(np.abs(bob @ minus) ** 2)
    return table


def exact_abort_probability(config: ExtractionConfig) -> float:
    state = joint_state(config)
    return float(abs(state.amps[0, 0]) ** 2 + abs(state.amps[1, -1]) ** 2)


def _left_counts(n: int) -> np.ndarray:
    return np.arange(2)[:, None] + _popcounts(n)[None, :]


def run_protocol(config: ExtractionConfig, rng: np.random.Generator) -> tuple[int | None, int, int]:
    """One shot of the protocol: returns ``(k+1 or None on abort, j', Bob's bit)``.

    On abort ``j'`` and the bit are reported as -1.
    """
    state = joint_state(config)
    n = config.n
    weights = np.bincount(_left_counts(n).reshape(-1), weights=np.abs(state.amps.reshape(-1)) ** 2, minlength=n + 2)
    count = int(rng.choice(n + 2, p=weights / weights.sum()))
    if count in (0, n + 1):
        return None, -1, -1
    k = count - 1
    bob = bob_corrected_states(state, k)
    p_jp = np.sum(np.abs(bob) ** 2, axis=1)
    jp = int(rng.choice(p_jp.size, p=p_jp / p_jp.sum()))
    zero, one = _sector_blocks(n, k)
    amp0 = abs(np.vdot((zero + one) / np.sqrt(2), bob[jp])) ** 2
    amp1 = abs(np.vdot((zero - one) / np.sqrt(2), bob[jp])) ** 2
    bit = 0 if rng.random() < amp0 / (amp0 + amp1) else 1
    return k + 1, jp, bit


def sample_outcomes(config: ExtractionConfig, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized sampling of ``size`` runs from the exact outcome table.

    Returns arrays ``k`` and ``bit``; aborted runs have ``k = -1``.
    """
    table = exact_outcome_table(config)
    flat = np.append(table.reshape(-1), max(0.0, 1 - table.sum()))
    draws = rng.choice(flat.size, size=size, p=flat / flat.sum())
    abort = draws == flat.size - 1
    k = np.where(abort, -1, draws // 2)
    bit = np.where(abort, -1, draws % 2)
    return k, bit


@dataclass(frozen=True)
class MLEResult:
    phi_hat: float
    stderr: float
    flagged: bool
    log_likelihood: float


def _golden_max(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def mle_estimate(samples, n: int, delta: float = 0.0, prior: float | None = None, restarts: int = 3) -> MLEResult:
    """Maximum-likelihood phase from ``(k, bit)`` samples; aborts (k < 0) are dropped.

    The likelihood depends on phi only through cos(phi - delta), so the search
    is restricted to the half-turn ``[delta, delta + pi]`` or
    ``[delta + pi, delta + 2 pi]`` that contains ``prior`` (the first by default).
    """
    k, bit = (np.asarray(x) for x in (np.asarray(samples).T if not isinstance(samples, tuple) else samples))
    keep = k >= 0
    k, bit = k[keep].astype(int), bit[keep].astype(int)
    if k.size < 100:
        raise ValueError(f"need at least 100 non-abort samples, got {k.size}")
    if k.max() > n - 1:
        raise ValueError(f"sample sector k={k.max()} impossible for n={n}")
    n0 = np.bincount(k[bit == 0], minlength=n).astype(float)
    n1 = np.bincount(k[bit == 1], minlength=n).astype(float)
    c = np.array([interference_contrast(n, kk) for kk in range(n)])

    def loglik(phi):
        co = np.cos(phi - delta)
        p0 = np.maximum(0.5 * (1 + c * co), 1e-300)
        p1 = np.maximum(0.5 * (1 - c * co), 1e-300)
        return float(n0 @ np.log(p0) + n1 @ np.log(p1))

    lo = delta
    if prior is not None and (prior - delta) % (2 * np.pi) > np.pi:
        lo = delta + np.pi
    edges = np.linspace(lo, lo + np.pi, restarts + 1)
    candidates = [_golden_max(loglik, a, b) for a, b in zip(edges[:-1], edges[1:])]
    phi_hat = max(candidates, key=loglik)

    co, si = np.cos(phi_hat - delta), np.sin(phi_hat - delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        info = float(n0 @ ((c * co + c**2) / (1 + c * co) ** 2) + n1 @ ((c**2 - c * co) / (1 - c * co) ** 2))
    at_edge = min(phi_hat - lo, lo + np.pi - phi_hat) < 1e-6
    flagged = bool(at_edge or not np.isfinite(info) or info <= 0 or si == 0)
    stderr = float(1 / np.sqrt(info)) if info > 0 and np.isfinite(info) else float("inf")
    return MLEResult(float(phi_hat % (2 * np.pi)), stderr, flagged, loglik(phi_hat))
