"""Amplitude damping and dephasing on the two-qudit GHZ ancilla.

Rates are indexed ``[qudit, level]``: ``gamma1[i, m]`` drives the decay
m+1 -> m on qudit i (D-1 levels per qudit) and ``gamma2[i, m]`` dephases
level m (D levels per qudit). The "linearized" states are the first-order
expansion in ``delta_t``; :func:`lindblad_integrator_oracle` integrates the
full master equation and exists only to check them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .qudit import DensityMatrix, HilbertSpace, fourier_matrix, ghz_state, z_power

LINEARIZATION_LIMIT = 0.1


class LinearizationWarning(UserWarning):
    pass


class NumericalValidationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NoiseParams:
    delta_t: float
    gamma1: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self):
        g1 = np.asarray(self.gamma1, dtype=float)
        g2 = np.asarray(self.gamma2, dtype=float)
        if self.delta_t < 0:
            raise ValueError(f"delta_t must be >= 0, got {self.delta_t}")
        if g1.ndim != 2 or g2.ndim != 2 or g1.shape[0] != g2.shape[0] or g2.shape[1] != g1.shape[1] + 1:
            raise ValueError(f"rate arrays must have shapes (Q, D-1) and (Q, D), got {g1.shape} and {g2.shape}")
        if np.any(g1 < 0) or np.any(g2 < 0):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "gamma1", g1)
        object.__setattr__(self, "gamma2", g2)

    @classmethod
    def uniform(cls, D: int, delta_t: float, total_gamma1: float = 0.0, total_gamma2: float = 0.0, qudits: int = 2):
        """Spread total rates evenly over every (qudit, level) slot."""
        g1 = np.full((qudits, D - 1), total_gamma1 / (qudits * (D - 1)))
        g2 = np.full((qudits, D), total_gamma2 / (qudits * D))
        return cls(delta_t, g1, g2)

    @classmethod
    def zero(cls, D: int, qudits: int = 2) -> "NoiseParams":
        return cls(0.0, np.zeros((qudits, D - 1)), np.zeros((qudits, D)))

    @property
    def D(self) -> int:
        return self.gamma2.shape[1]

    @property
    def total_gamma1(self) -> float:
        return float(self.gamma1.sum())

    @property
    def total_gamma2(self) -> float:
        return float(self.gamma2.sum())

    @property
    def linearization_valid(self) -> bool:
        return self.delta_t * (self.total_gamma1 + self.total_gamma2) < LINEARIZATION_LIMIT


def _check(D: int, params: NoiseParams) -> None:
    if params.D != D or params.gamma1.shape[0] != 2:
        raise ValueError(f"noise parameters are for {params.gamma1.shape[0]} qudits with D={params.D}, need 2 and D={D}")
    if not params.linearization_valid:
        warnings.warn(
            f"delta_t * Gamma = {params.delta_t * (params.total_gamma1 + params.total_gamma2):.3g} "
            f"is not small; first-order states are unreliable",
            LinearizationWarning,
            stacklevel=3,
        )


def _ket(D: int, a: int, b: int) -> int:
    return a * D + b


def _damping_increment(D: int, params: NoiseParams) -> np.ndarray:
    dt, g = params.delta_t, params.gamma1
    out = np.zeros((D * D, D * D), dtype=complex)
    diag_pairs = np.array([_ket(D, j, j) for j in range(D)])
    for m in range(D - 1):
        # jump terms: qudit 1 decays |m+1,m+1> -> |m,m+1>, qudit 2 -> |m+1,m>
        i1, i2 = _ket(D, m, m + 1), _ket(D, m + 1, m)
        out[i1, i1] += dt * g[0, m] / D
        out[i2, i2] += dt * g[1, m] / D
        # depletion: -(1/2){L^dag L, rho}
        top = _ket(D, m + 1, m + 1)
        c = dt * (g[0, m] + g[1, m]) / (2 * D)
        out[top, diag_pairs] -= c
        out[diag_pairs, top] -= c
    return out


def _dephasing_increment(D: int, params: NoiseParams) -> np.ndarray:
    dt, g = params.delta_t, params.gamma2
    out = np.zeros((D * D, D * D), dtype=complex)
    diag_pairs = np.array([_ket(D, j, j) for j in range(D)])
    for m in range(D):
        mm = _ket(D, m, m)
        c = dt * (g[0, m] + g[1, m]) / (2 * D)
        out[mm, mm] += c
        out[mm, diag_pairs] -= c / 2
        out[diag_pairs, mm] -= c / 2
    return out


def _ghz_projector(D: int) -> np.ndarray:
    return ghz_state(D, 2).density().entries


def damped_ancilla(D: int, params: NoiseParams) -> DensityMatrix:
    """First-order amplitude-damped GHZ ancilla (dephasing rates ignored)."""
    _check(D, params)
    return DensityMatrix.hermitized(HilbertSpace((D, D)), _ghz_projector(D) + _damping_increment(D, params))


def dephased_ancilla(D: int, params: NoiseParams) -> DensityMatrix:
    """First-order dephased GHZ ancilla (damping rates ignored)."""
    _check(D, params)
    return DensityMatrix.hermitized(HilbertSpace((D, D)), _ghz_projector(D) + _dephasing_increment(D, params))


def noisy_ancilla(D: int, params: NoiseParams) -> DensityMatrix:
    """First-order GHZ ancilla under both channels at once."""
    _check(D, params)
    rho = _ghz_projector(D) + _damping_increment(D, params) + _dephasing_increment(D, params)
    return DensityMatrix.hermitized(HilbertSpace((D, D)), rho)


def apply_zn(rho: DensityMatrix, n: int, leg: int = 0) -> DensityMatrix:
    D = rho.space.dims[0]
    z = z_power(D, n).entries
    eye = np.eye(D)
    u = np.kron(z, eye) if leg == 0 else np.kron(eye, z)
    return DensityMatrix.hermitized(rho.space, u @ rho.entries @ u.conj().T)


def incorrect_bin_distribution(D: int, n: int, rho_ancilla: DensityMatrix) -> np.ndarray:
    """Distribution of (x + y) mod D after Z^n on leg 0 and Fourier measurement of both legs."""
    if rho_ancilla.space.dims != (D, D):
        raise ValueError(f"ancilla must be two qudits of dimension {D}")
    F = fourier_matrix(D).entries
    FF = np.kron(F, F)
    rho = apply_zn(rho_ancilla, n).entries
    diag = np.einsum("ax,ab,bx->x", FF.conj(), rho, FF).real
    bins = (np.arange(D)[:, None] + np.arange(D)[None, :]).reshape(-1) % D
    return np.bincount(bins, weights=diag, minlength=D)


def noisy_win_probability(D: int, n: int, rho_ancilla: DensityMatrix, mode: str = "photon") -> float:
    """Probability that the decoded bin is correct.

    ``mode="photon"`` encodes bin ``n``; ``mode="vacuum"`` is the referee's
    empty round, where nothing is encoded and the correct answer is 0.
    """
    if mode == "vacuum":
        n = 0
    elif mode != "photon":
        raise ValueError(f"unknown mode {mode!r}")
    return float(incorrect_bin_distribution(D, n, rho_ancilla)[n % D])


def closed_form_pwin(D: int, params: NoiseParams, channel: str = "both") -> float:
    g1, g2 = params.total_gamma1, params.total_gamma2
    if channel == "amp":
        g2 = 0.0
    elif channel == "deph":
        g1 = 0.0
    elif channel != "both":
        raise ValueError(f"unknown channel {channel!r}")
    return 1 - params.delta_t * (D - 1) / D**2 * (g1 + g2 / 2)


def lindblad_operators(D: int, params: NoiseParams, channels: str = "both") -> list[np.ndarray]:
    eye = np.eye(D)
    ops = []
    for i in range(2):
        if channels in ("amp", "both"):
            for m in range(D - 1):
                if params.gamma1[i, m]:
                    low = np.zeros((D, D))
                    low[m, m + 1] = 1.0
                    local = np.sqrt(params.gamma1[i, m]) * low
                    ops.append(np.kron(local, eye) if i == 0 else np.kron(eye, local))
        if channels in ("deph", "both"):
            for m in range(D):
                if params.gamma2[i, m]:
                    proj = np.zeros((D, D))
                    proj[m, m] = 1.0
                    local = np.sqrt(params.gamma2[i, m] / 2) * proj
                    ops.append(np.kron(local, eye) if i == 0 else np.kron(eye, local))
    return ops


def lindblad_integrator_oracle(
    D: int,
    params: NoiseParams,
    total_t: float | None = None,
    steps: int = 1000,
    channels: str = "both",
) -> DensityMatrix:
    """Fixed-step RK4 integration of the full master equation from the GHZ state."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    total_t = params.delta_t if total_t is None else total_t
    ops = lindblad_operators(D, params, channels)
    decay = sum((L.conj().T @ L for L in ops), np.zeros((D * D, D * D)))

    def rhs(rho):
        out = -0.5 * (decay @ rho + rho @ decay)
        for L in ops:
            out += L @ rho @ L.conj().T
        return out

    rho = _ghz_projector(D)
    h = total_t / steps
    for _ in range(steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(np.trace(rho).real - 1)
        if drift > 1e-8:
            raise NumericalValidationError(f"trace drifted by {drift:.2e} during integration")
    # RK4 keeps the trace even when unstable, so also look for a blown-up spectrum
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)) if np.all(np.isfinite(rho)) else np.array([-np.inf])
    if lam.min() < -1e-8:
        raise NumericalValidationError(f"integrated state has eigenvalue {lam.min():.3e}; step too large")
    try:
        return DensityMatrix.hermitized(HilbertSpace((D, D)), rho)
    except ValueError as exc:
        raise NumericalValidationError(str(exc)) from exc
