"""Dense state-vector and density-matrix tools for small composite qudit systems.

Basis indexing is row-major over ``HilbertSpace.dims`` with subsystem 0 the
most significant digit. Entropies are in ebits (log base 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
EIG_TOL = 1e-10


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @cached_property
    def dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self):
        return len(self.dims)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != self.space.dim:
            raise ValueError(f"expected {self.space.dim} amplitudes, got {amps.size}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_unnormalized(cls, space: HilbertSpace, amps) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(space, amps / norm)

    @classmethod
    def basis(cls, dims: Sequence[int], digits: Sequence[int]) -> "StateVector":
        space = HilbertSpace(tuple(dims))
        amps = np.zeros(space.dim, dtype=complex)
        amps[np.ravel_multi_index(tuple(digits), space.dims)] = 1.0
        return cls(space, amps)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.space.dims)

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amps, other.amps))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.inner(other)) ** 2

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amps, self.amps.conj()))

    def kron(self, other: "StateVector") -> "StateVector":
        space = HilbertSpace(self.space.dims + other.space.dims)
        return StateVector.from_unnormalized(space, np.kron(self.amps, other.amps))

    def allclose(self, other: "StateVector", atol: float = 1e-12) -> bool:
        return self.space == other.space and np.allclose(self.amps, other.amps, rtol=0, atol=atol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density operator on a composite space.

    Construction checks hermiticity and unit trace. Positivity is checked by
    :meth:`validate` and by :func:`vn_entropy`, because first-order noise
    expansions are Hermitian and trace one but only positive to first order.
    """

    space: HilbertSpace
    entries: np.ndarray

    def __post_init__(self):
        d = self.space.dim
        rho = np.asarray(self.entries, dtype=complex)
        if rho.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > NORM_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def hermitized(cls, space: HilbertSpace, entries) -> "DensityMatrix":
        rho = np.asarray(entries, dtype=complex)
        return cls(space, 0.5 * (rho + rho.conj().T))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def validate(self) -> "DensityMatrix":
        lam = self.eigenvalues()
        if lam.size and lam.min() < -EIG_TOL:
            raise ValueError(f"density matrix has eigenvalue {lam.min():.3e} < -{EIG_TOL}")
        return self

    def expectation(self, state: StateVector) -> float:
        """<psi|rho|psi>."""
        return float(np.vdot(state.amps, self.entries @ state.amps).real)

    def allclose(self, other: "DensityMatrix", atol: float = 1e-12) -> bool:
        return self.space == other.space and np.allclose(self.entries, other.entries, rtol=0, atol=atol)


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    entries: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.entries, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError(f"unitary must be square, got shape {u.shape}")
        err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0)
        if err > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max |U^dag U - 1| = {err:.2e})")
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries.conj().T)

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries @ other.entries)


def _check_dim(D: int) -> None:
    if int(D) != D or D < 1:
        raise ValueError(f"qudit dimension must be a positive integer, got {D!r}")


def fourier_vector(D: int, j_tilde: int) -> StateVector:
    """Fourier basis ket |j~> = sum_k exp(2 pi i j~ k / D) |k> / sqrt(D)."""
    _check_dim(D)
    if not 0 <= j_tilde < D:
        raise ValueError(f"Fourier index {j_tilde} out of range for D={D}")
    k = np.arange(D)
    return StateVector(HilbertSpace((D,)), np.exp(2j * np.pi * j_tilde * k / D) / np.sqrt(D))


@lru_cache(maxsize=64)
def fourier_matrix(D: int) -> UnitaryMatrix:
    """Matrix whose column j~ is ``fourier_vector(D, j~)``."""
    _check_dim(D)
    k = np.arange(D)
    return UnitaryMatrix(np.exp(2j * np.pi * np.outer(k, k) / D) / np.sqrt(D))


def z_power(D: int, n: int) -> UnitaryMatrix:
    _check_dim(D)
    n = int(n) % D
    return UnitaryMatrix(np.diag(np.exp(2j * np.pi * np.arange(D) * n / D)))


def ghz_state(D: int, K: int) -> StateVector:
    """(1/sqrt D) sum_j |j>^K over K qudits of dimension D."""
    if D < 2:
        raise ValueError(f"GHZ state needs D >= 2, got {D}")
    if K < 2:
        raise ValueError(f"GHZ state needs K >= 2 parties, got {K}")
    space = HilbertSpace((D,) * K)
    amps = np.zeros(space.dim, dtype=complex)
    # |j,j,...,j> sits at j * (D^K - 1)/(D - 1)
    stride = sum(D**i for i in range(K))
    amps[np.arange(D) * stride] = 1 / np.sqrt(D)
    return StateVector(space, amps)


def phi_dn_state(D: int, n: int, K: int = 2) -> StateVector:
    """GHZ state with Z^n applied to the first leg (equivalently any leg)."""
    if not 0 <= n < D:
        raise ValueError(f"time-bin label n={n} out of range for D={D}")
    return apply_unitary(ghz_state(D, K), z_power(D, n), [0])


def _check_targets(space: HilbertSpace, targets: Sequence[int]) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct, got {targets}")
    if any(not 0 <= t < len(space) for t in targets):
        raise ValueError(f"targets {targets} out of range for {len(space)} subsystems")
    return targets


def _apply_on_axes(tensor: np.ndarray, mat: np.ndarray, targets: list[int]) -> np.ndarray:
    """Contract ``mat`` into the listed tensor axes (row-major over the targets)."""
    nt = len(targets)
    moved = np.moveaxis(tensor, targets, range(nt))
    shape = moved.shape
    out = (mat @ moved.reshape(mat.shape[1], -1)).reshape(shape)
    return np.moveaxis(out, range(nt), targets)


def apply_unitary(state: StateVector, op: UnitaryMatrix, targets: Sequence[int]) -> StateVector:
    targets = _check_targets(state.space, targets)
    tdim = math.prod(state.space.dims[t] for t in targets)
    if tdim != op.dim:
        raise ValueError(f"operator dimension {op.dim} does not match target dimension {tdim}")
    out = _apply_on_axes(state.tensor(), op.entries, targets)
    return StateVector.from_unnormalized(state.space, out)


def measure_subsystem(
    state: StateVector,
    targets: Sequence[int],
    basis: UnitaryMatrix,
    rng: np.random.Generator,
) -> tuple[int, StateVector, float]:
    """Projective measurement of ``targets`` in the basis given by the columns of ``basis``.

    Returns the sampled outcome index, the renormalized post-measurement state
    and the Born probability of that outcome.
    """
    targets = _check_targets(state.space, targets)
    tdims = [state.space.dims[t] for t in targets]
    if math.prod(tdims) != basis.dim:
        raise ValueError(f"basis dimension {basis.dim} does not match targets {tdims}")
    coeffs = _apply_on_axes(state.tensor(), basis.entries.conj().T, targets)
    moved = np.moveaxis(coeffs, targets, range(len(targets))).reshape(basis.dim, -1)
    probs = np.sum(np.abs(moved) ** 2, axis=1)
    cdf = np.cumsum(probs)
    outcome = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), basis.dim - 1)
    probs = probs / cdf[-1]
    kept = np.zeros_like(moved)
    kept[outcome] = moved[outcome]
    kept = np.moveaxis(kept.reshape([*tdims, *[d for i, d in enumerate(state.space.dims) if i not in targets]]),
                       range(len(targets)), targets)
    collapsed = _apply_on_axes(kept, basis.entries, targets)
    return outcome, StateVector.from_unnormalized(state.space, collapsed), float(probs[outcome])


def partial_trace(rho: DensityMatrix | StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on the ``keep`` subsystems (kept in ascending order)."""
    if isinstance(rho, StateVector):
        return _partial_trace_pure(rho, keep)
    space = rho.space
    keep = sorted(_check_targets(space, keep))
    if not keep:
        return DensityMatrix(HilbertSpace(()), np.array([[np.trace(rho.entries)]]))
    n = len(space)
    drop = [i for i in range(n) if i not in keep]
    t = rho.entries.reshape(space.dims + space.dims)
    t = np.moveaxis(t, keep + drop + [n + i for i in keep] + [n + i for i in drop], range(2 * n))
    dk = math.prod(space.dims[i] for i in keep)
    dd = math.prod(space.dims[i] for i in drop)
    red = np.einsum("iaja->ij", t.reshape(dk, dd, dk, dd))
    return DensityMatrix.hermitized(HilbertSpace(tuple(space.dims[i] for i in keep)), red)


def _partial_trace_pure(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    space = state.space
    keep = sorted(_check_targets(space, keep))
    if not keep:
        return DensityMatrix(HilbertSpace(()), np.array([[1.0 + 0j]]))
    drop = [i for i in range(len(space)) if i not in keep]
    dk = math.prod(space.dims[i] for i in keep)
    m = np.moveaxis(state.tensor(), keep + drop, range(len(space))).reshape(dk, -1)
    return DensityMatrix.hermitized(HilbertSpace(tuple(space.dims[i] for i in keep)), m @ m.conj().T)


def vn_entropy(rho: DensityMatrix | StateVector) -> float:
    """Von Neumann entropy in ebits; pure states give 0."""
    if isinstance(rho, StateVector):
        return 0.0
    lam = rho.eigenvalues()
    if lam.size and lam.min() < -EIG_TOL:
        raise ValueError(f"negative eigenvalue {lam.min():.3e} below tolerance")
    lam = np.clip(lam, 0.0, 1.0)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log2(lam))) + 0.0  # avoid -0.0
