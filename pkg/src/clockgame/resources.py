"""Entanglement audits and qubit-cost accounting for the clock game."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import AncillaSpec
from .qudit import partial_trace, vn_entropy

AUDIT_TOL = 1e-9


@dataclass(frozen=True)
class AuditReport:
    N: int
    D: int
    measured_entropy: float
    bound: float
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class CostComparison:
    M: int
    N: int
    gottesman_qubits: int
    clockgame_qubits: int


def entanglement_audit(ancilla: AncillaSpec, N: int) -> AuditReport:
    """Compare the one-party marginal entropy with log2(N+1) ebits."""
    if ancilla.K != 2:
        raise ValueError("entanglement audit is defined for two parties")
    source = ancilla.state() if ancilla.is_pure else ancilla.density_matrix()
    s = vn_entropy(partial_trace(source, [0]))
    bound = float(np.log2(N + 1))
    margin = s - bound
    return AuditReport(N, ancilla.D, s, bound, bool(s >= bound - AUDIT_TOL), margin)


def decode_probability_curve(coeffs: Sequence[complex], D: int | None = None) -> float:
    """|sum_j c_j|^2 / D: chance of decoding the right bin with a Schmidt ancilla."""
    c = np.asarray(coeffs, dtype=complex)
    D = c.size if D is None else D
    if c.size != D:
        raise ValueError(f"expected {D} coefficients, got {c.size}")
    if abs(np.vdot(c, c).real - 1) > 1e-12:
        raise ValueError("coefficients are not normalized")
    return float(abs(c.sum()) ** 2 / D)


def min_local_dimension(N: int) -> int:
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return N + 1


def cost_comparison(M: int, N: int) -> CostComparison:
    """Distributed qubits: one M-qubit W state per bin, versus one W state plus
    an M-party GHZ register of ceil(log2(N+1)) qubits per telescope."""
    if M < 2 or N < 1:
        raise ValueError(f"need M >= 2 and N >= 1, got M={M}, N={N}")
    # ceil(log2(N+1)) == N.bit_length() for N >= 1
    return CostComparison(M, N, N * M, M + M * N.bit_length())
