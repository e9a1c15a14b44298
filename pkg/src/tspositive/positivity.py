"""Positivity certificates for ``x^Delta = A x + B u`` on a time scale.

The system is positive exactly when ``A + gamma I`` and ``B`` are entrywise
nonnegative.  All comparisons are exact; data that is negative by a rounding
error is rejected, and :func:`lint_near_zero` points such entries out.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .linalg import as_matrix
from .timescale import TimeScale


def is_metzler(A) -> bool:
    """True iff every off-diagonal entry of ``A`` is nonnegative."""
    A = as_matrix(A, "A", square=True)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return bool(np.all(off >= 0))


def metzler_offset(A) -> float:
    """Smallest ``c >= 0`` with ``A + c I`` entrywise nonnegative."""
    A = as_matrix(A, "A", square=True)
    if not is_metzler(A):
        raise DomainError("metzler_offset needs a Metzler matrix")
    return float(max(0.0, -np.min(np.diag(A))))


def diagonal_admissible(d, mu_bar) -> bool:
    """Whether a diagonal entry ``d`` satisfies ``d + gamma >= 0``.

    Evaluated as ``-d * mu_bar <= 1`` so that a grid step chosen as
    ``h = 1/c`` in floating point always admits ``-c`` on the diagonal.
    """
    if d >= 0 or mu_bar == 0:
        return True
    if math.isinf(mu_bar):
        return False
    return -d * mu_bar <= 1.0


@dataclass(frozen=True)
class PositivityReport:
    verdict: bool
    is_metzler: bool
    c_of_A: float
    gamma: float
    violating_entries: list = field(default_factory=list)

    def to_json(self):
        from .serialize import ext_real

        return {
            "verdict": self.verdict,
            "is_metzler": self.is_metzler,
            "c_of_A": self.c_of_A,
            "gamma": ext_real(self.gamma),
            "violating_entries": [
                {"matrix": m, "i": i, "j": j, "value": v} for (m, i, j, v) in self.violating_entries
            ],
        }


def check_positive_system(A, B, ts: TimeScale) -> PositivityReport:
    """Certify positivity of ``x^Delta = A x + B u`` on ``ts``.

    ``violating_entries`` lists ``(matrix, i, j, value)`` with ``matrix`` one
    of ``"A"`` (off-diagonal), ``"A_T"`` (diagonal of ``A + gamma I``, value is
    ``a_jj`` itself) or ``"B"``.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    if B is None:
        B = np.zeros((n, 0))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.ndim != 2 or B.shape[0] != n:
        raise DomainError(f"B must have {n} rows, got shape {B.shape}")
    mu_bar = ts.mu_bar
    violations = []
    for i in range(n):
        for j in range(n):
            if i != j and A[i, j] < 0:
                violations.append(("A", i, j, float(A[i, j])))
    metzler = not violations
    for j in range(n):
        if not diagonal_admissible(A[j, j], mu_bar):
            violations.append(("A_T", j, j, float(A[j, j])))
    for i, j in zip(*np.nonzero(B < 0)):
        violations.append(("B", int(i), int(j), float(B[i, j])))
    c = float(max(0.0, -np.min(np.diag(A))))
    return PositivityReport(
        verdict=not violations,
        is_metzler=metzler,
        c_of_A=c,
        gamma=ts.gamma,
        violating_entries=violations,
    )


def lint_near_zero(A, B=None, eps=1e-12):
    """Entries in ``(-eps, 0)`` that would flip a positivity verdict."""
    hits = []
    for name, M in (("A", A), ("B", B)):
        if M is None:
            continue
        M = np.atleast_2d(np.asarray(M, dtype=float))
        for i, j in zip(*np.nonzero((M < 0) & (M > -eps))):
            if name == "A" and i == j:
                continue
            hits.append((name, int(i), int(j), float(M[i, j])))
    if hits:
        warnings.warn(f"entries within {eps} below zero: {hits}", stacklevel=2)
    return hits


@dataclass(frozen=True)
class PositiveSystem:
    """``(A, B, ts)`` bundled with its positivity certificate."""

    A: np.ndarray
    B: np.ndarray
    ts: TimeScale
    certificate: PositivityReport = field(init=False)

    def __post_init__(self):
        A = as_matrix(self.A, "A", square=True)
        B = np.zeros((A.shape[0], 0)) if self.B is None else np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "certificate", check_positive_system(A, B, self.ts))

    @property
    def is_positive(self):
        return self.certificate.verdict


__all__ = [
    "PositiveSystem",
    "PositivityReport",
    "check_positive_system",
    "diagonal_admissible",
    "is_metzler",
    "lint_near_zero",
    "metzler_offset",
]
