"""Uniform exponential stability of ``x^Delta = A x`` on a time scale.

Positive systems are decided by the signs of the characteristic polynomial
coefficients, which is exact on every scale with bounded graininess.  General
systems compare the spectrum with the disc ``|lambda + gamma| < gamma`` (the
open left half-plane when ``gamma = inf``).  The disc is the whole stability
region on the real line and on uniform grids; on mixed scales it is only a
sufficient condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UNBOUNDED_GRAININESS, PreconditionError
from .linalg import as_matrix, char_poly, spectrum
from .positivity import PositiveSystem, check_positive_system
from .timescale import TimeScale

MARGINAL = 1e-9


class Verdict(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


class Method(str, Enum):
    COEFFICIENT = "CoefficientTest"
    DISC = "DiscTest"
    HALF_PLANE = "HalfPlaneTest"


def coefficient_test(A):
    """Whether every coefficient of ``chi_A`` is strictly positive.

    Returns
    -------
    all_positive : bool
    coefficients : ndarray
        Descending, leading 1 first.
    """
    coeffs = char_poly(as_matrix(A, "A", square=True)).descending
    return bool(np.all(coeffs > 0)), coeffs


def disc_membership(lam, gamma):
    """``(inside, margin)`` for the stability disc of radius ``gamma`` centred at ``-gamma``.

    For ``gamma = inf`` the disc degenerates to the open left half-plane and
    the margin is ``-Re(lam)``.
    """
    gamma = float(gamma)
    if gamma == 0:
        raise PreconditionError("gamma = 0 means unbounded graininess", UNBOUNDED_GRAININESS)
    lam = complex(lam)
    if math.isinf(gamma):
        margin = -lam.real
    else:
        margin = gamma - abs(lam + gamma)
    return margin > 0, float(margin)


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict
    method: Method
    chi_coefficients: np.ndarray  # ascending, a_0 first
    spectrum: np.ndarray
    disc_margins: np.ndarray
    exact_region: bool
    gamma: float = math.inf
    positive: bool = False
    marginal: bool = False

    @property
    def stable(self):
        return self.verdict is Verdict.STABLE

    def to_json(self):
        from .serialize import complex_list, ext_real

        return {
            "verdict": self.verdict.value,
            "method": self.method.value,
            "chi_coefficients": [float(c) for c in self.chi_coefficients],
            "spectrum": complex_list(self.spectrum),
            "disc_margins": [float(m) for m in self.disc_margins],
            "exact_region": self.exact_region,
            "gamma": ext_real(self.gamma),
            "positive": self.positive,
            "marginal": self.marginal,
        }


def assess_stability(sys, ts: TimeScale | None = None) -> StabilityReport:
    """Stability verdict for ``A`` (or a :class:`PositiveSystem`) on ``ts``.

    Raises
    ------
    PreconditionError
        If the graininess of ``ts`` is unbounded.
    """
    if isinstance(sys, PositiveSystem):
        A, ts, positive = sys.A, sys.ts, sys.is_positive
    else:
        if ts is None:
            raise TypeError("assess_stability needs a time scale for a bare matrix")
        A = as_matrix(sys, "A", square=True)
        positive = None
    if math.isinf(ts.mu_bar):
        raise PreconditionError(
            "stability analysis needs bounded graininess", UNBOUNDED_GRAININESS
        )
    gamma = ts.gamma
    if positive is None:
        positive = check_positive_system(A, None, ts).verdict

    ok, desc = coefficient_test(A)
    lam = spectrum(A)
    margins = np.array([disc_membership(z, gamma)[1] for z in lam])
    marginal = bool(np.any(np.abs(desc[1:]) < MARGINAL))
    common = dict(
        chi_coefficients=desc[::-1].copy(),
        spectrum=lam,
        disc_margins=margins,
        gamma=gamma,
        positive=positive,
        marginal=marginal,
    )
    if positive:
        verdict = Verdict.STABLE if ok else Verdict.UNSTABLE
        return StabilityReport(verdict, Method.COEFFICIENT, exact_region=True, **common)

    method = Method.HALF_PLANE if math.isinf(gamma) else Method.DISC
    exact = ts.has_exact_region
    if np.all(margins > 0):
        verdict = Verdict.STABLE
    elif exact or np.any(lam.real >= 0):
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.INCONCLUSIVE
    return StabilityReport(verdict, method, exact_region=exact, **common)


__all__ = [
    "Method",
    "StabilityReport",
    "Verdict",
    "assess_stability",
    "coefficient_test",
    "disc_membership",
]
