"""Positive stabilization of single-input systems by state feedback ``u = K x``.

The pipeline is: PBH stabilizability test, a controllability decomposition
that puts the reachable part in companion form, lower bounds ``k_j >= alpha_j``
that keep ``A + b K`` positive, and strict rows ``K v_i < a_i`` that make its
characteristic polynomial coefficients positive.  The resulting linear
inequality system is decided with an LP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import UNBOUNDED_GRAININESS, DataError, DomainError, NumericalError, PreconditionError
from .linalg import Polynomial, as_matrix, char_poly, matrix_rank, spectrum
from .positivity import PositivityReport, check_positive_system, diagonal_admissible
from .simulate import DecayFit, transition_decay
from .stability import coefficient_test, disc_membership
from .timescale import TimeScale

RANK_TOL = 1e-9
# relative singular values in this band make the controllability rank ambiguous
AMBIGUOUS_BAND = (1e-11, 1e-7)
COEFF_RESIDUAL = 1e-8
FACTOR_TOL = 1e-8
# the solver's default 1e-7 feasibility tolerance would swallow small margins
HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _require_bounded(ts):
    if math.isinf(ts.mu_bar):
        raise PreconditionError("stabilization needs bounded graininess", UNBOUNDED_GRAININESS)


def _column(b, n):
    b = np.asarray(b, dtype=float)
    if b.ndim == 2:
        if b.shape[1] != 1:
            raise DomainError(f"single-input synthesis needs one input column, got {b.shape[1]}")
        b = b[:, 0]
    if b.shape != (n,):
        raise DomainError(f"b must have {n} entries, got shape {b.shape}")
    return b


# ----------------------------------------------------------------------------
# PBH test
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PBHResult:
    ok: bool
    failing: list
    conservative: bool

    def __iter__(self):
        return iter((self.ok, self.failing))


def pbh_stabilizable(A, B, ts: TimeScale, tol=RANK_TOL) -> PBHResult:
    """PBH rank test ``rank [lambda I - A, B] = n`` for every eigenvalue outside the disc.

    Unpacks as ``(ok, failing)``.  ``conservative`` is set on mixed scales
    where the disc may be smaller than the true stability region.
    """
    _require_bounded(ts)
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    failing = []
    for lam in spectrum(A):
        inside, _ = disc_membership(lam, ts.gamma)
        if inside:
            continue
        M = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        if matrix_rank(M, tol) < n:
            failing.append(complex(lam))
    return PBHResult(not failing, failing, not ts.has_exact_region)


# ----------------------------------------------------------------------------
# controllability decomposition
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Decomposition:
    k: int
    a: np.ndarray  # a_1..a_k
    basis_v: np.ndarray  # columns v_1..v_n
    T: np.ndarray
    A_tilde: np.ndarray
    b_tilde: np.ndarray
    A22: np.ndarray

    @property
    def n(self):
        return self.T.shape[0]

    def companion(self):
        """The ideal companion block for ``a``."""
        return companion_block(self.a)

    def pattern_error(self):
        """Largest deviation of ``A_tilde`` from the companion/zero block pattern."""
        k = self.k
        err = 0.0
        if k:
            err = float(np.max(np.abs(self.A_tilde[:k, :k] - self.companion())))
        if 0 < k < self.n:
            err = max(err, float(np.max(np.abs(self.A_tilde[k:, :k]))))
        return err

    def to_json(self):
        return {"k": self.k, "a": [float(x) for x in self.a]}


def companion_block(a):
    """``k x k`` block with ones on the superdiagonal and last row ``-a``."""
    a = np.asarray(a, dtype=float)
    k = a.size
    C = np.zeros((k, k))
    C[np.arange(k - 1), np.arange(1, k)] = 1.0
    if k:
        C[-1, :] = -a
    return C


def _krylov_rank(C):
    norms = np.linalg.norm(C, axis=0)
    Cn = C[:, norms > 0] / norms[norms > 0]
    if Cn.shape[1] == 0:
        return 0
    s = np.linalg.svd(Cn, compute_uv=False)
    rel = s / s[0]
    k = int(np.sum(rel > RANK_TOL))
    lo, hi = AMBIGUOUS_BAND
    straddle = (rel >= lo) & (rel <= hi)
    if np.any(straddle):
        k_low = int(np.sum(rel > hi))
        raise NumericalError(
            "controllability rank is ambiguous: singular values straddle the tolerance",
            best=k,
            candidates=sorted({k_low, k_low + int(np.sum(straddle))}),
        )
    return k


def _completion(V, n, order):
    idx = range(n) if order == "forward" else range(n - 1, -1, -1)
    Q = np.linalg.qr(V)[0] if V.shape[1] else np.zeros((n, 0))
    out = []
    for threshold in (0.1, 1e-8):
        for i in idx:
            if Q.shape[1] == n:
                break
            e = np.zeros(n)
            e[i] = 1.0
            for _ in range(2):
                e = e - Q @ (Q.T @ e)
            nrm = np.linalg.norm(e)
            if nrm > threshold:
                e /= nrm
                Q = np.hstack([Q, e[:, None]])
                out.append(e)
        if Q.shape[1] == n:
            break
    return np.array(out).T.reshape(n, len(out))


def control_decomposition(A, b, completion="forward") -> Decomposition:
    """Change of basis ``T`` putting ``(A, b)`` in controllable companion form.

    ``v_k = b`` and ``v_{j-1} = A v_j + a_j b``, where ``A^k b = -sum a_i A^{i-1} b``.
    The remaining ``n - k`` columns are an orthonormal completion built by
    projecting standard basis vectors in ``completion`` order ("forward" or
    "reverse").

    Raises
    ------
    NumericalError
        If the controllability rank is ambiguous, or ``a`` does not reproduce
        ``A^k b`` to a relative residual of 1e-8.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    b = _column(b, n)
    if completion not in ("forward", "reverse"):
        raise DomainError(f"completion must be 'forward' or 'reverse', got {completion!r}")
    C = np.empty((n, n + 1))
    C[:, 0] = b
    for j in range(1, n + 1):
        C[:, j] = A @ C[:, j - 1]
    k = _krylov_rank(C[:, :n]) if np.any(b) else 0
    if k:
        target = C[:, k]
        # square solve on k pivot rows; exact data then gives exact coefficients,
        # and the residual check below covers the remaining rows
        rows = scipy.linalg.qr(C[:, :k].T, pivoting=True, mode="r")[1][:k]
        sol = np.linalg.solve(C[rows, :k], -target[rows])
        resid = float(np.linalg.norm(C[:, :k] @ sol + target))
        if resid > COEFF_RESIDUAL * float(np.linalg.norm(target)) and resid > 0:
            raise NumericalError(
                f"A^k b is not in the Krylov span (residual {resid:.3g})", best=sol
            )
        a = sol
    else:
        a = np.zeros(0)
    V = np.empty((n, k))
    if k:
        V[:, k - 1] = b
        for j in range(k - 1, 0, -1):
            V[:, j - 1] = A @ V[:, j] + a[j] * b
    W = _completion(V, n, completion)
    T = np.hstack([V, W])
    if T.shape != (n, n):
        raise NumericalError("basis completion failed")
    At = np.linalg.solve(T, A @ T)
    bt = np.zeros(n)
    if k:
        bt[k - 1] = 1.0
    else:
        bt = np.linalg.solve(T, b)
    return Decomposition(k, a, T.copy(), T, At, bt, At[k:, k:].copy())


# ----------------------------------------------------------------------------
# inequality system
# ----------------------------------------------------------------------------


def _positive_or_fail(A, b, ts):
    rep = check_positive_system(A, b.reshape(-1, 1), ts)
    if not rep.verdict:
        raise DomainError(f"(A, b) is not a positive system on this time scale: {rep.violating_entries}")
    return rep


def alpha_bounds(A, b, gamma) -> np.ndarray:
    """Lower bounds ``alpha_j`` on the gains that keep ``A + b K`` positive.

    ``gamma`` may be a number or a :class:`TimeScale`.  An empty maximum is
    ``-inf``.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    b = _column(b, n)
    if isinstance(gamma, TimeScale):
        _positive_or_fail(A, b, gamma)
        gamma = gamma.gamma
    else:
        gamma = float(gamma)
        mu_bar = 0.0 if math.isinf(gamma) else (math.inf if gamma == 0 else 1.0 / gamma)
        offdiag_ok = all(A[i, j] >= 0 for i in range(n) for j in range(n) if i != j)
        diag_ok = all(diagonal_admissible(A[j, j], mu_bar) for j in range(n))
        if not (offdiag_ok and diag_ok and np.all(b >= 0)):
            raise DomainError("(A, b) is not a positive system for this gamma")
    alphas = np.empty(n)
    for j in range(n):
        others = [-A[i, j] / b[i] for i in range(n) if i != j and b[i] != 0]
        inner = max(others, default=-math.inf)
        if math.isinf(gamma) or b[j] == 0:
            alphas[j] = inner
        else:
            alphas[j] = max(inner, (-A[j, j] - gamma) / b[j])
    return alphas + 0.0


def _num(x):
    return repr(float(x) + 0.0)


@dataclass(frozen=True)
class InequalitySystem:
    lower_bounds: np.ndarray  # k_j >= alpha_j, -inf means free
    strict_rows: list  # (v_i, a_i) encoding K v_i < a_i

    @property
    def n(self):
        return self.lower_bounds.size

    @property
    def k(self):
        return len(self.strict_rows)

    def constraints(self):
        """Flat list of ``("bound", j)`` and ``("strict", i)`` labels (0-based)."""
        out = [("bound", j) for j in range(self.n) if np.isfinite(self.lower_bounds[j])]
        out += [("strict", i) for i in range(self.k)]
        return out

    def describe(self, label):
        kind, i = label
        if kind == "bound":
            return f"k{i + 1} >= {_num(self.lower_bounds[i])}"
        v, a = self.strict_rows[i]
        terms = " + ".join(f"{_num(c)}*k{j + 1}" for j, c in enumerate(v) if c != 0) or "0"
        return f"{terms} < {_num(a)}"

    def satisfied(self, K, margin=0.0):
        K = np.asarray(K, dtype=float)
        if np.any(K < self.lower_bounds):
            return False
        return all(K @ v < a - margin * max(1.0, np.linalg.norm(v)) for v, a in self.strict_rows)


def build_constraints(dec: Decomposition, alphas) -> InequalitySystem:
    alphas = np.asarray(alphas, dtype=float)
    rows = [(dec.basis_v[:, i].copy(), float(dec.a[i])) for i in range(dec.k)]
    assert len(rows) == dec.k
    return InequalitySystem(alphas.copy(), rows)


# ----------------------------------------------------------------------------
# LP feasibility
# ----------------------------------------------------------------------------


class Status(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    NOT_STABILIZABLE = "NotStabilizable"


@dataclass(frozen=True)
class Feasibility:
    status: Status
    K: np.ndarray | None = None
    margin: float = 0.0
    witness: list = field(default_factory=list)  # labels of an irreducible infeasible subset
    note: str = ""


def _lp(ineqs, labels, margin, objective=None):
    n = ineqs.n
    use_bounds = {j for kind, j in labels if kind == "bound"}
    rows = [ineqs.strict_rows[i] for kind, i in labels if kind == "strict"]
    bounds = [
        (float(ineqs.lower_bounds[j]) if j in use_bounds else None, None) for j in range(n)
    ]
    A_ub = np.array([v for v, _ in rows]).reshape(len(rows), n) if rows else None
    b_ub = (
        np.array([a - margin * max(1.0, np.linalg.norm(v)) for v, a in rows]) if rows else None
    )
    return linprog(
        np.zeros(n), A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=HIGHS_OPTIONS
    )


def _recenter(ineqs, margin):
    # maximize r: K v_i + r |v_i| <= a_i - m_i and k_j - r >= alpha_j, 0 <= r <= 1
    n = ineqs.n
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub, b_ub = [], []
    for v, a in ineqs.strict_rows:
        nv = np.linalg.norm(v)
        A_ub.append(np.append(v, nv))
        b_ub.append(a - margin * max(1.0, nv))
    for j, lo in enumerate(ineqs.lower_bounds):
        if np.isfinite(lo):
            row = np.zeros(n + 1)
            row[j], row[-1] = -1.0, 1.0
            A_ub.append(row)
            b_ub.append(-lo)
    bounds = [(None, None)] * n + [(0.0, 1.0)]
    res = linprog(
        c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs",
        options=HIGHS_OPTIONS,
    )
    if res.status != 0:
        return None
    return res.x[:n]


def _deletion_filter(ineqs, margin):
    keep = ineqs.constraints()
    for lab in list(keep):
        trial = [c for c in keep if c != lab]
        if _lp(ineqs, trial, margin).status == 2:
            keep = trial
    return keep


def solve_feasibility(ineqs: InequalitySystem, margin=1e-6, recenter=True) -> Feasibility:
    """Find ``K`` with ``k_j >= alpha_j`` and ``K v_i <= a_i - margin * max(1, |v_i|)``.

    The margined system is retried at ``margin / 100`` before declaring it
    infeasible.  With ``recenter`` the returned point maximizes the smallest
    slack (Chebyshev centre, capped at 1) instead of being an LP vertex.
    """
    if not margin > 0:
        raise DomainError(f"margin must be positive, got {margin}")
    lo = ineqs.lower_bounds
    if ineqs.k == 0:
        K = np.where(np.isfinite(lo), np.maximum(lo, 0.0), 0.0)
        return Feasibility(Status.FEASIBLE, K, margin)
    labels = ineqs.constraints()
    for m in (margin, margin / 100):
        res = _lp(ineqs, labels, m)
        if res.status == 0:
            for K in (_recenter(ineqs, m) if recenter else None, res.x):
                if K is None:
                    continue
                K = np.maximum(np.asarray(K, dtype=float), lo)
                if ineqs.satisfied(K, m / 2):
                    return Feasibility(Status.FEASIBLE, K, m)
            continue
        if res.status != 2:
            raise NumericalError(f"LP solver failed: {res.message}")
    witness = _deletion_filter(ineqs, margin / 100)
    return Feasibility(
        Status.INFEASIBLE,
        witness=witness,
        margin=margin / 100,
        note="infeasible with strict rows tightened by the margin; "
        "a system feasible only on a set of empty interior is reported this way",
    )


def _repair(A, b, K, ts, alphas):
    """Raise gains by a few ulps until ``A + b K`` passes the exact positivity check."""
    K = np.maximum(K, alphas)
    n = A.shape[0]
    for j in range(n):
        for _ in range(64):
            col = A[:, j] + b * K[j]
            off = all(col[i] >= 0 for i in range(n) if i != j)
            if off and diagonal_admissible(col[j], ts.mu_bar):
                break
            K[j] = np.nextafter(K[j], math.inf)
    return K


# ----------------------------------------------------------------------------
# verification and driver
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedLoopReport:
    positivity: PositivityReport
    coefficients_positive: bool
    chi_coefficients: np.ndarray  # descending
    factorization_error: float
    factorization_ok: bool
    decay: DecayFit | None
    decay_ok: bool

    @property
    def passed(self):
        return bool(
            self.positivity.verdict
            and self.coefficients_positive
            and self.factorization_ok
            and self.decay_ok
        )

    def to_json(self):
        return {
            "positivity": self.positivity.to_json(),
            "coefficients_positive": self.coefficients_positive,
            "chi_coefficients": [float(c) for c in self.chi_coefficients],
            "factorization_error": self.factorization_error,
            "factorization_ok": self.factorization_ok,
            "decay": None if self.decay is None else self.decay.to_json(),
            "decay_ok": self.decay_ok,
            "passed": self.passed,
        }


def predicted_closed_loop_poly(dec: Decomposition, K) -> Polynomial:
    """``(lambda^k + sum (a_i - K v_i) lambda^{i-1}) * chi_{A22}``."""
    K = np.asarray(K, dtype=float)
    kt = np.array([K @ dec.basis_v[:, i] for i in range(dec.k)])
    head = Polynomial(np.append(dec.a - kt, 1.0))
    return head * char_poly(dec.A22) if dec.k < dec.n else head


def verify_closed_loop(A, b, K, ts: TimeScale, dec: Decomposition | None = None) -> ClosedLoopReport:
    """Independent checks of a gain: positivity, coefficients, factorization, decay."""
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    b = _column(b, n)
    K = np.asarray(K, dtype=float).reshape(-1)
    if K.shape != (n,):
        raise DomainError(f"K must be 1 x {n}, got {K.size} entries")
    Acl = A + np.outer(b, K)
    pos = check_positive_system(Acl, None, ts)
    ok, desc = coefficient_test(Acl)
    if dec is None:
        dec = control_decomposition(A, b)
    pred = predicted_closed_loop_poly(dec, K).descending
    err = float(np.max(np.abs(pred - desc) / np.maximum(1.0, np.abs(desc))))
    try:
        fit = transition_decay(Acl, ts)
    except DataError:
        fit = None
    decay_ok = fit is not None and fit.alpha_hat > 0
    return ClosedLoopReport(pos, ok, desc, err, err <= FACTOR_TOL, fit, bool(decay_ok))


@dataclass(frozen=True)
class StabilizationResult:
    status: Status
    K: np.ndarray | None = None
    witness: list = field(default_factory=list)  # human-readable contradicting constraints
    failing: list = field(default_factory=list)  # eigenvalues failing the PBH test
    decomposition: Decomposition | None = None
    alphas: np.ndarray | None = None
    constraints: InequalitySystem | None = None
    report: ClosedLoopReport | None = None
    margin: float = 0.0
    conservative: bool = False
    note: str = ""

    def to_json(self):
        from .serialize import complex_list, ext_real

        out = {
            "status": self.status.value,
            "K": None if self.K is None else [float(x) for x in self.K],
            "conservative": self.conservative,
            "margin": self.margin,
        }
        if self.decomposition is not None:
            out["decomposition"] = dict(
                self.decomposition.to_json(),
                alpha=[ext_real(x) for x in self.alphas],
            )
        if self.constraints is not None:
            out["constraints"] = [
                self.constraints.describe(lab) for lab in self.constraints.constraints()
            ]
        if self.status is Status.INFEASIBLE:
            out["witness"] = self.witness
        if self.status is Status.NOT_STABILIZABLE:
            out["failing"] = complex_list(self.failing)
        if self.report is not None:
            out["closed_loop"] = self.report.to_json()
        if self.note:
            out["note"] = self.note
        return out


def positive_stabilize(A, b, ts: TimeScale, margin=1e-6, recenter=True) -> StabilizationResult:
    """Search for ``K`` making ``x^Delta = (A + b K) x`` positive and stable on ``ts``.

    Raises
    ------
    DomainError
        If ``(A, b)`` is not a positive single-input system on ``ts``.
    PreconditionError
        If the graininess of ``ts`` is unbounded.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    b = _column(b, n)
    _require_bounded(ts)
    _positive_or_fail(A, b, ts)
    pbh = pbh_stabilizable(A, b, ts)
    if not pbh.ok:
        return StabilizationResult(
            Status.NOT_STABILIZABLE, failing=pbh.failing, conservative=pbh.conservative
        )
    dec = control_decomposition(A, b)
    alphas = alpha_bounds(A, b, ts)
    ineqs = build_constraints(dec, alphas)
    common = dict(
        decomposition=dec, alphas=alphas, constraints=ineqs, conservative=pbh.conservative
    )
    if dec.k < n:
        outside = [z for z in spectrum(dec.A22) if not disc_membership(z, ts.gamma)[0]]
        if outside:
            return StabilizationResult(Status.NOT_STABILIZABLE, failing=outside, **common)
    sol = solve_feasibility(ineqs, margin, recenter)
    if sol.status is Status.INFEASIBLE:
        return StabilizationResult(
            Status.INFEASIBLE,
            witness=[ineqs.describe(lab) for lab in sol.witness],
            margin=sol.margin,
            note=sol.note,
            **common,
        )
    K = _repair(A, b, sol.K.copy(), ts, alphas)
    report = verify_closed_loop(A, b, K, ts, dec)
    if not report.passed:
        raise NumericalError(
            "feasible gain failed closed-loop verification", best=K, candidates=[report]
        )
    return StabilizationResult(Status.FEASIBLE, K=K, report=report, margin=sol.margin, **common)


__all__ = [
    "ClosedLoopReport",
    "Decomposition",
    "Feasibility",
    "InequalitySystem",
    "PBHResult",
    "StabilizationResult",
    "Status",
    "alpha_bounds",
    "build_constraints",
    "companion_block",
    "control_decomposition",
    "pbh_stabilizable",
    "positive_stabilize",
    "predicted_closed_loop_poly",
    "solve_feasibility",
    "verify_closed_loop",
]
