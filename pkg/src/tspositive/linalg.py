"""Dense matrix and polynomial kernels.

Characteristic polynomials come from the Faddeev-LeVerrier recurrence and
spectra from the roots of that polynomial (Aberth-Ehrlich iteration with a
companion-matrix fallback).  The roots are then refined against the matrix
itself, with ``p'/p`` taken as ``tr((zI - A)^-1)``: isolated roots by Aberth
steps, clusters by a contour solve followed by Aberth steps, and clusters
that stay together are merged when they pass a multiple-root test.
Matrices are plain 2-D ``numpy`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError

MAX_ORDER = 64
EPS = np.finfo(float).eps


def as_matrix(M, name="matrix", square=False, dtype=float):
    """Coerce to a finite 2-D array; raise DomainError on bad shapes."""
    arr = np.array(M, dtype=dtype)
    if arr.ndim == 1 and arr.size:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DomainError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DomainError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class Polynomial:
    """Real or complex polynomial, coefficients ascending from the constant term."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs))
        if not np.iscomplexobj(c):
            c = c.astype(float)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots):
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, [-r, 1.0])
        if np.allclose(c.imag, 0.0, atol=0.0):
            c = c.real
        return cls(c)

    @property
    def degree(self):
        return self.coeffs.size - 1

    @property
    def descending(self):
        return self.coeffs[::-1].copy()

    def __call__(self, z):
        z = np.asarray(z)
        acc = np.zeros_like(z, dtype=np.result_type(z, self.coeffs, float))
        for a in self.coeffs[::-1]:
            acc = acc * z + a
        return acc

    def __mul__(self, other):
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    def __len__(self):
        return self.coeffs.size


def char_poly(A) -> Polynomial:
    """Monic characteristic polynomial ``det(lambda I - A)``.

    >>> char_poly([[-2.0, 1.0], [0.0, -3.0]]).coeffs
    array([6., 5., 1.])
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    if n > MAX_ORDER:
        raise DomainError(f"matrix order {n} exceeds the supported maximum {MAX_ORDER}")
    # scale by a power of two near the max entry: keeps the recurrence in
    # range and the scaling itself exact
    top = float(np.max(np.abs(A)))
    s = 2.0 ** math.ceil(math.log2(top)) if top > 0 else 0.0
    if s == 0.0:
        c = np.zeros(n + 1)
        c[n] = 1.0
        return Polynomial(c)
    As = A / s
    c = np.zeros(n + 1)
    c[n] = 1.0
    M = np.zeros_like(As)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = As @ M + c[n - k + 1] * eye
        c[n - k] = -np.trace(As @ M) / k
    c *= s ** (n - np.arange(n + 1, dtype=float))
    return Polynomial(c)


# ----------------------------------------------------------------------------
# roots
# ----------------------------------------------------------------------------


def _horner(c_desc, z):
    p = np.full_like(z, c_desc[0])
    dp = np.zeros_like(z)
    for a in c_desc[1:]:
        dp = dp * z + p
        p = p * z + a
    return p, dp


def _rounding_bound(c_desc, z):
    absz = np.abs(z)
    acc = np.zeros_like(absz)
    for a in c_desc:
        acc = acc * absz + abs(a)
    return acc


def _taylor_shift(c_desc, x0):
    """Descending coefficients of ``p(x + x0)`` by repeated synthetic division."""
    c = np.array(c_desc, dtype=complex)
    n = c.size - 1
    for k in range(n):
        for i in range(1, n + 1 - k):
            c[i] += x0 * c[i - 1]
    return c


def _aberth(c_desc, max_iter):
    n = c_desc.size - 1
    a = c_desc / c_desc[0]
    center = -a[1] / n
    # Fujiwara-type bound on root moduli around the centroid
    shifted = _taylor_shift(a, center)[::-1]
    mags = [abs(shifted[n - k]) ** (1.0 / k) for k in range(1, n + 1) if shifted[n - k] != 0]
    radius = max(mags) if mags else 1.0
    radius = max(radius, 1e-8 * max(1.0, abs(center)))
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = center + radius * np.exp(1j * angles)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        p, dp = _horner(a, z)
        bound = _rounding_bound(a, z) * EPS * 4 * n
        done |= np.abs(p) <= bound
        if done.all():
            return z, True
        act = ~done
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        S = inv.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = p / dp
            delta = w / (1.0 - w * S)
        bad = ~np.isfinite(delta)
        delta[bad] = 1e-6 * (1 + np.abs(z[bad]))
        small = np.abs(delta) <= 2 * EPS * np.abs(z)
        z = np.where(act, z - delta, z)
        done |= small & act
    return z, bool(done.all())


def _symmetrize(z):
    """Make roots of a real polynomial exactly conjugate-symmetric.

    A root is paired with the nearest root to its conjugate only if that
    partner is closer than its own imaginary part; otherwise the imaginary
    part is rounding noise and the root is made real.
    """
    z = np.array(z, dtype=complex)
    free = [i for i in range(z.size) if z[i].imag != 0]
    free.sort(key=lambda i: -abs(z[i].imag))
    while free:
        i = free.pop(0)
        partners = [j for j in free if np.sign(z[j].imag) == -np.sign(z[i].imag)]
        j = min(partners, key=lambda k: abs(z[k] - np.conj(z[i])), default=None)
        if j is not None and abs(z[j] - np.conj(z[i])) < abs(z[i].imag):
            free.remove(j)
            m = 0.5 * (z[i] + np.conj(z[j]))
            z[i], z[j] = m, np.conj(m)
        else:
            z[i] = z[i].real
    return z


def _sort_roots(z):
    order = np.lexsort((z.imag, -z.real))
    return z[order]


def poly_roots(p, tol=1e-9, max_iter=500) -> np.ndarray:
    """All complex roots of ``p`` with multiplicity.

    ``p`` is a :class:`Polynomial` or an ascending coefficient sequence.
    Roots of real polynomials are returned conjugate-symmetric, sorted by
    decreasing real part.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    c = p.coeffs
    if c.size < 2:
        raise DomainError("polynomial must have degree at least 1")
    if c[-1] == 0:
        raise DomainError("leading coefficient must be nonzero")
    real = not np.iscomplexobj(c)
    c_desc = c[::-1].astype(complex)
    # strip zero roots exactly
    nz = 0
    while c_desc.size - nz > 1 and c_desc[c_desc.size - 1 - nz] == 0:
        nz += 1
    work = c_desc[: c_desc.size - nz]
    roots = np.zeros(0, dtype=complex)
    if work.size > 1:
        roots, ok = _aberth(work, max_iter)
        if not ok or not _residual_ok(work, roots, tol):
            fallback = _companion_roots(work)
            if _residual_ok(work, fallback, tol):
                roots = fallback
            else:
                best = roots if _max_residual(work, roots) <= _max_residual(work, fallback) else fallback
                raise NumericalError("root finder did not converge", best=best)
    roots = np.concatenate([roots, np.zeros(nz, dtype=complex)])
    if real:
        roots = _symmetrize(roots)
    return _sort_roots(roots)


def _max_residual(c_desc, z):
    a = c_desc / c_desc[0]
    p, _ = _horner(a, z)
    return float(np.max(np.abs(p) / np.maximum(_rounding_bound(a, z), 1e-300)))


def _residual_ok(c_desc, z, tol):
    return bool(np.all(np.isfinite(z))) and _max_residual(c_desc, z) <= tol


def _companion_roots(c_desc):
    a = c_desc / c_desc[0]
    n = a.size - 1
    C = np.zeros((n, n), dtype=complex)
    C[0, :] = -a[1:]
    C[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(C)


# ----------------------------------------------------------------------------
# spectra
# ----------------------------------------------------------------------------


def _clusters(z, c_desc):
    """Groups of roots whose inclusion discs overlap.

    Each disc ``|w - z_i| <= n * max(|p(z_i)|, rounding bound) / |p'(z_i)|``
    contains a true root; overlapping discs mark a possible multiple root.
    """
    n = z.size
    p, dp = _horner(c_desc, z)
    err = np.maximum(np.abs(p), 4 * n * EPS * _rounding_bound(c_desc, z))
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.where(np.abs(dp) > 0, n * err / np.abs(dp), np.inf)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= radius[i] + radius[j]:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _log_det_slope(A, z):
    """``tr((zI - A)^-1) = sum 1/(z - lambda_i)``, or None at an exact eigenvalue."""
    try:
        tr = np.trace(np.linalg.inv(z * np.eye(A.shape[0]) - A))
    except np.linalg.LinAlgError:
        return None
    return tr if np.isfinite(tr) and tr != 0 else None


def _is_multiple_root(c_desc, z, m):
    n = c_desc.size - 1
    t = _taylor_shift(c_desc, z)[::-1]
    bound = _taylor_shift(np.abs(c_desc), abs(z)).real[::-1]
    return all(abs(t[k]) <= 1e3 * n * EPS * bound[k] for k in range(m))


def _traces(A, z):
    """``tr((z_i I - A)^-1)`` for every ``z_i``; NaN where the matrix is singular."""
    n = A.shape[0]
    M = z[:, None, None] * np.eye(n) - A
    try:
        return np.trace(np.linalg.inv(M), axis1=1, axis2=2)
    except np.linalg.LinAlgError:
        out = np.empty(z.size, dtype=complex)
        for k, zk in enumerate(z):
            tr = _log_det_slope(A, zk)
            out[k] = np.nan if tr is None else tr
        return out


def _aberth_matrix(A, out, group, iters):
    """Aberth corrections on ``out[group]`` with ``p'/p`` taken from the matrix.

    Returns True when the last sweep moved every root by rounding level only.
    """
    # traces depend only on their own root, so they are batched; the
    # corrections run sequentially (Gauss-Seidel), which also breaks the
    # conjugate symmetry that would pin two close real roots as a pair
    for _ in range(iters):
        tr = _traces(A, out[group])
        moved = 0.0
        for k, i in enumerate(group):
            if not np.isfinite(tr[k]) or tr[k] == 0:
                continue
            d = out[i] - out
            d = d[d != 0]
            denom = tr[k] - np.sum(1.0 / d)
            if denom == 0 or not np.isfinite(denom):
                continue
            step = 1.0 / denom
            out[i] = out[i] - step
            moved = max(moved, abs(step) / max(1.0, abs(out[i])))
        if moved <= 8 * EPS:
            return True
    return False


def _contour_roots(A, z, group, nodes=64):
    """Roots inside a circle around ``z[group]`` from contour power sums.

    ``tr((zI - A)^-1)`` has a simple pole at each eigenvalue, so its moments on
    a circle give the power sums of the enclosed eigenvalues; Newton's
    identities turn them into a local polynomial. Returns None when the
    circle does not enclose exactly ``len(group)`` eigenvalues.
    """
    m = len(group)
    pts = z[group]
    c = np.mean(pts)
    spread = float(np.max(np.abs(pts - c)))
    rest = np.delete(z, group)
    far = float(np.min(np.abs(rest - c))) if rest.size else 4 * spread + 1.0
    w = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    for R in (0.5 * far, 0.25 * far):
        if R <= spread:
            break
        tr = _traces(A, c + R * w)
        if not np.all(np.isfinite(tr)):
            continue
        t = np.array([R * np.mean(w ** (k + 1) * tr) for k in range(m + 1)])
        if abs(t[0] - m) > 1e-3:
            continue
        # Newton's identities for the monic polynomial in (z - c) / R
        e = np.zeros(m + 1, dtype=complex)
        e[0] = 1.0
        for k in range(1, m + 1):
            e[k] = sum((-1) ** (i - 1) * e[k - i] * t[i] for i in range(1, k + 1)) / k
        coeffs = e * (-1.0) ** np.arange(m + 1)
        return c + R * np.roots(coeffs)
    return None


def _merge_point(A, out, group, c_desc, iters):
    """Common value of ``out[group]`` if it is a root of multiplicity ``len(group)``."""
    m = len(group)
    mean = np.mean(out[group])
    spread = float(np.max(np.abs(out[group] - mean)))
    c = mean
    # Newton for a root of multiplicity m
    for _ in range(iters):
        tr = _log_det_slope(A, c)
        if tr is None:
            break
        step = m / tr
        c = c - step
        if abs(step) <= 4 * EPS * max(1.0, abs(c)):
            break
    if abs(c - mean) > 2 * spread + 8 * EPS * max(1.0, abs(mean)):
        return None
    return c if _is_multiple_root(c_desc, c, m) else None


def _split(z, group):
    """Cut the longest edge of the single-linkage tree of ``z[group]``."""
    pts = z[group]
    m = len(group)
    inside, edges = [0], []
    best = np.abs(pts - pts[0])
    link = np.zeros(m, dtype=int)
    for _ in range(m - 1):
        cand = [k for k in range(m) if k not in inside]
        k = min(cand, key=lambda q: best[q])
        edges.append((best[k], link[k], k))
        inside.append(k)
        d = np.abs(pts - pts[k])
        closer = d < best
        best = np.where(closer, d, best)
        link = np.where(closer, k, link)
    _, a, b = max(edges)
    adj = {k: set() for k in range(m)}
    for _, u, v in edges:
        if {u, v} != {a, b}:
            adj[u].add(v)
            adj[v].add(u)
    side, stack = {a}, [a]
    while stack:
        for v in adj[stack.pop()]:
            if v not in side:
                side.add(v)
                stack.append(v)
    left = [group[k] for k in sorted(side)]
    right = [group[k] for k in range(m) if k not in side]
    return left, right


def _resolve(A, out, group, c_desc, iters):
    if len(group) < 2:
        return
    c = _merge_point(A, out, group, c_desc, iters)
    if c is not None:
        out[group] = c
        return
    for part in _split(out, group):
        _resolve(A, out, part, c_desc, iters)


def _polish(A, z, c_desc, iters=5):
    out = z.copy()
    groups = _clusters(out, c_desc)
    singles = [g[0] for g in groups if len(g) == 1]
    if singles:
        _aberth_matrix(A, out, singles, 4 * iters)
    for group in groups:
        m = len(group)
        if m == 1:
            continue
        trial = out.copy()
        converged = _aberth_matrix(A, trial, group, 4 * iters)
        pts = trial[group]
        scale = max(1.0, float(np.max(np.abs(pts))))
        gaps = np.abs(np.subtract.outer(pts, pts))[np.triu_indices(m, 1)]
        if converged and np.min(gaps) > 1e-6 * scale:
            out[group] = pts
            continue
        local = _contour_roots(A, out, group)
        if local is not None:
            trial = out.copy()
            trial[group] = local
            converged = _aberth_matrix(A, trial, group, 4 * iters)
            pts = trial[group]
            gaps = np.abs(np.subtract.outer(pts, pts))[np.triu_indices(m, 1)]
            if converged and np.min(gaps) > 1e-6 * scale:
                out[group] = pts
                continue
        # roots left unmerged keep their refinement
        out[group] = pts
        _resolve(A, out, group, c_desc, iters)
    return out


def spectrum(A, polish=True) -> np.ndarray:
    """Eigenvalues of ``A`` with multiplicity, via the characteristic polynomial."""
    A = as_matrix(A, "A", square=True)
    p = char_poly(A)
    lam = poly_roots(p)
    if polish:
        lam = _sort_roots(_symmetrize(_polish(A, lam, p.descending.astype(complex))))
    return lam


def spectral_radius(A) -> float:
    return float(np.max(np.abs(spectrum(A))))


def spectral_abscissa(A) -> float:
    return float(np.max(spectrum(A).real))


def real_embedding(M):
    """``[[Re, -Im], [Im, Re]]``; its rank is twice the complex rank of ``M``."""
    M = np.asarray(M)
    X, Y = M.real, M.imag
    return np.block([[X, -Y], [Y, X]])


def matrix_rank(M, tol=1e-9) -> int:
    """Numerical rank with threshold ``tol * max|entry|`` on singular values."""
    if tol <= 0:
        raise DomainError("rank tolerance must be positive")
    M = np.asarray(M)
    if M.ndim != 2:
        raise DomainError(f"rank needs a 2-D matrix, got shape {M.shape}")
    if M.size == 0:
        return 0
    cplx = np.iscomplexobj(M) and np.any(M.imag != 0)
    R = real_embedding(M) if cplx else M.real.astype(float)
    top = float(np.max(np.abs(R)))
    if top == 0.0:
        return 0
    s = np.linalg.svd(R, compute_uv=False)
    r = int(np.sum(s > tol * top))
    return (r + 1) // 2 if cplx else r


def expm(A, dt=1.0) -> np.ndarray:
    """``exp(A * dt)`` by scaling and squaring with a Pade approximant."""
    A = as_matrix(A, "A", square=True)
    if not math.isfinite(dt):
        raise DomainError(f"time step must be finite, got {dt}")
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = scipy.linalg.expm(A * dt)
        except FloatingPointError as exc:
            raise NumericalError(f"matrix exponential overflowed for dt = {dt}") from exc
    if not np.all(np.isfinite(E)):
        raise NumericalError(f"matrix exponential overflowed for dt = {dt}")
    return E


__all__ = [
    "Polynomial",
    "as_matrix",
    "char_poly",
    "expm",
    "matrix_rank",
    "poly_roots",
    "real_embedding",
    "spectral_abscissa",
    "spectral_radius",
    "spectrum",
]
