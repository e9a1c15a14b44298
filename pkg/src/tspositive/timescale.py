"""Finite-horizon time scales and the delta calculus on sampled functions.

A time scale is stored as an ordered tuple of *blocks*.  A block is either a
dense interval ``[a, b]`` or an arithmetic run of isolated points
``start, start + step, ..., start + (count - 1) * step``.  Uniform grids are
therefore a single block no matter how long the horizon is.  An optional
periodic extension repeats the block pattern with a fixed period, either a
given number of times or without bound.

Analysis quantities (``mu_bar``, ``gamma``) are computed from the pattern
including the gap induced by the periodic repetition; simulation walks the
unrolled horizon.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from .errors import DataError, DomainError, ValidationError

INF = math.inf
MEMBERSHIP_TOL = 1e-12


def _tol(t):
    # absolute near the origin, relative for long horizons
    return MEMBERSHIP_TOL * max(1.0, abs(t))


def reciprocal(x):
    """Extended-real reciprocal with ``1/0 = +inf`` and ``1/+inf = 0``."""
    if x == 0:
        return INF
    if math.isinf(x):
        return 0.0
    return 1.0 / x


# ----------------------------------------------------------------------------
# atoms and specs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class IsolatedPoint:
    t: float


@dataclass(frozen=True)
class DenseInterval:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValidationError(f"dense interval needs a < b, got [{self.a}, {self.b}]")


Atom = Union[IsolatedPoint, DenseInterval]


@dataclass(frozen=True)
class Continuous:
    horizon: tuple = (0.0, 10.0)


@dataclass(frozen=True)
class UniformGrid:
    h: float
    horizon: tuple = (0.0, 10.0)


@dataclass(frozen=True)
class ExplicitAtoms:
    atoms: tuple


@dataclass(frozen=True)
class PeriodicPattern:
    atoms: tuple
    period: float
    repetitions: int | None = None  # None: unbounded


@dataclass(frozen=True)
class Geometric:
    """The scale ``start * q**k``; its graininess grows without bound."""

    q: float
    start: float = 1.0
    count: int = 16


TimeScaleSpec = Union[Continuous, UniformGrid, ExplicitAtoms, PeriodicPattern, Geometric]


@dataclass(frozen=True)
class _Block:
    start: float
    count: int = 0  # 0 marks a dense interval
    step: float = 0.0
    end: float = 0.0  # right end of a dense interval

    @property
    def dense(self):
        return self.count == 0

    @property
    def stop(self):
        if self.dense:
            return self.end
        return self.point(self.count - 1)

    def point(self, j):
        return self.start + j * self.step

    def shifted(self, offset):
        if offset == 0:
            return self
        return _Block(self.start + offset, self.count, self.step, self.end + offset if self.dense else 0.0)

    def index_of(self, t):
        """Grid index of ``t`` (dense blocks return -1), or None if absent."""
        tol = _tol(t)
        if self.dense:
            return -1 if self.start - tol <= t <= self.end + tol else None
        if self.count == 1:
            return 0 if abs(t - self.start) <= tol else None
        j = int(round((t - self.start) / self.step))
        if 0 <= j < self.count and abs(self.point(j) - t) <= tol:
            return j
        return None


def _dense(a, b):
    return _Block(float(a), 0, 0.0, float(b))


def _grid(start, step, count):
    return _Block(float(start), int(count), float(step) if count > 1 else 0.0)


def _blocks_from_atoms(atoms):
    if not atoms:
        raise ValidationError("a time scale needs at least one atom")
    blocks = []
    prev_stop = -INF
    for atom in atoms:
        if isinstance(atom, IsolatedPoint):
            b = _grid(atom.t, 0.0, 1)
        elif isinstance(atom, DenseInterval):
            b = _dense(atom.a, atom.b)
        else:
            raise ValidationError(f"unknown atom {atom!r}")
        if not (b.start > prev_stop):
            raise ValidationError("atoms must be strictly ordered and pairwise disjoint")
        prev_stop = b.stop
        blocks.append(b)
    return tuple(blocks)


# ----------------------------------------------------------------------------
# the time scale
# ----------------------------------------------------------------------------


class JumpData(NamedTuple):
    sigma: float
    rho: float
    mu: float
    nu: float


class _Pos(NamedTuple):
    g: int  # global block index
    j: int  # grid index, -1 inside a dense block
    t: float


@dataclass(frozen=True)
class TimeScale:
    """Closed subset of the real line built from ordered blocks.

    Use :func:`make_timescale` to construct one.
    """

    pattern: tuple
    period: float | None = None
    repetitions: int | None = None
    kind: str = "atoms"
    unbounded_gaps: bool = False
    mu_bar: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu_bar", self._compute_mu_bar())
        object.__setattr__(self, "gamma", reciprocal(self.mu_bar))

    # -- structure -----------------------------------------------------------

    def _pattern_gaps(self):
        gaps = []
        for b in self.pattern:
            if not b.dense and b.count > 1:
                gaps.append(b.step)
        for left, right in zip(self.pattern, self.pattern[1:]):
            gaps.append(right.start - left.stop)
        if self.period is not None and (self.repetitions is None or self.repetitions > 1):
            gaps.append(self.pattern[0].start + self.period - self.pattern[-1].stop)
        return gaps

    def _compute_mu_bar(self):
        if self.unbounded_gaps:
            return INF
        return max(self._pattern_gaps(), default=0.0)

    @property
    def n_blocks(self):
        """Number of blocks on the horizon (None when unbounded)."""
        if self.period is None:
            return len(self.pattern)
        if self.repetitions is None:
            return None
        return len(self.pattern) * self.repetitions

    def block(self, g):
        L = len(self.pattern)
        if self.period is None:
            return self.pattern[g]
        k, i = divmod(g, L)
        return self.pattern[i].shifted(k * self.period)

    @property
    def start(self):
        return self.pattern[0].start

    @property
    def end(self):
        n = self.n_blocks
        return INF if n is None else self.block(n - 1).stop

    @property
    def is_bounded(self):
        return self.n_blocks is not None

    @property
    def is_continuum(self):
        """Graininess vanishes everywhere (an interval of the real line)."""
        return self.mu_bar == 0.0

    @property
    def is_homogeneous_grid(self):
        """All points isolated with one common gap (a window of h*Z)."""
        if self.unbounded_gaps or any(b.dense for b in self.pattern):
            return False
        gaps = self._pattern_gaps()
        if not gaps:
            return False
        g0 = gaps[0]
        return all(abs(g - g0) <= 1e-12 * g0 for g in gaps)

    @property
    def has_exact_region(self):
        """Whether the disc/half-plane stability region is exact for this scale."""
        return (self.is_continuum or self.is_homogeneous_grid) and not self.unbounded_gaps

    @property
    def atoms(self):
        """Materialized atom list of a bounded scale."""
        n = self.n_blocks
        if n is None:
            raise DomainError("cannot materialize the atoms of an unbounded periodic scale")
        out = []
        for g in range(n):
            b = self.block(g)
            if b.dense:
                out.append(DenseInterval(b.start, b.end))
            else:
                out.extend(IsolatedPoint(b.point(j)) for j in range(b.count))
        return tuple(out)

    def extended(self, t_end):
        """Copy whose horizon reaches at least ``t_end``.

        Homogeneous scales (continuous, uniform) grow their horizon, bounded
        periodic scales gain repetitions.  Other scales are returned unchanged
        when they already cover ``t_end``.
        """
        if t_end <= self.end:
            return self
        if self.kind == "continuous":
            return TimeScale((_dense(self.start, t_end),), kind="continuous")
        if self.kind == "uniform":
            b = self.pattern[0]
            count = int(math.ceil((t_end - b.start) / b.step - 1e-9)) + 1
            return TimeScale((_grid(b.start, b.step, count),), kind="uniform")
        if self.period is not None:
            reps = int(math.ceil((t_end - self.start) / self.period)) + 1
            return TimeScale(self.pattern, self.period, max(reps, self.repetitions or 1), self.kind)
        raise DomainError(f"time scale ends at {self.end} and cannot be extended to {t_end}")

    # -- membership and jumps ------------------------------------------------

    def _locate(self, t):
        t = float(t)
        L = len(self.pattern)
        if self.period is None:
            candidates = [0]
            base = 0.0
        else:
            k = math.floor((t - self.start) / self.period)
            candidates = [k, k - 1, k + 1]
        starts = [b.start for b in self.pattern]
        for k in candidates:
            if self.period is not None:
                if k < 0 or (self.repetitions is not None and k >= self.repetitions):
                    continue
                base = k * self.period
            local = t - base
            i = bisect.bisect_right(starts, local + _tol(t)) - 1
            if i < 0:
                continue
            b = self.pattern[i]
            j = b.shifted(base).index_of(t)
            if j is not None:
                bb = b.shifted(base)
                exact = bb.point(j) if j >= 0 else min(max(t, bb.start), bb.end)
                return _Pos(k * L + i if self.period is not None else i, j, exact)
        return None

    def contains(self, t):
        return self._locate(t) is not None

    def __contains__(self, t):
        return self.contains(t)

    def _require(self, t):
        pos = self._locate(t)
        if pos is None:
            raise DomainError(f"t = {t!r} does not belong to the time scale")
        return pos

    def _next_block(self, g):
        n = self.n_blocks
        if n is not None and g + 1 >= n:
            return None
        return self.block(g + 1)

    def jump_data(self, t):
        pos = self._require(t)
        b = self.block(pos.g)
        t = pos.t
        # forward
        if b.dense and t < b.end - _tol(t):
            sigma = t
        elif not b.dense and pos.j < b.count - 1:
            sigma = b.point(pos.j + 1)
        else:
            nxt = self._next_block(pos.g)
            sigma = t if nxt is None else nxt.start
        # backward
        if b.dense and t > b.start + _tol(t):
            rho = t
        elif not b.dense and pos.j > 0:
            rho = b.point(pos.j - 1)
        else:
            rho = t if pos.g == 0 else self.block(pos.g - 1).stop
        return JumpData(sigma, rho, sigma - t, t - rho)

    def sigma(self, t):
        return self.jump_data(t).sigma

    def rho(self, t):
        return self.jump_data(t).rho

    def mu(self, t):
        return self.jump_data(t).mu

    def nu(self, t):
        return self.jump_data(t).nu

    def in_kappa(self, t):
        """Membership in T^kappa: everything except a left-scattered maximum."""
        jd = self.jump_data(t)
        is_max = jd.sigma == t and not self._right_dense(t)
        return not (is_max and jd.nu > 0)

    def _right_dense(self, t):
        pos = self._require(t)
        b = self.block(pos.g)
        return b.dense and pos.t < b.end - _tol(pos.t)

    # -- path walking --------------------------------------------------------

    def path(self, t0, t1):
        """Yield the elementary pieces between ``t0`` and ``t1``.

        Pieces are ``("jump", t_left, mu, count)`` for ``count`` consecutive
        right-scattered steps of size ``mu`` and ``("flow", t_left, length)``
        for dense stretches.
        """
        if t1 < t0:
            raise DomainError("backward paths are not supported")
        p0 = self._locate(t0)
        p1 = self._locate(t1)
        if p0 is None:
            raise DomainError(f"t0 = {t0!r} does not belong to the time scale")
        if p1 is None:
            if t1 > self.end:
                raise DomainError(f"t = {t1!r} lies beyond the stored horizon (ends at {self.end})")
            raise DomainError(f"t = {t1!r} does not belong to the time scale")
        yield from self._walk(p0, p1)

    def _walk(self, p0, p1) -> Iterator[tuple]:
        for g in range(p0.g, p1.g + 1):
            b = self.block(g)
            first = g == p0.g
            last = g == p1.g
            if b.dense:
                lo = p0.t if first else b.start
                hi = p1.t if last else b.end
                if hi > lo:
                    yield ("flow", lo, hi - lo)
            else:
                j_lo = p0.j if first else 0
                j_hi = p1.j if last else b.count - 1
                if j_hi > j_lo:
                    yield ("jump", b.point(j_lo), b.step, j_hi - j_lo)
            if not last:
                nxt = self.block(g + 1)
                yield ("jump", b.stop, nxt.start - b.stop, 1)

    def points(self, a=None, b=None, dense_cells=32):
        """All isolated points in ``[a, b]`` plus ``dense_cells`` cells per dense stretch."""
        a = self.start if a is None else a
        b = self.end if b is None else b
        out = [self._require(a).t]
        for piece in self.path(a, b):
            if piece[0] == "jump":
                _, t, mu, count = piece
                out.extend(t + (i + 1) * mu for i in range(count))
            else:
                _, t, length = piece
                out.extend(t + length * np.arange(1, dense_cells + 1) / dense_cells)
        return np.asarray(out, dtype=float)

    # -- serialization -------------------------------------------------------

    def to_json(self):
        if self.kind == "continuous":
            b = self.pattern[0]
            return {"kind": "continuous", "horizon": [b.start, b.end]}
        if self.kind == "uniform":
            b = self.pattern[0]
            return {"kind": "uniform", "h": b.step, "horizon": [b.start, b.stop]}
        if self.kind == "geometric":
            b = self.pattern
            q = b[1].start / b[0].start
            return {"kind": "geometric", "q": q, "start": b[0].start, "count": len(b)}
        atoms = []
        for blk in self.pattern:
            if blk.dense:
                atoms.append({"interval": [blk.start, blk.end]})
            else:
                atoms.extend({"point": blk.point(j)} for j in range(blk.count))
        out = {"kind": "atoms", "atoms": atoms, "period": self.period}
        if self.period is not None:
            out["repetitions"] = self.repetitions
        return out


# ----------------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------------


def _horizon(h):
    try:
        a, b = (float(x) for x in h)
    except (TypeError, ValueError):
        raise ValidationError(f"horizon must be a pair [a, b], got {h!r}", field="horizon")
    if not (a < b) or not (math.isfinite(a) and math.isfinite(b)):
        raise ValidationError(f"horizon needs finite a < b, got [{a}, {b}]", field="horizon")
    return a, b


def make_timescale(spec: TimeScaleSpec | dict) -> TimeScale:
    """Build a :class:`TimeScale` from a spec object or its JSON dict."""
    if isinstance(spec, dict):
        spec = spec_from_json(spec)
    if isinstance(spec, Continuous):
        a, b = _horizon(spec.horizon)
        return TimeScale((_dense(a, b),), kind="continuous")
    if isinstance(spec, UniformGrid):
        a, b = _horizon(spec.horizon)
        h = float(spec.h)
        if not (h > 0 and math.isfinite(h)):
            raise ValidationError(f"grid step must be positive, got {h}", field="h")
        count = int(math.floor((b - a) / h + 1e-9)) + 1
        return TimeScale((_grid(a, h, count),), kind="uniform")
    if isinstance(spec, ExplicitAtoms):
        return TimeScale(_blocks_from_atoms(tuple(spec.atoms)), kind="atoms")
    if isinstance(spec, PeriodicPattern):
        blocks = _blocks_from_atoms(tuple(spec.atoms))
        period = float(spec.period)
        if not (period > 0 and math.isfinite(period)):
            raise ValidationError(f"period must be positive, got {period}", field="period")
        if not (blocks[-1].stop < blocks[0].start + period):
            raise ValidationError(
                "periodic pattern must fit strictly inside one period", field="period"
            )
        reps = spec.repetitions
        if reps is not None and (int(reps) != reps or reps < 1):
            raise ValidationError(f"repetitions must be a positive integer, got {reps}")
        return TimeScale(blocks, period, None if reps is None else int(reps), kind="atoms")
    if isinstance(spec, Geometric):
        q, s, n = float(spec.q), float(spec.start), int(spec.count)
        if not (q > 1 and s > 0 and n >= 2):
            raise ValidationError("geometric scale needs q > 1, start > 0, count >= 2")
        blocks = tuple(_grid(s * q**k, 0.0, 1) for k in range(n))
        return TimeScale(blocks, kind="geometric", unbounded_gaps=True)
    raise ValidationError(f"unknown time scale spec {spec!r}")


def _atom_from_json(d):
    if not isinstance(d, dict):
        raise ValidationError(f"atom must be an object, got {d!r}", field="atoms")
    if "point" in d:
        return IsolatedPoint(float(d["point"]))
    if "interval" in d:
        a, b = d["interval"]
        return DenseInterval(float(a), float(b))
    raise ValidationError(f"atom needs 'point' or 'interval', got {d!r}", field="atoms")


def spec_from_json(d: dict) -> TimeScaleSpec:
    kind = d.get("kind")
    try:
        if kind == "continuous":
            return Continuous(tuple(d["horizon"]))
        if kind == "uniform":
            return UniformGrid(float(d["h"]), tuple(d["horizon"]))
        if kind == "atoms":
            atoms = tuple(_atom_from_json(a) for a in d["atoms"])
            period = d.get("period")
            if period is None:
                return ExplicitAtoms(atoms)
            return PeriodicPattern(atoms, float(period), d.get("repetitions"))
        if kind == "geometric":
            return Geometric(float(d["q"]), float(d.get("start", 1.0)), int(d.get("count", 16)))
    except KeyError as exc:
        raise ValidationError(f"time scale of kind {kind!r} is missing {exc}", field=exc.args[0])
    raise ValidationError(f"unknown time scale kind {kind!r}", field="kind")


def jump_data(ts: TimeScale, t: float) -> JumpData:
    """Forward/backward jumps and graininesses at ``t``."""
    return ts.jump_data(t)


# ----------------------------------------------------------------------------
# delta calculus on samples
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledFunction:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValidationError("grid and values must be 1-D arrays of equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValidationError("sample grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, f: Callable, ts: TimeScale, a=None, b=None, dense_cells=1000):
        grid = ts.points(a, b, dense_cells=dense_cells)
        return cls(grid, np.array([f(t) for t in grid], dtype=float))

    def _index(self, t):
        i = int(np.searchsorted(self.grid, t))
        for k in (i - 1, i):
            if 0 <= k < self.grid.size and abs(self.grid[k] - t) <= _tol(t):
                return k
        return None

    def __call__(self, t):
        k = self._index(t)
        if k is None:
            raise DataError(f"no sample at t = {t!r}")
        return self.values[k]


def _check_members(f: SampledFunction, ts: TimeScale):
    for t in f.grid:
        if not ts.contains(t):
            raise ValidationError(f"sample time {t!r} is not in the time scale", field="grid")


def delta_derivative(f: SampledFunction, ts: TimeScale, t: float) -> float:
    """Delta derivative of sampled ``f`` at ``t``.

    Exact at right-scattered points.  At right-dense points this is a
    one-sided difference quotient against the nearest right sample, with
    error of the order of the sample spacing.
    """
    jd = ts.jump_data(t)
    if jd.mu > 0:
        return (f(jd.sigma) - f(t)) / jd.mu
    if not ts.in_kappa(t):
        raise DomainError(f"t = {t!r} is a left-scattered maximum; no delta derivative")
    k = f._index(t)
    if k is None:
        raise DataError(f"no sample at t = {t!r}")
    if ts._right_dense(t):
        if k + 1 >= f.grid.size:
            raise DataError(f"no sample to the right of right-dense t = {t!r}")
        j = k + 1
    else:
        # left-dense maximum of a bounded scale
        if k == 0:
            raise DataError(f"no sample to the left of t = {t!r}")
        j = k - 1
    return (f.values[j] - f.values[k]) / (f.grid[j] - f.grid[k])


def delta_integral(f, ts: TimeScale, a: float, b: float, resolution=1e-3) -> float:
    """Delta integral of ``f`` over ``[a, b)`` on ``ts``.

    ``f`` is a :class:`SampledFunction` or a callable.  Right-scattered points
    contribute ``f(t) * mu(t)``; dense stretches use the trapezoidal rule, on
    the samples of ``f`` or on ``1/resolution`` cells for callables.
    """
    if a > b:
        raise DomainError(f"integration bounds out of order: a = {a} > b = {b}")
    sampled = isinstance(f, SampledFunction)
    total = 0.0
    for piece in ts.path(a, b):
        if piece[0] == "jump":
            _, t, mu, count = piece
            ts_ = t + mu * np.arange(count)
            vals = np.array([f(x) for x in ts_], dtype=float)
            total += float(np.sum(vals) * mu)
        else:
            _, lo, length = piece
            hi = lo + length
            if sampled:
                mask = (f.grid >= lo - _tol(lo)) & (f.grid <= hi + _tol(hi))
                xs, ys = f.grid[mask], f.values[mask]
                if xs.size < 2 or abs(xs[0] - lo) > _tol(lo) or abs(xs[-1] - hi) > _tol(hi):
                    raise DataError(f"dense stretch [{lo}, {hi}] is not sampled at its ends")
            else:
                cells = max(1, int(math.ceil(1.0 / resolution)))
                xs = lo + length * np.arange(cells + 1) / cells
                ys = np.array([f(x) for x in xs], dtype=float)
            total += float(np.trapezoid(ys, xs))
    return total


__all__ = [
    "Atom",
    "Continuous",
    "DenseInterval",
    "ExplicitAtoms",
    "Geometric",
    "IsolatedPoint",
    "JumpData",
    "PeriodicPattern",
    "SampledFunction",
    "TimeScale",
    "TimeScaleSpec",
    "UniformGrid",
    "delta_derivative",
    "delta_integral",
    "jump_data",
    "make_timescale",
    "reciprocal",
    "spec_from_json",
]
