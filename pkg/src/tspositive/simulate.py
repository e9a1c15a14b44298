"""Forward simulation on time scales and exponential-decay fitting.

Right-scattered points advance by ``x + mu (A x + B u)``.  Dense stretches are
split into equal cells and advanced exactly with the block exponential of
``[[A, B], [0, 0]]`` for an input held constant on each cell, so the only
error is rounding.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError, DomainError
from .linalg import as_matrix, expm, spectrum
from .timescale import TimeScale


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (N, n)
    inputs: np.ndarray  # (N, m); the last row is never applied

    def norms(self):
        return np.linalg.norm(self.states, axis=1)

    def window(self, t_lo, t_hi=math.inf):
        keep = (self.times >= t_lo) & (self.times <= t_hi)
        return Trajectory(self.times[keep], self.states[keep], self.inputs[keep])

    def to_csv(self, fh=None):
        """Write ``t,x1..xn,u1..um`` rows with 17 significant digits."""
        own = fh is None
        fh = io.StringIO() if own else fh
        n, m = self.states.shape[1], self.inputs.shape[1]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)])
        for t, x, u in zip(self.times, self.states, self.inputs):
            w.writerow([f"{v:.17g}" for v in (t, *x, *u)])
        return fh.getvalue() if own else None


@dataclass(frozen=True)
class DecayFit:
    K_hat: float
    alpha_hat: float
    residual: float
    samples: int = 0

    def bound(self, t_rel):
        return self.K_hat * np.exp(-self.alpha_hat * np.asarray(t_rel))

    def to_json(self):
        from .serialize import ext_real

        return {
            "K_hat": ext_real(self.K_hat),
            "alpha_hat": ext_real(self.alpha_hat),
            "residual": self.residual,
            "samples": self.samples,
        }


# ----------------------------------------------------------------------------
# transition matrix
# ----------------------------------------------------------------------------


def transition_matrix(A, ts: TimeScale, t0, t) -> np.ndarray:
    """``e_A(t, t0)``: ordered product of ``I + mu A`` jumps and dense exponentials."""
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    eye = np.eye(n)
    Phi = eye.copy()
    for piece in ts.path(t0, t):
        if piece[0] == "jump":
            _, _, mu, count = piece
            Phi = np.linalg.matrix_power(eye + mu * A, count) @ Phi
        else:
            Phi = expm(A, piece[2]) @ Phi
    return Phi


# ----------------------------------------------------------------------------
# simulation
# ----------------------------------------------------------------------------


def _input_fn(u, m) -> Callable:
    if u is None:
        zero = np.zeros(m)
        return lambda t: zero
    if callable(u):
        def fn(t):
            v = np.atleast_1d(np.asarray(u(t), dtype=float))
            if v.shape != (m,):
                raise DomainError(f"input signal must return {m} values, got shape {v.shape}")
            return v
        return fn
    v = np.atleast_1d(np.asarray(u, dtype=float))
    if v.shape != (m,):
        raise DomainError(f"constant input must have {m} entries, got shape {v.shape}")
    return lambda t: v


def _zoh(A, B, dt):
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M, dt)
    return E[:n, :n], E[:n, n:]


def simulate(A, B, ts: TimeScale, x0, u=None, t0=None, t_end=None, dense_cells=32) -> Trajectory:
    """Trajectory of ``x^Delta = A x + B u`` from ``x(t0) = x0``.

    ``u`` is None (zero), a constant vector or a callable ``u(t)``; it is
    held constant on each grid cell, evaluated at the cell's left end.
    States are reported at every isolated point and at ``dense_cells``
    equal subdivisions of every dense stretch.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    if B is None:
        B = np.zeros((n, 0))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.shape[0] != n:
        raise DomainError(f"B must have {n} rows, got shape {B.shape}")
    m = B.shape[1]
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (n,):
        raise DomainError(f"x0 must have {n} entries, got {x.size}")
    ufn = _input_fn(u, m)
    t0 = ts.start if t0 is None else float(t0)
    if t_end is None:
        if not math.isfinite(ts.end):
            raise DomainError("t_end is required on an unbounded time scale")
        t_end = ts.end
    eye = np.eye(n)
    times, states, inputs = [t0], [x.copy()], []
    for piece in ts.path(t0, t_end):
        if piece[0] == "jump":
            _, t, mu, count = piece
            S = eye + mu * A
            G = mu * B
            for i in range(count):
                ti = t + i * mu
                ui = ufn(ti)
                x = S @ x + G @ ui
                inputs.append(ui)
                times.append(t + (i + 1) * mu)
                states.append(x.copy())
        else:
            _, t, length = piece
            dt = length / dense_cells
            Phi, Gam = _zoh(A, B, dt)
            for i in range(dense_cells):
                ui = ufn(t + i * dt)
                x = Phi @ x + Gam @ ui
                inputs.append(ui)
                times.append(t + (i + 1) * dt if i + 1 < dense_cells else t + length)
                states.append(x.copy())
    inputs.append(ufn(times[-1]))
    return Trajectory(np.array(times), np.array(states), np.array(inputs).reshape(len(times), m))


def simulate_feedback(A, b, K, ts: TimeScale, x0, t0=None, t_end=None, dense_cells=32) -> Trajectory:
    """Closed loop ``x^Delta = (A + b K) x``; ``inputs`` records ``u = K x``."""
    A = as_matrix(A, "A", square=True)
    b = np.asarray(b, dtype=float).reshape(A.shape[0], -1)
    K = np.asarray(K, dtype=float).reshape(b.shape[1], A.shape[0])
    traj = simulate(A + b @ K, None, ts, x0, t0=t0, t_end=t_end, dense_cells=dense_cells)
    return Trajectory(traj.times, traj.states, traj.states @ K.T)


# ----------------------------------------------------------------------------
# decay fitting
# ----------------------------------------------------------------------------


def fit_decay(times, norms) -> DecayFit:
    """Fit ``norms[k] <= K exp(-alpha (t_k - t_0)) norms[0]``.

    ``alpha`` is minus the least-squares slope of ``log norm``; ``K`` is then
    the smallest constant >= 1 covering every sample.  ``residual`` is the
    largest log-excess of the samples over the bound, so it is <= 0.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    bad = np.flatnonzero(~(norms > 0) | ~np.isfinite(norms))
    if bad.size:
        times, norms = times[: bad[0]], norms[: bad[0]]
    if times.size < 3:
        raise DataError("decay fit needs at least 3 samples with nonzero norm")
    tr = times - times[0]
    y = np.log(norms / norms[0])
    slope = np.polyfit(tr, y, 1)[0]
    alpha = -float(slope)
    log_ratio = y + alpha * tr
    K = max(1.0, float(np.exp(np.max(log_ratio))))
    return DecayFit(K, alpha, float(np.max(log_ratio) - math.log(K)), int(times.size))


def decay_fit(traj: Trajectory) -> DecayFit:
    return fit_decay(traj.times, traj.norms())


def _asymptotic_rate(A, ts: TimeScale, cell=None, monodromy=None):
    lam = spectrum(A)
    if monodromy is not None:
        r = float(np.max(np.abs(np.linalg.eigvals(monodromy))))
        return math.inf if r == 0 else -math.log(r) / cell
    if ts.is_continuum:
        return -float(np.max(lam.real))
    if cell is not None:
        r = float(np.max(np.abs(1.0 + cell * lam)))
        return math.inf if r == 0 else -math.log(r) / cell
    return -float(np.max(lam.real))


def transition_norms(A, ts: TimeScale, t0=None, horizon=None, samples=64):
    """Sample ``||e_A(t, t0)||`` (spectral norm) over a horizon.

    Continuous, uniform and unbounded or bounded periodic scales are
    extended as far as needed; the default horizon covers roughly 25
    e-foldings of the asymptotic decay rate.  Other scales use their stored
    horizon.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    t0 = ts.start if t0 is None else float(t0)
    if ts.kind == "uniform":
        cell = ts.pattern[0].step
        step = np.eye(n) + cell * A
        rate = _asymptotic_rate(A, ts, cell=cell)
    elif ts.period is not None:
        cell = ts.period
        two = TimeScale(ts.pattern, ts.period, None, ts.kind)
        step = transition_matrix(A, two, t0, t0 + cell)
        rate = _asymptotic_rate(A, ts, cell=cell, monodromy=step)
    elif ts.kind == "continuous":
        cell, step = None, None
        rate = _asymptotic_rate(A, ts)
    else:
        pts = ts.points(t0, ts.end, dense_cells=8)
        if horizon is not None:
            pts = pts[pts <= t0 + horizon + 1e-12]
        Phi = np.eye(n)
        out = [1.0]
        for a, b in zip(pts, pts[1:]):
            Phi = transition_matrix(A, ts, a, b) @ Phi
            out.append(np.linalg.norm(Phi, 2))
        return pts, np.array(out)

    if horizon is None:
        unit = cell if cell is not None else 1.0
        if not math.isfinite(rate):
            horizon = 4 * n * unit
        elif rate > 1e-12:
            horizon = max(25.0 / rate, 10 * unit)
        else:
            horizon = 200 * unit
    if cell is None:
        dt = horizon / samples
        E = expm(A, dt)
        Phi = np.eye(n)
        times, norms = [t0], [1.0]
        for k in range(1, samples + 1):
            Phi = E @ Phi
            times.append(t0 + k * dt)
            norms.append(np.linalg.norm(Phi, 2))
        return np.array(times), np.array(norms)
    total = max(1, int(math.ceil(horizon / cell)))
    idx = np.unique(np.round(np.linspace(0, total, samples + 1)).astype(np.int64))
    if not math.isfinite(rate) or total < 3 * samples:
        idx = np.arange(min(total, 3 * samples) + 1)
    Phi = np.eye(n)
    times, norms = [t0], [1.0]
    for prev, k in zip(idx, idx[1:]):
        Phi = np.linalg.matrix_power(step, int(k - prev)) @ Phi
        times.append(t0 + k * cell)
        norms.append(np.linalg.norm(Phi, 2))
    return np.array(times), np.array(norms)


def transition_decay(A, ts: TimeScale, t0=None, horizon=None, samples=64) -> DecayFit:
    """Decay fit of ``||e_A(t, t0)||``.

    A transition matrix that becomes exactly zero (nilpotent jump factors)
    decays faster than any exponential and reports ``alpha_hat = inf``.
    """
    times, norms = transition_norms(A, ts, t0, horizon, samples)
    positive = int(np.argmax(~(norms > 0))) if np.any(~(norms > 0)) else norms.size
    if positive < norms.size and positive < 3:
        return DecayFit(max(1.0, float(np.max(norms))), math.inf, 0.0, positive)
    return fit_decay(times, norms)


__all__ = [
    "DecayFit",
    "Trajectory",
    "decay_fit",
    "fit_decay",
    "simulate",
    "simulate_feedback",
    "transition_decay",
    "transition_matrix",
    "transition_norms",
]
