"""Exit-criteria suite.

Each test prints a single ``[PASS]`` or ``[FAIL]`` line with the measured
figure, then asserts.  Run alone with ``pytest -m acceptance -s``.
"""

import math
import time

import numpy as np
import pytest
import scipy.linalg
import scipy.optimize

from tspositive.errors import NumericalError
from tspositive.linalg import spectral_abscissa, spectral_radius, spectrum
from tspositive.positivity import check_positive_system
from tspositive.simulate import decay_fit, simulate, transition_matrix
from tspositive.stability import coefficient_test, disc_membership
from tspositive.stabilize import Status, control_decomposition, positive_stabilize, verify_closed_loop
from tspositive.timescale import (
    Continuous,
    DenseInterval,
    ExplicitAtoms,
    IsolatedPoint,
    PeriodicPattern,
    UniformGrid,
    make_timescale,
)

pytestmark = pytest.mark.acceptance

PATTERNS = [
    ((IsolatedPoint(0), IsolatedPoint(0.4), DenseInterval(0.7, 1.5)), 2.0),
    ((DenseInterval(0, 1), IsolatedPoint(1.5)), 2.25),
    ((IsolatedPoint(0), DenseInterval(0.5, 1.0), IsolatedPoint(1.6), IsolatedPoint(2.0), DenseInterval(2.2, 3.0)), None),
]


def mixed_scales(repetitions=None):
    return [
        make_timescale(PeriodicPattern(atoms, period, repetitions) if period else ExplicitAtoms(atoms))
        for atoms, period in PATTERNS
    ]


MIXED_SCALES = mixed_scales()


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}: {detail}")
        return ok

    return emit


def random_metzler(rng, n, density=None):
    density = rng.uniform(0.2, 1.0) if density is None else density
    M = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < density)
    M[np.diag_indices(n)] = rng.uniform(-5, 1, n)
    return M


def test_shift_identity(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        M = random_metzler(rng, n)
        c = max(0.0, -float(np.min(np.diag(M))))
        eta = spectral_abscissa(M)
        for alpha in (c, c + 1, c + 10):
            worst = max(worst, abs(eta - (spectral_radius(M + alpha * np.eye(n)) - alpha)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 5
    report(1, "shift identity", ok, f"max error {worst:.3g} (tol 1e-8), {elapsed:.2f} s (limit 5 s)")
    assert ok


def random_positive_for(rng, ts):
    n = int(rng.integers(1, 7))
    A = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.6)
    if math.isinf(ts.gamma):
        A[np.diag_indices(n)] = -rng.uniform(0, 4, n)
    else:
        A[np.diag_indices(n)] = -rng.uniform(0, ts.gamma, n)
    return A


def test_coefficient_criterion_equivalence(report):
    rng = np.random.default_rng(2)
    scales = {
        "Continuous": make_timescale(Continuous((0, 10))),
        "UniformGrid(0.25)": make_timescale(UniformGrid(0.25, (0, 10))),
        "UniformGrid(1)": make_timescale(UniformGrid(1, (0, 10))),
    }
    start = time.perf_counter()
    lines, ok = [], True
    for name, ts in scales.items():
        agree = checked = skipped = 0
        while checked < 1000:
            A = random_positive_for(rng, ts)
            assert check_positive_system(A, None, ts).verdict
            margins = np.array([disc_membership(z, ts.gamma)[1] for z in spectrum(A)])
            if np.min(np.abs(margins)) < 1e-9:
                skipped += 1
                continue
            checked += 1
            agree += coefficient_test(A)[0] == bool(np.all(margins > 0))
        ok &= agree == checked
        lines.append(f"{name} {agree}/{checked} (band skips {skipped})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 20
    report(2, "coefficient test vs eigenvalue criterion", ok, "; ".join(lines) + f"; {elapsed:.2f} s (limit 20 s)")
    assert ok


def worst_gap_point(ts):
    pts = ts.points(dense_cells=1)
    mus = [ts.mu(t) for t in pts[:-1]]
    return float(pts[int(np.argmax(mus))])


def violation_probe(entry, A, B, ts):
    """Initial state, input and start time that expose one violating entry."""
    kind, i, j, _ = entry
    n, m = B.shape
    x0, u = np.zeros(n), np.zeros(m)
    if kind == "B":
        u[j] = 1.0
    else:
        x0[j] = 1.0
    t0 = worst_gap_point(ts) if kind == "A_T" else ts.start
    return t0, x0, u, i


def test_positivity_oracle(report):
    rng = np.random.default_rng(3)
    scales = [
        make_timescale(Continuous((0, 3))),
        make_timescale(UniformGrid(0.25, (0, 3))),
        make_timescale(UniformGrid(0.5, (0, 3))),
        make_timescale(UniformGrid(1.0, (0, 5))),
    ] + mixed_scales(2)
    start = time.perf_counter()
    counts = {"positive": 0, "violation": 0}
    failures = 0
    for trial in range(320):
        ts = scales[trial % len(scales)]
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 3))
        A = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.6)
        top = 1.3 * ts.gamma if math.isfinite(ts.gamma) else 5.0
        A[np.diag_indices(n)] = -rng.uniform(0, top, n)
        B = rng.uniform(0, 1, (n, m))
        if rng.random() < 0.25:
            A[rng.integers(n), rng.integers(n)] -= rng.uniform(0.01, 1)
        if rng.random() < 0.25:
            B[rng.integers(n), rng.integers(m)] = -rng.uniform(0.01, 1)
        rep = check_positive_system(A, B, ts)
        if rep.verdict:
            counts["positive"] += 1
            table = rng.uniform(0, 1, (64, m))
            u = lambda t, table=table: table[int(t * 7) % 64]  # noqa: E731
            for _ in range(3):
                traj = simulate(A, B, ts, rng.uniform(0, 1, n), u=u, dense_cells=16)
                failures += traj.states.min() < -1e-9
        else:
            counts["violation"] += 1
            found = False
            for entry in rep.violating_entries:
                t0, x0, u, i = violation_probe(entry, A, B, ts)
                t1 = t0 + ts.mu(t0) if ts.mu(t0) > 0 else t0 + 1e-6
                x1 = simulate(A, B, ts, x0, u=u, t0=t0, t_end=t1, dense_cells=1).states[1]
                found |= x1[i] < 0
            failures += not found
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 20
    report(3, "positivity certificate vs simulation", ok,
           f"{counts['positive']} positive, {counts['violation']} violating, {failures} mismatches; {elapsed:.2f} s (limit 20 s)")
    assert ok


def test_euler_step_bound(report):
    rng = np.random.default_rng(4)
    mismatches = boundary_ok = 0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        A = random_metzler(rng, n)
        A[0, 0] = -rng.uniform(0.1, 6)
        c = max(0.0, -float(np.min(np.diag(A))))
        for factor in (0.9, 1.0, 1.1):
            h = factor * (1 / c)
            verdict = check_positive_system(A, None, make_timescale(UniformGrid(h, (0, 10 * h)))).verdict
            mismatches += verdict != (h <= 1 / c)
            boundary_ok += factor == 1.0 and verdict
    ok = mismatches == 0 and boundary_ok == 100
    report(4, "grid positivity iff h <= 1/c(A)", ok, f"{mismatches} mismatches in 300, boundary passes {boundary_ok}/100")
    assert ok


def test_stabilization_soundness(report):
    rng = np.random.default_rng(5)
    scales = [
        make_timescale(Continuous((0, 10))),
        make_timescale(UniformGrid(0.25, (0, 10))),
        make_timescale(UniformGrid(1, (0, 10))),
    ] + MIXED_SCALES[:2]
    start = time.perf_counter()
    tally = {s: 0 for s in Status}
    numerical = unsound = 0
    for trial in range(520):
        ts = scales[trial % len(scales)]
        n = int(rng.integers(1, 7))
        A = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.6)
        A[np.diag_indices(n)] = rng.uniform(-min(ts.gamma, 3.0), 1.0, n)
        b = rng.uniform(0, 1, n) * (rng.random(n) < 0.6)
        if not b.any():
            b[rng.integers(n)] = 1.0
        try:
            res = positive_stabilize(A, b, ts)
        except NumericalError:
            numerical += 1
            continue
        tally[res.status] += 1
        if res.status is Status.FEASIBLE:
            rep = verify_closed_loop(A, b, res.K, ts)
            good = (
                rep.positivity.verdict
                and rep.coefficients_positive
                and rep.factorization_error <= 1e-8
                and rep.decay is not None
                and rep.decay.alpha_hat > 0
            )
            unsound += not good
    R = make_timescale(Continuous((0, 10)))
    Z = make_timescale(UniformGrid(1, (0, 10)))
    b = np.array([0.0, 1.0])
    ex1 = positive_stabilize(np.array([[-1.0, 1.0], [1.0, -1.0]]), b, R).status is Status.FEASIBLE
    ex2 = positive_stabilize(np.array([[0.0, 1.0], [0.0, 0.0]]), b, Z).status is Status.INFEASIBLE
    elapsed = time.perf_counter() - start
    ok = unsound == 0 and ex1 and ex2 and tally[Status.FEASIBLE] > 0
    detail = ", ".join(f"{s.value} {c}" for s, c in tally.items())
    report(5, "stabilization soundness", ok,
           f"{detail}, NumericalError {numerical}; unsound {unsound}; worked examples {ex1 and ex2}; {elapsed:.2f} s")
    assert ok


def brute_force_transition(A, ts, t0, t1, dense_cells=16):
    n = A.shape[0]
    Phi = np.eye(n)
    pts = ts.points(t0, t1, dense_cells=dense_cells)
    for a, b in zip(pts, pts[1:]):
        mu = ts.mu(a)
        step = np.eye(n) + mu * A if mu > 0 else scipy.linalg.expm((b - a) * A)
        Phi = step @ Phi
    return Phi


def test_transition_matrix_oracle(report):
    rng = np.random.default_rng(6)
    grid_err = mixed_err = semi_err = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        h = float(rng.choice([0.1, 0.25, 0.5, 1.0]))
        A = rng.normal(size=(n, n))
        A *= 0.9 / max(1e-12, h * np.linalg.norm(A, 2))
        A -= np.eye(n) / h * rng.uniform(0, 0.5)
        ts = make_timescale(UniformGrid(h, (0, 40 * h)))
        steps = int(rng.integers(0, 41))
        P = np.eye(n)
        for _ in range(steps):
            P = (np.eye(n) + h * A) @ P
        got = transition_matrix(A, ts, 0, steps * h)
        grid_err = max(grid_err, float(np.abs(got - P).max() / max(1.0, np.abs(P).max())))
    mixed = mixed_scales(3)
    for trial in range(100):
        ts = mixed[trial % len(mixed)]
        n = int(rng.integers(1, 5))
        A = rng.normal(size=(n, n))
        pts = ts.points(dense_cells=16)
        t0, t1 = sorted(rng.choice(pts, 2))
        ref = brute_force_transition(A, ts, t0, t1)
        got = transition_matrix(A, ts, t0, t1)
        mixed_err = max(mixed_err, float(np.abs(got - ref).max() / max(1.0, np.abs(ref).max())))
    for trial in range(200):
        ts = mixed[trial % len(mixed)]
        A = rng.normal(size=(3, 3))
        t0, t1, t2 = sorted(rng.choice(ts.points(dense_cells=8), 3))
        lhs = transition_matrix(A, ts, t0, t2)
        rhs = transition_matrix(A, ts, t1, t2) @ transition_matrix(A, ts, t0, t1)
        semi_err = max(semi_err, float(np.abs(lhs - rhs).max() / max(1.0, np.abs(lhs).max())))
    ok = grid_err <= 1e-12 and mixed_err <= 1e-10 and semi_err <= 1e-10
    report(6, "transition matrix oracle", ok,
           f"grid power {grid_err:.3g} (tol 1e-12), ordered product {mixed_err:.3g} (tol 1e-10), semigroup {semi_err:.3g} (tol 1e-10)")
    assert ok


def controllable_pair(rng):
    # well-conditioned draws: Krylov matrix condition at most 1e4
    while True:
        n = int(rng.integers(1, 7))
        A = rng.normal(size=(n, n)) / math.sqrt(n)
        b = rng.normal(size=n)
        C = np.column_stack([np.linalg.matrix_power(A, j) @ b for j in range(n)])
        if np.linalg.cond(C) <= 1e4:
            return A, b


def uncontrollable_pair(rng):
    while True:
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n))
        M = rng.normal(size=(n, n)) / math.sqrt(n)
        M[k:, :k] = 0.0
        b = np.zeros(n)
        b[:k] = rng.normal(size=k)
        Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
        C = np.column_stack([np.linalg.matrix_power(M[:k, :k], j) @ b[:k] for j in range(k)])
        # a near-singular controllable block makes A^j b tiny and the rank ambiguous
        if np.linalg.cond(C) <= 1e4 and np.min(np.abs(np.linalg.eigvals(M[:k, :k]))) >= 0.1:
            return Q @ M @ Q.T, Q @ b, k


def off_pattern(At, k):
    """Largest deviation from the companion rows and the zero lower-left block."""
    n = At.shape[0]
    mask = np.zeros((n, n), dtype=bool)
    mask[: k - 1, :k] = True
    mask[k:, :k] = True
    ideal = np.zeros((n, n))
    ideal[np.arange(k - 1), np.arange(1, k)] = 1.0
    return float(np.max(np.abs(At - ideal)[mask], initial=0.0))


def test_decomposition_structure(report):
    rng = np.random.default_rng(7)
    pattern = basis = 0.0
    for _ in range(200):
        A, b = controllable_pair(rng)
        dec = control_decomposition(A, b)
        assert dec.k == A.shape[0]
        At = np.linalg.solve(dec.T, A @ dec.T)
        bt = np.linalg.solve(dec.T, b)
        e = np.zeros(A.shape[0])
        e[dec.k - 1] = 1.0
        pattern = max(pattern, off_pattern(At, dec.k))
        basis = max(basis, float(np.abs(bt - e).max()))
    spread = 0.0
    for _ in range(200):
        A, b, k = uncontrollable_pair(rng)
        fwd = control_decomposition(A, b, "forward")
        rev = control_decomposition(A, b, "reverse")
        assert fwd.k == rev.k == k
        pattern = max(pattern, off_pattern(np.linalg.solve(fwd.T, A @ fwd.T), k))
        zf, zr = np.sort_complex(spectrum(fwd.A22)), np.sort_complex(spectrum(rev.A22))
        cost = np.abs(np.subtract.outer(zf, zr))
        r, c = scipy.optimize.linear_sum_assignment(cost)
        spread = max(spread, float(cost[r, c].max()))
    ok = pattern <= 1e-10 and basis <= 1e-12 and spread <= 1e-8
    report(7, "decomposition structure", ok,
           f"off-pattern {pattern:.3g} (tol 1e-10), T^-1 b - e_k {basis:.3g} (tol 1e-12), A22 spectrum change {spread:.3g} (tol 1e-8)")
    assert ok


def stable_positive_system(rng, ts):
    n = int(rng.integers(1, 6))
    if math.isinf(ts.gamma):
        M = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.7)
        M[np.diag_indices(n)] = -rng.uniform(0, 2, n)
        return M - (spectral_abscissa(M) + rng.uniform(0.2, 2.0)) * np.eye(n)
    h = 1 / ts.gamma
    N = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.7) + np.diag(rng.uniform(0, 1, n))
    N *= rng.uniform(0.3, 0.9) / max(spectral_radius(N), 1e-12)
    return (N - np.eye(n)) / h


def test_decay_from_nonnegative_states(report):
    rng = np.random.default_rng(8)
    scales = [make_timescale(Continuous((0, 10))), make_timescale(UniformGrid(0.5, (0, 10))), make_timescale(UniformGrid(1, (0, 10)))]
    worst = 0.0
    for trial in range(100):
        ts = scales[trial % len(scales)]
        A = stable_positive_system(rng, ts)
        n = A.shape[0]
        lam = spectrum(A)
        if math.isinf(ts.gamma):
            rate = -float(np.max(lam.real))
        else:
            rate = -math.log(float(np.max(np.abs(1 + lam / ts.gamma)))) * ts.gamma
        # near-degenerate modes leave a slope error of order 1/T, so the window
        # must be long; rate * T <= 500 keeps the norms clear of underflow
        horizon = min(max(30 / rate, 100.0), 500 / rate)
        if math.isfinite(ts.gamma):
            horizon = math.ceil(horizon * ts.gamma) / ts.gamma
        run = ts.extended(horizon)
        fits = {"nonneg": [], "mixed": []}
        for group in fits:
            for _ in range(20):
                if group == "nonneg":
                    x0 = rng.uniform(0, 1, n)
                else:
                    x0 = rng.normal(size=n)
                    if n > 1:
                        x0[0], x0[1] = abs(x0[0]), -abs(x0[1])
                traj = simulate(A, None, run, x0, t_end=run.start + horizon, dense_cells=256)
                fits[group].append(decay_fit(traj.window(run.start + horizon / 3)).alpha_hat)
        worst = max(worst, abs(min(fits["nonneg"]) - min(fits["mixed"])))
    ok = worst <= 0.05
    report(8, "decay rate from nonnegative vs sign-mixed states", ok, f"max alpha_hat gap {worst:.3g} (tol 0.05)")
    assert ok
