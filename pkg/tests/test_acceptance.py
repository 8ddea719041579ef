"""
Acceptance criteria, one test each. Every test records a PASS/FAIL line that
is printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

import holodescent.vonmises as vm
from holodescent import (
    ConstraintSet,
    IntegratorConfig,
    PenaltyConfig,
    StateVector,
    SufficientStats,
    VmParams,
    affine_inequality,
    armijo_backtrack,
    ball_inequality,
    chgd_minimize,
    exact_penalty,
    gradient,
    hessian,
    hgd_minimize,
    linearized_penalty,
    mle_direct_newton,
    propagate,
    sufficient_stats,
    vm_initial_state,
    vm_pfaffian_system,
    vm_sample,
)
from holodescent.cli import BenchSpec, bench
from holodescent.vonmises import bessel_i0_series, bessel_i1_series

from conftest import annulus_points, annulus_segments, quadratic_system, record_acceptance

X0 = np.array([-2.0, 0.1])
TRUE_THETA = VmParams.polar(5.0, math.pi / 4).theta
ZERO = SufficientStats(0.0, 0.0)


def series_F(theta):
    k = float(np.linalg.norm(theta))
    return [2 * math.pi * bessel_i0_series(k), 2 * math.pi * bessel_i1_series(k)]


def hgd_fit(stats, x0=X0):
    system = vm_pfaffian_system(stats)
    s0 = vm_initial_state(x0, stats)
    return hgd_minimize(system, s0.point, s0.F)


def chgd_fit(stats, cons, x0=X0, pcfg=None):
    system = vm_pfaffian_system(stats)
    s0 = vm_initial_state(x0, stats)
    return chgd_minimize(system, s0.point, s0.F, cons, pcfg=pcfg)


def angle(x):
    return math.atan2(x[1], x[0])


def angle_gap(a, b):
    return abs(math.remainder(a - b, 2 * math.pi))


def fd_gradient(fun, x, h=1e-5):
    e = np.eye(x.size) * h
    return np.array([(fun(x + e[i]) - fun(x - e[i])) / (2 * h) for i in range(x.size)])


def fd_hessian(fun, x, h=1e-3):
    e = np.eye(x.size) * h
    n = x.size
    return np.array([
        [(fun(x + e[i] + e[j]) - fun(x + e[i] - e[j]) - fun(x - e[i] + e[j])
          + fun(x - e[i] - e[j])) / (4 * h * h) for j in range(n)]
        for i in range(n)
    ])


def test_criterion_1_propagation_matches_bessel_oracle():
    system = vm_pfaffian_system(ZERO)
    segments = annulus_segments(np.random.default_rng(101), 50)
    propagate(system, StateVector([1.0, 0.0], series_F([1.0, 0.0])), [1.1, 0.0])  # load kernels
    worst = 0.0
    t0 = time.perf_counter()
    for a, b in segments:
        out = propagate(system, StateVector(a, series_F(a)), b)
        exact = 2 * math.pi * bessel_i0_series(float(np.linalg.norm(b)))
        worst = max(worst, abs(out.F[0] - exact) / exact)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 1.0
    record_acceptance(1, ok, f"max rel err {worst:.2e} (tol 1e-6), {elapsed:.3f} s for 50 segments")
    assert ok


def test_criterion_2_derivatives_match_finite_differences(vm_stats, vm_system):
    f = lambda x: vm.vm_objective_oracle(x, vm_stats)
    worst_g = worst_h = 0.0
    for x in annulus_points(np.random.default_rng(202), 50):
        s = vm_initial_state(x, vm_stats)
        g_ref, H_ref = fd_gradient(f, x), fd_hessian(f, x)
        worst_g = max(worst_g, np.linalg.norm(gradient(vm_system, s) - g_ref) / np.linalg.norm(g_ref))
        worst_h = max(worst_h, np.linalg.norm(hessian(vm_system, s) - H_ref) / np.linalg.norm(H_ref))
    ok = worst_g <= 1e-5 and worst_h <= 1e-4
    record_acceptance(2, ok, f"gradient rel err {worst_g:.2e} (tol 1e-5), "
                             f"Hessian rel err {worst_h:.2e} (tol 1e-4)")
    assert ok


def test_criterion_3_rk4_order():
    system = vm_pfaffian_system(ZERO)
    a, b = np.array([1.0, 0.2]), np.array([2.5, 1.5])
    exact = series_F(b)[0]
    errors = []
    for spu in (5, 10, 20, 40, 80):
        cfg = IntegratorConfig(substeps_per_unit=spu, min_substeps=1)
        errors.append(abs(propagate(system, StateVector(a, series_F(a)), b, cfg).F[0] - exact))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    ok = all(12.0 <= r <= 20.0 for r in ratios)
    record_acceptance(3, ok, "error ratios per doubling " + ", ".join(f"{r:.2f}" for r in ratios)
                      + " (target 16 +/- 4)")
    assert ok


def test_criterion_4_mle_agreement(vm_stats):
    hgd = hgd_fit(vm_stats)
    newton = mle_direct_newton(vm_stats, X0)
    gap = float(np.max(np.abs(hgd.x - newton.x)))

    data = vm_sample(5.0, math.pi / 4, 10_000, seed=4040)
    big = sufficient_stats(data)
    est_hgd = hgd_fit(big).x
    est_newton = mle_direct_newton(big, X0).x
    rng = np.random.default_rng(4041)
    boot = []
    for _ in range(200):
        sample = rng.choice(data.angles, size=data.n, replace=True)
        boot.append(hgd_fit(sufficient_stats(sample)).x)
    se = np.std(boot, axis=0, ddof=1)
    z_hgd = np.abs(est_hgd - TRUE_THETA) / se
    z_newton = np.abs(est_newton - TRUE_THETA) / se

    ok = (hgd.converged and newton.converged and gap <= 1e-4
          and np.all(z_hgd <= 3) and np.all(z_newton <= 3))
    record_acceptance(
        4, ok,
        f"n=100: HGD {np.round(hgd.x, 6)} vs Newton {np.round(newton.x, 6)}, max gap {gap:.1e} "
        f"(tol 1e-4); n=1e4: HGD {np.round(est_hgd, 4)}, bootstrap SE {np.round(se, 4)}, "
        f"|z| HGD {np.round(z_hgd, 2)} Newton {np.round(z_newton, 2)} (tol 3)",
    )
    assert ok


def test_criterion_5_disk_constraint():
    cons = ConstraintSet([ball_inequality(3.0)])
    norms, gaps, failures = [], [], []
    for seed in range(20):
        stats = sufficient_stats(vm_sample(5.0, math.pi / 4, 100, seed=seed))
        free = hgd_fit(stats)
        res = chgd_fit(stats, cons)
        r = float(np.linalg.norm(res.x))
        gap = angle_gap(angle(res.x), angle(free.x))
        norms.append(r)
        gaps.append(gap)
        if not (cons.is_feasible(res.x, tol=1e-6) and 2.95 <= r <= 3.0 + 1e-6 and gap <= 0.05):
            failures.append((seed, r, gap, res.status.value))
    ok = not failures
    record_acceptance(
        5, ok,
        f"20 seeds: |theta*| in [{min(norms):.6f}, {max(norms):.10f}] (target [2.95, 3+1e-6]), "
        f"max angle gap {max(gaps):.3f} rad (tol 0.05)"
        + (f"; failures {failures}" if failures else ""),
    )
    assert ok


def test_criterion_6_interior_optimum_is_unchanged():
    cons = ConstraintSet([ball_inequality(10.0)])
    truth = VmParams.natural(2.12, 2.12)
    worst = 0.0
    for seed in range(20):
        stats = sufficient_stats(vm_sample(truth.kappa, truth.mu, 100, seed=600 + seed))
        free, con = hgd_fit(stats), chgd_fit(stats, cons)
        worst = max(worst, float(np.max(np.abs(free.x - con.x))))
    ok = worst <= 1e-3
    record_acceptance(6, ok, f"20 seeds: max |CHGD - HGD| {worst:.1e} (tol 1e-3)")
    assert ok


def test_criterion_7_benchmark():
    t0 = time.perf_counter()
    _, table = bench(BenchSpec(trials=200, seed=7))
    elapsed = time.perf_counter() - t0
    means = {m: np.array([row["mean_theta1"], row["mean_theta2"]]) for m, row in table.items()}
    spread = max(float(np.max(np.abs(means[a] - means[b]))) for a in means for b in means)
    times = {m: row["mean_seconds"] for m, row in table.items()}
    failures = sum(row["failures"] for row in table.values())
    ok = times["hgd"] < times["newton"] and spread <= 5e-3 and failures == 0 and elapsed < 120
    record_acceptance(
        7, ok,
        "200 paired trials: mean time "
        + ", ".join(f"{m} {t * 1e3:.2f} ms" for m, t in times.items())
        + f"; max estimate spread {spread:.1e} (tol 5e-3); {failures} failed fits; {elapsed:.1f} s",
    )
    assert ok


def test_criterion_8_penalty_and_armijo_properties():
    rng = np.random.default_rng(808)
    cons = ConstraintSet(
        inequalities=[ball_inequality(3.0), affine_inequality([1.0, -1.0], -0.5)],
        equalities=[affine_inequality([0.2, 1.0], 0.1)],
    )
    feasible_only = ConstraintSet(inequalities=list(cons.inequalities))

    # exact penalty equals f on the feasible set, for every rho
    identity = True
    for _ in range(200):
        x = rng.uniform(-3, 3, 2)
        if feasible_only.is_feasible(x):
            for rho in (1e-3, 1.0, 10.0, 1e6):
                f = rng.normal()
                identity &= exact_penalty(f, x, feasible_only, rho) == f

    # the linearized model at d = 0 is the penalty itself
    worst_zero = 0.0
    for _ in range(200):
        x, g = rng.normal(size=2) * 3, rng.normal(size=2)
        f = rng.normal()
        worst_zero = max(worst_zero, abs(linearized_penalty(f, g, x, np.zeros(2), cons, 10.0)
                                         - exact_penalty(f, x, cons, 10.0)))

    # Armijo never increases P along CHGD traces
    worst_rise = -math.inf
    for seed in range(10):
        stats = sufficient_stats(vm_sample(5.0, math.pi / 4, 100, seed=seed))
        for c, x0 in ((ball_inequality(3.0), X0), (affine_inequality([-1.0, 1.0]), X0),
                      (ball_inequality(10.0), np.array([-8.0, -8.0]))):
            P = chgd_fit(stats, ConstraintSet([c]), x0=x0).trace.penalties
            rise = np.diff(P) / np.maximum(1.0, np.abs(P[:-1]))
            worst_rise = max(worst_rise, float(rise.max(initial=-math.inf)))

    # full Newton step accepted on convex quadratics
    full_steps = True
    worst_landing = 0.0
    for _ in range(50):
        M = rng.normal(size=(3, 3))
        A = M @ M.T + 3 * np.eye(3)
        b = rng.normal(size=3)
        system, state = quadratic_system(A, b)
        x = rng.normal(size=3) * 5
        d = -np.linalg.solve(A, A @ x + b)
        alpha, new = armijo_backtrack(system, StateVector(x, state(x)), d, ConstraintSet(),
                                      PenaltyConfig())
        full_steps &= alpha == 1.0
        worst_landing = max(worst_landing, float(np.max(np.abs(new.point + np.linalg.solve(A, b)))))

    ok = identity and worst_zero <= 1e-12 and worst_rise <= 1e-12 and full_steps and worst_landing <= 1e-12
    record_acceptance(
        8, ok,
        f"penalty identity {'exact' if identity else 'broken'}; |P_l(0) - P| {worst_zero:.1e}; "
        f"max relative P increase on traces {worst_rise:.1e}; "
        f"full steps on quadratics {'all' if full_steps else 'not all'} (landing err {worst_landing:.1e})",
    )
    assert ok


def test_criterion_9_objective_evaluated_once(vm_stats, monkeypatch):
    calls = {"f": 0, "df": 0, "direct": 0}

    def counted(name, fn):
        def wrapper(*a, **kw):
            calls[name] += 1
            return fn(*a, **kw)
        return wrapper

    monkeypatch.setattr(vm, "vm_objective_oracle", counted("f", vm.vm_objective_oracle))
    monkeypatch.setattr(vm, "vm_kappa_derivative_oracle",
                        counted("df", vm.vm_kappa_derivative_oracle))
    monkeypatch.setattr(vm, "_direct_derivatives", counted("direct", vm._direct_derivatives))

    counts = []
    runs = [
        ("hgd", lambda: hgd_fit(vm_stats)),
        ("chgd disk 3", lambda: chgd_fit(vm_stats, ConstraintSet([ball_inequality(3.0)]))),
        ("chgd linear", lambda: chgd_fit(vm_stats, ConstraintSet([affine_inequality([-1.0, 1.0])]))),
        ("chgd disk 10", lambda: chgd_fit(vm_stats, ConstraintSet([ball_inequality(10.0)]),
                                          x0=np.array([-8.0, -8.0]))),
    ]
    for label, run in runs:
        for key in calls:
            calls[key] = 0
        res = run()
        counts.append((label, calls["f"], calls["df"], calls["direct"], res.iterations))
    ok = all(f == 1 and df == 1 and direct == 0 and it > 0 for _, f, df, direct, it in counts)
    record_acceptance(
        9, ok,
        "objective evaluations per run: "
        + ", ".join(f"{label} {f} ({it} iterations)" for label, f, _, _, it in counts),
    )
    assert ok
