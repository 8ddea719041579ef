import math

import numpy as np
import pytest

from holodescent import PfaffianSystem, sufficient_stats, vm_pfaffian_system, vm_sample

ACCEPTANCE_LINES = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def quadratic_system(A, b, c=0.0):
    """
    Pfaffian system for f(x) = x^T A x / 2 + b^T x + c.

    Basis F = (f, df/dx_1, ..., df/dx_n, 1); all matrices are constant.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    t = n + 2
    P = np.zeros((n, t, t))
    for i in range(n):
        P[i, 0, 1 + i] = 1.0
        for j in range(n):
            P[i, 1 + j, t - 1] = A[j, i]

    def matrices(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(P, x.shape[:-1] + P.shape).copy()

    def state(x):
        x = np.asarray(x, dtype=float)
        f = 0.5 * x @ A @ x + np.asarray(b) @ x + c
        return np.concatenate([[f], A @ x + b, [1.0]])

    system = PfaffianSystem(dim=n, rank=t, matrices=matrices,
                            matrix_derivatives=lambda x: np.zeros((n, n, t, t)))
    return system, state


@pytest.fixture(scope="session")
def vm_data():
    """The canonical simulated sample: n = 100 draws at (kappa, mu) = (5, pi/4)."""
    return vm_sample(5.0, math.pi / 4, 100, seed=2013)


@pytest.fixture(scope="session")
def vm_stats(vm_data):
    return sufficient_stats(vm_data)


@pytest.fixture(scope="session")
def vm_system(vm_stats):
    return vm_pfaffian_system(vm_stats)


def annulus_points(rng, count, r_min=0.5, r_max=8.0):
    r = rng.uniform(r_min, r_max, count)
    phi = rng.uniform(0, 2 * math.pi, count)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def annulus_segments(rng, count, r_min=0.5, r_max=8.0):
    """Random segments whose every point lies in the annulus."""
    out = []
    while len(out) < count:
        a, b = annulus_points(rng, 2, r_min, r_max)
        d = b - a
        s = np.clip(-(a @ d) / (d @ d), 0.0, 1.0)
        if np.linalg.norm(a + s * d) >= r_min:
            out.append((a, b))
    return out
