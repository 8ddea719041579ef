"""
Pfaffian systems and their numerical propagation.

A holonomic function ``f`` on ``R^n`` is represented by a vector
``F = (f, s_2 f, ..., s_t f)`` satisfying the first-order system

    dF/dx_i = P_i(x) F,    i = 1, ..., n.

Given ``F`` at one point, ``F`` anywhere else is obtained by integrating the
system along a path, and the gradient and Hessian of ``f`` are read off from
``F`` by matrix products. Nothing here ever evaluates ``f`` itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .errors import SingularPath, SingularPoint

__all__ = [
    "PfaffianSystem",
    "StateVector",
    "IntegratorConfig",
    "propagate",
    "gradient",
    "hessian",
    "gradient_and_hessian",
    "check_integrability",
    "finite_difference_derivatives",
]


@dataclass(frozen=True)
class PfaffianSystem:
    """
    A holonomic objective given by its Pfaffian coefficient matrices.

    Parameters
    ----------
    dim : int
        Number of variables ``n``.
    rank : int
        Holonomic rank ``t``, the length of ``F``.
    matrices : callable
        ``matrices(x) -> array (..., n, t, t)`` returning ``[P_1(x), ..., P_n(x)]``.
        Must broadcast over leading axes of ``x`` (shape ``(..., n)``) unless
        ``vectorized`` is False.
    matrix_derivatives : callable, optional
        ``matrix_derivatives(x) -> array (n, n, t, t)`` whose ``[i, j]`` entry is
        ``dP_i/dx_j`` at a single point ``x``. Central differences are used when
        omitted.
    singular : callable, optional
        Predicate marking points where the matrices are undefined.
    singular_distance : callable, optional
        Distance from a batch of points ``(..., n)`` to the singular locus.
        Used to enforce the integrator clearance.
    connection : callable, optional
        ``connection(x, d) -> array (..., t, t)`` equal to ``sum_i d_i P_i(x)``
        for a batch of points. A faster route for propagation; derived from
        ``matrices`` when omitted.
    vectorized : bool
        Whether ``matrices`` accepts batches of points.
    """

    dim: int
    rank: int
    matrices: Callable[[np.ndarray], np.ndarray]
    matrix_derivatives: Optional[Callable[[np.ndarray], np.ndarray]] = None
    singular: Optional[Callable[[np.ndarray], bool]] = None
    singular_distance: Optional[Callable[[np.ndarray], np.ndarray]] = None
    connection: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    vectorized: bool = True
    name: str = field(default="pfaffian", compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.rank < 1:
            raise ValueError("dim and rank must be positive")

    def is_singular(self, x) -> bool:
        if self.singular is not None:
            return bool(self.singular(x))
        if self.singular_distance is not None:
            return bool(self.singular_distance(np.asarray(x, dtype=float)) <= 0.0)
        return False

    def coefficients(self, x) -> np.ndarray:
        """Stacked matrices ``P_i`` at ``x``; shape ``x.shape[:-1] + (n, t, t)``."""
        x = np.asarray(x, dtype=float)
        if self.vectorized or x.ndim == 1:
            return np.asarray(self.matrices(x), dtype=float)
        flat = x.reshape(-1, self.dim)
        out = np.stack([np.asarray(self.matrices(p), dtype=float) for p in flat])
        return out.reshape(x.shape[:-1] + out.shape[1:])

    def directional(self, x, d) -> np.ndarray:
        """``sum_i d_i P_i(x)`` for a batch of points ``x``."""
        if self.connection is not None and self.vectorized:
            return np.asarray(self.connection(x, d), dtype=float)
        return np.einsum("i,...iab->...ab", d, self.coefficients(x))

    def coefficient_derivatives(self, x) -> np.ndarray:
        """``D[i, j] = dP_i/dx_j`` at a single point ``x``."""
        x = np.asarray(x, dtype=float)
        if self.matrix_derivatives is not None:
            return np.asarray(self.matrix_derivatives(x), dtype=float)
        return finite_difference_derivatives(self, x)


@dataclass(frozen=True)
class StateVector:
    """A point together with the propagated vector ``F``; ``F[0]`` is ``f(point)``."""

    point: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.array(self.point, dtype=float, ndmin=1))
        object.__setattr__(self, "F", np.array(self.F, dtype=float, ndmin=1))

    @property
    def value(self) -> float:
        return float(self.F[0])


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings for propagation along straight segments."""

    substeps_per_unit: int = 200
    min_substeps: int = 20
    singular_clearance: float = 1e-3

    def __post_init__(self):
        if self.substeps_per_unit <= 0 or self.min_substeps <= 0:
            raise ValueError("substep counts must be positive")
        if not self.singular_clearance > 0:
            raise ValueError("singular_clearance must be positive")

    def n_steps(self, length: float) -> int:
        return max(self.min_substeps, math.ceil(length * self.substeps_per_unit))


def _check_point(system: PfaffianSystem, x: np.ndarray) -> None:
    if system.is_singular(x):
        raise SingularPoint(f"point {x} lies on the singular locus of {system.name}")


@numba.njit(cache=True)
def _rk4_linear(A, F, h):
    """Classical RK4 for ``y' = A(tau) y`` given ``A`` at the nodes ``0, h/2, h, ...``."""
    t = F.shape[0]
    y = F.copy()
    k1 = np.empty(t)
    k2 = np.empty(t)
    k3 = np.empty(t)
    k4 = np.empty(t)
    for s in range((A.shape[0] - 1) // 2):
        i0, ih, i1 = 2 * s, 2 * s + 1, 2 * s + 2
        for a in range(t):
            acc = 0.0
            for b in range(t):
                acc += A[i0, a, b] * y[b]
            k1[a] = acc
        for a in range(t):
            acc = 0.0
            for b in range(t):
                acc += A[ih, a, b] * (y[b] + 0.5 * h * k1[b])
            k2[a] = acc
        for a in range(t):
            acc = 0.0
            for b in range(t):
                acc += A[ih, a, b] * (y[b] + 0.5 * h * k2[b])
            k3[a] = acc
        for a in range(t):
            acc = 0.0
            for b in range(t):
                acc += A[i1, a, b] * (y[b] + h * k3[b])
            k4[a] = acc
        for a in range(t):
            y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])
    return y


@numba.njit(cache=True)
def _derivative_rows(P, D, F):
    """``g_i = (P_i F)_1`` and ``H_ij = ((D_ij + P_i P_j) F)_1``."""
    n, t = P.shape[0], P.shape[1]
    g = np.zeros(n)
    H = np.zeros((n, n))
    PF = np.zeros((n, t))
    for j in range(n):
        for a in range(t):
            acc = 0.0
            for b in range(t):
                acc += P[j, a, b] * F[b]
            PF[j, a] = acc
        g[j] = PF[j, 0]
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for b in range(t):
                acc += D[i, j, 0, b] * F[b] + P[i, 0, b] * PF[j, b]
            H[i, j] = acc
    for i in range(n):
        for j in range(i + 1, n):
            sym = 0.5 * (H[i, j] + H[j, i])
            H[i, j] = sym
            H[j, i] = sym
    return g, H


def propagate(
    system: PfaffianSystem,
    state: StateVector,
    target,
    cfg: IntegratorConfig | None = None,
) -> StateVector:
    """
    Integrate the Pfaffian system from ``state.point`` to ``target``.

    The path is the straight segment ``x(tau) = x0 + tau * d``, ``d = target - x0``,
    along which ``dF/dtau = (sum_i d_i P_i(x(tau))) F``. Classical RK4 is used with
    ``max(min_substeps, ceil(|d| * substeps_per_unit))`` equal steps. The
    coefficients at all RK4 nodes are evaluated in one vectorized call.

    Raises
    ------
    SingularPath
        If any RK4 node is closer than ``cfg.singular_clearance`` to the
        singular locus.
    """
    cfg = cfg or IntegratorConfig()
    x0 = state.point
    target = np.asarray(target, dtype=float).reshape(x0.shape)
    d = target - x0
    length = math.sqrt(float(d @ d))
    if length == 0.0:
        return state

    n_steps = cfg.n_steps(length)
    h = 1.0 / n_steps
    taus = np.arange(2 * n_steps + 1) * (0.5 * h)
    taus[-1] = 1.0
    nodes = x0 + taus[:, None] * d

    if system.singular_distance is not None:
        dist = np.asarray(system.singular_distance(nodes), dtype=float)
        closest = dist.min()
        if not closest >= cfg.singular_clearance:
            raise SingularPath(
                f"segment {x0} -> {target} passes within {closest:.3g} of the "
                f"singular locus (clearance {cfg.singular_clearance:g})"
            )
    elif system.singular is not None:
        for p in nodes:
            if system.singular(p):
                raise SingularPath(f"segment {x0} -> {target} meets the singular locus")

    A = system.directional(nodes, d)  # (2N+1, t, t)
    F = _rk4_linear(np.ascontiguousarray(A), state.F, h)
    if not np.isfinite(F).all():
        raise SingularPath(f"non-finite coefficients on segment {x0} -> {target}")
    return StateVector(target, F)


def gradient(system: PfaffianSystem, state: StateVector) -> np.ndarray:
    """Gradient of ``f``: ``g_i = (P_i(x) F)_1``."""
    _check_point(system, state.point)
    P = system.coefficients(state.point)
    return P[:, 0, :] @ state.F


def hessian(system: PfaffianSystem, state: StateVector) -> np.ndarray:
    """
    Hessian of ``f``: ``H_ij = ((dP_i/dx_j + P_i P_j) F)_1``, symmetrized.
    """
    return gradient_and_hessian(system, state)[1]


def gradient_and_hessian(system: PfaffianSystem, state: StateVector):
    """Both derivatives from a single evaluation of the coefficient matrices."""
    _check_point(system, state.point)
    P = np.ascontiguousarray(system.coefficients(state.point))
    D = np.ascontiguousarray(system.coefficient_derivatives(state.point))
    return _derivative_rows(P, D, state.F)


def finite_difference_derivatives(system: PfaffianSystem, x) -> np.ndarray:
    """Central differences of ``P_i`` with step ``1e-5 * max(1, |x|)``."""
    x = np.asarray(x, dtype=float)
    n = system.dim
    step = 1e-5 * max(1.0, float(np.linalg.norm(x)))
    D = np.empty((n, n, system.rank, system.rank))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        D[:, j] = (system.coefficients(x + e) - system.coefficients(x - e)) / (2 * step)
    return D


def check_integrability(system: PfaffianSystem, points, tol: float = 1e-6) -> bool:
    """
    Check ``dP_j/dx_i + P_j P_i == dP_i/dx_j + P_i P_j`` at every point.

    The comparison is entrywise, relative to ``max(1, largest term)``.
    """
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        _check_point(system, x)
        P = system.coefficients(x)
        D = system.coefficient_derivatives(x)
        for i in range(system.dim):
            for j in range(i + 1, system.dim):
                lhs = D[j, i] + P[j] @ P[i]
                rhs = D[i, j] + P[i] @ P[j]
                scale = max(1.0, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
                if np.max(np.abs(lhs - rhs)) > tol * scale:
                    return False
    return True
