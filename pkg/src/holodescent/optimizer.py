"""
Holonomic gradient descent (HGD) and its constrained variant (CHGD).

Both optimizers see the objective only through a :class:`PfaffianSystem` and
the vector ``F0 = F(x0)``. Every later value of ``f`` and its derivatives is
obtained by propagating ``F`` along the iterates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import LineSearchFailed, SingularHessian, SingularPath
from .pfaffian import (
    IntegratorConfig,
    PfaffianSystem,
    StateVector,
    gradient,
    gradient_and_hessian,
    propagate,
)

__all__ = [
    "Constraint",
    "ConstraintSet",
    "affine_inequality",
    "ball_inequality",
    "PenaltyConfig",
    "OptimizerConfig",
    "TraceRecord",
    "IterationTrace",
    "Status",
    "OptimizeResult",
    "newton_direction",
    "exact_penalty",
    "linearized_penalty",
    "armijo_backtrack",
    "hgd_minimize",
    "chgd_minimize",
]

_EPS = np.finfo(float).eps


def _norm(v) -> float:
    return math.sqrt(float(v @ v))


# -- constraints --------------------------------------------------------------

@dataclass(frozen=True)
class Constraint:
    fun: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    label: str = ""


@dataclass(frozen=True)
class ConstraintSet:
    """Inequalities ``g(x) <= 0`` and equalities ``h(x) = 0`` with their gradients."""

    inequalities: tuple = ()
    equalities: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(_as_constraint(c) for c in self.inequalities))
        object.__setattr__(self, "equalities", tuple(_as_constraint(c) for c in self.equalities))

    def __len__(self):
        return len(self.inequalities) + len(self.equalities)

    def violation(self, x) -> float:
        """``sum max(0, g_i(x)) + sum |h_j(x)|``."""
        x = np.asarray(x, dtype=float)
        total = sum(max(0.0, float(c.fun(x))) for c in self.inequalities)
        return total + sum(abs(float(c.fun(x))) for c in self.equalities)

    def linearized_violation(self, x, d) -> float:
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        total = sum(max(0.0, float(c.fun(x) + c.grad(x) @ d)) for c in self.inequalities)
        return total + sum(abs(float(c.fun(x) + c.grad(x) @ d)) for c in self.equalities)

    def is_feasible(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return all(c.fun(x) <= tol for c in self.inequalities) and all(
            abs(c.fun(x)) <= tol for c in self.equalities
        )


def _as_constraint(c) -> Constraint:
    if isinstance(c, Constraint):
        return c
    fun, grad = c
    return Constraint(fun, grad)


def affine_inequality(a: Sequence[float], c: float = 0.0, label: str = "") -> Constraint:
    """``a . x + c <= 0``."""
    a = np.asarray(a, dtype=float)
    return Constraint(lambda x: float(a @ x + c), lambda x: a.copy(), label or f"linear {a} {c}")


def ball_inequality(radius: float, center=None, label: str = "") -> Constraint:
    """``|x - center|^2 <= radius^2``."""
    r2 = float(radius) ** 2

    def fun(x):
        y = x if center is None else x - center
        return float(y @ y - r2)

    def grad(x):
        return 2.0 * (x if center is None else x - center)

    return Constraint(fun, grad, label or f"disk {radius}")


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class PenaltyConfig:
    rho: float = 10.0
    xi: float = 0.1
    shrink: float = 0.5
    alpha_min: float = 1e-10

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.xi < 1:
            raise ValueError("xi must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.alpha_min > 0:
            raise ValueError("alpha_min must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 100
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    damping: float = 0.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not (self.grad_tol > 0 and self.step_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")


# -- results ------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    k: int
    x: np.ndarray
    f: float
    grad_norm: float
    alpha: float = math.nan
    penalty: float = math.nan
    feasible: bool = True
    direction_norm: float = math.nan


class IterationTrace:
    """Per-iteration records; ``alpha`` and ``direction_norm`` describe the step leaving ``x_k``."""

    columns = ("k", "theta1", "theta2", "L", "grad_norm", "alpha", "penalty", "feasible")

    def __init__(self):
        self.records: list[TraceRecord] = []

    def append(self, k, x, f, grad_norm, **kw) -> TraceRecord:
        rec = TraceRecord(int(k), np.array(x, dtype=float), float(f), float(grad_norm), **kw)
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __getitem__(self, i) -> TraceRecord:
        return self.records[i]

    @property
    def points(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    @property
    def penalties(self) -> np.ndarray:
        return np.array([r.penalty for r in self.records])

    def rows(self) -> list[dict]:
        """Flat rows for CSV export; point coordinates become ``theta1, theta2, ...``."""
        out = []
        for r in self.records:
            row = {"k": r.k}
            for i, xi in enumerate(r.x, start=1):
                row[f"theta{i}"] = float(xi)
            row.update(
                L=r.f,
                grad_norm=r.grad_norm,
                alpha=r.alpha,
                penalty=r.penalty,
                feasible=int(r.feasible),
                direction_norm=r.direction_norm,
            )
            out.append(row)
        return out


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters_exceeded"
    LINE_SEARCH_FAILED = "line_search_failed"
    SINGULAR = "singular"


@dataclass
class OptimizeResult:
    x: np.ndarray
    F: Optional[np.ndarray]
    trace: IterationTrace
    status: Status
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def iterations(self) -> int:
        return max(len(self.trace) - 1, 0)

    @property
    def value(self) -> float:
        return float(self.F[0]) if self.F is not None else math.nan


# -- building blocks ----------------------------------------------------------

def newton_direction(grad, hess, damping: float = 0.0) -> np.ndarray:
    """
    Solve ``(hess + damping I) d = -grad``.

    A solve that fails, or whose matrix is singular to working precision, is
    retried up to four times with the damping multiplied by 10 (starting from
    ``1e-8 * max(1, |hess|)`` when ``damping`` is zero).
    """
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    eye = np.eye(grad.size)
    lam = float(damping)
    for attempt in range(5):
        M = hess + lam * eye
        try:
            Minv = np.linalg.inv(M)
        except np.linalg.LinAlgError:
            Minv = None
        if Minv is not None:
            # 1-norm condition number; singular to working precision above 1/eps
            cond = np.linalg.norm(M, 1) * np.linalg.norm(Minv, 1)
            if cond < 1.0 / _EPS:
                return -(Minv @ grad)
        lam = lam * 10.0 if lam > 0 else 1e-8 * max(1.0, float(np.linalg.norm(hess)))
    raise SingularHessian(f"Newton system singular even with damping {lam / 10.0:g}")


def exact_penalty(f_val: float, x, cons: ConstraintSet, rho: float) -> float:
    """``f + rho * (sum max(0, g_i(x)) + sum |h_j(x)|)``."""
    return float(f_val) + rho * cons.violation(x)


def linearized_penalty(f_val: float, grad, x, d, cons: ConstraintSet, rho: float) -> float:
    """First-order model of :func:`exact_penalty` at ``x + d``."""
    return float(f_val) + float(np.dot(grad, d)) + rho * cons.linearized_violation(x, d)


def armijo_backtrack(
    system: PfaffianSystem,
    state: StateVector,
    d,
    cons: ConstraintSet,
    pcfg: PenaltyConfig | None = None,
    icfg: IntegratorConfig | None = None,
    grad=None,
):
    """
    Backtracking step size for the exact penalty function.

    Starting at ``alpha = 1``, ``alpha`` is multiplied by ``pcfg.shrink`` until::

        P(x + alpha d) <= P(x) + xi * alpha * min(0, P_l(x, d) - P(x))

    ``P(x + alpha d)`` uses ``f`` propagated from ``state``; a trial step whose
    segment is singular counts as a failed trial. The predicted change is
    clipped at zero so that an accepted step never increases ``P``.

    Returns
    -------
    alpha, new_state

    Raises
    ------
    LineSearchFailed
        When ``alpha`` drops below ``pcfg.alpha_min``.
    """
    pcfg = pcfg or PenaltyConfig()
    icfg = icfg or IntegratorConfig()
    d = np.asarray(d, dtype=float)
    x = state.point
    if grad is None:
        grad = gradient(system, state)
    f0 = state.value
    p0 = exact_penalty(f0, x, cons, pcfg.rho)
    predicted = min(0.0, linearized_penalty(f0, grad, x, d, cons, pcfg.rho) - p0)

    alpha = 1.0
    while alpha >= pcfg.alpha_min:
        target = x + alpha * d
        try:
            trial = propagate(system, state, target, icfg)
        except SingularPath:
            trial = None
        if trial is not None and np.all(np.isfinite(trial.F)):
            p = exact_penalty(trial.value, target, cons, pcfg.rho)
            bound = p0 + pcfg.xi * alpha * predicted
            # round-off slack for ties such as landing exactly on a minimizer
            if p <= bound + 4 * _EPS * max(1.0, abs(p0)):
                return alpha, trial
        alpha *= pcfg.shrink
    raise LineSearchFailed(f"no Armijo step along |d| = {np.linalg.norm(d):.3g} from {x}")


# -- drivers ------------------------------------------------------------------

def hgd_minimize(
    system: PfaffianSystem, x0, F0, cfg: OptimizerConfig | None = None
) -> OptimizeResult:
    """
    Unconstrained holonomic gradient descent with full Newton steps.

    Each iteration reads the gradient and Hessian off ``F``, steps to
    ``x + d`` with ``d = -H^{-1} grad`` and propagates ``F`` to the new point.
    Stops when ``|grad| <= grad_tol``, ``|d| <= step_tol`` or after
    ``max_iters`` steps (status ``MAX_ITERS``).
    """
    cfg = cfg or OptimizerConfig()
    state = StateVector(x0, F0)
    trace = IterationTrace()
    for k in range(cfg.max_iters + 1):
        grad, hess = gradient_and_hessian(system, state)
        gnorm = _norm(grad)
        if gnorm <= cfg.grad_tol:
            trace.append(k, state.point, state.value, gnorm)
            return OptimizeResult(state.point, state.F, trace, Status.CONVERGED, "gradient tolerance")
        if k == cfg.max_iters:
            trace.append(k, state.point, state.value, gnorm)
            break
        d = newton_direction(grad, hess, cfg.damping)
        dnorm = _norm(d)
        trace.append(k, state.point, state.value, gnorm, alpha=1.0, direction_norm=dnorm)
        state = propagate(system, state, state.point + d, cfg.integrator)
        if dnorm <= cfg.step_tol:
            grad = gradient(system, state)
            trace.append(k + 1, state.point, state.value, float(np.linalg.norm(grad)))
            return OptimizeResult(state.point, state.F, trace, Status.CONVERGED, "step tolerance")
    return OptimizeResult(state.point, state.F, trace, Status.MAX_ITERS, "iteration limit reached")


def chgd_minimize(
    system: PfaffianSystem,
    x0,
    F0,
    cons: ConstraintSet,
    cfg: OptimizerConfig | None = None,
    pcfg: PenaltyConfig | None = None,
) -> OptimizeResult:
    """
    Constrained holonomic gradient descent.

    The search direction is the unconstrained Newton direction of ``f``; the
    step size comes from :func:`armijo_backtrack` on the exact penalty
    function. A failed line search ends the run with status
    ``LINE_SEARCH_FAILED`` and the last accepted iterate, which has the lowest
    penalty seen.
    """
    cfg = cfg or OptimizerConfig()
    pcfg = pcfg or PenaltyConfig()
    state = StateVector(x0, F0)
    trace = IterationTrace()

    def record(k, gnorm, **kw):
        x = state.point
        trace.append(
            k, x, state.value, gnorm,
            penalty=exact_penalty(state.value, x, cons, pcfg.rho),
            feasible=cons.is_feasible(x),
            **kw,
        )

    for k in range(cfg.max_iters + 1):
        grad, hess = gradient_and_hessian(system, state)
        gnorm = _norm(grad)
        if gnorm <= cfg.grad_tol:
            record(k, gnorm)
            return OptimizeResult(state.point, state.F, trace, Status.CONVERGED, "gradient tolerance")
        if k == cfg.max_iters:
            record(k, gnorm)
            break
        d = newton_direction(grad, hess, cfg.damping)
        dnorm = _norm(d)
        try:
            alpha, new_state = armijo_backtrack(
                system, state, d, cons, pcfg, cfg.integrator, grad=grad
            )
        except LineSearchFailed as exc:
            record(k, gnorm, direction_norm=dnorm)
            return OptimizeResult(state.point, state.F, trace, Status.LINE_SEARCH_FAILED, str(exc))
        record(k, gnorm, alpha=alpha, direction_norm=dnorm)
        state = new_state
        if alpha * dnorm <= cfg.step_tol:
            record(k + 1, float(np.linalg.norm(gradient(system, state))))
            return OptimizeResult(state.point, state.F, trace, Status.CONVERGED, "step tolerance")
    return OptimizeResult(state.point, state.F, trace, Status.MAX_ITERS, "iteration limit reached")
