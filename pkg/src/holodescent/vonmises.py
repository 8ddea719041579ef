"""
Von Mises maximum likelihood as a holonomic minimization problem.

With natural parameters ``theta = (kappa cos mu, kappa sin mu)`` and sample
means ``m = (c_bar, s_bar)`` of ``cos x`` and ``sin x``, the likelihood is
maximized by minimizing

    L(theta) = exp(-m . theta) * integral_0^{2 pi} exp(theta_1 cos t + theta_2 sin t) dt
             = exp(-m . theta) * 2 pi I_0(|theta|).

The Pfaffian system used here is built on the radial basis
``G = exp(-m . theta) * (f, df/dkappa)`` with ``f = 2 pi I_0(kappa)``; see
``docs/vonmises_pfaffian.md`` for the derivation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from scipy import integrate

from .errors import EmptyData, SingularPoint
from .optimizer import (
    _norm,
    IterationTrace,
    OptimizeResult,
    OptimizerConfig,
    Status,
    newton_direction,
)
from .pfaffian import PfaffianSystem, StateVector

__all__ = [
    "AngleData",
    "SufficientStats",
    "VmParams",
    "sufficient_stats",
    "bessel_i0_series",
    "bessel_i1_series",
    "vm_objective_oracle",
    "vm_kappa_derivative_oracle",
    "vm_gradient_oracle",
    "vm_hessian_oracle",
    "vm_initial_state",
    "vm_pfaffian_system",
    "vm_sample",
    "mle_direct_newton",
    "read_angles",
    "write_angles",
]

TWO_PI = 2.0 * math.pi
N_QUAD = 512


@dataclass(frozen=True)
class AngleData:
    """Angles in radians, normalized to ``[0, 2 pi)``."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.mod(np.asarray(self.angles, dtype=float).ravel(), TWO_PI)
        # mod can round 2pi - tiny up to 2pi
        a[a >= TWO_PI] = 0.0
        object.__setattr__(self, "angles", a)

    @property
    def n(self) -> int:
        return int(self.angles.size)


@dataclass(frozen=True)
class SufficientStats:
    c_bar: float
    s_bar: float
    n: int = 1

    @property
    def mean_vector(self) -> np.ndarray:
        return np.array([self.c_bar, self.s_bar])


@dataclass(frozen=True)
class VmParams:
    """Von Mises parameters stored in natural coordinates."""

    theta1: float
    theta2: float

    @classmethod
    def natural(cls, theta1, theta2) -> "VmParams":
        return cls(float(theta1), float(theta2))

    @classmethod
    def polar(cls, kappa, mu) -> "VmParams":
        if kappa < 0:
            raise ValueError("kappa must be non-negative")
        return cls(kappa * math.cos(mu), kappa * math.sin(mu))

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])

    @property
    def kappa(self) -> float:
        return math.hypot(self.theta1, self.theta2)

    @property
    def mu(self) -> float:
        return math.atan2(self.theta2, self.theta1) % TWO_PI


def _as_theta(theta) -> np.ndarray:
    if isinstance(theta, VmParams):
        return theta.theta
    return np.asarray(theta, dtype=float).reshape(2)


def sufficient_stats(data: AngleData | Sequence[float]) -> SufficientStats:
    """Sample means of ``cos`` and ``sin`` of the angles."""
    angles = data.angles if isinstance(data, AngleData) else np.asarray(data, dtype=float)
    if angles.size == 0:
        raise EmptyData("cannot compute statistics of an empty sample")
    return SufficientStats(
        float(np.mean(np.cos(angles))), float(np.mean(np.sin(angles))), int(angles.size)
    )


# -- Bessel functions ---------------------------------------------------------

def _bessel_series(x: float, order: int) -> float:
    half = 0.5 * x
    term = half**order / math.factorial(order)
    total = term
    q = half * half
    for m in range(1, 200):
        term *= q / (m * (m + order))
        total += term
        if term < 1e-17 * total:
            break
    return total


def bessel_i0_series(x: float) -> float:
    """``I_0(x) = sum (x/2)^(2m) / (m!)^2``."""
    return _bessel_series(abs(float(x)), 0)


def bessel_i1_series(x: float) -> float:
    """``I_1(x) = sum (x/2)^(2m+1) / (m! (m+1)!)``."""
    x = float(x)
    return math.copysign(_bessel_series(abs(x), 1), x)


# -- quadrature oracles -------------------------------------------------------

def _nodes(n_nodes: int):
    t = np.arange(n_nodes) * (TWO_PI / n_nodes)
    return np.cos(t), np.sin(t)


_COS, _SIN = _nodes(N_QUAD)


def _moments(theta: np.ndarray, n_nodes: int):
    """Trapezoid values of the integrals of ``(1, u, u u^T) exp(theta . u)``."""
    c, s = (_COS, _SIN) if n_nodes == N_QUAD else _nodes(n_nodes)
    w = np.exp(theta[0] * c + theta[1] * s) * (TWO_PI / n_nodes)
    u = np.stack([c, s])
    return w.sum(), u @ w, (u * w) @ u.T


def vm_objective_oracle(theta, stats: SufficientStats, n_nodes: int = N_QUAD) -> float:
    """Direct evaluation of ``L(theta)`` by the periodic trapezoid rule."""
    theta = _as_theta(theta)
    f0, _, _ = _moments(theta, n_nodes)
    return float(math.exp(-stats.mean_vector @ theta) * f0)


def vm_kappa_derivative_oracle(theta, stats: SufficientStats, n_nodes: int = N_QUAD) -> float:
    """``exp(-m . theta) * df/dkappa`` by quadrature; equals ``exp(-m . theta) 2 pi I_1``."""
    theta = _as_theta(theta)
    kappa = float(np.linalg.norm(theta))
    if kappa == 0.0:
        raise SingularPoint("radial derivative undefined at theta = 0")
    _, f1, _ = _moments(theta, n_nodes)
    return float(math.exp(-stats.mean_vector @ theta) * (f1 @ theta) / kappa)


def vm_gradient_oracle(theta, stats: SufficientStats, n_nodes: int = N_QUAD) -> np.ndarray:
    theta = _as_theta(theta)
    m = stats.mean_vector
    f0, f1, _ = _moments(theta, n_nodes)
    return math.exp(-m @ theta) * (f1 - m * f0)


def vm_hessian_oracle(theta, stats: SufficientStats, n_nodes: int = N_QUAD) -> np.ndarray:
    theta = _as_theta(theta)
    m = stats.mean_vector
    f0, f1, f2 = _moments(theta, n_nodes)
    return math.exp(-m @ theta) * (f2 - np.outer(m, f1) - np.outer(f1, m) + np.outer(m, m) * f0)


# -- Pfaffian system ----------------------------------------------------------

_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
_E22 = np.array([[0.0, 0.0], [0.0, 1.0]])


@numba.njit(cache=True)
def _vm_point_matrices(t1, t2, m1, m2):
    k = math.sqrt(t1 * t1 + t2 * t2)
    out = np.zeros((2, 2, 2))
    for i, ti in enumerate((t1, t2)):
        a = ti / k
        mi = m1 if i == 0 else m2
        out[i, 0, 0] = -mi
        out[i, 0, 1] = a
        out[i, 1, 0] = a
        out[i, 1, 1] = -a / k - mi
    return out


@numba.njit(cache=True)
def _vm_point_derivatives(t1, t2):
    # Q_i = a_i SWAP + b_i E22 - m_i I with a_i = theta_i/k, b_i = -theta_i/k^2
    k = math.sqrt(t1 * t1 + t2 * t2)
    th = (t1, t2)
    out = np.zeros((2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            delta = 1.0 if i == j else 0.0
            da = delta / k - th[i] * th[j] / k**3
            db = -delta / k**2 + 2.0 * th[i] * th[j] / k**4
            out[i, j, 0, 1] = da
            out[i, j, 1, 0] = da
            out[i, j, 1, 1] = db
    return out


@numba.njit(cache=True)
def _vm_connection(theta, d1, d2, md):
    out = np.empty((theta.shape[0], 2, 2))
    for k in range(theta.shape[0]):
        kappa = math.sqrt(theta[k, 0] ** 2 + theta[k, 1] ** 2)
        a = (theta[k, 0] * d1 + theta[k, 1] * d2) / kappa
        out[k, 0, 0] = -md
        out[k, 0, 1] = a
        out[k, 1, 0] = a
        out[k, 1, 1] = -a / kappa - md
    return out


def vm_pfaffian_system(stats: SufficientStats) -> PfaffianSystem:
    """
    Rank-2 Pfaffian system for ``L`` in the radial basis.

    With ``kappa = |theta|``::

        Q_i(theta) = (theta_i / kappa) [[0, 1], [1, -1/kappa]] - m_i I

    The system is singular at ``theta = 0``.
    """
    m = stats.mean_vector.copy()
    shift = m[:, None, None] * np.eye(2)

    m1, m2 = float(m[0]), float(m[1])

    def matrices(theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 1:
            return _vm_point_matrices(theta[0], theta[1], m1, m2)
        kappa = np.sqrt(np.sum(theta * theta, axis=-1))[..., None]
        a = (theta / kappa)[..., None, None]
        b = (-theta / kappa**2)[..., None, None]
        return a * _SWAP + b * _E22 - shift

    def matrix_derivatives(theta):
        return _vm_point_derivatives(float(theta[0]), float(theta[1]))

    def connection(theta, d):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 2:
            return _vm_connection(np.ascontiguousarray(theta), d[0], d[1], m1 * d[0] + m2 * d[1])
        return np.einsum("i,...iab->...ab", d, matrices(theta))

    def distance(theta):
        theta = np.asarray(theta, dtype=float)
        return np.hypot(theta[..., 0], theta[..., 1])

    return PfaffianSystem(
        dim=2,
        rank=2,
        matrices=matrices,
        matrix_derivatives=matrix_derivatives,
        singular=lambda theta: theta[0] == 0.0 and theta[1] == 0.0,
        singular_distance=distance,
        connection=connection,
        name="von Mises",
    )


def vm_initial_state(theta0, stats: SufficientStats) -> StateVector:
    """``(L(theta0), exp(-m . theta0) df/dkappa)`` by quadrature; the only direct evaluation."""
    theta0 = _as_theta(theta0)
    if not np.any(theta0):
        raise SingularPoint("theta0 = 0 is on the singular locus")
    return StateVector(
        theta0,
        [vm_objective_oracle(theta0, stats), vm_kappa_derivative_oracle(theta0, stats)],
    )


# -- sampling -----------------------------------------------------------------

def vm_sample(kappa: float, mu: float, n: int, seed=None) -> AngleData:
    """
    Draw ``n`` von Mises angles by the Best-Fisher wrapped-Cauchy rejection method.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kappa == 0:
        return AngleData(rng.uniform(0.0, TWO_PI, size=n))

    if kappa < 1e-5:
        r = 1.0 / kappa + kappa
    else:
        tau = 1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)
        rho = (tau - math.sqrt(2.0 * tau)) / (2.0 * kappa)
        r = (1.0 + rho * rho) / (2.0 * rho)

    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 16)
        u1, u2, u3 = rng.random((3, m))
        z = np.cos(math.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
        w = (np.sign(u3 - 0.5) * np.arccos(np.clip(f, -1.0, 1.0)))[accept]
        take = min(w.size, n - filled)
        out[filled : filled + take] = w[:take]
        filled += take
    return AngleData(out + mu)


# -- direct Newton baseline ---------------------------------------------------

def _bessel_pair_adaptive(kappa: float):
    """``(I_0, I_1) * exp(-kappa)`` by adaptive quadrature on ``[0, pi]``."""
    i0 = integrate.quad(
        lambda t: math.exp(kappa * (math.cos(t) - 1.0)), 0.0, math.pi,
        epsabs=0.0, epsrel=1e-13, limit=200,
    )[0]
    # I_1 -> 0 as kappa -> 0, so its tolerance is anchored to I_0
    i1 = integrate.quad(
        lambda t: math.exp(kappa * (math.cos(t) - 1.0)) * math.cos(t), 0.0, math.pi,
        epsabs=1e-14 * i0, epsrel=1e-13, limit=200,
    )[0]
    return i0 / math.pi, i1 / math.pi


def _bessel_pair_trapezoid(kappa: float):
    w = np.exp(kappa * (_COS - 1.0))
    return float(w.mean()), float((w * _COS).mean())


def _direct_derivatives(theta: np.ndarray, m: np.ndarray, quadrature: str):
    """``L``, gradient and Hessian from quadrature values of ``I_0`` and ``I_1``."""
    kappa = _norm(theta)
    pair = _bessel_pair_adaptive if quadrature == "adaptive" else _bessel_pair_trapezoid
    i0s, i1s = pair(kappa)
    # f = 2 pi I0, f' = 2 pi I1, f'' = f - f'/kappa; common factor exp(kappa - m.theta)
    scale = TWO_PI * math.exp(kappa - m @ theta)
    f, fp = scale * i0s, scale * i1s
    fpp = f - fp / kappa
    u = theta / kappa
    uu = np.outer(u, u)
    grad_f = u * fp
    hess_f = uu * fpp + (np.eye(2) - uu) * (fp / kappa)
    grad = grad_f - m * f
    hess = hess_f - np.outer(m, grad_f) - np.outer(grad_f, m) + np.outer(m, m) * f
    return f, fp, grad, hess


def mle_direct_newton(
    stats: SufficientStats,
    x0,
    cfg: OptimizerConfig | None = None,
    quadrature: str = "adaptive",
) -> OptimizeResult:
    """
    Newton-Raphson on ``L`` with every value recomputed by quadrature.

    ``L`` and its derivatives come from ``I_0`` and ``I_1`` at each iterate,
    evaluated by adaptive Gauss-Kronrod quadrature (``quadrature="adaptive"``)
    or the 512-node trapezoid rule (``"trapezoid"``). No Pfaffian system is used.
    The iteration stops with status ``SINGULAR`` if ``|theta|`` drops below
    ``cfg.integrator.singular_clearance``, where the polar form degenerates.
    """
    if quadrature not in ("adaptive", "trapezoid"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    cfg = cfg or OptimizerConfig()
    m = stats.mean_vector
    x = _as_theta(x0).copy()
    trace = IterationTrace()
    status = Status.MAX_ITERS
    F = None
    for k in range(cfg.max_iters + 1):
        if _norm(x) < cfg.integrator.singular_clearance:
            status = Status.SINGULAR
            trace.append(k, x, np.nan, np.nan)
            break
        f, fp, grad, hess = _direct_derivatives(x, m, quadrature)
        F = np.array([f, fp])
        gnorm = _norm(grad)
        if gnorm <= cfg.grad_tol:
            status = Status.CONVERGED
            trace.append(k, x, f, gnorm)
            break
        if k == cfg.max_iters:
            trace.append(k, x, f, gnorm)
            break
        d = newton_direction(grad, hess, cfg.damping)
        dnorm = _norm(d)
        trace.append(k, x, f, gnorm, alpha=1.0, direction_norm=dnorm)
        x = x + d
        if dnorm <= cfg.step_tol:
            status = Status.CONVERGED
            f, fp, grad, _ = _direct_derivatives(x, m, quadrature)
            F = np.array([f, fp])
            trace.append(k + 1, x, f, _norm(grad))
            break
    return OptimizeResult(x=x, F=F, trace=trace, status=status)


# -- file format --------------------------------------------------------------

def read_angles(path) -> AngleData:
    """Read one radian value per line; blank lines and ``#`` comments are skipped."""
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        values.append(float(line))
    if not values:
        raise EmptyData(f"no angles in {path}")
    return AngleData(np.array(values))


def write_angles(path, data: AngleData, header: str | None = None) -> None:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(repr(float(a)) for a in data.angles)
    Path(path).write_text("\n".join(lines) + "\n")
