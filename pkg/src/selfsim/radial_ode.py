"""Shooting integration of the radial profile equation from the origin.

The equation is singular at r = 0, so integration starts at a small radius
from the second-order Taylor expansion and continues with an adaptive
8th-order Runge-Kutta method with dense output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.integrate import DOP853, OdeSolution
from scipy.optimize import brentq

from .core import (
    Exponential,
    NonConvergedProfile,
    PositivityLost,
    Power,
    PowerApprox,
    ProblemParams,
    RadialProfile,
    Status,
    ValidationError,
    LOG_POWER_THRESHOLD,
    positivity_floor,
    profile_source,
    profile_source_derivative,
)

OVERFLOW_GUARD = 1e300
_EXP_CAP = 700.0


@dataclass(frozen=True)
class Uniform:
    count: int = 10001

    def __post_init__(self):
        if self.count < 2:
            raise ValidationError("uniform output grid needs at least 2 points")


@dataclass(frozen=True)
class Adaptive:
    """Report the integrator's own accepted step radii."""


@dataclass(frozen=True)
class IntegratorConfig:
    r_max: float = 50.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    taylor_radius: float = 1e-3
    max_steps: int = 10**7
    # Caps the dense-output interpolation error between accepted steps.
    max_step: float = 0.05
    output_grid: Union[Uniform, Adaptive] = field(default_factory=Uniform)

    def __post_init__(self):
        if not (0 < self.taylor_radius < self.r_max):
            raise ValidationError("need 0 < taylor_radius < r_max")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValidationError("max_step must be positive")
        if self.max_steps < 1:
            raise ValidationError("max_steps must be positive")


def _check_admissible(params: ProblemParams, value: float):
    floor = positivity_floor(params)
    if floor is not None:
        if isinstance(params.nonlinearity, PowerApprox) and value <= floor:
            raise PositivityLost(f"phi + n = {value - floor:g} <= 0")
        if isinstance(params.nonlinearity, Power) and value < floor:
            raise PositivityLost(f"power-type profile negative ({value:g})")


def rhs(params: ProblemParams, r: float, value: float, derivative: float) -> float:
    """Second derivative of the profile implied by the equation at (r, phi, phi')."""
    if r <= 0:
        raise ValidationError("rhs is singular at r = 0; use taylor_start")
    _check_admissible(params, value)
    N = params.dimension
    return -((N - 1) / r + r / 2) * derivative - float(profile_source(params, value))


def _scalar_source(params: ProblemParams):
    """Fast scalar version of the source term, clamped outside the admissible range."""
    f = params.nonlinearity
    exp, log1p = math.exp, math.log1p
    if isinstance(f, Exponential):
        return lambda v: exp(min(v, _EXP_CAP)) + 1.0
    if isinstance(f, PowerApprox):
        n = f.n
        c = 1.0 / (n - 1)
        if n > LOG_POWER_THRESHOLD:
            def source(v):
                x = v / n
                power = exp(min(n * log1p(x), _EXP_CAP)) if x > -1.0 else 0.0
                return (v + n) * c + power
        else:
            def source(v):
                base = 1.0 + v / n
                return (v + n) * c + (base**n if base > 0 else 0.0)
        return source
    p = f.p
    c = 1.0 / (p - 1)
    return lambda v: v * c + (min(v, 1e150) ** p if v > 0 else 0.0)


def taylor_coefficients(params: ProblemParams, alpha: float):
    """Coefficients (a, b) of phi = alpha + a r^2 + b r^4 + ... near the origin."""
    N = params.dimension
    G = float(profile_source(params, alpha))
    dG = float(profile_source_derivative(params, alpha))
    a = -G / (2 * N)
    b = G * (1 + dG) / (8 * N * (N + 2))
    return a, b


def taylor_start(params: ProblemParams, alpha: float, r: float, taylor_radius: float = 1e-3):
    """Second-order Taylor values (phi, phi') at a small radius."""
    if r < 0 or r > taylor_radius:
        raise ValidationError(f"taylor_start needs 0 <= r <= {taylor_radius}, got {r}")
    _check_admissible(params, alpha)
    a, _ = taylor_coefficients(params, alpha)
    return alpha + a * r * r, 2 * a * r


def start_radius(params: ProblemParams, alpha: float, cfg: IntegratorConfig) -> float:
    """Largest radius <= taylor_radius where the dropped quartic term is below tolerance.

    Both the value error |b| r^4 and the relative slope error 2|b| r^2/|a| are
    kept a decade below ``rel_tol``.
    """
    a, b = taylor_coefficients(params, alpha)
    r0 = cfg.taylor_radius
    if b != 0:
        scale = max(1.0, abs(alpha))
        r0 = min(r0, (0.1 * cfg.rel_tol * scale / abs(b)) ** 0.25)
        if a != 0:
            r0 = min(r0, math.sqrt(0.05 * cfg.rel_tol * abs(a) / abs(b)))
    return r0


def solve_profile(
    params: ProblemParams,
    alpha: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    start: Optional[float] = None,
) -> RadialProfile:
    """Integrate the profile with phi(0) = alpha, phi'(0) = 0 out to ``cfg.r_max``.

    The returned profile carries the integration status. Integration stops
    early with ``PositivityLost`` (recording the zero-crossing radius) when
    a power-type profile leaves its admissible range, ``RangeExceeded`` on
    overflow and ``StepFailure`` when the step size underflows or the step
    budget is exhausted.

    Parameters
    ----------
    start : float, optional
        Radius where the Taylor start hands over to the integrator. Chosen
        from the quartic Taylor coefficient when omitted.
    """
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise ValidationError("alpha must be finite")
    _check_admissible(params, alpha)
    if isinstance(params.nonlinearity, Power) and alpha <= 0:
        raise PositivityLost("power-type profile needs alpha > 0")

    N = params.dimension
    source = _scalar_source(params)
    r_s = start_radius(params, alpha, cfg) if start is None else float(start)
    if not 0 < r_s <= cfg.taylor_radius:
        raise ValidationError("start radius must lie in (0, taylor_radius]")
    v0, d0 = taylor_start(params, alpha, r_s, cfg.taylor_radius)

    def fun(r, y):
        return [y[1], -((N - 1) / r + 0.5 * r) * y[1] - source(y[0])]

    solver = DOP853(
        fun, r_s, [v0, d0], cfg.r_max,
        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
    )
    floor = positivity_floor(params)
    ts = [r_s]
    interpolants = []
    status = Status.CONVERGED
    r_end = cfg.r_max
    zero_crossing = None
    steps = 0
    while solver.status == "running":
        t_old = solver.t
        solver.step()
        if solver.status == "failed":
            status = Status.STEP_FAILURE
            r_end = t_old
            break
        steps += 1
        interp = solver.dense_output()
        y = solver.y
        if floor is not None and y[0] <= floor:
            zero_crossing = brentq(lambda t: interp(t)[0] - floor, t_old, solver.t, xtol=1e-14)
            ts.append(solver.t)
            interpolants.append(interp)
            status = Status.POSITIVITY_LOST
            r_end = zero_crossing
            break
        if not np.all(np.isfinite(y)) or abs(y[0]) > OVERFLOW_GUARD:
            status = Status.RANGE_EXCEEDED
            r_end = t_old
            break
        ts.append(solver.t)
        interpolants.append(interp)
        if steps >= cfg.max_steps and solver.status == "running":
            status = Status.STEP_FAILURE
            r_end = solver.t
            break

    dense = OdeSolution(ts, interpolants) if interpolants else None
    a, _ = taylor_coefficients(params, alpha)

    def evaluator(x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        value = alpha + a * x * x
        deriv = 2 * a * x
        outer = x >= r_s
        if dense is not None and np.any(outer):
            y = dense(np.minimum(x[outer], ts[-1]))
            value[outer] = y[0]
            deriv[outer] = y[1]
        if scalar:
            return value[0], deriv[0]
        return value, deriv

    r_top = min(r_end, ts[-1])
    if isinstance(cfg.output_grid, Uniform):
        grid = np.linspace(0.0, cfg.r_max, cfg.output_grid.count)
        grid = grid[grid < r_top]
        grid = np.append(grid, r_top)
    else:
        grid = np.concatenate(([0.0], [t for t in ts if t < r_top], [r_top]))
    grid = np.unique(grid)
    value, deriv = evaluator(grid)
    deriv[0] = 0.0
    return RadialProfile(grid, value, deriv, params, alpha, status, zero_crossing, evaluator)


def require_converged(profile: RadialProfile):
    if profile.status is not Status.CONVERGED:
        raise NonConvergedProfile(f"profile status is {profile.status.value}")


def _derivative_weights(offsets, order):
    """Batched finite-difference weights for the given derivative order.

    ``offsets`` has shape (m, k): node positions relative to each evaluation
    point. Solves the Vandermonde moment system for each row.
    """
    m, k = offsets.shape
    powers = np.arange(k)
    V = offsets[:, None, :] ** powers[None, :, None]  # (m, k, k)
    rhs_vec = np.zeros((m, k))
    rhs_vec[:, order] = math.factorial(order)
    return np.linalg.solve(V, rhs_vec[..., None])[..., 0]


def local_derivatives(r, values, half_width=3):
    """First and second derivatives by local polynomial fits on a sliding stencil.

    Returns arrays for interior points ``half_width .. len(r) - half_width - 1``
    together with their indices.
    """
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    k = 2 * half_width + 1
    idx = np.arange(half_width, r.size - half_width)
    cols = idx[:, None] + np.arange(-half_width, half_width + 1)[None, :]
    scale = (r[cols[:, -1]] - r[cols[:, 0]])[:, None]
    offsets = (r[cols] - r[idx][:, None]) / scale
    w1 = _derivative_weights(offsets, 1) / scale
    w2 = _derivative_weights(offsets, 2) / scale**2
    vals = values[cols]
    return idx, np.sum(w1 * vals, axis=1), np.sum(w2 * vals, axis=1)


def residual_profile(profile: RadialProfile, r_min: float = 0.0, r_max: float = math.inf):
    """Pointwise ODE residual at interior grid points inside [r_min, r_max].

    The first derivative is the stored derivative sample; the second
    derivative is a 7-point local polynomial derivative of the stored
    derivative samples.
    """
    if profile.r.size < 5:
        raise ValidationError("residual needs at least 5 grid points")
    half = 3 if profile.r.size >= 7 else 2
    idx, d2, _ = local_derivatives(profile.r, profile.derivative, half)
    r = profile.r[idx]
    keep = (r > 0) & (r >= r_min) & (r <= r_max)
    r, d2 = r[keep], d2[keep]
    d1 = profile.derivative[idx][keep]
    N = profile.params.dimension
    phi = profile.value[idx][keep]
    res = d2 + ((N - 1) / r + r / 2) * d1 + np.asarray(profile_source(profile.params, phi))
    return r, res


def residual(profile: RadialProfile, r_min: float = 0.0, r_max: float = math.inf) -> float:
    """Maximum absolute ODE residual over interior grid points."""
    _, res = residual_profile(profile, r_min, r_max)
    if res.size == 0:
        raise ValidationError("no interior grid points in the residual window")
    return float(np.max(np.abs(res)))
