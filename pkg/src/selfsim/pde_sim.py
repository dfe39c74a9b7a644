"""Method-of-lines simulation of the radial heat flow with exponential source.

Two forms are supported. The Cauchy form evolves

    u_t = u_rr + (N-1)/r u_r + f(u),

and the self-similar form, obtained from ``w(y, s) = log(1 + t) + u(x, t)``
with ``y = x / sqrt(1 + t)`` and ``s = log(1 + t)``, evolves

    w_s = w_yy + ((N-1)/y + y/2) w_y + G(w),

whose steady states are the radial profiles. Space is discretized on a
sinh-stretched grid that clusters points near the origin, with fourth-order
differences in the stretched coordinate; time is integrated with the
implicit Radau IIA method using the exact sparse Jacobian.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import Radau
from scipy.interpolate import RectBivariateSpline

from .core import (
    MissingBranch,
    ProblemParams,
    RadialProfile,
    Status,
    ValidationError,
    nonlinearity,
    nonlinearity_derivative,
    profile_source,
    profile_source_derivative,
)
from .radial_ode import IntegratorConfig, local_derivatives, residual, solve_profile

_EXP_CAP = 700.0


class Boundary(str, enum.Enum):
    ASYMPTOTIC_DIRICHLET = "AsymptoticDirichlet"
    NEUMANN = "Neumann"


@dataclass(frozen=True)
class SimConfig:
    """Discretization and stopping parameters for a simulation.

    ``s_max`` is the final self-similar time; Cauchy runs stop at ``t_max``.
    ``grid_stretch`` is the sinh clustering strength (0 gives a uniform grid).
    """

    grid_radius: float = 60.0
    grid_points: int = 4096
    grid_stretch: float = 6.0
    time_step_init: float = 1e-4
    blowup_threshold: float = 700.0
    s_max: float = 80.0
    t_max: float = 2.0
    boundary: Boundary = Boundary.ASYMPTOTIC_DIRICHLET
    rtol: float = 1e-8
    atol: float = 1e-8
    stationarity_tol: float = 1e-6
    min_step: float = 1e-14
    max_steps: int = 200_000
    snapshot_times: Tuple[float, ...] = ()
    growth_C: Optional[float] = None
    growth_epsilon: float = 1.0
    run_to_horizon: bool = False

    def __post_init__(self):
        if self.grid_points < 16:
            raise ValidationError("grid_points must be >= 16")
        if self.grid_radius <= 0 or self.blowup_threshold <= 0 or self.stationarity_tol <= 0:
            raise ValidationError("radius and thresholds must be positive")
        if self.s_max <= 0 or self.t_max <= 0 or self.time_step_init <= 0:
            raise ValidationError("time horizons and initial step must be positive")
        if self.grid_stretch < 0:
            raise ValidationError("grid_stretch must be nonnegative")
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "snapshot_times", tuple(float(s) for s in self.snapshot_times))


@dataclass(frozen=True)
class BlowUp:
    s_star: float
    reason: str = "threshold"
    label = "BlowUp"


@dataclass(frozen=True)
class Global:
    terminal_profile: RadialProfile
    stationarity: Optional[float] = None
    label = "Global"


@dataclass(frozen=True)
class Undecided:
    s_reached: float
    reason: str = "horizon"
    label = "Undecided"


Classification = Union[BlowUp, Global, Undecided]


@dataclass
class SimOutcome:
    """Result of one simulation.

    ``sup_history`` holds ``(s, max w)`` at every accepted step and
    ``ws_history`` holds ``(s, min w_s, max w_s)`` over the free nodes.
    """

    classification: Classification
    sup_history: List[Tuple[float, float]]
    ws_history: List[Tuple[float, float, float]]
    grid: np.ndarray
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)
    final_state: Optional[np.ndarray] = None
    steps: int = 0
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.classification.label


# --------------------------------------------------------------------------
# grid and operators


@dataclass(frozen=True)
class RadialGrid:
    y: np.ndarray
    dy: np.ndarray  # dy/dxi
    d2y: np.ndarray  # d2y/dxi2
    dxi: float

    @property
    def size(self) -> int:
        return self.y.size


def make_grid(radius: float, points: int, stretch: float = 4.0) -> RadialGrid:
    """Grid ``y = a sinh(b xi)`` on xi in [0, 1], uniform when ``stretch == 0``."""
    xi = np.linspace(0.0, 1.0, points)
    d = xi[1]
    if stretch > 0:
        a = radius / math.sinh(stretch)
        y = a * np.sinh(stretch * xi)
        dy = a * stretch * np.cosh(stretch * xi)
        d2y = a * stretch**2 * np.sinh(stretch * xi)
    else:
        y = radius * xi
        dy = np.full_like(xi, radius)
        d2y = np.zeros_like(xi)
    y[-1] = radius
    return RadialGrid(y, dy, d2y, d)


_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def radial_operator(grid: RadialGrid, N: int, drift: bool, neumann: bool = False) -> sp.csr_matrix:
    """Sparse matrix of ``w_yy + ((N-1)/y + [y/2]) w_y``.

    Fourth-order central differences in xi, even reflection through the
    origin (where the operator is ``N w_yy``), second order at the node next
    to the outer boundary. The last row is zero for Dirichlet data and uses a
    mirrored ghost node for a Neumann condition.
    """
    M = grid.size
    d = grid.dxi
    y, y1, y2 = grid.y, grid.dy, grid.d2y
    rows, cols, vals = [], [], []
    for k, off in enumerate(range(-2, 3)):
        rows.append(0)
        cols.append(abs(off))
        vals.append(N * _C2[k] / (d * d * y1[0] ** 2))
    j = np.arange(1, M - 2)
    g = (N - 1) / y[j] + (0.5 * y[j] if drift else 0.0)
    for k, off in enumerate(range(-2, 3)):
        v = _C2[k] / (d * d * y1[j] ** 2) + _C1[k] / (d * y1[j]) * (g - y2[j] / y1[j] ** 2)
        rows.extend(j.tolist())
        cols.extend(np.abs(j + off).tolist())
        vals.extend(v.tolist())
    jm = M - 2
    gm = (N - 1) / y[jm] + (0.5 * y[jm] if drift else 0.0)
    for off, c2, c1 in ((-1, 1.0, -0.5), (0, -2.0, 0.0), (1, 1.0, 0.5)):
        rows.append(jm)
        cols.append(jm + off)
        vals.append(c2 / (d * d * y1[jm] ** 2) + c1 / (d * y1[jm]) * (gm - y2[jm] / y1[jm] ** 2))
    if neumann:
        last = M - 1
        coef = 2.0 / (d * d * y1[last] ** 2)
        rows += [last, last]
        cols += [last - 1, last]
        vals += [coef, -coef]
    return sp.csr_matrix((vals, (rows, cols)), shape=(M, M))


def grid_derivative(grid: RadialGrid, w: np.ndarray) -> np.ndarray:
    """First radial derivative on the stretched grid (zero at the origin)."""
    M = grid.size
    d = grid.dxi
    ext = np.concatenate((w[2:0:-1], w))  # even reflection
    wx = np.empty(M)
    core = np.arange(0, M - 2)
    wx[core] = sum(_C1[k] * ext[core + 2 + off] for k, off in enumerate(range(-2, 3))) / d
    wx[M - 2] = (w[M - 1] - w[M - 3]) / (2 * d)
    wx[M - 1] = (3 * w[M - 1] - 4 * w[M - 2] + w[M - 3]) / (2 * d)
    out = wx / grid.dy
    out[0] = 0.0
    return out


def monotonicity_violation(outcome: SimOutcome, increasing: bool, skip_initial: bool = True) -> float:
    """Largest wrong-signed w_s over the recorded steps (0 when sign-uniform).

    The rate at s = 0 is skipped by default: for data with a kink it is a
    stencil artifact of the jump in slope rather than a pointwise rate.
    """
    hist = outcome.ws_history[1:] if skip_initial else outcome.ws_history
    if not hist:
        return 0.0
    if increasing:
        return float(max(0.0, -min(lo for _, lo, _ in hist)))
    return float(max(0.0, max(hi for _, _, hi in hist)))


# --------------------------------------------------------------------------
# growth condition


def validate_growth_condition(u0: RadialProfile, C: float, epsilon: float) -> bool:
    """Check ``-C exp(r^(2-eps)) <= u0 <= C`` at every grid point."""
    if C <= 0 or not 0 < epsilon < 2:
        raise ValidationError("need C > 0 and 0 < epsilon < 2")
    r = u0.r
    with np.errstate(over="ignore"):
        lower = -C * np.exp(r ** (2.0 - epsilon))
    v = u0.value
    return bool(np.all(v <= C) and np.all(v >= lower))


# --------------------------------------------------------------------------
# time stepping


def asymptotic_boundary_value(N: int, L: float, y: float) -> float:
    """Three-term far-field value ``-2 log y + L + (e^L - 2N + 4)/y^2``."""
    return -2.0 * math.log(y) + L + (math.exp(L) - 2 * N + 4) / y**2


def _profile_on_grid(profile: RadialProfile, grid: RadialGrid) -> np.ndarray:
    if profile.r_max < grid.y[-1] * (1 - 1e-12):
        raise ValidationError(
            f"initial data covers r <= {profile.r_max}, grid needs {grid.y[-1]}"
        )
    if profile.r[0] > 0:
        raise ValidationError("initial data must include the origin")
    return np.asarray(profile(np.minimum(grid.y, profile.r_max)), dtype=float)


def _evolve(w0, grid, A, source, dsource, cfg: SimConfig, horizon, dirichlet, stop_when_stationary):
    M = grid.size
    free = np.ones(M, dtype=bool)
    if dirichlet:
        free[-1] = False

    def fun(t, w):
        rate = A @ w + source(np.minimum(w, _EXP_CAP))
        if dirichlet:
            rate[-1] = 0.0
        return rate

    def jac(t, w):
        diag = dsource(np.minimum(w, _EXP_CAP))
        if dirichlet:
            diag = diag.copy()
            diag[-1] = 0.0
        return (A + sp.diags(diag)).tocsc()

    if dirichlet:
        A = A.tolil()
        A[M - 1, :] = 0
        A = A.tocsr()

    solver = Radau(fun, 0.0, w0, horizon, rtol=cfg.rtol, atol=cfg.atol, jac=jac,
                   first_step=min(cfg.time_step_init, horizon))
    snap_times = sorted(t for t in cfg.snapshot_times if 0 <= t <= horizon)
    snapshots = {}
    if snap_times and snap_times[0] == 0:
        snapshots[0.0] = w0.copy()
    sup0 = float(np.max(w0))
    sup_history = [(0.0, sup0)]
    rate0 = fun(0.0, w0)[free]
    ws_history = [(0.0, float(rate0.min()), float(rate0.max()))]
    steps = 0
    diagnostics = {"stationarity_tol": cfg.stationarity_tol}

    def finish(classification, state):
        return SimOutcome(classification, sup_history, ws_history, grid.y, snapshots,
                          state, steps, diagnostics)

    if stop_when_stationary and np.max(np.abs(rate0)) < cfg.stationarity_tol:
        return finish(("global", np.max(np.abs(rate0))), w0)

    while solver.status == "running":
        t_old = solver.t
        message = solver.step()
        if solver.status == "failed":
            diagnostics["solver_message"] = message
            return finish(("collapse", t_old), solver.y.copy() if solver.y is not None else None)
        steps += 1
        s, w = solver.t, solver.y
        for ts in snap_times:
            if t_old < ts <= s and ts not in snapshots:
                snapshots[ts] = solver.dense_output()(ts).copy()
        sup = float(np.max(w))
        sup_history.append((s, sup))
        rate = fun(s, w)[free]
        ws_history.append((s, float(rate.min()), float(rate.max())))
        if not np.all(np.isfinite(w)) or sup >= cfg.blowup_threshold:
            return finish(BlowUp(s, "threshold"), w.copy())
        if s - t_old < cfg.min_step:
            return finish(("collapse", s), w.copy())
        if stop_when_stationary and np.max(np.abs(rate)) < cfg.stationarity_tol:
            return finish(("global", float(np.max(np.abs(rate)))), w.copy())
        if steps >= cfg.max_steps:
            return finish(Undecided(s, "step budget"), w.copy())
    return finish(("horizon", solver.t), solver.y.copy())


def _rising(sup_history, window=5, gain=1.0) -> bool:
    sups = [v for _, v in sup_history]
    if len(sups) < window + 1:
        return False
    tail = sups[-(window + 1):]
    return all(b > a for a, b in zip(tail[:-1], tail[1:])) and sups[-1] > sups[0] + gain


def _terminal_profile(grid: RadialGrid, w: np.ndarray, params: ProblemParams) -> RadialProfile:
    dw = grid_derivative(grid, w)
    return RadialProfile(grid.y, w, dw, params, float(w[0]))


def _resolve(outcome: SimOutcome, grid: RadialGrid, params: ProblemParams, cauchy: bool) -> SimOutcome:
    c = outcome.classification
    if isinstance(c, tuple):
        tag, value = c
        if tag == "global":
            outcome.classification = Global(_terminal_profile(grid, outcome.final_state, params), value)
        elif tag == "collapse":
            if _rising(outcome.sup_history):
                outcome.classification = BlowUp(value, "step collapse with rising sup")
            else:
                outcome.classification = Undecided(value, "step collapse")
        elif tag == "horizon":
            final_rate = max(abs(outcome.ws_history[-1][1]), abs(outcome.ws_history[-1][2]))
            if not cauchy and final_rate < outcome.diagnostics["stationarity_tol"]:
                outcome.classification = Global(
                    _terminal_profile(grid, outcome.final_state, params), final_rate)
            elif cauchy and _bounded_and_settling(outcome.sup_history):
                outcome.classification = Global(
                    _terminal_profile(grid, outcome.final_state, params), None)
            else:
                outcome.classification = Undecided(value, "horizon")
    return outcome


def _bounded_and_settling(sup_history) -> bool:
    """Sup finite and nonincreasing over the last quarter of the run."""
    sups = np.array([v for _, v in sup_history])
    if sups.size < 4 or not np.all(np.isfinite(sups)):
        return False
    tail = sups[3 * sups.size // 4:]
    return bool(np.all(np.diff(tail) <= 1e-12))


def simulate_self_similar(
    w0: RadialProfile,
    params: ProblemParams,
    cfg: SimConfig = SimConfig(),
    boundary_value: Optional[float] = None,
    L: Optional[float] = None,
) -> SimOutcome:
    """Evolve radial data under the self-similar flow and classify the outcome.

    The outer boundary value is ``boundary_value`` when given, otherwise the
    far-field form for ``L`` when given, otherwise the initial value there.
    The run stops at blow-up (threshold or step collapse with rising sup),
    at stationarity (``max |w_s| < stationarity_tol``) or at ``s_max``.
    With ``cfg.run_to_horizon`` the stationarity stop is skipped and the
    state at ``s_max`` is classified instead.
    """
    grid = make_grid(cfg.grid_radius, cfg.grid_points, cfg.grid_stretch)
    w = _profile_on_grid(w0, grid)
    _check_growth(w0, cfg)
    if not np.all(np.isfinite(w)):
        raise ValidationError("initial data must be finite on the grid")
    dirichlet = cfg.boundary is Boundary.ASYMPTOTIC_DIRICHLET
    if dirichlet:
        if boundary_value is None and L is not None:
            boundary_value = asymptotic_boundary_value(params.dimension, L, grid.y[-1])
        if boundary_value is not None:
            w[-1] = boundary_value
    A = radial_operator(grid, params.dimension, drift=True, neumann=not dirichlet)
    source = lambda v: np.asarray(profile_source(params, v))
    dsource = lambda v: np.asarray(profile_source_derivative(params, v))
    out = _evolve(w, grid, A, source, dsource, cfg, cfg.s_max, dirichlet, not cfg.run_to_horizon)
    out.diagnostics["boundary_value"] = float(w[-1])
    return _resolve(out, grid, params, cauchy=False)


def simulate_cauchy(u0: RadialProfile, params: ProblemParams, cfg: SimConfig = SimConfig()) -> SimOutcome:
    """Evolve ``u_t = Delta u + f(u)`` from radial data up to ``t_max``.

    The outer boundary is frozen at its initial value (or reflecting for the
    Neumann option). Reaching ``t_max`` with a sup that is nonincreasing over
    the last quarter of the run counts as global existence.
    """
    grid = make_grid(cfg.grid_radius, cfg.grid_points, cfg.grid_stretch)
    u = _profile_on_grid(u0, grid)
    _check_growth(u0, cfg)
    dirichlet = cfg.boundary is Boundary.ASYMPTOTIC_DIRICHLET
    A = radial_operator(grid, params.dimension, drift=False, neumann=not dirichlet)
    source = lambda v: np.asarray(nonlinearity(params, v))
    dsource = lambda v: np.asarray(nonlinearity_derivative(params, v))
    out = _evolve(u, grid, A, source, dsource, cfg, cfg.t_max, dirichlet, False)
    return _resolve(out, grid, params, cauchy=True)


def _check_growth(u0: RadialProfile, cfg: SimConfig):
    if cfg.growth_C is not None and not validate_growth_condition(u0, cfg.growth_C, cfg.growth_epsilon):
        raise ValidationError(
            f"initial data violates the growth condition with C={cfg.growth_C}, eps={cfg.growth_epsilon}"
        )


# --------------------------------------------------------------------------
# change of variables


def to_self_similar(u: RadialProfile, t: float, grid=None, L: Optional[float] = None):
    """Map ``u(., t)`` to ``w(y) = log(1+t) + u(sqrt(1+t) y)`` and ``s = log(1+t)``.

    Without ``grid`` the w-grid is the u-grid divided by sqrt(1+t), so no
    interpolation is needed. With a grid, values come from the Hermite
    interpolant of u; radii beyond the u-grid are filled from the far-field
    form ``w ~ -2 log y + L`` when ``L`` is given and rejected otherwise.
    """
    if t < 0:
        raise ValidationError("t must be nonnegative")
    scale = math.sqrt(1.0 + t)
    s = math.log1p(t)
    if grid is None:
        y = u.r / scale
        value = s + u.value
        deriv = scale * u.derivative
        return RadialProfile(y, value, deriv, u.params, float(value[0])), s
    y = np.asarray(grid, dtype=float)
    x = scale * y
    inside = x <= u.r_max * (1 + 1e-12)
    if not np.all(inside) and L is None:
        raise ValidationError("w-grid reaches beyond the u-grid and no far-field constant was given")
    value = np.empty_like(y)
    deriv = np.empty_like(y)
    if np.any(inside):
        v, d = u.evaluate(np.minimum(x[inside], u.r_max))
        value[inside] = s + v
        deriv[inside] = scale * d
    if not np.all(inside):
        yo = y[~inside]
        value[~inside] = -2.0 * np.log(yo) + L
        deriv[~inside] = -2.0 / yo
    return RadialProfile(y, value, deriv, u.params, float(value[0])), s


def from_self_similar(w: RadialProfile, s: float, grid=None):
    """Inverse of :func:`to_self_similar`: returns ``(u, t)``."""
    t = math.expm1(s)
    scale = math.sqrt(1.0 + t)
    if grid is None:
        x = w.r * scale
        return RadialProfile(x, w.value - s, w.derivative / scale, w.params, float(w.value[0] - s)), t
    x = np.asarray(grid, dtype=float)
    y = x / scale
    if np.any(y > w.r_max * (1 + 1e-12)):
        raise ValidationError("u-grid reaches beyond the w-grid")
    v, d = w.evaluate(np.minimum(y, w.r_max))
    return RadialProfile(x, v - s, d / scale, w.params, float(v[0] - s)), t


# --------------------------------------------------------------------------
# solution records and the scaling check


@dataclass(frozen=True)
class SolutionRecord:
    """Radial space-time samples ``u[i, j] = u(x[j], t[i])``."""

    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    params: ProblemParams


def self_similar_record(profile: RadialProfile, x, t) -> SolutionRecord:
    """Record of ``u(x, t) = -log t + phi(x / sqrt t)``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    u = np.array([-math.log(ti) + profile(x / math.sqrt(ti)) for ti in t])
    return SolutionRecord(x, t, u, profile.params)


def record_from_outcome(outcome: SimOutcome, params: ProblemParams, t_offset: float = 0.0) -> SolutionRecord:
    times = sorted(outcome.snapshots)
    u = np.array([outcome.snapshots[ti] for ti in times])
    return SolutionRecord(outcome.grid, np.array(times) + t_offset, u, params)


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def scaling_invariance_check(record: SolutionRecord, lam: float, probes=None,
                             hx: float = 1e-2, ht: float = 1e-2) -> float:
    """Largest PDE residual of ``u_lam(x, t) = log lam^2 + u(lam x, lam^2 t)``.

    ``u`` is interpolated from the record by a bi-quintic spline; the residual
    ``d_t u_lam - d_rr u_lam - (N-1)/r d_r u_lam - f(u_lam)`` is formed with
    five-point central differences of steps ``hx`` and ``ht`` at each probe.
    Probes default to a 6 x 6 grid inside the region where both the probe
    and its rescaled image stay inside the record.
    """
    if lam <= 0:
        raise ValidationError("lambda must be positive")
    spline = RectBivariateSpline(record.t, record.x, record.u, kx=5, ky=5)
    N = record.params.dimension
    x_lo, x_hi = record.x[0], record.x[-1]
    t_lo, t_hi = record.t[0], record.t[-1]

    def covered(x, t):
        return (x_lo + 2 * hx <= x <= x_hi - 2 * hx) and (t_lo + 2 * ht <= t <= t_hi - 2 * ht)

    def u_lam(x, t):
        return 2.0 * math.log(lam) + spline(lam * lam * t, lam * x, grid=False)

    if probes is None:
        xa = max(x_lo, x_lo / lam) + 0.1 * (x_hi - x_lo) / max(lam, 1.0)
        xb = min(x_hi, x_hi / lam) * 0.9
        ta = max(t_lo, t_lo / lam**2) + 4 * ht / min(lam * lam, 1.0) + 2 * ht
        tb = min(t_hi, t_hi / lam**2) - 4 * ht / min(lam * lam, 1.0) - 2 * ht
        if not (xa < xb and ta < tb):
            raise ValidationError("record too small for the requested rescaling")
        probes = [(x, t) for x in np.linspace(xa, xb, 6) for t in np.linspace(ta, tb, 6)]
    worst = 0.0
    for x, t in probes:
        for dx in (-2 * hx, 2 * hx):
            for dt in (-2 * ht, 2 * ht):
                if not (covered(x + dx, t + dt) and covered(lam * (x + dx), lam * lam * (t + dt))):
                    raise ValidationError(f"probe ({x}, {t}) outside record coverage")
        if x <= 0:
            raise ValidationError("probes must have positive radius")
        offs = np.arange(-2, 3)
        ux = np.array([u_lam(x + k * hx, t) for k in offs])
        ut = np.array([u_lam(x, t + k * ht) for k in offs])
        d_t = _D1 @ ut / ht
        d_x = _D1 @ ux / hx
        d_xx = _D2 @ ux / hx**2
        res = d_t - d_xx - (N - 1) / x * d_x - float(nonlinearity(record.params, ux[2]))
        worst = max(worst, abs(float(res)))
    return worst


# --------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class ComparisonResult:
    ordered: bool
    first_violation: Optional[Tuple[float, float]]
    times: Tuple[float, ...]

    def __bool__(self):
        return self.ordered


def comparison_check(lower0: RadialProfile, upper0: RadialProfile, params: ProblemParams,
                     cfg: SimConfig = SimConfig(), slack: float = 1e-8, samples: int = 51) -> ComparisonResult:
    """Evolve two ordered data and test that the order persists.

    Both runs share the boundary value of ``upper0`` and are compared at
    ``cfg.snapshot_times`` (or ``samples`` evenly spaced times) until either
    run stops. Returns the first violating ``(y, s)`` when the order breaks.
    """
    grid = make_grid(cfg.grid_radius, cfg.grid_points, cfg.grid_stretch)
    lo = _profile_on_grid(lower0, grid)
    hi = _profile_on_grid(upper0, grid)
    if np.any(lo > hi + slack):
        raise ValidationError("lower0 must not exceed upper0")
    times = cfg.snapshot_times or tuple(np.linspace(0.0, cfg.s_max, samples))
    # run both to the horizon so that stationary data are compared over time
    run_cfg = _replace(cfg, snapshot_times=times, run_to_horizon=True)
    # Both runs see the same boundary data so that the comparison is fair.
    b = float(min(lo[-1], hi[-1]))
    a = simulate_self_similar(lower0, params, run_cfg, boundary_value=b)
    c = simulate_self_similar(upper0, params, run_cfg, boundary_value=float(hi[-1]))
    common = sorted(set(a.snapshots) & set(c.snapshots))
    for s in common:
        gap = a.snapshots[s] - c.snapshots[s]
        j = int(np.argmax(gap))
        if gap[j] > slack:
            return ComparisonResult(False, (float(grid.y[j]), float(s)), tuple(common))
    return ComparisonResult(True, None, tuple(common))


def _replace(cfg: SimConfig, **changes) -> SimConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


# --------------------------------------------------------------------------
# dichotomy


@dataclass(frozen=True)
class DichotomyRow:
    epsilon: float
    classification: str
    s_star: Optional[float]
    terminal_residual: Optional[float]
    between_branches: Optional[bool]
    outcome: SimOutcome = field(repr=False, compare=False)


@dataclass(frozen=True)
class DichotomyResult:
    N: int
    L_target: float
    t0: float
    alpha_minimal: float
    alpha_nonminimal: float
    rows: List[DichotomyRow]

    def to_csv(self, path):
        from .io import write_rows

        write_rows(path, ["epsilon", "classification", "s_star", "terminal_residual", "between_branches"],
                   [(r.epsilon, r.classification, r.s_star, r.terminal_residual, r.between_branches)
                    for r in self.rows])


def auto_level(diagram) -> float:
    """A level crossed by two branches: midway between the first turning value and the next extreme.

    The next extreme is the following turning value or, without one, the
    value at the end of the scanned window.

    Raises
    ------
    MissingBranch
        When the scanned L(alpha) has no turning point.
    """
    if not diagram.critical_values:
        raise MissingBranch("L(alpha) is monotone on the scanned window; no non-minimal branch")
    first = diagram.critical_values[0]
    if len(diagram.critical_values) > 1:
        other = diagram.critical_values[1]
    else:
        tail = [r.L for r in diagram.records if r.L is not None and r.alpha > diagram.critical_points[0]]
        if not tail:
            raise MissingBranch("no samples beyond the turning point")
        other = tail[-1]
    return 0.5 * (first + other)


def branch_pair(params: ProblemParams, L_target: float, diagram, icfg: IntegratorConfig = IntegratorConfig()):
    """Minimal and first non-minimal profiles with asymptotic constant ``L_target``."""
    from .shooting import solve_S_L

    roots = solve_S_L(params, L_target, diagram, cfg=icfg)
    if len(roots) < 2:
        raise MissingBranch(f"only {len(roots)} profile(s) with L = {L_target} in the window")
    cfg = _replace(icfg, r_max=max(icfg.r_max, 62.0))
    return solve_profile(params, roots[0], cfg), solve_profile(params, roots[1], cfg)


def dichotomy_experiment(
    N: int,
    L_target: float,
    t0: float,
    epsilons: Sequence[float],
    cfg: SimConfig = SimConfig(),
    diagram=None,
    icfg: IntegratorConfig = IntegratorConfig(),
    scan_range=(-2.0, 8.0, 201),
    between_slack: float = 1e-4,
    jobs: Optional[int] = None,
) -> DichotomyResult:
    """Perturb the non-minimal profile by each epsilon and classify the flow.

    The self-similar data ``phi_L + eps`` correspond to the Cauchy data
    ``u_L(., t0) + eps`` for any ``t0``, so ``t0`` is only recorded. The
    boundary is pinned to ``phi_L`` at the domain edge.
    """
    from .shooting import scan_alpha

    if not 3 <= N <= 9:
        raise ValidationError("the dichotomy needs 3 <= N <= 9")
    if t0 <= 0:
        raise ValidationError("t0 must be positive")
    params = ProblemParams(N)
    if diagram is None:
        diagram = scan_alpha(params, *scan_range, cfg=icfg, jobs=jobs)
    minimal, phi_L = branch_pair(params, L_target, diagram, icfg)
    edge = float(phi_L(cfg.grid_radius))
    grid = make_grid(cfg.grid_radius, cfg.grid_points, cfg.grid_stretch)
    # sample on the simulation grid in this process; the samples pickle cheaply
    v, d = phi_L.evaluate(grid.y)
    tasks = [(RadialProfile(grid.y, v + eps, d, params, float(v[0] + eps)), params, cfg, edge)
             for eps in map(float, epsilons)]
    if jobs and jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_row, tasks))
    else:
        outcomes = [_run_row(t) for t in tasks]
    rows = [_dichotomy_row(float(eps), out, minimal, phi_L, cfg, between_slack)
            for eps, out in zip(epsilons, outcomes)]
    return DichotomyResult(N, float(L_target), float(t0), minimal.alpha, phi_L.alpha, rows)


def _run_row(task) -> SimOutcome:
    w0, params, cfg, edge = task
    return simulate_self_similar(w0, params, cfg, boundary_value=edge)


def _dichotomy_row(eps, out, minimal, phi_L, cfg, slack) -> DichotomyRow:
    c = out.classification
    if isinstance(c, Global):
        prof = c.terminal_profile
        res = residual(prof, r_min=0.0, r_max=cfg.grid_radius)
        y = prof.r
        between = bool(np.all(prof.value >= minimal(y) - slack) and np.all(prof.value <= phi_L(y) + slack))
        return DichotomyRow(eps, c.label, None, res, between, out)
    if isinstance(c, BlowUp):
        return DichotomyRow(eps, c.label, c.s_star, None, None, out)
    return DichotomyRow(eps, c.label, c.s_reached, None, None, out)


# --------------------------------------------------------------------------
# transport check


def transport_error(phi_L: RadialProfile, cfg: SimConfig = SimConfig(), t0: float = 1.0,
                    window: Optional[float] = None) -> Tuple[float, SimOutcome]:
    """Max deviation of the Cauchy run from ``-log(t0+t) + phi_L(r/sqrt(t0+t))`` at ``t_max``.

    Starts from ``u_L(., t0)``. ``window`` restricts the comparison to
    ``r <= window``.
    """
    grid = make_grid(cfg.grid_radius, cfg.grid_points, cfg.grid_stretch)
    u0 = phi_L.resampled(np.minimum(grid.y / math.sqrt(t0), phi_L.r_max))
    u0 = RadialProfile(grid.y, u0.value - math.log(t0), u0.derivative / math.sqrt(t0),
                       phi_L.params, u0.value[0] - math.log(t0))
    out = simulate_cauchy(u0, phi_L.params, _replace(cfg, snapshot_times=(cfg.t_max,)))
    if cfg.t_max not in out.snapshots:
        return math.inf, out
    T = t0 + cfg.t_max
    exact = -math.log(T) + phi_L(grid.y / math.sqrt(T))
    err = np.abs(out.snapshots[cfg.t_max] - exact)
    if window is not None:
        err = err[grid.y <= window]
    return float(np.max(err)), out
