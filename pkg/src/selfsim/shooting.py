"""Shooting over the central value: the map alpha -> L(alpha) and its level sets.

A profile started at phi(0) = alpha belongs to the level set of L when
``2 log r + phi(r) -> L``. Scanning alpha reveals the turning points of the
map, which is where several profiles share the same L; solving
``L(alpha) = L_target`` between them enumerates those profiles.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .asymptotics import estimate_L_integral, estimate_L_tail
from .core import (
    FitDiverged,
    NoBracket,
    ProblemParams,
    RadialProfile,
    SolverError,
    Status,
    ValidationError,
)
from .radial_ode import IntegratorConfig, solve_profile

CONSISTENCY_TOL = 1e-5


@dataclass(frozen=True)
class ShootingRecord:
    alpha: float
    L_tail: Optional[float]
    L_integral: Optional[float]
    status: Status
    branch_id: Optional[int] = None
    consistency_tol: float = CONSISTENCY_TOL
    fit_error: Optional[float] = None

    @property
    def L(self) -> Optional[float]:
        return self.L_tail

    @property
    def consistent(self) -> bool:
        if self.L_tail is None or self.L_integral is None:
            return True
        return abs(self.L_tail - self.L_integral) <= self.consistency_tol


@dataclass(frozen=True)
class BranchDiagram:
    records: List[ShootingRecord]
    critical_points: List[float]
    params: ProblemParams
    critical_values: List[float] = field(default_factory=list)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([rec.alpha for rec in self.records])

    @property
    def L_values(self) -> np.ndarray:
        return np.array([math.nan if rec.L is None else rec.L for rec in self.records])

    def to_csv(self, path):
        from .io import write_rows

        write_rows(
            path, ["alpha", "L_tail", "L_integral", "status"],
            [(r.alpha, r.L_tail, r.L_integral, r.status) for r in self.records],
        )


def shoot(params: ProblemParams, alpha: float, cfg: IntegratorConfig) -> ShootingRecord:
    """Integrate one profile and estimate its asymptotic constant both ways."""
    try:
        profile = solve_profile(params, alpha, cfg)
    except SolverError:
        return ShootingRecord(float(alpha), None, None, Status.POSITIVITY_LOST)
    if profile.status is not Status.CONVERGED:
        return ShootingRecord(float(alpha), None, None, profile.status)
    try:
        fit = estimate_L_tail(profile)
    except FitDiverged as exc:
        return ShootingRecord(float(alpha), None, None, Status.FIT_DIVERGED, fit_error=exc.fit_error)
    try:
        L_int = estimate_L_integral(profile)
    except SolverError:
        L_int = None
    return ShootingRecord(float(alpha), fit.L, L_int, Status.CONVERGED, fit_error=fit.fit_error)


def _shoot_args(args):
    return shoot(*args)


def _map(func, items, jobs):
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * jobs))))


def find_critical_points(alphas, values):
    """Turning points of a sampled function from sign changes of its differences.

    Each sign change between consecutive finite differences is refined by the
    vertex of the parabola through the three surrounding samples. Returns
    (locations, values).
    """
    alphas = np.asarray(alphas, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    a, v = alphas[ok], values[ok]
    if a.size < 3:
        return [], []
    d = np.diff(v)
    sign = np.sign(d)
    # carry a sign through exact ties so a flat step is not read as a turn
    for i in range(1, sign.size):
        if sign[i] == 0:
            sign[i] = sign[i - 1]
    locs, vals = [], []
    for i in range(1, sign.size):
        if sign[i] != 0 and sign[i - 1] != 0 and sign[i] != sign[i - 1]:
            x0, x1, x2 = a[i - 1], a[i], a[i + 1]
            y0, y1, y2 = v[i - 1], v[i], v[i + 1]
            denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
            A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
            B = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
            C = y1 - A * x1**2 - B * x1
            x = -B / (2 * A) if A != 0 else x1
            if not x0 < x < x2:
                x = x1
            locs.append(float(x))
            vals.append(float(A * x * x + B * x + C))
    return locs, vals


def scan_alpha(
    params: ProblemParams,
    alpha_min: float,
    alpha_max: float,
    count: int,
    cfg: IntegratorConfig = IntegratorConfig(),
    jobs: Optional[int] = None,
) -> BranchDiagram:
    """Shoot on a uniform alpha grid and locate the turning points of L(alpha).

    Records are returned in ascending alpha. Each record is labelled with the
    index of the monotone stretch of L(alpha) it lies on.
    """
    if not alpha_min < alpha_max:
        raise ValidationError("need alpha_min < alpha_max")
    if count < 3:
        raise ValidationError("need at least 3 scan points")
    alphas = np.linspace(alpha_min, alpha_max, int(count))
    records = _map(_shoot_args, [(params, float(a), cfg) for a in alphas], jobs)
    values = np.array([math.nan if r.L is None else r.L for r in records])
    crit, crit_vals = find_critical_points(alphas, values)
    labelled = []
    for rec in records:
        bid = None
        if rec.L is not None:
            bid = int(sum(1 for c in crit if c < rec.alpha))
        labelled.append(ShootingRecord(
            rec.alpha, rec.L_tail, rec.L_integral, rec.status, bid,
            rec.consistency_tol, rec.fit_error,
        ))
    return BranchDiagram(labelled, crit, params, crit_vals)


def level_function(params: ProblemParams, cfg: IntegratorConfig):
    """alpha -> L(alpha) via the tail fit; NaN where no limit exists."""

    def L_of(alpha):
        try:
            profile = solve_profile(params, alpha, cfg)
            if profile.status is not Status.CONVERGED:
                return math.nan
            return estimate_L_tail(profile).L
        except SolverError:
            return math.nan

    return L_of


def solve_S_L(
    params: ProblemParams,
    L_target: float,
    diagram: BranchDiagram,
    tol: float = 1e-8,
    cfg: IntegratorConfig = IntegratorConfig(),
    xtol: float = 1e-12,
) -> List[float]:
    """All central values alpha in the scanned window with L(alpha) = L_target.

    Every sign change of ``L - L_target`` between neighbouring scan records
    is refined by Brent's method (bisection safeguarded secant and inverse
    quadratic steps). Roots closer than ``100 * xtol`` are merged.

    Raises
    ------
    NoBracket
        When no neighbouring pair of records brackets the target.
    SolverError
        When a refined root misses the target by more than ``tol``.
    """
    L_of = level_function(params, cfg)
    recs = [r for r in diagram.records if r.L is not None]
    roots = []
    for lo, hi in zip(recs[:-1], recs[1:]):
        f_lo, f_hi = lo.L - L_target, hi.L - L_target
        if f_lo == 0.0:
            roots.append(lo.alpha)
            continue
        if f_lo * f_hi < 0:
            g = lambda a: L_of(a) - L_target
            root = brentq(g, lo.alpha, hi.alpha, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
            roots.append(float(root))
    if recs and recs[-1].L - L_target == 0.0:
        roots.append(recs[-1].alpha)
    if not roots:
        raise NoBracket(f"L = {L_target} is not bracketed by the scan")
    roots.sort()
    merged = [roots[0]]
    for a in roots[1:]:
        if a - merged[-1] > 100 * xtol:
            merged.append(a)
    for a in merged:
        miss = abs(L_of(a) - L_target)
        if not miss < tol:
            raise SolverError(f"root alpha={a} misses L_target by {miss:.3g} (tol {tol:g})")
    return merged


@dataclass(frozen=True)
class MinimalityResult:
    minimal_index: int
    pointwise_ordered: bool
    common_range: tuple
    max_excess: float


def classify_minimal(
    solutions: Sequence[RadialProfile],
    L_tol: float = 1e-6,
    slack: float = 1e-9,
) -> MinimalityResult:
    """Identify the profile lowest at the origin and test whether it lies below the rest.

    Comparison uses grid points shared by all profiles, restricted to the
    common radial range. ``max_excess`` is the largest amount by which the
    candidate exceeds another profile there (0 when ordered).
    """
    if not solutions:
        raise ValidationError("need at least one profile")
    if len(solutions) > 1:
        Ls = []
        for prof in solutions:
            Ls.append(estimate_L_tail(prof).L)
        if max(Ls) - min(Ls) > L_tol:
            raise ValidationError(f"profiles have mismatched L (spread {max(Ls) - min(Ls):.3g})")
    idx = int(np.argmin([prof.alpha for prof in solutions]))
    lo = max(prof.r[0] for prof in solutions)
    hi = min(prof.r_max for prof in solutions)
    base = solutions[idx]
    grid = base.r[(base.r >= lo) & (base.r <= hi)]
    excess = 0.0
    for j, prof in enumerate(solutions):
        if j == idx:
            continue
        diff = base(grid) - prof(grid)
        excess = max(excess, float(np.max(diff)))
    excess = max(excess, 0.0)
    return MinimalityResult(idx, excess <= slack, (float(lo), float(hi)), excess)


def _overlap(a: RadialProfile, b: RadialProfile, r_interval):
    lo = max(r_interval[0], a.r[0], b.r[0])
    hi = min(r_interval[1], a.r_max, b.r_max)
    if not lo < hi:
        raise ValidationError("profiles do not overlap on the requested interval")
    grid = np.union1d(a.r, b.r)
    grid = grid[(grid > lo) & (grid < hi)]
    return np.concatenate(([lo], grid, [hi]))


def count_sign_changes(a: RadialProfile, b: RadialProfile, r_interval, tol: float = 1e-8) -> int:
    """Number of sign changes of a - b on the interval.

    Differences within ``tol`` of zero are treated as contact, not as a sign,
    so two profiles that agree to roundoff in their tails are not counted as
    oscillating.
    """
    grid = _overlap(a, b, r_interval)
    d = a(grid) - b(grid)
    s = np.where(np.abs(d) > tol, np.sign(d), 0.0)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
