"""Convergence of power-approximation profiles to the exponential profile.

Replacing e^u by (1 + u/n)^n gives a family of power-type profile equations.
For a fixed central value the approximating profiles converge to the
exponential one uniformly on bounded intervals, and their asymptotic
constants converge as well. This module measures both.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .asymptotics import estimate_L_integral, estimate_L_tail
from .core import (
    Exponential,
    FitDiverged,
    PowerApprox,
    ProblemParams,
    SolverError,
    Status,
    ValidationError,
)
from .radial_ode import IntegratorConfig, solve_profile

SUP_GRID_POINTS = 5001
MEMBERSHIP_FIT_TOL = 1e-4


@dataclass(frozen=True)
class ConvergenceEntry:
    n: int
    sup_diff: float
    L_n: Optional[float]
    L_n_err: Optional[float]
    L_n_integral: Optional[float]
    status: Status
    fit_error: Optional[float]
    psi_min: float


@dataclass(frozen=True)
class ConvergenceReport:
    alpha: float
    r0: float
    entries: List[ConvergenceEntry]
    L_limit: float
    dimension: int

    def entry(self, n: int) -> ConvergenceEntry:
        for e in self.entries:
            if e.n == n:
                return e
        raise KeyError(f"no entry for n={n}")

    def to_csv(self, path):
        from .io import write_rows

        write_rows(path, ["n", "sup_diff", "L_n", "L_n_err"],
                   [(e.n, e.sup_diff, e.L_n, e.L_n_err) for e in self.entries])


def smallest_admissible_order(alpha: float) -> int:
    """Smallest n >= 2 with n + alpha > 0."""
    return max(2, math.floor(-alpha) + 1)


def _entry(args) -> ConvergenceEntry:
    N, alpha, n, r0, cfg, L_limit, grid, reference = args
    params = ProblemParams(N, PowerApprox(n))
    profile = solve_profile(params, alpha, cfg)
    top = min(r0, profile.r_max)
    g = grid[grid <= top]
    sup_diff = float(np.max(np.abs(profile(g) - reference[: g.size])))
    psi_min = float(np.min(profile.psi))
    L_n = L_err = L_int = fit_error = None
    status = profile.status
    if status is Status.CONVERGED:
        try:
            fit = estimate_L_tail(profile)
            L_n, fit_error = fit.L, fit.fit_error
            L_err = abs(L_n - L_limit)
            L_int = estimate_L_integral(profile)
        except FitDiverged as exc:
            status, fit_error = Status.FIT_DIVERGED, exc.fit_error
    return ConvergenceEntry(n, sup_diff, L_n, L_err, L_int, status, fit_error, psi_min)


def convergence_report(
    N: int,
    alpha: float,
    ns: Sequence[int],
    r0: float = 5.0,
    cfg: IntegratorConfig = IntegratorConfig(),
    jobs: Optional[int] = None,
) -> ConvergenceReport:
    """Compare power-approximation profiles with the exponential profile.

    ``sup_diff`` is the maximum difference on a shared uniform grid over
    [0, r0]; ``L_n_err`` is the distance of the tail-fit constant from the
    exponential one. Entries whose profile loses positivity are kept with
    their status and without asymptotic constants.
    """
    if not ns:
        raise ValidationError("need at least one approximation order")
    n_min = smallest_admissible_order(alpha)
    for n in ns:
        if n < n_min:
            raise ValidationError(f"order n={n} needs n + alpha > 0 and n >= 2 (smallest {n_min})")
    if not 0 < r0 <= cfg.r_max:
        raise ValidationError("need 0 < r0 <= r_max")
    exact = solve_profile(ProblemParams(N, Exponential()), alpha, cfg)
    if exact.status is not Status.CONVERGED:
        raise SolverError(f"exponential profile did not converge ({exact.status.value})")
    L_limit = estimate_L_tail(exact).L
    grid = np.linspace(0.0, r0, SUP_GRID_POINTS)
    reference = exact(grid)
    tasks = [(N, float(alpha), int(n), float(r0), cfg, L_limit, grid, reference)
             for n in sorted(set(int(n) for n in ns))]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_entry, tasks))
    else:
        entries = [_entry(t) for t in tasks]
    return ConvergenceReport(float(alpha), float(r0), entries, L_limit, N)


def _member(n, status, L_n, psi_min, fit_error) -> bool:
    if status is not Status.CONVERGED or L_n is None or not psi_min > 0:
        return False
    if fit_error is None or fit_error >= MEMBERSHIP_FIT_TOL:
        return False
    return L_n + n > 0


def profile_membership(profile) -> bool:
    """Membership test of :func:`verify_membership` for a single solved profile."""
    f = profile.params.nonlinearity
    if not isinstance(f, PowerApprox):
        raise ValidationError("membership is defined for power-approximation profiles")
    if profile.status is not Status.CONVERGED:
        return False
    try:
        fit = estimate_L_tail(profile)
    except FitDiverged:
        return False
    return _member(f.n, profile.status, fit.L, float(np.min(profile.psi)), fit.fit_error)


def verify_membership(n: int, alpha: float, report: ConvergenceReport) -> bool:
    """Whether psi = phi + n is a positive profile with a finite rescaled limit.

    Requires a converged entry with positive psi on the whole range, a tail
    fit error below 1e-4 and a positive limit L_n + n.
    """
    if report.alpha != alpha:
        raise ValidationError(f"report is for alpha={report.alpha}, not {alpha}")
    e = report.entry(n)
    return _member(n, e.status, e.L_n, e.psi_min, e.fit_error)
