"""Glued radial super- and subsolutions and their weak-form test.

Two solutions of the profile equation that cross at a radius R can be joined
there: the result is a weak supersolution when the slope drops across R
(inner'(R) >= outer'(R)) and a weak subsolution when it rises. The weak
inequality is probed with a finite family of smooth nonnegative bumps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .core import (
    DerivativeOrderViolated,
    MatchingViolated,
    NoCrossing,
    ProblemParams,
    RadialProfile,
    SolverError,
    Status,
    ValidationError,
    profile_source,
)
from .radial_ode import IntegratorConfig, solve_profile

MATCH_TOL = 1e-9
STANDARD_CENTERS = (0.5, 1.0, 2.0, 4.0, 8.0)
STANDARD_WIDTHS = (0.25, 0.5, 1.0)


class Kind(str, enum.Enum):
    SUPERSOLUTION = "Supersolution"
    SUBSOLUTION = "Subsolution"


@dataclass(frozen=True)
class TestBump:
    """Nonnegative C^2 bump ``(1 - x^2)^3`` with ``x = (r - center)/width``.

    The bump is reflected through the origin, so a bump touching r = 0 is an
    even function of r and therefore a smooth radial test function.
    """

    __test__ = False  # not a pytest class

    center: float
    width: float

    def __post_init__(self):
        if self.center < 0 or self.width <= 0:
            raise ValidationError("bump needs center >= 0 and width > 0")

    @property
    def support(self) -> Tuple[float, float]:
        return max(0.0, self.center - self.width), self.center + self.width

    def _parts(self, r, sign):
        x = (sign * r - self.center) / self.width
        inside = np.abs(x) < 1
        q = np.where(inside, 1 - x * x, 0.0)
        b0 = q**3
        b1 = -6 * x * q**2 / self.width * sign
        b2 = (24 * x * x * q - 6 * q**2) / self.width**2
        return b0, b1, b2

    def derivatives(self, r):
        """(eta, eta', eta'') at radii r."""
        r = np.asarray(r, dtype=float)
        a0, a1, a2 = self._parts(r, 1.0)
        c0, c1, c2 = self._parts(r, -1.0)
        return a0 + c0, a1 + c1, a2 + c2

    def __call__(self, r):
        return self.derivatives(r)[0]


def standard_bumps(glue_radius: Optional[float] = None) -> List[TestBump]:
    """Fixed test family, plus three bumps straddling the glue radius if given."""
    bumps = [TestBump(c, w) for c in STANDARD_CENTERS for w in STANDARD_WIDTHS]
    if glue_radius is not None:
        bumps += [TestBump(glue_radius, w) for w in STANDARD_WIDTHS]
    return bumps


@dataclass(frozen=True)
class GluedProfile:
    inner: RadialProfile
    outer: RadialProfile
    glue_radius: float
    kind: Kind

    @property
    def params(self) -> ProblemParams:
        return self.inner.params

    @property
    def r_max(self) -> float:
        return min(self.inner.r_max, self.outer.r_max)

    def evaluate(self, r):
        """(value, derivative) with the inner piece up to the glue radius."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        value = np.empty_like(r)
        deriv = np.empty_like(r)
        left = r <= self.glue_radius
        if np.any(left):
            value[left], deriv[left] = self.inner.evaluate(r[left])
        if np.any(~left):
            value[~left], deriv[~left] = self.outer.evaluate(r[~left])
        if scalar:
            return float(value[0]), float(deriv[0])
        return value, deriv

    def __call__(self, r):
        return self.evaluate(r)[0]

    def sample(self, grid=None) -> RadialProfile:
        """The glued function as a profile on a grid containing the glue radius."""
        if grid is None:
            grid = np.union1d(self.inner.r[self.inner.r <= self.glue_radius],
                              self.outer.r[self.outer.r >= self.glue_radius])
        grid = np.union1d(np.asarray(grid, dtype=float), [self.glue_radius])
        grid = grid[grid <= self.r_max]
        value, deriv = self.evaluate(grid)

        def evaluator(x):
            return self.evaluate(x)

        return RadialProfile(grid, value, deriv, self.params, self.inner.alpha,
                             Status.CONVERGED, None, evaluator)

    def to_csv(self, path):
        from .io import format_float

        prof = self.sample()
        prof.to_csv(path, header_lines=[
            f"glue_radius={format_float(self.glue_radius)},kind={self.kind.value}"
        ])


def find_crossing(moving: RadialProfile, fixed: RadialProfile, search) -> float:
    """First radius in ``search`` where ``moving - fixed`` changes sign.

    The sign change is located on the union of both grids and refined by
    bisection-safeguarded root finding to 1e-12.
    """
    lo = max(search[0], moving.r[0], fixed.r[0])
    hi = min(search[1], moving.r_max, fixed.r_max)
    if not lo < hi:
        raise NoCrossing("search interval does not overlap both profiles")
    grid = np.union1d(moving.r, fixed.r)
    grid = np.concatenate(([lo], grid[(grid > lo) & (grid < hi)], [hi]))
    d = moving(grid) - fixed(grid)
    start = d[0]
    if start == 0:
        # begin at the first point where the difference is nonzero
        nz = np.flatnonzero(d != 0)
        if nz.size == 0:
            raise NoCrossing("profiles coincide on the search interval")
        start = d[nz[0]]
    flips = np.flatnonzero(np.sign(d) == -np.sign(start))
    if flips.size == 0:
        raise NoCrossing("difference keeps one sign on the search interval")
    j = flips[0]
    a, b = grid[j - 1], grid[j]
    if d[j] == 0:
        return float(b)
    g = lambda x: moving(x) - fixed(x)
    return float(brentq(g, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps))


def glue(inner: RadialProfile, outer: RadialProfile, r_star: float, kind,
         value_tol: float = MATCH_TOL) -> GluedProfile:
    """Join ``inner`` on [0, r_star] to ``outer`` beyond, checking the kink direction."""
    kind = Kind(kind)
    if not 0 < r_star < min(inner.r_max, outer.r_max):
        raise ValidationError("glue radius must lie inside both profiles")
    vi, di = inner.evaluate(r_star)
    vo, do = outer.evaluate(r_star)
    if abs(vi - vo) > value_tol:
        raise MatchingViolated(f"values differ by {abs(vi - vo):.3g} at r={r_star}")
    if kind is Kind.SUPERSOLUTION and di < do:
        raise DerivativeOrderViolated(f"supersolution needs inner' >= outer' ({di} < {do})")
    if kind is Kind.SUBSOLUTION and di > do:
        raise DerivativeOrderViolated(f"subsolution needs inner' <= outer' ({di} > {do})")
    return GluedProfile(inner, outer, float(r_star), kind)


def weak_residual(phi, params: ProblemParams, bump: TestBump, breakpoints=()) -> float:
    """Radial weak form of the profile operator tested against one bump.

    Computes the integral of
    ``[phi (eta'' + (N-1)/r eta' - r/2 eta' - N/2 eta) + G(phi) eta] r^(N-1)``
    over the bump support, where ``phi`` is a callable.
    """
    N = params.dimension
    lo, hi = bump.support

    def integrand(r):
        e0, e1, e2 = bump.derivatives(r)
        lap = e2 + ((N - 1) / r) * e1 if r > 0 else N * e2
        val = phi(r)
        return (val * (lap - 0.5 * r * e1 - 0.5 * N * e0)
                + float(profile_source(params, val)) * e0) * r ** (N - 1)

    edges = [lo, *sorted(b for b in breakpoints if lo < b < hi), hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = quad(integrand, a, b, epsabs=1e-12, epsrel=1e-11, limit=400)
        if not math.isfinite(val) or err > 1e-7:
            raise SolverError(f"quadrature failed on [{a}, {b}]")
        total += val
    return total


@dataclass(frozen=True)
class WeakCheck:
    worst_value: float
    passed: bool
    values: Tuple[float, ...]


def weak_inequality_check(glued, params: ProblemParams, bumps: Sequence[TestBump],
                          tol: float = 1e-6) -> WeakCheck:
    """Test the weak super/subsolution inequality on each bump.

    A supersolution must give values <= tol, a subsolution values >= -tol.
    ``worst_value`` is the largest value for supersolutions and the smallest
    for subsolutions. A plain profile may be passed and is tested as a
    supersolution.
    """
    if isinstance(glued, GluedProfile):
        phi, kind, breaks, r_max = glued, glued.kind, (glued.glue_radius,), glued.r_max
    else:
        phi, kind, breaks, r_max = glued, Kind.SUPERSOLUTION, (), glued.r_max
    values = []
    for bump in bumps:
        if bump.support[1] > r_max:
            raise ValidationError(f"bump {bump} leaves the profile range")
        values.append(weak_residual(phi, params, bump, breaks + (bump.center,)))
    values = tuple(values)
    if kind is Kind.SUPERSOLUTION:
        worst = max(values)
        passed = worst <= tol
    else:
        worst = min(values)
        passed = worst >= -tol
    return WeakCheck(float(worst), bool(passed), values)


@dataclass(frozen=True)
class GluedConstruction:
    glued: GluedProfile
    alpha: float
    delta: float
    envelope_radius: float


def _construct(reference: RadialProfile, margin: float, kind: Kind, cfg: IntegratorConfig,
               delta0: Optional[float], max_halvings: int) -> GluedConstruction:
    params = reference.params
    alpha_ref = reference.alpha
    sign = -1.0 if kind is Kind.SUPERSOLUTION else 1.0
    delta = margin / 2 if delta0 is None else delta0
    last_error = None
    for _ in range(max_halvings):
        alpha = alpha_ref + sign * delta
        inner = solve_profile(params, alpha, cfg)
        try:
            r_star = find_crossing(inner, reference, (0.0, min(inner.r_max, reference.r_max)))
            glued = glue(inner, reference, r_star, kind)
        except (NoCrossing, ValidationError) as exc:
            last_error = exc
            delta /= 2
            continue
        grid = inner.r[inner.r <= r_star]
        gap = inner(grid) - reference(grid)
        # envelope: the inner piece stays within `margin` of the reference
        if np.all(sign * gap < margin):
            return GluedConstruction(glued, alpha, delta, r_star)
        delta /= 2
    raise SolverError(f"no admissible glued {kind.value.lower()} found ({last_error})")


def glued_supersolution(reference: RadialProfile, margin: float = 0.1,
                        cfg: IntegratorConfig = IntegratorConfig(),
                        delta0: Optional[float] = None, max_halvings: int = 30) -> GluedConstruction:
    """Supersolution below ``reference`` built from a profile started slightly lower.

    The profile with central value ``alpha* - delta`` first crosses the
    reference at r1; gluing it to the reference there gives a weak
    supersolution with ``reference - margin < glued <= reference``. delta is
    halved until the envelope holds.
    """
    return _construct(reference, margin, Kind.SUPERSOLUTION, cfg, delta0, max_halvings)


def glued_subsolution(reference: RadialProfile, margin: float = 0.1,
                      cfg: IntegratorConfig = IntegratorConfig(),
                      delta0: Optional[float] = None, max_halvings: int = 30) -> GluedConstruction:
    """Subsolution above ``reference`` built from a profile started slightly higher."""
    return _construct(reference, margin, Kind.SUBSOLUTION, cfg, delta0, max_halvings)
