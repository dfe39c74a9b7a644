"""Shared domain types, validation and closed-form constants.

The three nonlinearity variants share one radial profile equation

    phi'' + ((N-1)/r + r/2) phi' + G(phi) = 0,

where ``G`` is the source term evaluated by :func:`profile_source`. The
exponential variant uses ``G = e^phi + 1``; its power approximation of
order ``n`` uses ``G = (phi + n)/(n - 1) + (1 + phi/n)^n``; the pure power
variant uses ``G = phi/(p - 1) + phi^p``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline

# Largest approximation order accepted; (1 + phi/n)^n is evaluated in log
# space above LOG_POWER_THRESHOLD.
MAX_APPROX_ORDER = 10**6
LOG_POWER_THRESHOLD = 100


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class SolverError(RuntimeError):
    """Raised when a numerical procedure cannot produce a result."""


class NonConvergedProfile(SolverError):
    """A profile did not reach its target radius."""


class FitDiverged(SolverError):
    """An asymptotic fit did not settle to a constant."""

    def __init__(self, message, value=None, fit_error=None):
        super().__init__(message)
        self.value = value
        self.fit_error = fit_error


class PositivityLost(SolverError):
    """The profile left the admissible range (psi <= 0 or power-type phi < 0)."""


class NoBracket(SolverError):
    """No sign change was found where one was required."""


class NoCrossing(SolverError):
    """Two profiles do not cross in the requested interval."""


class MatchingViolated(ValidationError):
    """Glued pieces disagree in value at the glue radius."""


class DerivativeOrderViolated(ValidationError):
    """Glued pieces have the wrong derivative order for the requested kind."""


class MissingBranch(SolverError):
    """No non-minimal branch was found in the scanned window."""


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    POSITIVITY_LOST = "PositivityLost"
    RANGE_EXCEEDED = "RangeExceeded"
    STEP_FAILURE = "StepFailure"
    FIT_DIVERGED = "FitDiverged"


class _Infinite:
    """Tagged positive infinity used where an exponent is unbounded.

    Compares greater than every real number and equal only to itself.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Infinite"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("Infinite")

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self


Infinite = _Infinite()


@dataclass(frozen=True)
class Exponential:
    def label(self) -> str:
        return "exp"


@dataclass(frozen=True)
class PowerApprox:
    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValidationError(f"approximation order must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n < 2:
            raise ValidationError(f"approximation order must be >= 2, got {self.n}")
        if self.n > MAX_APPROX_ORDER:
            raise ValidationError(f"approximation order capped at {MAX_APPROX_ORDER}, got {self.n}")

    @property
    def decay_exponent(self) -> float:
        """Exponent k with psi ~ c r^{-k} at infinity."""
        return 2.0 / (self.n - 1)

    def label(self) -> str:
        return f"approx:{self.n}"


@dataclass(frozen=True)
class Power:
    p: float

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p <= 1:
            raise ValidationError(f"power exponent must be > 1, got {self.p}")
        object.__setattr__(self, "p", p)

    @property
    def decay_exponent(self) -> float:
        return 2.0 / (self.p - 1)

    def label(self) -> str:
        return f"power:{self.p!r}"


Nonlinearity = Union[Exponential, PowerApprox, Power]


@dataclass(frozen=True)
class ProblemParams:
    dimension: int
    nonlinearity: Nonlinearity = Exponential()

    def __post_init__(self):
        if isinstance(self.dimension, bool) or int(self.dimension) != self.dimension:
            raise ValidationError(f"dimension must be an integer, got {self.dimension!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.dimension < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.dimension}")
        if not isinstance(self.nonlinearity, (Exponential, PowerApprox, Power)):
            raise ValidationError(f"unknown nonlinearity {self.nonlinearity!r}")

    @property
    def N(self) -> int:
        return self.dimension

    def require_branch_dimension(self):
        """Branch enumeration needs the singular solution, which exists for N >= 3."""
        if self.dimension < 3:
            raise ValidationError(f"branch features need N >= 3, got N={self.dimension}")


def parse_nonlinearity(text: str) -> Nonlinearity:
    """Parse ``exp``, ``approx:<n>`` or ``power:<p>``."""
    text = text.strip()
    if text == "exp":
        return Exponential()
    kind, sep, arg = text.partition(":")
    if not sep:
        raise ValidationError(f"cannot parse nonlinearity {text!r}")
    try:
        if kind == "approx":
            return PowerApprox(int(arg))
        if kind == "power":
            return Power(float(arg))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad argument in nonlinearity {text!r}") from exc
    raise ValidationError(f"unknown nonlinearity kind {kind!r}")


def approx_power(value, n):
    """(1 + value/n)^n, zero where the base is nonpositive."""
    v = np.asarray(value, dtype=float)
    base = 1.0 + v / n
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if n > LOG_POWER_THRESHOLD:
            out = np.exp(n * np.log1p(np.maximum(v / n, -1.0)))
        else:
            out = np.where(base > 0, base, 0.0) ** n
    out = np.where(base > 0, out, 0.0)
    return out if out.ndim else float(out)


def nonlinearity(params: ProblemParams, value):
    """Reaction term f(u) of the parabolic equation u_t = Delta u + f(u)."""
    f = params.nonlinearity
    v = np.asarray(value, dtype=float)
    with np.errstate(over="ignore"):
        if isinstance(f, Exponential):
            out = np.exp(v)
        elif isinstance(f, PowerApprox):
            out = np.asarray(approx_power(v, f.n))
        else:
            out = np.where(v > 0, np.maximum(v, 0.0) ** f.p, 0.0)
    return out if out.ndim else float(out)


def nonlinearity_derivative(params: ProblemParams, value):
    """Derivative f'(u) of :func:`nonlinearity`."""
    f = params.nonlinearity
    v = np.asarray(value, dtype=float)
    with np.errstate(over="ignore"):
        if isinstance(f, Exponential):
            out = np.exp(v)
        elif isinstance(f, PowerApprox):
            base = 1.0 + v / f.n
            safe = np.where(base > 0, base, 1.0)
            out = np.where(base > 0, np.exp((f.n - 1) * np.log(safe)), 0.0)
        else:
            out = np.where(v > 0, f.p * np.maximum(v, 0.0) ** (f.p - 1), 0.0)
    return out if out.ndim else float(out)


def linear_coefficient(params: ProblemParams) -> float:
    """Coefficient of the linear part of the profile source term."""
    f = params.nonlinearity
    if isinstance(f, Exponential):
        return 0.0
    if isinstance(f, PowerApprox):
        return 1.0 / (f.n - 1)
    return 1.0 / (f.p - 1)


def profile_source(params: ProblemParams, value):
    """Source term G(phi) of the radial profile equation."""
    f = params.nonlinearity
    v = np.asarray(value, dtype=float)
    if isinstance(f, Exponential):
        out = np.asarray(nonlinearity(params, v)) + 1.0
    elif isinstance(f, PowerApprox):
        out = (v + f.n) / (f.n - 1) + np.asarray(nonlinearity(params, v))
    else:
        out = v / (f.p - 1) + np.asarray(nonlinearity(params, v))
    return out if out.ndim else float(out)


def profile_source_derivative(params: ProblemParams, value):
    out = np.asarray(nonlinearity_derivative(params, value)) + linear_coefficient(params)
    return out if out.ndim else float(out)


def positivity_floor(params: ProblemParams):
    """Value below which the profile leaves the admissible range, or None."""
    f = params.nonlinearity
    if isinstance(f, PowerApprox):
        return -float(f.n)
    if isinstance(f, Power):
        return 0.0
    return None


def fujita_exponent(N: int) -> float:
    """Critical exponent (N + 2)/N for the power-type heat equation."""
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    return (N + 2) / N


def joseph_lundgren_exponent(N: int):
    """Stability threshold for radial stationary solutions.

    Returns :data:`Infinite` for ``3 <= N <= 10``.
    """
    if N < 3:
        raise ValidationError(f"N must be >= 3, got {N}")
    if N <= 10:
        return Infinite
    return 1.0 + 4.0 / (N - 4 - 2.0 * math.sqrt(N - 1))


def singular_stationary_value(N: int, r):
    """Singular stationary solution -2 log r + log(2N - 4)."""
    if N < 3:
        raise ValidationError(f"N must be >= 3, got {N}")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValidationError("radius must be positive")
    out = -2.0 * np.log(r_arr) + math.log(2 * N - 4)
    return out if out.ndim else float(out)


def power_singular_constant(N: int, p: float) -> float:
    """Coefficient l* of the singular stationary solution l* r^{-2/(p-1)}."""
    if N < 3:
        raise ValidationError(f"N must be >= 3, got {N}")
    if p <= N / (N - 2):
        raise ValidationError(f"need p > N/(N-2) = {N / (N - 2)}, got {p}")
    m = 2.0 / (p - 1)
    return (m * (N - 2 - m)) ** (1.0 / (p - 1))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A radial function sampled on a strictly increasing grid.

    Parameters
    ----------
    r, value, derivative : ndarray
        Grid, samples and radial derivative samples.
    params : ProblemParams
        Equation the profile belongs to.
    alpha : float
        Value at the origin.
    status : Status
        Outcome of the computation that produced the profile.
    zero_crossing : float, optional
        Radius where the profile left its admissible range, if it did.
    evaluator : callable, optional
        ``evaluator(x) -> (value, derivative)`` for off-grid evaluation. A cubic
        Hermite interpolant of the samples is used when omitted.
    """

    r: np.ndarray
    value: np.ndarray
    derivative: np.ndarray
    params: ProblemParams
    alpha: float
    status: Status = Status.CONVERGED
    zero_crossing: Optional[float] = None
    evaluator: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        value = np.asarray(self.value, dtype=float)
        derivative = np.asarray(self.derivative, dtype=float)
        if r.ndim != 1 or r.shape != value.shape or r.shape != derivative.shape:
            raise ValidationError("r, value and derivative must be 1-D arrays of equal length")
        if r.size < 2:
            raise ValidationError("a profile needs at least two grid points")
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise ValidationError("grid must be nonnegative and strictly increasing")
        for name, arr in (("r", r), ("value", value), ("derivative", derivative)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "status", Status(self.status))

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def psi(self) -> np.ndarray:
        """Shifted values phi + n for power approximations (phi otherwise)."""
        f = self.params.nonlinearity
        return self.value + f.n if isinstance(f, PowerApprox) else self.value

    @property
    def is_nonincreasing(self) -> bool:
        return bool(np.all(self.derivative[1:] <= 0))

    def _spline(self):
        spline = self.__dict__.get("_hermite")
        if spline is None:
            spline = CubicHermiteSpline(self.r, self.value, self.derivative)
            self.__dict__["_hermite"] = spline
        return spline

    def evaluate(self, x):
        """Return (value, derivative) at radii inside the sampled range."""
        x_arr = np.asarray(x, dtype=float)
        span = 1e-12 * max(1.0, self.r_max)
        if np.any(x_arr < self.r[0] - span) or np.any(x_arr > self.r[-1] + span):
            raise ValidationError(
                f"evaluation outside sampled range [{self.r[0]}, {self.r[-1]}]"
            )
        x_arr = np.clip(x_arr, self.r[0], self.r[-1])
        if self.evaluator is not None:
            v, d = self.evaluator(x_arr)
        else:
            spline = self._spline()
            v, d = spline(x_arr), spline(x_arr, 1)
        v = np.asarray(v, dtype=float)
        d = np.asarray(d, dtype=float)
        if v.ndim == 0:
            return float(v), float(d)
        return v, d

    def __call__(self, x):
        return self.evaluate(x)[0]

    def slope(self, x):
        return self.evaluate(x)[1]

    def resampled(self, grid) -> "RadialProfile":
        """Sample onto a new grid, keeping the evaluator."""
        v, d = self.evaluate(grid)
        return RadialProfile(
            np.asarray(grid, dtype=float), v, d, self.params, self.alpha,
            self.status, self.zero_crossing, self.evaluator,
        )

    def truncated(self, r_end: float) -> "RadialProfile":
        keep = self.r <= r_end
        return RadialProfile(
            self.r[keep], self.value[keep], self.derivative[keep], self.params,
            self.alpha, self.status, self.zero_crossing, self.evaluator,
        )

    def shifted(self, offset: float) -> "RadialProfile":
        """The profile plus a constant."""
        ev = None
        if self.evaluator is not None:
            base = self.evaluator

            def ev(x):
                v, d = base(x)
                return np.asarray(v) + offset, d

        return RadialProfile(
            self.r, self.value + offset, self.derivative, self.params,
            self.alpha + offset, self.status, None, ev,
        )

    def to_csv(self, path, header_lines=()):
        from .io import write_table

        write_table(
            path, ["r", "value", "derivative"],
            [self.r, self.value, self.derivative], preamble=header_lines,
        )

    @classmethod
    def from_csv(cls, path, params: ProblemParams, status=Status.CONVERGED):
        from .io import read_table

        cols = read_table(path)
        r, v, d = cols["r"], cols["value"], cols["derivative"]
        return cls(r, v, d, params, v[0], status)


def sampled_profile(func, grid, params: ProblemParams, derivative=None) -> RadialProfile:
    """Build a profile from a callable (and optionally its derivative).

    The derivative is taken by complex-step-free central differences when not
    supplied, which is adequate for test fixtures.
    """
    grid = np.asarray(grid, dtype=float)
    value = np.asarray(func(grid), dtype=float) * np.ones_like(grid)
    if derivative is None:
        h = 1e-6
        derivative = lambda x: (np.asarray(func(x + h)) - np.asarray(func(x - h))) / (2 * h)

    def evaluator(x):
        return (np.asarray(func(x), dtype=float) * np.ones_like(x),
                np.asarray(derivative(x), dtype=float) * np.ones_like(x))

    deriv = np.asarray(derivative(grid), dtype=float) * np.ones_like(grid)
    return RadialProfile(grid, value, deriv, params, value[0], Status.CONVERGED, None, evaluator)
