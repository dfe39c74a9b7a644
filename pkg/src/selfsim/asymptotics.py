"""Asymptotic constants, energy and decay bounds of computed profiles.

Far from the origin an exponential profile behaves like
``-2 log r + L + O(r^-2)``, and power-type profiles like ``c r^{-k}``
with ``k = 2/(n - 1)`` (approximation order n) or ``k = 2/(p - 1)``.
Two independent estimators of the limiting constant are provided: a
least-squares tail fit and an exact integral identity evaluated by
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.integrate import quad

from .core import (
    Exponential,
    FitDiverged,
    Power,
    PowerApprox,
    RadialProfile,
    SolverError,
    ValidationError,
    approx_power,
)
from .radial_ode import require_converged

FIT_THRESHOLD = 1e-4
TAIL_WINDOW = (0.6, 1.0)


@dataclass(frozen=True)
class TailFit:
    L: float
    fit_error: float
    coefficients: tuple = ()


@dataclass(frozen=True)
class EnergyTrace:
    r: np.ndarray
    E: np.ndarray
    max_increase: float


@dataclass(frozen=True)
class DecayCertificate:
    """Outcome of checking a decay bound ``|g(r)| <= C (1 + r)^exponent``.

    ``max_violation`` is the worst ratio of the quantity to its bound minus
    one, clamped at zero. A missing exponent means that quantity is not part
    of the bound.
    """

    name: str
    C_alpha: float
    exponent_value: Optional[float]
    exponent_derivative: Optional[float]
    max_violation: float


def _power_exponent(profile: RadialProfile) -> float:
    return profile.params.nonlinearity.decay_exponent


def _rescaled_tail(profile: RadialProfile, r):
    """Quantity whose limit at infinity is the asymptotic constant."""
    f = profile.params.nonlinearity
    phi = profile(r)
    if isinstance(f, Exponential):
        return 2.0 * np.log(r) + phi
    k = _power_exponent(profile)
    if isinstance(f, PowerApprox):
        # r^k (phi + n) - n, arranged to avoid cancellation for large n
        return f.n * np.expm1(k * np.log(r)) + np.exp(k * np.log(r)) * phi
    return np.exp(k * np.log(r)) * phi


# Candidate tail expansions in powers of 1/r. Genuine profiles expand in even
# powers; the full polynomial covers data such as -2 log(1 + r).
TAIL_MODELS = ((0, 2, 4, 6), (0, 1, 2, 3))


def estimate_L_tail(profile: RadialProfile, window=TAIL_WINDOW, threshold=FIT_THRESHOLD) -> TailFit:
    """Fit the rescaled tail by a short expansion in 1/r on the outer window.

    Two four-term models are tried (even powers up to r^-6, and all powers up
    to r^-3) and the one with the smaller RMS misfit is kept. For power
    approximations the returned constant already has ``n`` subtracted, so it
    is directly comparable with the exponential one.

    Raises
    ------
    FitDiverged
        When the misfit exceeds ``threshold``.
    """
    require_converged(profile)
    r_max = profile.r_max
    lo, hi = window[0] * r_max, window[1] * r_max
    r = profile.r[(profile.r >= lo) & (profile.r <= hi) & (profile.r > 0)]
    if r.size < 16:
        r = np.linspace(max(lo, 1e-12), hi, 64)
    g = _rescaled_tail(profile, r)
    x = 1.0 / r
    best = None
    for powers in TAIL_MODELS:
        basis = np.vstack([x**k for k in powers]).T
        coef, *_ = np.linalg.lstsq(basis, g, rcond=None)
        err = float(np.sqrt(np.mean((basis @ coef - g) ** 2)))
        if best is None or err < best[1]:
            best = (coef, err, powers)
    coef, fit_error, _ = best
    if not math.isfinite(fit_error) or fit_error > threshold:
        raise FitDiverged(
            f"tail fit error {fit_error:.3g} above {threshold:g}",
            value=float(coef[0]), fit_error=fit_error,
        )
    return TailFit(float(coef[0]), fit_error, tuple(float(c) for c in coef[1:]))


def _quad(func, a, b, breakpoints=()):
    pts = [p for p in breakpoints if a < p < b]
    total = 0.0
    edges = [a, *pts, b]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = quad(func, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
        if not math.isfinite(val) or err > 1e-8:
            raise SolverError(f"quadrature failed on [{lo}, {hi}] (error {err:.3g})")
        total += val
    return total


def estimate_L_integral(profile: RadialProfile) -> float:
    """Asymptotic constant from an exact integral identity.

    For the exponential profile, ``d/dr (2 log r + phi + 2 phi'/r)`` equals
    ``-2N phi'/r^2 - 2 e^phi / r``, so integrating from 1 to infinity gives
    the limit in terms of data at r = 1 and two convergent integrals. The
    power-type analogue uses ``r^k psi + 2 r^(k-1) psi'``. Contributions
    beyond the last grid radius are added from the tail expansion
    (``phi ~ -2 log r + L + a r^-2``, resp. ``psi ~ c r^-k``).
    """
    require_converged(profile)
    R = profile.r_max
    if R <= 1.0:
        raise ValidationError("integral estimator needs the profile on [1, r_max] with r_max > 1")
    f = profile.params.nonlinearity
    N = profile.params.dimension
    phi1, dphi1 = profile.evaluate(1.0)
    phiR, dphiR = profile.evaluate(R)
    breaks = [b for b in (2.0, 5.0, 10.0, 20.0) if b < R]

    if isinstance(f, Exponential):
        i1 = _quad(lambda t: profile.slope(t) / t**2, 1.0, R, breaks)
        i2 = _quad(lambda t: math.exp(profile(t)) / t, 1.0, R, breaks)
        # phi ~ -2 log t + L + a/t^2, with a read off from phi'(R)
        a = -(R * dphiR + 2.0) * R**2 / 2.0
        i1 += -1.0 / R**2 - a / (2.0 * R**4)
        i2 += math.exp(phiR) / (1.0 + a / R**2) * (0.5 + a / (4.0 * R**2))
        return phi1 + 2.0 * dphi1 - 2.0 * N * i1 - 2.0 * i2

    k = _power_exponent(profile)
    if isinstance(f, PowerApprox):
        n = f.n
        shift = float(n)
        reaction = lambda v: approx_power(v, n)
    else:
        shift = 0.0
        p = f.p
        reaction = lambda v: max(v, 0.0) ** p
    i1 = _quad(lambda t: t ** (k - 2) * profile.slope(t), 1.0, R, breaks)
    i2 = _quad(lambda t: t ** (k - 1) * reaction(profile(t)), 1.0, R, breaks)
    # psi' ~ R^(k+1) psi'(R) t^(-k-1); reaction ~ reaction(R) (R/t)^(k+2)
    i1 += dphiR * R ** (k - 1) / 2.0
    i2 += reaction(phiR) * R**k / 2.0
    limit = (phi1 + shift) + 2.0 * dphi1 + 2.0 * (k - N) * i1 - 2.0 * i2
    return limit - shift


def slope_ratio_at_edge(profile: RadialProfile) -> float:
    """|phi'(r_max)/r_max|, the boundary term dropped by the integral identity."""
    return abs(profile.derivative[-1] / profile.r_max)


def _require_approx(profile: RadialProfile) -> PowerApprox:
    f = profile.params.nonlinearity
    if not isinstance(f, PowerApprox):
        raise ValidationError("energy is defined for power-approximation profiles only")
    return f


def energy(profile: RadialProfile, r=None):
    """Radial energy ``psi'^2/2 + psi^2/(2(n-1)) + psi^(n+1)/(n^n (n+1))``."""
    f = _require_approx(profile)
    n = f.n
    if r is None:
        phi, dphi = profile.value, profile.derivative
    else:
        phi, dphi = profile.evaluate(r)
    psi = np.asarray(phi) + n
    if np.any(psi <= 0):
        raise ValidationError("energy needs psi > 0")
    # psi^(n+1)/n^n = n (1 + phi/n)^(n+1)
    top = n * np.exp((n + 1) * np.log1p(np.asarray(phi) / n)) / (n + 1)
    return 0.5 * np.asarray(dphi) ** 2 + psi**2 / (2.0 * (n - 1)) + top


def energy_at_origin(n: int, alpha: float) -> float:
    psi0 = alpha + n
    return psi0**2 / (2.0 * (n - 1)) + n * math.exp((n + 1) * math.log1p(alpha / n)) / (n + 1)


def energy_trace(profile: RadialProfile) -> EnergyTrace:
    E = np.asarray(energy(profile), dtype=float)
    increase = np.diff(E)
    return EnergyTrace(profile.r, E, float(max(0.0, increase.max(initial=0.0))))


def haraux_constant(n: int, alpha: float) -> float:
    """sqrt(2 (n - 1) E(0)) for the approximation of order n."""
    return math.sqrt(2.0 * (n - 1) * energy_at_origin(n, alpha))


def order_free_constant(alpha: float) -> float:
    """e^{|alpha| + e^{|alpha|}}, independent of the approximation order."""
    a = abs(alpha)
    return math.exp(a + math.exp(a))


def _violation(quantity, bound) -> float:
    ratio = np.max(np.abs(quantity) / bound)
    return float(max(0.0, ratio - 1.0))


def certify_decay(profile: RadialProfile) -> List[DecayCertificate]:
    """Check the algebraic decay bounds on the computed grid.

    Power approximations get two certificates: ``haraux`` bounds
    ``|psi| <= C (1+r)^-k`` and ``|psi'| <= C (1+r)^(-k-1)`` with
    ``C = sqrt(2(n-1)E(0))``; ``order_free`` bounds the reaction term
    ``(psi/n)^n <= C (1+r)^(-2n/(n-1))`` with ``C = e^{|a| + e^{|a|}}``.
    Exponential profiles get one ``gradient`` certificate reporting the
    smallest C with ``|phi'| <= C (1+r)^-1``.
    """
    require_converged(profile)
    f = profile.params.nonlinearity
    r = profile.r
    if isinstance(f, PowerApprox):
        n = f.n
        k = f.decay_exponent
        psi = profile.psi
        C = haraux_constant(n, profile.alpha)
        v = max(_violation(psi, C * (1 + r) ** (-k)),
                _violation(profile.derivative, C * (1 + r) ** (-k - 1)))
        haraux = DecayCertificate("haraux", C, -k, -k - 1, v)
        C0 = order_free_constant(profile.alpha)
        q = -2.0 * n / (n - 1)
        reaction = np.asarray(approx_power(profile.value, n))
        free = DecayCertificate("order_free", C0, q, None,
                                _violation(reaction, C0 * (1 + r) ** q))
        return [haraux, free]
    if isinstance(f, Exponential):
        C = float(np.max(np.abs(profile.derivative) * (1 + r)))
        return [DecayCertificate("gradient", C, None, -1.0, 0.0)]
    k = f.decay_exponent
    C = float(max(np.max(np.abs(profile.value) * (1 + r) ** k),
                  np.max(np.abs(profile.derivative) * (1 + r) ** (k + 1))))
    return [DecayCertificate("power", C, -k, -k - 1, 0.0)]


def integrand_domination(profile: RadialProfile, C: float):
    """Worst ratio of the integral-identity integrands to ``C (1+t)^-3`` on [1, r_max]."""
    f = _require_approx(profile)
    k = f.decay_exponent
    t = profile.r[profile.r >= 1.0]
    phi, dphi = profile.evaluate(t)
    g1 = np.abs(t ** (k - 2) * dphi)
    g2 = np.abs(t ** (k - 1) * np.asarray(approx_power(phi, f.n)))
    bound = C * (1 + t) ** -3.0
    return float(max(np.max(g1 / bound), np.max(g2 / bound)))
