import math

import mpmath
import numpy as np
import pytest
import sympy

from selfsim.core import (
    Exponential,
    Infinite,
    Power,
    PowerApprox,
    ProblemParams,
    RadialProfile,
    Status,
    ValidationError,
    approx_power,
    fujita_exponent,
    joseph_lundgren_exponent,
    nonlinearity,
    nonlinearity_derivative,
    parse_nonlinearity,
    positivity_floor,
    power_singular_constant,
    profile_source,
    profile_source_derivative,
    sampled_profile,
    singular_stationary_value,
)


def test_fujita_values():
    assert fujita_exponent(1) == 3
    assert fujita_exponent(2) == 2
    assert fujita_exponent(4) == 1.5


def test_fujita_decreasing_to_one():
    vals = [fujita_exponent(N) for N in range(1, 200)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] - 1 < 0.011


def test_fujita_rejects_zero():
    with pytest.raises(ValidationError):
        fujita_exponent(0)


def test_joseph_lundgren_infinite_range():
    for N in range(3, 11):
        assert joseph_lundgren_exponent(N) is Infinite
    assert joseph_lundgren_exponent(10) > 1e308
    assert not joseph_lundgren_exponent(3) < 5.0


def test_joseph_lundgren_n11_extended_precision():
    mpmath.mp.dps = 40
    oracle = 1 + 4 / (7 - 2 * mpmath.sqrt(10))
    assert joseph_lundgren_exponent(11) == pytest.approx(float(oracle), rel=1e-14)
    assert 6.92 < joseph_lundgren_exponent(11) < 6.93


def test_joseph_lundgren_decreasing_beyond_ten():
    vals = [joseph_lundgren_exponent(N) for N in range(11, 60)]
    assert all(math.isfinite(v) for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_joseph_lundgren_rejects_small_dimension():
    with pytest.raises(ValidationError):
        joseph_lundgren_exponent(2)


def test_infinite_ordering():
    assert Infinite > 1e308
    assert not (Infinite < 3)
    assert Infinite == Infinite
    assert Infinite != float("inf")


def test_singular_stationary_values():
    assert singular_stationary_value(3, 1.0) == pytest.approx(math.log(2))
    assert singular_stationary_value(4, 1.0) == pytest.approx(math.log(4))


def test_singular_stationary_residual_n5():
    r = 2.0
    u = singular_stationary_value(5, r)
    assert abs(2 / r**2 - 2 * 4 / r**2 + math.exp(u)) < 1e-12


@pytest.mark.parametrize("N,r", [(2, 1.0), (3, 0.0), (3, -1.0)])
def test_singular_stationary_rejects(N, r):
    with pytest.raises(ValidationError):
        singular_stationary_value(N, r)


def test_power_singular_constant_values():
    assert power_singular_constant(5, 3.0) == pytest.approx(math.sqrt(2))
    assert power_singular_constant(3, 5.0) == pytest.approx(0.25**0.25)


def test_power_singular_symbolic_residual():
    r = sympy.symbols("r", positive=True)
    N, p = 6, 3
    l = power_singular_constant(N, p)
    u = sympy.Float(l, 30) * r ** sympy.Rational(-2, p - 1)
    expr = sympy.diff(u, r, 2) + sympy.Rational(N - 1) / r * sympy.diff(u, r) + u**p
    assert abs(float(expr.subs(r, sympy.Rational(17, 10)))) < 1e-12


def test_power_singular_rejects_subcritical():
    with pytest.raises(ValidationError):
        power_singular_constant(5, 5 / 3)
    with pytest.raises(ValidationError):
        power_singular_constant(3, 2.9)


def test_params_validation():
    with pytest.raises(ValidationError):
        PowerApprox(1)
    with pytest.raises(ValidationError):
        Power(1.0)
    with pytest.raises(ValidationError):
        ProblemParams(0)
    assert ProblemParams(1).N == 1
    with pytest.raises(ValidationError):
        ProblemParams(2).require_branch_dimension()
    ProblemParams(3).require_branch_dimension()


def test_parse_nonlinearity():
    assert parse_nonlinearity("exp") == Exponential()
    assert parse_nonlinearity("approx:100") == PowerApprox(100)
    assert parse_nonlinearity("power:3") == Power(3.0)
    for bad in ("approx:1", "power:0.5", "cubic", "approx:x", "approx"):
        with pytest.raises(ValidationError):
            parse_nonlinearity(bad)


def test_approx_power_limit_of_e():
    assert approx_power(1.0, 10**6) == pytest.approx(math.e, rel=1.4e-6)
    # (1 + a/n)^n <= e^a
    for n in (2, 10, 1000):
        assert approx_power(0.7, n) <= math.exp(0.7)


def test_approx_power_branches_agree():
    v = np.linspace(-50, 3, 41)
    direct = (1 + v / 101) ** 101
    assert np.allclose(approx_power(v, 101), direct, rtol=1e-12)
    assert approx_power(-3.0, 2) == 0.0


def test_source_terms():
    assert profile_source(ProblemParams(3), 0.0) == 2.0
    assert profile_source(ProblemParams(3, PowerApprox(2)), 0.0) == 3.0
    assert profile_source(ProblemParams(3, Power(3.0)), 1.0) == pytest.approx(1.5)
    assert nonlinearity(ProblemParams(3), 1.0) == pytest.approx(math.e)


@pytest.mark.parametrize("f", [Exponential(), PowerApprox(7), PowerApprox(500), Power(3.0)])
def test_derivatives_match_differences(f):
    params = ProblemParams(3, f)
    v, h = 0.3, 1e-6
    fd = (nonlinearity(params, v + h) - nonlinearity(params, v - h)) / (2 * h)
    assert nonlinearity_derivative(params, v) == pytest.approx(fd, rel=1e-7)
    fd = (profile_source(params, v + h) - profile_source(params, v - h)) / (2 * h)
    assert profile_source_derivative(params, v) == pytest.approx(fd, rel=1e-7)


def test_positivity_floor():
    assert positivity_floor(ProblemParams(3)) is None
    assert positivity_floor(ProblemParams(3, PowerApprox(5))) == -5
    assert positivity_floor(ProblemParams(3, Power(2.0))) == 0.0


def _grid_profile(values, r=None):
    r = np.linspace(0, 1, len(values)) if r is None else r
    return RadialProfile(r, np.asarray(values, float), np.zeros(len(values)), ProblemParams(3), values[0])


def test_profile_rejects_bad_grid():
    with pytest.raises(ValidationError):
        _grid_profile([1, 2, 3], r=np.array([0.0, 0.5, 0.5]))
    with pytest.raises(ValidationError):
        _grid_profile([1, 2, 3], r=np.array([-0.1, 0.5, 1.0]))
    with pytest.raises(ValidationError):
        RadialProfile(np.array([0.0, 1.0]), np.zeros(3), np.zeros(2), ProblemParams(3), 0.0)


def test_profile_is_immutable():
    prof = _grid_profile([1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        prof.value[0] = 3.0


def test_profile_csv_round_trip(tmp_path):
    prof = sampled_profile(lambda r: np.cos(r) / 3, np.linspace(0, 2, 33), ProblemParams(4),
                           derivative=lambda r: -np.sin(r) / 3)
    path = tmp_path / "p.csv"
    prof.to_csv(path, header_lines=["note=test"])
    back = RadialProfile.from_csv(path, ProblemParams(4))
    assert np.array_equal(back.r, prof.r)
    assert np.array_equal(back.value, prof.value)
    assert np.array_equal(back.derivative, prof.derivative)
    assert path.read_text().splitlines()[:2] == ["#note=test", "r,value,derivative"]


def test_profile_evaluate_and_range():
    prof = _grid_profile([1.0, 0.5, 0.0])
    v, d = prof.evaluate(0.5)
    assert v == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        prof.evaluate(1.5)


def test_profile_monotone_flag_and_psi():
    r = np.linspace(0, 1, 5)
    prof = RadialProfile(r, -r, -np.ones(5), ProblemParams(3, PowerApprox(4)), 0.0)
    assert prof.is_nonincreasing
    assert np.allclose(prof.psi, 4 - r)
    assert prof.status is Status.CONVERGED
