import math

import pytest

from selfsim.approx_family import (
    convergence_report,
    profile_membership,
    smallest_admissible_order,
    verify_membership,
)
from selfsim.core import PowerApprox, ProblemParams, Status, ValidationError, approx_power
from selfsim.radial_ode import solve_profile


@pytest.fixture(scope="module")
def report():
    return convergence_report(3, 0.0, [10, 100, 1000], r0=5.0)


def test_sup_and_level_errors_decrease(report):
    sup = [e.sup_diff for e in report.entries]
    lerr = [e.L_n_err for e in report.entries]
    assert sup[0] > sup[1] > sup[2]
    assert lerr[0] > lerr[1] > lerr[2]


def test_entry_estimators_agree(report):
    for e in report.entries:
        assert abs(e.L_n - e.L_n_integral) < 1e-5, e.n


def test_pointwise_limit_of_nonlinearity():
    assert approx_power(1.0, 10**6) == pytest.approx(math.e, rel=1.4e-6)
    assert all(approx_power(1.0, n) <= math.e for n in (2, 10, 100, 10**6))


def test_membership(report):
    assert verify_membership(100, 0.0, report)
    assert verify_membership(10, 0.0, report)
    with pytest.raises(KeyError):
        verify_membership(50, 0.0, report)
    with pytest.raises(ValidationError):
        verify_membership(100, 1.0, report)


def test_membership_fails_without_positivity():
    rep = convergence_report(3, 6.0, [2, 100], r0=2.0)
    assert rep.entry(2).status is Status.POSITIVITY_LOST
    assert not verify_membership(2, 6.0, rep)
    assert verify_membership(100, 6.0, rep)


def test_membership_of_single_profile():
    assert profile_membership(solve_profile(ProblemParams(3, PowerApprox(100)), 0.0))
    assert not profile_membership(solve_profile(ProblemParams(3, PowerApprox(2)), 6.0))
    with pytest.raises(ValidationError):
        profile_membership(solve_profile(ProblemParams(3), 0.0))


def test_admissible_order():
    assert smallest_admissible_order(0.0) == 2
    assert smallest_admissible_order(-2.0) == 3
    assert smallest_admissible_order(-2.5) == 3
    with pytest.raises(ValidationError):
        convergence_report(3, -2.0, [2], r0=5.0)
    with pytest.raises(ValidationError):
        convergence_report(3, 0.0, [], r0=5.0)
    with pytest.raises(ValidationError):
        convergence_report(3, 0.0, [10], r0=60.0)
