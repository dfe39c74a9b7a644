import numpy as np
import pytest

from selfsim.core import (
    DerivativeOrderViolated,
    MatchingViolated,
    NoCrossing,
    ProblemParams,
    ValidationError,
    sampled_profile,
)
from selfsim.io import read_preamble
from selfsim.radial_ode import solve_profile
from selfsim.sub_super import (
    GluedProfile,
    Kind,
    TestBump,
    find_crossing,
    glue,
    glued_subsolution,
    glued_supersolution,
    standard_bumps,
    weak_inequality_check,
    weak_residual,
)

from conftest import WIDE


def _line(f, df, r_max=2.0):
    return sampled_profile(f, np.linspace(0, r_max, 21), ProblemParams(3), derivative=df)


def test_bump_derivatives_match_differences():
    bump = TestBump(1.0, 0.5)
    r = np.linspace(0.55, 1.45, 19)
    h = 1e-5
    e0, e1, e2 = bump.derivatives(r)
    assert np.allclose(e1, (bump(r + h) - bump(r - h)) / (2 * h), atol=1e-8)
    assert np.allclose(e2, (bump(r + h) - 2 * e0 + bump(r - h)) / h**2, atol=1e-4)
    assert bump.support == (0.5, 1.5)


def test_bump_touching_origin_is_even():
    bump = TestBump(0.5, 1.0)
    assert bump.support == (0.0, 1.5)
    _, d1, _ = bump.derivatives(np.array([0.0]))
    assert d1[0] == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValidationError):
        TestBump(1.0, 0.0)


def test_standard_family():
    assert len(standard_bumps()) == 15
    extra = standard_bumps(3.3)[15:]
    assert [b.center for b in extra] == [3.3] * 3


def test_crossing_of_lines():
    a = _line(lambda r: 1 - r, lambda r: -np.ones_like(r))
    b = _line(lambda r: 0 * r, lambda r: 0 * r)
    assert find_crossing(a, b, (0.0, 2.0)) == pytest.approx(1.0, abs=1e-12)


def test_no_crossing_for_shifted_copy():
    p = solve_profile(ProblemParams(3), 0.0)
    with pytest.raises(NoCrossing):
        find_crossing(p.shifted(1.0), p, (0.0, 50.0))
    with pytest.raises(NoCrossing):
        find_crossing(p, p, (0.0, 50.0))


def test_glue_profile_to_itself():
    p = solve_profile(ProblemParams(3), 0.5)
    for kind in Kind:
        g = glue(p, p, 3.0, kind)
        assert g.kind is kind
        assert g(2.0) == p(2.0) and g(4.0) == p(4.0)


def test_glue_errors():
    a = _line(lambda r: 1 - r, lambda r: -np.ones_like(r))
    b = _line(lambda r: 0 * r, lambda r: 0 * r)
    with pytest.raises(MatchingViolated):
        glue(a, b, 0.5, Kind.SUPERSOLUTION)
    # at r = 1 the inner slope -1 is below the outer slope 0
    with pytest.raises(DerivativeOrderViolated):
        glue(a, b, 1.0, Kind.SUPERSOLUTION)
    assert glue(a, b, 1.0, "Subsolution").kind is Kind.SUBSOLUTION
    with pytest.raises(ValidationError):
        glue(a, b, 2.5, Kind.SUBSOLUTION)


def test_crossing_lies_before_contact(branch_pair):
    low, high, _ = branch_pair(3)
    p = high.params
    mid = solve_profile(p, 0.5 * (low.alpha + high.alpha))
    r0 = find_crossing(mid, high, (0.0, 50.0))
    below = solve_profile(p, high.alpha - 0.05)
    r1 = find_crossing(below, high, (0.0, 50.0))
    assert 0 < r1 < r0


def test_exact_profile_weak_residual_vanishes(branch_pair):
    _, phi_L, _ = branch_pair(3)
    values = [weak_residual(phi_L, phi_L.params, b, (b.center,)) for b in standard_bumps()]
    assert max(abs(v) for v in values) < 1e-6
    check = weak_inequality_check(phi_L, phi_L.params, standard_bumps())
    assert check.passed


@pytest.fixture(scope="module")
def constructions(branch_pair):
    _, phi_L, _ = branch_pair(3)
    return phi_L, glued_supersolution(phi_L, cfg=WIDE), glued_subsolution(phi_L, cfg=WIDE)


def test_glued_supersolution(constructions):
    phi_L, sup, _ = constructions
    g = sup.glued
    assert g.kind is Kind.SUPERSOLUTION
    assert sup.alpha < phi_L.alpha
    check = weak_inequality_check(g, phi_L.params, standard_bumps(g.glue_radius))
    assert check.passed
    assert all(v <= 1e-6 for v in check.values[-3:])


def test_glued_subsolution_nonincreasing(constructions):
    phi_L, _, sub = constructions
    g = sub.glued
    assert sub.alpha > phi_L.alpha
    assert weak_inequality_check(g, phi_L.params, standard_bumps(g.glue_radius)).passed
    assert g.sample().is_nonincreasing


def test_inverted_gluing_fails(constructions):
    phi_L, sup, sub = constructions
    for c, sign in ((sup, 1.0), (sub, -1.0)):
        g = c.glued
        # same claimed kind with the pieces exchanged: the kink points the wrong way
        swapped = GluedProfile(g.outer, g.inner, g.glue_radius, g.kind)
        check = weak_inequality_check(swapped, phi_L.params, standard_bumps(g.glue_radius))
        assert not check.passed
        assert sign * check.worst_value > 0


@pytest.mark.parametrize("delta", [0.1, 0.5])
def test_supersolution_envelope(branch_pair, delta):
    _, phi_L, _ = branch_pair(3)
    g = glued_supersolution(phi_L, margin=delta, cfg=WIDE).glued
    r = g.sample().r
    assert np.all(g(r) <= phi_L(r))
    assert np.all(phi_L(r) - delta < g(r))


def test_glued_csv_records_radius(constructions, tmp_path):
    _, sup, _ = constructions
    path = tmp_path / "g.csv"
    sup.glued.to_csv(path)
    (line,) = read_preamble(path)
    assert line.startswith("glue_radius=") and line.endswith("kind=Supersolution")


def test_bump_outside_profile_rejected():
    p = solve_profile(ProblemParams(3), 0.0)
    with pytest.raises(ValidationError):
        weak_inequality_check(p, p.params, [TestBump(49.8, 1.0)])
