"""Acceptance criteria 1-12, one test per criterion (criterion 5 is split in three).

Each test records a PASS/FAIL line that is printed in the pytest summary.
"""

import filecmp
import math
from pathlib import Path

import numpy as np
import pytest

from selfsim.approx_family import convergence_report
from selfsim.asymptotics import (
    certify_decay,
    energy_at_origin,
    energy_trace,
    estimate_L_integral,
    estimate_L_tail,
)
from selfsim.cli import main
from selfsim.core import (
    Exponential,
    PowerApprox,
    ProblemParams,
    Status,
    power_singular_constant,
    singular_stationary_value,
)
from selfsim.pde_sim import (
    BlowUp,
    Global,
    SimConfig,
    auto_level,
    comparison_check,
    dichotomy_experiment,
    monotonicity_violation,
    simulate_self_similar,
    transport_error,
)
from selfsim.radial_ode import IntegratorConfig, Uniform, residual, solve_profile
from selfsim.shooting import classify_minimal, solve_S_L
from selfsim.sub_super import (
    GluedProfile,
    Kind,
    glued_subsolution,
    glued_supersolution,
    standard_bumps,
    weak_inequality_check,
)

from conftest import JOBS, WIDE

ODE_DIMS = (3, 6, 9, 10)
ODE_ALPHAS = (-1.0, 0.0, 1.0, 2.0)
ENERGY_MATRIX = [(n, a) for n in (5, 50, 500) for a in (0.0, 1.0)]


def _swap(glued):
    other = Kind.SUBSOLUTION if glued.kind is Kind.SUPERSOLUTION else Kind.SUPERSOLUTION
    return GluedProfile(glued.inner, glued.outer, glued.glue_radius, other)


def _singular_residuals():
    """(residual, largest term) of both singular stationary identities."""
    out = []
    for N in range(3, 13):
        for r in (0.1, 1.0, 10.0):
            u = singular_stationary_value(N, r)
            # u' = -2/r, u'' = 2/r^2
            terms = (2.0 / r**2, (N - 1) / r * (-2.0 / r), math.exp(u))
            out.append(((N, r), sum(terms), max(abs(t) for t in terms)))
    for N, p in ((5, 3.0), (3, 5.0), (6, 3.0)):
        l = power_singular_constant(N, p)
        m = 2.0 / (p - 1)
        for r in (0.5, 1.0, 1.7, 10.0):
            terms = (m * (m + 1) * l * r ** (-m - 2), (N - 1) / r * (-m * l * r ** (-m - 1)),
                     (l * r ** (-m)) ** p)
            out.append(((N, p, r), sum(terms), max(abs(t) for t in terms)))
    return out


def test_criterion_01_stationary_identity(criterion):
    with criterion("1", "stationary identity"):
        for key, res, scale in _singular_residuals():
            # relative to the size of the cancelling terms (up to ~2e3 at r = 0.1)
            assert abs(res) < 1e-12 * max(1.0, scale), (key, res)


@pytest.mark.xfail(strict=True, reason="terms of size ~2e3 at r = 0.1 leave a float64 rounding "
                                       "residual near 1.6e-12, above an absolute 1e-12")
def test_criterion_01_absolute_residual(criterion):
    with criterion("1-abs", "stationary identity, absolute tolerance",
                   known_failure="float64 rounding at r = 0.1"):
        for key, res, _ in _singular_residuals():
            assert abs(res) < 1e-12, (key, res)


@pytest.fixture(scope="module")
def ode_matrix():
    out = {}
    for N in ODE_DIMS:
        for a in ODE_ALPHAS:
            out[N, a] = solve_profile(ProblemParams(N), a)
    return out


def test_criterion_02_ode_fidelity(criterion, ode_matrix):
    with criterion("2", "ODE solver fidelity"):
        for (N, a), prof in ode_matrix.items():
            assert prof.status is Status.CONVERGED
            assert residual(prof, 0.01, 50.0) < 1e-8, (N, a)
        # refinement: halving tolerances moves phi(r_max) by < 5x the coarser tolerance
        base = IntegratorConfig()
        fine = IntegratorConfig(rel_tol=base.rel_tol / 2, abs_tol=base.abs_tol / 2)
        for N in ODE_DIMS:
            for a in ODE_ALPHAS:
                coarse = ode_matrix[N, a].value[-1]
                refined = solve_profile(ProblemParams(N), a, fine).value[-1]
                assert abs(coarse - refined) < 5 * base.rel_tol * max(1.0, abs(coarse)), (N, a)


def test_criterion_03_estimator_agreement(criterion, ode_matrix):
    with criterion("3", "estimator agreement"):
        for (N, a), prof in ode_matrix.items():
            gap = abs(estimate_L_integral(prof) - estimate_L_tail(prof).L)
            assert gap < 1e-5, (N, a, gap)


@pytest.fixture(scope="module")
def energy_profiles():
    return {(n, a): solve_profile(ProblemParams(3, PowerApprox(n)), a) for n, a in ENERGY_MATRIX}


def test_criterion_04_energy_monotone(criterion, energy_profiles):
    with criterion("4", "energy monotonicity"):
        for (n, a), prof in energy_profiles.items():
            trace = energy_trace(prof)
            E0 = energy_at_origin(n, a)
            assert trace.E[0] == pytest.approx(E0, rel=1e-12)
            assert trace.max_increase <= 1e-9 * E0, (n, a, trace.max_increase)


def _certificate(profile, name):
    return next(c for c in certify_decay(profile) if c.name == name)


@pytest.mark.xfail(strict=True, reason="|psi| exceeds sqrt(2(n-1)E(0)) (1+r)^(-2/(n-1)) near r ~ 2 "
                                       "(ratio 1.22 at n=5, alpha=0); confirmed by an independent integrator")
def test_criterion_05a_haraux_bounds(criterion, energy_profiles):
    with criterion("5a", "decay: order-dependent bounds", known_failure="bound exceeded near r ~ 2"):
        for key, prof in energy_profiles.items():
            assert _certificate(prof, "haraux").max_violation == 0.0, key


@pytest.mark.xfail(strict=True, reason="(psi/n)^n exceeds e^{|a|+e^{|a|}} (1+r)^(-2n/(n-1)) at alpha=0")
def test_criterion_05b_order_free_bound(criterion, energy_profiles):
    with criterion("5b", "decay: order-free bound", known_failure="bound exceeded at alpha=0"):
        for key, prof in energy_profiles.items():
            assert _certificate(prof, "order_free").max_violation == 0.0, key


def test_criterion_05c_gradient_bound(criterion):
    with criterion("5c", "decay: gradient bound"):
        p = ProblemParams(3, Exponential())
        coarse = _certificate(solve_profile(p, 0.0), "gradient")
        fine_cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, output_grid=Uniform(20001))
        fine = _certificate(solve_profile(p, 0.0, fine_cfg), "gradient")
        assert math.isfinite(coarse.C_alpha) and coarse.C_alpha > 0
        assert coarse.max_violation == 0.0
        assert abs(fine.C_alpha / coarse.C_alpha - 1) < 0.01


def test_criterion_06_power_convergence(criterion):
    with criterion("6", "power-approximation convergence"):
        rep = convergence_report(3, 0.0, [10, 100, 1000, 10000], r0=5.0, jobs=JOBS)
        sup = [e.sup_diff for e in rep.entries]
        lerr = [e.L_n_err for e in rep.entries]
        assert all(b < a for a, b in zip(sup, sup[1:])), sup
        assert all(b < a for a, b in zip(lerr, lerr[1:])), lerr


def test_criterion_07_multiplicity(criterion, scan):
    with criterion("7", "multiplicity dichotomy in N"):
        assert scan(10).critical_points == []
        for N in (3, 5, 9):
            crit = scan(N).critical_points
            assert len(crit) >= 1, N
            assert all(-2.0 < c < 8.0 for c in crit)
        d3 = scan(3)
        L_target = auto_level(d3)
        roots = solve_S_L(ProblemParams(3), L_target, d3)
        assert len(roots) >= 2
        profiles = [solve_profile(ProblemParams(3), a) for a in roots]
        result = classify_minimal(profiles)
        assert result.minimal_index == 0
        assert result.pointwise_ordered


def test_criterion_08_weak_gluing(criterion, branch_pair):
    with criterion("8", "weak gluing"):
        _, phi_L, _ = branch_pair(3)
        params = phi_L.params
        for make in (glued_supersolution, glued_subsolution):
            glued = make(phi_L, cfg=WIDE).glued
            bumps = standard_bumps(glued.glue_radius)
            assert weak_inequality_check(glued, params, bumps).passed, glued.kind
            assert not weak_inequality_check(_swap(glued), params, bumps).passed, glued.kind


def test_criterion_09_transport(criterion, branch_pair):
    with criterion("9", "self-similar transport"):
        _, phi_L, _ = branch_pair(3)
        err, out = transport_error(phi_L, SimConfig(t_max=2.0))
        assert out.snapshots, "run stopped before t = 2"
        assert err < 1e-4, err
        # spatial order on a window clear of the frozen boundary; with the
        # default stretch the error reaches a ~1e-8 floor before M = 1024
        errs = [transport_error(phi_L, SimConfig(t_max=2.0, grid_points=M, grid_stretch=4.0,
                                                 rtol=1e-10, atol=1e-10),
                                window=20.0)[0] for M in (256, 512, 1024)]
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(3.2 <= q <= 4.8 for q in orders), (errs, orders)


def test_criterion_10_dichotomy(criterion, scan):
    with criterion("10", "blow-up / global dichotomy"):
        for N in (3, 5, 9):
            diagram = scan(N)
            res = dichotomy_experiment(N, auto_level(diagram), 1.0, [0.05, 0.2, -0.05, -0.2],
                                       diagram=diagram, jobs=JOBS)
            for row in res.rows:
                if row.epsilon > 0:
                    assert row.classification == "BlowUp", (N, row)
                else:
                    assert row.classification == "Global", (N, row)
                    assert row.terminal_residual < 1e-4, (N, row.terminal_residual)
                    assert row.between_branches, (N, row.epsilon)


def test_criterion_11_monotone_and_comparison(criterion, branch_pair):
    with criterion("11", "monotone evolution and comparison"):
        minimal, phi_L, _ = branch_pair(3)
        params = phi_L.params
        edge = float(phi_L(60.0))
        sup = glued_supersolution(phi_L, cfg=WIDE).glued.sample()
        sub = glued_subsolution(phi_L, cfg=WIDE).glued.sample()
        down = simulate_self_similar(sup, params, SimConfig(s_max=40.0), boundary_value=edge)
        up = simulate_self_similar(sub, params, SimConfig(s_max=40.0), boundary_value=edge)
        assert isinstance(down.classification, Global)
        assert isinstance(up.classification, BlowUp)
        assert monotonicity_violation(down, increasing=False) < 1e-4
        assert monotonicity_violation(up, increasing=True) < 1e-4
        cfg = SimConfig(s_max=10.0)
        pairs = [(minimal, minimal), (minimal, phi_L), (phi_L.shifted(-0.1), phi_L),
                 (sup, phi_L), (minimal, sup)]
        for lower, upper in pairs:
            assert comparison_check(lower, upper, params, cfg).ordered


def _cli_pass(out):
    commands = [
        ["profile", "--N", "3", "--nonlinearity", "exp", "--alpha", "0"],
        ["profile", "--N", "3", "--nonlinearity", "approx:5", "--alpha", "0"],
        ["converge", "--N", "3", "--alpha", "0", "--ns", "10,100"],
        ["scan", "--N", "3", "--alpha-range", "-2:8:41", "--solve-L", "0.76"],
        ["scan", "--N", "10", "--alpha-range", "-2:8:11"],
    ]
    for k, cmd in enumerate(commands):
        assert main(cmd + ["--out", str(out / str(k)), "--reproducible"]) == 0, cmd


def test_criterion_12_determinism(criterion, tmp_path, branch_pair):
    with criterion("12", "determinism"):
        a, b = tmp_path / "a", tmp_path / "b"
        _cli_pass(a)
        _cli_pass(b)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.suffix in (".csv", ".json"))
        assert files
        for rel in files:
            assert filecmp.cmp(a / rel, b / rel, shallow=False), rel
        # glued profiles are written by the library, not by a command
        _, phi_L, _ = branch_pair(3)
        for name in ("g1.csv", "g2.csv"):
            glued_supersolution(phi_L, cfg=WIDE).glued.to_csv(tmp_path / name)
        assert filecmp.cmp(tmp_path / "g1.csv", tmp_path / "g2.csv", shallow=False)
        # replaying a manifest reproduces the outputs
        assert main(["rerun", "--manifest", str(a / "0" / "manifest.json"), "--out", str(tmp_path / "c")]) == 0
        for p in (a / "0").glob("*.csv"):
            assert filecmp.cmp(p, tmp_path / "c" / p.name, shallow=False)
