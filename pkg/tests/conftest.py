import contextlib
import os

import pytest

from selfsim.core import ProblemParams
from selfsim.radial_ode import IntegratorConfig, solve_profile

JOBS = max(1, min(4, os.cpu_count() or 1))
SCAN_RANGE = (-2.0, 8.0, 201)
WIDE = IntegratorConfig(r_max=62.0)  # covers the default simulation domain

_RESULTS = {}


@pytest.fixture(scope="session")
def scan():
    """Lazily computed and cached alpha scans keyed by dimension."""
    from selfsim.shooting import scan_alpha

    cache = {}

    def get(N):
        if N not in cache:
            cache[N] = scan_alpha(ProblemParams(N), *SCAN_RANGE, jobs=JOBS)
        return cache[N]

    return get


@pytest.fixture(scope="session")
def branch_pair(scan):
    """(minimal, non-minimal, L_target) for a level crossed by two branches."""
    from selfsim.pde_sim import auto_level
    from selfsim.shooting import solve_S_L

    cache = {}

    def get(N):
        if N not in cache:
            diagram = scan(N)
            L = auto_level(diagram)
            roots = solve_S_L(ProblemParams(N), L, diagram)
            p = ProblemParams(N)
            cache[N] = (solve_profile(p, roots[0], WIDE), solve_profile(p, roots[1], WIDE), L)
        return cache[N]

    return get


@pytest.fixture
def criterion():
    """Context manager recording one acceptance line per criterion."""

    @contextlib.contextmanager
    def record(key, title, known_failure=None):
        try:
            yield
        except BaseException as exc:
            if isinstance(exc, pytest.skip.Exception):
                raise
            note = f" (known: {known_failure})" if known_failure else f" ({type(exc).__name__})"
            _RESULTS[key] = f"{key:>4} {title}: FAIL{note}"
            raise
        _RESULTS[key] = f"{key:>4} {title}: PASS"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(_RESULTS[key])
