"""Shared fixtures: hypothesis profile, solver cache, acceptance verdicts."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from aoi_twoway import ServiceRates, build_mdp_1p, build_mdp_2p, solve_rvi
from aoi_twoway.rvi import SolveConfig

ACCEPTANCE_KEY = pytest.StashKey[list]()

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


class SolverCache:
    """Memoize (capacity, gamma, mu, cap, epsilon) -> (FiniteMdp, Solution).

    Acceptance criteria reuse each other's solves; keeping the built models
    around lets the structure checks inspect policies without re-solving.
    """

    def __init__(self) -> None:
        self._store: dict[tuple, tuple] = {}

    def solve(self, capacity: int, gamma: float, mu: float, cap: int,
              epsilon: float):
        key = (capacity, gamma, mu, cap, epsilon)
        if key not in self._store:
            rates = ServiceRates(gamma, mu)
            build = build_mdp_1p if capacity == 1 else build_mdp_2p
            mdp = build(rates, cap)
            self._store[key] = (mdp, solve_rvi(mdp, SolveConfig(epsilon=epsilon)))
        return self._store[key]

    def solutions(self):
        """All (key, mdp, solution) triples solved so far."""
        return [(k, m, s) for k, (m, s) in sorted(self._store.items())]


@pytest.fixture(scope="session")
def rvi_cache() -> SolverCache:
    return SolverCache()


@pytest.fixture
def acceptance(request):
    """Verdict recorder for the acceptance gate.

    Calling it prints and stores one ``ACCEPTANCE <n>: PASS/FAIL - detail``
    line (replayed as a terminal section after the run, where output
    capture cannot swallow it) and then asserts.
    """
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def report(n: int, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        lines.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
