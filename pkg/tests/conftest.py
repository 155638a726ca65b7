from __future__ import annotations

import numpy as np
import pytest

from opgauge import field_expr as fe
from opgauge import operator_core as oc
from opgauge.cli.scenario import Sampling, random_field, random_potential
from opgauge.gauge import GaugePotential, GaugeTransformation

X, Y, Z = oc.PAULI_X, oc.PAULI_Y, oc.PAULI_Z


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion, title): one of the acceptance criteria")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        item.config._acceptance[marker.kwargs["criterion"]] = (marker.kwargs["title"], report.outcome, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, outcome, detail = results[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] criterion {n}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_random_case(seed: int, dim: int, basis: str = "monomial", central: bool = False, points: int = 32):
    """Seeded non-Abelian potential, time-dependent generator and sample points."""
    rng = np.random.default_rng([seed, dim])
    a = GaugePotential(random_potential(rng, dim, basis=basis, central=central))
    lam = random_field(rng, dim, basis=basis, terms=2, central=central, time_dependent=True)
    s = GaugeTransformation.from_generator(lam)
    pts = Sampling(points=points, seed=seed).sample_points()
    return a, lam, s, pts


def const(m):
    return fe.constant(m)
