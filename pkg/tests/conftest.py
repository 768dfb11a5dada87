"""Shared desk-scale runs and the per-criterion acceptance report.

Desk runs are expensive (tens of seconds each on one core), so every
acceptance test pulls them from one session cache keyed by the resolved
configuration. Tests tagged with ``criterion(n, title)`` get one summary
line each at the end of the session, together with any measurements they
attached through the ``acceptance_note`` fixture.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from mmgn.analysis import ablation_nmse
from mmgn.experiment import desk_spec, loss_history_csv, run_experiment

_OUTCOMES: dict[int, tuple[str, str, list[str]]] = {}
_NOTES: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    n, title = marker.args
    if hasattr(report, "wasxfail"):
        status = "PASS (tracked expectation met)" if report.passed else \
            "MISSED (tracked expectation, logged as a deviation)"
    else:
        status = "PASS" if report.passed else "FAIL"
    _OUTCOMES[n] = (status, title, _NOTES.get(item.nodeid, []))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status, title, notes = _OUTCOMES[n]
        tr.write_line(f"criterion {n:2d}: {status:<52} {title}")
        for note in notes:
            tr.write_line(f"              {note}")


@pytest.fixture
def acceptance_note(request):
    notes = _NOTES.setdefault(request.node.nodeid, [])

    def note(text: str):
        notes.append(text)
        print(text)

    return note


@dataclass
class DeskRun:
    arch: str
    seed: int
    mse: float
    metrics_csv: str
    history_csv: str
    n_params: int
    seconds: float
    mean_nmse: float | None  # MMGN only


class DeskRuns:
    """Memoized desk-scale experiments shared by the acceptance tests."""

    def __init__(self):
        self._cache: dict[str, DeskRun] = {}

    def get(self, arch: str, seed: int, **dotted) -> DeskRun:
        spec = desk_spec(arch, seed, **dotted)
        key = spec.to_json()
        if key not in self._cache:
            started = time.perf_counter()
            res = run_experiment(spec)
            seconds = time.perf_counter() - started
            mean_nmse = None
            if arch == "mmgn":
                mean_nmse = float(ablation_nmse(res.train.model, res.train.latents,
                                                res.truth).mean())
            self._cache[key] = DeskRun(arch, seed, res.metrics.mse, res.metrics.to_csv(),
                                       loss_history_csv(res.train.history),
                                       res.train.model.n_params(), seconds, mean_nmse)
        return self._cache[key]


@pytest.fixture(scope="session")
def desk_runs():
    return DeskRuns()
