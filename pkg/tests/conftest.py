"""Shared fixtures plus one-line reporting for the acceptance tests."""

import time

import numpy as np
import pytest

from carisk import ModelSpec, NicSpec, PriorSpec, SamplerConfig, run_chain

from synthetic import sav_var_series

_acceptance: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "setup" and report.skipped:
        _acceptance[name] = "SKIP"
    elif report.when == "call":
        if report.skipped:
            _acceptance[name] = "SKIP"
        else:
            _acceptance[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.write_sep("-", "acceptance summary")
    for name in sorted(_acceptance):
        terminalreporter.write_line(f"[acceptance] {name}: {_acceptance[name]}")


@pytest.fixture(scope="session")
def sav_fit_builder():
    """Memoised frozen-seed fits of the SAV recovery fixture.

    Data seeds come from SeedSequence([44, rep]) inside sav_var_series and
    chain seeds from SeedSequence([45, rep]), so every call is reproducible;
    the heavy chains are built at most once per session.
    """
    cache = {}
    spec = ModelSpec(nic=NicSpec("sav"), alpha=1, tau=0.05)

    def build(rep):
        if rep not in cache:
            y_full = sav_var_series(3000, rep)
            seed = int(np.random.SeedSequence([45, rep]).generate_state(1)[0])
            cfg = SamplerConfig(iterations=50_000, burnin=20_000, thin=1, seed=seed)
            t0 = time.monotonic()
            fit = run_chain(spec, PriorSpec(), cfg, y_full[:2000])
            cache[rep] = (y_full, fit, time.monotonic() - t0)
        return cache[rep]

    build.spec = spec
    return build
