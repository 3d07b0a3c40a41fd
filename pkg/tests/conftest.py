import pytest

from bgpwaves import kpp, mfg
from bgpwaves.alpha import Power
from bgpwaves.config import NumericsConfig


@pytest.fixture(scope="session")
def logistic():
    return kpp.Kernel.logistic(2.0)


@pytest.fixture(scope="session")
def unit_kernel():
    return kpp.Kernel.constant(1.0)


@pytest.fixture(scope="session")
def critical_22(logistic):
    return kpp.critical_wave(logistic, 2.2)


@pytest.fixture(scope="session")
def canonical_params():
    return mfg.ModelParams(1.0, 3.0, Power(2.0, 0.5))


@pytest.fixture(scope="session")
def canonical_bgp(canonical_params):
    """Default numerics: n = 40 with the extension pass to n = 80."""
    return mfg.bgp_critical(canonical_params)


@pytest.fixture(scope="session")
def quick_cfg():
    return NumericsConfig(n=20.0, n_core=801, extend=False)


@pytest.fixture(scope="session")
def quick_bgp(canonical_params, quick_cfg):
    return mfg.bgp_critical(canonical_params, cfg=quick_cfg)


@pytest.fixture(scope="session")
def super_bgps(canonical_params):
    cfg = NumericsConfig(n=40.0, n_core=1601)
    return {ell0: mfg.bgp_supercritical(canonical_params, 2.9, 0.0, ell0, cfg=cfg)
            for ell0 in (0.5, 0.2)}


_ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion(request):
    """Print one PASS/FAIL line per acceptance criterion (also repeated in the summary)."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, passed: bool, detail: str):
        line = f"ACCEPTANCE criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


_SLOW_FIXTURES = {"canonical_bgp", "quick_bgp", "super_bgps"}


def pytest_collection_modifyitems(items):
    for item in items:
        if _SLOW_FIXTURES & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)
