import pytest

from obicsim.calibration import MEASURED_ANCHORS, fit_params
from obicsim.netlist import InputPattern, builtin_fixtures, libval_nand_chain
from obicsim.photo import LaserSpot, nmos_center
from obicsim.traces import NoiseModel, Scenario

_CRITERIA = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    _CRITERIA.append((name, passed, detail))


@pytest.fixture(scope="session")
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def lib():
    return builtin_fixtures()


@pytest.fixture(scope="session")
def nand(lib):
    return lib.cell("NAND2X1")


@pytest.fixture(scope="session")
def chain():
    return libval_nand_chain()


@pytest.fixture(scope="session")
def nmos_spot(chain):
    cx, cy = nmos_center(chain)
    return LaserSpot(cx, cy, power_pct=7.0)


@pytest.fixture(scope="session")
def measured_fit(chain, nmos_spot):
    return fit_params(MEASURED_ANCHORS, chain, nmos_spot)


@pytest.fixture(scope="session")
def make_scenario(chain, nmos_spot, measured_fit):
    def make(pattern="01", power=7.0, amplitude=0.1, jitter=(11.0, 12.0), seed=0, kind="uniform", params=None):
        return Scenario(
            chain,
            pattern=InputPattern(pattern),
            spot=nmos_spot.with_power(power),
            params=params or measured_fit.params,
            noise=NoiseModel(kind, amplitude),
            jitter=jitter,
            seed=seed,
            design_ref="LIBVAL_NAND_CHAIN",
        )

    return make
