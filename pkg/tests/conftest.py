import pytest

from cziswap.cli import load_calibration
from cziswap.dynamics import DeviceParams, Propagator


@pytest.fixture(scope="session")
def params():
    return DeviceParams.table1()


@pytest.fixture(scope="session")
def prop(params):
    return Propagator(params)


@pytest.fixture(scope="session")
def shipped():
    """Calibrations and SWAP correction from the record shipped with the package."""
    return load_calibration()


@pytest.fixture(scope="session")
def cals(shipped):
    return shipped[0]


# criterion number -> one-line verdict, filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
