import numpy as np
import pytest

from css_snn.conversion import calibrate, convert
from css_snn.files import fixture_path, load_dataset, load_network

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def _toy(name):
    spec = load_network(fixture_path(f"{name}.json"))
    x_cal, _ = load_dataset(fixture_path(f"{name}_calib.json"))
    x_test, y_test = load_dataset(fixture_path(f"{name}_test.json"))
    calib = calibrate(spec, np.array_split(x_cal, 4))
    return spec, calib, x_test, y_test


@pytest.fixture(scope="session")
def toy_mlp():
    return _toy("mlp")


@pytest.fixture(scope="session")
def toy_cnn():
    return _toy("cnn")


@pytest.fixture(scope="session")
def cnn_model(toy_cnn):
    spec, calib, _, _ = toy_cnn
    return convert(spec, calib, horizon=8, precharge=1, alpha=0.5)
