import numpy as np
import pytest

from rshdmr import datasets as ds
from rshdmr.gpr import KernelParams
from rshdmr.hdmr import TrainingSchedule, hdmr_train
from rshdmr.projection import build_one_d

KERNEL = KernelParams(0.6, 1e-10)
SCHEDULE = TrainingSchedule(50, 0.1, 2.0)

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def additive_data():
    return ds.gen_additive(2000, 3, seed=11)


@pytest.fixture(scope="session")
def additive_model(additive_data):
    model, report = hdmr_train(additive_data.subset(np.arange(100)), build_one_d(3), KERNEL, SCHEDULE,
                               eval_data=additive_data)
    return model, report


@pytest.fixture(scope="session")
def quartic_model():
    data = ds.gen_quartic(2000, seed=5)
    model, report = hdmr_train(data.subset(np.arange(100)), build_one_d(3), KERNEL, SCHEDULE,
                               eval_data=data)
    return data, model, report


@pytest.fixture
def acceptance_line(request):
    """Record a one-line PASS/FAIL verdict for the terminal summary."""
    def record(criterion, passed, detail, status=None):
        status = status or ("PASS" if passed else "FAIL")
        ACCEPTANCE_LINES.append(f"[{status}] {criterion}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
