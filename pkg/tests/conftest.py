import numpy as np
import pytest

from petqst.datagen import DatasetSpec, build_dataset
from petqst.qstate import NoiseSpec


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


@pytest.fixture(scope="session")
def small_dataset():
    return build_dataset(DatasetSpec(2, 20, NoiseSpec(), seed=11))


def pytest_terminal_summary(terminalreporter):
    from checks import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
