import numpy as np
import pytest

from splitkit.problems import gen_hamiltonian, gen_hermitian, gen_real_symmetric

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hs8():
    return gen_hermitian(8, 1)


@pytest.fixture(scope="session")
def hs4():
    return gen_hermitian(4, 0)


@pytest.fixture(scope="session")
def rs10():
    return gen_real_symmetric(10, 0)


@pytest.fixture(scope="session")
def hs10():
    return gen_hermitian(10, 0)


@pytest.fixture(scope="session")
def hm10():
    return gen_hermitian(10, 0, multiplicities=[3, 3, 2, 2])


@pytest.fixture(scope="session")
def ham3():
    return gen_hamiltonian(3, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
