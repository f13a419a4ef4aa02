import numpy as np
import pytest

from dlshift.gfunc import TransactionHistory
from dlshift.synthgen import GeneratorConfig, generate_table


@pytest.fixture(scope="session")
def reference_config():
    return GeneratorConfig()


@pytest.fixture(scope="session")
def reference_table(reference_config):
    return generate_table(reference_config)


@pytest.fixture(scope="session")
def reference_history(reference_config, reference_table):
    c = reference_config
    return TransactionHistory(reference_table, c.grid, c.score_support)


@pytest.fixture(scope="session")
def small_config():
    return GeneratorConfig(seed=7, periods=20, txns_per_period=2000)


@pytest.fixture(scope="session")
def small_table(small_config):
    return generate_table(small_config)


@pytest.fixture(scope="session")
def small_txns(small_table):
    return small_table.to_transactions()


@pytest.fixture(scope="session")
def small_history(small_config, small_table):
    return TransactionHistory(small_table, small_config.grid, small_config.score_support)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown after the test run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
