import numpy as np
import pytest

from saferoute.network import BayesianNetwork, Schema

ACCEPTANCE_LINES = []


def record_acceptance(number, title, ok, detail=""):
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def chain_ab():
    """A -> B with P(A=1)=0.3, P(B=1|A=1)=0.9, P(B=1|A=0)=0.2."""
    schema = Schema.binary(["A", "B"])
    return BayesianNetwork.from_tables(
        schema, [(), (0,)], [[[0.7, 0.3]], [[0.8, 0.2], [0.1, 0.9]]]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
