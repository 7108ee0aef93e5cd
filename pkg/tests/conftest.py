import pytest

from pointnls.domain import DiscreteDomain, auto_truncation

ACCEPTANCE_LINES: list[str] = []


def domain_for(spec, h=0.01, X=None):
    X = X or auto_truncation(spec.omega, spec.p)
    return DiscreteDomain.build(spec.model.domain_kind, spec.model.n_edges, X, h)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
