import numpy as np
import pytest

#: one PASS/FAIL line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def random_density_matrix(rng, rank=None, dim=4):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def small_config(preset, n_cycles, overrides=None):
    """Config text of a shipped preset with a reduced cycle count and ``{"section.key": value}`` edits."""
    from qdrelay.config import preset_text, with_overrides

    table = {"clock.n_cycles": str(int(n_cycles))}
    table.update(overrides or {})
    return with_overrides(preset_text(preset), table)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
