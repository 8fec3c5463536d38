import pytest

from impulse_control import InventoryParams, inventory_model

# Frozen reference values for the desk-scale problem (D=1, H=1, K=0.5, alpha=1, L=10).
# Each was computed from its defining equation at 40 digits with mpmath,
# independently of this package.
REF = {
    "a_g": {0.1: 2.0907174051554846, 0.3: 1.4037438611542598, 1.0: 0.85767667394589906,
            10.0: 0.30040325597722213},
    "g_c": 0.39795254731591654,
    "a_gc": 1.2564312086261697,
    "d_c": 0.75643120862616968,
    "tau_half": 0.31252113410444407,
    "a_star": {1.0: 1.5936242600400401, 3.0: 3.9206903948728863},
    "g_hat": {1.0: 0.21478314826517989, 3.0: 0.010985495001374598},
    "v0_immediate": {1.0: 0.62750048745798763, 3.0: 0.5101142397306897},
    "w0_g03": 0.92112315834627793,
    "eoq_a": 1.5807222731956848,       # a_g at alpha = 1e-3, g = 0.4
    "cycle_v": (0.79098835343466321, 0.58197670686932642),  # strategy (x/D, 1) from 0
}


@pytest.fixture(scope="session")
def p0():
    return InventoryParams(D=1.0, K=0.5, H=1.0, alpha=1.0, L=10.0)


@pytest.fixture(scope="session")
def m0(p0):
    return inventory_model(p0)


@pytest.fixture(scope="session")
def p_never():
    return InventoryParams(D=1.0, K=2.0, H=1.0, alpha=1.0, L=10.0)


@pytest.fixture(scope="session")
def m_never(p_never):
    return inventory_model(p_never)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for the acceptance summary and echo it."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
