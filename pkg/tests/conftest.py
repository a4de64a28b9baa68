import numpy as np
import pytest

from indexmod.core import ModulationAlphabet, build_pattern_set


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def table1_set():
    """Antenna pattern set used in the (4, 2) bit-mapping table."""
    return build_pattern_set(4, 2, ["1100", "1010", "0101", "0011"])


@pytest.fixture
def qam4_example_labeling():
    """4-QAM labeling implied by the sub-matrix B_1 worked example."""
    return ModulationAlphabet.from_labels({"00": -1 + 1j, "01": -1 - 1j, "10": 1 + 1j, "11": 1 - 1j})


@pytest.fixture
def sf_example_set():
    """Frequency pattern set for n_rf=2, n_f=4, k=7, in the published order."""
    rows = ["01111111", "10111111", "11011111", "11101111",
            "11110111", "11111011", "11111101", "11111110"]
    return build_pattern_set(8, 7, rows)


@pytest.fixture
def qam4_gsim_labeling():
    """4-QAM labeling for the (4, 2) transmit-vector example.

    Only 00 and 11 are pinned by the example; 01 and 10 complete a Gray map.
    """
    return ModulationAlphabet.from_labels({"00": 1 + 1j, "01": 1 - 1j, "10": -1 + 1j, "11": -1 - 1j})


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_N_CRITERIA = 11


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert it."""
    def report(n: int, ok: bool, detail: str) -> None:
        prev = _ACCEPTANCE.get(n)
        ok = ok and (prev is None or prev[0])
        detail = detail if prev is None else f"{prev[1]}; {detail}"
        _ACCEPTANCE[n] = (ok, detail)
        assert ok, f"criterion {n}: {detail}"
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, _N_CRITERIA + 1):
        ok, detail = _ACCEPTANCE.get(n, (False, "not run"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
