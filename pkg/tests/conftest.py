import pytest

from getae.dataset import make_synthetic_dataset

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, printed at the end of the run."""

    def record(number: int, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(_ACCEPTANCE[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synthetic_root(tmp_path_factory):
    return make_synthetic_dataset(tmp_path_factory.mktemp("synth") / "data", n_per_class=10, seed=3)
