import pytest

from knapp_cantor.cantor import build_all_stages
from knapp_cantor.params import ParamSequences, derive_exponents, generate_sequences


@pytest.fixture(scope="session")
def exp2():
    return derive_exponents(2, 1.5, 1.5)


@pytest.fixture(scope="session")
def tiny(exp2):
    return ParamSequences(exp2, (2, 1), (3, 4), (8, 12))


@pytest.fixture(scope="session")
def seq6(exp2):
    return generate_sequences(exp2, 6)


@pytest.fixture(scope="session")
def stages6(seq6):
    return build_all_stages(seq6, 5, 0)


@pytest.fixture(scope="session")
def seq3d():
    return generate_sequences(derive_exponents(3, 2.5, 2.5), 4)


@pytest.fixture(scope="session")
def stages3d(seq3d):
    return build_all_stages(seq3d, 3, 0)


_ACCEPTANCE: dict[tuple[int, str], str] = {}


@pytest.fixture
def accept():
    """Record one pass/fail line per acceptance criterion."""
    def record(num: int, ok: bool, detail: str, case: str = ""):
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[(num, case)] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])
