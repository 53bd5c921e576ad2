from pathlib import Path

import pytest

from steadytrunc.parser import load_model, parse_model

MODELS = Path(__file__).resolve().parents[1] / "src" / "steadytrunc" / "models"

BIRTH_DEATH_SMALL = """
species S;
param mu = 10;
param gamma = 1;
0 -> S @ mass_action(mu);
S -> 0 @ mass_action(gamma);
"""


def pytest_addoption(parser):
    parser.addoption("--deep", action="store_true", default=False, help="run the full-depth p53 refinement")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--deep"):
        return
    skip = pytest.mark.skip(reason="needs --deep")
    for item in items:
        if "deep" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def models_dir():
    return MODELS


@pytest.fixture(scope="session")
def bd_small():
    return parse_model(BIRTH_DEATH_SMALL)


@pytest.fixture(scope="session")
def bd():
    return load_model(MODELS / "birth_death.model")


@pytest.fixture(scope="session")
def pbd():
    return load_model(MODELS / "parallel_birth_death.model")


@pytest.fixture(scope="session")
def switch():
    return load_model(MODELS / "exclusive_switch.model")


@pytest.fixture(scope="session")
def p53():
    return load_model(MODELS / "p53.model")


ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail check for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        detail = "; ".join(f"{'ok' if ok else 'NOT MET'}: {d}" for ok, d in checks)
        terminalreporter.write_line(f"criterion {number}: {status} | {detail}")
