import pytest

from gloss.trainer import TrainConfig, fit
from helpers import slot_corpus

ACCEPTANCE_FILE = "test_acceptance.py"


@pytest.fixture(scope="session")
def tiny_lines():
    return slot_corpus(n=40, pool=6, min_len=2, max_len=5, seed=3)


@pytest.fixture(scope="session")
def tiny_bow(tiny_lines):
    model, _ = fit(tiny_lines, TrainConfig(model_kind="bow", d=16, epochs=60, lr=1e-2, batch_size=16, L_max=8))
    return model


@pytest.fixture(scope="session")
def tiny_pos(tiny_lines):
    model, _ = fit(tiny_lines, TrainConfig(model_kind="pos", d=32, epochs=150, lr=1e-2, batch_size=16, L_max=8))
    return model


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if ACCEPTANCE_FILE in getattr(rep, "nodeid", "") and rep.when == "call":
                lines.append((rep.nodeid.split("::")[-1], outcome))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, outcome in sorted(lines):
            terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
