import numpy as np
import pytest

from hetvfc.campaign import build_slot, slot_instance, slot_sequence
from hetvfc.config import ExperimentConfig, apply_override

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def default_slot(seed: int, **overrides):
    """``(scenario, rates, instance)`` of slot 0 at the default settings."""
    cfg = ExperimentConfig()
    for name, value in overrides.items():
        cfg = apply_override(cfg, name.replace("__", "."), value)
    _, vehicles = next(slot_sequence(cfg, seed))
    scenario, rates = build_slot(cfg, vehicles, seed, 0)
    return scenario, rates, slot_instance(cfg, scenario, rates.total)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")
