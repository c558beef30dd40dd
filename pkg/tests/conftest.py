from __future__ import annotations

from pathlib import Path

import pytest

from planlens.insights import load_history
from planlens.model import load_dataset
from planlens.pipeline import OfflineTranslator, load_example_bank, open_session
from planlens.solver import solve

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
DEMO_DIR = FIXTURES / "demo_net"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DEMO_DIR


@pytest.fixture(scope="session")
def demo():
    return load_dataset(DEMO_DIR / "network.json", DEMO_DIR / "demand.csv")


@pytest.fixture(scope="session")
def demo_network(demo):
    return demo[0]


@pytest.fixture(scope="session")
def demo_demand(demo):
    return demo[1]


@pytest.fixture(scope="session")
def demo_plan(demo):
    return solve(*demo)


@pytest.fixture(scope="session")
def example_bank():
    return load_example_bank(FIXTURES / "banks" / "examples.jsonl")


@pytest.fixture(scope="session")
def demo_history():
    return load_history(DEMO_DIR / "history.jsonl")


@pytest.fixture()
def demo_session(demo, example_bank, demo_history):
    network, demand = demo
    return open_session(network, demand, OfflineTranslator(), example_bank,
                        history=demo_history)
