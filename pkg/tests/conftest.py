from __future__ import annotations

import json
from pathlib import Path

import pytest

from feedbackkit.gateway import Gateway, MockProvider

FIXTURES = Path(__file__).parent / "fixtures"
CAPTIONS = FIXTURES / "captions"
MOCK = FIXTURES / "mock"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def pipeline_table() -> dict:
    with open(MOCK / "pipeline_table.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def judge_table() -> dict:
    with open(MOCK / "judge_table.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def mock_gateway(pipeline_table):
    return Gateway(MockProvider(pipeline_table))


def make_gateway(table=None, responder=None, **kwargs) -> Gateway:
    return Gateway(MockProvider(table or {}, responder=responder), **kwargs)
