"""Shared fixtures: a small dataset, a mock-backed session manager factory."""

from __future__ import annotations

import pytest

from tacit.ingest import parse_tabular
from tacit.provider import MockProvider
from tacit.store import LogicalClock, SessionManager

SALES_CSV = (
    b"region,units,price,note\n"
    b"north,10,1.5,ok\n"
    b"south,20,2.5,fine\n"
    b"east,30,3.5,\n"
    b"west,40,4.5,good\n"
)

LONG_ANSWER = "collected by the regional sales team between 2019 and 2023"


@pytest.fixture
def sales_dataset():
    return parse_tabular(SALES_CSV, name="sales")


@pytest.fixture
def mock_provider():
    return MockProvider(seed=7)


@pytest.fixture
def manager_factory(tmp_path):
    """Build a fully offline SessionManager rooted in a temp directory."""

    made = []

    def build(seed: int = 7, subdir: str = "a", **kwargs):
        provider = MockProvider(seed=seed)
        manager = SessionManager(
            tmp_path / subdir,
            provider,
            clock=LogicalClock(),
            default_seed=seed,
            **kwargs,
        )
        made.append(manager)
        return manager

    return build


@pytest.fixture
def session(manager_factory):
    """One bootstrapped session plus its manager."""
    manager = manager_factory()
    session_id = manager.create_session(SALES_CSV, "sales.csv")
    return manager, session_id
