from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from .helpers import empty_room

settings.register_profile(
    "repo", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@pytest.fixture
def room7():
    return empty_room(7, 7)


@pytest.fixture
def room9():
    return empty_room(9, 9)
