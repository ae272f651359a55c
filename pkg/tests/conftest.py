import json
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def root():
    return ROOT


def minimal_scenario(**overrides):
    """One straight lane, no actors, one waypoint."""
    doc = {
        "lanes": [{"centerline": [[-30, 0], [230, 0]], "lane_width": 3.5, "curb_offset": 2.5}],
        "actors": [],
        "ego": {},
        "mission": {"start": [0, 0, 0], "waypoints": [[50, 0]], "goal_radius": 3.0, "time_budget": 60},
        "tick_rate": 15,
        "weather": 0.0,
    }
    doc.update(overrides)
    return doc


def open_field(**overrides):
    """No lanes at all: rays see nothing, lane metrics are off-map."""
    doc = minimal_scenario(**overrides)
    doc["lanes"] = []
    return doc


@pytest.fixture
def minimal_world():
    from faultdrive.world import world_from_dict

    return world_from_dict(minimal_scenario())
