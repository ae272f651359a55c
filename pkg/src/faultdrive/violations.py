"""Traffic-violation detection over frame-to-frame world transitions.

Violations are edge-triggered by default: one event per continuous
excursion off the lane / onto the curb, and one event per actor contact
(with a cooldown before the same actor can count again). Per-frame counting
is available behind `count_mode` for comparison, but it makes rates
tick-rate-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .world import ActorKind, OffMapError, Pose, World, lane_metrics, query_collisions

VIOLATION_KINDS = (
    "lane",
    "curb",
    "collision_pedestrian",
    "collision_vehicle",
    "collision_static",
)

ACCIDENT_KINDS = frozenset(
    {"collision_pedestrian", "collision_vehicle", "collision_static"}
)

_COLLISION_KIND = {
    ActorKind.PEDESTRIAN: "collision_pedestrian",
    ActorKind.VEHICLE: "collision_vehicle",
    ActorKind.STATIC_OBSTACLE: "collision_static",
}

DEFAULT_CONTACT_COOLDOWN = 30  # frames (2 s at 15 fps)


def is_accident(kind: str) -> bool:
    """Accidents are exactly the collision-class violations."""
    return kind in ACCIDENT_KINDS


@dataclass(frozen=True)
class ViolationEvent:
    kind: str
    frame: int
    time: float
    position: Pose


@dataclass(frozen=True)
class ViolationLedger:
    """Accumulated events plus the open-excursion state needed to
    deduplicate. Immutable; `observe` returns an updated copy."""

    events: tuple[ViolationEvent, ...] = ()
    lane_open: bool = False
    curb_open: bool = False
    in_contact: frozenset = frozenset()
    last_contact_frame: Mapping[int, int] = None
    count_mode: str = "edge"
    contact_cooldown: int = DEFAULT_CONTACT_COOLDOWN

    def __post_init__(self):
        if self.last_contact_frame is None:
            object.__setattr__(self, "last_contact_frame", {})
        if self.count_mode not in ("edge", "per_frame"):
            raise ValueError(f"unknown count_mode {self.count_mode!r}")


def observe(ledger: ViolationLedger, prev: World, nxt: World) -> ViolationLedger:
    """Fold the prev->next transition into the ledger.

    Lane/curb events fire on the false->true edge of the respective flag;
    collision events fire on first contact per actor, again after the
    cooldown. An ego beyond the map horizon counts as off-lane and on-curb.
    """
    if nxt.frame != prev.frame + 1:
        raise ValueError(f"observe needs consecutive frames, got {prev.frame} -> {nxt.frame}")

    try:
        metrics = lane_metrics(nxt)
        off_lane, on_curb = metrics.off_lane, metrics.on_curb
    except OffMapError:
        off_lane, on_curb = True, True

    per_frame = ledger.count_mode == "per_frame"
    events = list(ledger.events)
    t = nxt.time
    pos = nxt.ego.pose

    if off_lane and (per_frame or not ledger.lane_open):
        events.append(ViolationEvent("lane", nxt.frame, t, pos))
    if on_curb and (per_frame or not ledger.curb_open):
        events.append(ViolationEvent("curb", nxt.frame, t, pos))

    contacts = query_collisions(nxt)
    now_contact = set()
    last = dict(ledger.last_contact_frame)
    for c in contacts:
        now_contact.add(c.actor_index)
        fresh = c.actor_index not in ledger.in_contact and (
            c.actor_index not in last
            or nxt.frame - last[c.actor_index] >= ledger.contact_cooldown
        )
        if per_frame or fresh:
            events.append(ViolationEvent(_COLLISION_KIND[c.kind], nxt.frame, t, pos))
        last[c.actor_index] = nxt.frame

    return replace(
        ledger,
        events=tuple(events),
        lane_open=off_lane,
        curb_open=on_curb,
        in_contact=frozenset(now_contact),
        last_contact_frame=last,
    )
