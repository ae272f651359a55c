"""Deterministic 2D urban driving simulator.

A world is an immutable snapshot: lane-graph map, kinematic ego vehicle,
scripted actors, mission progress, clock. `step` advances it by exactly one
tick; there is no hidden state and no randomness, so identical command
sequences reproduce bit-identical traces.

Coordinate frame: x east, y north, headings in radians counter-clockwise
from +x, normalized into [-pi, pi). Positive steer turns the ego
counter-clockwise (to its left). All lengths are meters, times seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional

import numpy as np

DEFAULT_TICK_RATE = 15.0
DEFAULT_WHEELBASE = 2.7
DEFAULT_HALF_WIDTH = 0.9
DEFAULT_V_MAX = 20.0
DEFAULT_MAX_STEER = math.radians(35.0)
DEFAULT_ACCEL = 3.0
DEFAULT_BRAKE_DECEL = 8.0
DEFAULT_DRAG = 0.05

# Ego collision footprint is a rectangle centered on the pose:
# length = wheelbase + EGO_LENGTH_PAD, width = 2 * half_width.
EGO_LENGTH_PAD = 1.0

# lane_metrics raises OffMapError when no lane segment is closer than this.
OFF_MAP_HORIZON = 50.0

_TWO_PI = 2.0 * math.pi


class ScenarioError(ValueError):
    """Scenario document failed to parse or violates a field invariant."""


class OffMapError(RuntimeError):
    """Ego has no lane segment within the configured horizon."""


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi). Values already in range pass through
    unchanged (bit-exact), which keeps zero-steer headings stable."""
    if -math.pi <= theta < math.pi:
        return theta
    wrapped = math.fmod(theta + math.pi, _TWO_PI)
    if wrapped < 0.0:
        wrapped += _TWO_PI
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    def distance_to(self, other: "Pose") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


class ActorKind(str, Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"
    STATIC_OBSTACLE = "static_obstacle"


@dataclass(frozen=True)
class LaneSegment:
    """One directed lane: a centerline polyline with a drivable band around it.

    |lateral offset| <= lane_width/2 is in-lane; <= curb_offset is on the
    road surface; beyond the curb is off-road.
    """

    centerline: tuple[Pose, ...]
    lane_width: float
    curb_offset: float


@dataclass(frozen=True)
class Actor:
    """Scripted traffic participant with a circular footprint.

    The script is a sequence of (frame, target pose) waypoints; the actor
    moves by linear interpolation from its pose at the previous waypoint
    (or `origin`, its frame-0 pose) and holds position after the last one.
    """

    kind: ActorKind
    pose: Pose
    speed: float
    radius: float
    script: tuple[tuple[int, Pose], ...] = ()
    origin: Optional[Pose] = None

    def __post_init__(self):
        if self.origin is None:
            object.__setattr__(self, "origin", self.pose)


@dataclass(frozen=True)
class EgoState:
    """Ego vehicle state plus the physics constants that govern it."""

    pose: Pose
    speed: float = 0.0
    wheelbase: float = DEFAULT_WHEELBASE
    half_width: float = DEFAULT_HALF_WIDTH
    v_max: float = DEFAULT_V_MAX
    max_steer: float = DEFAULT_MAX_STEER
    accel: float = DEFAULT_ACCEL
    brake_decel: float = DEFAULT_BRAKE_DECEL
    drag: float = DEFAULT_DRAG


@dataclass(frozen=True)
class Mission:
    start: Pose
    waypoints: tuple[Pose, ...]
    goal_radius: float
    time_budget: float


class MissionStatus(str, Enum):
    IN_PROGRESS = "in_progress"
    SUCCESS = "success"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class CollisionEvent:
    actor_index: int
    kind: ActorKind


@dataclass(frozen=True)
class LaneMetrics:
    lateral_offset: float
    off_lane: bool
    on_curb: bool


class LaneGeometry:
    """Flattened per-subsegment arrays for vectorized distance queries.

    Built once per scenario; lane tuples are immutable so the cache stays
    valid across steps.
    """

    def __init__(self, lanes: tuple[LaneSegment, ...]):
        ax, ay, dx, dy, width, curb = [], [], [], [], [], []
        for lane in lanes:
            pts = lane.centerline
            for a, b in zip(pts[:-1], pts[1:]):
                ax.append(a.x)
                ay.append(a.y)
                dx.append(b.x - a.x)
                dy.append(b.y - a.y)
                width.append(lane.lane_width)
                curb.append(lane.curb_offset)
        self.n = len(ax)
        self.ax = np.asarray(ax)
        self.ay = np.asarray(ay)
        self.dx = np.asarray(dx)
        self.dy = np.asarray(dy)
        self.len2 = self.dx * self.dx + self.dy * self.dy
        self.width = np.asarray(width)
        self.curb = np.asarray(curb)

    def _closest(self, px, py):
        """Clamped foot-of-perpendicular on every subsegment.

        px/py may be scalars or arrays of shape (P,); returns arrays of
        shape (P, n) (or (n,) for scalars) of squared distances and the
        cross-product sign numerators.
        """
        px = np.asarray(px, dtype=float)[..., None]
        py = np.asarray(py, dtype=float)[..., None]
        t = ((px - self.ax) * self.dx + (py - self.ay) * self.dy) / self.len2
        t = np.clip(t, 0.0, 1.0)
        cx = self.ax + t * self.dx
        cy = self.ay + t * self.dy
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        cross = self.dx * (py - self.ay) - self.dy * (px - self.ax)
        return d2, cross

    def near_subset(self, x: float, y: float, radius: float) -> "LaneGeometry":
        """View restricted to subsegments whose band can reach points
        within `radius` of (x, y); used to keep ray queries cheap on maps
        much larger than the sensor horizon."""
        if self.n == 0:
            return self
        d2, _ = self._closest(x, y)
        keep = d2 <= (radius + self.curb) ** 2
        if keep.all():
            return self
        sub = LaneGeometry(())
        sub.n = int(keep.sum())
        for name in ("ax", "ay", "dx", "dy", "len2", "width", "curb"):
            setattr(sub, name, getattr(self, name)[keep])
        return sub

    def drivable_mask(self, px, py) -> np.ndarray:
        """True where a point lies on some lane's road surface (|offset| <=
        curb_offset, inclusive). Worlds with no lanes are open field:
        everything is drivable."""
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        if self.n == 0:
            return np.ones(px.shape, dtype=bool)
        rx = px[..., None] - self.ax
        ry = py[..., None] - self.ay
        t = (rx * self.dx + ry * self.dy) / self.len2
        np.clip(t, 0.0, 1.0, out=t)
        ddx = rx - t * self.dx
        ddy = ry - t * self.dy
        d2 = ddx * ddx + ddy * ddy
        return (d2 <= self.curb**2).any(axis=-1)

    def nearest(self, x: float, y: float):
        """(signed_offset, lane_width, curb_offset, distance) for the
        subsegment nearest to the point; None if there are no lanes.
        Ties resolve to the first subsegment in scenario order."""
        if self.n == 0:
            return None
        d2, cross = self._closest(x, y)
        i = int(np.argmin(d2))
        dist = math.sqrt(float(d2[i]))
        offset = math.copysign(dist, float(cross[i])) if dist > 0.0 else 0.0
        return offset, float(self.width[i]), float(self.curb[i]), dist


@dataclass(frozen=True)
class World:
    """Full simulation state. Immutable; `step` returns a new snapshot."""

    lanes: tuple[LaneSegment, ...]
    actors: tuple[Actor, ...]
    ego: EgoState
    mission: Mission
    weather: float = 0.0
    frame: int = 0
    tick_rate: float = DEFAULT_TICK_RATE
    odometer_km: float = 0.0
    waypoints_done: int = 0
    geom: Optional[LaneGeometry] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.geom is None:
            object.__setattr__(self, "geom", LaneGeometry(self.lanes))

    @property
    def time(self) -> float:
        """Elapsed simulated seconds; exact integer-frame arithmetic."""
        return self.frame / self.tick_rate


@dataclass(frozen=True)
class ControlCommand:
    """Actuation command. Fields are clamped into range before leaving the
    agent; `step` re-clamps defensively."""

    steer: float = 0.0
    throttle: float = 0.0
    brake: float = 0.0
    frame: int = 0


# Safe actuation defaults, also the NaN substitution values (docs/schema.md).
DEFAULT_COMMAND = ControlCommand(steer=0.0, throttle=0.0, brake=1.0, frame=0)


def _clamp(v: float, lo: float, hi: float, nan_to: float) -> float:
    if math.isnan(v):
        return nan_to
    return min(max(v, lo), hi)


def clamp_command(cmd: ControlCommand) -> ControlCommand:
    """Force command fields into range; NaNs become the safe defaults."""
    return ControlCommand(
        steer=_clamp(cmd.steer, -1.0, 1.0, 0.0),
        throttle=_clamp(cmd.throttle, 0.0, 1.0, 0.0),
        brake=_clamp(cmd.brake, 0.0, 1.0, 1.0),
        frame=cmd.frame,
    )


def _lerp_angle(a: float, b: float, t: float) -> float:
    return normalize_angle(a + normalize_angle(b - a) * t)


def _actor_pose_at(actor: Actor, frame: int) -> Pose:
    script = actor.script
    if not script:
        return actor.origin
    prev_frame, prev_pose = 0, actor.origin
    for f, target in script:
        if frame <= f:
            if f == prev_frame:
                return target
            t = (frame - prev_frame) / (f - prev_frame)
            return Pose(
                prev_pose.x + (target.x - prev_pose.x) * t,
                prev_pose.y + (target.y - prev_pose.y) * t,
                _lerp_angle(prev_pose.heading, target.heading, t),
            )
        prev_frame, prev_pose = f, target
    return script[-1][1]


def _advance_waypoints(pose: Pose, mission: Mission, done: int) -> int:
    """Waypoints must be visited in order; skipping ahead completes nothing."""
    wps = mission.waypoints
    while done < len(wps) and pose.distance_to(wps[done]) <= mission.goal_radius:
        done += 1
    return done


def step(world: World, cmd: ControlCommand) -> World:
    """Advance one tick: kinematic bicycle ego, scripted actors, odometer,
    mission tracking. Total on any valid world."""
    cmd = clamp_command(cmd)
    ego = world.ego
    dt = 1.0 / world.tick_rate

    # Kinematic bicycle, forward Euler: displacement along the old heading.
    h = ego.pose.heading
    v = ego.speed
    delta = ego.max_steer * cmd.steer
    dx = v * dt * math.cos(h)
    dy = v * dt * math.sin(h)
    new_heading = normalize_angle(h + (v / ego.wheelbase) * math.tan(delta) * dt)
    new_v = v + (ego.accel * cmd.throttle - ego.brake_decel * cmd.brake - ego.drag * v) * dt
    new_v = min(max(new_v, 0.0), ego.v_max)

    new_pose = Pose(ego.pose.x + dx, ego.pose.y + dy, new_heading)
    displacement = math.hypot(dx, dy)

    new_frame = world.frame + 1
    new_actors = []
    for actor in world.actors:
        p = _actor_pose_at(actor, new_frame)
        new_actors.append(replace(actor, pose=p, speed=actor.pose.distance_to(p) / dt))

    done = _advance_waypoints(new_pose, world.mission, world.waypoints_done)
    return replace(
        world,
        ego=replace(ego, pose=new_pose, speed=new_v),
        actors=tuple(new_actors),
        frame=new_frame,
        odometer_km=world.odometer_km + displacement / 1000.0,
        waypoints_done=done,
    )


def query_collisions(world: World) -> list[CollisionEvent]:
    """Actors whose circular footprint intersects the ego rectangle this
    frame. Exact touching (gap = 0) counts as contact."""
    ego = world.ego
    half_len = (ego.wheelbase + EGO_LENGTH_PAD) / 2.0
    half_wid = ego.half_width
    c = math.cos(-ego.pose.heading)
    s = math.sin(-ego.pose.heading)
    events = []
    for i, actor in enumerate(world.actors):
        rx = actor.pose.x - ego.pose.x
        ry = actor.pose.y - ego.pose.y
        lx = rx * c - ry * s
        ly = rx * s + ry * c
        qx = min(max(lx, -half_len), half_len)
        qy = min(max(ly, -half_wid), half_wid)
        if (lx - qx) ** 2 + (ly - qy) ** 2 <= actor.radius**2:
            events.append(CollisionEvent(actor_index=i, kind=actor.kind))
    return events


def lane_metrics(world: World) -> LaneMetrics:
    """Signed lateral offset to the nearest lane centerline, plus the
    off-lane / on-curb flags (strict inequalities)."""
    nearest = world.geom.nearest(world.ego.pose.x, world.ego.pose.y)
    if nearest is None:
        raise OffMapError("world has no lanes")
    offset, width, curb, dist = nearest
    if dist > OFF_MAP_HORIZON:
        raise OffMapError(
            f"no lane segment within {OFF_MAP_HORIZON:.0f} m of ego "
            f"({world.ego.pose.x:.1f}, {world.ego.pose.y:.1f})"
        )
    return LaneMetrics(
        lateral_offset=offset,
        off_lane=abs(offset) > width / 2.0,
        on_curb=abs(offset) > curb,
    )


def mission_status(world: World) -> MissionStatus:
    if world.waypoints_done >= len(world.mission.waypoints):
        return MissionStatus.SUCCESS
    if world.time > world.mission.time_budget:
        return MissionStatus.TIMEOUT
    return MissionStatus.IN_PROGRESS


# ---------------------------------------------------------------------------
# Scenario documents


def _fail(path: str, msg: str):
    raise ScenarioError(f"{path}: {msg}")


def _number(obj, path, minimum=None, exclusive=False, maximum=None) -> float:
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        _fail(path, f"expected a number, got {type(obj).__name__}")
    v = float(obj)
    if minimum is not None:
        if exclusive and v <= minimum:
            _fail(path, f"must be > {minimum}, got {v}")
        if not exclusive and v < minimum:
            _fail(path, f"must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        _fail(path, f"must be <= {maximum}, got {v}")
    return v


def _pose(obj, path, need_heading=False) -> Pose:
    if not isinstance(obj, (list, tuple)) or len(obj) not in (2, 3):
        _fail(path, "expected [x, y] or [x, y, heading]")
    if need_heading and len(obj) != 3:
        _fail(path, "expected [x, y, heading]")
    x = _number(obj[0], f"{path}[0]")
    y = _number(obj[1], f"{path}[1]")
    h = _number(obj[2], f"{path}[2]") if len(obj) == 3 else 0.0
    return Pose(x, y, h)


def _parse_lane(obj, path) -> LaneSegment:
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    pts_raw = obj.get("centerline")
    if not isinstance(pts_raw, list) or len(pts_raw) < 2:
        _fail(f"{path}.centerline", "polyline needs at least 2 points")
    raw = [(_number(p[0], f"{path}.centerline[{i}][0]"), _number(p[1], f"{path}.centerline[{i}][1]"))
           if isinstance(p, (list, tuple)) and len(p) >= 2
           else _fail(f"{path}.centerline[{i}]", "expected [x, y]")
           for i, p in enumerate(pts_raw)]
    pts = []
    for i, (x, y) in enumerate(raw):
        if i > 0 and x == raw[i - 1][0] and y == raw[i - 1][1]:
            _fail(f"{path}.centerline[{i}]", "consecutive points must be distinct")
        if i + 1 < len(raw):
            h = math.atan2(raw[i + 1][1] - y, raw[i + 1][0] - x)
        else:
            h = pts[-1].heading
        pts.append(Pose(x, y, h))
    width = _number(obj.get("lane_width"), f"{path}.lane_width", minimum=0.0, exclusive=True)
    curb = _number(obj.get("curb_offset"), f"{path}.curb_offset")
    if curb < width / 2.0:
        _fail(f"{path}.curb_offset", f"must be >= lane_width/2 ({width / 2.0}), got {curb}")
    return LaneSegment(centerline=tuple(pts), lane_width=width, curb_offset=curb)


def _parse_actor(obj, path) -> Actor:
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    kind_raw = obj.get("kind")
    try:
        kind = ActorKind(kind_raw)
    except ValueError:
        _fail(f"{path}.kind", f"unknown actor kind {kind_raw!r}")
    pose = _pose(obj.get("pose"), f"{path}.pose", need_heading=True)
    speed = _number(obj.get("speed", 0.0), f"{path}.speed", minimum=0.0)
    radius = _number(obj.get("radius"), f"{path}.radius", minimum=0.0, exclusive=True)
    script = []
    last_frame = None
    for i, entry in enumerate(obj.get("script", [])):
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            _fail(f"{path}.script[{i}]", "expected [frame, [x, y, heading]]")
        f = entry[0]
        if not isinstance(f, int) or isinstance(f, bool) or f < 0:
            _fail(f"{path}.script[{i}][0]", "frame must be a nonnegative integer")
        if last_frame is not None and f <= last_frame:
            _fail(f"{path}.script", f"script frames not increasing ({last_frame} then {f})")
        last_frame = f
        script.append((f, _pose(entry[1], f"{path}.script[{i}][1]", need_heading=True)))
    return Actor(kind=kind, pose=pose, speed=speed, radius=radius, script=tuple(script))


def _parse_mission(obj, path) -> Mission:
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    start = _pose(obj.get("start"), f"{path}.start", need_heading=True)
    wps_raw = obj.get("waypoints")
    if not isinstance(wps_raw, list) or len(wps_raw) < 1:
        _fail(f"{path}.waypoints", "mission needs at least 1 waypoint")
    wps = tuple(_pose(w, f"{path}.waypoints[{i}]") for i, w in enumerate(wps_raw))
    goal_radius = _number(obj.get("goal_radius"), f"{path}.goal_radius", minimum=0.0, exclusive=True)
    budget = _number(obj.get("time_budget"), f"{path}.time_budget", minimum=0.0, exclusive=True)
    return Mission(start=start, waypoints=wps, goal_radius=goal_radius, time_budget=budget)


def _parse_ego(obj, path, start: Pose) -> EgoState:
    obj = obj or {}
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    return EgoState(
        pose=start,
        speed=0.0,
        wheelbase=_number(obj.get("wheelbase", DEFAULT_WHEELBASE), f"{path}.wheelbase", 0.0, True),
        half_width=_number(obj.get("half_width", DEFAULT_HALF_WIDTH), f"{path}.half_width", 0.0, True),
        v_max=_number(obj.get("v_max", DEFAULT_V_MAX), f"{path}.v_max", 0.0, True),
        max_steer=_number(obj.get("max_steer", DEFAULT_MAX_STEER), f"{path}.max_steer", 0.0, True),
        accel=_number(obj.get("accel", DEFAULT_ACCEL), f"{path}.accel", 0.0),
        brake_decel=_number(obj.get("brake_decel", DEFAULT_BRAKE_DECEL), f"{path}.brake_decel", 0.0),
        drag=_number(obj.get("drag", DEFAULT_DRAG), f"{path}.drag", 0.0),
    )


def world_from_dict(doc: dict[str, Any]) -> World:
    """Build a frame-0 world from a parsed scenario document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: top level must be an object")
    mission = _parse_mission(doc.get("mission"), "mission")
    lanes = tuple(_parse_lane(l, f"lanes[{i}]") for i, l in enumerate(doc.get("lanes", [])))
    actors = tuple(_parse_actor(a, f"actors[{i}]") for i, a in enumerate(doc.get("actors", [])))
    ego = _parse_ego(doc.get("ego"), "ego", mission.start)
    weather = _number(doc.get("weather", 0.0), "weather", minimum=0.0, maximum=1.0)
    tick_rate = _number(doc.get("tick_rate", DEFAULT_TICK_RATE), "tick_rate", 0.0, True)
    world = World(
        lanes=lanes,
        actors=tuple(replace(a, pose=_actor_pose_at(a, 0)) for a in actors),
        ego=ego,
        mission=mission,
        weather=weather,
        frame=0,
        tick_rate=tick_rate,
        odometer_km=0.0,
        waypoints_done=_advance_waypoints(ego.pose, mission, 0),
    )
    return world


def load_scenario(text: str) -> World:
    """Parse a scenario JSON document into a frame-0 world.

    Raises ScenarioError with line/field diagnostics on malformed input.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return world_from_dict(doc)


def load_scenario_file(path) -> World:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return load_scenario(text)
    except ScenarioError as e:
        raise ScenarioError(f"{path}: {e}") from e
