"""The driving agent: range-scan sensing, a rule-based waypoint follower,
and a small file-loaded MLP controller.

The sensor is a forward 180-degree arc of range rays found by marching
sample points outward and bisecting the first hit, so every reading is a
deterministic function of the world. Both controllers clamp their outputs,
so corrupted inputs or corrupted network weights can change behavior but
never emit an out-of-range command.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .world import (
    DEFAULT_V_MAX,
    DEFAULT_MAX_STEER,
    DEFAULT_WHEELBASE,
    ControlCommand,
    Mission,
    Pose,
    World,
    clamp_command,
    normalize_angle,
)


class WeightsError(ValueError):
    """Weights file failed to parse or its layer dimensions do not chain."""


@dataclass(frozen=True)
class SensorParams:
    n_rays: int = 32
    max_range: float = 50.0
    sigma_gps: float = 0.2
    march_step: float = 0.25
    refine_iters: int = 6


DEFAULT_SENSOR = SensorParams()


@dataclass(frozen=True)
class SensorFrame:
    """What the agent perceives on one tick (before any fault injection)."""

    ranges: np.ndarray
    gps: Pose
    speed: float
    weather: float
    frame: int
    max_range: float = 50.0


def sense(world: World, rng: np.random.Generator, params: SensorParams = DEFAULT_SENSOR) -> SensorFrame:
    """Ray-cast a forward arc and read GPS/speed.

    Rays are spaced evenly over [-90deg, +90deg] relative to the ego heading
    and stop at the first actor footprint or at the road edge (points beyond
    any lane's curb_offset), capped at max_range. Resolution is
    march_step / 2**refine_iters. GPS jitter is Gaussian with
    sigma_gps * (1 + weather); the two draws happen every call so parameter
    sweeps stay aligned on the same stream.
    """
    ego = world.ego
    geom = world.geom.near_subset(ego.pose.x, ego.pose.y, params.max_range + 1.0)
    actors = [
        a for a in world.actors
        if ego.pose.distance_to(a.pose) <= params.max_range + a.radius + 1.0
    ]

    def hit_mask(fx, fy):
        blocked = ~geom.drivable_mask(fx, fy)
        for actor in actors:
            d2 = (fx - actor.pose.x) ** 2 + (fy - actor.pose.y) ** 2
            blocked |= d2 <= actor.radius**2
        return blocked

    step = params.march_step
    n_steps = int(math.ceil(params.max_range / step))
    angles = ego.pose.heading + np.linspace(-math.pi / 2.0, math.pi / 2.0, params.n_rays)
    dirx = np.cos(angles)
    diry = np.sin(angles)

    # near field first; most rays stop at the lane edge within a few meters,
    # so the far grid only runs for the rays still unresolved
    near_n = min(n_steps, int(math.ceil(12.0 / step)))
    ts = np.arange(near_n + 1) * step
    hits = hit_mask(ego.pose.x + ts[None, :] * dirx[:, None],
                    ego.pose.y + ts[None, :] * diry[:, None])
    t_hit = np.full(params.n_rays, np.inf)
    got = hits.any(axis=1)
    t_hit[got] = ts[hits.argmax(axis=1)[got]]

    far = ~got
    if far.any() and near_n < n_steps:
        ts2 = np.arange(near_n + 1, n_steps + 1) * step
        hits2 = hit_mask(ego.pose.x + ts2[None, :] * dirx[far][:, None],
                         ego.pose.y + ts2[None, :] * diry[far][:, None])
        got2 = hits2.any(axis=1)
        t2 = np.full(int(far.sum()), np.inf)
        t2[got2] = ts2[hits2.argmax(axis=1)[got2]]
        t_hit[far] = t2

    ranges = np.full(params.n_rays, params.max_range)
    ranges[t_hit == 0.0] = 0.0
    todo = np.isfinite(t_hit) & (t_hit > 0.0)
    lo = np.where(todo, t_hit - step, 0.0)
    hi = np.where(todo, t_hit, params.max_range)
    for _ in range(params.refine_iters):
        mid = 0.5 * (lo + hi)
        h = hit_mask(ego.pose.x + mid * dirx, ego.pose.y + mid * diry)
        hi = np.where(todo & h, mid, hi)
        lo = np.where(todo & ~h, mid, lo)
    ranges[todo] = hi[todo]

    sigma = params.sigma_gps * (1.0 + world.weather)
    jitter = rng.normal(0.0, 1.0, size=2)
    gps = Pose(ego.pose.x + sigma * jitter[0], ego.pose.y + sigma * jitter[1], ego.pose.heading)
    return SensorFrame(
        ranges=ranges,
        gps=gps,
        speed=ego.speed,
        weather=world.weather,
        frame=world.frame,
        max_range=params.max_range,
    )


# ---------------------------------------------------------------------------
# Rule-based controller


@dataclass(frozen=True)
class ControllerParams:
    v_target: float = 8.0
    d_brake: float = 8.0
    throttle_gain: float = 0.5
    # narrow enough that lane edges on gentle curves stay out of the cone
    brake_cone: float = math.radians(10.0)
    min_lookahead: float = 2.0
    wheelbase: float = DEFAULT_WHEELBASE
    max_steer: float = DEFAULT_MAX_STEER


DEFAULT_CONTROLLER = ControllerParams()


@dataclass
class ControllerState:
    """Episode-local waypoint progress as believed by the agent (tracked
    from GPS, so sensor faults can desynchronize it from the world).

    Arrival is debounced: the target must read in-radius on two consecutive
    frames before it counts, so an isolated noisy fix cannot skip ahead.
    """

    waypoints_done: int = 0
    in_radius_streak: int = 0

    def advance(self, gps: Pose, mission: Mission) -> None:
        wps = mission.waypoints
        if self.waypoints_done >= len(wps):
            return
        if gps.distance_to(wps[self.waypoints_done]) <= mission.goal_radius:
            self.in_radius_streak += 1
            if self.in_radius_streak >= 2:
                self.waypoints_done += 1
                self.in_radius_streak = 0
        else:
            self.in_radius_streak = 0

    def target(self, mission: Mission) -> Pose:
        wps = mission.waypoints
        return wps[min(self.waypoints_done, len(wps) - 1)]


def _forward_clearance(frame: SensorFrame, cone: float) -> float:
    angles = np.linspace(-math.pi / 2.0, math.pi / 2.0, len(frame.ranges))
    mask = np.abs(angles) <= cone
    return float(np.min(frame.ranges[mask]))


def rule_controller(
    frame: SensorFrame,
    mission: Mission,
    state: ControllerState,
    params: ControllerParams = DEFAULT_CONTROLLER,
) -> ControlCommand:
    """Pure-pursuit steering toward the next unvisited waypoint plus
    proportional speed control; full brake when the forward cone is blocked
    closer than d_brake. Positive steer turns left (counter-clockwise)."""
    state.advance(frame.gps, mission)
    if state.waypoints_done >= len(mission.waypoints):
        return clamp_command(ControlCommand(0.0, 0.0, 1.0, frame=frame.frame))
    target = state.target(mission)

    bearing = math.atan2(target.y - frame.gps.y, target.x - frame.gps.x)
    alpha = normalize_angle(bearing - frame.gps.heading)
    dist = frame.gps.distance_to(target)
    lookahead = max(dist, params.min_lookahead)
    curvature = 2.0 * math.sin(alpha) / lookahead
    steer = math.atan(curvature * params.wheelbase) / params.max_steer

    throttle = params.throttle_gain * (params.v_target - frame.speed)
    brake = 0.0
    if _forward_clearance(frame, params.brake_cone) < params.d_brake:
        throttle = 0.0
        brake = 1.0
    return clamp_command(ControlCommand(steer, throttle, brake, frame=frame.frame))


# ---------------------------------------------------------------------------
# MLP controller

_ACTIVATIONS = ("tanh", "relu", "id")


@dataclass(frozen=True)
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    act: str


@dataclass(frozen=True)
class Weights:
    layers: tuple[Layer, ...]

    @property
    def shape(self) -> tuple[tuple[int, int], ...]:
        return tuple(layer.w.shape for layer in self.layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].w.shape[1]


def weights_from_dict(doc: dict) -> Weights:
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list):
        raise WeightsError("weights: expected an object with a 'layers' list")
    raw_layers = doc["layers"]
    if len(raw_layers) < 1:
        raise WeightsError("weights: network must have >=1 layer")
    layers = []
    prev_out = None
    for i, entry in enumerate(raw_layers):
        if not isinstance(entry, dict):
            raise WeightsError(f"weights: layers[{i}] must be an object")
        try:
            w = np.array(entry["w"], dtype=float)
            b = np.array(entry["b"], dtype=float)
        except (KeyError, ValueError) as e:
            raise WeightsError(f"weights: layers[{i}]: {e}") from e
        if w.ndim != 2:
            raise WeightsError(f"weights: layers[{i}].w must be a rectangular matrix")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise WeightsError(
                f"weights: layers[{i}].b length {b.shape[0] if b.ndim == 1 else '?'} "
                f"does not match {w.shape[0]} rows"
            )
        act = entry.get("act", "id")
        if act not in _ACTIVATIONS:
            raise WeightsError(f"weights: layers[{i}].act must be one of {_ACTIVATIONS}")
        if prev_out is not None and w.shape[1] != prev_out:
            raise WeightsError(
                f"weights: layers[{i}] expects {w.shape[1]} inputs but layer {i - 1} emits {prev_out}"
            )
        prev_out = w.shape[0]
        layers.append(Layer(w=w, b=b, act=act))
    if prev_out != 3:
        raise WeightsError(f"weights: final layer must emit 3 values, got {prev_out}")
    return Weights(layers=tuple(layers))


def load_weights(path) -> Weights:
    """Load and validate an MLP weights file (see docs/schema.md)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise WeightsError(f"{path}: parse error at line {e.lineno}: {e.msg}") from e
    return weights_from_dict(doc)


def nn_input(
    frame: SensorFrame,
    goal_bearing: float,
    goal_distance: float,
    v_max: float = DEFAULT_V_MAX,
) -> np.ndarray:
    """Input vector layout (order is part of the weights-file contract):
    ranges[0..R-1] in meters, speed/v_max, goal bearing in radians,
    goal distance/100, weather."""
    return np.concatenate(
        [
            np.asarray(frame.ranges, dtype=float),
            [frame.speed / v_max, goal_bearing, goal_distance / 100.0, frame.weather],
        ]
    )


def _sigmoid(x: float) -> float:
    if math.isnan(x):
        return float("nan")
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-min(x, 700.0)))
    return math.exp(max(x, -700.0)) / (1.0 + math.exp(max(x, -700.0)))


def nn_forward(
    frame: SensorFrame,
    weights: Weights,
    goal_bearing: float = 0.0,
    goal_distance: float = 0.0,
    v_max: float = DEFAULT_V_MAX,
) -> ControlCommand:
    """Feed-forward pass mapped to a command: steer = tanh(y0),
    throttle = sigmoid(y1), brake = sigmoid(y2). The squashing keeps
    commands in range even under corrupted weights."""
    x = nn_input(frame, goal_bearing, goal_distance, v_max)
    for i, layer in enumerate(weights.layers):
        if x.shape[0] != layer.w.shape[1]:
            raise WeightsError(
                f"weights: layers[{i}] expects {layer.w.shape[1]} inputs, got {x.shape[0]}"
            )
        # corrupted weights may overflow; the output squashing absorbs it
        with np.errstate(over="ignore", invalid="ignore"):
            x = layer.w @ x + layer.b
        if layer.act == "tanh":
            x = np.tanh(x)
        elif layer.act == "relu":
            x = np.maximum(x, 0.0)
    y0, y1, y2 = (float(v) for v in x)
    steer = math.tanh(y0) if not math.isnan(y0) else float("nan")
    return clamp_command(
        ControlCommand(steer, _sigmoid(y1), _sigmoid(y2), frame=frame.frame)
    )


def goal_features(frame: SensorFrame, mission: Mission, state: ControllerState) -> tuple[float, float]:
    """Bearing/distance to the next unvisited waypoint, advancing the
    agent-side progress tracker from GPS first."""
    state.advance(frame.gps, mission)
    target = state.target(mission)
    bearing = normalize_angle(
        math.atan2(target.y - frame.gps.y, target.x - frame.gps.x) - frame.gps.heading
    )
    return bearing, frame.gps.distance_to(target)
