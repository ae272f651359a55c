"""Fault models and injectors.

Four fault classes cross the control loop at explicit boundaries:

* data      -- parameterized corruption of one sensor channel
* hardware  -- bit-level corruption of one 32-bit IEEE-754 scalar crossing
               the sensor->agent or agent->actuation boundary
* timing    -- a delay/drop/reorder channel between agent and actuation
* ml        -- corruption of the controller network's weights

Campaigns work in two steps: resolve *where* a fault lands (location
selection, a pure function of the spec seed), then inject per frame under
the spec's trigger. Every injector at neutral parameters is a bit-exact
identity, so a neutral-fault pipeline reproduces the golden trace.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Optional

import numpy as np

from .agent import Layer, SensorFrame, Weights
from .rng import stream
from .world import DEFAULT_COMMAND, ControlCommand, Pose


class SpecError(ValueError):
    """Fault specification failed validation."""


class FaultClass(str, Enum):
    DATA = "data"
    HARDWARE = "hardware"
    TIMING = "timing"
    ML = "ml"


SENSOR_CHANNELS = ("ranges", "gps", "speed", "weather")
COMMAND_FIELDS = ("steer", "throttle", "brake")
CHANNEL_DIRECTIONS = ("sense_to_agent", "agent_to_actuation")
DATA_MODELS = ("gaussian", "occlusion", "stuck", "offset", "scale")
HARDWARE_OPS = ("single_bit", "multi_bit", "stuck_at")
ML_MODELS = ("gaussian", "bitflip", "zero")
TIMING_MODES = ("replay_last", "drop_to_default", "reorder")

# NaN substitution values per corrupted slot (docs/schema.md).
NAN_DEFAULTS = {
    "steer": 0.0,
    "throttle": 0.0,
    "brake": 1.0,
    "ranges": 0.0,
    "gps.x": 0.0,
    "gps.y": 0.0,
    "gps.heading": 0.0,
    "speed": 0.0,
    "weather": 0.0,
    "weight": 0.0,
}


@dataclass(frozen=True)
class FaultTrigger:
    """Half-open activation window [start, start+duration) with a per-frame
    firing probability. duration None means persistent."""

    start: int = 0
    duration: Optional[int] = None
    prob: float = 1.0


@dataclass(frozen=True)
class FaultTarget:
    """Exactly one variant is populated; which one must match the class."""

    sensor_channel: Optional[str] = None
    command_field: Optional[str] = None
    channel_direction: Optional[str] = None
    ml_location: Any = None


@dataclass(frozen=True)
class FaultSpec:
    id: str
    fault_class: FaultClass
    target: FaultTarget
    params: dict
    trigger: FaultTrigger
    seed: int = 0


def trigger_active(trigger: FaultTrigger, frame: int, rng: np.random.Generator) -> bool:
    """True iff the frame is inside the window and the per-frame draw fires.

    The draw happens on every in-window frame regardless of outcome, so
    streams stay aligned across probability sweeps.
    """
    if frame < trigger.start:
        return False
    if trigger.duration is not None and frame >= trigger.start + trigger.duration:
        return False
    return rng.random() < trigger.prob


# ---------------------------------------------------------------------------
# Spec parsing / validation


def _spec_fail(spec_id, msg):
    raise SpecError(f"fault spec {spec_id!r}: {msg}")


def parse_trigger(obj, spec_id="?") -> FaultTrigger:
    obj = obj or {}
    if not isinstance(obj, dict):
        _spec_fail(spec_id, "trigger must be an object")
    start = obj.get("start", 0)
    if not isinstance(start, int) or isinstance(start, bool) or start < 0:
        _spec_fail(spec_id, "trigger.start must be a nonnegative integer")
    duration = obj.get("duration", "persistent")
    if duration == "persistent":
        duration = None
    elif not isinstance(duration, int) or isinstance(duration, bool) or duration < 1:
        _spec_fail(spec_id, "trigger.duration must be a positive integer or 'persistent'")
    prob = obj.get("prob", 1.0)
    if not isinstance(prob, (int, float)) or isinstance(prob, bool) or not 0.0 <= prob <= 1.0:
        _spec_fail(spec_id, "trigger.prob must be in [0, 1]")
    return FaultTrigger(start=start, duration=duration, prob=float(prob))


def _parse_target(obj, spec_id) -> FaultTarget:
    if not isinstance(obj, dict):
        _spec_fail(spec_id, "target must be an object")
    known = {"sensor_channel", "command_field", "channel_direction", "ml_location"}
    extra = set(obj) - known
    if extra:
        _spec_fail(spec_id, f"unknown target keys {sorted(extra)}")
    populated = [k for k in known if obj.get(k) is not None]
    if len(populated) != 1:
        _spec_fail(spec_id, "target must populate exactly one variant")
    tgt = FaultTarget(**{k: obj[k] for k in populated})
    if tgt.sensor_channel is not None and tgt.sensor_channel not in SENSOR_CHANNELS:
        _spec_fail(spec_id, f"unknown sensor_channel {tgt.sensor_channel!r}")
    if tgt.command_field is not None and tgt.command_field not in COMMAND_FIELDS:
        _spec_fail(spec_id, f"unknown command_field {tgt.command_field!r}")
    if tgt.channel_direction is not None and tgt.channel_direction not in CHANNEL_DIRECTIONS:
        _spec_fail(spec_id, f"unknown channel_direction {tgt.channel_direction!r}")
    return tgt


def _bit_ok(b) -> bool:
    return isinstance(b, int) and not isinstance(b, bool) and 0 <= b <= 31


def _mask_ok(m) -> bool:
    return isinstance(m, int) and not isinstance(m, bool) and 0 <= m < (1 << 32)


def _validate_params(spec: FaultSpec) -> None:
    p = spec.params
    sid = spec.id
    if spec.fault_class is FaultClass.DATA:
        if spec.target.sensor_channel is None:
            _spec_fail(sid, "data faults target a sensor_channel")
        model = p.get("model")
        if model not in DATA_MODELS:
            _spec_fail(sid, f"params.model must be one of {DATA_MODELS}")
        if model == "gaussian" and not (isinstance(p.get("sigma"), (int, float)) and p["sigma"] >= 0):
            _spec_fail(sid, "gaussian requires sigma >= 0")
        if model == "occlusion":
            if spec.target.sensor_channel != "ranges":
                _spec_fail(sid, "occlusion applies only to the ranges channel")
            if not (isinstance(p.get("start"), int) and p["start"] >= 0):
                _spec_fail(sid, "occlusion requires integer start >= 0")
            if not (isinstance(p.get("length"), int) and p["length"] >= 0):
                _spec_fail(sid, "occlusion requires integer length >= 0")
        if model == "offset":
            if spec.target.sensor_channel != "gps":
                _spec_fail(sid, "offset applies only to the gps channel")
            for k in ("dx", "dy"):
                if not isinstance(p.get(k), (int, float)):
                    _spec_fail(sid, f"offset requires numeric {k}")
        if model == "scale" and not isinstance(p.get("factor"), (int, float)):
            _spec_fail(sid, "scale requires a numeric factor")
    elif spec.fault_class is FaultClass.HARDWARE:
        if spec.target.ml_location is not None or (
            spec.target.sensor_channel is None
            and spec.target.command_field is None
            and spec.target.channel_direction is None
        ):
            _spec_fail(sid, "hardware faults target a command_field, sensor_channel, or channel_direction")
        op = p.get("op")
        if op not in HARDWARE_OPS:
            _spec_fail(sid, f"params.op must be one of {HARDWARE_OPS}")
        if op == "single_bit" and p.get("bit") is not None and not _bit_ok(p["bit"]):
            _spec_fail(sid, f"bit index must be in [0, 31], got {p['bit']!r}")
        if op == "multi_bit" and not (isinstance(p.get("n"), int) and 1 <= p["n"] <= 32):
            _spec_fail(sid, "multi_bit requires integer n in [1, 32]")
        if op == "stuck_at":
            ones = p.get("ones", 0)
            zeros = p.get("zeros", 0)
            if not _mask_ok(ones) or not _mask_ok(zeros):
                _spec_fail(sid, "stuck_at masks must be 32-bit integers")
            if ones & zeros:
                _spec_fail(sid, "stuck_at masks overlap")
    elif spec.fault_class is FaultClass.TIMING:
        if spec.target.channel_direction != "agent_to_actuation":
            _spec_fail(sid, "timing faults apply to channel_direction 'agent_to_actuation'")
        k = p.get("delay_frames", 0)
        if not isinstance(k, int) or isinstance(k, bool) or k < 0:
            _spec_fail(sid, "delay_frames must be an integer >= 0")
        dp = p.get("drop_probability", 0.0)
        if not isinstance(dp, (int, float)) or not 0.0 <= dp <= 1.0:
            _spec_fail(sid, "drop_probability must be in [0, 1]")
        mode = p.get("mode", "replay_last")
        if mode not in TIMING_MODES:
            _spec_fail(sid, f"mode must be one of {TIMING_MODES}")
        w = p.get("reorder_window", 1)
        if not isinstance(w, int) or isinstance(w, bool) or w < 1:
            _spec_fail(sid, "reorder_window must be an integer >= 1")
        if spec.trigger.prob not in (0.0, 1.0):
            _spec_fail(sid, "timing faults use the window only; trigger.prob must be 0 or 1")
    elif spec.fault_class is FaultClass.ML:
        if spec.target.ml_location is None:
            _spec_fail(sid, "ml faults target an ml_location")
        model = p.get("model")
        if model not in ML_MODELS:
            _spec_fail(sid, f"params.model must be one of {ML_MODELS}")
        if model == "gaussian" and not (isinstance(p.get("sigma"), (int, float)) and p["sigma"] >= 0):
            _spec_fail(sid, "gaussian requires sigma >= 0")
        if model == "bitflip" and p.get("bit") is not None and not _bit_ok(p["bit"]):
            _spec_fail(sid, f"bit index must be in [0, 31], got {p['bit']!r}")


def parse_fault_spec(obj) -> FaultSpec:
    """Parse and validate one fault spec document (see docs/schema.md)."""
    if not isinstance(obj, dict):
        raise SpecError("fault spec must be an object")
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise SpecError("fault spec needs a nonempty string id")
    if sid == "none":
        raise SpecError("fault spec id 'none' is reserved for the golden arm")
    try:
        fault_class = FaultClass(obj.get("class"))
    except ValueError:
        _spec_fail(sid, f"unknown class {obj.get('class')!r}")
    target = _parse_target(obj.get("target"), sid)
    params = obj.get("params", {})
    if not isinstance(params, dict):
        _spec_fail(sid, "params must be an object")
    trigger = parse_trigger(obj.get("trigger"), sid)
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < (1 << 64):
        _spec_fail(sid, "seed must be a 64-bit nonnegative integer")
    spec = FaultSpec(
        id=sid, fault_class=fault_class, target=target, params=dict(params),
        trigger=trigger, seed=seed,
    )
    _validate_params(spec)
    return spec


# ---------------------------------------------------------------------------
# Data faults


def get_sensor_channel(frame: SensorFrame, channel: str):
    if channel == "ranges":
        return frame.ranges.copy()
    if channel == "gps":
        return frame.gps
    if channel == "speed":
        return frame.speed
    if channel == "weather":
        return frame.weather
    raise SpecError(f"unknown sensor channel {channel!r}")


def set_sensor_channel(frame: SensorFrame, channel: str, value) -> SensorFrame:
    if channel == "ranges":
        return replace(frame, ranges=np.asarray(value, dtype=float))
    if channel == "gps":
        return replace(frame, gps=value)
    if channel == "speed":
        return replace(frame, speed=float(value))
    if channel == "weather":
        return replace(frame, weather=float(value))
    raise SpecError(f"unknown sensor channel {channel!r}")


def inject_data_fault(
    frame: SensorFrame,
    spec: FaultSpec,
    rng: np.random.Generator,
    held=None,
) -> SensorFrame:
    """Apply one data-fault model to the targeted channel; everything else
    passes through bit-identical. `held` is the frozen channel value for the
    stuck model (captured by the pipeline on the first triggered frame).
    Corrupted values are clamped back into the channel's physical domain."""
    if spec.fault_class is not FaultClass.DATA or spec.target.sensor_channel is None:
        raise SpecError(f"fault spec {spec.id!r}: not a data fault on a sensor channel")
    ch = spec.target.sensor_channel
    model = spec.params["model"]

    if model == "stuck":
        value = held if held is not None else get_sensor_channel(frame, ch)
        return set_sensor_channel(frame, ch, value)

    if model == "occlusion":
        start = spec.params["start"]
        length = spec.params["length"]
        ranges = frame.ranges.copy()
        ranges[start : start + length] = 0.0
        return replace(frame, ranges=ranges)

    if model == "offset":
        g = frame.gps
        return replace(frame, gps=Pose(g.x + spec.params["dx"], g.y + spec.params["dy"], g.heading))

    if model == "gaussian":
        sigma = float(spec.params["sigma"])
        if ch == "ranges":
            noise = rng.normal(0.0, 1.0, size=len(frame.ranges))
            return replace(frame, ranges=np.clip(frame.ranges + sigma * noise, 0.0, frame.max_range))
        if ch == "gps":
            n = rng.normal(0.0, 1.0, size=2)
            g = frame.gps
            return replace(frame, gps=Pose(g.x + sigma * n[0], g.y + sigma * n[1], g.heading))
        if ch == "speed":
            return replace(frame, speed=max(frame.speed + sigma * rng.normal(), 0.0))
        return replace(frame, weather=min(max(frame.weather + sigma * rng.normal(), 0.0), 1.0))

    # scale
    c = float(spec.params["factor"])
    if ch == "ranges":
        return replace(frame, ranges=np.clip(frame.ranges * c, 0.0, frame.max_range))
    if ch == "gps":
        g = frame.gps
        return replace(frame, gps=Pose(g.x * c, g.y * c, g.heading))
    if ch == "speed":
        return replace(frame, speed=max(frame.speed * c, 0.0))
    return replace(frame, weather=min(max(frame.weather * c, 0.0), 1.0))


# ---------------------------------------------------------------------------
# Hardware faults: bit-level corruption of a 32-bit IEEE-754 scalar


def float_to_bits(value: float) -> int:
    """Encode to the 32-bit IEEE-754 pattern (round-to-nearest, overflow
    saturates to the infinities)."""
    with np.errstate(over="ignore"):
        return int(np.float32(value).view(np.uint32))


def bits_to_float(bits: int) -> float:
    return float(np.uint32(bits & 0xFFFFFFFF).view(np.float32))


def corrupt_bits(bits: int, params: dict, rng: np.random.Generator) -> int:
    op = params["op"]
    if op == "single_bit":
        b = params.get("bit")
        if b is None:
            b = int(rng.integers(0, 32))
        return bits ^ (1 << b)
    if op == "multi_bit":
        picks = rng.choice(32, size=params["n"], replace=False)
        for b in picks:
            bits ^= 1 << int(b)
        return bits
    if op == "stuck_at":
        return (bits | params.get("ones", 0)) & ~params.get("zeros", 0) & 0xFFFFFFFF
    raise SpecError(f"unknown hardware op {op!r}")


def inject_hardware_fault(
    value: float,
    spec: FaultSpec,
    rng: np.random.Generator,
    nan_default: float,
) -> tuple[float, bool]:
    """Corrupt one encoded scalar. Returns (new value, nan_substituted).

    A stuck_at with empty masks is a bit-exact identity (no float32
    round-trip), which is what makes neutral-fault campaigns reproduce the
    golden trace. A corrupted NaN becomes nan_default and is flagged so the
    episode log can record the substitution.
    """
    params = spec.params
    if params["op"] == "stuck_at" and not params.get("ones", 0) and not params.get("zeros", 0):
        return value, False
    out = bits_to_float(corrupt_bits(float_to_bits(value), params, rng))
    if math.isnan(out):
        return nan_default, True
    return out, False


# ---------------------------------------------------------------------------
# ML faults


def weights_shape(weights: Weights) -> tuple[tuple[int, int], ...]:
    return weights.shape


def select_locations(
    shape: tuple[tuple[int, int], ...],
    spec: FaultSpec,
    rng: Optional[np.random.Generator] = None,
) -> tuple[tuple[int, int, Optional[int]], ...]:
    """Resolve an ml_location into concrete (layer, row, col) indices;
    col None addresses a bias entry. Resolution is a pure function of
    (shape, spec.seed): the default stream is derived from the seed alone,
    so replicated trials hit the same locations ("select, then inject")."""
    loc = spec.target.ml_location
    if loc is None:
        raise SpecError(f"fault spec {spec.id!r}: no ml_location to resolve")
    if rng is None:
        rng = stream("locate", spec.seed)
    include_biases = bool(spec.params.get("include_biases", False))

    def layer_indices(li):
        rows, cols = shape[li]
        idx = [(li, r, c) for r in range(rows) for c in range(cols)]
        if include_biases:
            idx.extend((li, r, None) for r in range(rows))
        return idx

    if loc == "all":
        out = []
        for li in range(len(shape)):
            out.extend(layer_indices(li))
        return tuple(out)

    if loc == "random_layer":
        li = int(rng.integers(0, len(shape)))
        return tuple(layer_indices(li))

    if isinstance(loc, dict) and "random_weights" in loc:
        n = loc["random_weights"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            _spec_fail(spec.id, "random_weights must be a positive integer")
        flat = [(li, r, c) for li, (rows, cols) in enumerate(shape)
                for r in range(rows) for c in range(cols)]
        if n > len(flat):
            _spec_fail(spec.id, f"random_weights {n} exceeds {len(flat)} weights")
        picks = rng.choice(len(flat), size=n, replace=False)
        return tuple(sorted(flat[int(i)] for i in picks))

    if isinstance(loc, dict) and "layer" in loc:
        li = loc["layer"]
        if not isinstance(li, int) or isinstance(li, bool) or not 0 <= li < len(shape):
            _spec_fail(spec.id, f"layer index {li!r} out of shape")
        rows_all, cols_all = shape[li]
        rows = loc.get("rows", list(range(rows_all)))
        cols = loc.get("cols", list(range(cols_all)))
        for r in rows:
            if not isinstance(r, int) or not 0 <= r < rows_all:
                _spec_fail(spec.id, f"row index {r!r} out of shape for layer {li}")
        for c in cols:
            if not isinstance(c, int) or not 0 <= c < cols_all:
                _spec_fail(spec.id, f"col index {c!r} out of shape for layer {li}")
        return tuple((li, r, c) for r in sorted(rows) for c in sorted(cols))

    _spec_fail(spec.id, f"unrecognized ml_location {loc!r}")


def inject_ml_fault(
    weights: Weights,
    target: tuple[tuple[int, int, Optional[int]], ...],
    params: dict,
    rng: np.random.Generator,
) -> tuple[Weights, int]:
    """Corrupt the targeted parameters, leaving everything else
    bit-identical. Returns (new weights, nan substitution count). Noise is
    drawn in one batch over the sorted index list, which is the documented
    draw order."""
    model = params["model"]
    mats = [layer.w.copy() for layer in weights.layers]
    biases = [layer.b.copy() for layer in weights.layers]
    nan_subs = 0

    if model == "gaussian":
        noise = rng.normal(0.0, 1.0, size=len(target))
        sigma = float(params["sigma"])
        for (li, r, c), z in zip(target, noise):
            if c is None:
                biases[li][r] = biases[li][r] + sigma * z
            else:
                mats[li][r, c] = mats[li][r, c] + sigma * z
    elif model == "zero":
        for li, r, c in target:
            if c is None:
                biases[li][r] = 0.0
            else:
                mats[li][r, c] = 0.0
    elif model == "bitflip":
        hw = {"op": "single_bit", "bit": params.get("bit")}
        for li, r, c in target:
            old = biases[li][r] if c is None else mats[li][r, c]
            out = bits_to_float(corrupt_bits(float_to_bits(old), hw, rng))
            if math.isnan(out):
                out = NAN_DEFAULTS["weight"]
                nan_subs += 1
            if c is None:
                biases[li][r] = out
            else:
                mats[li][r, c] = out
    else:
        raise SpecError(f"unknown ml model {model!r}")

    layers = tuple(
        Layer(w=m, b=b, act=layer.act)
        for m, b, layer in zip(mats, biases, weights.layers)
    )
    return Weights(layers=layers), nan_subs


# ---------------------------------------------------------------------------
# Timing channel


class TimingChannel:
    """Delay/drop/reorder channel between controller output and actuation.

    With delay k, pop at frame f delivers the payload pushed at f-k; until
    then (and after drops) replay_last re-emits the last delivered payload
    (initially `default`) while drop_to_default emits `default`. Reorder
    picks uniformly among the up-to-`window` oldest undelivered payloads,
    so it delivers early by at most the configured delay and never before
    the enqueue frame.
    """

    def __init__(
        self,
        delay_frames: int = 0,
        drop_probability: float = 0.0,
        mode: str = "replay_last",
        reorder_window: int = 1,
        default=DEFAULT_COMMAND,
        rng: Optional[np.random.Generator] = None,
    ):
        if mode not in TIMING_MODES:
            raise SpecError(f"unknown timing mode {mode!r}")
        self.delay = int(delay_frames)
        self.drop = float(drop_probability)
        self.mode = mode
        self.window = int(reorder_window)
        self.default = default
        self.rng = rng if rng is not None else stream("timing-channel")
        self._queue: deque = deque()
        self._last = default

    def __len__(self) -> int:
        return len(self._queue)

    @property
    def is_neutral(self) -> bool:
        return self.delay == 0 and self.drop == 0.0

    def reset(self) -> None:
        self._queue.clear()
        self._last = self.default

    def push(self, frame: int, payload) -> None:
        self._queue.append((frame, payload))

    def _fallback(self):
        return self.default if self.mode == "drop_to_default" else self._last

    def pop(self, frame: int):
        if self.mode == "reorder":
            # deliveries start once the oldest item is due; the pick may
            # then run ahead of the due item by up to the delay
            if not self._queue or self._queue[0][0] > frame - self.delay:
                return self._fallback()
            eligible = min(self.window, len(self._queue))
            idx = int(self.rng.integers(0, eligible))
            _, payload = self._queue[idx]
            del self._queue[idx]
            if self.rng.random() < self.drop:
                return self._fallback()
            self._last = payload
            return payload
        if self._queue and self._queue[0][0] <= frame - self.delay:
            _, payload = self._queue.popleft()
            if self.rng.random() < self.drop:
                return self._fallback()
            self._last = payload
            return payload
        return self._fallback()


def channel_from_spec(spec: FaultSpec, rng: np.random.Generator, default=DEFAULT_COMMAND) -> TimingChannel:
    p = spec.params
    return TimingChannel(
        delay_frames=p.get("delay_frames", 0),
        drop_probability=p.get("drop_probability", 0.0),
        mode=p.get("mode", "replay_last"),
        reorder_window=p.get("reorder_window", 1),
        default=default,
        rng=rng,
    )


# ---------------------------------------------------------------------------
# Per-episode pipeline


class _FaultState:
    def __init__(self, spec: FaultSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.held = None          # stuck data model snapshot
        self.ml_weights = None    # corrupted weights once fired
        self.ml_nan_subs = 0
        self.fired = False
        self.channel: Optional[TimingChannel] = None
        self.was_active = False


class FaultPipeline:
    """Owns one episode's injector state and random streams.

    Streams derive from (trial_seed, spec id, spec seed), one per spec, so
    fault draws never perturb the world/sensor streams: a pipeline whose
    faults are all neutral reproduces the golden episode bit for bit.
    """

    def __init__(self, specs, trial_seed: int, default_command=DEFAULT_COMMAND):
        self.first_injection_frame: Optional[int] = None
        self.nan_substitutions = 0
        self._data: list[_FaultState] = []
        self._hw_sensor: list[_FaultState] = []
        self._hw_command: list[_FaultState] = []
        self._ml: list[_FaultState] = []
        self._timing: list[_FaultState] = []
        for spec in specs:
            st = _FaultState(spec, stream("fault", trial_seed, spec.id, spec.seed))
            if spec.fault_class is FaultClass.DATA:
                self._data.append(st)
            elif spec.fault_class is FaultClass.HARDWARE:
                if spec.target.command_field is not None or spec.target.channel_direction == "agent_to_actuation":
                    self._hw_command.append(st)
                else:
                    self._hw_sensor.append(st)
            elif spec.fault_class is FaultClass.ML:
                self._ml.append(st)
            else:
                st.channel = channel_from_spec(spec, st.rng, default=default_command)
                self._timing.append(st)

    def _note_injection(self, frame: int) -> None:
        if self.first_injection_frame is None:
            self.first_injection_frame = frame

    # -- sensor side

    def apply_to_frame(self, frame: SensorFrame, at: int) -> SensorFrame:
        for st in self._data:
            if trigger_active(st.spec.trigger, at, st.rng):
                self._note_injection(at)
                if st.spec.params["model"] == "stuck" and st.held is None:
                    st.held = get_sensor_channel(frame, st.spec.target.sensor_channel)
                frame = inject_data_fault(frame, st.spec, st.rng, held=st.held)
        for st in self._hw_sensor:
            if trigger_active(st.spec.trigger, at, st.rng):
                self._note_injection(at)
                frame = self._corrupt_sensor_scalar(frame, st)
        return frame

    def _corrupt_sensor_scalar(self, frame: SensorFrame, st: _FaultState) -> SensorFrame:
        tgt = st.spec.target
        n = len(frame.ranges)
        if tgt.sensor_channel == "ranges":
            slot = ("ranges", int(st.rng.integers(0, n)))
        elif tgt.sensor_channel == "gps":
            slot = ("gps", int(st.rng.integers(0, 3)))
        elif tgt.sensor_channel == "speed":
            slot = ("speed", 0)
        elif tgt.sensor_channel == "weather":
            slot = ("weather", 0)
        else:  # channel_direction == sense_to_agent: uniform over all scalars
            flat = int(st.rng.integers(0, n + 5))
            if flat < n:
                slot = ("ranges", flat)
            elif flat < n + 3:
                slot = ("gps", flat - n)
            elif flat == n + 3:
                slot = ("speed", 0)
            else:
                slot = ("weather", 0)

        kind, idx = slot
        if kind == "ranges":
            old = float(frame.ranges[idx])
            new, subbed = inject_hardware_fault(old, st.spec, st.rng, NAN_DEFAULTS["ranges"])
            if subbed:
                self.nan_substitutions += 1
            ranges = frame.ranges.copy()
            ranges[idx] = min(max(new, 0.0), frame.max_range)
            return replace(frame, ranges=ranges)
        if kind == "gps":
            comp = ("x", "y", "heading")[idx]
            old = getattr(frame.gps, comp)
            new, subbed = inject_hardware_fault(old, st.spec, st.rng, NAN_DEFAULTS[f"gps.{comp}"])
            if subbed:
                self.nan_substitutions += 1
            vals = {"x": frame.gps.x, "y": frame.gps.y, "heading": frame.gps.heading}
            vals[comp] = new
            return replace(frame, gps=Pose(vals["x"], vals["y"], vals["heading"]))
        if kind == "speed":
            new, subbed = inject_hardware_fault(frame.speed, st.spec, st.rng, NAN_DEFAULTS["speed"])
            if subbed:
                self.nan_substitutions += 1
            return replace(frame, speed=max(new, 0.0))
        new, subbed = inject_hardware_fault(frame.weather, st.spec, st.rng, NAN_DEFAULTS["weather"])
        if subbed:
            self.nan_substitutions += 1
        return replace(frame, weather=min(max(new, 0.0), 1.0))

    # -- weights

    def faulted_weights(self, base: Weights, at: int) -> Weights:
        current = base
        for st in self._ml:
            if not st.fired and trigger_active(st.spec.trigger, at, st.rng):
                # Weights are state, not a stream: corrupt once at trigger
                # start and keep the corrupted copy for the rest of the run.
                st.fired = True
                self._note_injection(at)
                resolved = select_locations(weights_shape(current), st.spec)
                st.ml_weights, st.ml_nan_subs = inject_ml_fault(
                    current, resolved, st.spec.params, st.rng
                )
                self.nan_substitutions += st.ml_nan_subs
            if st.ml_weights is not None:
                current = st.ml_weights
        return current

    # -- command side

    def apply_to_command(self, cmd: ControlCommand, at: int) -> ControlCommand:
        for st in self._hw_command:
            if trigger_active(st.spec.trigger, at, st.rng):
                self._note_injection(at)
                field_name = st.spec.target.command_field
                if field_name is None:
                    field_name = COMMAND_FIELDS[int(st.rng.integers(0, 3))]
                old = getattr(cmd, field_name)
                new, subbed = inject_hardware_fault(old, st.spec, st.rng, NAN_DEFAULTS[field_name])
                if subbed:
                    self.nan_substitutions += 1
                cmd = replace(cmd, **{field_name: new})
        for st in self._timing:
            trig = st.spec.trigger
            in_window = (
                trig.prob > 0.0
                and at >= trig.start
                and (trig.duration is None or at < trig.start + trig.duration)
            )
            if in_window:
                if not st.channel.is_neutral:
                    self._note_injection(at)
                st.was_active = True
                st.channel.push(at, cmd)
                cmd = st.channel.pop(at)
            elif st.was_active:
                st.channel.reset()
                st.was_active = False
        return cmd
