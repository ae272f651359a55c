"""Campaign planning and execution: scenario x fault-spec x replicate
trials, per-episode records, resilience metrics (MSR, VPK, APK, TTV), and
the canonical result files.

Everything downstream of a config is deterministic: trial seeds are hashes
of (master_seed, scenario, spec, replicate), the sensor stream depends only
on (master_seed, scenario, replicate), and results are sorted by trial id
before writing, so reruns and different worker counts produce byte-identical
outputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .agent import (
    ControllerParams,
    ControllerState,
    SensorParams,
    WeightsError,
    goal_features,
    nn_forward,
    rule_controller,
    sense,
    weights_from_dict,
)
from .faults import FaultClass, FaultPipeline, FaultSpec, SpecError, parse_fault_spec
from .rng import derive_seed, stream
from .stats import histogram, mann_whitney_u, summarize
from .violations import ViolationEvent, ViolationLedger, is_accident, observe
from .world import (
    MissionStatus,
    Pose,
    ScenarioError,
    World,
    clamp_command,
    mission_status,
    query_collisions,
    step,
    world_from_dict,
)

GOLDEN_SPEC_ID = "none"
REPORT_SCHEMA = "faultdrive-report-v1"
SIGNIFICANCE_ALPHA = 0.05


class ConfigError(ValueError):
    """Campaign configuration is malformed or references missing inputs."""


class DataError(ValueError):
    """Stored episode records are missing or corrupt."""


@dataclass(frozen=True)
class Trial:
    """One planned episode. (scenario_id, spec_id, seed) identifies it."""

    scenario_id: str
    spec_id: str
    seed: int
    replicate: int

    @property
    def trial_id(self) -> str:
        return f"{self.scenario_id}:{self.spec_id}:{self.replicate}"

    def sort_key(self):
        return (self.scenario_id, self.spec_id, self.replicate)


@dataclass(frozen=True)
class EpisodeRecord:
    trial: Trial
    outcome: str
    distance_km: float
    duration_s: float
    violations: tuple[ViolationEvent, ...]
    first_injection_time: Optional[float]
    nan_substitutions: int
    tick_rate: float
    delay_s: Optional[float]
    trace_digest: str

    @property
    def accidents(self) -> int:
        return sum(1 for v in self.violations if is_accident(v.kind))

    @property
    def ttv(self) -> Optional[float]:
        """Seconds from the first injection to the first violation at or
        after it; None when no injection happened or none manifested."""
        if self.first_injection_time is None:
            return None
        for v in self.violations:
            if v.time >= self.first_injection_time:
                return v.time - self.first_injection_time
        return None


def record_to_obj(rec: EpisodeRecord) -> dict:
    return {
        "trial": {
            "scenario": rec.trial.scenario_id,
            "spec": rec.trial.spec_id,
            "seed": rec.trial.seed,
            "replicate": rec.trial.replicate,
        },
        "outcome": rec.outcome,
        "distance_km": rec.distance_km,
        "duration_s": rec.duration_s,
        "violations": [
            {
                "kind": v.kind,
                "frame": v.frame,
                "time": v.time,
                "x": v.position.x,
                "y": v.position.y,
                "heading": v.position.heading,
            }
            for v in rec.violations
        ],
        "first_injection_time": rec.first_injection_time,
        "nan_substitutions": rec.nan_substitutions,
        "tick_rate": rec.tick_rate,
        "delay_s": rec.delay_s,
        "trace_digest": rec.trace_digest,
    }


def record_from_obj(obj: dict) -> EpisodeRecord:
    try:
        trial = Trial(
            scenario_id=obj["trial"]["scenario"],
            spec_id=obj["trial"]["spec"],
            seed=obj["trial"]["seed"],
            replicate=obj["trial"]["replicate"],
        )
        violations = tuple(
            ViolationEvent(
                kind=v["kind"],
                frame=v["frame"],
                time=v["time"],
                position=Pose(v["x"], v["y"], v["heading"]),
            )
            for v in obj["violations"]
        )
        return EpisodeRecord(
            trial=trial,
            outcome=obj["outcome"],
            distance_km=obj["distance_km"],
            duration_s=obj["duration_s"],
            violations=violations,
            first_injection_time=obj["first_injection_time"],
            nan_substitutions=obj["nan_substitutions"],
            tick_rate=obj["tick_rate"],
            delay_s=obj["delay_s"],
            trace_digest=obj["trace_digest"],
        )
    except (KeyError, TypeError) as e:
        raise DataError(f"episode record missing field: {e}") from e


def record_json(rec: EpisodeRecord) -> str:
    return json.dumps(record_to_obj(rec), sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Configuration


def _resolve_doc(entry, base_dir: Path, what: str) -> dict:
    if isinstance(entry, dict):
        return dict(entry)
    if isinstance(entry, str):
        path = Path(entry)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"{what} file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: parse error at line {e.lineno}: {e.msg}") from e
        if isinstance(doc, dict) and "id" not in doc:
            doc["id"] = path.stem
        return doc
    raise ConfigError(f"{what} entries must be file paths or inline objects")


def resolve_config(raw: dict, base_dir: Path) -> dict:
    """Expand scenario/spec/weights references into a self-contained config
    (what cmd_run stores next to its outputs so replay needs no other
    files)."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    cfg = dict(raw)
    cfg.setdefault("master_seed", 0)
    cfg.setdefault("replicates", 1)
    cfg.setdefault("workers", 1)
    cfg.setdefault("halt_on_collision", True)
    cfg.setdefault("count_mode", "edge")
    cfg.setdefault("agent", {"type": "rule"})
    cfg.setdefault("sensor", {})
    cfg.setdefault("controller", {})

    scenarios = []
    for entry in cfg.get("scenarios", []):
        doc = _resolve_doc(entry, base_dir, "scenario")
        if "id" not in doc:
            raise ConfigError("inline scenarios need an 'id'")
        scenarios.append(doc)
    cfg["scenarios"] = scenarios

    specs = [_resolve_doc(entry, base_dir, "fault spec") for entry in cfg.get("fault_specs", [])]
    cfg["fault_specs"] = specs

    agent = dict(cfg["agent"])
    if agent.get("type", "rule") == "nn" and "weights" in agent and "weights_doc" not in agent:
        agent["weights_doc"] = _resolve_doc(agent["weights"], base_dir, "weights")
    cfg["agent"] = agent
    return cfg


def validate_config(cfg: dict) -> None:
    """Full validation of a resolved config; raises ConfigError."""
    if not isinstance(cfg.get("master_seed"), int) or isinstance(cfg["master_seed"], bool):
        raise ConfigError("master_seed must be an integer")
    if not isinstance(cfg.get("replicates"), int) or cfg["replicates"] < 1:
        raise ConfigError("replicates must be an integer >= 1")
    if not isinstance(cfg.get("workers"), int) or cfg["workers"] < 1:
        raise ConfigError("workers must be an integer >= 1")
    if cfg.get("count_mode") not in ("edge", "per_frame"):
        raise ConfigError("count_mode must be 'edge' or 'per_frame'")
    if not isinstance(cfg.get("halt_on_collision"), bool):
        raise ConfigError("halt_on_collision must be a boolean")
    if not cfg.get("scenarios"):
        raise ConfigError("config needs at least one scenario")

    seen = set()
    for doc in cfg["scenarios"]:
        sid = doc.get("id")
        if not isinstance(sid, str) or not sid:
            raise ConfigError("every scenario needs a string id")
        if sid in seen:
            raise ConfigError(f"duplicate scenario id {sid!r}")
        seen.add(sid)
        try:
            world_from_dict(doc)
        except ScenarioError as e:
            raise ConfigError(f"scenario {sid!r}: {e}") from e

    spec_ids = set()
    parsed_specs = []
    for doc in cfg["fault_specs"]:
        try:
            spec = parse_fault_spec(doc)
        except SpecError as e:
            raise ConfigError(str(e)) from e
        if spec.id in spec_ids:
            raise ConfigError(f"duplicate fault spec id {spec.id!r}")
        spec_ids.add(spec.id)
        parsed_specs.append(spec)

    agent = cfg.get("agent", {})
    atype = agent.get("type", "rule")
    if atype not in ("rule", "nn"):
        raise ConfigError(f"agent.type must be 'rule' or 'nn', got {atype!r}")
    if atype == "nn":
        if "weights_doc" not in agent:
            raise ConfigError("nn agent needs a weights file ('agent.weights')")
        try:
            weights_from_dict(agent["weights_doc"])
        except WeightsError as e:
            raise ConfigError(str(e)) from e
    else:
        for spec in parsed_specs:
            if spec.fault_class is FaultClass.ML:
                raise ConfigError(
                    f"fault spec {spec.id!r} is an ml fault but the agent is rule-based"
                )


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: parse error at line {e.lineno}: {e.msg}") from e
    return resolve_config(raw, path.parent)


# ---------------------------------------------------------------------------
# Planning and execution


def plan_campaign(cfg: dict) -> list[Trial]:
    """Cross product scenarios x fault specs x replicates, plus a golden
    arm per scenario. Seeds are hashes, so plans are reproducible."""
    spec_ids = [GOLDEN_SPEC_ID] + [doc["id"] for doc in cfg["fault_specs"]]
    trials = []
    for doc in cfg["scenarios"]:
        for spec_id in spec_ids:
            for rep in range(cfg["replicates"]):
                seed = derive_seed(cfg["master_seed"], doc["id"], spec_id, rep)
                trials.append(Trial(doc["id"], spec_id, seed, rep))
    trials.sort(key=Trial.sort_key)
    return trials


def _sensor_params(cfg: dict) -> SensorParams:
    d = cfg.get("sensor", {})
    base = SensorParams()
    return SensorParams(
        n_rays=d.get("n_rays", base.n_rays),
        max_range=d.get("max_range", base.max_range),
        sigma_gps=d.get("sigma_gps", base.sigma_gps),
        march_step=d.get("march_step", base.march_step),
        refine_iters=d.get("refine_iters", base.refine_iters),
    )


def _controller_params(cfg: dict, world: World) -> ControllerParams:
    d = cfg.get("controller", {})
    base = ControllerParams()
    return ControllerParams(
        v_target=d.get("v_target", base.v_target),
        d_brake=d.get("d_brake", base.d_brake),
        throttle_gain=d.get("throttle_gain", base.throttle_gain),
        brake_cone=d.get("brake_cone", base.brake_cone),
        min_lookahead=d.get("min_lookahead", base.min_lookahead),
        wheelbase=world.ego.wheelbase,
        max_steer=world.ego.max_steer,
    )


def _scenario_doc(cfg: dict, scenario_id: str) -> dict:
    for doc in cfg["scenarios"]:
        if doc["id"] == scenario_id:
            return doc
    raise ConfigError(f"unknown scenario id {scenario_id!r}")


def _spec_doc(cfg: dict, spec_id: str) -> Optional[dict]:
    if spec_id == GOLDEN_SPEC_ID:
        return None
    for doc in cfg["fault_specs"]:
        if doc.get("id") == spec_id:
            return doc
    raise ConfigError(f"unknown fault spec id {spec_id!r}")


def run_episode(cfg: dict, trial: Trial) -> EpisodeRecord:
    """Execute one trial: sense -> data faults -> sensor-side hardware
    faults -> controller (with possibly corrupted weights) -> command-side
    hardware faults -> timing channel -> clamp -> step -> violations ->
    mission status, until success, timeout, or collision halt."""
    world = world_from_dict(_scenario_doc(cfg, trial.scenario_id))
    spec_doc = _spec_doc(cfg, trial.spec_id)
    specs = [parse_fault_spec(spec_doc)] if spec_doc is not None else []
    pipeline = FaultPipeline(specs, trial.seed)

    delay_s = None
    for spec in specs:
        if spec.fault_class is FaultClass.TIMING:
            delay_s = spec.params.get("delay_frames", 0) / world.tick_rate

    sensor_params = _sensor_params(cfg)
    ctrl_params = _controller_params(cfg, world)
    agent_cfg = cfg.get("agent", {"type": "rule"})
    use_nn = agent_cfg.get("type", "rule") == "nn"
    base_weights = weights_from_dict(agent_cfg["weights_doc"]) if use_nn else None

    sensor_rng = stream("sensor", cfg["master_seed"], trial.scenario_id, trial.replicate)
    ledger = ViolationLedger(
        count_mode=cfg.get("count_mode", "edge"),
        contact_cooldown=cfg.get("contact_cooldown", 30),
    )
    state = ControllerState()
    digest = hashlib.sha256()
    halt_on_collision = cfg.get("halt_on_collision", True)

    outcome = None
    while outcome is None:
        fno = world.frame
        sensed = sense(world, sensor_rng, sensor_params)
        sensed = pipeline.apply_to_frame(sensed, fno)
        if use_nn:
            weights = pipeline.faulted_weights(base_weights, fno)
            bearing, dist = goal_features(sensed, world.mission, state)
            cmd = nn_forward(sensed, weights, bearing, dist, v_max=world.ego.v_max)
        else:
            cmd = rule_controller(sensed, world.mission, state, ctrl_params)
        cmd = pipeline.apply_to_command(cmd, fno)
        cmd = clamp_command(cmd)

        prev = world
        world = step(world, cmd)
        ledger = observe(ledger, prev, world)
        digest.update(
            (
                f"{world.frame},{world.ego.pose.x!r},{world.ego.pose.y!r},"
                f"{world.ego.pose.heading!r},{world.ego.speed!r},"
                f"{cmd.steer!r},{cmd.throttle!r},{cmd.brake!r}\n"
            ).encode()
        )

        if halt_on_collision and query_collisions(world):
            outcome = "halted_on_collision"
        else:
            status = mission_status(world)
            if status is not MissionStatus.IN_PROGRESS:
                outcome = status.value

    fit = pipeline.first_injection_frame
    return EpisodeRecord(
        trial=trial,
        outcome=outcome,
        distance_km=world.odometer_km,
        duration_s=world.time,
        violations=ledger.events,
        first_injection_time=None if fit is None else fit / world.tick_rate,
        nan_substitutions=pipeline.nan_substitutions,
        tick_rate=world.tick_rate,
        delay_s=delay_s,
        trace_digest=digest.hexdigest(),
    )


def _run_episode_task(payload):
    cfg, trial_tuple = payload
    return run_episode(cfg, Trial(*trial_tuple))


def run_campaign(cfg: dict, workers: Optional[int] = None) -> list[EpisodeRecord]:
    """Run every planned trial and return records sorted by trial id.
    Trials are independent; worker count never changes the results."""
    validate_config(cfg)
    trials = plan_campaign(cfg)
    n_workers = workers if workers is not None else cfg.get("workers", 1)
    if n_workers > 1 and len(trials) > 1:
        payloads = [
            (cfg, (t.scenario_id, t.spec_id, t.seed, t.replicate)) for t in trials
        ]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_run_episode_task, payloads, chunksize=1))
    else:
        records = [run_episode(cfg, t) for t in trials]
    records.sort(key=lambda r: r.trial.sort_key())
    return records


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class CampaignReport:
    episodes: int
    successes: int
    msr_percent: float
    total_km: float
    total_violations: int
    total_accidents: int
    vpk: Optional[float]
    apk: Optional[float]
    zero_distance_episodes: int
    vpk_samples: tuple[float, ...]
    ttv_samples: tuple[float, ...]
    scenario_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "successes": self.successes,
            "msr_percent": self.msr_percent,
            "total_km": self.total_km,
            "total_violations": self.total_violations,
            "total_accidents": self.total_accidents,
            "vpk": self.vpk,
            "apk": self.apk,
            "zero_distance_episodes": self.zero_distance_episodes,
            "vpk_per_episode": {
                **summarize(list(self.vpk_samples)),
                "histogram": histogram(list(self.vpk_samples)),
            },
            "ttv": {
                "samples": list(self.ttv_samples),
                **summarize(list(self.ttv_samples)),
                "histogram": histogram(list(self.ttv_samples)),
            },
            "scenarios": list(self.scenario_ids),
        }


@dataclass(frozen=True)
class DeltaReport:
    delta_msr: float
    delta_vpk: Optional[float]
    delta_apk: Optional[float]
    u_statistic: Optional[float]
    p_value: Optional[float]
    significant: bool

    def to_dict(self) -> dict:
        return {
            "delta_msr": self.delta_msr,
            "delta_vpk": self.delta_vpk,
            "delta_apk": self.delta_apk,
            "mann_whitney": {
                "u": self.u_statistic,
                "p_value": self.p_value,
                "significant": self.significant,
                "alpha": SIGNIFICANCE_ALPHA,
            },
        }


def compute_metrics(records: list[EpisodeRecord]) -> CampaignReport:
    """Campaign-pooled MSR/VPK/APK plus the per-episode VPK distribution
    and TTV samples. Zero-distance episodes contribute no VPK sample and
    are flagged; with zero total distance the rates are undefined (None)."""
    if not records:
        raise ValueError("compute_metrics needs at least one record")
    ordered = sorted(records, key=lambda r: r.trial.sort_key())
    episodes = len(ordered)
    successes = sum(1 for r in ordered if r.outcome == "success")
    total_km = sum(r.distance_km for r in ordered)
    total_violations = sum(len(r.violations) for r in ordered)
    total_accidents = sum(r.accidents for r in ordered)
    zero_distance = sum(1 for r in ordered if r.distance_km == 0.0)

    vpk_samples = tuple(
        len(r.violations) / r.distance_km for r in ordered if r.distance_km > 0.0
    )
    ttv_samples = tuple(r.ttv for r in ordered if r.ttv is not None)

    return CampaignReport(
        episodes=episodes,
        successes=successes,
        msr_percent=100.0 * successes / episodes,
        total_km=total_km,
        total_violations=total_violations,
        total_accidents=total_accidents,
        vpk=(total_violations / total_km) if total_km > 0.0 else None,
        apk=(total_accidents / total_km) if total_km > 0.0 else None,
        zero_distance_episodes=zero_distance,
        vpk_samples=vpk_samples,
        ttv_samples=ttv_samples,
        scenario_ids=tuple(sorted({r.trial.scenario_id for r in ordered})),
    )


def compare_to_golden(report: CampaignReport, golden: CampaignReport) -> DeltaReport:
    """Metric deltas plus a Mann-Whitney test on the per-episode VPK
    distributions. Both reports must cover the same scenario set."""
    if report.scenario_ids != golden.scenario_ids:
        raise ValueError(
            f"scenario-set mismatch: {list(report.scenario_ids)} vs {list(golden.scenario_ids)}"
        )
    u = p = None
    significant = False
    if report.vpk_samples and golden.vpk_samples:
        u, p = mann_whitney_u(list(report.vpk_samples), list(golden.vpk_samples))
        significant = p < SIGNIFICANCE_ALPHA
    return DeltaReport(
        delta_msr=report.msr_percent - golden.msr_percent,
        delta_vpk=(report.vpk - golden.vpk) if report.vpk is not None and golden.vpk is not None else None,
        delta_apk=(report.apk - golden.apk) if report.apk is not None and golden.apk is not None else None,
        u_statistic=u,
        p_value=p,
        significant=significant,
    )


def _per_trial_rows(records: list[EpisodeRecord]) -> list[dict]:
    rows = []
    for r in sorted(records, key=lambda x: x.trial.sort_key()):
        rows.append(
            {
                "scenario": r.trial.scenario_id,
                "spec": r.trial.spec_id,
                "replicate": r.trial.replicate,
                "seed": r.trial.seed,
                "outcome": r.outcome,
                "km": r.distance_km,
                "violations": len(r.violations),
                "accidents": r.accidents,
                "ttv": r.ttv,
            }
        )
    return rows


def full_report(records: list[EpisodeRecord]) -> dict:
    """The report.json document: overall metrics, the golden arm, and one
    sub-report per fault spec with its golden comparison. Built purely from
    records so cmd_report reproduces it byte for byte."""
    overall = compute_metrics(records)
    by_spec_ids = sorted({r.trial.spec_id for r in records})
    golden_records = [r for r in records if r.trial.spec_id == GOLDEN_SPEC_ID]
    golden = compute_metrics(golden_records) if golden_records else None

    by_spec = {}
    for spec_id in by_spec_ids:
        if spec_id == GOLDEN_SPEC_ID:
            continue
        group = [r for r in records if r.trial.spec_id == spec_id]
        rep = compute_metrics(group)
        entry = {"report": rep.to_dict(), "vs_golden": None}
        if golden is not None and rep.scenario_ids == golden.scenario_ids:
            entry["vs_golden"] = compare_to_golden(rep, golden).to_dict()
        delays = sorted({r.delay_s for r in group if r.delay_s is not None})
        if delays:
            entry["delay"] = f"{delays[0]:.1f} s"
            entry["delay_s"] = delays[0]
        by_spec[spec_id] = entry

    return {
        "schema": REPORT_SCHEMA,
        "overall": overall.to_dict(),
        "golden": golden.to_dict() if golden is not None else None,
        "by_spec": by_spec,
        "per_trial": _per_trial_rows(records),
    }


# ---------------------------------------------------------------------------
# Result files


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def render_summary_csv(records: list[EpisodeRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["scenario", "spec", "replicate", "seed", "outcome", "km", "violations", "accidents", "ttv"]
    )
    for row in _per_trial_rows(records):
        writer.writerow([_fmt(row[k]) for k in
                         ("scenario", "spec", "replicate", "seed", "outcome", "km", "violations", "accidents", "ttv")])
    return buf.getvalue()


def render_plotdata(report: dict) -> dict[str, str]:
    """CSV files with histogram bins and per-spec metric sweeps, enough to
    redraw the MSR / VPK / TTV figures with any plotting tool."""
    files = {}

    def hist_csv(h):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        edges = h["bin_edges"]
        for i, c in enumerate(h["counts"]):
            w.writerow([_fmt(edges[i]), _fmt(edges[i + 1]), c])
        return buf.getvalue()

    files["vpk_hist.csv"] = hist_csv(report["overall"]["vpk_per_episode"]["histogram"])
    files["ttv_hist.csv"] = hist_csv(report["overall"]["ttv"]["histogram"])

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spec", "delay_s", "msr_percent"])
    for spec_id in sorted(report["by_spec"]):
        entry = report["by_spec"][spec_id]
        w.writerow([spec_id, _fmt(entry.get("delay_s")), _fmt(entry["report"]["msr_percent"])])
    files["msr_by_spec.csv"] = buf.getvalue()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spec", "delay_s", "vpk"])
    for spec_id in sorted(report["by_spec"]):
        entry = report["by_spec"][spec_id]
        w.writerow([spec_id, _fmt(entry.get("delay_s")), _fmt(entry["report"]["vpk"])])
    files["vpk_by_spec.csv"] = buf.getvalue()
    return files


def write_outputs(out_dir, records: list[EpisodeRecord], cfg: Optional[dict] = None) -> dict:
    """Write episodes.jsonl, report.json, summary.csv, and plotdata/ under
    out_dir; optionally store the resolved config for replay."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: r.trial.sort_key())

    with open(out / "episodes.jsonl", "w", encoding="utf-8") as fh:
        for rec in ordered:
            fh.write(record_json(rec) + "\n")

    report = full_report(ordered)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        fh.write(render_report_json(report))
    with open(out / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write(render_summary_csv(ordered))

    plotdir = out / "plotdata"
    plotdir.mkdir(exist_ok=True)
    for name, content in render_plotdata(report).items():
        with open(plotdir / name, "w", encoding="utf-8") as fh:
            fh.write(content)

    if cfg is not None:
        with open(out / "config.resolved.json", "w", encoding="utf-8") as fh:
            json.dump(cfg, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return report


def read_episodes(path) -> list[EpisodeRecord]:
    """Load episodes.jsonl; raises DataError naming the offending line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"episodes file not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise DataError(f"{path}: line {lineno}: blank line in record stream")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: line {lineno}: {e.msg}") from e
            try:
                records.append(record_from_obj(obj))
            except DataError as e:
                raise DataError(f"{path}: line {lineno}: {e}") from e
    if not records:
        raise DataError(f"{path}: no records")
    return records
