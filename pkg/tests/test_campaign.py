import json
from pathlib import Path

import numpy as np
import pytest

from faultdrive.campaign import (
    ConfigError,
    EpisodeRecord,
    Trial,
    compare_to_golden,
    compute_metrics,
    full_report,
    plan_campaign,
    read_episodes,
    record_from_obj,
    record_json,
    record_to_obj,
    resolve_config,
    run_campaign,
    run_episode,
    validate_config,
    write_outputs,
)
from faultdrive.campaign import DataError

from conftest import ROOT, minimal_scenario


def small_config(**overrides):
    doc_a = minimal_scenario()
    doc_a["id"] = "mini-a"
    doc_b = minimal_scenario()
    doc_b["id"] = "mini-b"
    doc_b["mission"]["waypoints"] = [[40, 0]]
    raw = {
        "master_seed": 7,
        "scenarios": [doc_a, doc_b],
        "fault_specs": [],
        "replicates": 1,
        "workers": 1,
    }
    raw.update(overrides)
    return resolve_config(raw, ROOT)


DROP_SPEC = {
    "id": "drop-all", "class": "timing",
    "target": {"channel_direction": "agent_to_actuation"},
    "params": {"delay_frames": 0, "drop_probability": 1.0, "mode": "replay_last"},
    "trigger": {"start": 0, "duration": "persistent", "prob": 1.0}, "seed": 3,
}


# --- planning -----------------------------------------------------------------


def test_plan_cross_product_plus_golden():
    specs = [dict(DROP_SPEC, id=f"s{i}") for i in range(3)]
    cfg = small_config(fault_specs=specs, replicates=5)
    trials = plan_campaign(cfg)
    assert len(trials) == 2 * 3 * 5 + 2 * 5  # 30 fault + 10 golden
    golden = [t for t in trials if t.spec_id == "none"]
    assert len(golden) == 10


def test_plan_no_specs_is_golden_only():
    trials = plan_campaign(small_config())
    assert {t.spec_id for t in trials} == {"none"}


def test_plan_is_deterministic_including_seeds():
    a = plan_campaign(small_config(fault_specs=[DROP_SPEC], replicates=3))
    b = plan_campaign(small_config(fault_specs=[DROP_SPEC], replicates=3))
    assert a == b
    assert len({t.seed for t in a}) == len(a)  # distinct per trial


def test_validate_rejects_bad_configs():
    with pytest.raises(ConfigError, match="scenario"):
        validate_config(resolve_config({"master_seed": 1, "scenarios": []}, ROOT))
    with pytest.raises(ConfigError, match="duplicate"):
        doc = minimal_scenario()
        doc["id"] = "x"
        validate_config(resolve_config({"master_seed": 1, "scenarios": [doc, dict(doc)]}, ROOT))
    with pytest.raises(ConfigError, match="ml fault"):
        spec = {"id": "m", "class": "ml", "target": {"ml_location": "all"},
                "params": {"model": "zero"}, "trigger": {}, "seed": 1}
        validate_config(small_config(fault_specs=[spec]))


# --- episodes -----------------------------------------------------------------


def test_golden_episode_succeeds_cleanly():
    cfg = small_config()
    trials = plan_campaign(cfg)
    rec = run_episode(cfg, trials[0])
    assert rec.outcome == "success"
    assert rec.violations == ()
    assert rec.first_injection_time is None
    assert rec.distance_km > 0.0
    assert rec.duration_s > 0.0
    assert rec.nan_substitutions == 0


def test_full_drop_from_frame_zero_times_out_short():
    cfg = small_config(fault_specs=[DROP_SPEC])
    trial = next(t for t in plan_campaign(cfg) if t.spec_id == "drop-all")
    rec = run_episode(cfg, trial)
    assert rec.outcome == "timeout"
    assert rec.distance_km < 0.01  # default command brakes; the car never moves


def test_episode_rerun_is_byte_identical():
    cfg = small_config(fault_specs=[DROP_SPEC])
    for trial in plan_campaign(cfg)[:3]:
        a = run_episode(cfg, trial)
        b = run_episode(cfg, trial)
        assert record_json(a) == record_json(b)


def test_record_roundtrip():
    cfg = small_config()
    rec = run_episode(cfg, plan_campaign(cfg)[0])
    obj = json.loads(record_json(rec))
    assert record_json(record_from_obj(obj)) == record_json(rec)


def test_halt_on_collision_outcome():
    doc = minimal_scenario(
        actors=[{"kind": "pedestrian", "pose": [12.0, 0.0, 0.0], "speed": 0.0,
                 "radius": 0.5, "script": []}]
    )
    doc["id"] = "blocked"
    # pedestrian sits on the lane: the agent brakes at d_brake and would
    # normally stop; put the waypoint past it and shrink d_brake to force
    # the hit
    cfg = resolve_config({
        "master_seed": 3, "scenarios": [doc], "controller": {"d_brake": 0.5},
    }, ROOT)
    rec = run_episode(cfg, plan_campaign(cfg)[0])
    assert rec.outcome == "halted_on_collision"
    assert any(v.kind == "collision_pedestrian" for v in rec.violations)


# --- metrics ------------------------------------------------------------------


def hand_record(i, outcome, km, violations=(), inj=None):
    from faultdrive.violations import ViolationEvent
    from faultdrive.world import Pose

    events = tuple(
        ViolationEvent(kind=k, frame=int(t * 15), time=t, position=Pose(0, 0, 0))
        for k, t in violations
    )
    return EpisodeRecord(
        trial=Trial("s", "f", 100 + i, i), outcome=outcome, distance_km=km,
        duration_s=30.0, violations=events, first_injection_time=inj,
        nan_substitutions=0, tick_rate=15.0, delay_s=None, trace_digest="x",
    )


def test_msr_simple_ratio():
    records = [hand_record(i, "success" if i < 10 else "timeout", 0.1) for i in range(20)]
    assert compute_metrics(records).msr_percent == 50.0


def test_vpk_apk_pooled():
    records = [
        hand_record(0, "success", 1.0, [("lane", 5.0), ("curb", 6.0)]),
        hand_record(1, "timeout", 0.5, [("collision_vehicle", 9.0)]),
    ]
    rep = compute_metrics(records)
    assert rep.vpk == 3 / 1.5
    assert rep.apk == pytest.approx(0.6666666666666666)
    assert rep.apk <= rep.vpk
    # pooled-rate consistency: vpk * total km recovers the count
    assert rep.vpk * rep.total_km == pytest.approx(3.0, abs=1e-9)


def test_ttv_first_violation_at_or_after_injection():
    rec = hand_record(0, "timeout", 1.0, [("lane", 4.0), ("lane", 12.5), ("curb", 20.0)], inj=10.0)
    assert rec.ttv == 2.5
    rec2 = hand_record(1, "timeout", 1.0, [("lane", 4.0)], inj=10.0)
    assert rec2.ttv is None
    rec3 = hand_record(2, "success", 1.0, [("lane", 4.0)], inj=None)
    assert rec3.ttv is None


def test_zero_distance_excluded_and_flagged():
    records = [hand_record(0, "timeout", 0.0, [("lane", 1.0)]), hand_record(1, "success", 2.0)]
    rep = compute_metrics(records)
    assert rep.zero_distance_episodes == 1
    assert rep.vpk_samples == (0.0,)  # only the 2 km episode contributes
    assert rep.vpk == 0.5  # pooled: 1 violation over 2 km


def test_all_zero_distance_has_undefined_rates():
    rep = compute_metrics([hand_record(0, "timeout", 0.0)])
    assert rep.vpk is None and rep.apk is None


def test_empty_records_rejected():
    with pytest.raises(ValueError, match="at least one"):
        compute_metrics([])


def test_metric_oracle_fixture_exact():
    fix = json.loads((ROOT / "fixtures" / "metric_oracle.json").read_text())
    records = [record_from_obj(o) for o in fix["records"]]
    rep = compute_metrics(records)
    exp = fix["expected"]
    assert rep.msr_percent == exp["msr_percent"]
    assert rep.vpk == exp["vpk"]
    assert rep.apk == exp["apk"]
    assert list(rep.ttv_samples) == exp["ttv_samples"]


# --- golden comparison -----------------------------------------------------------


def test_compare_to_self_is_null_delta():
    records = [hand_record(i, "success", 1.0, [("lane", 3.0)]) for i in range(10)]
    rep = compute_metrics(records)
    delta = compare_to_golden(rep, rep)
    assert delta.delta_msr == 0.0
    assert delta.delta_vpk == 0.0
    assert not delta.significant


def test_disjoint_vpk_distributions_significant():
    golden = compute_metrics([hand_record(i, "success", 1.0) for i in range(30)])
    faulted = compute_metrics(
        [hand_record(i, "timeout", 1.0, [("lane", 2.0 + j) for j in range(1 + i % 3)]) for i in range(30)]
    )
    delta = compare_to_golden(faulted, golden)
    assert delta.significant
    assert delta.delta_vpk > 0


def test_scenario_set_mismatch_rejected():
    a = compute_metrics([hand_record(0, "success", 1.0)])
    other = EpisodeRecord(
        trial=Trial("other", "f", 1, 0), outcome="success", distance_km=1.0,
        duration_s=1.0, violations=(), first_injection_time=None,
        nan_substitutions=0, tick_rate=15.0, delay_s=None, trace_digest="x",
    )
    b = compute_metrics([other])
    with pytest.raises(ValueError, match="scenario-set mismatch"):
        compare_to_golden(a, b)


# --- campaign io ------------------------------------------------------------------


def test_run_campaign_outputs_roundtrip(tmp_path):
    cfg = small_config(fault_specs=[DROP_SPEC], replicates=2)
    records = run_campaign(cfg)
    report = write_outputs(tmp_path, records, cfg=cfg)
    assert (tmp_path / "episodes.jsonl").exists()
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "plotdata" / "vpk_hist.csv").exists()
    assert (tmp_path / "config.resolved.json").exists()

    loaded = read_episodes(tmp_path / "episodes.jsonl")
    assert [record_json(r) for r in loaded] == [record_json(r) for r in sorted(records, key=lambda r: r.trial.sort_key())]
    assert full_report(loaded) == report

    # timing spec groups report their delay in seconds
    assert report["by_spec"]["drop-all"]["delay"] == "0.0 s"
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "scenario,spec,replicate,seed,outcome,km,violations,accidents,ttv"
    assert len(summary) == 1 + len(records)


def test_read_episodes_error_paths(tmp_path):
    missing = tmp_path / "nope.jsonl"
    with pytest.raises(DataError, match="not found"):
        read_episodes(missing)
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(DataError, match="no records"):
        read_episodes(empty)
    truncated = tmp_path / "bad.jsonl"
    cfg = small_config()
    rec = run_episode(cfg, plan_campaign(cfg)[0])
    truncated.write_text(record_json(rec) + "\n" + record_json(rec)[: 40] + "\n")
    with pytest.raises(DataError, match="line 2"):
        read_episodes(truncated)


def test_workers_do_not_change_results():
    cfg = small_config(fault_specs=[DROP_SPEC], replicates=2)
    seq = run_campaign(cfg, workers=1)
    par = run_campaign(cfg, workers=4)
    assert [record_json(r) for r in seq] == [record_json(r) for r in par]
