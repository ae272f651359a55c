"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line (run with `pytest tests/test_acceptance.py -v -s`).

The campaign-level criteria run the bundled configs end to end through the
CLI, so they exercise exactly what a user would run.
"""

import json
import math
import struct
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from faultdrive.campaign import compute_metrics, load_config, read_episodes, run_episode
from faultdrive.cli import main
from faultdrive.faults import corrupt_bits, float_to_bits, inject_hardware_fault, parse_fault_spec
from faultdrive.rng import stream
from faultdrive.stats import mann_whitney_u
from faultdrive.world import ControlCommand, Pose, step, world_from_dict

from conftest import ROOT, minimal_scenario

CONFIGS = ROOT / "configs"


def check(criterion, description, ok):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {description}")
    assert ok, f"criterion {criterion}: {description}"


def run_config(config_path, out_dir, overrides=()):
    args = ["run", "-c", str(config_path), "-o", str(out_dir)]
    for ov in overrides:
        args += ["--override", ov]
    code = main(args)
    assert code == 0, f"campaign {config_path} exited {code}"
    return out_dir


@pytest.fixture(scope="session")
def calibration_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("calibration")
    t0 = time.monotonic()
    run_config(CONFIGS / "calibration.json", out)
    wall = time.monotonic() - t0
    return out, wall


@pytest.fixture(scope="session")
def delay_out(tmp_path_factory):
    return run_config(CONFIGS / "delay-sweep.json", tmp_path_factory.mktemp("delay"))


@pytest.fixture(scope="session")
def noise_out(tmp_path_factory):
    return run_config(CONFIGS / "noise-sweep.json", tmp_path_factory.mktemp("noise"))


@pytest.fixture(scope="session")
def neutral_pair(tmp_path_factory):
    neutral_out = run_config(CONFIGS / "neutral.json", tmp_path_factory.mktemp("neutral"))
    golden_cfg = json.loads((CONFIGS / "neutral.json").read_text())
    golden_cfg["fault_specs"] = []
    golden_path = tmp_path_factory.mktemp("goldencfg") / "golden.json"
    # keep relative paths resolvable from the new location
    golden_cfg["scenarios"] = [str((CONFIGS / s).resolve()) for s in golden_cfg["scenarios"]]
    golden_cfg["agent"]["weights"] = str((CONFIGS / golden_cfg["agent"]["weights"]).resolve())
    golden_path.write_text(json.dumps(golden_cfg))
    golden_out = run_config(golden_path, tmp_path_factory.mktemp("golden"))
    return neutral_out, golden_out


# -- criterion 1 ----------------------------------------------------------------


def test_criterion_1_golden_calibration(calibration_out):
    out, wall = calibration_out
    report = json.loads((out / "report.json").read_text())
    msr = report["overall"]["msr_percent"]
    vpk = report["overall"]["vpk"]
    episodes = report["overall"]["episodes"]
    ok = episodes == 20 and msr >= 90.0 and vpk == 0.0 and wall <= 60.0
    check(1, f"golden calibration: {episodes} missions, MSR {msr:.1f}% >= 90, "
             f"VPK {vpk} == 0, wall {wall:.1f}s <= 60", ok)


# -- criterion 2 ----------------------------------------------------------------


def test_criterion_2_delay_trend(delay_out):
    report = json.loads((delay_out / "report.json").read_text())
    records = read_episodes(delay_out / "episodes.jsonl")
    ks = [0, 10, 20, 30]
    vpk = [report["by_spec"][f"delay-k{k}"]["report"]["vpk"] for k in ks]
    episodes = [report["by_spec"][f"delay-k{k}"]["report"]["episodes"] for k in ks]

    groups = {k: [r for r in records if r.trial.spec_id == f"delay-k{k}"] for k in ks}
    _, p = mann_whitney_u(
        list(compute_metrics(groups[30]).vpk_samples),
        list(compute_metrics(groups[0]).vpk_samples),
    )
    nondecreasing = all(vpk[i] <= vpk[i + 1] + 1e-12 for i in range(3))
    label = report["by_spec"]["delay-k30"]["delay"]
    ok = (
        all(n >= 30 for n in episodes)
        and nondecreasing
        and vpk[3] > vpk[0]
        and p < 0.05
        and label == "2.0 s"
    )
    check(2, f"delay trend: VPK {['%.2f' % v for v in vpk]} nondecreasing={nondecreasing}, "
             f"k30 vs k0 MW p={p:.2e} < 0.05, k=30 reported as {label!r}", ok)


# -- criterion 3 ----------------------------------------------------------------


def test_criterion_3_sensor_noise_trend(noise_out):
    report = json.loads((noise_out / "report.json").read_text())
    cfg = json.loads((CONFIGS / "noise-sweep.json").read_text())
    spec_ids = [s["id"] for s in cfg["fault_specs"]]
    sigmas = [s["params"]["sigma"] for s in cfg["fault_specs"]]
    assert sigmas == sorted(sigmas) and sigmas[0] == 0.0

    msr = [report["by_spec"][sid]["report"]["msr_percent"] for sid in spec_ids]
    sd = [report["by_spec"][sid]["report"]["vpk_per_episode"]["stddev"] for sid in spec_ids]
    episodes = [report["by_spec"][sid]["report"]["episodes"] for sid in spec_ids]

    # nonincreasing within one grid step: adjacent points may fluctuate,
    # but every point must sit at or below all points two or more steps back
    tolerant_mono = all(
        msr[i] <= msr[j] + 1e-9 for i in range(len(msr)) for j in range(i - 1)
    )
    ok = (
        all(n >= 30 for n in episodes)
        and tolerant_mono
        and sd[-1] is not None
        and sd[0] is not None
        and sd[-1] > sd[0]
    )
    check(3, f"sensor-noise trend: sigma grid {sigmas}, MSR {msr} nonincreasing "
             f"(one-step tolerance), VPK-stddev {sd[-1]:.2f} @ high > {sd[0]:.2f} @ 0", ok)


# -- criterion 4 ----------------------------------------------------------------


def test_criterion_4_metric_oracle():
    from faultdrive.campaign import record_from_obj

    fix = json.loads((ROOT / "fixtures" / "metric_oracle.json").read_text())
    records = [record_from_obj(o) for o in fix["records"]]
    rep = compute_metrics(records)
    exp = fix["expected"]
    ttv = list(rep.ttv_samples)
    ok = (
        rep.msr_percent == exp["msr_percent"]
        and rep.vpk == exp["vpk"]
        and rep.apk == exp["apk"]
        and ttv == exp["ttv_samples"]
        and float(np.mean(ttv)) == exp["ttv_mean"]
        and float(np.median(ttv)) == exp["ttv_median"]
        and rep.total_km == exp["total_km"]
        and rep.total_violations == exp["total_violations"]
        and rep.total_accidents == exp["total_accidents"]
    )
    check(4, f"metric oracle: MSR {rep.msr_percent} VPK {rep.vpk} APK {rep.apk} "
             f"TTV {ttv} equal hand-computed values exactly", ok)


# -- criterion 5 ----------------------------------------------------------------


def ref_bits(value):
    """Independent float32 encode: struct, with manual overflow to inf."""
    try:
        return struct.unpack(">I", struct.pack(">f", value))[0]
    except OverflowError:
        return 0x7F800000 if value > 0 else 0xFF800000


def ref_float(bits):
    return struct.unpack(">f", struct.pack(">I", bits & 0xFFFFFFFF))[0]


def apply_policy(bits, default):
    v = ref_float(bits)
    return (default, True) if math.isnan(v) else (v, False)


def test_criterion_5_bit_fault_oracle():
    rng = np.random.default_rng(20260809)
    floats = [float(np.float32(v)) for v in rng.uniform(-1e8, 1e8, size=10_000)]
    default = 0.25

    mismatches = 0
    # single_bit: every float x every bit position
    for b in range(32):
        spec = parse_fault_spec({
            "id": "sb", "class": "hardware", "target": {"command_field": "steer"},
            "params": {"op": "single_bit", "bit": b}, "trigger": {"prob": 1.0}, "seed": 0,
        })
        for v in floats:
            got, subbed = inject_hardware_fault(v, spec, stream(0), nan_default=default)
            expect, esub = apply_policy(ref_bits(v) ^ (1 << b), default)
            if subbed != esub or struct.pack("<d", got) != struct.pack("<d", expect):
                mismatches += 1

    # multi_bit: shared pick stream, independent float semantics
    for v in floats[:2000]:
        picks = stream("picks", float_to_bits(v)).choice(32, size=3, replace=False)
        m = 0
        for b in picks:
            m ^= 1 << int(b)
        got_bits = float_to_bits(v) ^ m
        expect, esub = apply_policy(ref_bits(v) ^ m, default)
        got, gsub = apply_policy(got_bits, default)  # same policy, impl bits
        if gsub != esub or struct.pack("<d", got) != struct.pack("<d", expect):
            mismatches += 1

    # stuck_at: random disjoint masks
    mask_rng = np.random.default_rng(7)
    for v in floats[:2000]:
        ones = int(mask_rng.integers(0, 1 << 32))
        zeros = int(mask_rng.integers(0, 1 << 32)) & ~ones & 0xFFFFFFFF
        spec = parse_fault_spec({
            "id": "sa", "class": "hardware", "target": {"command_field": "brake"},
            "params": {"op": "stuck_at", "ones": ones, "zeros": zeros},
            "trigger": {"prob": 1.0}, "seed": 0,
        })
        got, subbed = inject_hardware_fault(v, spec, stream(0), nan_default=default)
        if ones == 0 and zeros == 0:
            expect, esub = v, False  # documented bit-exact neutral identity
        else:
            expect, esub = apply_policy((ref_bits(v) | ones) & ~zeros & 0xFFFFFFFF, default)
        if subbed != esub or struct.pack("<d", got) != struct.pack("<d", expect):
            mismatches += 1

    check(5, f"bit-fault oracle: 10^4 floats x 32 single-bit positions plus "
             f"multi-bit and stuck-at vs struct-based reference, {mismatches} mismatches", mismatches == 0)


# -- criterion 6 ----------------------------------------------------------------


def behavioral(line):
    obj = json.loads(line)
    trial = obj.pop("trial")
    return (trial["scenario"], trial["replicate"]), trial["spec"], json.dumps(obj, sort_keys=True)


def test_criterion_6_neutral_fault_identity(neutral_pair):
    neutral_out, golden_out = neutral_pair
    neutral_lines = (neutral_out / "episodes.jsonl").read_text().splitlines()
    golden_lines = (golden_out / "episodes.jsonl").read_text().splitlines()

    golden_by_key = {}
    for line in golden_lines:
        key, spec, body = behavioral(line)
        assert spec == "none"
        golden_by_key[key] = (body, line)

    arms = set()
    mismatched = 0
    golden_arm_identical = True
    for line in neutral_lines:
        key, spec, body = behavioral(line)
        arms.add(spec)
        if spec == "none":
            golden_arm_identical &= line == golden_by_key[key][1]
        if body != golden_by_key[key][0]:
            mismatched += 1

    ok = (
        arms == {"none", "neutral-data", "neutral-hardware", "neutral-timing", "neutral-ml"}
        and mismatched == 0
        and golden_arm_identical
        and len(neutral_lines) == 5 * len(golden_lines)
    )
    check(6, f"neutral-fault identity: {len(neutral_lines)} episodes across 4 neutral "
             f"classes byte-identical to golden outside trial identity "
             f"({mismatched} mismatches); golden arm lines byte-identical", ok)


# -- criterion 7 ----------------------------------------------------------------


def test_criterion_7_determinism(calibration_out, neutral_pair, tmp_path_factory):
    out, _ = calibration_out
    records = read_episodes(out / "episodes.jsonl")
    failures = []
    for rec in records:
        code = main(["replay", "-o", str(out), "--trial", rec.trial.trial_id])
        if code != 0:
            failures.append(rec.trial.trial_id)

    _, golden_out = neutral_pair
    golden_cfg_path = golden_out / "config.resolved.json"
    w1 = tmp_path_factory.mktemp("w1")
    w8 = tmp_path_factory.mktemp("w8")
    cfg_file = tmp_path_factory.mktemp("cfg") / "c.json"
    cfg_file.write_text(golden_cfg_path.read_text())
    run_config(cfg_file, w1, overrides=["workers=1"])
    run_config(cfg_file, w8, overrides=["workers=8"])
    same = all(
        (w1 / name).read_bytes() == (w8 / name).read_bytes()
        for name in ("episodes.jsonl", "report.json", "summary.csv")
    ) and all(
        (w1 / "plotdata" / p.name).read_bytes() == p.read_bytes()
        for p in (w8 / "plotdata").iterdir()
    )
    ok = not failures and same
    check(7, f"determinism: replay exit 0 for all {len(records)} stored trials "
             f"(failures: {failures}); workers=1 vs workers=8 byte-identical={same}", ok)


# -- criterion 8 ----------------------------------------------------------------


def test_criterion_8_physics_properties():
    # zero-steer heading invariance, exact
    w = world_from_dict(minimal_scenario())
    w = replace(w, ego=replace(w.ego, pose=Pose(0.0, 0.0, 0.35)))
    for i in range(400):
        w = step(w, ControlCommand(steer=0.0, throttle=(i * 7 % 10) / 10.0, brake=float(i % 11 == 0)))
    heading_exact = w.ego.pose.heading == 0.35

    # constant-steer circle radius within 1% over a full revolution
    doc = minimal_scenario(ego={"drag": 0.0})
    w = world_from_dict(doc)
    v, steer = 2.0, 0.3
    w = replace(w, ego=replace(w.ego, speed=v))
    delta = w.ego.max_steer * steer
    radius = w.ego.wheelbase / math.tan(delta)
    cx = w.ego.pose.x - radius * math.sin(w.ego.pose.heading)
    cy = w.ego.pose.y + radius * math.cos(w.ego.pose.heading)
    dtheta = (v / w.ego.wheelbase) * math.tan(delta) / w.tick_rate
    worst = 0.0
    for _ in range(int(math.ceil(2 * math.pi / dtheta)) + 1):
        w = step(w, ControlCommand(steer=steer, throttle=0.0, brake=0.0))
        r = math.hypot(w.ego.pose.x - cx, w.ego.pose.y - cy)
        worst = max(worst, abs(r - radius) / radius)

    ok = heading_exact and worst < 0.01
    check(8, f"physics: zero-steer heading exact={heading_exact}, "
             f"circle radius worst deviation {worst * 100:.3f}% < 1%", ok)
