#!/usr/bin/env python3
"""Regenerate bundled weight and expected-value fixtures.

Expected values are computed here with plain-Python arithmetic (explicit
loops, no imports from the package under test) so the test suite compares
the library against an independently derived reference. Deterministic.
"""

import hashlib
import json
import math
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]

N_RAYS = 32
N_IN = N_RAYS + 4  # ranges, speed/v_max, goal bearing, goal distance/100, weather


# --- reference MLP ---------------------------------------------------------
# Hand-wired 36 -> 16 -> 8 -> 3 net that steers at the goal bearing, holds a
# cruise speed, and brakes when the forward rays read short. Not trained;
# it just has to drive plausibly enough to be a meaningful ml-fault target.

FWD = list(range(13, 19))  # forward-cone ray indices


def build_ref_weights():
    w0 = [[0.0] * N_IN for _ in range(16)]
    b0 = [0.0] * 16
    w0[0][N_RAYS + 1] = 2.0                # goal bearing
    w0[1][N_RAYS] = 1.0                    # speed / v_max
    for j, ray in enumerate(FWD):          # rows 2..7: blocked-ahead flags
        w0[2 + j][ray] = -0.5
        b0[2 + j] = 4.0
    w0[8][N_RAYS + 2] = 1.0                # goal distance / 100
    b0[9] = 1.0                            # constant feature
    w0[10][N_RAYS + 3] = 1.0               # weather

    w1 = [[0.0] * 16 for _ in range(8)]
    b1 = [0.0] * 8
    w1[0][0] = 1.5                         # steer route
    w1[1][1] = -1.5                        # speed error (v_target 8 of 20)
    b1[1] = 1.5 * math.tanh(8.0 / 20.0)
    for j in range(6):                     # obstacle OR over the cone flags
        w1[2][2 + j] = 1.0
    b1[2] = 4.5
    w1[3][9] = 1.0

    w2 = [[0.0] * 8 for _ in range(3)]
    b2 = [0.0] * 3
    w2[0][0] = 2.0                         # steer
    w2[1][1] = 2.5                         # throttle from speed error
    w2[1][2] = -4.0                        # cancelled when blocked
    b2[1] = 0.5
    w2[2][2] = 5.0                         # brake on blocked
    b2[2] = -2.0

    return {
        "layers": [
            {"w": w0, "b": b0, "act": "tanh"},
            {"w": w1, "b": b1, "act": "tanh"},
            {"w": w2, "b": b2, "act": "id"},
        ]
    }


def forward_reference(doc, x):
    """Independent forward pass: explicit loops over Python lists."""
    acts = {"tanh": math.tanh, "relu": lambda v: v if v > 0 else 0.0, "id": lambda v: v}
    vec = list(x)
    for layer in doc["layers"]:
        out = []
        for row, bias in zip(layer["w"], layer["b"]):
            s = bias
            for wij, xj in zip(row, vec):
                s += wij * xj
            out.append(acts[layer["act"]](s))
        vec = out
    y0, y1, y2 = vec
    sig = lambda v: 1.0 / (1.0 + math.exp(-v)) if v >= 0 else math.exp(v) / (1.0 + math.exp(v))
    return [math.tanh(y0), sig(y1), sig(y2)]


def make_nn_reference(weights_doc):
    ranges = [50.0 - 1.25 * i for i in range(N_RAYS)]
    frame = {
        "ranges": ranges,
        "speed": 4.0,
        "weather": 0.25,
        "frame": 7,
        "goal_bearing": 0.3,
        "goal_distance": 25.0,
        "v_max": 20.0,
    }
    x = ranges + [4.0 / 20.0, 0.3, 25.0 / 100.0, 0.25]
    expected = forward_reference(weights_doc, x)
    return {"input": frame, "expected": {"steer": expected[0], "throttle": expected[1], "brake": expected[2]}}


# --- ml gaussian fault fixture ---------------------------------------------
# Mirrors the documented stream-derivation rule (sha256 of 'fault|<trial
# seed>|<spec id>|<spec seed>' -> PCG64) and the documented draw order
# (one normal batch over the row-major index list of the targeted layer).

TRIAL_SEED = 424242
SPEC_ID = "ml-gauss-l0"
SPEC_SEED = 123
SIGMA = 0.1


def derive(*parts):
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def make_ml_fixture(weights_doc):
    rng = np.random.Generator(np.random.PCG64(derive("fault", TRIAL_SEED, SPEC_ID, SPEC_SEED)))
    w0 = [row[:] for row in weights_doc["layers"][0]["w"]]
    rows = len(w0)
    cols = len(w0[0])
    noise = rng.normal(0.0, 1.0, size=rows * cols)
    i = 0
    for r in range(rows):
        for c in range(cols):
            w0[r][c] = w0[r][c] + SIGMA * float(noise[i])
            i += 1
    return {
        "trial_seed": TRIAL_SEED,
        "spec": {
            "id": SPEC_ID,
            "class": "ml",
            "target": {"ml_location": {"layer": 0}},
            "params": {"model": "gaussian", "sigma": SIGMA},
            "trigger": {"start": 0, "duration": "persistent", "prob": 1.0},
            "seed": SPEC_SEED,
        },
        "expected_layer0_w": w0,
    }


# --- metric oracle ----------------------------------------------------------
# Six hand-written episode records with hand-computed MSR/VPK/APK/TTV.

def ev(kind, t):
    return {"kind": kind, "frame": int(t * 15), "time": t, "x": 0.0, "y": 0.0, "heading": 0.0}


def rec(i, outcome, km, violations, inj):
    return {
        "trial": {"scenario": "oracle", "spec": "hand", "seed": 1000 + i, "replicate": i},
        "outcome": outcome,
        "distance_km": km,
        "duration_s": 60.0,
        "violations": violations,
        "first_injection_time": inj,
        "nan_substitutions": 0,
        "tick_rate": 15,
        "delay_s": None,
        "trace_digest": "0" * 64,
    }


def make_metric_oracle():
    records = [
        rec(0, "success", 1.0, [], None),
        rec(1, "success", 0.5, [ev("lane", 12.0)], 10.0),
        rec(2, "timeout", 1.5, [ev("lane", 5.0), ev("collision_vehicle", 20.0)], 8.0),
        rec(3, "halted_on_collision", 0.25, [ev("collision_pedestrian", 6.0)], 2.0),
        rec(4, "timeout", 0.75, [ev("lane", 3.0), ev("curb", 4.0), ev("lane", 9.0)], 5.0),
        rec(5, "success", 1.0, [ev("lane", 2.0)], 4.0),
    ]
    arithmetic = [
        "MSR: successes are records 0, 1, 5 -> 100*3/6 = 50.0",
        "distance: 1.0+0.5+1.5+0.25+0.75+1.0 = 5.0 km",
        "violations: 0+1+2+1+3+1 = 8 -> VPK = 8/5.0 = 1.6",
        "accidents: collision_vehicle (rec 2) + collision_pedestrian (rec 3) = 2 -> APK = 2/5.0 = 0.4",
        "TTV: rec1 12.0-10.0=2.0; rec2 first violation at/after 8.0 is 20.0 -> 12.0;",
        "     rec3 6.0-2.0=4.0; rec4 first at/after 5.0 is 9.0 -> 4.0;",
        "     rec5 has no violation at/after 4.0 -> no sample; rec0 no injection -> no sample",
        "TTV samples [2.0, 12.0, 4.0, 4.0]: mean 22/4 = 5.5, median (4.0+4.0)/2 = 4.0",
    ]
    return {
        "records": records,
        "expected": {
            "msr_percent": 50.0,
            "vpk": 1.6,
            "apk": 0.4,
            "ttv_samples": [2.0, 12.0, 4.0, 4.0],
            "ttv_mean": 5.5,
            "ttv_median": 4.0,
            "total_km": 5.0,
            "total_violations": 8,
            "total_accidents": 2,
        },
        "arithmetic": arithmetic,
    }


def main():
    weights_dir = ROOT / "weights"
    fixtures_dir = ROOT / "fixtures"
    weights_dir.mkdir(exist_ok=True)
    fixtures_dir.mkdir(exist_ok=True)

    weights_doc = build_ref_weights()
    (weights_dir / "ref-mlp.json").write_text(json.dumps(weights_doc) + "\n", encoding="utf-8")
    print("wrote weights/ref-mlp.json")

    nn_ref = make_nn_reference(weights_doc)
    (fixtures_dir / "nn_reference.json").write_text(json.dumps(nn_ref, indent=1) + "\n", encoding="utf-8")
    print("wrote fixtures/nn_reference.json")

    ml_fix = make_ml_fixture(weights_doc)
    (fixtures_dir / "ml_gaussian_layer0.json").write_text(json.dumps(ml_fix) + "\n", encoding="utf-8")
    print("wrote fixtures/ml_gaussian_layer0.json")

    oracle = make_metric_oracle()
    (fixtures_dir / "metric_oracle.json").write_text(json.dumps(oracle, indent=1) + "\n", encoding="utf-8")
    print("wrote fixtures/metric_oracle.json")


if __name__ == "__main__":
    main()
