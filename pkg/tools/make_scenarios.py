#!/usr/bin/env python3
"""Regenerate the bundled scenario fixtures under scenarios/.

Deterministic: no RNG anywhere, so reruns reproduce the same JSON. Twenty
calibration missions live in scenarios/calibration/ (straights, arcs,
S-curves, crossings, plus the town-a grid); three harder S-tracks for
parameter sweeps live in scenarios/sweep/.
"""

import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
DS = 3.0        # centerline sample spacing, meters
WP_STEP = 10.0  # mission waypoint spacing, meters
V_PLAN = 8.0    # nominal cruise speed used for time budgets


def straight(start, heading, length):
    # two points suffice for lane geometry; waypoints interpolate anyway
    return [
        start,
        (start[0] + length * math.cos(heading), start[1] + length * math.sin(heading)),
    ]


def arc(start, heading, radius, sweep):
    """Arc from `start` tangent to `heading`; positive sweep turns left."""
    side = 1.0 if sweep >= 0 else -1.0
    cx = start[0] - side * radius * math.sin(heading)
    cy = start[1] + side * radius * math.cos(heading)
    length = abs(sweep) * radius
    n = max(2, int(round(length / DS)) + 1)
    pts = []
    for i in range(n):
        a = heading - side * math.pi / 2 + sweep * i / (n - 1)
        pts.append((cx + radius * math.cos(a), cy + radius * math.sin(a)))
    return pts


def chain(start, heading, pieces):
    """Concatenate straight/arc pieces; returns (points, final_heading)."""
    pts = [start]
    h = heading
    for kind, *args in pieces:
        if kind == "s":
            seg = straight(pts[-1], h, args[0])
        else:
            radius, sweep = args
            seg = arc(pts[-1], h, radius, sweep)
            h = h + sweep
        pts.extend(seg[1:])
    return pts, h


def path_length(pts):
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:]))


def waypoints_along(pts, step=WP_STEP):
    wps = []
    acc = 0.0
    target = step
    for a, b in zip(pts, pts[1:]):
        d = math.hypot(b[0] - a[0], b[1] - a[1])
        while acc + d >= target:
            t = (target - acc) / d
            wps.append([round(a[0] + t * (b[0] - a[0]), 3), round(a[1] + t * (b[1] - a[1]), 3)])
            target += step
        acc += d
    end = [round(pts[-1][0], 3), round(pts[-1][1], 3)]
    if not wps or wps[-1] != end:
        wps.append(end)
    return wps


def lane(pts, width=3.6, curb=2.6):
    return {
        "centerline": [[round(x, 3), round(y, 3)] for x, y in pts],
        "lane_width": width,
        "curb_offset": curb,
    }


def scenario(sid, lanes, pts, actors=(), weather=0.0, budget=None, goal_radius=2.5):
    length = path_length(pts)
    if budget is None:
        budget = round(2.0 * length / V_PLAN + 15.0, 1)
    heading = math.atan2(pts[1][1] - pts[0][1], pts[1][0] - pts[0][0])
    return {
        "id": sid,
        "tick_rate": 15,
        "weather": weather,
        "lanes": lanes,
        "actors": list(actors),
        "ego": {},
        "mission": {
            "start": [round(pts[0][0], 3), round(pts[0][1], 3), round(heading, 6)],
            "waypoints": waypoints_along(pts),
            "goal_radius": goal_radius,
            "time_budget": budget,
        },
    }


def ped(x0, y0, x1, y1, f0, f1, radius=0.35):
    h = math.atan2(y1 - y0, x1 - x0)
    return {
        "kind": "pedestrian",
        "pose": [x0, y0, round(h, 6)],
        "speed": 1.2,
        "radius": radius,
        "script": [[f0, [x0, y0, round(h, 6)]], [f1, [x1, y1, round(h, 6)]]],
    }


ARC_CURB = 3.6  # wider shoulder on bends keeps the road edge out of the brake cone


def track_scenario(sid, pieces, start=(0.0, 0.0), heading=0.0, margin=30.0,
                   width=3.6, curb=2.6, actors=(), **kw):
    """One lane segment per piece (arcs get a wider shoulder), extended by
    `margin` beyond both mission endpoints so forward rays do not see an
    end-of-road wall at the goal."""
    lanes = []
    pos = (start[0] - margin * math.cos(heading), start[1] - margin * math.sin(heading))
    h = heading
    extended = [("s", margin)] + list(pieces) + [("s", margin)]
    for kind, *args in extended:
        if kind == "s":
            seg = straight(pos, h, args[0])
            lanes.append(lane(seg, width, curb))
        else:
            radius, sweep = args
            seg = arc(pos, h, radius, sweep)
            lanes.append(lane(seg, width, max(curb, ARC_CURB)))
            h = h + sweep
        pos = seg[-1]
    pts, _ = chain(start, heading, pieces)
    return scenario(sid, lanes, pts, actors=actors, **kw)


def town_a():
    """Grid showcase: 12 lane segments, 4 actors, L-shaped mission."""
    r = 20.0
    corner_pts, _ = chain((180.0, 0.0), 0.0, [("a", r, math.pi / 2)])

    lanes = [
        # mission route: east street (3 segments), corner arc, north street (3)
        lane([(-30.0, 0.0), (55.0, 0.0)]),
        lane([(55.0, 0.0), (140.0, 0.0)]),
        lane([(140.0, 0.0), (215.0, 0.0)]),
        lane(corner_pts, width=3.6, curb=ARC_CURB),
        lane([(200.0, -15.0), (200.0, 65.0)]),
        lane([(200.0, 65.0), (200.0, 150.0)]),
        lane([(200.0, 150.0), (200.0, 230.0)]),
        # other streets (not driven): westbound pair, southbound, two spurs
        lane([(220.0, 3.6), (95.0, 3.6)]),
        lane([(95.0, 3.6), (-30.0, 3.6)]),
        lane([(203.6, 230.0), (203.6, -15.0)]),
        lane([(0.0, 200.0), (120.0, 200.0)]),
        lane([(-20.0, 100.0), (60.0, 100.0)]),
    ]
    assert len(lanes) == 12, len(lanes)

    mission_pts, _ = chain((0.0, 0.0), 0.0, [("s", 180.0), ("a", r, math.pi / 2), ("s", 180.0)])
    actors = [
        # crosses the east street early; ego reaches x=100 around t = 14 s
        ped(100.0, 8.0, 100.0, -8.0, 0, 120),
        # westbound vehicle on the parallel lane
        {
            "kind": "vehicle",
            "pose": [220.0, 3.6, round(math.pi, 6)],
            "speed": 7.0,
            "radius": 1.1,
            "script": [[0, [220.0, 3.6, round(math.pi, 6)]], [540, [-32.0, 3.6, round(math.pi, 6)]]],
        },
        # parked wreck off the road surface
        {"kind": "static_obstacle", "pose": [150.0, -7.0, 0.0], "speed": 0.0, "radius": 1.0,
         "script": []},
        # pedestrian waiting on the far sidewalk
        {"kind": "pedestrian", "pose": [40.0, 7.0, 0.0], "speed": 0.0, "radius": 0.35,
         "script": []},
    ]
    return scenario("town-a", lanes, mission_pts, actors=actors)


def calibration_set():
    out = []
    out.append(track_scenario("calib-01", [("s", 150.0)]))
    out.append(
        track_scenario(
            "calib-02",
            [("s", 200.0)],
            actors=[
                {"kind": "static_obstacle", "pose": [60.0, 5.5, 0.0], "speed": 0.0,
                 "radius": 0.8, "script": []},
                {"kind": "static_obstacle", "pose": [140.0, -5.5, 0.0], "speed": 0.0,
                 "radius": 0.8, "script": []},
            ],
        )
    )
    out.append(track_scenario("calib-03", [("s", 50.0), ("a", 30.0, -math.pi / 2), ("s", 50.0)]))
    out.append(track_scenario("calib-04", [("s", 50.0), ("a", 30.0, math.pi / 2), ("s", 50.0)]))
    out.append(
        track_scenario(
            "calib-05",
            [("s", 40.0), ("a", 35.0, math.pi / 4), ("a", 35.0, -math.pi / 4), ("s", 40.0)],
        )
    )
    out.append(track_scenario("calib-06", [("a", 60.0, 2 * math.pi / 3)]))
    out.append(
        track_scenario(
            "calib-07",
            [("s", 160.0)],
            actors=[ped(80.0, 8.0, 80.0, -8.0, 0, 110)],
        )
    )
    out.append(
        track_scenario(
            "calib-08",
            [("s", 180.0)],
            actors=[
                {
                    "kind": "vehicle",
                    "pose": [180.0, 3.6, round(math.pi, 6)],
                    "speed": 7.0,
                    "radius": 1.1,
                    "script": [[0, [180.0, 3.6, round(math.pi, 6)]],
                               [450, [-30.0, 3.6, round(math.pi, 6)]]],
                }
            ],
        )
    )
    out.append(track_scenario("calib-09", [("s", 30.0), ("a", 25.0, math.pi), ("s", 30.0)]))
    out.append(
        track_scenario(
            "calib-10",
            [("s", 30.0), ("a", 40.0, math.pi / 6), ("a", 40.0, -math.pi / 6),
             ("a", 40.0, -math.pi / 6), ("a", 40.0, math.pi / 6), ("s", 30.0)],
        )
    )
    out.append(track_scenario("calib-11", [("s", 120.0)], width=3.2, curb=2.4))
    out.append(track_scenario("calib-12", [("s", 40.0), ("a", 22.0, -math.pi / 2), ("s", 40.0)]))
    out.append(track_scenario("calib-13", [("s", 40.0), ("a", 22.0, math.pi / 2), ("s", 40.0)]))
    out.append(
        track_scenario(
            "calib-14",
            [("s", 35.0), ("a", 28.0, math.pi / 3), ("a", 28.0, -math.pi / 3), ("s", 35.0)],
        )
    )
    out.append(track_scenario("calib-15", [("a", 45.0, -math.pi / 2)]))
    out.append(track_scenario("calib-16", [("s", 250.0)]))
    out.append(
        track_scenario(
            "calib-17",
            [("s", 140.0)],
            actors=[
                {
                    "kind": "pedestrian",
                    "pose": [20.0, 5.5, 0.0],
                    "speed": 1.3,
                    "radius": 0.35,
                    "script": [[0, [20.0, 5.5, 0.0]], [600, [72.0, 5.5, 0.0]]],
                }
            ],
        )
    )
    out.append(
        track_scenario(
            "calib-18",
            [("s", 40.0), ("a", 50.0, math.pi / 3), ("s", 40.0)],
            actors=[
                {"kind": "static_obstacle", "pose": [30.0, -6.0, 0.0], "speed": 0.0,
                 "radius": 1.0, "script": []},
            ],
        )
    )
    out.append(
        track_scenario(
            "calib-19",
            [("s", 30.0), ("a", 32.0, -math.pi / 4), ("a", 32.0, math.pi / 4), ("s", 30.0)],
            actors=[
                {"kind": "static_obstacle", "pose": [15.0, 6.0, 0.0], "speed": 0.0,
                 "radius": 0.8, "script": []},
            ],
        )
    )
    out.append(town_a())
    return out


def sweep_set():
    """Tracks for fault-parameter sweeps: a long runway into curves of
    escalating tightness, so the distance survived (and with it the pooled
    violation rate) degrades smoothly as faults grow. No actors: violations
    are pure lane/curb excursions."""
    out = []
    out.append(
        track_scenario(
            "sweep-a",
            [("s", 60.0), ("a", 80.0, math.pi / 6), ("s", 40.0), ("a", 45.0, -math.pi / 4),
             ("s", 40.0), ("a", 60.0, math.pi / 7), ("s", 50.0)],
            width=4.0, curb=3.0,
        )
    )
    out.append(
        track_scenario(
            "sweep-b",
            [("s", 80.0), ("a", 90.0, math.pi / 7), ("s", 50.0), ("a", 55.0, -math.pi / 5),
             ("s", 50.0), ("a", 40.0, math.pi / 5), ("s", 40.0)],
            width=4.0, curb=3.0,
        )
    )
    out.append(
        track_scenario(
            "sweep-c",
            [("s", 70.0), ("a", 85.0, -math.pi / 6), ("s", 45.0), ("a", 50.0, math.pi / 4),
             ("s", 45.0), ("a", 45.0, -math.pi / 6), ("s", 45.0)],
            width=4.0, curb=3.0,
        )
    )
    return out


def noise_set():
    """Sweep tracks with wide paved shoulders (curb far beyond the lane):
    a disoriented agent can wander across the lane line without facing a
    road edge, so sensor-noise faults show up as lane violations instead of
    a dead stop."""
    out = []
    for doc in sweep_set():
        doc["id"] = doc["id"].replace("sweep", "noise")
        for ln in doc["lanes"]:
            ln["curb_offset"] = 6.0
        out.append(doc)
    return out


def main():
    calib_dir = ROOT / "scenarios" / "calibration"
    sweep_dir = ROOT / "scenarios" / "sweep"
    calib_dir.mkdir(parents=True, exist_ok=True)
    sweep_dir.mkdir(parents=True, exist_ok=True)
    for doc in calibration_set():
        path = calib_dir / f"{doc['id']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        print("wrote", path)
    for doc in sweep_set() + noise_set():
        path = sweep_dir / f"{doc['id']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        print("wrote", path)


if __name__ == "__main__":
    main()
