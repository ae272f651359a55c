"""Statistics helpers for campaign reports: fractional ranking, the
Mann-Whitney U test (normal approximation with tie correction), and plain
histogram/percentile wrappers."""

from __future__ import annotations

import math

import numpy as np


def rank_data(values) -> list[float]:
    """Fractional ranks (ties get the mean of their rank span), 1-based."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def mann_whitney_u(x, y) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test via the normal approximation with tie
    correction. Returns (U statistic for x, p-value). Fully tied samples
    have no evidence either way and report p = 1.0."""
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("mann_whitney_u needs nonempty samples")
    combined = list(x) + list(y)
    ranks = rank_data(combined)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2.0  # pairs where x beats y, ties half

    n = n1 + n2
    tie_term = 0.0
    seen = {}
    for v in combined:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0.0:
        return u1, 1.0
    z = (max(u1, n1 * n2 - u1) - n1 * n2 / 2.0 - 0.5) / math.sqrt(variance)
    p = 2.0 * (1.0 - _norm_cdf(z))
    return u1, min(max(p, 0.0), 1.0)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def summarize(samples) -> dict:
    """Mean/stddev/percentile summary of a sample list (population stddev).
    Empty input yields an all-None summary with count 0."""
    if not samples:
        return {
            "count": 0, "mean": None, "stddev": None,
            "p5": None, "p50": None, "p95": None,
        }
    arr = np.asarray(samples, dtype=float)
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "stddev": float(arr.std()),
        "p5": float(np.percentile(arr, 5)),
        "p50": float(np.percentile(arr, 50)),
        "p95": float(np.percentile(arr, 95)),
    }


def histogram(samples, bins: int = 20) -> dict:
    """Fixed-count histogram over [0, max]; degenerate ranges widen to 1."""
    if not samples:
        return {"bin_edges": [], "counts": []}
    arr = np.asarray(samples, dtype=float)
    hi = float(arr.max())
    if hi <= 0.0:
        hi = 1.0
    counts, edges = np.histogram(arr, bins=bins, range=(0.0, hi))
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}
