#!/usr/bin/env python3
"""Builds the frozen reference fixture for the rank-statistics tests.

H and its p-value come from scipy.stats.kruskal; Dunn z statistics follow
the standard pooled-rank formulation with tie correction (computed here
with scipy's rankdata, independently of the C++ code under test); the
Benjamini-Hochberg adjustment comes from statsmodels. Run once and commit
stats_cases.json; the C++ suite must reproduce every number to 1e-6.
"""
import json
import math
import random

import numpy as np
from scipy import stats
from statsmodels.stats.multitest import multipletests


def dunn_z(groups):
    pooled = np.concatenate(groups)
    ranks = stats.rankdata(pooled)
    n = len(pooled)
    mean_ranks = []
    sizes = []
    off = 0
    for g in groups:
        mean_ranks.append(ranks[off:off + len(g)].mean())
        sizes.append(len(g))
        off += len(g)
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(sum(c ** 3 - c for c in counts))
    var_base = n * (n + 1) / 12.0 - tie_term / (12.0 * (n - 1))
    k = len(groups)
    z = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            se = math.sqrt(var_base * (1.0 / sizes[i] + 1.0 / sizes[j]))
            z[i][j] = (mean_ranks[i] - mean_ranks[j]) / se
    return z


def build_case(groups):
    h, p = stats.kruskal(*groups)
    z = dunn_z(groups)
    k = len(groups)
    raw = []
    for i in range(k):
        for j in range(i + 1, k):
            raw.append(min(1.0, 2.0 * stats.norm.sf(abs(z[i][j]))))
    adj = multipletests(raw, method="fdr_bh")[1] if raw else []
    adj_m = [[1.0] * k for _ in range(k)]
    idx = 0
    for i in range(k):
        for j in range(i + 1, k):
            adj_m[i][j] = adj_m[j][i] = float(adj[idx])
            idx += 1
    return {
        "groups": [list(map(float, g)) for g in groups],
        "h": float(h),
        "p": float(p),
        "z": [[float(v) for v in row] for row in z],
        "adj_p": adj_m,
    }


def main():
    rng = random.Random(20240817)
    cases = []
    # Hand-picked shapes: ties, unequal sizes, separated and identical
    # groups, 2..4 groups.
    cases.append(build_case([[1, 2, 3], [100, 101, 102]]))
    cases.append(build_case([[1, 2, 3, 4], [1, 2, 3, 4]]))
    cases.append(build_case([[1, 1, 2, 2], [2, 2, 3, 3], [3, 3, 4, 4]]))
    cases.append(build_case([[5, 5, 5, 6], [5, 6, 6, 6]]))
    cases.append(build_case([[0.1, 0.2], [0.15, 0.25, 0.35], [0.3, 0.4, 0.5, 0.6]]))
    while len(cases) < 20:
        k = rng.choice([2, 3, 4])
        groups = []
        for _ in range(k):
            size = rng.randint(3, 9)
            base = rng.uniform(-2, 2)
            quantize = rng.random() < 0.4  # force ties
            vals = []
            for _ in range(size):
                v = base + rng.gauss(0, 1)
                vals.append(round(v, 1) if quantize else v)
            groups.append(vals)
        try:
            cases.append(build_case(groups))
        except ValueError:
            continue  # all-identical draw; rejected upstream too
    with open("stats_cases.json", "w") as f:
        json.dump({"cases": cases}, f, indent=1)
    print(f"wrote {len(cases)} cases")


if __name__ == "__main__":
    main()
