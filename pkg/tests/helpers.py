"""Independent oracles used across the test suite.

These deliberately avoid the library's own algorithms: the isotonic oracle
enumerates every contiguous block partition, the premium oracle applies the
payout clamp elementwise. Slow but unarguable.
"""

import itertools

import numpy as np


def pool_ties(x, y, w):
    """Collapse duplicate x values to (weighted mean y, summed weight)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]
    ux = []
    uy = []
    uw = []
    i = 0
    while i < xs.size:
        j = i
        while j < xs.size and xs[j] == xs[i]:
            j += 1
        wt = ws[i:j].sum()
        ux.append(xs[i])
        uy.append(float(np.dot(ws[i:j], ys[i:j]) / wt))
        uw.append(float(wt))
        i = j
    return np.array(ux), np.array(uy), np.array(uw), order


def isotonic_exhaustive(x, y, w=None):
    """Weighted isotonic regression by brute force over block partitions.

    Feasible candidates are contiguous partitions of the (tie-pooled) points
    whose weighted block means are nondecreasing; the optimum over all
    2**(n-1) of them is the exact solution. Returns fitted values in the
    original input order. Only usable for small n.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if w is None:
        w = np.ones_like(x)
    ux, uy, uw, order = pool_ties(x, y, w)
    n = ux.size
    assert n <= 12, "exhaustive oracle is exponential in the number of points"

    best_obj = None
    best_vals = None
    for cuts in itertools.product([0, 1], repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        means = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            means.append(float(np.dot(uw[lo:hi], uy[lo:hi]) / uw[lo:hi].sum()))
        if any(means[k] > means[k + 1] for k in range(len(means) - 1)):
            continue
        vals = np.empty(n)
        for m, lo, hi in zip(means, bounds[:-1], bounds[1:]):
            vals[lo:hi] = m
        obj = float(np.dot(uw, (uy - vals) ** 2))
        if best_obj is None or obj < best_obj:
            best_obj = obj
            best_vals = vals

    # Expand block values back to the original (pre-pooling) positions.
    xs = x[order]
    counts = np.array([(xs == v).sum() for v in ux])
    fitted_sorted = np.repeat(best_vals, counts)
    fitted = np.empty_like(fitted_sorted)
    fitted[order] = fitted_sorted
    return fitted


def ess_direct(weights):
    """Effective sample size by the defining formula, no shortcuts."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return 1.0 / float(np.sum(w * w))


def audit_threshold_choice(distances, ratios, eps_prev, n_particles):
    """Recompute the threshold selection by brute force.

    For each candidate (every distinct distance plus the previous threshold)
    keep the particles strictly below it, weight them by their ratios, and
    measure the effective sample size. Returns (best_epsilon, table) where
    the winner is the candidate closest to n_particles / 2, ties resolved
    to the larger threshold. Independent of the library's prefix-sum
    implementation.
    """
    d = np.asarray(distances, dtype=float)
    r = np.asarray(ratios, dtype=float)
    target = n_particles / 2.0
    candidates = sorted(set(d.tolist()) | {float(eps_prev)})
    table = []
    for c in candidates:
        kept = r[d < c]
        val = ess_direct(kept) if kept.sum() > 0 else 0.0
        table.append((c, val))
    best_eps, _ = min(table, key=lambda t: (abs(t[1] - target), -t[0]))
    return best_eps, table


def audit_run_thresholds(generations, n_particles):
    """Check every generation of a serialized run against the ESS rule.

    ``generations`` holds dicts with keys epsilon, distances, ratios (the
    artifact layout, after special-float decoding). Returns the list of
    (generation_index, recorded, expected) mismatches; empty means the
    whole trace obeys the rule.
    """
    mismatches = []
    eps_prev = np.inf
    for idx, gen in enumerate(generations):
        expected, _ = audit_threshold_choice(
            gen["distances"], gen["ratios"], eps_prev, n_particles
        )
        recorded = gen["epsilon"]
        if not (recorded == expected or abs(recorded - expected) <= 1e-12):
            mismatches.append((idx, recorded, expected))
        eps_prev = recorded
    return mismatches
