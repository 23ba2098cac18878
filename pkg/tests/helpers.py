"""Shared test oracles and dataset builders.

The oracles here are deliberately independent of the library code paths
they check: AUC by explicit O(n^2) pair counting, DeLong by double-loop
placements, S_k by recomputing the mean over pair subsets.
"""

from __future__ import annotations

import numpy as np

import codasep as cs


def brute_force_auc(scores, pos) -> float:
    """Pair counting with half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(pos, dtype=bool)
    spos = scores[pos]
    sneg = scores[~pos]
    credit = (spos[:, None] > sneg[None, :]).sum() + 0.5 * (spos[:, None] == sneg[None, :]).sum()
    return float(credit / (len(spos) * len(sneg)))


def brute_force_delong(scores, pos) -> tuple[float, float]:
    """Placement components by double loop, then the two-term variance."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(pos, dtype=bool)
    spos = scores[pos]
    sneg = scores[~pos]
    n1, n0 = len(spos), len(sneg)
    v = np.array([((s > sneg).sum() + 0.5 * (s == sneg).sum()) / n0 for s in spos])
    w = np.array([((spos > s).sum() + 0.5 * (spos == s).sum()) / n1 for s in sneg])
    auc = v.mean()
    var = ((v - auc) ** 2).sum() / (n1 * (n1 - 1)) + ((w - auc) ** 2).sum() / (n0 * (n0 - 1))
    return float(auc), float(var)


def random_scores(rng, n_max=200, with_ties=True):
    """A random binary scoring instance, optionally with heavy ties."""
    n1 = int(rng.integers(1, n_max // 2))
    n0 = int(rng.integers(1, n_max - n1))
    n = n1 + n0
    scores = rng.normal(size=n)
    if with_ties and rng.random() < 0.5:
        scores = np.round(scores * 2.0) / 2.0
    pos = np.zeros(n, dtype=bool)
    pos[rng.permutation(n)[:n1]] = True
    return scores, pos


def make_count_table(counts) -> cs.CountTable:
    counts = np.asarray(counts)
    n, m = counts.shape
    return cs.CountTable(
        counts=counts,
        sample_ids=tuple(f"S{i:03d}" for i in range(n)),
        feature_ids=tuple(f"F{j:03d}" for j in range(m)),
    )


def composition_from_values(values) -> cs.Composition:
    values = np.asarray(values, dtype=float)
    n, m = values.shape
    return cs.Composition(
        values=values,
        sample_ids=tuple(f"S{i:03d}" for i in range(n)),
        feature_ids=tuple(f"F{j:03d}" for j in range(m)),
        row_totals=values.sum(axis=1),
    )


def simulated_dataset(spec: cs.SimSpec):
    """Full pipeline from a SimSpec: filter, impute, assemble Dataset."""
    table, labels, covariates, truth = cs.simulate(spec)
    filtered, _ = cs.filter_rare(table)
    composition = cs.impute_zeros(filtered)
    ds = cs.Dataset(composition=composition, labels=labels, covariates=covariates)
    return ds, truth


def planted_pair_dataset(n, m, seed, slope=2.0, planted=(0, 1), depth=20_000):
    """Binary dataset where only log(X_a / X_b) of the planted pair
    predicts the label."""
    rng = np.random.default_rng(seed)
    log_abundance = rng.normal(0.0, 1.0, (n, m))
    eta = slope * (log_abundance[:, planted[0]] - log_abundance[:, planted[1]])
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
    if y.sum() < 2 or y.sum() > n - 2:
        y[:2] = [0, 1]
    proportions = np.exp(log_abundance)
    proportions /= proportions.sum(axis=1, keepdims=True)
    counts = np.vstack([rng.multinomial(depth, proportions[i]) for i in range(n)])
    table = make_count_table(counts)
    labels = cs.Labels.from_strings(list(np.where(y == 1, "a", "b")))
    composition = cs.impute_zeros(table)
    return cs.Dataset(
        composition=composition,
        labels=labels,
        covariates=cs.CovariateMatrix.empty(n),
    )
