"""Acceptance criteria, one test per criterion with a printed verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion. The colorectal-dataset reproduction is conditional
on local data availability (see ``CODASEP_BAXTER_COUNTS``); offline it
is replaced by the fully seeded property suite in the other criteria.
"""

import os

import numpy as np
import pytest

import codasep as cs
from codasep.enet import kkt_violations
from codasep.glm import _fit_arrays
from codasep.preprocess import logratio_design

from helpers import (
    brute_force_auc,
    planted_pair_dataset,
    random_scores,
    simulated_dataset,
)


def _verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def test_auc_oracle_equivalence():
    """Fast binary AUC equals O(n^2) brute-force pair counting exactly."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        scores, pos = random_scores(rng, n_max=200, with_ties=True)
        worst = max(worst, abs(cs.binary_auc(scores, pos) - brute_force_auc(scores, pos)))
    _verdict("AUC oracle equivalence (1000 instances, n<=200)", worst <= 1e-12,
             f"max |diff| = {worst:.2e}")


def test_variance_hand_values():
    """Hanley and DeLong closed-form examples to 1e-12."""
    err_h = abs(cs.var_hanley(0.5, 10, 10) - 0.0175)
    err_d = abs(
        cs.var_delong(np.array([1.0, 3.0, 2.0, 4.0]), np.array([1, 1, 0, 0], bool)) - 0.125
    )
    _verdict("variance hand values (Hanley 0.0175, DeLong 0.125)",
             err_h <= 1e-12 and err_d <= 1e-12,
             f"hanley err {err_h:.2e}, delong err {err_d:.2e}")


def test_rank_invariance_of_model_scores():
    """Model-based AUC equals max(u, 1-u) of the raw log-ratio (C=2, p=0)."""
    worst = 0.0
    for seed in range(200):
        rng = np.random.default_rng([101, seed])
        n1 = n0 = 50
        shifts = np.concatenate([np.zeros(5), 1.5 + 0.3 * np.arange(5)])
        log_abundance = rng.normal(0, 1, (100, 10))
        log_abundance[n1:, :] += shifts
        y_idx = np.repeat(np.array([0, 1], dtype=np.int64), (n1, n0))
        a = int(rng.integers(0, 5))
        b = 5 + int(rng.integers(0, 5))
        z = log_abundance[:, a] - log_abundance[:, b]
        fit = _fit_arrays(z, np.zeros((100, 0)), y_idx, 2)
        model_auc = cs.binary_auc(fit.fitted_probs[:, 0], y_idx == 0)
        u = cs.binary_auc(z, y_idx == 0)
        worst = max(worst, abs(model_auc - max(u, 1.0 - u)))
    _verdict("rank invariance on 200 seeded datasets (n=100, m=10)",
             worst <= 1e-9, f"max |diff| = {worst:.2e}")


def test_symmetry_and_determinism():
    """Matrix symmetric to 1e-12; reports and bootstraps bit-identical
    across worker counts."""
    import json

    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(40, 40), m=10, signal_features=(0, 1),
                   effect_size=1.2, seed=77)
    )
    matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
    off = ~np.eye(10, dtype=bool)
    sym_err = np.abs(matrix.values - matrix.values.T)[off].max()

    payloads = {}
    for workers in (1, 8):
        cfg = cs.ScreeningConfig(workers=workers)
        payload = cs.build_report(cs.compute_auc_matrix(ds, cfg), cfg).to_dict()
        payload["config"].pop("workers")
        payloads[workers] = json.dumps(payload, sort_keys=True)
    screen_identical = payloads[1] == payloads[8]

    boots = [
        cs.bootstrap_s(ds, cs.ScreeningConfig(),
                       cs.BootstrapConfig(replicates=16, seed=5, workers=w))
        for w in (1, 8)
    ]
    boot_identical = np.array_equal(boots[0].s_replicates, boots[1].s_replicates)
    _verdict("symmetry and worker determinism",
             sym_err <= 1e-12 and screen_identical and boot_identical,
             f"sym err {sym_err:.1e}, screen identical {screen_identical}, "
             f"bootstrap identical {boot_identical}")


def test_planted_signal_recovery():
    """3 signals among m=30, effect 1.5: top-3 recovered in >=95/100 seeds,
    k* in {2,3,4} in >=80/100 seeds."""
    top3_hits = 0
    k_hits = 0
    for seed in range(100):
        ds, truth = simulated_dataset(
            cs.SimSpec(n_per_class=(100, 100), m=30, signal_features=(0, 1, 2),
                       effect_size=1.5, zero_rate=0.05, seed=seed)
        )
        matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
        ranking, _ = cs.rank_features(matrix)
        if set(truth) <= set(ranking[:3]):
            top3_hits += 1
        k_star = cs.select_k(cs.separability_curve(matrix, ranking))
        if k_star in (2, 3, 4):
            k_hits += 1
    _verdict("planted-signal recovery (100 seeds)",
             top3_hits >= 95 and k_hits >= 80,
             f"top-3 {top3_hits}/100, k* in {{2,3,4}} {k_hits}/100")


def test_multiclass_reduction():
    """Hand-Till equals binary AUC exactly at C=2; a perfectly separating
    feature gives components and generalized AUC exactly 1.0 at C=3."""
    rng = np.random.default_rng(303)
    exact = True
    for _ in range(100):
        n1 = int(rng.integers(2, 20))
        n0 = int(rng.integers(2, 20))
        y = np.repeat([1, 2], (n1, n0))
        raw = rng.random((n1 + n0, 2)) + 0.05
        probs = raw / raw.sum(axis=1, keepdims=True)
        labels = cs.Labels(y=y, n_classes=2, class_names=("a", "b"))
        if cs.hand_till_auc(probs, labels) != cs.binary_auc(probs[:, 0], y == 1):
            exact = False
            break

    y3 = np.repeat([1, 2, 3], 10)
    labels3 = cs.Labels(y=y3, n_classes=3, class_names=("a", "b", "c"))
    z = np.concatenate([
        rng.uniform(-1.1, -0.9, 10), rng.uniform(-0.1, 0.1, 10), rng.uniform(0.9, 1.1, 10)
    ])
    fit = _fit_arrays(z, np.zeros((30, 0)), y3 - 1, 3)
    components = cs.hand_till_components(fit.fitted_probs, labels3)
    perfect = all(v == 1.0 for v in components.values())
    ht = cs.hand_till_auc(fit.fitted_probs, labels3)
    _verdict("multiclass reduction and perfect separation",
             exact and perfect and ht == 1.0,
             f"C=2 exact {exact}, components {sorted(components.values())}, HT {ht}")


def test_elastic_net_properties():
    """lambda_max empty support with KKT; lambda=0 matches the unpenalized
    oracle to 1e-5; the planted pair enters the path first in >=45/50 seeds."""
    ds = planted_pair_dataset(n=50, m=5, seed=0)
    fits = cs.fit_enet_logistic(ds, cs.EnetConfig(alpha=0.5, n_lambda=10))
    empty_ok = fits[0].nonzero_pairs == ()
    kkt_ok = kkt_violations(ds, fits[0])["zero_violation"] <= 1e-10

    dev_err = 0.0
    for seed in range(3):
        ds0 = planted_pair_dataset(n=30, m=4, seed=seed, slope=1.0)
        cfg = cs.EnetConfig(alpha=0.5, lambda_path=(0.5, 0.05, 0.005, 0.0),
                            tol=1e-10, max_iter=500, max_sweeps=20000)
        path = cs.fit_enet_logistic(ds0, cfg)
        design = logratio_design(ds0.composition)
        oracle = _fit_arrays(design[:, 0], design[:, 1:], ds0.labels.y - 1, 2,
                             max_iter=200, tol=1e-12)
        dev_err = max(dev_err, abs(path[-1].deviance - (-2.0 * oracle.log_likelihood)))

    first_hits = 0
    for seed in range(50):
        dsp = planted_pair_dataset(n=60, m=6, seed=1000 + seed)
        path = cs.fit_enet_logistic(dsp, cs.EnetConfig(alpha=0.5, n_lambda=60))
        first = next((f for f in path if f.nonzero_pairs), None)
        if first is not None and (0, 1) in first.nonzero_pairs:
            first_hits += 1
    _verdict("elastic-net properties",
             empty_ok and kkt_ok and dev_err <= 1e-5 and first_hits >= 45,
             f"empty@lmax {empty_ok}, KKT {kkt_ok}, dev err {dev_err:.1e}, "
             f"planted-first {first_hits}/50")


def test_bootstrap_analytic_consistency():
    """Bootstrap Var(S) and analytic var_s_k (rho=0.2) within a factor of 5;
    stratified replicates preserve class counts exactly."""
    ratios = []
    for seed in (1, 42):
        ds, _ = simulated_dataset(
            cs.SimSpec(n_per_class=(100, 100), m=15, signal_features=(0, 1),
                       effect_size=2.0, zero_rate=0.05, seed=seed)
        )
        cfg = cs.ScreeningConfig(rho_otu=0.2)
        matrix = cs.compute_auc_matrix(ds, cfg)
        ranking, _ = cs.rank_features(matrix)
        k_star = cs.select_k(cs.separability_curve(matrix, ranking))
        analytic = cs.var_s_k(matrix, ranking, k_star, 0.2)
        boot = cs.bootstrap_s(
            ds, cfg,
            cs.BootstrapConfig(replicates=200, seed=7, workers=2, fixed_k=k_star),
        )
        ratios.append(boot.var_s / analytic)
    ratio_ok = all(0.2 <= r <= 5.0 for r in ratios)

    from codasep.bootstrap import _draw_indices

    y_idx = ds.labels.y - 1
    ctx = {"stratified": True,
           "class_indices": [np.flatnonzero(y_idx == c) for c in range(2)]}
    counts_ok = True
    for b in range(100):
        drawn = y_idx[_draw_indices(ctx, np.random.default_rng([9, b]))]
        if (drawn == 0).sum() != 100 or (drawn == 1).sum() != 100:
            counts_ok = False
            break
    _verdict("bootstrap/analytic consistency",
             ratio_ok and counts_ok,
             f"ratios {[f'{r:.2f}' for r in ratios]}, strat counts exact {counts_ok}")


TABLE1_MODEL_A = [
    "Otu000105", "Otu000310", "Otu000281", "Otu000264",
    "Otu000058", "Otu000113", "Otu000067",
]


@pytest.mark.skipif(
    "CODASEP_BAXTER_COUNTS" not in os.environ,
    reason="colorectal screening dataset not available offline; "
    "criterion replaced by the seeded property suite "
    "(set CODASEP_BAXTER_COUNTS / CODASEP_BAXTER_METADATA to enable)",
)
def test_baxter_reproduction_desk_scale():
    """Model A separation index 0.5816 (+-0.03), k*=7 (+-2), top-OTU overlap
    >=5/7, and the Table 2 ordering S_A < S_B < S_C <= S_D."""
    counts_path = os.environ["CODASEP_BAXTER_COUNTS"]
    metadata_path = os.environ["CODASEP_BAXTER_METADATA"]
    label_column = os.environ.get("CODASEP_BAXTER_LABEL", "dx")
    covariate_sets = {
        "A": [],
        "B": ["age"],
        "C": ["age", "gender"],
        "D": ["age", "gender", "diabetes_med"],
    }
    table = cs.read_count_table(counts_path)
    workers = int(os.environ.get("CODASEP_WORKERS", "6"))
    results = {}
    for model, covariate_columns in covariate_sets.items():
        labels, covariates = cs.read_metadata(
            metadata_path, label_column, covariate_columns, sample_ids=table.sample_ids
        )
        filtered, _ = cs.filter_rare(table)
        ds = cs.Dataset(
            composition=cs.impute_zeros(filtered), labels=labels, covariates=covariates
        )
        cfg = cs.ScreeningConfig(workers=workers)
        results[model] = cs.build_report(cs.compute_auc_matrix(ds, cfg), cfg)

    report_a = results["A"]
    overlap = len(set(report_a.ranking[:7]) & set(TABLE1_MODEL_A))
    index_ok = abs(report_a.s_at_k_star - 0.5816) <= 0.03
    k_ok = abs(report_a.k_star - 7) <= 2
    order_ok = (
        results["A"].s_at_k_star < results["B"].s_at_k_star
        < results["C"].s_at_k_star <= results["D"].s_at_k_star
    )
    _verdict(
        "colorectal dataset reproduction",
        index_ok and k_ok and overlap >= 5 and order_ok,
        f"S_A={report_a.s_at_k_star:.4f}, k*={report_a.k_star}, overlap {overlap}/7, "
        f"ordering {order_ok}",
    )
