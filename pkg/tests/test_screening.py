"""Pairwise screen: matrix construction, ranking, S_k, Var(S_k)."""

import json

import numpy as np
import pytest

import codasep as cs
from codasep.errors import ValidationError
from codasep.screening import PairFailure

from helpers import brute_force_auc, composition_from_values, simulated_dataset


def _matrix_from(values, variances=None, ids=None):
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    values = values.copy()
    np.fill_diagonal(values, np.nan)
    if variances is None:
        variances = np.full((m, m), 1e-3)
        np.fill_diagonal(variances, np.nan)
    ids = ids or tuple(f"F{j:03d}" for j in range(m))
    return cs.AucMatrix(
        values=values,
        variances=np.asarray(variances, dtype=float),
        method=cs.VarianceMethod.HANLEY,
        feature_ids=ids,
    )


def _sym(m, entries):
    a = np.zeros((m, m))
    for (i, j), v in entries.items():
        a[i, j] = a[j, i] = v
    return a


def test_rank_features_hand_example():
    # A12=0.9, A13=0.8, A23=0.6 -> scores (1.7, 1.5, 1.4)
    matrix = _matrix_from(_sym(3, {(0, 1): 0.9, (0, 2): 0.8, (1, 2): 0.6}))
    ranking, scores = cs.rank_features(matrix)
    np.testing.assert_allclose(scores, [1.7, 1.5, 1.4])
    assert ranking == ["F000", "F001", "F002"]


def test_rank_features_tie_break_is_id_order():
    matrix = _matrix_from(np.full((4, 4), 0.7))
    ranking, _ = cs.rank_features(matrix)
    assert ranking == ["F000", "F001", "F002", "F003"]


def test_separability_curve_hand_values():
    matrix = _matrix_from(_sym(3, {(0, 1): 0.9, (0, 2): 0.8, (1, 2): 0.7}))
    ranking, _ = cs.rank_features(matrix)
    curve = cs.separability_curve(matrix, ranking)
    # S_2 is the AUC of the top pair; S_3 the mean of all three
    np.testing.assert_allclose(curve, [0.9, (0.9 + 0.8 + 0.7) / 3.0])
    np.testing.assert_allclose(curve[1], 0.8)


def test_separability_curve_matches_direct_recomputation():
    rng = np.random.default_rng(3)
    m = 9
    raw = rng.uniform(0.4, 1.0, size=(m, m))
    values = (raw + raw.T) / 2
    matrix = _matrix_from(values)
    ranking, _ = cs.rank_features(matrix)
    curve = cs.separability_curve(matrix, ranking)
    order = [matrix.feature_ids.index(f) for f in ranking]
    for k in range(2, m + 1):
        top = order[:k]
        direct = np.mean([values[a, b] for i, a in enumerate(top) for b in top[i + 1:]])
        np.testing.assert_allclose(curve[k - 2], direct, atol=1e-12)


def test_select_k_boundaries():
    assert cs.select_k(np.array([0.9, 0.8, 0.7])) == 2  # monotone decreasing
    assert cs.select_k(np.array([0.5, 0.8, 0.8])) == 3  # smallest maximizer on exact tie
    with pytest.raises(ValidationError):
        cs.select_k(np.array([]))


def test_var_s_k_hand_values():
    v = 2.5e-3
    variances = np.full((3, 3), v)
    matrix = _matrix_from(_sym(3, {(0, 1): 0.9, (0, 2): 0.8, (1, 2): 0.7}), variances)
    ranking, _ = cs.rank_features(matrix)
    # k=2: single pair, no covariance terms
    assert cs.var_s_k(matrix, ranking, 2, 0.9) == v
    # k=3, rho=0: (4/36)(3v) = v/3
    np.testing.assert_allclose(cs.var_s_k(matrix, ranking, 3, 0.0), v / 3.0, atol=1e-18)
    # k=3, rho=0.2: all three pairs share a feature -> v(1 + 0.4)/3
    np.testing.assert_allclose(
        cs.var_s_k(matrix, ranking, 3, 0.2), v * 1.4 / 3.0, atol=1e-18
    )


def test_var_s_k_counts_shared_pairs_against_enumeration():
    rng = np.random.default_rng(5)
    m, k, rho = 7, 5, 0.3
    values = rng.uniform(0.5, 1.0, size=(m, m))
    variances = rng.uniform(1e-4, 5e-3, size=(m, m))
    variances = (variances + variances.T) / 2
    matrix = _matrix_from((values + values.T) / 2, variances)
    ranking, _ = cs.rank_features(matrix)
    order = [matrix.feature_ids.index(f) for f in ranking][:k]
    pairs = [(order[i], order[j]) for i in range(k) for j in range(i + 1, k)]
    sum_var = sum(variances[a, b] for a, b in pairs)
    sum_cov = 0.0
    for i, p in enumerate(pairs):
        for q in pairs[i + 1:]:
            if set(p) & set(q):
                sum_cov += rho * np.sqrt(variances[p[0], p[1]] * variances[q[0], q[1]])
    expected = 4.0 / (k * (k - 1)) ** 2 * (sum_var + 2.0 * sum_cov)
    np.testing.assert_allclose(cs.var_s_k(matrix, ranking, k, rho), expected, rtol=1e-12)


def _perfect_feature_dataset(n_per_class=20, m=5, seed=0):
    """Feature 0 separates the classes by orders of magnitude; the rest
    are exchangeable noise."""
    rng = np.random.default_rng(seed)
    n = 2 * n_per_class
    values = rng.uniform(0.5, 2.0, size=(n, m))
    values[:n_per_class, 0] = rng.uniform(1e-4, 2e-4, size=n_per_class)
    values[n_per_class:, 0] = rng.uniform(5e3, 1e4, size=n_per_class)
    comp = composition_from_values(values)
    y = np.repeat([1, 2], n_per_class)
    labels = cs.Labels(y=y, n_classes=2, class_names=("a", "b"))
    return cs.Dataset(
        composition=comp, labels=labels, covariates=cs.CovariateMatrix.empty(n)
    )


def test_perfect_feature_dominates_and_matches_rank_oracle():
    ds = _perfect_feature_dataset()
    cfg = cs.ScreeningConfig()
    matrix = cs.compute_auc_matrix(ds, cfg)
    m = matrix.n_features
    # rows of the separating feature hit AUC 1.0
    np.testing.assert_array_equal(matrix.values[0, 1:], np.ones(m - 1))
    # model AUC equals the raw log-ratio rank AUC (up to direction) per pair
    logx = np.log(ds.composition.values)
    pos = ds.labels.y == 1
    for j in range(m):
        u = brute_force_auc(logx[:, 0] - logx[:, j], pos) if j else None
        if j:
            assert abs(matrix.values[0, j] - max(u, 1.0 - u)) <= 1e-9
    ranking, scores = cs.rank_features(matrix)
    assert ranking[0] == "F000"
    # noise pairs hover near chance
    noise = matrix.values[1:, 1:]
    off_diag = noise[~np.isnan(noise)]
    assert np.all(np.abs(off_diag - 0.5) < 0.3)


def test_matrix_symmetry_and_diagonal():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(25, 25), m=8, signal_features=(0,), effect_size=1.0, seed=2)
    )
    matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
    assert np.all(np.isnan(np.diag(matrix.values)))
    off = ~np.eye(8, dtype=bool)
    np.testing.assert_array_equal(matrix.values[off], matrix.values.T[off])
    assert np.nanmax(matrix.values) <= 1.0 and np.nanmin(matrix.values) >= 0.0
    # pair count is forced: C(8,2) entries filled
    assert np.isfinite(matrix.values[off]).sum() == 8 * 7


def test_swapping_pair_features_leaves_matrix_unchanged():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(20, 20), m=5, signal_features=(0,), effect_size=1.2, seed=4)
    )
    matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
    # swap two feature columns and re-screen: same AUCs under the relabeling
    comp = ds.composition
    perm = [1, 0, 2, 3, 4]
    swapped = cs.Composition(
        values=comp.values[:, perm],
        sample_ids=comp.sample_ids,
        feature_ids=tuple(comp.feature_ids[p] for p in perm),
        row_totals=comp.row_totals,
    )
    ds2 = cs.Dataset(composition=swapped, labels=ds.labels, covariates=ds.covariates)
    matrix2 = cs.compute_auc_matrix(ds2, cs.ScreeningConfig())
    np.testing.assert_allclose(
        matrix.values[np.ix_(perm, perm)][~np.eye(5, dtype=bool)],
        matrix2.values[~np.eye(5, dtype=bool)],
        atol=1e-12,
    )


def test_worker_counts_give_bit_identical_reports():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(30, 30), m=10, signal_features=(0, 1), effect_size=1.0, seed=6)
    )
    reports = {}
    for workers in (1, 8):
        cfg = cs.ScreeningConfig(workers=workers)
        report = cs.build_report(cs.compute_auc_matrix(ds, cfg), cfg)
        payload = report.to_dict()
        payload["config"].pop("workers")
        reports[workers] = json.dumps(payload, sort_keys=True)
    assert reports[1] == reports[8]


def test_failed_pair_is_neutralized_and_logged(monkeypatch):
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(15, 15), m=4, signal_features=(), seed=8)
    )
    import codasep.screening as screening_mod

    real = screening_mod._fit_arrays
    calls = {"n": 0}

    def flaky(z, cov, y_idx, n_classes, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:  # second pair blows up
            raise np.linalg.LinAlgError("synthetic failure")
        return real(z, cov, y_idx, n_classes, **kwargs)

    monkeypatch.setattr(screening_mod, "_fit_arrays", flaky)
    matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
    assert len(matrix.failures) == 1
    failure = matrix.failures[0]
    assert isinstance(failure, PairFailure)
    # second pair in (0,1),(0,2),... order is (F1, F3) under simulate's ids
    assert failure.feature_j == "F1" and failure.feature_j_prime == "F3"
    assert matrix.values[0, 2] == 0.5
    counts = ds.labels.class_counts
    assert matrix.variances[0, 2] == cs.var_hanley(0.5, int(counts[0]), int(counts[1]))


def test_noise_feature_does_not_shuffle_top_ranks():
    hits = 0
    for seed in range(100):
        ds, truth = simulated_dataset(
            cs.SimSpec(
                n_per_class=(60, 60), m=11, signal_features=(0, 1, 2),
                effect_size=1.8, seed=seed,
            )
        )
        matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
        ranking, _ = cs.rank_features(matrix)
        if set(ranking[:3]) == set(truth):
            hits += 1
    assert hits >= 90  # >= 90% of replicates keep the planted features on top


def test_build_report_fields_and_ci():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(30, 30), m=6, signal_features=(0, 1), effect_size=1.5, seed=10)
    )
    cfg = cs.ScreeningConfig(rho_otu=0.2)
    report = cs.build_report(cs.compute_auc_matrix(ds, cfg), cfg)
    assert sorted(report.ranking) == sorted(report.feature_ids)
    assert report.k_star >= 2
    assert report.s_at_k_star == report.s_curve[report.k_star - 2]
    assert report.s_curve.max() == report.s_at_k_star
    lo, hi = report.ci_95
    assert 0.0 <= lo <= report.s_at_k_star <= hi <= 1.0
    half = 1.96 * np.sqrt(report.var_s)
    np.testing.assert_allclose(hi, min(1.0, report.s_at_k_star + half), atol=1e-15)
    np.testing.assert_allclose(lo, max(0.0, report.s_at_k_star - half), atol=1e-15)
    payload = report.to_dict()
    assert set(payload) >= {
        "ranking", "column_scores", "s_curve", "k_star", "s", "var_s",
        "ci_95", "config", "failures",
    }


def test_delong_variance_method_in_screen():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(25, 25), m=5, signal_features=(0,), effect_size=1.0, seed=12)
    )
    cfg = cs.ScreeningConfig(variance_method=cs.VarianceMethod.DELONG)
    matrix = cs.compute_auc_matrix(ds, cfg)
    assert matrix.method == cs.VarianceMethod.DELONG
    # spot check one pair against the standalone estimator
    from codasep.glm import _fit_arrays

    logx = np.log(ds.composition.values)
    z = logx[:, 0] - logx[:, 1]
    fit = _fit_arrays(z, np.zeros((50, 0)), ds.labels.y - 1, 2)
    expected = cs.var_delong(fit.fitted_probs[:, 0], ds.labels.y == 1)
    assert matrix.variances[0, 1] == expected


def test_multiclass_screen_uses_propagated_variance():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(20, 20, 20), m=5, signal_features=(0, 1), effect_size=2.0, seed=14)
    )
    cfg = cs.ScreeningConfig(variance_method=cs.VarianceMethod.HANLEY)
    matrix = cs.compute_auc_matrix(ds, cfg)
    assert matrix.method == cs.VarianceMethod.HANDTILL_PROPAGATED
    off = ~np.eye(5, dtype=bool)
    assert np.all(matrix.variances[off] > 0)


def test_hanley_variances_fill_the_matrix_elementwise():
    ds, _ = simulated_dataset(
        cs.SimSpec(n_per_class=(20, 20), m=4, signal_features=(0,), effect_size=1.0, seed=16)
    )
    matrix = cs.compute_auc_matrix(ds, cs.ScreeningConfig())
    counts = ds.labels.class_counts
    for a in range(4):
        for b in range(a + 1, 4):
            expected = cs.var_hanley(matrix.values[a, b], int(counts[0]), int(counts[1]))
            assert matrix.variances[a, b] == expected


def test_zero_variance_collapses_ci_to_a_point():
    values = _sym(3, {(0, 1): 0.9, (0, 2): 0.8, (1, 2): 0.7})
    variances = np.zeros((3, 3))
    matrix = _matrix_from(values, variances)
    cfg = cs.ScreeningConfig()
    report = cs.build_report(matrix, cfg)
    assert report.var_s == 0.0
    assert report.ci_95 == (report.s_at_k_star, report.s_at_k_star)


def test_screening_config_validation():
    with pytest.raises(ValidationError):
        cs.ScreeningConfig(rho_otu=1.5)
    with pytest.raises(ValidationError):
        cs.ScreeningConfig(workers=0)
