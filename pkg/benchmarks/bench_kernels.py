#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the four hot kernels on workloads sized like a real screen
(hundreds of samples, tens of thousands of pair fits) plus one
end-to-end pairwise screen per backend. Run after installing:

    python benchmarks/bench_kernels.py [--full]

``--full`` adds a Baxter-scale throughput extrapolation (56,280 pair
fits) to the report.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import codasep as cs
from codasep import kernels
from codasep.enet import _column_stats, _pair_arrays
from codasep.screening import ScreeningConfig, _auc_matrix_arrays


def _time(fn, repeat: int) -> float:
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def bench_auc(n=500, repeat=2000):
    rng = np.random.default_rng(1)
    scores = np.ascontiguousarray(np.round(rng.normal(size=n), 2))
    pos = np.ascontiguousarray(rng.random(n) < 0.4, dtype=np.uint8)
    return {
        name: _time(lambda b=backend: b.mannwhitney_auc(scores, pos), repeat)
        for name, backend in _backends().items()
    }


def bench_delong(n=500, repeat=2000):
    rng = np.random.default_rng(2)
    scores = np.ascontiguousarray(rng.normal(size=n))
    pos = np.ascontiguousarray(rng.random(n) < 0.4, dtype=np.uint8)
    return {
        name: _time(lambda b=backend: b.delong_auc_variance(scores, pos), repeat)
        for name, backend in _backends().items()
    }


def bench_newton(n=490, p=3, repeat=500):
    rng = np.random.default_rng(3)
    x = np.column_stack([np.ones(n), rng.normal(size=(n, 1 + p))])
    x = np.ascontiguousarray(x)
    y = (rng.random(n) < 1 / (1 + np.exp(-x[:, 1]))).astype(np.int64)
    y[:2] = [0, 1]
    return {
        name: _time(
            lambda b=backend: b.multinomial_newton(x, y, 2, 100, 1e-8, 1e-6, 30.0, 1e-8),
            repeat,
        )
        for name, backend in _backends().items()
    }


def bench_enet_path(n=200, m=40, n_lambda=50):
    rng = np.random.default_rng(4)
    logx = np.ascontiguousarray(rng.normal(size=(n, m)))
    y = (rng.random(n) < 1 / (1 + np.exp(-2 * (logx[:, 0] - logx[:, 1])))).astype(float)
    y[:2] = [0.0, 1.0]
    pa, pb = _pair_arrays(m)
    mean, scale = _column_stats(logx, pa, pb)
    resid = y - y.mean()
    gmax = 0.0
    for j in range(pa.shape[0]):
        col = (logx[:, pa[j]] - logx[:, pb[j]] - mean[j]) / scale[j]
        gmax = max(gmax, abs(float(col @ resid)) / n)
    lambdas = np.geomspace(gmax / 0.5 * (1 + 1e-9), gmax * 2e-3, n_lambda)

    out = {}
    for name, backend in _backends().items():
        theta = np.zeros(pa.shape[0])
        intercept = float(np.log(y.mean() / (1 - y.mean())))
        start = time.perf_counter()
        for lam in lambdas:
            intercept, _, _ = backend.enet_cd_logistic(
                logx, pa, pb, mean, scale, y, lam * 0.25, lam * 0.5,
                theta, intercept, 100, 2000, 1e-7, 1e-5,
            )
        out[name] = time.perf_counter() - start
    return out


def bench_screen(n_per_class=100, m=60):
    ds_spec = cs.SimSpec(
        n_per_class=(n_per_class, n_per_class), m=m,
        signal_features=(0, 1, 2), effect_size=1.0, zero_rate=0.05, seed=9,
    )
    table, labels, cov, _ = cs.simulate(ds_spec)
    comp = cs.impute_zeros(cs.filter_rare(table)[0])
    logx = np.log(comp.values)
    y_idx = labels.y - 1
    out = {}
    for name in kernels.available_backends():
        kernels.set_backend(name)
        start = time.perf_counter()
        _auc_matrix_arrays(
            logx, y_idx, 2, np.zeros((2 * n_per_class, 0)), ScreeningConfig(), workers=1
        )
        out[name] = time.perf_counter() - start
    return out, m * (m - 1) // 2


def _backends():
    from codasep.kernels import _pykernels

    out = {"python": _pykernels}
    if "c" in kernels.available_backends():
        from codasep.kernels import _ckernels

        out["c"] = _ckernels
    return out


def _report(title: str, times: dict, unit="s", per=1.0):
    python_t = times["python"] / per
    line = f"{title:34s} python {python_t * 1e3:10.3f} ms"
    if "c" in times:
        c_t = times["c"] / per
        line += f"   c {c_t * 1e3:10.3f} ms   speedup {python_t / c_t:6.1f}x"
    print(line)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true",
                        help="add the Baxter-scale throughput extrapolation")
    args = parser.parse_args()

    default = kernels.get_backend()
    print(f"backends: {', '.join(kernels.available_backends())} (default {default})\n")

    _report("Mann-Whitney AUC (n=500)", bench_auc())
    _report("DeLong AUC+variance (n=500)", bench_delong())
    newton = bench_newton()
    _report("logistic Newton fit (n=490, p=3)", newton)
    _report("elastic-net path (780 cols, 50 lam)", bench_enet_path())

    screen, n_pairs = bench_screen()
    _report(f"pairwise screen (m=60, {n_pairs} fits)", screen)

    if args.full and "c" in newton:
        per_fit = {k: v / n_pairs for k, v in screen.items()}
        print("\nBaxter-scale extrapolation (m=336, 56,280 pair fits, 1 worker):")
        for name, t in per_fit.items():
            print(f"  {name:6s} ~{t * 56280:8.1f} s")

    kernels.set_backend(default)


if __name__ == "__main__":
    main()
