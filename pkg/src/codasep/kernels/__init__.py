"""Hot numerical kernels with a compiled core and a pure-Python fallback.

The compiled extension (``codasep.kernels._ckernels``, built from Cython)
is preferred when importable; otherwise the numpy implementations in
``_pykernels`` are used. Set ``CODASEP_KERNELS=python`` to force the
fallback or ``CODASEP_KERNELS=c`` to require the extension. The active
backend can also be switched at runtime with :func:`set_backend`, which
the benchmark suite uses to compare both.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels

    _HAVE_C = True
except ImportError:
    _ckernels = None
    _HAVE_C = False

_BACKENDS = {"python": _pykernels}
if _HAVE_C:
    _BACKENDS["c"] = _ckernels


def _default_backend() -> str:
    forced = os.environ.get("CODASEP_KERNELS", "").strip().lower()
    if forced in ("py", "python"):
        return "python"
    if forced in ("c", "compiled"):
        if not _HAVE_C:
            raise ImportError(
                "CODASEP_KERNELS=c but the compiled extension is not available; "
                "reinstall with a C compiler or unset the variable"
            )
        return "c"
    if forced:
        raise ValueError(f"unknown CODASEP_KERNELS value {forced!r}")
    return "c" if _HAVE_C else "python"


_BACKEND = _default_backend()
_impl = _BACKENDS[_BACKEND]


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    global _BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {sorted(_BACKENDS)}")
    _BACKEND = name
    _impl = _BACKENDS[name]


def mannwhitney_auc(scores, pos):
    return _impl.mannwhitney_auc(scores, pos)


def delong_auc_variance(scores, pos):
    return _impl.delong_auc_variance(scores, pos)


def multinomial_newton(x, y, n_classes, max_iter, tol, grad_tol, sep_threshold, ridge):
    return _impl.multinomial_newton(
        x, y, n_classes, max_iter, tol, grad_tol, sep_threshold, ridge
    )


def enet_cd_logistic(
    logx,
    pa,
    pb,
    mean,
    scale,
    y,
    lam1,
    lam2,
    theta,
    intercept,
    max_outer=100,
    max_sweeps=2000,
    tol=1e-7,
    w_min=1e-5,
):
    return _impl.enet_cd_logistic(
        logx,
        pa,
        pb,
        mean,
        scale,
        y,
        lam1,
        lam2,
        theta,
        intercept,
        max_outer,
        max_sweeps,
        tol,
        w_min,
    )
