"""Hot per-iteration kernels with numba and pure-numpy backends.

The backend is chosen at import time from the ``FMHSDM_BACKEND`` environment
variable (``"numba"`` or ``"numpy"``). Default is numba when importable,
falling back to numpy otherwise. Both implementations of every kernel are
exported so the backend benchmark can time them side by side.
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


def ball_project_numpy(u, center, radius):
    """Project u onto the closed ball B[center, radius]."""
    diff = u - center
    norm = np.sqrt(np.dot(diff, diff))
    if norm <= radius:
        return u.copy()
    return center + diff * (radius / norm)


@njit(cache=True)
def ball_project_numba(u, center, radius):
    n = u.shape[0]
    sq = 0.0
    for i in range(n):
        d = u[i] - center[i]
        sq += d * d
    norm = np.sqrt(sq)
    out = np.empty(n)
    if norm <= radius:
        for i in range(n):
            out[i] = u[i]
    else:
        scale = radius / norm
        for i in range(n):
            out[i] = center[i] + (u[i] - center[i]) * scale
    return out


def block_mean_tile_numpy(x, num_blocks):
    """Replace each of num_blocks equal blocks of x by the block mean."""
    d = x.shape[0] // num_blocks
    mean = x.reshape(num_blocks, d).mean(axis=0)
    return np.tile(mean, num_blocks)


@njit(cache=True)
def block_mean_tile_numba(x, num_blocks):
    d = x.shape[0] // num_blocks
    out = np.empty(x.shape[0])
    inv = 1.0 / num_blocks
    for i in range(d):
        acc = 0.0
        for b in range(num_blocks):
            acc += x[b * d + i]
        m = acc * inv
        for b in range(num_blocks):
            out[b * d + i] = m
    return out


def hyperplane_project_numpy(x, a, b, a_norm_sq):
    """Project x onto the hyperplane {z : <a, z> = b}."""
    return x - ((np.dot(a, x) - b) / a_norm_sq) * a


@njit(cache=True)
def hyperplane_project_numba(x, a, b, a_norm_sq):
    n = x.shape[0]
    dot = 0.0
    for i in range(n):
        dot += a[i] * x[i]
    coef = (dot - b) / a_norm_sq
    out = np.empty(n)
    for i in range(n):
        out[i] = x[i] - coef * a[i]
    return out


def diag_resolvent_numpy(x, p_diag, lam):
    """Apply (I + lam * diag(p_diag))^-1 to x."""
    return x / (1.0 + lam * p_diag)


@njit(cache=True)
def diag_resolvent_numba(x, p_diag, lam):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = x[i] / (1.0 + lam * p_diag[i])
    return out


def half_update_numpy(x_half, ta_xn, g_xn, t_xn1, g_xn1, lam):
    """Fused increment x_half - (ta_xn - lam*g_xn) + (t_xn1 - lam*g_xn1)."""
    return x_half - ta_xn + lam * g_xn + t_xn1 - lam * g_xn1


@njit(cache=True)
def half_update_numba(x_half, ta_xn, g_xn, t_xn1, g_xn1, lam):
    n = x_half.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = x_half[i] - ta_xn[i] + lam * g_xn[i] + t_xn1[i] - lam * g_xn1[i]
    return out


def _pick_backend():
    requested = os.environ.get("FMHSDM_BACKEND", "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        raise ValueError(
            "FMHSDM_BACKEND must be 'numba' or 'numpy', got %r" % requested
        )
    if requested == "numpy":
        return "numpy"
    if not HAS_NUMBA:
        return "numpy"
    return "numba"


BACKEND = _pick_backend()

if BACKEND == "numba":
    ball_project = ball_project_numba
    block_mean_tile = block_mean_tile_numba
    hyperplane_project = hyperplane_project_numba
    diag_resolvent = diag_resolvent_numba
    half_update = half_update_numba
else:
    ball_project = ball_project_numpy
    block_mean_tile = block_mean_tile_numpy
    hyperplane_project = hyperplane_project_numpy
    diag_resolvent = diag_resolvent_numpy
    half_update = half_update_numpy
