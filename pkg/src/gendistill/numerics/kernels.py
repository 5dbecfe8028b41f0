"""Hot inner loops, in two interchangeable flavours.

Every kernel exists as a pure-numpy function (``*_np``) and a numba
``@njit`` function (``*_nb``). The module-level names without suffix point at
whichever backend is active. Selection happens once at import time:

    GENDISTILL_BACKEND=numpy   force the numpy path
    GENDISTILL_BACKEND=numba   require numba (ImportError if missing)
    unset                      numba when importable, numpy otherwise

Both flavours accumulate in the same order, so their outputs agree bit for bit
on the same inputs.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_requested = os.environ.get("GENDISTILL_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"GENDISTILL_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and not HAVE_NUMBA:
    raise ImportError("GENDISTILL_BACKEND=numba but numba is not installed")
BACKEND = "numpy" if (_requested == "numpy" or not HAVE_NUMBA) else "numba"


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def im2col_np(x, width):
    """(B, L, E) -> (B, L-width+1, width*E) windows, row-major over (offset, channel)."""
    B, L, E = x.shape
    T = L - width + 1
    win = np.lib.stride_tricks.sliding_window_view(x, width, axis=1)  # (B, T, E, width)
    return np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B, T, width * E)


def col2im_np(dcols, width, length):
    """Adjoint of im2col: scatter window gradients back onto the sequence."""
    B, T, KE = dcols.shape
    E = KE // width
    d = dcols.reshape(B, T, width, E)
    dx = np.zeros((B, length, E))
    for j in range(width):
        dx[:, j:j + T, :] += d[:, :, j, :]
    return dx


def masked_max_time_np(y, n_valid):
    """Max over the first ``n_valid[b]`` time steps of ``y[b]``; returns (max, argmax)."""
    B, T, F = y.shape
    masked = np.where(np.arange(T)[None, :, None] < n_valid[:, None, None], y, -np.inf)
    idx = masked.argmax(axis=1)
    out = np.take_along_axis(masked, idx[:, None, :], axis=1)[:, 0, :]
    return out, idx


def max_time_bwd_np(dout, idx, T):
    B, F = dout.shape
    dy = np.zeros((B, T, F))
    np.put_along_axis(dy, idx[:, None, :], dout[:, None, :], axis=1)
    return dy


def embedding_scatter_np(dtable, ids, dout):
    """dtable[ids[b, t]] += dout[b, t] for every position, in row-major order."""
    E = dout.shape[-1]
    np.add.at(dtable, ids.reshape(-1), dout.reshape(-1, E))
    return dtable


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def im2col_nb(x, width):
        B, L, E = x.shape
        T = L - width + 1
        out = np.empty((B, T, width * E))
        for b in range(B):
            for t in range(T):
                for j in range(width):
                    for e in range(E):
                        out[b, t, j * E + e] = x[b, t + j, e]
        return out

    @njit(cache=True)
    def col2im_nb(dcols, width, length):
        B, T, KE = dcols.shape
        E = KE // width
        dx = np.zeros((B, length, E))
        for j in range(width):
            for b in range(B):
                for t in range(T):
                    for e in range(E):
                        dx[b, t + j, e] += dcols[b, t, j * E + e]
        return dx

    @njit(cache=True)
    def masked_max_time_nb(y, n_valid):
        B, T, F = y.shape
        out = np.empty((B, F))
        idx = np.zeros((B, F), dtype=np.int64)
        for b in range(B):
            n = n_valid[b]
            for f in range(F):
                best = -np.inf
                arg = 0
                for t in range(n):
                    v = y[b, t, f]
                    if v > best:
                        best = v
                        arg = t
                out[b, f] = best
                idx[b, f] = arg
        return out, idx

    @njit(cache=True)
    def max_time_bwd_nb(dout, idx, T):
        B, F = dout.shape
        dy = np.zeros((B, T, F))
        for b in range(B):
            for f in range(F):
                dy[b, idx[b, f], f] = dout[b, f]
        return dy

    @njit(cache=True)
    def embedding_scatter_nb(dtable, ids, dout):
        B, L = ids.shape
        E = dout.shape[2]
        for b in range(B):
            for t in range(L):
                row = ids[b, t]
                for e in range(E):
                    dtable[row, e] += dout[b, t, e]
        return dtable


_IMPLS = {
    "numpy": {
        "im2col": im2col_np,
        "col2im": col2im_np,
        "masked_max_time": masked_max_time_np,
        "max_time_bwd": max_time_bwd_np,
        "embedding_scatter": embedding_scatter_np,
    },
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {
        "im2col": im2col_nb,
        "col2im": col2im_nb,
        "masked_max_time": masked_max_time_nb,
        "max_time_bwd": max_time_bwd_nb,
        "embedding_scatter": embedding_scatter_nb,
    }


def get_impl(name, backend=None):
    return _IMPLS[backend or BACKEND][name]


im2col = get_impl("im2col")
col2im = get_impl("col2im")
masked_max_time = get_impl("masked_max_time")
max_time_bwd = get_impl("max_time_bwd")
embedding_scatter = get_impl("embedding_scatter")
