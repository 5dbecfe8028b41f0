"""Layer forward/backward passes.

Each ``*_fwd`` returns ``(out, cache)`` and the matching ``*_bwd`` takes the
upstream gradient plus that cache. Backward passes return exact gradients of
the forward computation; parameter gradients are returned, never accumulated
in place, so callers decide where they go.

Sequence tensors are laid out as (batch, time, channels).
"""
import numpy as np

from . import kernels


class ShapeError(ValueError):
    pass


def _check(cond, op, **shapes):
    if not cond:
        desc = ", ".join(f"{k}={tuple(v)}" for k, v in shapes.items())
        raise ShapeError(f"{op}: incompatible shapes ({desc})")


def affine_fwd(x, W, b):
    _check(x.ndim == 2 and W.ndim == 2 and x.shape[1] == W.shape[0] and b.shape == (W.shape[1],),
           "affine_fwd", x=x.shape, W=W.shape, b=b.shape)
    return x @ W + b, (x, W)


def affine_bwd(dy, cache):
    x, W = cache
    _check(dy.shape == (x.shape[0], W.shape[1]), "affine_bwd", dy=dy.shape, x=x.shape, W=W.shape)
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def conv1d_fwd(x, W, b):
    """Valid 1-d convolution over the time axis.

    x: (B, L, E); W: (width, E, F); b: (F,). Output is (B, L - width + 1, F).
    """
    _check(x.ndim == 3 and W.ndim == 3 and x.shape[2] == W.shape[1] and b.shape == (W.shape[2],)
           and x.shape[1] >= W.shape[0], "conv1d_fwd", x=x.shape, W=W.shape, b=b.shape)
    width, E, F = W.shape
    cols = kernels.im2col(x, width)
    B, T, _ = cols.shape
    y = (cols.reshape(B * T, width * E) @ W.reshape(width * E, F)).reshape(B, T, F) + b
    return y, (cols, W, x.shape[1])


def conv1d_bwd(dy, cache):
    cols, W, L = cache
    width, E, F = W.shape
    B, T, _ = cols.shape
    _check(dy.shape == (B, T, F), "conv1d_bwd", dy=dy.shape, W=W.shape)
    dy2 = dy.reshape(B * T, F)
    dW = (cols.reshape(B * T, width * E).T @ dy2).reshape(width, E, F)
    db = dy2.sum(axis=0)
    dcols = (dy2 @ W.reshape(width * E, F).T).reshape(B, T, width * E)
    dx = kernels.col2im(dcols, width, L)
    return dx, dW, db


def maxpool_time_fwd(y, n_valid):
    """Max over time restricted to the first ``n_valid[b]`` steps of each row.

    Steps past ``n_valid`` are treated as -inf, so padding never wins.
    """
    n_valid = np.asarray(n_valid, dtype=np.int64)
    _check(y.ndim == 3 and n_valid.shape == (y.shape[0],), "maxpool_time_fwd",
           y=y.shape, n_valid=n_valid.shape)
    if np.any(n_valid < 1) or np.any(n_valid > y.shape[1]):
        raise ValueError("maxpool_time_fwd: n_valid must lie in [1, T]")
    out, idx = kernels.masked_max_time(y, n_valid)
    return out, (idx, y.shape[1])


def maxpool_time_bwd(dout, cache):
    idx, T = cache
    _check(dout.shape == idx.shape, "maxpool_time_bwd", dout=dout.shape, idx=idx.shape)
    return kernels.max_time_bwd(dout, idx, T)


def relu_fwd(x):
    mask = x > 0
    return x * mask, mask


def relu_bwd(dy, mask):
    # subgradient at exactly 0 is 0
    return dy * mask


def embedding_fwd(table, ids):
    ids = np.asarray(ids, dtype=np.int64)
    _check(table.ndim == 2 and ids.ndim == 2, "embedding_fwd", table=table.shape, ids=ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding_fwd: id out of range for table with {table.shape[0]} rows")
    return table[ids], (ids, table.shape)


def embedding_bwd(dout, cache):
    ids, shape = cache
    _check(dout.shape == ids.shape + (shape[1],), "embedding_bwd", dout=dout.shape, ids=ids.shape)
    return kernels.embedding_scatter(np.zeros(shape), ids, np.ascontiguousarray(dout))


def mean_time_fwd(x, n_valid):
    """Mean over the first ``n_valid[b]`` steps of each sequence."""
    n_valid = np.asarray(n_valid, dtype=np.int64)
    _check(x.ndim == 3 and n_valid.shape == (x.shape[0],), "mean_time_fwd",
           x=x.shape, n_valid=n_valid.shape)
    mask = (np.arange(x.shape[1])[None, :] < n_valid[:, None]).astype(np.float64)
    scale = 1.0 / np.maximum(n_valid, 1)
    out = np.einsum("btd,bt->bd", x, mask) * scale[:, None]
    return out, (mask, scale)


def mean_time_bwd(dout, cache):
    mask, scale = cache
    return (dout * scale[:, None])[:, None, :] * mask[:, :, None]


def dropout_fwd(x, p, rng=None, train=True):
    """Inverted dropout: kept units are scaled by 1/(1-p) at train time, identity at eval."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x, None
    if rng is None:
        raise ValueError("dropout_fwd in train mode needs an rng")
    keep = 1.0 - p
    mask = (rng.random(x.shape) < keep) / keep
    return x * mask, mask


def dropout_bwd(dy, mask):
    return dy if mask is None else dy * mask
