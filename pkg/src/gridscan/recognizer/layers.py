"""Forward/backward kernels for the classifier, written against plain numpy.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward`` takes
the upstream gradient and that cache. Tensors are ``(n, c, h, w)`` or ``(n, d)``.
Kernels are dtype-agnostic so gradient checks can run in float64.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gridscan.errors import ShapeMismatch


def conv_output_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _windows(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    # (n, c, ho, wo, k, k) view
    return sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d_forward(x, w, b, stride=1, pad=0):
    """Cross-correlation: ``out[n,o,i,j] = b[o] + sum x[n,c,i*s-p+u,j*s-p+v] * w[o,c,u,v]``."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeMismatch(f"conv expects 4-d input and kernel, got {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    o, ci, k, k2 = w.shape
    if ci != c or k != k2 or b.shape != (o,):
        raise ShapeMismatch(f"kernel {w.shape} / bias {b.shape} incompatible with input {x.shape}")
    ho, wo = conv_output_size(h, k, stride, pad), conv_output_size(wd, k, stride, pad)
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"kernel {k} too large for input {h}x{wd} with pad {pad}")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = _windows(xp, k, stride)[:, :, :ho, :wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(o, -1).T + b
    out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out), (x.shape, xp.shape, cols, w, stride, pad)


def conv2d_backward(dout, cache):
    x_shape, xp_shape, cols, w, stride, pad = cache
    n, c, h, wd = x_shape
    o, _, k, _ = w.shape
    _, _, ho, wo = dout.shape
    dmat = dout.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)
    dcols = (dmat @ w.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for u in range(k):
        for v in range(k):
            dxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += dcols[..., u, v].transpose(0, 3, 1, 2)
    dx = dxp[:, :, pad : pad + h, pad : pad + wd] if pad else dxp
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(dout, cache):
    return dout * (cache > 0)


def maxpool_forward(x, k=2, stride=2):
    n, c, h, wd = x.shape
    ho, wo = conv_output_size(h, k, stride, 0), conv_output_size(wd, k, stride, 0)
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"pool window {k} larger than input {h}x{wd}")
    win = _windows(x, k, stride)[:, :, :ho, :wo].reshape(n, c, ho, wo, k * k)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, k, stride)


def maxpool_backward(dout, cache):
    """Routes each gradient to the first maximal element of its window."""
    x_shape, arg, k, stride = cache
    _, _, ho, wo = dout.shape
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for idx in range(k * k):
        u, v = divmod(idx, k)
        dx[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += dout * (arg == idx)
    return dx


def flatten_forward(x):
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(dout, cache):
    return dout.reshape(cache)


def fc_forward(x, w, b):
    """``out = x @ w.T + b`` with ``w`` of shape ``(out_d, in_d)``."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeMismatch(f"fc weight {w.shape} / bias {b.shape} incompatible with input {x.shape}")
    return x @ w.T + b, (x, w)


def fc_backward(dout, cache):
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient ``(softmax - onehot) / n``."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_p[np.arange(n), labels].mean()
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1
    return float(loss), grad / n
