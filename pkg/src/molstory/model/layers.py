"""Forward/backward pairs for the building blocks of the networks.

Every ``*_forward`` returns ``(out, cache)`` and the matching ``*_backward``
takes ``(dout, cache)``. All arrays are float64.
"""
import math

import numpy as np

NEG_INF = -1e30


def linear_forward(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(dout, cache):
    x, w = cache
    x2 = x.reshape(-1, x.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    return dout @ w.T, x2.T @ d2, d2.sum(axis=0)


def layernorm_forward(x, g, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv, g)


def layernorm_backward(dout, cache):
    xhat, inv, g = cache
    d = xhat.shape[-1]
    dg = (dout * xhat).reshape(-1, d).sum(axis=0)
    db = dout.reshape(-1, d).sum(axis=0)
    dxhat = dout * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


_C = math.sqrt(2.0 / math.pi)


def gelu_forward(x):
    u = _C * (x + 0.044715 * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dout, cache):
    x, t = cache
    du = _C * (1.0 + 3 * 0.044715 * x ** 2)
    return dout * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du)


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def dropout_forward(x, rate, rng):
    if rng is None or rate <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


def dropout_backward(dout, keep):
    return dout if keep is None else dout * keep


def attention_forward(q, k, v, distances, scale, mask=None):
    """Scaled dot-product attention discounted by ``scale * distances``.

    ``q``: (..., Lq, dh); ``k``, ``v``: (..., Lk, dh); ``distances``
    broadcastable to (..., Lq, Lk); ``mask`` (broadcastable, True = keep).
    """
    dh = q.shape[-1]
    logits = q @ np.swapaxes(k, -1, -2) / math.sqrt(dh) - scale * distances
    if mask is not None:
        logits = np.where(mask, logits, NEG_INF)
    p = softmax(logits)
    return p @ v, (q, k, v, p, distances, mask)


def attention_backward(dout, cache):
    """Returns ``dq, dk, dv, dscale, ddistances_times_minus_scale_free``.

    The last item is the gradient w.r.t. ``distances`` (same shape as the
    broadcast logits).
    """
    q, k, v, p, distances, mask = cache
    dh = q.shape[-1]
    dv = np.swapaxes(p, -1, -2) @ dout
    dp = dout @ np.swapaxes(v, -1, -2)
    dlogits = p * (dp - (dp * p).sum(axis=-1, keepdims=True))
    if mask is not None:
        dlogits = np.where(mask, dlogits, 0.0)
    dq = dlogits @ k / math.sqrt(dh)
    dk = np.swapaxes(dlogits, -1, -2) @ q / math.sqrt(dh)
    dscale = -float((dlogits * distances).sum())
    return dq, dk, dv, dscale, dlogits


def geometry_attention(queries, keys, values, distances, geometry_scale, mask=None):
    """Attention whose logits are discounted by ``geometry_scale * distances``."""
    q, k, v = (np.asarray(a, dtype=float) for a in (queries, keys, values))
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ValueError(f"shape mismatch: q{q.shape} k{k.shape} v{v.shape}")
    d = np.asarray(distances, dtype=float)
    try:
        np.broadcast_shapes(d.shape, q.shape[:-1] + (k.shape[-2],))
    except ValueError:
        raise ValueError(f"distances {d.shape} do not match attention logits") from None
    return attention_forward(q, k, v, d, geometry_scale, mask)[0]


def split_heads(x, heads):
    *lead, n, d = x.shape
    return np.swapaxes(x.reshape(*lead, n, heads, d // heads), -2, -3)


def merge_heads(x):
    *lead, h, n, dh = x.shape
    return np.swapaxes(x, -2, -3).reshape(*lead, n, h * dh)


def mha_forward(xq, xkv, p, prefix, heads, distances, scale, mask):
    """Multi-head attention; ``distances`` and ``mask`` are (B, Lq, Lk)."""
    q, cq = linear_forward(xq, p[prefix + "wq"], p[prefix + "bq"])
    k, ck = linear_forward(xkv, p[prefix + "wk"], p[prefix + "bk"])
    v, cv = linear_forward(xkv, p[prefix + "wv"], p[prefix + "bv"])
    qh, kh, vh = (split_heads(t, heads) for t in (q, k, v))
    o, ca = attention_forward(qh, kh, vh, distances[:, None], scale, mask[:, None])
    out, co = linear_forward(merge_heads(o), p[prefix + "wo"], p[prefix + "bo"])
    return out, (cq, ck, cv, ca, co, heads, xq is xkv)


def mha_backward(dout, cache, prefix, grads):
    cq, ck, cv, ca, co, heads, shared = cache
    dm, grads[prefix + "wo"], grads[prefix + "bo"] = linear_backward(dout, co)
    dqh, dkh, dvh, dscale, _ = attention_backward(split_heads(dm, heads), ca)
    dxq, grads[prefix + "wq"], grads[prefix + "bq"] = linear_backward(merge_heads(dqh), cq)
    dxk, grads[prefix + "wk"], grads[prefix + "bk"] = linear_backward(merge_heads(dkh), ck)
    dxv, grads[prefix + "wv"], grads[prefix + "bv"] = linear_backward(merge_heads(dvh), cv)
    dkv = dxk + dxv
    if shared:
        return dxq + dkv, None, dscale
    return dxq, dkv, dscale
