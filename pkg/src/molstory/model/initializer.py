"""Conditions -> fragment-set classifier used to pick the starting fragment."""
import numpy as np

from .layers import linear_backward, linear_forward


def init_initializer(n_cond, n_fragments, hidden=512, seed=0):
    rng = np.random.default_rng(seed)
    b1, b2 = 1.0 / np.sqrt(n_cond), 1.0 / np.sqrt(hidden)
    return {
        "w1": rng.uniform(-b1, b1, size=(n_cond, hidden)),
        "b1": np.zeros(hidden),
        "w2": rng.uniform(-b2, b2, size=(hidden, n_fragments)),
        "b2": np.zeros(n_fragments),
    }


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logits(conditions, p):
    x = np.atleast_2d(np.asarray(conditions, dtype=float))
    u, c1 = linear_forward(x, p["w1"], p["b1"])
    h = np.maximum(u, 0.0)
    z, c2 = linear_forward(h, p["w2"], p["b2"])
    return z, (c1, u, c2)


def initializer_forward(conditions, params):
    """Independent per-fragment presence probabilities."""
    z = _logits(conditions, params)[0]
    out = _sigmoid(z)
    return out[0] if np.ndim(conditions) == 1 else out


def initializer_loss(conditions, targets, params):
    """Mean elementwise binary cross-entropy and gradients."""
    z, (c1, u, c2) = _logits(conditions, params)
    y = np.asarray(targets, dtype=float).reshape(z.shape)
    # log(1 + e^z) - y z, stable form
    loss = float((np.logaddexp(0.0, z) - y * z).mean())
    dz = (_sigmoid(z) - y) / z.size
    grads = {}
    dh, grads["w2"], grads["b2"] = linear_backward(dz, c2)
    du = dh * (u > 0)
    _, grads["w1"], grads["b1"] = linear_backward(du, c1)
    return loss, grads
