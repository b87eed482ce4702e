import numpy as np


class AdamState:
    def __init__(self, params):
        self.t = 0
        self.m = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}
        self.v = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}


def adam_step(params, grads, state, lr=1e-4, beta1=0.9, beta2=0.9, eps=1e-9, frozen=()):
    """In-place Adam update with bias correction; returns ``params``."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        if name in frozen:
            continue
        m = state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        v = state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params
