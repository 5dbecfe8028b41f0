"""Named trainable parameters and the Adam update."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray = None
    m: np.ndarray = None
    v: np.ndarray = None
    step: int = 0
    frozen_rows: tuple = ()  # rows whose gradient is always discarded (e.g. PAD embedding)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        for name in ("grad", "m", "v"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros_like(self.value))


class ParamStore:
    """Ordered name -> Param mapping owned by a single training loop."""

    def __init__(self):
        self._params = {}

    def add(self, name, value, frozen_rows=()):
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        self._params[name] = Param(value, frozen_rows=tuple(frozen_rows))
        return self._params[name].value

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def value(self, name):
        return self._params[name].value

    def accumulate(self, name, g):
        p = self._params[name]
        if g.shape != p.value.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {p.value.shape}")
        p.grad += g

    def zero_grad(self):
        for p in self._params.values():
            p.grad.fill(0.0)

    def n_params(self):
        return sum(p.value.size for p in self._params.values())

    def state_dict(self):
        return {k: p.value.copy() for k, p in self._params.items()}

    def load_state_dict(self, values):
        missing = set(self._params) ^ set(values)
        if missing:
            raise KeyError(f"parameter name mismatch: {sorted(missing)}")
        for k, v in values.items():
            p = self._params[k]
            if v.shape != p.value.shape:
                raise ValueError(f"{k!r}: checkpoint shape {v.shape} != {p.value.shape}")
            p.value[...] = v


def adam_step(params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
    """One bias-corrected Adam update over every parameter, then zero the grads.

    ``weight_decay`` is decoupled (AdamW style): value -= lr * wd * value.
    """
    b1, b2 = betas
    for p in params._params.values():
        g = p.grad
        if p.frozen_rows:
            g[list(p.frozen_rows)] = 0.0
        p.step += 1
        p.m *= b1
        p.m += (1.0 - b1) * g
        p.v *= b2
        p.v += (1.0 - b2) * (g * g)
        m_hat = p.m / (1.0 - b1 ** p.step)
        v_hat = p.v / (1.0 - b2 ** p.step)
        if weight_decay:
            p.value -= lr * weight_decay * p.value
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        g.fill(0.0)
