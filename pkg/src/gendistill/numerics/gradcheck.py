import math

import numpy as np

from .rng import Rng


def grad_check(objective, params, h=1e-5, max_coords=200, seed=0):
    """Compare analytic gradients against central finite differences.

    ``objective(compute_grad)`` must return the scalar loss for the current
    parameter values; when ``compute_grad`` is true it must also leave the
    analytic gradient in ``params[name].grad`` (starting from zeroed grads).
    The objective has to be deterministic, so disable dropout.

    At most ``max_coords`` randomly chosen coordinates are probed per
    parameter. Returns the largest relative error
    ``|a - n| / max(1e-8, |a| + |n|)`` over all probed coordinates.
    """
    params.zero_grad()
    base = objective(True)
    if not math.isfinite(base):
        raise FloatingPointError(f"objective returned non-finite value {base}")
    analytic = {name: p.grad.copy() for name, p in params.items()}
    params.zero_grad()

    rng = Rng(seed, "grad_check")
    worst = 0.0
    for name, p in params.items():
        flat = p.value.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else np.sort(
            rng.child(name).choice(n, size=max_coords, replace=False))
        a_flat = analytic[name].reshape(-1)
        for i in coords:
            old = flat[i]
            flat[i] = old + h
            fp = objective(False)
            flat[i] = old - h
            fm = objective(False)
            flat[i] = old
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise FloatingPointError(f"non-finite objective while probing {name}[{i}]")
            num = (fp - fm) / (2.0 * h)
            a = a_flat[i]
            err = abs(a - num) / max(1e-8, abs(a) + abs(num))
            worst = max(worst, err)
    return worst
