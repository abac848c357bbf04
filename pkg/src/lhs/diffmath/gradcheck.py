from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, no_grad, value_and_grad

REL_FLOOR = 1e-6


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def gradcheck(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    *,
    step: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between autodiff and central differences.

    ``max_entries`` samples that many coordinates per named parameter instead
    of sweeping every entry; every named tensor is always visited.
    """
    _, grads = value_and_grad(fn, params)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, size=max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + step
                hi = float(fn().data)
                flat[i] = orig - step
                lo = float(fn().data)
            flat[i] = orig
            numeric = (hi - lo) / (2 * step)
            worst = max(worst, relative_error(float(grads[name].reshape(-1)[i]), numeric))
    return worst
