"""Permutation-sampling Shapley values for a black-box scoring function."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class AttributionVector:
    values: np.ndarray
    baseline: np.ndarray
    n_samples: int
    seed: int

    def __len__(self) -> int:
        return len(self.values)


def shapley_estimate(
    f: Callable[[np.ndarray], np.ndarray],
    baseline,
    x,
    n_samples: int = 200,
    seed: int = 0,
) -> AttributionVector:
    """Average marginal contributions over ``n_samples`` random feature orders.

    ``f`` must accept a 2-D batch and return one score per row. For every
    sampled order the features are switched from ``baseline`` to ``x`` one
    at a time; the increments telescope to ``f(x) - f(baseline)``, so the
    efficiency identity holds for each permutation and thus for the mean.
    Features equal in ``x`` and ``baseline`` always receive exactly zero.
    """
    base = np.asarray(baseline, dtype=float)
    x = np.asarray(x, dtype=float)
    if base.shape != x.shape or x.ndim != 1:
        raise DimensionMismatch("baseline and x must be vectors of equal length")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    d = len(x)
    phi = np.zeros(d)
    active = np.flatnonzero(x != base)
    if len(active) == 0:
        return AttributionVector(phi, base, n_samples, seed)

    rng = np.random.default_rng(seed)
    m = len(active)
    f_base = float(np.asarray(f(base[None, :]))[0])
    f_x = float(np.asarray(f(x[None, :]))[0])
    # interior points only: prefixes of length 1..m-1 of each permutation
    steps = np.tril(np.ones((m, m), dtype=bool))[:-1]
    total = np.zeros(d)
    batch = max(1, 4096 // max(m, 1))
    for start in range(0, n_samples, batch):
        count = min(batch, n_samples - start)
        perms = np.array([active[rng.permutation(m)] for _ in range(count)])
        if m > 1:
            pts = np.repeat(base[None, :], count * (m - 1), axis=0).reshape(count, m - 1, d)
            for j in range(count):
                mask = np.zeros((m - 1, d), dtype=bool)
                mask[:, perms[j]] = steps
                pts[j][mask] = np.broadcast_to(x, (m - 1, d))[mask]
            inner = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(count, m - 1)
        else:
            inner = np.empty((count, 0))
        values = np.concatenate([np.full((count, 1), f_base), inner, np.full((count, 1), f_x)], axis=1)
        marg = np.diff(values, axis=1)
        for j in range(count):
            total[perms[j]] += marg[j]
    phi = total / n_samples
    return AttributionVector(phi, base, n_samples, seed)
