"""Log-domain accumulation helpers shared by the partition-function code."""

from __future__ import annotations

import math

import numpy as np


def logsumexp(a, axis: int | None = None):
    """Numerically stable log(sum(exp(a))).

    Entries equal to -inf are legal (zero mass) and an all -inf input
    returns -inf instead of raising or producing NaN.
    """
    a = np.asarray(a, dtype=float)
    if axis is None:
        if a.size == 0:
            return -math.inf
        m = float(np.max(a))
        if m == -math.inf:
            return -math.inf
        return m + math.log(float(np.exp(a - m).sum()))
    m = np.max(a, axis=axis)
    out = np.full(m.shape, -np.inf)
    finite = m > -np.inf
    if np.any(finite):
        shifted = a - np.expand_dims(np.where(finite, m, 0.0), axis)
        s = np.exp(shifted).sum(axis=axis)
        out[finite] = m[finite] + np.log(s[finite])
    return out


def exact_variance(values, ddof: int = 1) -> float:
    """Sample variance with exactly rounded (fsum) accumulation.

    Constant inputs return exactly 0.0 (the rounded mean of n identical
    floats can differ from them by an ulp, which would otherwise leak a
    spurious 1e-32-scale variance).
    """
    vals = [float(v) for v in values]
    n = len(vals)
    if n <= ddof:
        raise ValueError(f"need more than {ddof} values")
    if min(vals) == max(vals):
        return 0.0
    mean = math.fsum(vals) / n
    return math.fsum((v - mean) ** 2 for v in vals) / (n - ddof)


def exact_mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error with exactly rounded (fsum) accumulation.

    fsum makes both statistics invariant under permutation of the inputs,
    which keeps replica aggregation independent of scheduling order.
    """
    vals = [float(v) for v in values]
    n = len(vals)
    if n == 0:
        raise ValueError("need at least one value")
    if min(vals) == max(vals):
        return vals[0], 0.0
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)
