"""Statistical verdicts for ensemble experiments.

Convergence in probability can only be supported or contradicted at finite
scale, so verdicts carry one of three labels: ``supported``, ``contradicted``
or ``inconclusive``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats as sp_stats

from ..errors import InsufficientReplicates

QUANTILES = (5, 25, 50, 75, 95)
MIN_REPLICATES = 200
MIN_KS = 50
FINAL_FRACTION = 0.2


def summary_quantiles(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    qs = np.percentile(v, QUANTILES)
    return {f"q{q:02d}": float(x) for q, x in zip(QUANTILES, np.maximum.accumulate(qs))}


def exceedance(values, target: float, eps: float) -> np.ndarray:
    """Column-wise fraction of |X - target| > eps."""
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    return np.mean(np.abs(v - target) > eps, axis=0)


def conv_in_prob_test(values, target: float, eps: float, decreasing: bool = True,
                      deterministic: bool = False, min_replicates: int = MIN_REPLICATES) -> dict:
    """Exceedance-fraction test of X_p -> target in probability along the columns.

    ``values`` has shape (replicates, parameters), with columns ordered toward
    the limit. The verdict passes when the fractions are non-increasing (one
    inversion within 2 MC standard errors allowed) and the last one is below
    0.2. ``deterministic`` waives the replicate count for inputs without
    randomness.
    """
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    n, k = v.shape
    if k < 3:
        raise InsufficientReplicates("need at least three parameter values")
    if n < min_replicates and not deterministic:
        raise InsufficientReplicates(f"need >= {min_replicates} replicates per parameter, got {n}")
    frac = exceedance(v, target, eps)
    se = np.sqrt(frac * (1.0 - frac) / n)
    diffs = np.diff(frac) if decreasing else -np.diff(frac)
    inversions = np.flatnonzero(diffs > 0)
    small = all(diffs[i] <= 2.0 * math.hypot(se[i], se[i + 1]) for i in inversions)
    monotone = inversions.size == 0 or (inversions.size == 1 and small)
    final_ok = bool(frac[-1] < FINAL_FRACTION)
    passed = bool(monotone and final_ok)
    # One-sided binomial p-value for H0: the final exceedance probability is >= 0.2.
    k_final = int(round(frac[-1] * n))
    p_value = float(sp_stats.binom.cdf(k_final, n, FINAL_FRACTION))
    if passed:
        label = "supported"
    elif not final_ok and frac[-1] >= frac[0] - 2.0 * math.hypot(se[0], se[-1]):
        label = "contradicted"
    else:
        label = "inconclusive"
    return {
        "test": "conv_in_prob_test",
        "target": float(target),
        "eps": float(eps),
        "replicates": int(n),
        "fractions": frac.tolist(),
        "se": se.tolist(),
        "inversions": int(inversions.size),
        "p_value": p_value,
        "final_fraction_limit": FINAL_FRACTION,
        "passed": passed,
        "label": label,
    }


def quantile_stability(values, q: float = 95.0, threshold: float = 0.25) -> dict:
    """Tightness surrogate: the q-th percentile varies by less than ``threshold``.

    Variation is (max - min) / min over the parameter grid.
    """
    v = np.atleast_2d(np.asarray(values, dtype=np.float64))
    qs = np.percentile(v, q, axis=0)
    lo = float(np.min(qs))
    variation = math.inf if lo <= 0 else float((np.max(qs) - lo) / lo)
    return {
        "test": "quantile_stability",
        "quantile": q,
        "threshold": threshold,
        "quantiles": qs.tolist(),
        "variation": variation,
        "tight": bool(variation < threshold),
    }


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < MIN_KS or b.size < MIN_KS:
        raise InsufficientReplicates(f"KS test needs >= {MIN_KS} samples per side")
    res = sp_stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def mc_mean(values) -> tuple[float, float]:
    """Sample mean and its standard error."""
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
