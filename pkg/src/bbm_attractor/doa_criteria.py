"""Domain-of-attraction statistics on point measures.

Every statistic is an exact sum over the atoms of the reflected measure
(x_hat = -x), so repeated evaluation is bit-identical and no quadrature error
enters. The functions take a :class:`PointMeasure` in its natural orientation,
with atoms mostly on the negative half-line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyTail
from .fkpp_solver import FkppField
from .point_measure import SQRT2, SQRT_2_OVER_PI, PointMeasure, _require_nonempty

CESARO_TARGET = SQRT_2_OVER_PI
CUBIC_TARGET = SQRT_2_OVER_PI / 3.0
TIGHTNESS_TARGET = SQRT2 / 4.0
R_TARGET = SQRT_2_OVER_PI
SHIFT_MIN_COUNT = 30

STATISTICS = ("cesaro", "cubic", "tightness", "r_stat", "zt_stat", "probe")


def _hat(eta: PointMeasure) -> tuple[np.ndarray, np.ndarray]:
    _require_nonempty(eta)
    return -eta.positions, eta.multiplicities


def cesaro_stat(eta: PointMeasure, y: float) -> float:
    """(1/y) sum_{x_hat in [1, y]} mult / (x_hat e^{sqrt2 x_hat})."""
    if not y > 1:
        raise ValueError("cesaro_stat needs y > 1")
    x, m = _hat(eta)
    sel = (x >= 1.0) & (x <= y)
    if not np.any(sel):
        return 0.0
    xs = x[sel]
    return float(np.sum(m[sel] * np.exp(-SQRT2 * xs) / xs) / y)


def cesaro_ibp(eta: PointMeasure, y: float) -> float:
    """The Cesaro statistic rebuilt from cumulative counts G(x) = eta_hat([0, x]).

    With g(x) = 1/(x e^{sqrt2 x}) and -g'(x) = g(x)(sqrt2 + 1/x):
        int_[1,y] g dG = G(y) g(y) - G(1-) g(1) + int_1^y G(x) g(x)(sqrt2 + 1/x) dx.
    G is a step function and g is an exact antiderivative of the last
    integrand, so every piece is in closed form.
    """
    if not y > 1:
        raise ValueError("cesaro_ibp needs y > 1")
    x, m = _hat(eta)
    order = np.argsort(x, kind="stable")
    x, m = x[order], m[order]
    g_at = lambda z: np.exp(-SQRT2 * z) / z
    G_before_1 = float(m[(x >= 0) & (x < 1.0)].sum())
    at_1 = float(m[x == 1.0].sum())
    inner = (x > 1.0) & (x < y)
    knots = np.concatenate([[1.0], x[inner], [y]])
    # G is constant on [knots[i], knots[i+1]).
    level = G_before_1 + at_1 + np.concatenate([[0.0], np.cumsum(m[inner])])
    body = float(np.sum(level * (g_at(knots[:-1]) - g_at(knots[1:]))))
    G_y = float(m[(x >= 0) & (x <= y)].sum())
    return (G_y * float(g_at(y)) - G_before_1 * float(g_at(1.0)) + body) / y


def cubic_stat(eta: PointMeasure, y: float) -> float:
    """(1/y^3) sum_{x_hat in [0, y]} mult x_hat e^{-sqrt2 x_hat}."""
    if not y > 0:
        raise ValueError("cubic_stat needs y > 0")
    x, m = _hat(eta)
    sel = (x >= 0.0) & (x <= y)
    return float(np.sum(m[sel] * x[sel] * np.exp(-SQRT2 * x[sel])) / y**3)


def tightness_stat(eta: PointMeasure, lam: float) -> float:
    """lam^{3/2} sum_{x_hat >= 0} mult x_hat e^{-sqrt2 x_hat} e^{-lam x_hat^2}."""
    if not lam > 0:
        raise ValueError("tightness_stat needs lam > 0")
    x, m = _hat(eta)
    sel = x >= 0.0
    xs = x[sel]
    return float(lam**1.5 * np.sum(m[sel] * xs * np.exp(-SQRT2 * xs - lam * xs * xs)))


def r_stat(eta: PointMeasure, s: float, normalized: bool = True) -> float:
    """R_s = sqrt(2/pi) s^{-3/2} sum mult x_hat e^{-sqrt2 x_hat} e^{-x_hat^2/2s}.

    With ``normalized=False`` the sqrt(2/pi) prefactor is dropped and the
    statistic targets 1 instead of sqrt(2/pi).
    """
    if not s > 0:
        raise ValueError("r_stat needs s > 0")
    x, m = _hat(eta)
    sel = x >= 0.0
    xs = x[sel]
    val = float(s**-1.5 * np.sum(m[sel] * xs * np.exp(-SQRT2 * xs - xs * xs / (2 * s))))
    return SQRT_2_OVER_PI * val if normalized else val


def zt_stat(eta: PointMeasure, t: float, uM: FkppField) -> float:
    """sum mult u_M(t, sqrt2 t - x) over atoms x of eta."""
    _require_nonempty(eta)
    if abs(uM.time - t) > 1e-9:
        raise ValueError("uM must be solved to time t")
    pts = SQRT2 * t - eta.positions
    vals = uM.in_frame("fixed").value(pts)  # raises GridTooNarrow outside the grid
    return float(np.dot(eta.multiplicities, vals))


def probe_decreased_exponent(eta: PointMeasure, s: float) -> float:
    """(1/s) sum_{x_hat >= 0} mult e^{-sqrt2 x_hat} e^{-x_hat^2/2s} (exploratory)."""
    if not s > 0:
        raise ValueError("probe needs s > 0")
    x, m = _hat(eta)
    sel = x >= 0.0
    xs = x[sel]
    return float(np.sum(m[sel] * np.exp(-SQRT2 * xs - xs * xs / (2 * s))) / s)


@dataclass(frozen=True)
class ShiftEstimate:
    S: float
    n_star: int
    Y: np.ndarray
    counts: np.ndarray

    def __float__(self) -> float:
        return self.S


def shift_estimator(eta: PointMeasure, n_grid: Sequence[int], min_count: int = SHIFT_MIN_COUNT) -> ShiftEstimate:
    """S = (1/sqrt2) log(sqrt(pi) Y_{n*}) with Y_n = eta([-n, inf)) / (n e^{sqrt2 n}).

    n* is the largest grid point whose tail count reaches ``min_count``.
    """
    _require_nonempty(eta)
    n = np.asarray(n_grid, dtype=np.float64)
    if n.size == 0 or np.any(np.diff(n) <= 0) or n[0] <= 0:
        raise ValueError("n_grid must be positive and strictly increasing")
    counts = np.array([eta.mass_geq(-v) for v in n])
    if counts[-1] <= 0:
        raise EmptyTail("eta([-n, inf)) vanishes at the largest n")
    Y = counts / (n * np.exp(SQRT2 * n))
    ok = np.flatnonzero(counts >= min_count)
    idx = int(ok[-1]) if ok.size else int(n.size - 1)
    S = math.log(math.sqrt(math.pi) * Y[idx]) / SQRT2
    return ShiftEstimate(float(S), int(n[idx]), Y, counts)


def fractional_moment_check(ensemble: Sequence[PointMeasure], alpha: float, y_grid: Sequence[float]) -> dict:
    """Empirical E[cubic_stat^alpha] along ``y_grid`` and a boundedness verdict."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    y_grid = list(y_grid)
    vals = np.array([[cubic_stat(eta, y) for y in y_grid] for eta in ensemble])
    moments = np.mean(vals**alpha, axis=0)
    peak = int(np.argmax(moments))
    after = moments[peak:]
    # A peak at the last grid point is growth, not a plateau.
    nonincreasing_after_peak = peak < len(y_grid) - 1 and bool(np.all(np.diff(after) <= 1e-12))
    # Cap from the first half of the grid; "bounded" if later moments stay under 1.25x of it.
    half = max(1, len(y_grid) // 2)
    cap = 1.25 * float(np.max(moments[:half]))
    below_cap = bool(np.all(moments <= cap))
    growth = float(moments[-1] / moments[0]) if moments[0] > 0 else math.inf
    return {
        "alpha": alpha,
        "y": y_grid,
        "moments": moments.tolist(),
        "growth_ratio": growth,
        "bounded": nonincreasing_after_peak or below_cap,
    }


# --------------------------------------------------------------------------
# Series assembly
# --------------------------------------------------------------------------

_STAT_FUNCS: dict[str, Callable] = {
    "cesaro": cesaro_stat,
    "cubic": cubic_stat,
    "tightness": tightness_stat,
    "r_stat": r_stat,
    "probe": probe_decreased_exponent,
}

TARGETS = {
    "cesaro": CESARO_TARGET,
    "cubic": CUBIC_TARGET,
    "tightness": TIGHTNESS_TARGET,
    "r_stat": R_TARGET,
    "probe": None,
}


def truncation_flag(statistic: str, param: float, window: float | None) -> bool:
    """True where the truncation window L, not the intensity, drives the value."""
    if window is None:
        return False
    if statistic == "r_stat":
        return param > window**2 / 10.0
    if statistic in ("cesaro", "cubic"):
        return param > window
    if statistic == "tightness":
        return 1.0 / math.sqrt(param) > window / 3.0
    if statistic == "probe":
        return param > window**2 / 10.0
    return False


@dataclass
class StatSeries:
    """Values of one statistic along a parameter grid for many replicates."""

    statistic: str
    grid: list[float]
    values: np.ndarray  # shape (replicates, len(grid))
    target: float | None = None
    flags: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        g = np.asarray(self.grid, dtype=np.float64)
        if g.size == 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be nonempty and strictly increasing")
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.values.shape[1] != g.size:
            raise ValueError("values do not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("statistic values must be finite")
        if not self.flags:
            self.flags = [False] * g.size

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def to_csv(self, path, name: str = "value") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"parameter,replicate_id,{name}\n")
            for j, p in enumerate(self.grid):
                for r in range(self.values.shape[0]):
                    fh.write(f"{float(p)!r},{r},{float(self.values[r, j])!r}\n")


def stat_series(statistic: str, ensemble: Sequence[PointMeasure], grid: Sequence[float],
                window: float | None = None, **kwargs) -> StatSeries:
    fn = _STAT_FUNCS[statistic]
    vals = np.array([[fn(eta, p, **kwargs) for p in grid] for eta in ensemble])
    target = TARGETS[statistic]
    if statistic == "r_stat" and kwargs.get("normalized") is False:
        target = 1.0
    flags = [truncation_flag(statistic, p, window) for p in grid]
    return StatSeries(statistic, [float(p) for p in grid], vals, target, flags)
