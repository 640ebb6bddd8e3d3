"""Probabilistic Hardy-Littlewood-Karamata checks and the Kronecker martingale.

Side (i) of the equivalence is lam^rho int e^{-lam x} dG(x) -> C. Side (ii) is
G(x)/x^rho -> C/Gamma(rho+1). Both are evaluated exactly for atomic G and in
closed form for power laws. For a point measure theta, the function
F(y) = int_0^y x e^{-sqrt2 x} theta_hat(dx) composed with sqrt turns side (i)
at rho = 3/2 into the tightness statistic and side (ii) at x = y^2 into the
cubic statistic.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import gamma

from . import rng as rng_mod
from .doa_criteria import CESARO_TARGET, cesaro_stat
from .errors import DescriptorMismatch, Divergent
from .harness.stats import conv_in_prob_test, quantile_stability
from .point_measure import SQRT2, SQRT_2_OVER_PI, IntensityDescriptor, PointMeasure, _require_nonempty


@dataclass(frozen=True)
class MonotoneFunction:
    """A non-decreasing G on [0, inf) with G(0) = 0.

    ``power``: G(x) = C x^rho (times a random multiplier W for sampled
    realizations). ``atomic``: G(x) = sum of weights w_i over atoms z_i <= x.
    ``callable``: an arbitrary function, handled by quadrature.
    """

    kind: str
    rho: float = 1.0
    C: float = 1.0
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None
    fn: Callable | None = field(default=None, compare=False)

    @classmethod
    def power(cls, rho: float, C: float = 1.0) -> "MonotoneFunction":
        if not rho > 0 or not C > 0:
            raise ValueError("power kind needs rho > 0 and C > 0")
        return cls("power", rho=float(rho), C=float(C))

    @classmethod
    def atomic(cls, atoms, weights) -> "MonotoneFunction":
        z = np.asarray(atoms, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64)
        if np.any(z < 0) or np.any(w < 0):
            raise ValueError("atomic G needs non-negative atoms and weights")
        order = np.argsort(z, kind="stable")
        return cls("atomic", atoms=z[order], weights=w[order])

    @classmethod
    def from_measure(cls, eta: PointMeasure, sqrt_change: bool = True) -> "MonotoneFunction":
        """F(y) = int_0^y x e^{-sqrt2 x} eta_hat(dx), optionally composed as F(sqrt x)."""
        _require_nonempty(eta)
        x = -eta.positions
        keep = x >= 0
        x, m = x[keep], eta.multiplicities[keep]
        w = m * x * np.exp(-SQRT2 * x)
        return cls.atomic(x * x if sqrt_change else x, w)

    @classmethod
    def from_callable(cls, fn: Callable) -> "MonotoneFunction":
        return cls("callable", fn=fn)

    def __call__(self, x: float) -> float:
        if self.kind == "power":
            return self.C * x**self.rho
        if self.kind == "atomic":
            k = np.searchsorted(self.atoms, x, side="right")
            return float(self.weights[:k].sum())
        return float(self.fn(x))


@dataclass(frozen=True)
class ParetoPowerSampler:
    """Random G(x) = W C x^rho with W Pareto(shape) on [1, inf)."""

    rho: float
    C: float = 1.0
    shape: float = 0.5

    def sample(self, seed: int, replicate: int) -> MonotoneFunction:
        u = rng_mod.stream(seed, rng_mod.STREAM_MISC, replicate).random()
        w = (1.0 - u) ** (-1.0 / self.shape)
        return MonotoneFunction.power(self.rho, self.C * w)


@dataclass(frozen=True)
class EnsembleSampler:
    """G built from an ensemble of point measures via F(sqrt .)."""

    measures: tuple

    def sample(self, seed: int, replicate: int) -> MonotoneFunction:
        return MonotoneFunction.from_measure(self.measures[replicate])


@dataclass(frozen=True)
class PowerSampler:
    rho: float
    C: float = 1.0

    def sample(self, seed: int, replicate: int) -> MonotoneFunction:
        return MonotoneFunction.power(self.rho, self.C)


def laplace_stat(G: MonotoneFunction, lam: float, rho: float) -> float:
    """lam^rho int_0^inf e^{-lam x} dG(x)."""
    if not lam > 0:
        raise ValueError("laplace_stat needs lam > 0")
    if G.kind == "power":
        # int e^{-lam x} d(C x^r) = C Gamma(r+1) lam^{-r}
        return float(G.C * gamma(G.rho + 1.0) * lam ** (rho - G.rho))
    if G.kind == "atomic":
        return float(lam**rho * np.dot(G.weights, np.exp(-lam * G.atoms)))
    # Stieltjes integral by parts: int e^{-lam x} dG = lam int G(x) e^{-lam x} dx.
    with warnings.catch_warnings():
        warnings.simplefilter("error", sp_integrate.IntegrationWarning)
        try:
            val, _ = sp_integrate.quad(lambda x: G(x) * math.exp(-lam * x), 0.0, math.inf, limit=400)
        except (sp_integrate.IntegrationWarning, OverflowError) as exc:
            raise Divergent(f"Laplace-Stieltjes transform diverges: {exc}") from exc
    if not math.isfinite(val):
        raise Divergent("Laplace-Stieltjes transform is infinite")
    return float(lam ** (rho + 1.0) * val)


def ratio_stat(G: MonotoneFunction, x: float, rho: float) -> float:
    """G(x) / x^rho."""
    if not x > 0:
        raise ValueError("ratio_stat needs x > 0")
    if G.kind == "power":
        return float(G.C * x ** (G.rho - rho))
    return G(x) / x**rho


@dataclass
class HLKReport:
    rho: float
    C: float
    lam_grid: list
    x_grid: list
    laplace_values: np.ndarray
    ratio_values: np.ndarray
    laplace_verdict: dict
    ratio_verdict: dict
    tightness: dict
    verdict: str
    sides: dict

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "C": self.C,
            "gamma_rho_plus_1": float(gamma(self.rho + 1.0)),
            "lam_grid": self.lam_grid,
            "x_grid": self.x_grid,
            "laplace": self.laplace_verdict,
            "ratio": self.ratio_verdict,
            "tightness": self.tightness,
            "sides": self.sides,
            "verdict": self.verdict,
        }


def _side_label(v: dict) -> str:
    return {"supported": "supported", "contradicted": "non-convergent"}.get(v["label"], "inconclusive")


def hlk_equivalence_report(sampler, rho: float, C: float, lam_grid: Sequence[float], x_grid: Sequence[float],
                           replicates: int, seed: int = 0, tol: float = 0.1, exact_tol: float = 1e-12) -> HLKReport:
    """Compare both sides of the probabilistic HLK equivalence on sampled G.

    Exceedance is measured relative to each side's target: |v/target - 1| > tol.
    The transform side is read along decreasing lam, the ratio side along
    increasing x.
    """
    lam_grid = sorted((float(v) for v in lam_grid), reverse=True)
    x_grid = sorted(float(v) for v in x_grid)
    if min(lam_grid) <= 0 or max(lam_grid) / min(lam_grid) < 99.999 or max(x_grid) / min(x_grid) < 99.999:
        raise ValueError("grids must span two decades")
    Gs = [sampler.sample(seed, r) for r in range(replicates)]
    lap = np.array([[laplace_stat(G, lam, rho) for lam in lam_grid] for G in Gs])
    rat = np.array([[ratio_stat(G, x, rho) for x in x_grid] for G in Gs])
    lap_target = C
    rat_target = C / float(gamma(rho + 1.0))
    deterministic = isinstance(sampler, PowerSampler)
    lv = conv_in_prob_test(lap / lap_target, 1.0, tol, deterministic=deterministic)
    rv = conv_in_prob_test(rat / rat_target, 1.0, tol, deterministic=deterministic)
    tight = quantile_stability(lap, q=95.0, threshold=0.25)
    sides = {"laplace": _side_label(lv), "ratio": _side_label(rv)}
    if deterministic:
        exact = bool(np.all(np.abs(lap - lap_target) <= exact_tol * lap_target)
                     and np.all(np.abs(rat - rat_target) <= exact_tol * rat_target))
        verdict = "equivalent (exact)" if exact else "not equivalent"
    elif sides["laplace"] == sides["ratio"] == "supported":
        verdict = "supported"
    elif sides["laplace"] == sides["ratio"] == "non-convergent":
        verdict = "non-convergent"
    else:
        verdict = "inconclusive"
    return HLKReport(rho, C, lam_grid, x_grid, lap, rat, lv, rv, tight, verdict, sides)


# --------------------------------------------------------------------------
# Kronecker martingale
# --------------------------------------------------------------------------


def compensator(t: float, alpha: float, beta: float) -> float:
    """sqrt(2/pi) int_1^t (1 + alpha cos(x^beta)) / x dx, relative tolerance 1e-10."""
    if t <= 1:
        return 0.0
    osc = 0.0
    if alpha:
        osc, _ = sp_integrate.quad(lambda x: math.cos(x**beta) / x, 1.0, t, epsrel=1e-10, epsabs=0.0, limit=2000)
    return SQRT_2_OVER_PI * (math.log(t) + alpha * osc)


def riemann_lebesgue_avg(t: float, beta: float) -> float:
    """(1/t) int_1^t cos(x^beta) dx."""
    val, _ = sp_integrate.quad(lambda x: math.cos(x**beta), 1.0, t, epsrel=1e-10, epsabs=0.0, limit=5000)
    return val / t


def kronecker_variance(alpha: float, beta: float, upper: float = math.inf) -> float:
    """Var N_inf = sqrt(2/pi) int_1^inf (1 + alpha cos x^beta) / (x^3 e^{sqrt2 x}) dx."""
    val, _ = sp_integrate.quad(lambda x: (1 + alpha * math.cos(x**beta)) * math.exp(-SQRT2 * x) / x**3,
                               1.0, upper, epsrel=1e-10, limit=400)
    return SQRT_2_OVER_PI * val


def n_t(eta: PointMeasure, t: float, alpha: float, beta: float) -> float:
    """N_t = sum_{x_hat in [1, t]} mult / (x_hat^2 e^{sqrt2 x_hat}) minus the compensator."""
    x = -eta.positions
    sel = (x >= 1.0) & (x <= t)
    xs = x[sel]
    atomic = float(np.sum(eta.multiplicities[sel] * np.exp(-SQRT2 * xs) / (xs * xs)))
    return atomic - compensator(t, alpha, beta)


def kronecker_check(realization: PointMeasure, alpha: float, beta: float, t_grid: Sequence[float],
                    descriptor: IntensityDescriptor | None = None, floor: float = 1e-5) -> dict:
    """N_t along ``t_grid`` with a Cauchy diagnostic and the Cesaro value at max(t_grid).

    The diagnostic looks at increments |N_{t_{k+1}} - N_{t_k}| through their
    tail envelope sup_{j >= k} inc_j, which is non-increasing by construction.
    It passes when the envelope settles below ``floor``, so that every later
    increment stays below it. Raw increments of
    a single martingale path need not be monotone, so they are reported as
    ``increments_monotone`` without entering the verdict. The floor absorbs
    the discretization error of the aggregated sample bins.
    """
    _require_nonempty(realization)
    if descriptor is not None:
        if descriptor.kind == "abk":
            a, b = 0.0, beta
        elif descriptor.kind == "modulated":
            a, b = descriptor.params["alpha"], descriptor.params["beta"]
        else:
            raise DescriptorMismatch(f"kronecker_check needs a modulated intensity, got {descriptor.kind!r}")
        if abs(a - alpha) > 1e-12 or (a != 0 and abs(b - beta) > 1e-12):
            raise DescriptorMismatch("realization was sampled with different (alpha, beta)")
    t_grid = [float(v) for v in t_grid]
    if len(t_grid) < 3 or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("t_grid must be increasing with at least three points")
    N = [n_t(realization, t, alpha, beta) for t in t_grid]
    inc = [abs(b - a) for a, b in zip(N, N[1:])]
    env = np.maximum.accumulate(np.array(inc)[::-1])[::-1]
    ok = bool(env[-1] <= floor < env[0])
    raw_monotone = bool(np.all(np.diff(inc) <= 0))
    y = t_grid[-1]
    ces = cesaro_stat(realization, y)
    return {
        "t": t_grid,
        "N": N,
        "increments": inc,
        "envelope": env.tolist(),
        "increments_monotone": raw_monotone,
        "cauchy": ok,
        "floor": floor,
        "cesaro_y": y,
        "cesaro": ces,
        "cesaro_rel_err": ces / CESARO_TARGET - 1.0,
    }
