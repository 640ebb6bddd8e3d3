"""Initial point measures: truncated Poisson samples and deterministic lattices.

Poisson sampling works bin by bin. The window [-L, 0] is cut into unit-aligned
bins (``bins_per_unit`` per unit length, at least 10^4 bins overall), ordered
from the origin downward. Bin masses come from Gauss-Legendre quadrature. Each
bin receives an independent Poisson count, and positions are uniform inside
their bin, which is inverse-CDF sampling against the piecewise-linear
tabulated CDF. Bins ordered from 0 outward make counts and positions of the
old window a prefix of the streams, so enlarging L only appends atoms.

Intensities such as abk put ~e^{sqrt2 L} atoms in the window. Bins whose count
exceeds ``exact_limit`` are therefore stored as a single atom at the bin
midpoint carrying the count as multiplicity.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate

from . import rng as rng_mod
from .errors import NonIntegrable, Overflow
from .point_measure import (
    MAX_MULTIPLICITY,
    SQRT2,
    SQRT_2_OVER_PI,
    IntensityDescriptor,
    PointMeasure,
    read_measure,
)

MODES = ("poisson_sample", "deterministic_lattice", "file")
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
# Above this mean the Poisson draw is replaced by its Gaussian approximation,
# whose relative error is far below float64 rounding of the count itself.
_GAUSSIAN_POISSON = 1e15


@dataclass(frozen=True)
class InitialSpec:
    descriptor: IntensityDescriptor
    L: float = 40.0
    mode: str = "poisson_sample"
    path: str | None = None
    min_bins: int = 10_000
    exact_limit: int = 16

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode != "file" and not self.L > 0:
            raise ValueError("window length L must be positive")

    @property
    def bins_per_unit(self) -> int:
        return max(1, math.ceil(self.min_bins / self.L))

    def bin_edges(self) -> np.ndarray:
        """Upper edges 0, -h, -2h, ... down to -L (last bin possibly short)."""
        h = 1.0 / self.bins_per_unit
        n = math.ceil(self.L / h - 1e-9)
        edges = -h * np.arange(n + 1)
        edges[-1] = -self.L
        return edges

    def bin_masses(self) -> np.ndarray:
        edges = self.bin_edges()
        hi, lo = edges[:-1], edges[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        with np.errstate(over="ignore", invalid="ignore"):
            vals = self.descriptor.density(nodes)
        masses = half * (vals @ _GL_WEIGHTS)
        if not np.all(np.isfinite(masses)) or np.any(masses < 0):
            raise NonIntegrable("intensity is not integrable on the window")
        return masses

    def expected_count(self) -> float:
        """Adaptive quadrature of the density over [-L, 0]."""
        d = self.descriptor
        lo = max(-self.L, d.support[0])
        hi = min(0.0, d.support[1])
        if hi <= lo:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", sp_integrate.IntegrationWarning)
            try:
                val, _ = sp_integrate.quad(lambda x: float(d.density(x)), lo, hi, limit=400, epsrel=1e-10)
            except (sp_integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as exc:
                raise NonIntegrable(f"quadrature of the intensity diverges: {exc}") from exc
        if not math.isfinite(val):
            raise NonIntegrable("quadrature of the intensity is not finite")
        return val


@dataclass(frozen=True)
class SampleInfo:
    expected_count: float
    total_count: float
    resampled: bool
    attempts: int
    aggregated_bins: int


def _draw_counts(masses: np.ndarray, seed: int, attempt: int) -> np.ndarray:
    gen = rng_mod.stream(seed, rng_mod.STREAM_COUNTS, attempt)
    counts = gen.poisson(np.minimum(masses, _GAUSSIAN_POISSON)).astype(np.float64)
    big = masses > _GAUSSIAN_POISSON
    if np.any(big):
        z = rng_mod.stream(seed, rng_mod.STREAM_LARGE_COUNTS, attempt).standard_normal(int(big.sum()))
        counts[big] = np.rint(masses[big] + np.sqrt(masses[big]) * z)
    return counts


def sample_ppp(spec: InitialSpec, seed: int, return_info: bool = False):
    """Draw a truncated Poisson point process realization."""
    if spec.mode != "poisson_sample":
        raise ValueError("sample_ppp requires mode 'poisson_sample'")
    masses = spec.bin_masses()
    quad_total = spec.expected_count()
    if not math.isfinite(quad_total):
        raise NonIntegrable("intensity is not integrable on the window")
    edges = spec.bin_edges()
    attempt = 0
    while True:
        counts = _draw_counts(masses, seed, attempt)
        if counts.sum() > 0:
            break
        attempt += 1
        if attempt > 10_000:
            raise NonIntegrable("intensity has (numerically) zero mass on the window")
    exact = counts <= spec.exact_limit
    exact_counts = counts[exact].astype(np.int64)
    n_exact = int(exact_counts.sum())
    hi, lo = edges[:-1], edges[1:]
    u = rng_mod.stream(seed, rng_mod.STREAM_POSITIONS, attempt).random(n_exact)
    bin_lo = np.repeat(lo[exact], exact_counts)
    bin_w = np.repeat((hi - lo)[exact], exact_counts)
    exact_pos = bin_lo + u * bin_w
    agg = ~exact & (counts > 0)
    agg_pos = 0.5 * (hi[agg] + lo[agg])
    if np.any(counts[agg] > MAX_MULTIPLICITY):
        raise Overflow("aggregated bin multiplicity exceeds the supported range")
    eta = PointMeasure(
        np.concatenate([exact_pos, agg_pos]),
        np.concatenate([np.ones(n_exact), counts[agg]]),
    )
    if return_info:
        info = SampleInfo(quad_total, float(counts.sum()), attempt > 0, attempt + 1, int(agg.sum()))
        return eta, info
    return eta


def _lattice(L: float, power: int, with_origin: bool) -> PointMeasure:
    if L < 2:
        raise ValueError("lattice measures need L >= 2")
    n = np.arange(1, int(math.floor(L)) + 1, dtype=np.float64)
    raw = SQRT_2_OVER_PI * n**power * np.exp(SQRT2 * n)
    if np.any(raw > MAX_MULTIPLICITY):
        raise Overflow(f"lattice multiplicity ~{raw.max():.3g} exceeds 2**128")
    mult = np.rint(raw)  # round half to even
    pos, mult = -n, mult
    if with_origin:
        pos = np.concatenate([[0.0], pos])
        mult = np.concatenate([[1.0], mult])
    return PointMeasure(pos, mult)


def lattice_measure(L: float) -> PointMeasure:
    """Atoms at -n with multiplicity round(sqrt(2/pi) n e^{sqrt2 n}) plus one atom at 0."""
    return _lattice(L, 1, True)


def violating_measure(L: float) -> PointMeasure:
    """Atoms at -n with multiplicity round(sqrt(2/pi) n^2 e^{sqrt2 n}); Cesaro statistic diverges."""
    return _lattice(L, 2, False)


def build_initial(spec: InitialSpec, seed: int = 0) -> PointMeasure:
    """Construct theta_0 according to ``spec.mode``."""
    if spec.mode == "poisson_sample":
        return sample_ppp(spec, seed)
    if spec.mode == "file":
        if not spec.path:
            raise ValueError("file mode needs a path")
        return read_measure(spec.path)
    rule = spec.descriptor.params.get("rule", "cesaro")
    return lattice_measure(spec.L) if rule == "cesaro" else violating_measure(spec.L)
