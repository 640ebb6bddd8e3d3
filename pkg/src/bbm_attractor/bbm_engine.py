"""Exact simulation of binary branching Brownian motion with critical drift.

Lineages carry exponential(1) clocks; between events positions receive exact
Gaussian increments, so there is no time discretization. A tree is grown
generation by generation with vectorized draws. Optional barrier culling runs
at fixed epochs (every ``cull_every`` time units). By memorylessness, restarting
clocks at an epoch does not change the law. Particles more than ``barrier_gap``
below the current maximum of their own tree are discarded, and the discarded
count and an upper bound on their derivative-martingale contribution are
recorded.

Every tree draws from its own counter-based stream keyed by
``(seed, replicate, atom, copy)``, so results do not depend on scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .errors import CulledBiasTooLarge, DegenerateZ, ParticleBudgetExceeded
from .point_measure import SQRT2, PointMeasure, _require_nonempty

LOG_COEF = 3.0 / (2.0 * SQRT2)


def m_of_t(t: float) -> float:
    """sqrt2 t - 3/(2 sqrt2) log_+ t."""
    if not t > 0:
        raise ValueError("m(t) needs t > 0")
    return SQRT2 * t - LOG_COEF * max(math.log(t), 0.0)


@dataclass(frozen=True)
class EvolveConfig:
    horizon: float
    barrier_gap: float | None = 30.0
    step_cap: int = 50_000_000
    seed: int = 0
    cull_every: float = 0.5
    z_tolerance: float = 1e-8

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.barrier_gap is not None and not self.barrier_gap > 0:
            raise ValueError("barrier_gap must be positive when set")
        if self.barrier_gap is None and self.horizon > math.log(self.step_cap) + 2.0:
            raise ValueError("horizon too long for an uncapped population; set barrier_gap")
        if not self.cull_every > 0:
            raise ValueError("cull_every must be positive")


@dataclass(frozen=True)
class ParticleCloud:
    """Live population at ``time`` in the uncentered frame."""

    time: float
    positions: np.ndarray
    culled_count: int = 0
    culled_z_bound: float = 0.0

    @property
    def culled_mass_flag(self) -> bool:
        return self.culled_count > 0

    def __len__(self) -> int:
        return int(self.positions.size)


def _advance(gen: np.random.Generator, pos: np.ndarray, dt: float, budget: int) -> np.ndarray:
    """Run every particle in ``pos`` forward by ``dt``."""
    done = []
    n_done = 0
    elapsed = np.zeros(pos.size)
    while pos.size:
        tau = gen.exponential(size=pos.size)
        z = gen.standard_normal(pos.size)
        finish = elapsed + tau >= dt
        step = np.where(finish, dt - elapsed, tau)
        pos = pos + np.sqrt(step) * z
        done.append(pos[finish])
        n_done += done[-1].size
        keep = ~finish
        pos = np.repeat(pos[keep], 2)
        elapsed = np.repeat(elapsed[keep] + tau[keep], 2)
        if n_done + pos.size > budget:
            raise ParticleBudgetExceeded(f"particle count exceeded step_cap={budget}")
    return np.concatenate(done) if done else np.empty(0)


def _grow(gen, horizon, gap, cull_every, budget, start=0.0):
    pos = np.array([start])
    culled = 0
    zbound = 0.0
    if gap is None:
        marks = [horizon]
    else:
        n = max(1, int(math.ceil(horizon / cull_every - 1e-12)))
        marks = [min(horizon, (k + 1) * cull_every) for k in range(n)]
    t0 = 0.0
    for mark in marks:
        pos = _advance(gen, pos, mark - t0, budget)
        t0 = mark
        if gap is not None and mark < horizon:
            low = pos < pos.max() - gap
            if np.any(low):
                gone = SQRT2 * mark - pos[low]
                culled += int(low.sum())
                zbound += float(np.sum(np.abs(gone) * np.exp(-SQRT2 * gone)))
                pos = pos[~low]
    return pos, culled, zbound


def simulate_bbm(cfg: EvolveConfig, replicate: int = 0) -> ParticleCloud:
    """One BBM tree from a single ancestor at the origin."""
    gen = rng_mod.stream(cfg.seed, rng_mod.STREAM_TREE, replicate, 0, 0)
    pos, culled, zb = _grow(gen, cfg.horizon, cfg.barrier_gap, cfg.cull_every, cfg.step_cap)
    return ParticleCloud(cfg.horizon, pos, culled, zb)


def simulate_ensemble(cfg: EvolveConfig, replicates: int, workers: int = 1, start: int = 0) -> list[ParticleCloud]:
    """Independent single-ancestor trees for replicates ``start..start+replicates-1``."""
    ids = range(start, start + replicates)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(simulate_bbm, [cfg] * replicates, ids, chunksize=max(1, replicates // (8 * workers))))
    return [simulate_bbm(cfg, r) for r in ids]


def evolve(eta: PointMeasure, cfg: EvolveConfig, replicate: int = 0, return_cloud: bool = False):
    """theta_t: every copy of every atom spawns an independent BBM, recentered by -sqrt2 t.

    With ``return_cloud`` the uncentered superposition is returned as a
    :class:`ParticleCloud` (culling counts summed over trees) alongside.
    """
    _require_nonempty(eta)
    total_copies = eta.total_mass()
    if total_copies * math.exp(min(cfg.horizon, 700.0)) > 20 * cfg.step_cap and cfg.barrier_gap is None:
        raise ParticleBudgetExceeded("expected population exceeds step_cap")
    if total_copies > cfg.step_cap:
        raise ParticleBudgetExceeded("initial multiplicity exceeds step_cap")
    chunks = []
    culled = 0
    zb = 0.0
    used = 0
    for i, (x, m) in enumerate(eta):
        for j in range(int(m)):
            gen = rng_mod.stream(cfg.seed, rng_mod.STREAM_TREE, replicate, i, j)
            pos, c, z = _grow(gen, cfg.horizon, cfg.barrier_gap, cfg.cull_every, cfg.step_cap - used, start=x)
            used += pos.size
            culled += c
            zb += z
            chunks.append(pos)
    raw = np.concatenate(chunks)
    theta = PointMeasure(raw - SQRT2 * cfg.horizon)
    if return_cloud:
        return theta, ParticleCloud(cfg.horizon, raw, culled, zb)
    return theta


def derivative_martingale(cloud: ParticleCloud, tol: float = 1e-8) -> float:
    """Z_t = sum (sqrt2 t - chi) exp(-sqrt2 (sqrt2 t - chi)) over live particles."""
    if not cloud.time > 0:
        raise ValueError("derivative martingale needs t > 0")
    if cloud.culled_z_bound > tol:
        raise CulledBiasTooLarge(f"culled contribution bound {cloud.culled_z_bound:.3g} exceeds {tol:.3g}")
    gap = SQRT2 * cloud.time - cloud.positions
    return float(np.sum(gap * np.exp(-SQRT2 * gap)))


def extremal_approximant(cloud: ParticleCloud, centering: str = "m_t", tol: float = 1e-8) -> PointMeasure:
    """The cloud seen from m(t), optionally also shifted by -(1/sqrt2) log Z_t."""
    if len(cloud) == 0:
        raise ValueError("empty particle cloud")
    shift = m_of_t(cloud.time)
    if centering == "m_t_plus_logZ":
        z = derivative_martingale(cloud, tol)
        if not z > 0:
            raise DegenerateZ(f"Z_t = {z:.3g} is not positive")
        shift += math.log(z) / SQRT2
    elif centering != "m_t":
        raise ValueError("centering must be 'm_t' or 'm_t_plus_logZ'")
    return PointMeasure(cloud.positions - shift)
