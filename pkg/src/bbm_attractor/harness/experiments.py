"""Experiment runners and report assembly.

``run(cfg)`` executes one experiment from a resolved configuration and writes
``report.json``, one CSV per series, and ``config.resolved.toml`` into the
output directory. Wall-clock timings are important for the acceptance
budgets, but they would break byte-identical reruns, so they go into a
separate ``timing.json``.
"""
from __future__ import annotations

import filecmp
import json
import logging
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .. import __version__
from .. import rng as rng_mod
from ..bbm_engine import EvolveConfig, evolve
from ..doa_criteria import TARGETS, stat_series
from ..errors import InsufficientReplicates
from ..fkpp_solver import GridParams, InitialProfile, c_of_f, front_trajectory, solve, traveling_wave
from ..initial_conditions import InitialSpec, build_initial
from ..point_measure import Staircase, abk, lattice, max_point, modulated, power_exp
from ..tauberian import EnsembleSampler, ParetoPowerSampler, PowerSampler, hlk_equivalence_report, kronecker_check
from . import acceptance
from .config import config_hash, dumps
from .stats import conv_in_prob_test, summary_quantiles

log = logging.getLogger(__name__)

REPORT_ONLY = {"evolve", "fkpp"}

_quantiles = {
    "type": "object",
    "required": ["q05", "q25", "q50", "q75", "q95"],
    "additionalProperties": {"type": "number"},
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["experiment", "provenance", "config", "series", "verdicts", "passed", "report_only"],
    "properties": {
        "experiment": {"type": "string"},
        "provenance": {
            "type": "object",
            "required": ["config_hash", "seed", "code_version"],
            "properties": {"config_hash": {"type": "string"}, "seed": {"type": "integer"},
                           "code_version": {"type": "string"}},
        },
        "config": {"type": "object"},
        "series": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["file", "name"],
                "properties": {"file": {"type": "string"}, "name": {"type": "string"},
                               "quantiles": {"type": "object", "additionalProperties": _quantiles}},
            },
        },
        "verdicts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "test", "tolerance", "passed"],
                "properties": {"name": {"type": "string"}, "test": {"type": "string"}, "passed": {"type": "boolean"}},
            },
        },
        "passed": {"type": "boolean"},
        "report_only": {"type": "boolean"},
        "criteria": {"type": "array"},
    },
}


def _clean(obj):
    """Make ``obj`` strict-JSON safe: numpy scalars unwrapped, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


@dataclass
class Outcome:
    experiment: str
    cfg: dict
    series: list = field(default_factory=list)  # (name, Table, quantiles)
    verdicts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def report_only(self) -> bool:
        return self.experiment in REPORT_ONLY

    @property
    def passed(self) -> bool:
        return self.report_only or (bool(self.verdicts) and all(v["passed"] for v in self.verdicts))

    def add_series(self, name: str, table: acceptance.Table, quantiles: dict | None = None) -> None:
        self.series.append((name, table, quantiles or {}))

    def report(self) -> dict:
        rep = {
            "experiment": self.experiment,
            "provenance": {"config_hash": config_hash(self.cfg), "seed": int(self.cfg["seed"]),
                           "code_version": __version__},
            "config": self.cfg,
            "series": [{"name": n, "file": f"{n}.csv", "quantiles": q} for n, _, q in self.series],
            "verdicts": self.verdicts,
            "passed": self.passed,
            "report_only": self.report_only,
            **self.extra,
        }
        if self.criteria:
            rep["criteria"] = self.criteria
        return _clean(rep)


def write_outputs(out: Outcome, out_dir) -> dict:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, table, _ in out.series:
        table.to_csv(d / f"{name}.csv")
    rep = out.report()
    jsonschema.validate(rep, REPORT_SCHEMA)
    (d / "report.json").write_text(json.dumps(rep, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    (d / "config.resolved.toml").write_text(dumps(out.cfg), encoding="utf-8")
    (d / "timing.json").write_text(json.dumps(_clean(out.timing), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return rep


# --------------------------------------------------------------------------
# Shared pieces
# --------------------------------------------------------------------------


def initial_spec(cfg: dict) -> InitialSpec:
    ini = cfg["initial"]
    kind = ini["kind"]
    if kind == "abk":
        return InitialSpec(abk(), L=ini["L"])
    if kind == "modulated":
        return InitialSpec(modulated(ini["alpha"], ini["beta"]), L=ini["L"])
    if kind == "power_exp":
        return InitialSpec(power_exp(ini["p"], ini["c"], ini["q"]), L=ini["L"])
    if kind in ("lattice", "violating"):
        rule = "cesaro" if kind == "lattice" else "violating"
        return InitialSpec(lattice(rule), L=ini["L"], mode="deterministic_lattice")
    return InitialSpec(abk(), mode="file", path=ini["path"])


def is_deterministic(cfg: dict) -> bool:
    return cfg["initial"]["kind"] in ("lattice", "violating", "file")


def replicate_seed(cfg: dict, r: int) -> int:
    """Counter-based split: replicate r never depends on how many others run."""
    return rng_mod.child_seed(cfg["seed"], r)


def initial_ensemble(cfg: dict) -> list:
    spec = initial_spec(cfg)
    n = 1 if is_deterministic(cfg) else cfg["replicates"]
    return [build_initial(spec, replicate_seed(cfg, r)) for r in range(n)]


_GRID_OF = {"cesaro": "y", "cubic": "y", "tightness": "lam", "r_stat": "s", "probe": "s"}


def _stat_grid(cfg: dict, statistic: str) -> list:
    g = sorted(float(v) for v in cfg["grids"][_GRID_OF[statistic]])
    if statistic == "cesaro":
        g = [v for v in g if v > 1]
    return g


def series_and_verdicts(out: Outcome, ensemble: list, prefix: str, window: float | None,
                        deterministic: bool) -> None:
    crit = out.cfg["criteria"]
    for statistic in crit["statistics"]:
        grid = _stat_grid(out.cfg, statistic)
        if not grid:
            continue
        s = stat_series(statistic, ensemble, grid, window=window)
        q = {repr(p): summary_quantiles(s.column(j)) for j, p in enumerate(grid)}
        name = f"{prefix}{statistic}"
        out.add_series(name, acceptance.Table.from_series(name, s), q)
        target = TARGETS[statistic]
        if target is None or len(grid) < 3:
            continue
        # Columns ordered toward the limit: growing y and s, shrinking lam.
        vals = s.values[:, ::-1] if statistic == "tightness" else s.values
        eps = crit["eps"] * target if crit["relative"] else crit["eps"]
        try:
            v = conv_in_prob_test(vals, target, eps, deterministic=deterministic)
        except InsufficientReplicates as exc:
            v = {"test": "conv_in_prob_test", "target": target, "eps": eps, "passed": False,
                 "label": "inconclusive", "error": str(exc)}
        v.update(name=name, tolerance=eps, truncation_flags=s.flags)
        out.verdicts.append(v)


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def run_evolve(cfg: dict) -> Outcome:
    out = Outcome("evolve", cfg)
    ev = cfg["evolve"]
    gap = None if ev["barrier_gap"] == "none" else float(ev["barrier_gap"])
    ecfg = EvolveConfig(ev["horizon"], barrier_gap=gap, step_cap=ev["step_cap"], seed=cfg["seed"],
                        cull_every=ev["cull_every"])
    evolved, rows = [], []
    for r, eta in enumerate(initial_ensemble(cfg)):
        th, cloud = evolve(eta, ecfg, replicate=r, return_cloud=True)
        evolved.append(th)
        rows.append((r, max_point(eta), max_point(th), th.total_mass(), cloud.culled_count))
    out.add_series("evolve_summary", acceptance.Table(
        "evolve_summary", ("replicate_id", "max_initial", "max_evolved", "mass_evolved", "culled"), rows),
        {"max_evolved": summary_quantiles([r[2] for r in rows])})
    series_and_verdicts(out, evolved, "evolved_", None, is_deterministic(cfg))
    return out


def run_criteria(cfg: dict) -> Outcome:
    out = Outcome("criteria", cfg)
    series_and_verdicts(out, initial_ensemble(cfg), "", float(cfg["initial"]["L"]), is_deterministic(cfg))
    return out


def _profile(cfg: dict) -> InitialProfile:
    fk = cfg["fkpp"]
    if fk["profile"] == "heaviside":
        return InitialProfile.heaviside()
    return InitialProfile.from_staircase(Staircase(tuple(tuple(p) for p in fk["staircase"])))


def run_fkpp(cfg: dict) -> Outcome:
    out = Outcome("fkpp", cfg)
    fk = cfg["fkpp"]
    phi = _profile(cfg)
    grid = GridParams(dx=fk["dx"], dt=fk["dt"])
    t = float(fk["t"])
    field_t = solve(phi, t, grid)
    out.add_series("fkpp_field", acceptance.Table("fkpp_field", ("x", "u"),
                                                  list(zip(field_t.x.tolist(), field_t.u.tolist()))))
    ts = sorted(v for v in fk["t_grid"] if v <= t)
    if len(ts) >= 3:
        tr = front_trajectory(phi, ts, grid)
        out.add_series("fkpp_front", acceptance.Table("fkpp_front", ("t", "x_half", "x_half_minus_m"),
                                                      list(zip(tr.t.tolist(), tr.x_half.tolist(),
                                                               tr.offset.tolist()))))
        out.extra["front_fit"] = {"speed": tr.fit[0], "log_coefficient": tr.fit[1], "intercept": tr.fit[2]}
    if phi.kind == "heaviside" and t >= 10:
        _, _, resid = traveling_wave(field_t)
        out.extra["wave_residual"] = resid
    if phi.kind == "staircase":
        c = c_of_f(phi, fk["c_of_f_r"], grid)
        out.extra["c_of_f"] = {"value": c.value, "raw": list(c.raw), "stable": c.stable, "r": c.r}
    return out


def run_tauberian(cfg: dict) -> Outcome:
    out = Outcome("tauberian", cfg)
    ta = cfg["tauberian"]
    rho, C = float(ta["rho"]), float(ta["C"])
    n = cfg["replicates"]
    if ta["sampler"] == "abk":
        sampler = EnsembleSampler(tuple(initial_ensemble({**cfg, "initial": {**cfg["initial"], "kind": "abk"}})))
    elif ta["sampler"] == "pareto":
        sampler = ParetoPowerSampler(rho, C)
    else:
        sampler, n = PowerSampler(rho, C / math.gamma(rho + 1.0)), 1
    rep = hlk_equivalence_report(sampler, rho, C, ta["lam"], ta["x"], n, seed=cfg["seed"], tol=ta["tol"])
    rows = []
    for i in range(rep.laplace_values.shape[0]):
        rows += [("laplace", l, i, float(rep.laplace_values[i, j])) for j, l in enumerate(rep.lam_grid)]
        rows += [("ratio", x, i, float(rep.ratio_values[i, j])) for j, x in enumerate(rep.x_grid)]
    out.add_series("hlk", acceptance.Table("hlk", ("side", "parameter", "replicate_id", "value"), rows))
    out.extra["hlk"] = rep.to_dict()
    ok = rep.verdict in ("supported", "equivalent (exact)")
    out.verdicts.append({"name": "hlk_equivalence", "test": "hlk_equivalence_report", "tolerance": ta["tol"],
                         "passed": ok, "label": rep.verdict, "sides": rep.sides})
    L = float(cfg["initial"]["L"])
    t_grid = [v for v in ta["t_grid"] if v <= L]
    if len(t_grid) >= 3:
        desc = modulated(ta["alpha"], ta["beta"])
        eta = build_initial(InitialSpec(desc, L=L), replicate_seed(cfg, 0))
        k = kronecker_check(eta, ta["alpha"], ta["beta"], t_grid, descriptor=desc)
        out.add_series("kronecker", acceptance.Table("kronecker", ("t", "N_t"), list(zip(k["t"], k["N"]))))
        out.extra["kronecker"] = k
        out.verdicts.append({"name": "kronecker_cauchy", "test": "tail envelope of N_t increments",
                             "tolerance": k["floor"], "passed": k["cauchy"]})
    return out


def _verify_once(cfg: dict, sc: acceptance.Scale, numbers: list) -> tuple[list, dict]:
    results = []
    for n in numbers:
        log.info("criterion %d: start", n)
        r = acceptance.run_criterion(n, sc, cfg["seed"])
        log.info("criterion %d: %s in %.1fs", n, "pass" if r.passed else "FAIL", r.elapsed)
        results.append(r)
    return results, {r.number: r.elapsed for r in results}


def _csv_files(d: Path) -> dict:
    return {p.name: p for p in sorted(d.glob("*.csv"))}


def run_verify(cfg: dict, out_dir) -> Outcome:
    out = Outcome("verify", cfg)
    sc = acceptance.SCALES[cfg["verify"]["scale"]]
    wanted = sorted(set(cfg["verify"]["criteria"]))
    core = [n for n in wanted if n != 14]
    results, timing = _verify_once(cfg, sc, core)
    for r in results:
        for t in r.tables:
            out.add_series(t.name, t, r.quantiles.get(t.name))
    if 14 in wanted:
        # Rerun the same criteria into a scratch directory and compare CSV bytes.
        start = time.perf_counter()
        first = Path(tempfile.mkdtemp(prefix="verify_a_"))
        for _, table, _ in out.series:
            table.to_csv(first / f"{table.name}.csv")
        again, _ = _verify_once(cfg, sc, core)
        second = Path(tempfile.mkdtemp(prefix="verify_b_"))
        for r in again:
            for t in r.tables:
                t.to_csv(second / f"{t.name}.csv")
        a, b = _csv_files(first), _csv_files(second)
        same = a.keys() == b.keys() and all(filecmp.cmp(a[k], b[k], shallow=False) for k in a)
        r14 = acceptance.CriterionResult(14, "determinism")
        r14.check("csv_bytes", "byte-identical CSVs across two runs", "exact", sorted(a), same and bool(a))
        r14.elapsed = time.perf_counter() - start
        results.append(r14)
        timing[14] = r14.elapsed
    for r in results:
        for c in r.checks:
            out.verdicts.append({**c, "name": f"c{r.number:02d}.{c['name']}"})
        limit = acceptance.TIME_LIMITS.get(r.number)
        if limit is not None:
            out.verdicts.append({"name": f"c{r.number:02d}.time_budget", "test": "wall clock within budget",
                                 "tolerance": limit, "passed": r.within_time})
        if r.error:
            out.verdicts.append({"name": f"c{r.number:02d}.error", "test": "criterion ran to completion",
                                 "tolerance": None, "passed": False, "error": r.error})
        out.criteria.append({"number": r.number, "title": r.title, "checks_passed": r.checks_passed,
                             "error": r.error, "files": [f"{t.name}.csv" for t in r.tables]})
    out.timing = {str(k): {"seconds": v, "limit": acceptance.TIME_LIMITS.get(k)} for k, v in timing.items()}
    return out


def run(cfg: dict, out_dir=None) -> tuple[dict, bool]:
    """Execute the experiment named in ``cfg``; returns (report, passed)."""
    out_dir = Path(out_dir or cfg["out"])
    exp = cfg["experiment"]
    start = time.perf_counter()
    if exp == "verify":
        outcome = run_verify(cfg, out_dir)
    else:
        outcome = {"evolve": run_evolve, "criteria": run_criteria, "fkpp": run_fkpp,
                   "tauberian": run_tauberian}[exp](cfg)
        outcome.timing = {"total": {"seconds": time.perf_counter() - start, "limit": None}}
    rep = write_outputs(outcome, out_dir)
    return rep, outcome.passed

