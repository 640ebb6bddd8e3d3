import filecmp
import json
import time
from pathlib import Path

import jsonschema
import numpy as np
import pytest
import tomli
from scipy import stats

from bbm_attractor.doa_criteria import CESARO_TARGET, cesaro_stat
from bbm_attractor.errors import ConfigError, InsufficientReplicates
from bbm_attractor.harness import config as cfgmod
from bbm_attractor.harness.cli import main
from bbm_attractor.harness.experiments import REPORT_SCHEMA, initial_ensemble
from bbm_attractor.harness.stats import (conv_in_prob_test, exceedance, ks_two_sample, quantile_stability,
                                         summary_quantiles)
from bbm_attractor.initial_conditions import violating_measure

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestConfig:
    def test_defaults_filled(self, tmp_path):
        cfg = cfgmod.load(write(tmp_path, 'experiment = "criteria"\n'))
        assert cfg["replicates"] == 200 and cfg["initial"]["kind"] == "abk"
        assert cfg["grids"]["lam"] == [0.5, 0.1, 0.02]

    def test_type_error_has_field_and_line(self, tmp_path):
        text = 'experiment = "criteria"\n\n[initial]\nkind = "abk"\nL = "forty"\n'
        with pytest.raises(ConfigError) as exc:
            cfgmod.load(write(tmp_path, text))
        assert exc.value.field == "initial.L"
        assert exc.value.line == 5

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            cfgmod.load(write(tmp_path, 'experiment = "criteria"\nreplicate = 3\n'))
        assert "replicate" in str(exc.value)

    def test_missing_experiment(self, tmp_path):
        with pytest.raises(ConfigError):
            cfgmod.load(write(tmp_path, "seed = 1\n"))

    def test_grid_must_increase(self, tmp_path):
        text = 'experiment = "criteria"\n[grids]\ny = [10.0, 5.0, 20.0]\n'
        with pytest.raises(ConfigError) as exc:
            cfgmod.load(write(tmp_path, text))
        assert exc.value.field == "grids.y" and exc.value.line == 3

    def test_bad_toml_line(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            cfgmod.load(write(tmp_path, 'experiment = "criteria"\nseed = = 2\n'))
        assert exc.value.line == 2

    def test_overrides_and_roundtrip(self, tmp_path):
        cfg = cfgmod.load(write(tmp_path, 'experiment = "criteria"\n'), {"seed": 9, "replicates": None})
        assert cfg["seed"] == 9 and cfg["replicates"] == 200
        assert tomli.loads(cfgmod.dumps(cfg)) == cfg
        assert cfgmod.config_hash(cfg) == cfgmod.config_hash(json.loads(json.dumps(cfg)))

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.name)
    def test_shipped_configs_are_valid(self, path):
        cfgmod.load(path)

    def test_cli_exit_code_two(self, tmp_path, capsys):
        p = write(tmp_path, 'experiment = "criteria"\nreplicates = 0\n')
        assert main(["criteria", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "replicates" in capsys.readouterr().err

    def test_seed_split_is_prefix_stable(self):
        base = cfgmod.resolve({"experiment": "criteria", "initial": {"L": 5.0}, "replicates": 5})
        more = cfgmod.resolve({"experiment": "criteria", "initial": {"L": 5.0}, "replicates": 8})
        assert initial_ensemble(base) == initial_ensemble(more)[:5]


class TestConvInProb:
    def test_constant_samples(self):
        v = conv_in_prob_test(np.full((200, 3), 0.7), 0.7, 0.01)
        assert v["fractions"] == [0.0, 0.0, 0.0] and v["passed"] and v["label"] == "supported"

    def test_gaussian_fractions(self):
        rng = np.random.default_rng(0)
        n, sigma, eps, target = 2000, 1.0, 0.2, 3.0
        params = np.array([1.0, 4.0, 16.0, 64.0])
        vals = target + rng.normal(size=(n, params.size)) * sigma / np.sqrt(params)
        v = conv_in_prob_test(vals, target, eps)
        oracle = 2 * stats.norm.sf(eps * np.sqrt(params) / sigma)
        se = np.sqrt(oracle * (1 - oracle) / n)
        assert np.all(np.abs(np.array(v["fractions"]) - oracle) <= 3 * se + 1e-12)
        assert v["passed"]

    def test_violating_cesaro_fails(self):
        eta = violating_measure(40.0)
        vals = np.array([[cesaro_stat(eta, y) for y in (10.0, 20.0, 30.0, 40.0)]])
        v = conv_in_prob_test(vals, CESARO_TARGET, 0.05 * CESARO_TARGET, deterministic=True)
        assert v["fractions"] == [1.0, 1.0, 1.0, 1.0]
        assert not v["passed"] and v["label"] == "contradicted"

    def test_one_small_inversion_allowed(self):
        rng = np.random.default_rng(1)
        n = 400
        cols = [rng.random(n) < p for p in (0.5, 0.3, 0.31, 0.1)]
        v = conv_in_prob_test(np.column_stack(cols).astype(float), 0.0, 0.5)
        assert v["inversions"] == 1 and v["passed"]

    def test_insufficient(self):
        with pytest.raises(InsufficientReplicates):
            conv_in_prob_test(np.zeros((199, 3)), 0.0, 0.1)
        with pytest.raises(InsufficientReplicates):
            conv_in_prob_test(np.zeros((300, 2)), 0.0, 0.1)
        assert conv_in_prob_test(np.zeros((1, 3)), 0.0, 0.1, deterministic=True)["passed"]

    def test_pareto_false_pass_rate(self):
        rng = np.random.default_rng(5)
        target, eps = 1.0, 0.1
        passes = 0
        for _ in range(100):
            w = (1.0 - rng.random((200, 4))) ** -2.0  # Pareto(1/2) on [1, inf)
            vals = target + eps * rng.normal(size=(200, 4)) * w  # law does not depend on the column
            passes += conv_in_prob_test(vals, target, eps)["passed"]
        assert passes / 100 < 0.05

    def test_p_value(self):
        v = conv_in_prob_test(np.zeros((200, 3)), 0.0, 0.1)
        assert v["p_value"] == pytest.approx(0.8**200)

    def test_exceedance_is_strict(self):
        assert exceedance(np.array([[1.0, 0.75, 1.25, 1.5]]), 1.0, 0.25).tolist() == [0.0, 0.0, 0.0, 1.0]


class TestKS:
    def test_identical(self):
        a = np.random.default_rng(0).random(100)
        assert ks_two_sample(a, a) == (0.0, 1.0)

    def test_shifted_uniforms(self):
        rng = np.random.default_rng(1)
        d, _ = ks_two_sample(rng.random(1000), 0.5 + rng.random(1000))
        assert abs(d - 0.5) <= 0.05

    def test_null_calibration(self):
        rng = np.random.default_rng(2)
        ok = [ks_two_sample(rng.random(1000), rng.random(1000))[1] > 0.01 for _ in range(100)]
        assert np.mean(ok) >= 0.95

    def test_minimum_size(self):
        with pytest.raises(InsufficientReplicates):
            ks_two_sample(np.zeros(49), np.zeros(60))


def test_quantile_helpers():
    q = summary_quantiles(np.random.default_rng(3).normal(size=500))
    vals = [q[k] for k in ("q05", "q25", "q50", "q75", "q95")]
    assert vals == sorted(vals)
    t = quantile_stability(np.column_stack([np.ones(50), 1.1 * np.ones(50)]))
    assert t["tight"] and t["variation"] == pytest.approx(0.1)
    assert not quantile_stability(np.column_stack([np.ones(50), 2 * np.ones(50)]))["tight"]


class TestCli:
    def _run(self, name, out, *extra):
        exp = tomli.loads((CONFIGS / name).read_text())["experiment"]
        return main([exp, "--config", str(CONFIGS / name), "--out", str(out), *extra])

    def _report(self, out):
        rep = json.loads((out / "report.json").read_text())
        jsonschema.validate(rep, REPORT_SCHEMA)
        return rep

    def test_smoke_verify(self, tmp_path):
        start = time.perf_counter()
        rc = self._run("smoke.toml", tmp_path)
        assert time.perf_counter() - start < 60
        rep = self._report(tmp_path)
        assert rc == (0 if rep["passed"] else 1)
        assert {c["number"] for c in rep["criteria"]} == set(range(1, 15))
        assert (tmp_path / "config.resolved.toml").exists() and (tmp_path / "timing.json").exists()
        for v in rep["verdicts"]:
            assert "test" in v and "tolerance" in v

    def test_lattice_cesaro_passes(self, tmp_path):
        assert self._run("lattice_criteria.toml", tmp_path) == 0
        rep = self._report(tmp_path)
        assert [v["name"] for v in rep["verdicts"]] == ["cesaro"] and rep["passed"]

    def test_byte_identical_outputs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            self._run("abk_criteria.toml", d, "--replicates", "200")
        names = sorted(p.name for p in a.glob("*.csv"))
        assert names and names == sorted(p.name for p in b.glob("*.csv"))
        assert all(filecmp.cmp(a / n, b / n, shallow=False) for n in names)
        ra, rb = (json.loads((d / "report.json").read_text()) for d in (a, b))
        ra["config"].pop("out"), rb["config"].pop("out")
        assert ra["verdicts"] == rb["verdicts"] and ra["series"] == rb["series"]
        c = tmp_path / "c"
        self._run("abk_criteria.toml", c, "--seed", "99")
        assert (c / "cesaro.csv").read_bytes() != (a / "cesaro.csv").read_bytes()

    def test_report_only_exit_zero(self, tmp_path):
        assert self._run("evolve_dirac_lattice.toml", tmp_path) == 0
        rep = self._report(tmp_path)
        assert rep["report_only"] and rep["passed"]

    def test_provenance(self, tmp_path):
        self._run("lattice_criteria.toml", tmp_path)
        rep = self._report(tmp_path)
        resolved = tomli.loads((tmp_path / "config.resolved.toml").read_text())
        assert rep["provenance"]["config_hash"] == cfgmod.config_hash(resolved)
        assert rep["config"] == json.loads(json.dumps(resolved))

    def test_runtime_error_exit_one(self, tmp_path):
        p = write(tmp_path, 'experiment = "criteria"\n[initial]\nkind = "lattice"\nL = 80.0\n')
        assert main(["criteria", "--config", str(p), "--out", str(tmp_path / "o")]) == 1

    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["plot", "--config", "x.toml"])
