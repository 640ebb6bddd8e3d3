import math

import numpy as np
import pytest

from bbm_attractor.doa_criteria import CESARO_TARGET, CUBIC_TARGET, cesaro_stat, cubic_stat, tightness_stat
from bbm_attractor.errors import DescriptorMismatch, Divergent
from bbm_attractor.initial_conditions import InitialSpec, lattice_measure, sample_ppp
from bbm_attractor.point_measure import SQRT2, SQRT_2_OVER_PI, abk, modulated, power_exp
from bbm_attractor.tauberian import (EnsembleSampler, MonotoneFunction, ParetoPowerSampler, PowerSampler,
                                     compensator, hlk_equivalence_report, kronecker_check, kronecker_variance,
                                     laplace_stat, n_t, ratio_stat, riemann_lebesgue_avg)

LAM = [0.5, 0.1, 0.02, 0.005]
XS = [16.0, 100.0, 400.0, 1600.0]
KRON_T = [1.25, 2.5, 5.0, 10.0, 20.0, 40.0]


@pytest.fixture(scope="module")
def abk_ens():
    spec = InitialSpec(abk(), L=40.0)
    return tuple(sample_ppp(spec, 100 + s) for s in range(200))


class TestPowerKind:
    def test_gamma_value(self):
        G = MonotoneFunction.power(3.0)
        for lam in (0.01, 0.3, 2.0):
            assert laplace_stat(G, lam, 3.0) == pytest.approx(6.0, rel=1e-14)

    def test_lambda_doubling(self):
        G = MonotoneFunction.power(1.5, 2.0)
        a = laplace_stat(G, 0.07, 1.5)
        assert abs(laplace_stat(G, 0.14, 1.5) - a) <= 1e-12 * a

    def test_ratio(self):
        G = MonotoneFunction.power(3.0)
        assert ratio_stat(G, 5.0, 3.0) == 1.0
        small = [ratio_stat(G, x, 3.0) for x in (1e-8, 1e-4, 1e-1)]
        assert small == [1.0, 1.0, 1.0]

    def test_quadrature_path_matches_closed_form(self):
        G = MonotoneFunction.from_callable(lambda x: 2.0 * x**1.5)
        assert laplace_stat(G, 0.3, 1.5) == pytest.approx(2.0 * math.gamma(2.5), rel=1e-7)

    def test_divergent(self):
        with pytest.raises(Divergent):
            laplace_stat(MonotoneFunction.from_callable(math.exp), 0.5, 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            MonotoneFunction.power(0.0)
        with pytest.raises(ValueError):
            MonotoneFunction.atomic([-1.0], [1.0])
        with pytest.raises(ValueError):
            laplace_stat(MonotoneFunction.power(1.0), 0.0, 1.0)


class TestFromMeasure:
    def test_change_of_variables(self, abk_ens):
        for eta in abk_ens[:20]:
            G = MonotoneFunction.from_measure(eta)
            for lam in (0.5, 0.01):
                a, b = laplace_stat(G, lam, 1.5), tightness_stat(eta, lam)
                assert abs(a - b) <= 1e-10 * b

    def test_abk_mean_at_small_lambda(self, abk_ens):
        v = [laplace_stat(MonotoneFunction.from_measure(e), 0.01, 1.5) for e in abk_ens]
        assert abs(np.mean(v) / (SQRT2 / 4) - 1) <= 0.05

    def test_lattice_ratio_is_cubic(self):
        eta = lattice_measure(40.0)
        G = MonotoneFunction.from_measure(eta)
        assert ratio_stat(G, 900.0, 1.5) == pytest.approx(cubic_stat(eta, 30.0), rel=1e-12)

    @pytest.mark.xfail(strict=True, reason="the y=30 lattice Riemann sum sits 5.1% above the limit: "
                                          "1 + 3/(2y) + 1/(2y^2) = 1.0506")
    def test_lattice_ratio_within_three_percent(self):
        G = MonotoneFunction.from_measure(lattice_measure(40.0))
        assert abs(ratio_stat(G, 900.0, 1.5) / CUBIC_TARGET - 1) <= 0.03

    def test_monotone_and_zero_at_origin(self, abk_ens):
        G = MonotoneFunction.from_measure(abk_ens[0])
        vals = [G(x) for x in np.linspace(0, 1700, 300)]
        assert np.all(np.diff(vals) >= 0)
        assert G(-1.0) == 0.0


@pytest.mark.parametrize("rho", [1.0, 1.5, 3.0])
def test_abelian_direction_on_random_lattice(rho):
    rng = np.random.default_rng(int(10 * rho))
    k = np.arange(1, 200_001, dtype=np.float64)
    w = (k**rho - (k - 1) ** rho) * rng.uniform(0.5, 1.5, k.size)
    G = MonotoneFunction.atomic(k, w)
    v = ratio_stat(G, 1e5, rho)
    assert abs(ratio_stat(G, 5e4, rho) / v - 1) <= 0.01  # the ratio has stabilized
    assert abs(laplace_stat(G, 1e-4, rho) / (v * math.gamma(rho + 1)) - 1) <= 0.03


class TestHLKReport:
    def test_power_exact(self):
        for rho, C in ((3.0, 1.0), (1.5, 2.0)):
            rep = hlk_equivalence_report(PowerSampler(rho, C), rho, C * math.gamma(rho + 1), LAM, XS, 1)
            assert rep.verdict == "equivalent (exact)"
        bad = hlk_equivalence_report(PowerSampler(3.0, 1.0), 3.0, 1.0, LAM, XS, 1)
        assert bad.verdict == "not equivalent"

    def test_abk_both_sides(self, abk_ens):
        C = SQRT2 / 4
        rep = hlk_equivalence_report(EnsembleSampler(abk_ens), 1.5, C, LAM, XS, len(abk_ens), tol=0.1)
        assert rep.sides == {"laplace": "supported", "ratio": "supported"}
        for side in (rep.laplace_verdict, rep.ratio_verdict):
            f = side["fractions"]
            assert f[-1] < f[0]
        d = rep.to_dict()
        gamma52 = d["gamma_rho_plus_1"]
        assert gamma52 == pytest.approx(3 * math.sqrt(math.pi) / 4, rel=1e-14)
        assert gamma52 == pytest.approx(1.329340, abs=1e-6)
        # ratio target C / Gamma(5/2) is the cubic limit (1/3) sqrt(2/pi)
        assert C / gamma52 == pytest.approx(CUBIC_TARGET, rel=1e-14)

    def test_pareto_non_convergent(self):
        rep = hlk_equivalence_report(ParetoPowerSampler(1.5, SQRT2 / 4), 1.5, SQRT2 / 4, LAM, XS, 200, seed=3)
        assert rep.verdict == "non-convergent"
        assert rep.sides == {"laplace": "non-convergent", "ratio": "non-convergent"}

    def test_grid_span(self):
        with pytest.raises(ValueError):
            hlk_equivalence_report(PowerSampler(1.0), 1.0, 1.0, [0.5, 0.1, 0.05], XS, 1)


class TestKronecker:
    def test_riemann_lebesgue(self):
        v = [abs(riemann_lebesgue_avg(t, 0.5)) for t in (1e2, 1e3, 1e4)]
        assert v[0] > v[1] > v[2] and v[2] < 0.05

    def test_compensator_closed_form_at_alpha_zero(self):
        assert compensator(40.0, 0.0, 0.5) == pytest.approx(SQRT_2_OVER_PI * math.log(40.0), rel=1e-15)
        assert compensator(1.0, 1.0, 0.5) == 0.0

    def test_alpha_zero_cesaro_mean(self, abk_ens):
        y = 40.0
        c = np.array([cesaro_stat(e, y) for e in abk_ens])
        # E cesaro = (1/y) int_1^y sqrt(2/pi) dx = sqrt(2/pi) (y - 1) / y
        oracle = CESARO_TARGET * (y - 1) / y
        assert abs(c.mean() - oracle) <= 3 * c.std(ddof=1) / math.sqrt(c.size)

    @pytest.mark.xfail(strict=True, reason="at y=40 the expected value is (y-1)/y = 0.975 of the limit, "
                                          "so the 2% band is missed by bias alone")
    def test_alpha_zero_cesaro_within_two_percent(self, abk_ens):
        c = np.array([cesaro_stat(e, 40.0) for e in abk_ens])
        assert abs(c.mean() / CESARO_TARGET - 1) <= 0.02

    def test_variance_oracle(self):
        spec = InitialSpec(modulated(1.0, 0.5), L=40.0)
        comp = compensator(40.0, 1.0, 0.5)
        v = np.array([n_t(sample_ppp(spec, 2000 + s), 40.0, 1.0, 0.5) for s in range(1000)])
        oracle = kronecker_variance(1.0, 0.5)
        assert math.isfinite(oracle) and oracle > 0
        assert abs(v.var(ddof=1) / oracle - 1) <= 0.15
        assert comp > 0

    def test_cauchy_implies_cesaro(self):
        spec = InitialSpec(modulated(1.0, 0.5), L=40.0)
        good = []
        for s in range(100):
            k = kronecker_check(sample_ppp(spec, 3000 + s), 1.0, 0.5, KRON_T)
            assert np.all(np.diff(k["envelope"]) <= 0)
            good.append((not k["cauchy"]) or abs(k["cesaro_rel_err"]) <= 0.05)
        assert np.mean(good) >= 0.95

    def test_descriptor_mismatch(self):
        eta = sample_ppp(InitialSpec(modulated(1.0, 0.5), L=10.0), 0)
        with pytest.raises(DescriptorMismatch):
            kronecker_check(eta, 1.0, 0.5, KRON_T[:4], descriptor=modulated(0.5, 0.5))
        with pytest.raises(DescriptorMismatch):
            kronecker_check(eta, 1.0, 0.5, KRON_T[:4], descriptor=power_exp(0.0, 1.0, 1.0))
        ok = kronecker_check(eta, 0.0, 0.5, KRON_T[:4], descriptor=abk())
        assert len(ok["N"]) == 4

    def test_grid_validation(self):
        eta = sample_ppp(InitialSpec(abk(), L=10.0), 0)
        with pytest.raises(ValueError):
            kronecker_check(eta, 0.0, 0.5, [1.0, 2.0])
