import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from bbm_attractor.errors import EmptyMeasure
from bbm_attractor.point_measure import (
    SQRT2, Alpha, IndicatorGeq, Membership, PointMeasure, Staircase, StepHab, Tent, abk, custom, d2_distance,
    dumps_measure, integrate, lattice, loads_measure, m2_membership, max_point, modulated, power_exp, read_measure,
    reflect, translate, vague_tent, write_measure)

atoms = st.lists(
    st.tuples(st.floats(-20, 5, allow_nan=False), st.integers(1, 5)),
    min_size=1, max_size=8,
)


def measure(a):
    return PointMeasure([p for p, _ in a], [float(m) for _, m in a])


class TestConstruction:
    def test_sorted_descending_and_merged(self):
        eta = PointMeasure([-1.0, 2.0, -1.0], [1.0, 3.0, 2.0])
        assert eta.positions.tolist() == [2.0, -1.0]
        assert eta.multiplicities.tolist() == [3.0, 3.0]

    def test_immutable_arrays(self):
        eta = PointMeasure.dirac(0.0)
        with pytest.raises(ValueError):
            eta.positions[0] = 1.0

    @pytest.mark.parametrize("m", [0.0, -1.0, 1.5, float("nan")])
    def test_bad_multiplicity(self, m):
        with pytest.raises(ValueError):
            PointMeasure([0.0], [m])

    def test_nonfinite_position(self):
        with pytest.raises(ValueError):
            PointMeasure([math.inf])

    def test_empty_is_representable_but_rejected(self):
        e = PointMeasure.empty()
        assert e.is_empty
        for op in (max_point, reflect, lambda x: integrate(IndicatorGeq(0.0), x), lambda x: translate(x, 1.0)):
            with pytest.raises(EmptyMeasure):
                op(e)
        with pytest.raises(EmptyMeasure):
            d2_distance(e, PointMeasure.dirac(0.0))
        with pytest.raises(EmptyMeasure):
            m2_membership(e)

    def test_no_epsilon_merging(self):
        eta = PointMeasure([0.0, 1e-300])
        assert len(eta) == 2


class TestTestFunctions:
    def test_alpha_boundary(self):
        assert integrate(Alpha(1), PointMeasure.dirac(-1.0)) == pytest.approx(0.367879, abs=1e-6)

    def test_alpha_linear_piece(self):
        assert integrate(Alpha(2), PointMeasure.dirac(-0.5)) == pytest.approx(0.303265, abs=1e-6)

    def test_indicator(self):
        assert integrate(IndicatorGeq(0.0), PointMeasure.dirac(2.0, -5.0)) == 1.0

    @pytest.mark.parametrize("k", [1, 2, 7, 60])
    def test_alpha_bounds_and_continuity(self, k):
        a = Alpha(k)
        x = np.linspace(-30, 5, 7001)
        v = a(x)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(v[x >= 0] == 0)
        eps = 1e-9
        assert a(np.array([-1 - eps]))[0] == pytest.approx(a(np.array([-1 + eps]))[0], abs=1e-8)
        assert a(np.array([-eps]))[0] == pytest.approx(0.0, abs=1e-8)

    def test_staircase_matches_sum(self):
        f = Staircase(((1.0, 0.0), (0.5, -2.0)))
        assert f(np.array([-3.0, -1.0, 0.0, 4.0])).tolist() == [0.0, 0.5, 1.5, 1.5]
        assert Staircase().is_zero

    def test_staircase_rejects_nonpositive_weights(self):
        with pytest.raises(ValueError):
            Staircase(((0.0, 1.0),))

    def test_shifted(self):
        f = Staircase(((1.0, 0.0),))
        x = np.linspace(-3, 3, 61)
        assert np.array_equal(f.shifted(0.7)(x), f(x - 0.7))

    def test_step_and_tent(self):
        assert StepHab(-1.0, 1.0)(np.array([-1.0, 1.0])).tolist() == [1.0, 0.0]
        assert Tent(0.0, 0.5)(np.array([0.0, 0.25, 0.5])).tolist() == [1.0, 0.5, 0.0]

    @given(atoms, st.floats(0.1, 3), st.floats(0.1, 3))
    @settings(max_examples=60, deadline=None)
    def test_integrate_linear_and_additive(self, a, c1, c2):
        eta = measure(a)
        f = Staircase(((c1, -1.0),))
        g = Staircase(((c2, 0.5),))
        assert integrate(f + g, eta) == pytest.approx(integrate(f, eta) + integrate(g, eta), rel=1e-12)
        other = PointMeasure.dirac(-3.0, 1.0)
        assert integrate(f, eta + other) == pytest.approx(integrate(f, eta) + integrate(f, other), rel=1e-12)


class TestMaxReflectTranslate:
    def test_examples(self):
        assert max_point(PointMeasure([3.0, -1.0], [1.0, 2.0])) == 3.0
        assert max_point(PointMeasure.dirac(-7.0)) == -7.0
        assert reflect(PointMeasure.dirac(-3.0)) == PointMeasure.dirac(3.0)
        assert reflect(PointMeasure.dirac(1.0, -2.0)) == PointMeasure.dirac(2.0, -1.0)

    @given(atoms, st.floats(-10, 10, allow_nan=False))
    @settings(max_examples=80, deadline=None)
    def test_translation_equivariance_and_involution(self, a, shift):
        eta = measure(a)
        assert max_point(translate(eta, shift)) == max_point(eta) + shift
        assert reflect(reflect(eta)) == eta


class TestD2:
    def test_identity(self):
        eta = PointMeasure([0.3, -2.0], [2.0, 1.0])
        assert d2_distance(eta, eta).value == 0.0

    def test_max_term_dominates(self):
        assert d2_distance(PointMeasure.dirac(0.0), PointMeasure.dirac(1.0)).value >= 1.0

    def test_series_against_direct_summation(self):
        e1, e2 = PointMeasure.dirac(0.0), PointMeasure.dirac(0.0, -1.0)
        d = d2_distance(e1, e2, K=60)
        alpha = sum(2.0**-k * min(math.exp(-1.0 / k), 1.0) for k in range(1, 61))
        vague = 0.0
        for k in range(1, 61):
            h = vague_tent(k)
            vague += 2.0**-k * min(abs(float(h(np.array([-1.0]))[0])), 1.0)
        assert d.alpha_series == pytest.approx(alpha, rel=1e-14)
        assert d.value == pytest.approx(vague + alpha, rel=1e-14)
        assert d.truncation_error == 2.0**-59

    def test_tent_enumeration_starts_at_origin(self):
        assert vague_tent(1) == Tent(0.0, 1.0)
        centers = {vague_tent(k).center for k in range(1, 200)}
        assert {0.0, 0.5, -0.5, 1.0, -1.0} <= centers

    @given(atoms, atoms, atoms)
    @settings(max_examples=40, deadline=None)
    def test_metric_axioms(self, a, b, c):
        e1, e2, e3 = measure(a), measure(b), measure(c)
        d12 = d2_distance(e1, e2).value
        assert d12 == d2_distance(e2, e1).value
        bound = d2_distance(e1, e2).truncation_error
        assert d2_distance(e1, e3).value <= d12 + d2_distance(e2, e3).value + bound
        assert (d12 == 0.0) == (e1 == e2)


class TestMembership:
    def test_superquadratic_density_is_excluded(self):
        eps = 0.1
        d = custom(lambda x: np.exp(np.abs(x) ** (2 + eps)), tail=(0.0, 1.0, 2 + eps))
        assert m2_membership(d) is Membership.NONMEMBER

    def test_abk_member_and_gaussian_moments_finite(self):
        assert m2_membership(abk()) is Membership.MEMBER
        for lam in (1e-3, 0.01, 0.1, 1.0, 10.0):
            val, _ = sp_integrate.quad(lambda x: (-x) * math.exp(-lam * x * x - SQRT2 * x), -np.inf, 0)
            assert math.isfinite(val)

    def test_finite_measure_member(self):
        assert m2_membership(PointMeasure.dirac(-4.0)) is Membership.MEMBER

    def test_undecided_without_tail(self):
        assert m2_membership(custom(lambda x: np.ones_like(x))) is Membership.UNDECIDED

    @pytest.mark.parametrize("c,q,expect", [(1.0, 2.0, "nonmember"), (1.0, 1.9, "member"),
                                            (-1.0, 3.0, "member"), (0.0, 4.0, "member")])
    def test_power_exp_rule(self, c, q, expect):
        assert m2_membership(power_exp(0.0, c, q)).value == expect

    def test_descriptor_families(self):
        assert m2_membership(modulated(1.0, 0.5)) is Membership.MEMBER
        assert m2_membership(lattice("violating")) is Membership.MEMBER


class TestJson:
    def test_roundtrip(self, tmp_path):
        eta = PointMeasure([0.1, -3.25, -7.0], [1.0, 4.0, 2.0**60])
        write_measure(eta, tmp_path / "m.json")
        assert read_measure(tmp_path / "m.json") == eta
        assert loads_measure(dumps_measure(eta)) == eta

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            loads_measure(json.dumps({"atoms": [[-1.0, 1], [0.0, 1]]}))
