"""Tests for the threshold search (control_mfdp) and the p-value transforms."""

from __future__ import annotations

import numpy as np
import pytest

from artifact import (
    HypothesisShape,
    NullDensitySpec,
    PValueVector,
    StatisticVector,
    build_profile,
    control_mfdp,
    directional_pvalues,
    equivalence_pvalues,
    read_pvalues_csv,
    write_pvalues_csv,
)

DIR = HypothesisShape.DIRECTIONAL
EQU = HypothesisShape.EQUIVALENCE


def _sv(stats, margins, shape=DIR):
    return StatisticVector(statistics=np.asarray(stats, dtype=float), margins=margins, shape=shape)


# ---------------------------------------------------------------------------
# control_mfdp
# ---------------------------------------------------------------------------


class TestControlMfdp:
    def test_directional_worked_example(self):
        # grid is {0, 3, 3.5, 4, 5}; the estimate exceeds 0.4 only at t = 3
        res = control_mfdp(_sv([5.0, 4.0, 3.0, -3.5], 0.0), gamma=0.4)
        assert res.s == 3.0
        assert res.s_plus == 3.5
        np.testing.assert_array_equal(res.rejected, [0, 1])
        assert res.r == 2
        assert res.v_tilde == 0
        assert res.fdp_hat == 0.0

    def test_never_exceeding_rejects_at_zero(self):
        # T = 0 sits exactly on the margin: strictness keeps it out of both
        # the rejection set and the mirror count, so the estimate is 0 everywhere
        res = control_mfdp(_sv([5.0, 6.0, 0.0], 0.0), gamma=0.4)
        assert res.s is None
        assert res.s_plus == 0.0
        np.testing.assert_array_equal(res.rejected, [0, 1])

    def test_equivalence_worked_example(self):
        res = control_mfdp(_sv([0.2, -0.3, 2.5, 1.0], 2.0, shape=EQU), gamma=0.3)
        # FDP~(0) = 1/3 > 0.3; the next grid point 0.5 clears the mirror count
        assert res.s == 0.0
        assert res.s_plus == 0.5
        np.testing.assert_array_equal(res.rejected, [0, 1, 3])
        assert res.fdp_hat == 0.0

    def test_gamma_zero_demands_empty_mirror(self):
        res = control_mfdp(_sv([5.0, 4.0, 3.0, -3.5], 0.0), gamma=0.0)
        assert res.v_tilde == 0
        assert res.fdp_hat == 0.0
        assert res.s == 3.0 and res.s_plus == 3.5

    def test_gamma_validation(self):
        sv = _sv([1.0], 0.0)
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError, match="gamma"):
                control_mfdp(sv, gamma=bad)

    def test_everything_mirrored_rejects_nothing(self):
        # all statistics negative: R(t) = 0 on the whole grid
        res = control_mfdp(_sv([-1.0, -2.0], 0.0), gamma=0.1)
        assert res.s is None
        assert res.s_plus == 0.0
        assert res.rejected.size == 0
        assert res.r == 0

    def test_single_hypothesis(self):
        res = control_mfdp(_sv([4.0], 0.0), gamma=0.2)
        assert res.s is None and res.s_plus == 0.0
        np.testing.assert_array_equal(res.rejected, [0])


def _random_instance(rng):
    m = int(rng.integers(2, 40))
    if rng.random() < 0.5:
        stats = rng.normal(scale=2.0, size=m)
        return _sv(stats, float(rng.uniform(-0.5, 0.5)), shape=DIR)
    return _sv(rng.normal(scale=2.0, size=m), float(rng.uniform(0.5, 3.0)), shape=EQU)


def _fdp_at(sv, t):
    profile = build_profile(sv)
    r = profile.r(t)
    return min(r, profile.r_minus(t)) / max(r, 1)


class TestControlInvariants:
    def test_threshold_pair_lies_on_grid(self):
        rng = np.random.default_rng(424242)
        for _ in range(200):
            sv = _random_instance(rng)
            gamma = float(rng.uniform(0.0, 0.9))
            res = control_mfdp(sv, gamma)
            grid = build_profile(sv).thresholds
            assert res.s_plus in grid
            assert res.fdp_hat <= gamma
            if res.s is None:
                assert res.s_plus == 0.0
            else:
                assert res.s in grid
                assert res.s < res.s_plus
                # the search point never runs off the top of the grid
                assert res.s_plus < grid[-1] or grid.size == 1
                assert _fdp_at(sv, res.s) > gamma

    def test_matches_dense_threshold_scan(self):
        # s+ is the sup of the exceeding region: every probe at or beyond it
        # satisfies the target, and some probe just below s+ violates it
        rng = np.random.default_rng(3117)
        for _ in range(100):
            sv = _random_instance(rng)
            gamma = float(rng.uniform(0.0, 0.9))
            res = control_mfdp(sv, gamma)
            grid = build_profile(sv).thresholds
            probes = np.concatenate([grid, (grid[:-1] + grid[1:]) / 2, [grid[-1] + 1.0]])
            for t in probes:
                if t >= res.s_plus:
                    assert _fdp_at(sv, float(t)) <= gamma
            if res.s is not None:
                assert _fdp_at(sv, res.s) > gamma

    def test_rejections_nested_in_gamma(self):
        rng = np.random.default_rng(9090)
        for _ in range(150):
            sv = _random_instance(rng)
            g1, g2 = sorted(rng.uniform(0.0, 0.9, size=2))
            lo = control_mfdp(sv, float(g1))
            hi = control_mfdp(sv, float(g2))
            assert lo.s_plus >= hi.s_plus
            assert set(lo.rejected.tolist()) <= set(hi.rejected.tolist())


# ---------------------------------------------------------------------------
# Null density models
# ---------------------------------------------------------------------------


def _mpmath_normal_sf(x):
    import mpmath

    mpmath.mp.dps = 40
    return float(1 - mpmath.ncdf(x))


class TestNullDensitySpec:
    def test_standard_normal_tail_values(self):
        null = NullDensitySpec.standard_normal()
        for x in (0.0, 1.0, 1.96, 2.0, 5.0):
            assert null.sf_at(x) == pytest.approx(_mpmath_normal_sf(x), rel=1e-13)
            assert null.cdf_at(x) == pytest.approx(1 - _mpmath_normal_sf(x), rel=1e-13)

    def test_scaled_normal_matches_rescaled_standard(self):
        scaled = NullDensitySpec.scaled_normal(2.0)
        std = NullDensitySpec.standard_normal()
        assert scaled.sf_at(3.92) == std.sf_at(1.96)
        assert scaled.cdf_at(-1.0) == std.cdf_at(-0.5)

    def test_student_t_matches_scipy_distribution(self):
        from scipy import stats as sps

        null = NullDensitySpec.student_t(5.0)
        xs = np.array([-3.0, -0.5, 0.0, 1.7, 4.0])
        np.testing.assert_allclose(null.cdf_at(xs), sps.t.cdf(xs, df=5), rtol=1e-12)
        np.testing.assert_allclose(null.sf_at(xs), sps.t.sf(xs, df=5), rtol=1e-12)

    def test_user_cdf_route(self):
        null = NullDensitySpec.from_cdf(lambda x: np.clip((x + 1) / 2, 0, 1))  # uniform(-1, 1)
        assert null.cdf_at(0.0) == 0.5
        assert null.sf_at(0.5) == pytest.approx(0.25)

    def test_parameter_validation(self):
        with pytest.raises(ValueError, match="sigma"):
            NullDensitySpec.scaled_normal(0.0)
        with pytest.raises(ValueError, match="nu"):
            NullDensitySpec.student_t(-1.0)
        with pytest.raises(TypeError, match="callable"):
            NullDensitySpec.from_cdf(0.5)

    def test_direct_construction_rejects_unknown_family(self):
        # fails at construction, not later inside cdf_at/sf_at
        with pytest.raises(ValueError, match="unknown null density family"):
            NullDensitySpec("normal")
        with pytest.raises(TypeError, match="callable cdf"):
            NullDensitySpec("user")


# ---------------------------------------------------------------------------
# P-value transforms
# ---------------------------------------------------------------------------


class TestDirectionalPvalues:
    def test_boundary_statistic_is_uniform_half(self):
        pv = directional_pvalues(_sv([2.0], 2.0), NullDensitySpec.standard_normal())
        assert pv.values[0] == 0.5

    def test_reference_values(self):
        pv = directional_pvalues(_sv([1.96, 2.0, 0.0], 0.0), NullDensitySpec.standard_normal())
        assert pv.values[0] == pytest.approx(_mpmath_normal_sf(1.96), rel=1e-13)
        assert pv.values[1] == pytest.approx(0.02275013194817921, rel=1e-13)
        assert pv.values[2] == 0.5

    def test_margin_shifts_the_reference_point(self):
        null = NullDensitySpec.standard_normal()
        shifted = directional_pvalues(_sv([3.0], 1.0), null)
        centred = directional_pvalues(_sv([2.0], 0.0), null)
        assert shifted.values[0] == centred.values[0]

    def test_rejects_equivalence_input(self):
        with pytest.raises(ValueError, match="directional"):
            directional_pvalues(_sv([1.0], 2.0, shape=EQU), NullDensitySpec.standard_normal())


class TestEquivalencePvalues:
    def test_boundary_statistic_is_uniform_half(self):
        pv = equivalence_pvalues(_sv([2.0, -2.0], 2.0, shape=EQU), NullDensitySpec.standard_normal())
        np.testing.assert_allclose(pv.values, [0.5, 0.5])

    def test_symmetric_in_the_statistic(self):
        null = NullDensitySpec.standard_normal()
        plus = equivalence_pvalues(_sv([1.0], 2.0, shape=EQU), null)
        minus = equivalence_pvalues(_sv([-1.0], 2.0, shape=EQU), null)
        assert plus.values[0] == minus.values[0]
        assert plus.values[0] == pytest.approx(1 - _mpmath_normal_sf(-1.0), rel=1e-13)

    def test_centre_gets_the_smallest_value(self):
        null = NullDensitySpec.standard_normal()
        pv = equivalence_pvalues(_sv([0.0], 2.0, shape=EQU), null)
        assert pv.values[0] == pytest.approx(0.02275013194817921, rel=1e-13)

    def test_branches_agree_near_zero(self):
        null = NullDensitySpec.standard_normal()
        lo = equivalence_pvalues(_sv([-1e-9], 2.0, shape=EQU), null).values[0]
        hi = equivalence_pvalues(_sv([1e-9], 2.0, shape=EQU), null).values[0]
        assert lo == pytest.approx(hi, abs=1e-12)

    def test_rejects_directional_input(self):
        with pytest.raises(ValueError, match="equivalence"):
            equivalence_pvalues(_sv([1.0], 0.0), NullDensitySpec.standard_normal())


class TestPvalueVectorAndCsv:
    def test_range_validation(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            PValueVector(values=np.array([0.5, 1.5]), shape=DIR)
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            PValueVector(values=np.array([np.nan]), shape=DIR)

    def test_csv_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        values = rng.uniform(size=64)
        values[0] = 0.0
        values[1] = 1.0
        values[2] = 0.02275013194817921
        pv = PValueVector(values=values, shape=DIR)
        path = tmp_path / "pvals.csv"
        write_pvalues_csv(pv, path)
        back = read_pvalues_csv(path)
        np.testing.assert_array_equal(back, values)

    def test_read_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("idx,p\n0,0.5\n")
        with pytest.raises(ValueError, match="header"):
            read_pvalues_csv(path)

    def test_read_rejects_malformed_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("index,pvalue\n0,not-a-number\n")
        with pytest.raises(ValueError, match="malformed"):
            read_pvalues_csv(path)

    def test_read_orders_by_index(self, tmp_path):
        path = tmp_path / "shuffled.csv"
        path.write_text("index,pvalue\n2,0.3\n0,0.1\n1,0.2\n")
        np.testing.assert_array_equal(read_pvalues_csv(path), [0.1, 0.2, 0.3])
