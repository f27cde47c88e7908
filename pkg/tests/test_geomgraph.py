import numpy as np
import pytest

from ustatkit import (
    DensityModel,
    GraphPattern,
    RadiusSchedule,
    complete_pattern,
    count_subgraphs,
    gk_contraction_mc,
    named_pattern,
    pattern_kernel,
    regime_experiment,
    variance_lower_bound_check,
)
from ustatkit.errors import CapacityError, ParameterError, PreconditionError
from ustatkit.geomgraph import pattern_indicator, regime_targets
from ustatkit.montecarlo import ols_loglog

from helpers import brute_subgraph_count

EDGE = named_pattern("edge")
TRIANGLE = named_pattern("triangle")
PATH3 = named_pattern("path3")
BOX2 = DensityModel("uniform-box", 2)


class TestGraphPattern:
    def test_rejects_disconnected(self):
        with pytest.raises(ParameterError):
            GraphPattern(np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]))

    def test_rejects_self_loops(self):
        with pytest.raises(ParameterError):
            GraphPattern(np.array([[1, 1], [1, 0]]))

    def test_rejects_oversized(self):
        with pytest.raises(CapacityError):
            complete_pattern(8)

    def test_named_patterns(self):
        assert EDGE.p == 2 and EDGE.edge_count == 1
        assert TRIANGLE.p == 3 and TRIANGLE.edge_count == 3
        assert PATH3.p == 3 and PATH3.edge_count == 2


class TestPatternKernel:
    def test_edge_is_distance_test(self):
        pts = np.array([[0.0, 0.0], [0.3, 0.0]])
        assert pattern_kernel(pts, EDGE, 0.4) == 1
        assert pattern_kernel(pts, EDGE, 0.2) == 0

    def test_coincident_points_are_not_adjacent(self):
        pts = np.zeros((2, 2))
        assert pattern_kernel(pts, EDGE, 0.5) == 0
        tri_pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.1, 0.0]])
        assert pattern_kernel(tri_pts, TRIANGLE, 0.5) == 0

    def test_collinear_path(self):
        t = 1.0
        pts = np.array([[0.0, 0.0], [0.6, 0.0], [1.2, 0.0]])
        assert pattern_kernel(pts, PATH3, t) == 1
        assert pattern_kernel(pts, TRIANGLE, t) == 0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(90)
        pts = rng.random((3, 2)) * 0.4
        for pat in (TRIANGLE, PATH3):
            base = pattern_kernel(pts, pat, 0.3)
            for perm in ((1, 0, 2), (2, 1, 0), (1, 2, 0)):
                assert pattern_kernel(pts[list(perm)], pat, 0.3) == base

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(91)
        batch = rng.random((40, 3, 2)) * 0.5
        vec = pattern_indicator(batch, PATH3, 0.25)
        for i in range(40):
            assert vec[i] == pattern_kernel(batch[i], PATH3, 0.25)


class TestCountSubgraphs:
    def test_minimal_sample(self):
        pts = np.array([[0.0, 0.0], [0.1, 0.0]])
        assert count_subgraphs(pts, EDGE, 0.2) == 1

    def test_complete_graph_saturates(self):
        rng = np.random.default_rng(92)
        pts = rng.random((8, 2))
        assert count_subgraphs(pts, complete_pattern(3), 10.0) == 56  # C(8,3)

    def test_matches_brute_force_fifty_configs(self):
        rng = np.random.default_rng(93)
        for trial in range(50):
            n = int(rng.integers(20, 90))
            pat = (EDGE, TRIANGLE, PATH3)[trial % 3]
            d = int(rng.integers(1, 4))
            pts = rng.random((n, d))
            t = float(rng.uniform(0.05, 0.5))
            assert count_subgraphs(pts, pat, t) == brute_subgraph_count(pts, pat, t)

    def test_larger_grid_pruned_case(self):
        rng = np.random.default_rng(94)
        pts = rng.random((200, 2))
        t = 0.1
        assert count_subgraphs(pts, EDGE, t) == brute_subgraph_count(pts, EDGE, t)

    def test_complete_pattern_monotone_in_radius(self):
        rng = np.random.default_rng(95)
        pts = rng.random((60, 2))
        last = -1
        for t in (0.05, 0.1, 0.2, 0.4, 0.8):
            cur = count_subgraphs(pts, TRIANGLE, t)
            assert cur >= last
            last = cur


class TestSchedules:
    def test_radius_formulas(self):
        assert RadiusSchedule("C4", rho=2.0).radius(512, 2) == pytest.approx((2.0 / 512) ** 0.5)
        assert RadiusSchedule("C3", beta=0.5).radius(256, 2) == pytest.approx(256 ** -0.25)

    def test_validation(self):
        with pytest.raises(ParameterError):
            RadiusSchedule("C2", beta=1.5)
        with pytest.raises(ParameterError):
            RadiusSchedule("C1", beta=0.5)
        with pytest.raises(ParameterError):
            RadiusSchedule("C4")

    def test_targets(self):
        t = regime_targets(2, RadiusSchedule("C3", beta=0.5))
        assert t["variance"]["target"] == pytest.approx(2.0)
        assert t["distance"]["target"] == -0.5
        t1 = regime_targets(3, RadiusSchedule("C1", beta=1.2))
        assert t1["mean"]["target"] == pytest.approx(3 - 1.2 * 2)
        t2 = regime_targets(2, RadiusSchedule("C2", beta=0.5))
        assert t2["variance"]["flag"] == "lower-bound-only"
        assert t2["distance"]["flag"] == "upper-bound-only"


class TestRegimeExperiment:
    def test_c1_triangle_mean_exponent(self):
        sched = RadiusSchedule("C1", beta=1.2)
        rep = regime_experiment(TRIANGLE, BOX2, sched, [256, 512, 1024, 2048], 150, seed=17)
        assert rep.exponents["mean"]["fitted"] == pytest.approx(0.6, abs=0.2)
        assert all(r["var"] >= 0.0 for r in rep.records)
        # feasibility probe agrees with a positive mean count at the largest n
        assert (rep.config["feasibility_probe"] > 0) == (rep.records[-1]["mean"] > 0)

    def test_infeasible_pattern_rejected(self):
        # a three-leaf star cannot be realized on a line: the leaves would
        # need pairwise gaps above t inside a window of width 2t
        star = GraphPattern(
            np.array([[0, 1, 1, 1], [1, 0, 0, 0], [1, 0, 0, 0], [1, 0, 0, 0]]),
            name="star4",
        )
        box1 = DensityModel("uniform-box", 1)
        sched = RadiusSchedule("C4", rho=1.0)
        with pytest.raises(PreconditionError):
            regime_experiment(star, box1, sched, [64, 128, 256, 512], 100, seed=3)

    def test_regime_density_consistency(self):
        sched = RadiusSchedule("C3", beta=0.5)
        with pytest.raises(ParameterError):
            regime_experiment(EDGE, BOX2, sched, [64, 128, 256, 512], 100, seed=0)
        sched2 = RadiusSchedule("C2", beta=0.5)
        with pytest.raises(ParameterError):
            regime_experiment(EDGE, DensityModel("gaussian", 2), sched2,
                              [64, 128, 256, 512], 100, seed=0)

    def test_report_is_reproducible(self):
        sched = RadiusSchedule("C4", rho=1.0)
        a = regime_experiment(EDGE, BOX2, sched, [64, 128, 256, 512], 120, seed=5)
        b = regime_experiment(EDGE, BOX2, sched, [64, 128, 256, 512], 120, seed=5)
        assert a.to_dict() == b.to_dict()


class TestVarianceLowerBound:
    def test_interval_overlap_closed_form(self):
        box1 = DensityModel("uniform-box", 1)
        out = variance_lower_bound_check(EDGE, box1, t=0.2, n=100, reps=5000, seed=13)
        assert out["ok"]
        assert out["q_hat"] == pytest.approx(0.36, abs=3.0 * out["q_se"] + 1e-9)

    def test_probability_estimates_agree_across_seeds(self):
        box1 = DensityModel("uniform-box", 1)
        a = variance_lower_bound_check(EDGE, box1, 0.2, 50, 300, seed=1, q_samples=100_000)
        b = variance_lower_bound_check(EDGE, box1, 0.2, 50, 300, seed=2, q_samples=100_000)
        tol = 3.0 * (a["q_se"] + b["q_se"])
        assert abs(a["q_hat"] - b["q_hat"]) <= tol

    def test_tiny_radius_sends_both_sides_to_zero(self):
        out = variance_lower_bound_check(EDGE, BOX2, t=1e-4, n=50, reps=400, seed=7)
        assert out["rhs_bound"] <= 1e-3
        assert out["lhs_variance"] <= 1e-3

    def test_non_uniform_density_rejected(self):
        with pytest.raises(ParameterError):
            variance_lower_bound_check(EDGE, DensityModel("gaussian", 2), 0.1, 50, 200, seed=0)


class TestGkContractionMc:
    def test_tensor_product_identity(self):
        # two estimators of the same quantity: ||g1 (x) g1|| == ||g1||^2,
        # where the squared norm is itself the full diagonal contraction
        est_a = gk_contraction_mc(EDGE, BOX2, 0.3, 1, 1, 0, 0, 20000, seed=31)
        est_b = gk_contraction_mc(EDGE, BOX2, 0.3, 1, 1, 1, 1, 20000, seed=32)
        tol = 3.0 * (est_a.stderr + est_b.stderr)
        assert abs(est_a.value - est_b.value) <= tol

    def test_infeasible_radius_flags_unreliable(self):
        est = gk_contraction_mc(EDGE, BOX2, 1e-5, 2, 2, 1, 1, 10000, seed=33)
        assert est.value <= 1e-4
        assert not est.reliable

    def test_rejects_bad_indices(self):
        with pytest.raises(ParameterError):
            gk_contraction_mc(EDGE, BOX2, 0.2, 2, 2, 1, 2, 10000, seed=0)
        with pytest.raises(ParameterError):
            gk_contraction_mc(EDGE, BOX2, 0.2, 2, 2, 1, 1, 100, seed=0)

    def test_scaling_slope_smoke(self):
        # coarse two-point check of the scaling direction (full sweep lives in
        # the acceptance suite)
        ts = (0.4, 0.1)
        vals = [gk_contraction_mc(EDGE, BOX2, t, 2, 2, 1, 1, 40000, seed=35).value
                for t in ts]
        slope = ols_loglog(ts, vals).slope
        assert slope == pytest.approx(3.0, abs=1.0)
