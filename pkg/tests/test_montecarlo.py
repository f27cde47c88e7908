import math

import numpy as np
import pytest

from ustatkit import (
    ContinuousKernelSpec,
    DiscreteMeasure,
    SymmetricKernel,
    benchmark_kernel,
    rate_fit,
    simulate,
    smooth_distance,
    wasserstein_to_normal,
)
from ustatkit.errors import CapacityError, ConfigurationError, ParameterError, PreconditionError
from ustatkit.montecarlo import (
    NormalizationRecord,
    ReplicateSet,
    coupling_bias,
    coupling_distance,
    debiased_distance,
    normal_quantile_grid,
    stream,
)

HALF = DiscreteMeasure(np.array([0.5, 0.5]))
COIN = SymmetricKernel(np.array([1.0, -1.0]))


def _normal_repset(r, seed=123):
    values = stream(seed, 0).standard_normal(r)
    return ReplicateSet(values=values, n=r, seed=seed,
                        normalization=NormalizationRecord(0.0, 1.0, "exact"))


class TestStreams:
    def test_streams_are_reproducible(self):
        a = stream(7, 3).standard_normal(5)
        b = stream(7, 3).standard_normal(5)
        assert np.array_equal(a, b)

    def test_streams_are_distinct(self):
        a = stream(7, 3).standard_normal(5)
        b = stream(7, 4).standard_normal(5)
        c = stream(8, 3).standard_normal(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSimulate:
    def test_coin_kernel_moments(self):
        rep = simulate(COIN, HALF, 10, 4000, seed=1, normalization="exact")
        assert rep.normalization.sd == pytest.approx(math.sqrt(10.0))
        assert abs(float(rep.values.mean())) <= 4.0 / math.sqrt(4000)

    def test_constant_kernel_rejected_in_exact_mode(self):
        const = SymmetricKernel(np.full((2, 2), 1.0))
        with pytest.raises(PreconditionError):
            simulate(const, HALF, 10, 100, seed=0, normalization="exact")

    def test_determinism(self):
        a = simulate(COIN, HALF, 25, 500, seed=9, normalization="exact")
        b = simulate(COIN, HALF, 25, 500, seed=9, normalization="exact")
        assert np.array_equal(a.values, b.values)

    def test_values_match_per_replicate_streams(self):
        # replicate j must be a pure function of stream (seed, j)
        rep = simulate(COIN, HALF, 12, 4, seed=5, normalization="exact")
        j = 2
        counts = stream(5, j).multinomial(12, HALF.weights)
        raw = counts[0] * 1.0 + counts[1] * (-1.0)
        assert rep.values[j] == pytest.approx(raw / math.sqrt(12.0))

    def test_empirical_normalization(self):
        rep = simulate(COIN, HALF, 30, 800, seed=3, normalization="empirical")
        assert float(rep.values.mean()) == pytest.approx(0.0, abs=1e-12)
        assert float(rep.values.std(ddof=1)) == pytest.approx(1.0, rel=1e-12)

    def test_order_two_matches_direct_evaluation(self):
        rng = np.random.default_rng(6)
        vals = rng.standard_normal((3, 3))
        k = SymmetricKernel((vals + vals.T) / 2.0)
        mu = DiscreteMeasure(np.array([0.2, 0.3, 0.5]))
        rep = simulate(k, mu, 9, 3, seed=4, normalization="empirical")
        from helpers import ustat_direct
        for j in range(3):
            counts = stream(4, j).multinomial(9, mu.weights)
            x = [s for s, c in enumerate(counts) for _ in range(c)]
            direct = ustat_direct(k, x)
            raw = rep.values[j] * rep.normalization.sd + rep.normalization.mean
            assert raw == pytest.approx(direct, abs=1e-9)

    def test_continuous_kernel(self):
        spec = ContinuousKernelSpec(
            order=2, dimension=1,
            evaluator=lambda pts: (np.abs(pts[..., 0, 0] - pts[..., 1, 0]) < 0.2).astype(float),
            sampler=lambda rng, n: rng.random((n, 1)),
        )
        rep = simulate(spec, None, 40, 200, seed=8, normalization="empirical")
        assert rep.replicates == 200
        with pytest.raises(ConfigurationError):
            simulate(spec, None, 40, 200, seed=8, normalization="exact")

    def test_continuous_capacity(self):
        spec = ContinuousKernelSpec(
            order=3, dimension=1,
            evaluator=lambda pts: np.zeros(pts.shape[:-2]),
            sampler=lambda rng, n: rng.random((n, 1)),
        )
        with pytest.raises(CapacityError):
            simulate(spec, None, 600, 10, seed=0, normalization="empirical")


class TestWasserstein:
    def test_self_coupling_is_zero(self):
        grid = normal_quantile_grid(500)
        assert coupling_distance(grid) == 0.0

    def test_standard_normal_calibration(self):
        rep = _normal_repset(20000)
        est = wasserstein_to_normal(rep)
        assert est.value <= 0.02
        assert est.stderr > 0.0

    def test_constant_zero_values(self):
        rep = ReplicateSet(values=np.zeros(5000), n=10, seed=0,
                           normalization=NormalizationRecord(0.0, 1.0, "exact"))
        est = wasserstein_to_normal(rep)
        assert est.value == pytest.approx(math.sqrt(2.0 / math.pi), abs=0.02)

    def test_shift_bounds(self):
        rep = _normal_repset(2000)
        base = wasserstein_to_normal(rep).value
        c = 0.75
        shifted = ReplicateSet(values=rep.values + c, n=rep.n, seed=rep.seed,
                               normalization=rep.normalization)
        new = wasserstein_to_normal(shifted).value
        assert new <= base + c + 1e-12
        assert new >= c - 2.0 * base

    def test_requires_enough_replicates(self):
        rep = ReplicateSet(values=np.arange(50, dtype=float), n=10, seed=0,
                           normalization=NormalizationRecord(0.0, 1.0, "exact"))
        with pytest.raises(CapacityError):
            wasserstein_to_normal(rep)

    def test_coupling_bias_decreases_with_replicates(self):
        small = coupling_bias(500, standardized=True, draws=100)
        large = coupling_bias(5000, standardized=True, draws=100)
        assert 0.0 < large < small

    def test_debias_recovers_signal(self):
        assert debiased_distance(0.05, 0.03) == pytest.approx(0.04)
        assert debiased_distance(0.02, 0.03) == 0.0


class TestSmoothDistance:
    def test_constant_function(self):
        rep = _normal_repset(1000)
        assert smooth_distance(rep, lambda x: np.full_like(x, 2.0), 1000, seed=0) == 0.0

    def test_sine_calibration(self):
        rep = _normal_repset(100000)
        gap = smooth_distance(rep, np.sin, 100000, seed=77)
        assert gap <= 0.02

    def test_exact_mean_short_circuit(self):
        rep = _normal_repset(1000)
        gap = smooth_distance(rep, np.sin, 10, seed=0, exact_mean=0.0)
        assert gap == pytest.approx(abs(float(np.mean(np.sin(rep.values)))))

    def test_identity_gap_shrinks_with_n(self):
        kern, mu = benchmark_kernel()
        gaps = []
        for n in (100, 1000, 10000):
            rep = simulate(kern, mu, n, 4000, seed=21, normalization="exact")
            # smooth odd test function; its normal mean is exactly 0
            gaps.append(smooth_distance(rep, np.tanh, 10, seed=0, exact_mean=0.0))
        assert gaps[2] < gaps[0]


class TestRateFit:
    def test_exact_powerlaw(self):
        ns = np.array([10.0, 100.0, 1000.0, 10000.0])
        fit = rate_fit(ns, 3.0 * ns**-0.5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
        assert fit.stderr == pytest.approx(0.0, abs=1e-12)

    def test_noisy_powerlaw(self):
        rng = np.random.default_rng(30)
        ns = np.array([10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0])
        ds = 2.0 / ns * (1.0 + 0.01 * rng.standard_normal(ns.size))
        fit = rate_fit(ns, ds)
        assert fit.slope == pytest.approx(-1.0, abs=0.05)

    def test_constant_series(self):
        fit = rate_fit([10, 100, 1000, 10000], [2.5, 2.5, 2.5, 2.5])
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ParameterError):
            rate_fit([10, 100, 1000], [1.0, 0.5, 0.25])
        with pytest.raises(ParameterError):
            rate_fit([10, 100, 1000, 10000], [1.0, -0.5, 0.25, 0.1])
