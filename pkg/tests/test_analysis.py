import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammainc

from ajpeg.analysis import (
    ErrorTransferOperator,
    NoiseModel,
    RefinementBoundParams,
    add_noise,
    best_refinement_bound,
    check_noncentrality_monotonicity,
    error_transfer_matrix,
    mc_subadditivity,
    min_rest_dof,
    ncx2_cdf,
    ncx2_sf,
    operator_norm,
    refinement_bound_gap,
    refinement_probability_bound,
    rest_dof,
    subadditivity_terms,
)
from ajpeg.corpus import single_coefficient_block
from ajpeg.image import RasterImage

# Frozen oracle values computed with a 60-digit Poisson-mixture evaluation
# (mpmath); (dof, noncentrality, x, cdf).
NCX2_CDF_ORACLE = [
    (5, 3.0, 7.0, 0.4866239204229875253),
    (64, 100.0, 150.0, 0.2795979585403639275),
    (64, 1000.0, 900.0, 0.0040776760112180107563),
    (64, 1000.0, 1100.0, 0.7159460692847595631),
    (448, 500.0, 1000.0, 0.83339471165989425421),
    (10, 0.5, 12.0, 0.67484560419700305604),
]
NCX2_SF_ORACLE = [
    (64, 17777.777777777777, 19000.0, 9.5651060401974616636e-6),
    (64, 1000.0, 1400.0, 5.3260768256534355547e-7),
]


class TestErrorTransferOperator:
    def test_adjoint_consistency(self):
        rng = np.random.default_rng(0)
        op = ErrorTransferOperator(32, 32)
        a = rng.standard_normal((32, 32))
        b = rng.standard_normal((32, 32))
        lhs = float(np.sum(op.matvec(a) * b))
        rhs = float(np.sum(a * op.rmatvec(b)))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_zero_on_constant(self):
        op = ErrorTransferOperator(64, 64)
        out = op.matvec(np.full((64, 64), 0.7))
        assert np.abs(out).max() < 1e-12

    def test_nonzero_on_spectral_spike(self):
        op = ErrorTransferOperator(32, 32)
        out = op.matvec(single_coefficient_block())
        assert np.linalg.norm(out) > 1e-3

    def test_bounded_by_norm(self):
        rng = np.random.default_rng(1)
        op = ErrorTransferOperator(32, 32)
        norm = operator_norm(op)
        for _ in range(20):
            x = rng.standard_normal((32, 32))
            assert np.linalg.norm(op.matvec(x)) <= norm * np.linalg.norm(x) * (1 + 1e-9)

    def test_rejects_small_elements(self):
        with pytest.raises(ValueError):
            ErrorTransferOperator(8, 8)

    def test_dense_matrix_matches_operator(self):
        rng = np.random.default_rng(2)
        mat = error_transfer_matrix(16, 16)
        op = ErrorTransferOperator(16, 16)
        x = rng.standard_normal(256)
        np.testing.assert_allclose(mat @ x, op.matvec(x).ravel(), atol=1e-12)

    def test_norm_zero_at_16(self):
        # 8x8 children are covered entirely by their kept blocks
        assert operator_norm(ErrorTransferOperator(16, 16)) == 0.0

    def test_norm_small_at_realistic_sizes(self):
        for size in (32, 64):
            norm = operator_norm(ErrorTransferOperator(size, size))
            assert norm <= 0.131
            assert norm > 0.05

    def test_norm_matches_dense_svd_at_32(self):
        mat = error_transfer_matrix(32, 32)
        top = np.linalg.svd(mat, compute_uv=False)[0]
        assert operator_norm(ErrorTransferOperator(32, 32)) == pytest.approx(top, rel=1e-7)


class TestOperatorNorm:
    def test_matches_svd_on_random_16dim(self):
        rng = np.random.default_rng(3)
        for trial in range(10):
            mat = rng.standard_normal((16, 16))
            expected = np.linalg.svd(mat, compute_uv=False)[0]
            assert operator_norm(mat, seed=trial) == pytest.approx(expected, rel=1e-8)

    def test_zero_matrix(self):
        assert operator_norm(np.zeros((4, 4))) == 0.0


class TestNcx2:
    def test_central_reduction(self):
        for k in (1, 5, 64, 448):
            for x in (0.5, float(k), 3.0 * k):
                assert ncx2_cdf(k, 0.0, x) == pytest.approx(gammainc(k / 2, x / 2), abs=1e-15)

    def test_boundaries(self):
        assert ncx2_cdf(64, 50.0, 0.0) == 0.0
        assert ncx2_sf(64, 50.0, 0.0) == 1.0
        assert ncx2_cdf(64, 50.0, 1e8) == pytest.approx(1.0, abs=1e-12)
        assert ncx2_sf(64, 50.0, 1e8) == pytest.approx(0.0, abs=1e-12)

    def test_frozen_oracle_values(self):
        for k, lam, x, expected in NCX2_CDF_ORACLE:
            assert ncx2_cdf(k, lam, x) == pytest.approx(expected, abs=1e-13)
        for k, lam, x, expected in NCX2_SF_ORACLE:
            got = ncx2_sf(k, lam, x)
            assert got == pytest.approx(expected, abs=1e-8)
            assert got == pytest.approx(expected, rel=1e-10)

    def test_against_scipy(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            k = int(rng.integers(1, 200))
            lam = float(rng.uniform(0.0, 2000.0))
            x = float(rng.uniform(0.0, k + lam + 4 * math.sqrt(2 * (k + 2 * lam))))
            assert ncx2_cdf(k, lam, x) == pytest.approx(
                stats.ncx2.cdf(x, k, lam) if lam > 0 else stats.chi2.cdf(x, k), abs=2e-12
            )

    def test_cdf_sf_sum_to_one(self):
        for k, lam, x, _ in NCX2_CDF_ORACLE:
            assert ncx2_cdf(k, lam, x) + ncx2_sf(k, lam, x) == pytest.approx(1.0, abs=1e-12)

    def test_vectorized_x(self):
        xs = np.array([10.0, 60.0, 120.0])
        vec = ncx2_cdf(64, 30.0, xs)
        assert vec.shape == (3,)
        for x, v in zip(xs, vec):
            assert v == ncx2_cdf(64, 30.0, float(x))

    def test_nondecreasing_in_x(self):
        xs = np.linspace(0.0, 400.0, 200)
        vals = ncx2_cdf(64, 120.0, xs)
        assert np.all(np.diff(vals) >= -1e-14)

    def test_monotonicity_in_noncentrality(self):
        report = check_noncentrality_monotonicity(64, 50.0, np.arange(0.0, 101.0))
        assert report.ok
        assert report.values[0] > report.values[-1]

    def test_monotonicity_equal_lambdas(self):
        report = check_noncentrality_monotonicity(10, 12.0, [3.0, 3.0])
        assert report.ok
        assert report.values[0] == report.values[1]

    def test_monte_carlo_spot_check(self):
        k, lam, x = 64, 500.0, 580.0
        n = 400_000
        rng = np.random.default_rng(5)
        mu = np.zeros(k)
        mu[0] = math.sqrt(lam)
        hits = 0
        for _ in range(4):
            draws = rng.standard_normal((n // 4, k)) + mu
            hits += int(np.sum(np.sum(draws * draws, axis=1) <= x))
        p_hat = hits / n
        se = math.sqrt(p_hat * (1 - p_hat) / n)
        assert abs(ncx2_cdf(k, lam, x) - p_hat) <= 3 * se

    def test_saddlepoint_agrees_with_series_near_switch(self):
        from ajpeg.analysis import SERIES_NONCENTRALITY_LIMIT, _saddlepoint

        k = 64
        lam = SERIES_NONCENTRALITY_LIMIT * 0.98  # series still active here
        for frac in (0.9, 0.97, 1.03, 1.1):
            x = frac * (k + lam)
            assert _saddlepoint(k, lam, x, upper=False) == pytest.approx(
                ncx2_cdf(k, lam, x), abs=2e-4
            )
        # the removable singularity at the mean only costs ~1e-3
        mean = float(k + lam)
        assert _saddlepoint(k, lam, mean, upper=False) == pytest.approx(
            ncx2_cdf(k, lam, mean), abs=5e-3
        )

    def test_saddlepoint_branch_used_above_limit(self):
        from ajpeg.analysis import SERIES_NONCENTRALITY_LIMIT

        lam = SERIES_NONCENTRALITY_LIMIT * 2
        k = 64
        x = k + lam
        assert 0.4 < ncx2_cdf(k, lam, x) < 0.6
        assert ncx2_cdf(k, lam, 0.5 * x) < 1e-6
        assert ncx2_sf(k, lam, 1.5 * x) < 1e-6

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            ncx2_cdf(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            ncx2_cdf(4, -1.0, 1.0)
        with pytest.raises(ValueError):
            ncx2_cdf(4, 1.0, -1.0)


class TestRefinementBound:
    def test_zero_split_point_gives_zero_probability(self):
        params = RefinementBoundParams(0.0075)
        assert refinement_probability_bound(params, z=0.0) == 0.0

    def test_rises_then_falls(self):
        params = RefinementBoundParams(0.0075)
        lam = params.noncentrality
        zs = np.linspace(0.2 * lam, 3.0 * lam, 60)
        probs = [refinement_probability_bound(params, float(z)) for z in zs]
        peak = int(np.argmax(probs))
        assert 0 < peak < len(zs) - 1
        assert all(probs[i] <= probs[i + 1] + 1e-15 for i in range(peak))
        assert all(probs[i] >= probs[i + 1] - 1e-15 for i in range(peak, len(zs) - 1))

    def test_maximizer_interior_and_tight(self):
        params = RefinementBoundParams(0.0075)
        best = best_refinement_bound(params)
        assert 0.0 < best.z < 10.0 * (params.noncentrality + 64)
        assert best.gap < 1e-5
        # grid scan cannot beat the refined optimum
        zs = np.linspace(0.9 * best.z, 1.1 * best.z, 101)
        assert all(refinement_bound_gap(params, float(z)) >= best.gap - 1e-18 for z in zs)

    def test_gap_and_probability_consistent(self):
        params = RefinementBoundParams(0.02)
        z = 0.9 * params.noncentrality
        assert refinement_probability_bound(params, z) == pytest.approx(
            1.0 - refinement_bound_gap(params, z), abs=1e-15
        )

    def test_rejects_delta_at_least_slack(self):
        with pytest.raises(ValueError):
            RefinementBoundParams(0.01, delta=1.0, slack=1.0)

    def test_subadditivity_factor(self):
        assert RefinementBoundParams(0.01, slack=1.0).subadditivity_factor == 4.0

    def test_dof_bookkeeping(self):
        assert rest_dof(32, 16) == 448
        assert min_rest_dof() == 448 == 32 * 16 - 64


class TestNoise:
    def test_zero_amplitude_identity(self):
        rng = np.random.default_rng(6)
        img = RasterImage(rng.random((8, 8, 3)))
        out = add_noise(img, NoiseModel(0.0, seed=1))
        np.testing.assert_array_equal(out.samples, img.samples)

    def test_seed_reproducible(self):
        img = RasterImage(np.full((16, 16, 3), 0.5))
        a = add_noise(img, NoiseModel(0.015, seed=7))
        b = add_noise(img, NoiseModel(0.015, seed=7))
        np.testing.assert_array_equal(a.samples, b.samples)
        c = add_noise(img, NoiseModel(0.015, seed=8))
        assert np.any(c.samples != a.samples)

    def test_sample_variance_matches_amplitude(self):
        eps = 0.01
        base = np.full((200, 200), 0.5)
        noised = add_noise(base, NoiseModel(eps, seed=9))
        resid = noised - base
        n = resid.size
        # variance of the estimator itself is ~ eps^2 * sqrt(2/n)
        assert float(np.var(resid)) == pytest.approx(eps**2, rel=4 * math.sqrt(2.0 / n))

    def test_clamped_to_unit_range(self):
        base = np.full((32, 32), 0.999)
        noised = add_noise(base, NoiseModel(0.1, seed=10))
        assert noised.max() <= 1.0
        assert noised.min() >= 0.0


class TestSubadditivityMC:
    def test_spike_violates_without_noise(self):
        parent, children = subadditivity_terms(single_coefficient_block())
        assert parent <= 1e-12
        assert children > 1e-6

    def test_zero_noise_on_good_block_never_violates(self):
        rng = np.random.default_rng(11)
        block = np.linspace(0, 1, 32)[:, None] * np.ones(32)
        result = mc_subadditivity(block, 0.0, trials=10, seed=0)
        assert result.violations == 0

    def test_smooth_gradient_with_noise_never_violates(self):
        block = np.linspace(0, 1, 32)[:, None] * np.ones(32)
        result = mc_subadditivity(block, 0.0075, trials=5000, seed=1)
        assert result.violations == 0

    def test_noised_spike_rarely_violates(self):
        result = mc_subadditivity(single_coefficient_block(), 0.0075, trials=20000, seed=2)
        assert result.rate <= 1e-3

    def test_rejects_unrefinable_block(self):
        with pytest.raises(ValueError):
            mc_subadditivity(np.zeros((8, 8)), 0.01, trials=10)
