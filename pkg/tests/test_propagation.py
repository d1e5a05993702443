"""Tests for the optimal mixture, importance weights, reweighting and CDF bands."""

import numpy as np
import pytest
from conftest import gaussian, make_ensemble
from numpy.testing import assert_allclose

from imprecise_copula.copula_core import CopulaSpec, copula_log_pdf, copula_sample
from imprecise_copula.errors import InputError, SupportError
from imprecise_copula.hierarchy import (
    BlockEnsembles,
    MarginalDraw,
    SingleEnsemble,
    joint_log_pdf,
)
from imprecise_copula.marginal_core import MarginalSpec, marginal_quantile
from imprecise_copula.models import (
    CountingFunction,
    test_function_linear,
    test_function_quadratic,
)
from imprecise_copula.propagation import (
    CdfBand,
    LookupTableDensity,
    WeightedRun,
    cdf_band,
    check_support,
    effective_sample_size,
    expected_conditional_copula,
    importance_weights,
    log_importance_weights,
    optimal_density,
    optimal_product_density,
    propagate,
    reweighted_expectation,
    weighted_ecdf,
)


def single_candidate_ensemble():
    return make_ensemble([((gaussian(), gaussian(1.0, 2.0)), [CopulaSpec("Frank", (3.0,))])])


def gamma_ensemble():
    gamma = MarginalSpec("Gamma", (3.0, 1.0))
    return make_ensemble([((gamma, gamma), [CopulaSpec("Clayton", (1.0,))])])


def linear_plus_square(x):
    x = np.atleast_2d(x)
    return x[:, 0] + x[:, 1] ** 2


def nine_candidate_ensemble():
    return make_ensemble(
        [
            (
                (gaussian(0.0, 1.0), gaussian(0.0, 1.0)),
                [
                    CopulaSpec("Frank", (3.0,)),
                    CopulaSpec("Clayton", (1.0,)),
                    CopulaSpec("Gumbel", (1.5,)),
                ],
            ),
            (
                (gaussian(0.5, 1.2), gaussian(-0.3, 0.8)),
                [
                    CopulaSpec("Gaussian", (0.4,)),
                    CopulaSpec("Frank", (-2.0,)),
                    CopulaSpec("StudentT", (0.3, 5.0)),
                ],
            ),
            (
                (gaussian(-0.2, 0.9), gaussian(0.4, 1.1)),
                [
                    CopulaSpec("Independence", ()),
                    CopulaSpec("Clayton", (2.5,)),
                    CopulaSpec("Frank", (6.0,)),
                ],
            ),
        ]
    )


def direct_mean(ensemble, candidate, g, n, seed):
    """Plain Monte Carlo mean of ``g`` under one candidate, with its standard error."""
    first, second, copula = ensemble.candidate(*candidate)
    u = copula_sample(copula, n, seed)
    x = np.column_stack([marginal_quantile(first, u[:, 0]), marginal_quantile(second, u[:, 1])])
    values = g(x)
    return values.mean(), values.std(ddof=1) / np.sqrt(n)


class TestExpectedConditionalCopula:
    def test_average_of_draws(self, toy_ensemble):
        copulas = toy_ensemble.entries[0].copulas
        u = np.array([[0.2, 0.3], [0.7, 0.9]])
        expected = np.mean([np.exp(copula_log_pdf(s, u)) for s in copulas.specs], axis=0)
        assert_allclose(expected_conditional_copula(copulas, u), expected)


class TestEffectiveSampleSize:
    def test_equal_weights(self):
        assert_allclose(effective_sample_size(np.full(50, 0.3)), 50.0)

    def test_single_weight(self):
        assert_allclose(effective_sample_size([0.0, 2.0, 0.0]), 1.0)

    def test_all_zero(self):
        assert effective_sample_size(np.zeros(4)) == 0.0


class TestOptimalDensity:
    def test_is_average_of_candidates(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        x = np.array([[0.0, 0.1], [1.0, -0.5], [-2.0, 1.5]])
        dens = []
        for l in range(2):
            for k in range(2):
                first, second, copula = toy_ensemble.candidate(l, k)
                dens.append(np.exp(joint_log_pdf((first, second), copula, x)))
        assert_allclose(q.pdf(x), np.mean(dens, axis=0), rtol=1e-12)

    def test_candidate_log_pdf(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        x = np.array([[0.3, 0.4]])
        first, second, copula = toy_ensemble.candidate(1, 1)
        assert_allclose(q.candidate_log_pdf((1, 1), x), joint_log_pdf((first, second), copula, x))

    def test_iterated_candidates_match(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        x = np.array([[0.3, 0.4], [-1.0, 2.0]])
        seen = dict(q.iter_candidate_log_pdfs(x))
        assert sorted(seen) == q.candidates("joint")
        for candidate, value in seen.items():
            assert_allclose(value, q.candidate_log_pdf(candidate, x))
        pair = dict(q.iter_candidate_log_pdfs(x, level="pair"))
        assert sorted(pair) == [(0,), (1,)]
        assert_allclose(pair[(1,)], q.component_log_pdf(1, x))

    def test_duplicate_copulas_grouped(self):
        frank = CopulaSpec("Frank", (3.0,))
        ensemble = make_ensemble([((gaussian(), gaussian()), [frank, frank])])
        q = optimal_density(ensemble)
        x = np.array([[0.2, -0.1]])
        assert_allclose(q.log_pdf(x), joint_log_pdf((gaussian(), gaussian()), frank, x))

    def test_sample_mean(self, toy_ensemble):
        x = optimal_density(toy_ensemble).sample(40_000, 1)
        assert x.shape == (40_000, 2)
        assert_allclose(x.mean(axis=0), [0.25, -0.15], atol=0.03)

    def test_posterior_weighting(self):
        copulas = [
            CopulaSpec("Frank", (3.0,)),
            CopulaSpec("Frank", (2.0,)),
            CopulaSpec("Clayton", (1.0,)),
        ]
        ensemble = make_ensemble([((gaussian(), gaussian()), copulas)])
        q = optimal_density(ensemble, weighting="posterior")
        assert_allclose(np.exp(q.copula_log_weights[0]), [0.25, 0.25, 0.5])
        uniform = optimal_density(ensemble)
        assert_allclose(np.exp(uniform.copula_log_weights[0]), np.full(3, 1.0 / 3.0))

    def test_unknown_weighting(self, toy_ensemble):
        with pytest.raises(InputError):
            optimal_density(toy_ensemble, weighting="map")

    def test_level_checked(self, toy_ensemble):
        with pytest.raises(InputError):
            optimal_density(toy_ensemble).candidates("block")

    def test_support(self):
        q = optimal_density(gamma_ensemble())
        assert q.support() == [(0.0, np.inf), (0.0, np.inf)]


class TestProductDensity:
    @pytest.fixture
    def blocks(self, toy_ensemble):
        single = SingleEnsemble(
            "x3",
            (
                MarginalDraw(MarginalSpec("Gamma", (2.0, 1.0)), 0, 0),
                MarginalDraw(MarginalSpec("Gamma", (3.0, 0.5)), 0, 1),
            ),
        )
        return BlockEnsembles((toy_ensemble,), (single,))

    def test_log_pdf_is_sum_over_blocks(self, blocks, toy_ensemble):
        q = optimal_product_density(blocks)
        x = np.array([[0.1, 0.2, 1.5], [-0.4, 0.9, 0.3]])
        single = q.blocks[1]
        expected = optimal_density(toy_ensemble).log_pdf(x[:, :2]) + single.log_pdf(x[:, 2:])
        assert_allclose(q.log_pdf(x), expected)
        assert q.columns == ("x1", "x2", "x3")
        assert (q.n_td, q.n_tc, q.dim) == (2, 2, 3)

    def test_candidate_combines_blocks(self, blocks, toy_ensemble):
        q = optimal_product_density(blocks)
        x = np.array([[0.1, 0.2, 1.5]])
        first, second, copula = toy_ensemble.candidate(1, 0)
        expected = joint_log_pdf((first, second), copula, x[:, :2])
        expected = expected + q.blocks[1].candidate_log_pdf((1, 0), x[:, 2:])
        assert_allclose(q.candidate_log_pdf((1, 0), x), expected)

    def test_iterated_candidates_match(self, blocks):
        q = optimal_product_density(blocks)
        x = np.array([[0.1, 0.2, 1.5], [-0.4, 0.9, 0.3]])
        seen = dict(q.iter_candidate_log_pdfs(x))
        assert len(seen) == 4
        for candidate, value in seen.items():
            assert_allclose(value, q.candidate_log_pdf(candidate, x))

    def test_candidates_are_aligned_across_blocks(self, blocks):
        q = optimal_product_density(blocks)
        assert q.candidates() == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert q.candidates("pair") == [(0,), (1,)]

    def test_samples_respect_support(self, blocks):
        x = optimal_product_density(blocks).sample(1000, 2)
        assert x.shape == (1000, 3)
        assert np.all(x[:, 2] > 0.0)


class TestImportanceWeights:
    def test_single_component_weights_are_one(self):
        q = optimal_density(single_candidate_ensemble())
        x = q.sample(500, 3)
        assert_allclose(importance_weights(q, (0, 0), x), 1.0, rtol=1e-10)

    def test_mean_weight_is_one(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        x = q.sample(20_000, 4)
        for candidate in q.candidates():
            w = importance_weights(q, candidate, x)
            assert np.all(w <= 4.0 + 1e-9)
            assert abs(w.mean() - 1.0) < 0.05

    def test_external_candidate(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        x = q.sample(200, 5)

        def log_p(points):
            return joint_log_pdf((gaussian(), gaussian()), CopulaSpec("Gaussian", (0.2,)), points)

        expected = np.exp(log_p(x) - q.log_pdf(x))
        assert_allclose(importance_weights(q, log_p, x), expected)

    def test_support_violation(self):
        q = optimal_density(gamma_ensemble())
        points = np.array([[1.0, 1.0], [-1.0, 1.0]])

        def log_p(x):
            return joint_log_pdf((gaussian(), gaussian()), CopulaSpec("Independence", ()), x)

        with pytest.raises(SupportError):
            log_importance_weights(q, log_p, points)

    def test_zero_candidate_density_gives_zero_weight(self):
        q = optimal_density(single_candidate_ensemble())
        points = np.array([[1.0, 1.0], [-1.0, 1.0]])

        def log_p(x):
            gamma = MarginalSpec("Gamma", (2.0, 1.0))
            return joint_log_pdf((gamma, gamma), CopulaSpec("Independence", ()), x)

        w = importance_weights(q, log_p, points)
        assert w[1] == 0.0 and w[0] > 0.0


class TestPropagation:
    def test_evaluates_once_per_sample(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        g = CountingFunction(test_function_linear)
        run = propagate(q, g, 300, seed=1, ensemble_hash=toy_ensemble.ensemble_hash())
        assert g.evaluations == 300 and g.calls == 1
        cdf_band(run, q, np.linspace(-3, 3, 20))
        reweighted_expectation(run, q, (1, 1))
        assert g.evaluations == 300
        assert run.n_evaluations == 300
        assert run.columns == ("x1", "x2")
        assert run.ensemble_hash == toy_ensemble.ensemble_hash()

    def test_reproducible(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        first = propagate(q, test_function_linear, 100, seed=7)
        second = propagate(q, test_function_linear, 100, seed=7)
        assert np.array_equal(first.samples, second.samples)
        assert np.array_equal(first.outputs, second.outputs)

    def test_output_shape_checked(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        with pytest.raises(InputError):
            propagate(q, lambda x: np.ones(3), 10, seed=0)

    def test_run_lengths_checked(self):
        with pytest.raises(InputError):
            WeightedRun(np.zeros((3, 2)), np.zeros(2), np.zeros(3), ("a", "b"), 0, "", (), 3)

    def test_constant_output_mean(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, lambda x: np.ones(len(x)), 20_000, seed=2)
        for candidate in q.candidates():
            estimate = reweighted_expectation(run, q, candidate)
            assert abs(estimate.value - 1.0) < 0.05
            assert estimate.n_eff > 1000
            assert not estimate.degenerate

    def test_linear_mean_per_candidate(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, test_function_linear, 40_000, seed=3)
        assert abs(reweighted_expectation(run, q, (0, 0)).value - 0.0) < 0.06
        assert abs(reweighted_expectation(run, q, (1, 0)).value - 0.2) < 0.06


class TestReweightedAgainstDirectSampling:
    def check(self, g, n_run, n_direct, n_sigma):
        ensemble = nine_candidate_ensemble()
        q = optimal_density(ensemble)
        run = propagate(q, g, n_run, seed=11)
        candidates = q.candidates()
        chosen = np.random.default_rng(5).choice(len(candidates), size=5, replace=False)
        for i in chosen:
            candidate = candidates[i]
            estimate = reweighted_expectation(run, q, candidate)
            mean, std_error = direct_mean(ensemble, candidate, g, n_direct, 100 + int(i))
            combined = np.hypot(estimate.std_error, std_error)
            assert abs(estimate.value - mean) < n_sigma * combined, candidate
            assert abs(estimate.mean_weight - 1.0) < 0.05

    @pytest.mark.parametrize("g", [linear_plus_square, test_function_quadratic])
    def test_five_random_candidates(self, g):
        self.check(g, 20_000, 50_000, 4.0)

    @pytest.mark.slow
    @pytest.mark.parametrize("g", [linear_plus_square, test_function_quadratic])
    def test_five_random_candidates_full_size(self, g):
        self.check(g, 100_000, 1_000_000, 3.0)



class TestSupportCheck:
    def test_wider_support_rejected(self):
        q = optimal_density(gamma_ensemble())
        run = propagate(q, test_function_linear, 50, seed=0)
        with pytest.raises(SupportError):
            check_support(run, optimal_density(single_candidate_ensemble()))

    def test_same_support_accepted(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, test_function_linear, 50, seed=0)
        check_support(run, optimal_density(single_candidate_ensemble()))

    def test_dimension_mismatch(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, test_function_linear, 50, seed=0)
        single = SingleEnsemble("x1", (MarginalDraw(gaussian(), 0, 0),) * 2)
        product = optimal_product_density(BlockEnsembles((toy_ensemble,), (single,)))
        with pytest.raises(SupportError):
            check_support(run, product)


class TestWeightedEcdf:
    def test_unweighted(self):
        values = np.array([3.0, 1.0, 2.0, 4.0])
        grid = [0.0, 1.0, 2.5, 4.0]
        assert_allclose(weighted_ecdf(values, np.ones(4), grid), [0.0, 0.25, 0.5, 1.0])

    def test_weighted(self):
        values = np.array([1.0, 2.0])
        assert_allclose(weighted_ecdf(values, [3.0, 1.0], [1.5, 2.0]), [0.75, 1.0])

    def test_unnormalized(self):
        values = np.array([1.0, 2.0])
        assert_allclose(weighted_ecdf(values, [3.0, 1.0], [2.0], normalized=False), [2.0])

    def test_zero_weights(self):
        assert_allclose(weighted_ecdf([1.0, 2.0], [0.0, 0.0], [1.5]), [0.0])


class TestCdfBand:
    def test_single_candidate_has_zero_width(self):
        q = optimal_density(single_candidate_ensemble())
        run = propagate(q, test_function_linear, 500, seed=1)
        band = cdf_band(run, q, np.linspace(-5, 8, 30))
        assert band.cdfs.shape == (1, 30)
        assert_allclose(band.width, 0.0)
        assert band.mean_width == 0.0

    def test_identical_candidates_have_zero_width(self):
        frank = CopulaSpec("Frank", (3.0,))
        ensemble = make_ensemble([((gaussian(), gaussian()), [frank, frank])] * 2)
        q = optimal_density(ensemble)
        run = propagate(q, test_function_linear, 500, seed=1)
        band = cdf_band(run, q, np.linspace(-4, 4, 25))
        assert len(band.candidates) == 4
        assert_allclose(band.width, 0.0, atol=1e-12)

    def test_envelope(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, test_function_linear, 5000, seed=2)
        grid = np.linspace(run.outputs.min(), run.outputs.max(), 40)
        band = cdf_band(run, q, grid)
        assert len(band.candidates) == 4
        assert np.all(band.lower <= band.upper)
        assert np.all(np.diff(band.cdfs, axis=1) >= -1e-12)
        assert_allclose(band.cdfs[:, -1], 1.0)
        assert np.all(band.contains(band.quantile(0.5)))
        pair = cdf_band(run, q, grid, level="pair")
        assert pair.candidates == ((0,), (1,))
        assert pair.mean_width <= band.mean_width + 1e-12

    def test_matches_weighted_ecdf(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, test_function_linear, 1000, seed=3)
        grid = np.linspace(-3, 3, 15)
        band = cdf_band(run, q, grid, normalized=False)
        w = run.weights(q, band.candidates[2])
        assert_allclose(band.cdfs[2], weighted_ecdf(run.outputs, w, grid, normalized=False))

    def test_unsorted_grid(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        run = propagate(q, test_function_linear, 50, seed=0)
        with pytest.raises(InputError):
            cdf_band(run, q, [1.0, 0.0])

    def test_contains(self):
        band = CdfBand(np.arange(2.0), np.array([[0.2, 0.5], [0.4, 0.9]]), ((0, 0), (0, 1)))
        assert band.contains([0.3, 1.0]).tolist() == [True, False]
        assert band.contains([0.3, 0.95], tol=0.1).tolist() == [True, True]


class TestLookupTable:
    def test_close_to_exact(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        x = q.sample(2000, 5)
        table = LookupTableDensity.from_samples(q, x, n_points=200)
        inner = x[np.all(np.abs(x) < 2.0, axis=1)]
        assert table.validate(inner) < 0.01
        assert table.columns == q.columns

    def test_exact_outside_grid(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        table = LookupTableDensity(q, (np.linspace(-1, 1, 20), np.linspace(-1, 1, 20)))
        far = np.array([[3.0, -4.0]])
        assert_allclose(table.log_pdf(far), q.log_pdf(far))

    def test_axes_checked(self, toy_ensemble):
        q = optimal_density(toy_ensemble)
        with pytest.raises(InputError):
            LookupTableDensity(q, (np.array([0.0, 0.0, 1.0]), np.linspace(0, 1, 5)))

    def test_grid_outside_support(self):
        q = optimal_density(gamma_ensemble())
        with pytest.raises(SupportError):
            LookupTableDensity(q, (np.linspace(-1, 1, 5), np.linspace(0.5, 1, 5)))

    def test_only_bivariate(self, toy_ensemble):
        single = SingleEnsemble("x3", (MarginalDraw(gaussian(), 0, 0),) * 2)
        product = optimal_product_density(BlockEnsembles((toy_ensemble,), (single,)))
        with pytest.raises(InputError):
            LookupTableDensity(product, (np.linspace(0, 1, 3), np.linspace(0, 1, 3)))

