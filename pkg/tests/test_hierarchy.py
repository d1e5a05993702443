"""Tests for marginal draws, the copula inference cache and the assembled ensembles."""

import json

import numpy as np
import pytest
from conftest import gaussian, make_ensemble
from numpy.testing import assert_allclose
from scipy import stats

from imprecise_copula.bayes_inference import (
    CopulaCandidate,
    InferenceConfig,
    MarginalCandidate,
    McmcConfig,
    ModelPosterior,
    infer_models,
)
from imprecise_copula.copula_core import CopulaFamily, CopulaSpec, copula_sample
from imprecise_copula.errors import InputError
from imprecise_copula.hierarchy import (
    BlockEnsembles,
    ConditionalCopulaSet,
    CopulaDraw,
    CopulaInferenceCache,
    JointEnsemble,
    MarginalDraw,
    MarginalEnsemble,
    SingleEnsemble,
    assemble_ensemble,
    draw_copulas,
    draw_marginal_pairs,
    draw_marginals,
    infer_block_ensembles,
    infer_marginals,
    infer_pair_ensemble,
    joint_log_pdf,
    pseudo_observation_key,
)
from imprecise_copula.marginal_core import MarginalSpec


def fake_posterior(probs=(0.75, 0.25), chain_length=40):
    """Gaussian/Gamma posterior with hand-made chains."""
    gauss = np.column_stack([np.linspace(-1.0, 1.0, chain_length), np.full(chain_length, 1.0)])
    gamma = np.column_stack([np.linspace(1.0, 3.0, chain_length), np.full(chain_length, 2.0)])
    return ModelPosterior(
        candidates=(MarginalCandidate("Gaussian"), MarginalCandidate("Gamma")),
        model_probs=np.asarray(probs),
        log_evidences=np.log(np.asarray(probs)),
        param_samples=(gauss, gamma),
        log_posteriors=(np.zeros(chain_length), np.zeros(chain_length)),
        map_estimates=(gauss[0], gamma[0]),
        acceptance_rates=(0.3, 0.3),
    )


@pytest.fixture
def tiny_inference():
    return InferenceConfig(
        n_prior_samples=300, mcmc=McmcConfig(chain_length=400, burn_in=100, thinning=2)
    )


class TestDrawMarginals:
    def test_model_frequency(self):
        draws = draw_marginals(fake_posterior(), 10_000, seed=1)
        share = np.mean([d.model_index == 0 for d in draws])
        assert abs(share - 0.75) < 0.02
        assert all(d.spec.family.value == ("Gaussian", "Gamma")[d.model_index] for d in draws)

    def test_specs_come_from_chain(self):
        posterior = fake_posterior()
        for draw in draw_marginals(posterior, 200, seed=2):
            expected = posterior.param_samples[draw.model_index][draw.chain_index]
            assert draw.spec.params == tuple(expected)

    def test_lhs_is_stratified(self):
        draws = draw_marginals(fake_posterior(), 1000, seed=3, method="lhs")
        assert abs(sum(d.model_index == 0 for d in draws) - 750) <= 1
        chains = [d.chain_index for d in draws if d.model_index == 0]
        counts = np.bincount(chains, minlength=40)
        assert counts.min() >= 17 and counts.max() <= 21

    def test_uniform_model_selection(self):
        draws = draw_marginals(fake_posterior(), 10_000, seed=4, model_selection="uniform")
        assert abs(np.mean([d.model_index == 0 for d in draws]) - 0.5) < 0.02

    @pytest.mark.parametrize(
        "kwargs", [{"method": "sobol"}, {"model_selection": "map"}, {"n_td": 0}]
    )
    def test_invalid_options(self, kwargs):
        options = {"n_td": 10, **kwargs}
        with pytest.raises(InputError):
            draw_marginals(fake_posterior(), seed=0, **options)

    def test_pairs_are_independent_streams(self):
        posterior = fake_posterior()
        ensemble = draw_marginal_pairs(posterior, posterior, 500, seed=5)
        assert ensemble.n_td == 500
        first = [p[0].chain_index for p in ensemble.pairs]
        second = [p[1].chain_index for p in ensemble.pairs]
        assert first != second

    def test_reproducible(self):
        posterior = fake_posterior()
        first = draw_marginal_pairs(posterior, posterior, 50, seed=6)
        assert first.pairs == draw_marginal_pairs(posterior, posterior, 50, seed=6).pairs


class TestInferMarginals:
    def test_too_few_data(self, fast_inference, marginal_candidates):
        with pytest.raises(InputError):
            infer_marginals([1.0, 2.0], marginal_candidates, fast_inference)

    def test_non_finite_data(self, fast_inference, marginal_candidates):
        with pytest.raises(InputError):
            infer_marginals([1.0, np.nan, 2.0, 3.0], marginal_candidates, fast_inference)


class TestPseudoObservationKey:
    def test_quantization(self, frank3_u):
        jitter = frank3_u + 1e-8
        assert pseudo_observation_key(frank3_u) == pseudo_observation_key(jitter)
        assert pseudo_observation_key(frank3_u) != pseudo_observation_key(frank3_u + 1e-5)

    def test_candidate_names_are_part_of_key(self, frank3_u):
        assert pseudo_observation_key(frank3_u, ["Frank"]) != pseudo_observation_key(
            frank3_u, ["Frank", "Gumbel"]
        )


class TestCopulaInferenceCache:
    def test_get_or_compute_calls_once(self):
        cache = CopulaInferenceCache()
        calls = []

        def compute():
            calls.append(1)
            return fake_posterior()

        first = cache.get_or_compute("k", compute)
        second = cache.get_or_compute("k", compute)
        assert first is second
        assert len(calls) == 1
        assert (cache.hits, cache.misses) == (1, 1)
        assert "k" in cache and len(cache) == 1

    def test_identical_pairs_share_inference(self, rng, tiny_inference):
        data = rng.normal(size=(60, 2))
        posterior = fake_posterior(probs=(1.0 - 1e-9, 1e-9))
        pair = (MarginalDraw(gaussian(), 0, 0), MarginalDraw(gaussian(), 0, 0))
        marginals = MarginalEnsemble((posterior, posterior), (pair, pair, pair))
        cache = CopulaInferenceCache()
        ensemble = infer_pair_ensemble(
            data,
            marginals,
            [CopulaCandidate("Gaussian"), CopulaCandidate("Frank")],
            tiny_inference,
            n_tc=4,
            seed=1,
            cache=cache,
        )
        assert len(cache) == 1
        assert ensemble.size == 12
        posteriors = {id(e.copulas.posterior) for e in ensemble.entries}
        assert len(posteriors) == 1


class TestConditionalCopulas:
    def test_draw_copulas(self, frank3_u, fast_inference, copula_candidates):
        posterior = infer_models(copula_candidates, frank3_u, fast_inference, seed=2)
        copulas = draw_copulas(posterior, 50, seed=3)
        assert copulas.n_tc == 50
        assert copulas.model_names == tuple(posterior.names)
        for draw in copulas.draws:
            assert draw.spec == posterior.spec(draw.model_index, draw.chain_index)

    def test_draw_count_checked(self):
        with pytest.raises(InputError):
            draw_copulas(fake_posterior(), 0)

    def test_model_index_must_match(self):
        draw = CopulaDraw(CopulaSpec("Frank", (2.0,)), 0, 0)
        with pytest.raises(InputError):
            ConditionalCopulaSet((draw,), ("Clayton",), (1.0,))

    def test_fixed(self):
        fixed = ConditionalCopulaSet.fixed(CopulaSpec("Gaussian", (0.8,)))
        assert fixed.n_tc == 1
        assert fixed.model_probs == (1.0,)


class TestJointLogPdf:
    def test_gaussian_copula_with_normal_margins(self):
        rho = 0.6
        pair = (gaussian(1.0, 2.0), gaussian(-1.0, 0.5))
        x = np.array([[0.0, -1.2], [2.5, -0.4], [1.0, -1.0]])
        cov = [[4.0, rho * 2.0 * 0.5], [rho * 2.0 * 0.5, 0.25]]
        expected = stats.multivariate_normal(mean=[1.0, -1.0], cov=cov).logpdf(x)
        assert_allclose(joint_log_pdf(pair, CopulaSpec("Gaussian", (rho,)), x), expected)

    def test_independence_factorizes(self):
        pair = (gaussian(), MarginalSpec("Gamma", (2.0, 1.5)))
        x = np.array([0.3, 2.0])
        expected = stats.norm.logpdf(0.3) + stats.gamma.logpdf(2.0, 2.0, scale=1.5)
        assert_allclose(joint_log_pdf(pair, CopulaSpec("Independence", ()), x), expected)

    def test_outside_support(self):
        pair = (gaussian(), MarginalSpec("Gamma", (2.0, 1.5)))
        values = joint_log_pdf(pair, CopulaSpec("Frank", (3.0,)), [[0.0, -1.0], [0.0, 1.0]])
        assert values[0] == -np.inf
        assert np.isfinite(values[1])


class TestJointEnsemble:
    def test_every_candidate_addressable(self):
        copulas = [CopulaSpec("Frank", (t,)) for t in (1.0, 2.0, 3.0)]
        ensemble = make_ensemble(
            [((gaussian(), gaussian()), copulas), ((gaussian(1.0), gaussian(2.0)), copulas)]
        )
        assert (ensemble.n_td, ensemble.n_tc, ensemble.size) == (2, 3, 6)
        seen = {ensemble.candidate(l, k) for l in range(2) for k in range(3)}
        assert len(seen) == 6
        first, second, copula = ensemble.candidate(1, 2)
        assert (first.params[0], second.params[0], copula.params[0]) == (1.0, 2.0, 3.0)

    def test_candidate_log_pdf(self, toy_ensemble):
        x = np.array([[0.1, 0.2]])
        first, second, copula = toy_ensemble.candidate(1, 0)
        assert_allclose(
            toy_ensemble.candidate_log_pdf(1, 0, x), joint_log_pdf((first, second), copula, x)
        )

    def test_serialization_round_trip(self, toy_ensemble):
        text = json.dumps(toy_ensemble.to_dict())
        restored = JointEnsemble.from_dict(json.loads(text))
        assert restored == toy_ensemble
        assert restored.ensemble_hash() == toy_ensemble.ensemble_hash()

    def test_hash_tracks_content(self, toy_ensemble):
        other = make_ensemble(
            [((gaussian(), gaussian()), [CopulaSpec("Frank", (3.0 + 1e-9,))] * 2)] * 2
        )
        assert other.ensemble_hash() != toy_ensemble.ensemble_hash()

    def test_unequal_copula_counts(self):
        entries = make_ensemble(
            [((gaussian(), gaussian()), [CopulaSpec("Frank", (3.0,))])]
        ).entries + make_ensemble(
            [((gaussian(), gaussian()), [CopulaSpec("Frank", (3.0,))] * 2)]
        ).entries
        with pytest.raises(InputError):
            JointEnsemble(("x1", "x2"), entries)

    def test_assemble_count_mismatch(self):
        posterior = fake_posterior()
        marginals = draw_marginal_pairs(posterior, posterior, 3, seed=0)
        fixed = ConditionalCopulaSet.fixed(CopulaSpec("Independence", ()))
        with pytest.raises(InputError):
            assemble_ensemble(marginals, [fixed, fixed])


class TestDependenceModes:
    @pytest.mark.parametrize(
        "mode, family", [("independence", CopulaFamily.INDEPENDENCE), ("gaussian_rho", "Gaussian")]
    )
    def test_fixed_modes_skip_inference(self, mode, family, tiny_inference):
        posterior = fake_posterior()
        marginals = draw_marginal_pairs(posterior, posterior, 4, seed=0)
        cache = CopulaInferenceCache()
        ensemble = infer_pair_ensemble(
            None,
            marginals,
            [],
            tiny_inference,
            n_tc=10,
            dependence_mode=mode,
            rho=0.3,
            cache=cache,
        )
        assert len(cache) == 0
        assert ensemble.n_tc == 1
        assert ensemble.dependence_mode == mode
        assert all(e.copulas.draws[0].spec.family == family for e in ensemble.entries)

    def test_gaussian_rho_value(self, tiny_inference):
        posterior = fake_posterior()
        marginals = draw_marginal_pairs(posterior, posterior, 2, seed=0)
        ensemble = infer_pair_ensemble(
            None, marginals, [], tiny_inference, n_tc=1, dependence_mode="gaussian_rho", rho=0.3
        )
        assert ensemble.candidate(0, 0)[2] == CopulaSpec("Gaussian", (0.3,))

    def test_unknown_mode(self, tiny_inference):
        posterior = fake_posterior()
        marginals = draw_marginal_pairs(posterior, posterior, 2, seed=0)
        with pytest.raises(InputError):
            infer_pair_ensemble(None, marginals, [], tiny_inference, 1, dependence_mode="vine")


class TestBlockEnsembles:
    @pytest.fixture
    def block_data(self, rng):
        u = copula_sample(CopulaSpec("Frank", (3.0,)), 80, rng)
        return {
            "x1": stats.norm.ppf(u[:, 0]),
            "x2": stats.norm.ppf(u[:, 1], 2.0, 0.5),
            "x3": rng.gamma(3.0, 1.0, 80),
        }

    def _infer(self, data, cfg, seed=1, **kwargs):
        candidates = [MarginalCandidate("Gaussian"), MarginalCandidate("Gamma")]
        return infer_block_ensembles(
            data,
            pairs=[("x1", "x2")],
            singles=["x3"],
            marginal_candidates={
                "x1": candidates[:1],
                "x2": candidates[:1],
                "x3": candidates,
            },
            copula_candidates=[CopulaCandidate("Gaussian"), CopulaCandidate("Frank")],
            cfg=cfg,
            n_td=5,
            n_tc=3,
            seed=seed,
            **kwargs,
        )

    def test_structure(self, block_data, tiny_inference):
        blocks = self._infer(block_data, tiny_inference)
        assert blocks.variables == ["x1", "x2", "x3"]
        assert (blocks.n_td, blocks.n_tc) == (5, 3)
        assert blocks.pairs[0].variables == ("x1", "x2")
        assert blocks.singles[0].variable == "x3"
        assert set(blocks.marginal_posteriors) == {"x1", "x2", "x3"}

    def test_deterministic_and_serializable(self, block_data, tiny_inference):
        first = self._infer(block_data, tiny_inference)
        second = self._infer(block_data, tiny_inference)
        assert first.ensemble_hash() == second.ensemble_hash()
        restored = BlockEnsembles.from_dict(json.loads(json.dumps(first.to_dict())))
        assert restored.ensemble_hash() == first.ensemble_hash()
        assert self._infer(block_data, tiny_inference, seed=2).ensemble_hash() != (
            first.ensemble_hash()
        )

    def test_variable_in_two_blocks(self, block_data, tiny_inference):
        with pytest.raises(InputError):
            infer_block_ensembles(
                block_data, [("x1", "x2")], ["x1"], {}, [], tiny_inference, n_td=2, n_tc=1
            )

    def test_missing_data(self, block_data, tiny_inference):
        with pytest.raises(InputError):
            infer_block_ensembles(
                block_data, [("x1", "x9")], [], {}, [], tiny_inference, n_td=2, n_tc=1
            )

    def test_blocks_share_n_td(self, toy_ensemble):
        single = SingleEnsemble("x3", (MarginalDraw(gaussian(), 0, 0),))
        with pytest.raises(InputError):
            BlockEnsembles((toy_ensemble,), (single,))
