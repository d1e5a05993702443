"""Tests for the known-truth data generators."""

import numpy as np
import pytest

from imprecise_copula.config import TruthConfig
from imprecise_copula.copula_core import CopulaSpec, empirical_kendall_tau, kendall_tau
from imprecise_copula.errors import InputError
from imprecise_copula.models import CONSTITUENT_MEANS, CONSTITUENT_ORDER
from imprecise_copula.simulation import COMPOSITE_PAIRS, simulate_truth


def test_frank_demo_dependence_and_margins():
    frame = simulate_truth(TruthConfig("frank_demo", n=5000, seed=1))
    assert list(frame.columns) == ["x1", "x2"]
    expected = kendall_tau(CopulaSpec("Frank", (3.0,)))
    assert abs(empirical_kendall_tau(frame.to_numpy()) - expected) < 0.03
    assert abs(frame["x1"].mean()) < 0.05
    assert abs(frame["x2"].std() - 1.0) < 0.05


def test_frank_unit_stays_in_square():
    u = simulate_truth(TruthConfig("frank_unit", theta=-4.0), n=500, seed=2).to_numpy()
    assert np.all((u > 0.0) & (u < 1.0))
    assert empirical_kendall_tau(u) < 0.0


def test_composite_constituents():
    frame = simulate_truth(TruthConfig("composite"), n=4000, seed=3)
    assert tuple(frame.columns) == CONSTITUENT_ORDER
    for name in CONSTITUENT_ORDER:
        assert abs(frame[name].mean() / CONSTITUENT_MEANS[name] - 1.0) < 0.01
        assert abs(frame[name].std() / CONSTITUENT_MEANS[name] - 0.05) < 0.005
    for a, b in COMPOSITE_PAIRS:
        assert empirical_kendall_tau(frame[[a, b]].to_numpy()) < -0.5
    assert abs(np.corrcoef(frame["V_f"], frame["E_m"])[0, 1]) < 0.05


def test_seed_fixes_data():
    truth = TruthConfig("frank_demo", n=50, seed=9)
    assert simulate_truth(truth).equals(simulate_truth(truth))
    assert not simulate_truth(truth).equals(simulate_truth(truth, seed=10))


@pytest.mark.parametrize("preset, n", [("gumbel_demo", 10), ("frank_demo", 0)])
def test_invalid_requests(preset, n):
    with pytest.raises(InputError):
        simulate_truth(TruthConfig(preset), n=n)
