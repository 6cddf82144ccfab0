import numpy as np
import pytest

from hohmm.gmm import GaussianMixture
from hohmm.model import FeatureSequence, HmmModel

import oracles


def test_rejects_wrong_tensor_set():
    rng = np.random.default_rng(0)
    m = oracles.random_model(rng, 3, 2)
    with pytest.raises(ValueError, match="trans3 must be absent"):
        HmmModel(2, m.initial, m.trans1, m.emissions, trans2=m.trans2, trans3=m.trans3)
    with pytest.raises(ValueError, match="requires trans2"):
        HmmModel(2, m.initial, m.trans1, m.emissions)


def test_rejects_non_stochastic_rows():
    rng = np.random.default_rng(1)
    m = oracles.random_model(rng, 1, 2)
    bad = m.trans1.copy()
    bad[0] = [0.6, 0.6]
    with pytest.raises(ValueError, match="sum to 1"):
        m.replace(trans1=bad)
    with pytest.raises(ValueError):
        m.replace(initial=[0.5, 0.6])


def test_model_arrays_are_read_only():
    m = oracles.random_model(np.random.default_rng(2), 2, 2)
    with pytest.raises(ValueError):
        m.trans2[0, 0, 0] = 1.0


def test_gmm_density_matches_scipy():
    rng = np.random.default_rng(3)
    g = oracles.random_model(rng, 1, 1, dim=4, mixtures=3).emissions[0]
    x = rng.standard_normal((5, 4))
    got = g.log_density(x)
    expected = [oracles.gmm_logpdf(g, row) for row in x]
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_gmm_variance_floor():
    with pytest.raises(ValueError, match="below floor"):
        GaussianMixture([1.0], [[0.0]], [[1e-6]], variance_floor=1e-4)
    with pytest.raises(ValueError):
        GaussianMixture([0.5, 0.6], [[0.0], [1.0]], [[1.0], [1.0]])


def test_feature_sequence_invariants():
    fs = FeatureSequence(np.ones((4, 3)))
    assert (fs.T, fs.D) == (4, 3)
    with pytest.raises(ValueError):
        FeatureSequence(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        FeatureSequence(np.array([[np.nan, 1.0]]))
