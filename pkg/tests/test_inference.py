import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp

from hohmm.gmm import GaussianMixture
from hohmm.inference import (
    backward,
    expand_to_first_order,
    forward,
    joint_log_prob,
    sequence_log_prob,
    viterbi,
    viterbi_trellis,
)
from hohmm.model import HmmModel

import oracles


def single_state_model(order, dim=1):
    one = {k: np.ones((1,) * k) for k in range(2, 5)}
    return HmmModel(
        order, [1.0], one[2], [GaussianMixture.single(np.zeros(dim), 1.0)],
        trans2=one[3] if order >= 2 else None, trans3=one[4] if order >= 3 else None,
    )


# --- sequence_log_prob -------------------------------------------------------


@pytest.mark.parametrize("order", [1, 2, 3])
def test_single_state_chain_has_probability_one(order):
    m = single_state_model(order)
    assert sequence_log_prob(m, [0] * 7) == 0.0


def test_initial_factor_only():
    rng = np.random.default_rng(1)
    m = oracles.random_model(rng, 3, 2)
    m = m.replace(initial=[0.3, 0.7])
    assert sequence_log_prob(m, [1]) == math.log(0.7)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_sequence_log_prob_matches_scalar_product(order):
    rng = np.random.default_rng(10 + order)
    m = oracles.random_model(rng, order, 2)
    path = [0, 1, 1, 0, 1]
    expected = math.log(oracles.path_prob(m, path))
    assert sequence_log_prob(m, path) == pytest.approx(expected, rel=1e-12)


def test_sequence_log_prob_rejects_bad_paths():
    m = oracles.random_model(np.random.default_rng(0), 2, 2)
    with pytest.raises(ValueError):
        sequence_log_prob(m, [])
    with pytest.raises(ValueError):
        sequence_log_prob(m, [0, 2])
    with pytest.raises(ValueError):
        sequence_log_prob(m, [-1])


# --- joint_log_prob ----------------------------------------------------------


def test_joint_equals_sequence_when_density_is_one():
    # variance 1/(2 pi) evaluated at the mean gives density exactly 1
    g = GaussianMixture.single([0.0], 1.0 / (2.0 * np.pi))
    m = single_state_model(3).replace(emissions=[g])
    obs = np.zeros((5, 1))
    assert joint_log_prob(m, [0] * 5, obs) == pytest.approx(sequence_log_prob(m, [0] * 5), abs=1e-15)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_joint_minus_sequence_is_emission_sum(order):
    rng = np.random.default_rng(20 + order)
    m = oracles.random_model(rng, order, 3, dim=3, mixtures=2)
    obs = oracles.sample_obs(rng, m, 6)
    path = [2, 0, 1, 1, 2, 0]
    expected = sum(oracles.gmm_logpdf(m.emissions[q], obs[t]) for t, q in enumerate(path))
    got = joint_log_prob(m, path, obs) - sequence_log_prob(m, path)
    assert got == pytest.approx(expected, rel=1e-12)


def test_joint_length_mismatch():
    m = oracles.random_model(np.random.default_rng(0), 1, 2)
    with pytest.raises(ValueError):
        joint_log_prob(m, [0, 1], np.zeros((3, 2)))


def test_path_enumeration_equals_forward_n2_t4():
    rng = np.random.default_rng(3)
    m = oracles.random_model(rng, 3, 2)
    obs = oracles.sample_obs(rng, m, 4)
    scores = [joint_log_prob(m, p, obs) for p in oracles.all_paths(2, 4)]
    _, total = forward(m, obs)
    assert np.exp(logsumexp(scores)) == pytest.approx(np.exp(total), rel=1e-9)


# --- forward -----------------------------------------------------------------


def test_forward_single_state_sums_emissions():
    m = single_state_model(3)
    obs = np.array([[0.3], [-1.0], [2.0]])
    ell = [oracles.gmm_logpdf(m.emissions[0], x) for x in obs]
    _, total = forward(m, obs)
    assert total == pytest.approx(sum(ell), rel=1e-12)


@pytest.mark.parametrize("order", [1, 2, 3])
@pytest.mark.parametrize("T", [1, 2, 3, 5])
def test_forward_matches_enumeration(order, T):
    rng = np.random.default_rng(100 * order + T)
    m = oracles.random_model(rng, order, 2)
    obs = oracles.sample_obs(rng, m, T)
    expected, _, _ = oracles.brute_force(m, obs)
    _, total = forward(m, obs)
    assert total == pytest.approx(expected, rel=1e-9)


def test_forward_alpha3_definition():
    rng = np.random.default_rng(5)
    m = oracles.random_model(rng, 3, 2)
    obs = oracles.sample_obs(rng, m, 4)
    trellis, _ = forward(m, obs)
    j, k, w = 1, 0, 1
    b = [oracles.gmm_logpdf(m.emissions[s], obs[t]) for t, s in enumerate((j, k, w))]
    expected = math.log(m.initial[j] * m.trans1[j, k] * m.trans2[j, k, w]) + sum(b)
    assert trellis.log_values[2, j, k, w] == pytest.approx(expected, rel=1e-12)
    assert np.all(np.isneginf(trellis.log_values[:2]))
    assert [a.shape for a in trellis.ramp] == [(2,), (2, 2)]


def test_forward_order_collapse():
    rng = np.random.default_rng(6)
    first, third = oracles.collapsed_pair(rng, 3)
    obs = oracles.sample_obs(rng, first, 9)
    assert forward(third, obs)[1] == pytest.approx(forward(first, obs)[1], abs=1e-9)


def test_forward_errors():
    m = oracles.random_model(np.random.default_rng(0), 2, 2, dim=2)
    with pytest.raises(ValueError):
        forward(m, np.zeros((0, 2)))
    with pytest.raises(ValueError):
        forward(m, np.zeros((4, 3)))


# --- backward ----------------------------------------------------------------


@pytest.mark.parametrize("order", [1, 2, 3])
def test_backward_is_log_one_at_end(order):
    rng = np.random.default_rng(order)
    m = oracles.random_model(rng, order, 2)
    beta = backward(m, oracles.sample_obs(rng, m, 5))
    assert np.all(beta.log_values[-1] == 0.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_alpha_beta_consistency(order):
    rng = np.random.default_rng(40 + order)
    m = oracles.random_model(rng, order, 2)
    obs = oracles.sample_obs(rng, m, 6)
    alpha, total = forward(m, obs)
    beta = backward(m, obs)
    for t in range(order - 1, 6):
        assert logsumexp(alpha.flat[t] + beta.flat[t]) == pytest.approx(total, rel=1e-9)


def test_posteriors_normalize_n3_t5():
    rng = np.random.default_rng(7)
    m = oracles.random_model(rng, 3, 3)
    obs = oracles.sample_obs(rng, m, 5)
    alpha, total = forward(m, obs)
    beta = backward(m, obs)
    for t in range(2, 5):
        gamma = np.exp(alpha.flat[t] + beta.flat[t] - total)
        assert gamma.sum() == pytest.approx(1.0, abs=1e-9)


def test_backward_needs_full_history():
    m = oracles.random_model(np.random.default_rng(0), 3, 2)
    with pytest.raises(ValueError):
        backward(m, np.zeros((2, 2)))


# --- viterbi -----------------------------------------------------------------


def test_viterbi_left_to_right_forced_path():
    n = 4
    step = np.zeros((n, n))
    for k in range(n):
        step[k, min(k + 1, n - 1)] = 1.0
    emissions = [GaussianMixture.single([float(j)], 0.3) for j in range(n)]
    m = HmmModel(
        3, [1, 0, 0, 0], step, emissions,
        trans2=np.broadcast_to(step, (n, n, n)).copy(),
        trans3=np.broadcast_to(step, (n,) * 4).copy(),
    )
    obs = np.array([[0.1], [3.0], [-2.0], [1.0], [0.5]])
    path, score = viterbi(m, obs)
    forced = [0, 1, 2, 3, 3]
    assert list(path) == forced
    expected = sum(oracles.gmm_logpdf(emissions[q], obs[t]) for t, q in enumerate(forced))
    assert score == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("order", [1, 2, 3])
@pytest.mark.parametrize("T", [1, 2, 5])
def test_viterbi_matches_enumeration(order, T):
    rng = np.random.default_rng(200 + 10 * order + T)
    m = oracles.random_model(rng, order, 2)
    obs = oracles.sample_obs(rng, m, T)
    _, best_path, best = oracles.brute_force(m, obs)
    path, score = viterbi(m, obs)
    assert tuple(path) == best_path
    assert score == pytest.approx(best, abs=1e-9)


def test_viterbi_order_collapse():
    rng = np.random.default_rng(8)
    first, third = oracles.collapsed_pair(rng, 3)
    obs = oracles.sample_obs(rng, first, 10)
    p1, s1 = viterbi(first, obs)
    p3, s3 = viterbi(third, obs)
    assert list(p1) == list(p3)
    assert s3 == pytest.approx(s1, abs=1e-9)


def test_viterbi_ties_go_to_lowest_index():
    m = single_state_model(2)
    two = HmmModel(
        2, [0.5, 0.5], np.full((2, 2), 0.5), [m.emissions[0]] * 2, trans2=np.full((2, 2, 2), 0.5)
    )
    path, _ = viterbi(two, np.zeros((4, 1)))
    assert list(path) == [0, 0, 0, 0]


def test_viterbi_backpointers_in_range():
    rng = np.random.default_rng(9)
    m = oracles.random_model(rng, 3, 3)
    tr = viterbi_trellis(m, oracles.sample_obs(rng, m, 7))
    assert tr.backpointers.shape == tr.log_values.shape
    assert tr.backpointers.min() >= 0 and tr.backpointers.max() < 3


# --- composite expansion -----------------------------------------------------


@pytest.mark.parametrize("order", [2, 3])
def test_composite_forward_equals_native(order):
    rng = np.random.default_rng(50 + order)
    m = oracles.random_model(rng, order, 2)
    obs = oracles.sample_obs(rng, m, 6)
    chain = expand_to_first_order(m)
    assert chain.model.num_states == 2**order
    assert chain.forward_log_likelihood(obs) == pytest.approx(forward(m, obs)[1], abs=1e-9)


def test_composite_block_structure_of_collapsed_model():
    rng = np.random.default_rng(11)
    first, third = oracles.collapsed_pair(rng, 3)
    C = expand_to_first_order(third).model.trans1
    a = first.trans1

    def idx(i, j, k):
        return (i * 3 + j) * 3 + k

    for (i, j, k, w) in [(0, 0, 0, 1), (2, 1, 0, 2), (1, 2, 2, 0), (0, 1, 1, 1)]:
        assert C[idx(i, j, k), idx(j, k, w)] == a[k, w]
    assert C[idx(0, 0, 0), idx(1, 0, 0)] == 0.0


def test_composite_single_state():
    chain = expand_to_first_order(single_state_model(3))
    assert chain.model.num_states == 1
    assert chain.model.trans1[0, 0] == 1.0


def test_composite_rejects_first_order():
    with pytest.raises(ValueError):
        expand_to_first_order(single_state_model(1))


# --- properties --------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    order=st.sampled_from([1, 2, 3]),
    n=st.integers(1, 3),
    T=st.integers(1, 6),
)
def test_path_sum_and_viterbi_bound(seed, order, n, T):
    rng = np.random.default_rng(seed)
    m = oracles.random_model(rng, order, n)
    obs = oracles.sample_obs(rng, m, T)
    expected, _, best = oracles.brute_force(m, obs)
    _, total = forward(m, obs)
    _, score = viterbi(m, obs)
    assert total == pytest.approx(expected, rel=1e-9)
    assert score == pytest.approx(best, abs=1e-9)
    assert score <= total + 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 4), T=st.integers(3, 20))
def test_composite_equivalence_property(seed, n, T):
    rng = np.random.default_rng(seed)
    m = oracles.random_model(rng, 3, n)
    obs = oracles.sample_obs(rng, m, T)
    chain = expand_to_first_order(m)
    assert chain.forward_log_likelihood(obs) == pytest.approx(forward(m, obs)[1], abs=1e-9)
