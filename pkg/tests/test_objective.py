import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.exc import DomainError
from src.models import TAG_ORDER, AdvantageVariant, Candidate, CandidateSet, Context, LangTag, SelectionStrategy
from src.services.exploration import select_candidates
from src.services.objective import (
    batch_objective, clip_branch, clipped_term, compute_advantages, exact_kl, kl_estimate, kl_estimates, tlpo_objective,
)
from src.services.policy import PolicyTable, SparseGradient
from tests.conftest import make_vocab
from tests.oracles import advantage_oracle

W, U, G = AdvantageVariant.TLPO_WEIGHTED, AdvantageVariant.UNWEIGHTED, AdvantageVariant.GRPO_STYLE


def make_set(tokens, probs, rewards, window=(0,)) -> CandidateSet:
    return CandidateSet(
        context=Context(window=window),
        candidates=[Candidate(token=t, p_old=p, reward=r) for t, p, r in zip(tokens, probs, rewards)],
        strategy=SelectionStrategy.MULTINOMIAL,
    )


def random_set(rng, n):
    probs = rng.uniform(0.01, 1.0, size=n)
    rewards = rng.choice([1.0, -1.0], size=n)
    rewards[0], rewards[1] = 1.0, -1.0
    rng.shuffle(rewards)
    return make_set(range(n), probs.tolist(), rewards.tolist())


@pytest.fixture
def vocab6():
    return make_vocab(
        (' 가', LangTag.TARGET), (' 나', LangTag.TARGET), (' 다', LangTag.TARGET),
        (' да', LangTag.CONFUSED), (' нет', LangTag.CONFUSED), (' yes', LangTag.ENGLISH),
    )


# = ПРЕИМУЩЕСТВА =
def test_weighted_advantages_known_example():
    adv = compute_advantages(make_set(range(4), [0.4, 0.3, 0.2, 0.1], [1, -1, 1, -1]))
    assert adv.mu == pytest.approx(0.2, abs=1e-15)
    assert adv.z == pytest.approx(0.96, abs=1e-15)
    assert np.allclose(adv.values, [1 / 3, -0.375, 1 / 6, -0.125], atol=1e-15)
    assert not adv.degenerate


def test_two_candidates_split_in_half():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p1, p2 = rng.uniform(0.001, 1.0, size=2)
        adv = compute_advantages(make_set([0, 1], [p1, p2], [1, -1]))
        assert np.allclose(adv.values, [0.5, -0.5], atol=1e-12)


@pytest.mark.parametrize('variant', list(AdvantageVariant))
@pytest.mark.parametrize('reward', [1.0, -1.0])
def test_equal_rewards_are_degenerate(variant, reward):
    adv = compute_advantages(make_set(range(3), [0.5, 0.3, 0.2], [reward] * 3), variant)
    assert adv.degenerate
    assert adv.values == [0.0, 0.0, 0.0]
    assert adv.mu == reward


def test_unscored_set_is_rejected():
    cands = CandidateSet(
        context=Context(window=(0,)),
        candidates=[Candidate(token=0, p_old=0.5), Candidate(token=1, p_old=0.4)],
        strategy=SelectionStrategy.RANKED,
    )
    with pytest.raises(DomainError):
        compute_advantages(cands)


def test_advantages_match_standalone_evaluator():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        cands = random_set(rng, int(rng.integers(2, 17)))
        probs, rewards = cands.probs.tolist(), cands.rewards.tolist()

        expected, mu, z = advantage_oracle.weighted(probs, rewards)
        adv = compute_advantages(cands, W)
        assert np.allclose(adv.values, expected, rtol=0, atol=1e-12)
        assert adv.mu == pytest.approx(mu, abs=1e-12)
        assert adv.z == pytest.approx(z, abs=1e-12)
        assert abs(np.abs(adv.array).sum() - 1.0) <= 1e-12

        expected, mu = advantage_oracle.unweighted(rewards)
        assert np.allclose(compute_advantages(cands, U).values, expected, rtol=0, atol=1e-12)

        expected, mu, sigma = advantage_oracle.grpo_style(rewards)
        adv = compute_advantages(cands, G)
        assert np.allclose(adv.values, expected, rtol=0, atol=1e-12)
        assert adv.z == pytest.approx(sigma, abs=1e-12)


def test_advantage_signs_follow_reward_minus_mean():
    rng = np.random.default_rng(8)
    for _ in range(200):
        cands = random_set(rng, int(rng.integers(2, 17)))
        for variant in AdvantageVariant:
            adv = compute_advantages(cands, variant)
            assert np.array_equal(np.sign(adv.array), np.sign(cands.rewards - adv.mu))


def test_weighted_advantages_keep_probability_order_within_reward_group():
    rng = np.random.default_rng(9)
    for _ in range(200):
        cands = random_set(rng, int(rng.integers(3, 17)))
        adv = compute_advantages(cands, W).array
        probs, rewards = cands.probs, cands.rewards
        for i in range(cands.n):
            for j in range(cands.n):
                if rewards[i] == rewards[j]:
                    assert (abs(adv[i]) >= abs(adv[j])) == (probs[i] >= probs[j])


@given(st.floats(min_value=0.01, max_value=1.0), st.integers(min_value=0, max_value=2**32 - 1))
def test_weighted_advantages_are_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    cands = random_set(rng, int(rng.integers(2, 17)))
    scaled = make_set(range(cands.n), (cands.probs * scale).tolist(), cands.rewards.tolist())
    assert np.allclose(compute_advantages(cands).values, compute_advantages(scaled).values, rtol=0, atol=1e-12)


# = KL =
def test_kl_estimate_examples():
    assert kl_estimate(0.3, 0.3) == 0.0
    assert kl_estimate(0.1, 0.2) == pytest.approx(2 - math.log(2) - 1, abs=1e-15)
    assert round(kl_estimate(0.1, 0.2), 4) == 0.3069
    assert kl_estimate(0.5, 0.25) > 0.0


@pytest.mark.parametrize('p_theta, p_ref', [(0.0, 0.5), (0.5, 0.0), (-0.1, 0.5), (1.5, 0.5), (float('nan'), 0.5)])
def test_kl_estimate_domain(p_theta, p_ref):
    with pytest.raises(DomainError):
        kl_estimate(p_theta, p_ref)


@given(st.floats(min_value=1e-12, max_value=1.0), st.floats(min_value=1e-12, max_value=1.0))
def test_kl_estimate_is_non_negative(p_theta, p_ref):
    value = kl_estimate(p_theta, p_ref)
    assert value >= 0.0
    if p_theta == p_ref:
        assert value == 0.0


def test_kl_estimates_non_negative_on_a_million_pairs():
    rng = np.random.default_rng(0)
    p_theta = rng.uniform(1e-9, 1.0, size=1_000_000)
    p_ref = rng.uniform(1e-9, 1.0, size=1_000_000)
    assert np.all(kl_estimates(p_theta, p_ref) >= 0.0)


def test_exact_kl():
    p = np.array([0.5, 0.5])
    assert exact_kl(p, p) == 0.0
    expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
    assert exact_kl(p, np.array([0.25, 0.75])) == pytest.approx(expected, abs=1e-15)


# = КЛИП =
def test_clipped_term_examples():
    for eps in (0.1, 0.2, 0.5):
        assert clipped_term(0.3, 0.3, 0.7, eps) == 0.7
    assert clipped_term(0.5, 0.25, 1.0, 0.2) == pytest.approx(1.2, abs=1e-15)
    assert clipped_term(0.5, 0.25, -1.0, 0.2) == -2.0


def test_clipped_term_preconditions():
    with pytest.raises(DomainError):
        clipped_term(0.5, 0.0, 1.0, 0.2)
    with pytest.raises(DomainError):
        clipped_term(0.5, 0.5, 1.0, 1.0)


def test_clip_tie_uses_unclipped_branch():
    assert clip_branch(1.2, 1.0, 0.2) == (1.2, True)
    assert clip_branch(2.0, 1.0, 0.2) == (1.2, False)
    assert clip_branch(0.5, -1.0, 0.2) == (-0.8, False)


# = ЦЕЛЕВАЯ ФУНКЦИЯ =
def random_policy(vocab, rng, scale=2.0) -> PolicyTable:
    return PolicyTable(
        vocab, rows={(0,): rng.normal(size=vocab.size)},
        lang_bias=rng.normal(size=len(TAG_ORDER)), lang_scale=scale,
    )


def scored_set(policy, rng, n, variant=W):
    cands = select_candidates(policy, Context(window=(0,)), n)
    rewards = rng.choice([1.0, -1.0], size=n)
    rewards[0], rewards[-1] = 1.0, -1.0
    cands = cands.with_rewards(rng.permutation(rewards))
    return cands, compute_advantages(cands, variant)


def expected_gradient(theta, cands, weights) -> SparseGradient:
    grad = SparseGradient()
    for token, weight in zip(cands.tokens, weights):
        grad.accumulate(theta.logprob_grad((0,), int(token)), weight / cands.n)
    return grad


def test_identity_snapshot(vocab6):
    rng = np.random.default_rng(4)
    theta = random_policy(vocab6, rng)
    cands, adv = scored_set(theta, rng, 4)
    value, grad = tlpo_objective(cands, adv, theta, theta.snapshot(), eps=0.2, beta=0.04)

    assert value.surrogate == pytest.approx(sum(adv.values) / 4, abs=1e-15)
    assert value.kl == 0.0
    assert all(t.ratio == 1.0 and not t.clipped for t in value.terms)
    expected = expected_gradient(theta, cands, adv.values)
    assert np.allclose(grad.rows[(0,)], expected.rows[(0,)], atol=1e-15)
    assert np.allclose(grad.lang_bias, expected.lang_bias, atol=1e-14)


def test_gradient_without_kl_inside_clip_band(vocab6):
    rng = np.random.default_rng(5)
    old = random_policy(vocab6, rng)
    cands, adv = scored_set(old, rng, 5)
    theta = PolicyTable(vocab6, rows={(0,): old.rows[(0,)] + 0.01 * rng.normal(size=6)},
                        lang_bias=old.lang_bias, lang_scale=old.lang_scale)
    value, grad = tlpo_objective(cands, adv, theta, old.snapshot(), eps=0.2, beta=0.0)

    assert not any(t.clipped for t in value.terms)
    weights = [a * t.p_theta / t.p_old for a, t in zip(adv.values, value.terms)]
    expected = expected_gradient(theta, cands, weights)
    assert np.allclose(grad.rows[(0,)], expected.rows[(0,)], atol=1e-14)
    assert np.allclose(grad.lang_bias, expected.lang_bias, atol=1e-14)


def _flat(vocab, grad: SparseGradient) -> np.ndarray:
    row = grad.rows.get((0,), np.zeros(vocab.size))
    bias = grad.lang_bias if grad.lang_bias is not None else np.zeros(len(TAG_ORDER))
    return np.concatenate([row, bias])


def _finite_difference(theta, cands, adv, ref, eps, beta, h) -> np.ndarray:
    params = np.concatenate([theta.rows[(0,)], theta.lang_bias])
    size = theta.vocab.size

    def total(values):
        probe = PolicyTable(theta.vocab, rows={(0,): values[:size]}, lang_bias=values[size:], lang_scale=theta.lang_scale)
        return tlpo_objective(cands, adv, probe, ref, eps, beta)[0].total

    fd = np.zeros_like(params)
    for j in range(params.size):
        up, down = params.copy(), params.copy()
        up[j] += h
        down[j] -= h
        fd[j] = (total(up) - total(down)) / (2 * h)
    return fd


def test_gradient_matches_finite_differences(vocab6):
    rng = np.random.default_rng(6)
    eps, checked = 0.2, 0
    while checked < 100:
        old = random_policy(vocab6, rng)
        cands, adv = scored_set(old, rng, int(rng.integers(2, 7)), variant=list(AdvantageVariant)[checked % 3])
        ref = random_policy(vocab6, rng).snapshot()
        theta = PolicyTable(vocab6, rows={(0,): old.rows[(0,)] + 0.3 * rng.normal(size=6)},
                            lang_bias=old.lang_bias + 0.05 * rng.normal(size=len(TAG_ORDER)), lang_scale=old.lang_scale)
        beta = (0.0, 0.04, 0.5)[checked % 3]

        value, grad = tlpo_objective(cands, adv, theta, ref, eps, beta)
        ratios = np.array([t.ratio for t in value.terms])
        if np.any(np.abs(ratios - (1 - eps)) < 1e-3) or np.any(np.abs(ratios - (1 + eps)) < 1e-3):
            continue
        analytic = _flat(vocab6, grad)
        fd = _finite_difference(theta, cands, adv, ref, eps, beta, h=1e-5)
        assert np.linalg.norm(fd - analytic) <= 1e-5 * max(np.linalg.norm(analytic), 1e-6)
        checked += 1


def test_small_ascent_step_moves_extreme_tokens(vocab6):
    rng = np.random.default_rng(7)
    for trial in range(50):
        old = PolicyTable(vocab6, rows={(0,): rng.normal(size=6)})
        cands, adv = scored_set(old, rng, int(rng.integers(2, 7)), variant=list(AdvantageVariant)[trial % 3])
        theta = old.copy()
        _, grad = tlpo_objective(cands, adv, theta, old.snapshot(), eps=0.2, beta=0.04)
        before = theta.next_token_dist((0,))
        theta.apply_update(grad, 1e-3)
        after = theta.next_token_dist((0,))

        best, worst = cands.tokens[np.argmax(adv.array)], cands.tokens[np.argmin(adv.array)]
        assert after[best] > before[best]
        assert after[worst] < before[worst]


def test_degenerate_set_contributes_nothing(vocab6):
    theta = PolicyTable(vocab6)
    cands = make_set([0, 1], [0.5, 0.5], [1, 1])
    value, grad = tlpo_objective(cands, compute_advantages(cands), theta, theta.snapshot(), 0.2, 0.04)
    assert value.degenerate
    assert grad.is_zero()


def test_batch_objective_averages_active_sets(vocab6):
    rng = np.random.default_rng(10)
    theta = random_policy(vocab6, rng)
    ref = theta.snapshot()
    first, second = scored_set(theta, rng, 3), scored_set(theta, rng, 5)
    flat = make_set([0, 1], [0.5, 0.4], [-1, -1])
    degenerate = (flat, compute_advantages(flat))

    total, grad, values = batch_objective([first, degenerate, second], theta, ref, 0.2, 0.04)
    a, ga = tlpo_objective(*first, theta, ref, 0.2, 0.04)
    b, gb = tlpo_objective(*second, theta, ref, 0.2, 0.04)
    assert len(values) == 2
    assert total == pytest.approx((a.total + b.total) / 2, abs=1e-15)
    assert np.allclose(grad.rows[(0,)], (ga.rows[(0,)] + gb.rows[(0,)]) / 2, atol=1e-15)

    total, grad, values = batch_objective([degenerate], theta, ref, 0.2, 0.04)
    assert (total, values) == (0.0, [])
    assert grad.is_zero()
