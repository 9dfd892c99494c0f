from typing import Sequence

import numpy as np

from src.config import config
from src.exc import ConfigurationError, DegenerateCandidateError
from src.logconf import opt_logger as log
from src.models import Candidate, CandidateSet, Context, SelectionStrategy
from src.services.detector import LanguageDetector
from src.services.policy import PolicyTable, SeedLike

logger = log.setup_logger('exploration')


def select_candidates(
        policy: PolicyTable,
        ctx: Context,
        n: int,
        strategy: SelectionStrategy = SelectionStrategy.RANKED,
        seed: SeedLike = 0,
        confusion_token: int | None = None,
) -> CandidateSet:
    """
    RANKED: точные top-N по вероятности, при равенстве - меньший id.
    MULTINOMIAL: N различных токенов без возвращения, пропорционально вероятности.
    Токены с нулевой вероятностью в набор не попадают
    """
    size = policy.vocab.size
    if n < 2 or n > size:
        raise ConfigurationError(f'candidate count N={n} must lie in [2, {size}]')

    probs = policy.next_token_dist(ctx)
    strategy = SelectionStrategy(strategy)
    if strategy is SelectionStrategy.RANKED:
        order = np.lexsort((np.arange(size), -probs))[:n]
        chosen = [int(t) for t in order if probs[t] > 0.0]
    else:
        support = np.flatnonzero(probs > 0.0)
        take = min(n, support.size)
        rng = np.random.default_rng(seed)
        weights = probs[support] / probs[support].sum()
        chosen = [int(t) for t in rng.choice(support, size=take, replace=False, p=weights)]

    if len(chosen) < 2:
        raise DegenerateCandidateError(f'only {len(chosen)} candidates with positive probability at {ctx.window}')

    return CandidateSet(
        context=ctx,
        candidates=[Candidate(token=t, p_old=float(probs[t])) for t in chosen],
        strategy=strategy,
        confusion_token=confusion_token,
    )


def lookahead_fragment(
        policy: PolicyTable,
        ctx: Context,
        token: int,
        k: int,
        seed: SeedLike = 0,
        greedy: bool = True,
) -> list[int]:
    """ Кандидат и до k токенов продолжения под текущей политикой """
    if k < 0:
        raise ConfigurationError(f'lookahead length must be >= 0, got {k}')
    fragment = [policy.vocab.check_token(token)]
    if k == 0 or token == policy.vocab.eos_id:
        return fragment
    continuation = policy.sample_sequence(ctx.window + (token,), max_len=k, seed=seed, greedy=greedy)
    return fragment + continuation.tokens


def lookahead_reward(
        policy: PolicyTable,
        ctx: Context,
        token: int,
        k: int,
        detector: LanguageDetector,
        seed: SeedLike = 0,
        greedy: bool = True,
) -> float:
    """ -1, если фрагмент из кандидата и k токенов просмотра содержит смешанное слово, иначе +1 """
    fragment = lookahead_fragment(policy, ctx, token, k, seed, greedy)
    confused = detector.is_confused(policy.vocab.decode(fragment))
    return config.exploration.reward_confused if confused else config.exploration.reward_pass


def score_candidates(
        policy: PolicyTable,
        cands: CandidateSet,
        k: int,
        detector: LanguageDetector,
        seeds: Sequence[SeedLike],
        greedy: bool = True,
) -> CandidateSet:
    rewards = [
        lookahead_reward(policy, cands.context, c.token, k, detector, seed, greedy)
        for c, seed in zip(cands.candidates, seeds, strict=True)
    ]
    return cands.with_rewards(rewards)
