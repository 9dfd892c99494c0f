from typing import Sequence

import numpy as np

from src.exc import DomainError
from src.logconf import opt_logger as log
from src.models import (
    TAG_ORDER, AdvantageVariant, AdvantageVector, CandidateSet, CandidateTerm, ObjectiveValue,
)
from src.services.policy import PolicyTable, SparseGradient

logger = log.setup_logger('objective')


def compute_advantages(cands: CandidateSet, variant: AdvantageVariant = AdvantageVariant.TLPO_WEIGHTED) -> AdvantageVector:
    """
    TLPO_WEIGHTED: μ = Σp·R / Σp, a = p·(R - μ), A = a / Σ|a|
    UNWEIGHTED:    A = R - mean(R)
    GRPO_STYLE:    A = (R - mean(R)) / σ, σ по генеральной совокупности
    При равных наградах A = 0 и набор помечается вырожденным
    """
    variant = AdvantageVariant(variant)
    if not cands.scored:
        raise DomainError('candidate set has unscored candidates')
    probs, rewards = cands.probs, cands.rewards
    if np.any(probs <= 0.0):
        raise DomainError('candidate probabilities must be positive')

    if np.all(rewards == rewards[0]):
        mu = float(rewards[0])
        return AdvantageVector(values=[0.0] * cands.n, mu=mu, z=0.0, variant=variant, degenerate=True)

    if variant is AdvantageVariant.TLPO_WEIGHTED:
        mu = float(np.dot(probs, rewards) / probs.sum())
        raw = probs * (rewards - mu)
        z = float(np.abs(raw).sum())
        values = raw / z
    elif variant is AdvantageVariant.UNWEIGHTED:
        mu = float(rewards.mean())
        z = 1.0
        values = rewards - mu
    else:
        mu = float(rewards.mean())
        z = float(rewards.std())
        values = (rewards - mu) / z

    return AdvantageVector(values=values.tolist(), mu=mu, z=z, variant=variant)


def _check_probs(*arrays: np.ndarray) -> None:
    for values in arrays:
        if np.any(~(values > 0.0)) or np.any(values > 1.0):
            raise DomainError('probabilities must lie in (0, 1]')


def kl_estimates(p_theta, p_ref) -> np.ndarray:
    """ r - ln r - 1 с r = p_ref / p_theta, поэлементно """
    p_theta = np.asarray(p_theta, dtype=np.float64)
    p_ref = np.asarray(p_ref, dtype=np.float64)
    _check_probs(p_theta, p_ref)
    x = p_ref / p_theta - 1.0
    return np.maximum(x - np.log1p(x), 0.0)


def kl_estimate(p_theta: float, p_ref: float) -> float:
    return float(kl_estimates(p_theta, p_ref))


def clip_branch(ratio: float, advantage: float, eps: float) -> tuple[float, bool]:
    """ Значение min(rA, clip(r)A) и признак активной неклипнутой ветви (при равенстве - она) """
    unclipped = ratio * advantage
    clipped = min(max(ratio, 1.0 - eps), 1.0 + eps) * advantage
    if unclipped <= clipped:
        return unclipped, True
    return clipped, False


def clipped_term(p_theta: float, p_old: float, advantage: float, eps: float) -> float:
    if not p_old > 0.0:
        raise DomainError(f'old probability must be positive, got {p_old}')
    if not 0.0 < eps < 1.0:
        raise DomainError(f'clip width must lie in (0, 1), got {eps}')
    return clip_branch(p_theta / p_old, advantage, eps)[0]


def tlpo_objective(
        cands: CandidateSet,
        advantages: AdvantageVector,
        theta: PolicyTable,
        ref: PolicyTable,
        eps: float,
        beta: float,
) -> tuple[ObjectiveValue, SparseGradient]:
    """
    J = (1/N) Σ_i [min(r_i A_i, clip(r_i) A_i) - β·kl_i],  r_i = π_θ(t_i) / π_old(t_i).
    Знаменатели отношений - вероятности старого снимка, сохранённые в наборе.
    Градиент по логитам θ (максимизация): строка окна и общие смещения
    """
    if advantages.degenerate:
        return ObjectiveValue(degenerate=True), SparseGradient()

    window = cands.context.window[-theta.m:]
    probs = theta.next_token_dist(window)
    ref_probs = ref.next_token_dist(window)
    tokens, p_old, values = cands.tokens, cands.probs, advantages.array
    p_theta, p_ref = probs[tokens], ref_probs[tokens]
    kls = kl_estimates(p_theta, p_ref)
    n = cands.n

    terms, grad_p = [], np.zeros(n)
    for i in range(n):
        ratio = p_theta[i] / p_old[i]
        surrogate, unclipped = clip_branch(ratio, values[i], eps)
        # d kl / d p = (1 - p_ref/p) / p
        dkl = (1.0 - p_ref[i] / p_theta[i]) / p_theta[i]
        grad_p[i] = ((values[i] / p_old[i]) if unclipped else 0.0) - beta * dkl
        terms.append(CandidateTerm(
            token=int(tokens[i]), p_old=float(p_old[i]), p_theta=float(p_theta[i]), p_ref=float(p_ref[i]),
            reward=float(cands.candidates[i].reward), advantage=float(values[i]), ratio=float(ratio),
            clipped=not unclipped, surrogate=float(surrogate), kl=float(kls[i]),
        ))

    surrogate_mean = sum(t.surrogate for t in terms) / n
    kl_mean = float(kls.sum()) / n
    value = ObjectiveValue(
        surrogate=surrogate_mean,
        kl=kl_mean,
        total=surrogate_mean - beta * kl_mean,
        terms=terms,
    )

    # Цепное правило через softmax: dJ/dz = p ⊙ (g - <g, p>)
    g = np.zeros(theta.vocab.size)
    np.add.at(g, tokens, grad_p / n)
    dz = probs * (g - np.dot(g, probs))

    grad = SparseGradient()
    grad.add_row(window, dz)
    grad.add_bias(theta.lang_scale * np.bincount(theta.vocab.tag_index, weights=dz, minlength=len(TAG_ORDER)))
    return value, grad


def batch_objective(
        scored: Sequence[tuple[CandidateSet, AdvantageVector]],
        theta: PolicyTable,
        ref: PolicyTable,
        eps: float,
        beta: float,
) -> tuple[float, SparseGradient, list[ObjectiveValue]]:
    """ Среднее по невырожденным наборам; суммирование в порядке входа """
    active = [(c, a) for c, a in scored if not a.degenerate]
    values = []
    total, grad = 0.0, SparseGradient()
    if not active:
        return total, grad, values
    scale = 1.0 / len(active)
    for cands, advantages in active:
        value, set_grad = tlpo_objective(cands, advantages, theta, ref, eps, beta)
        values.append(value)
        total += value.total * scale
        grad.accumulate(set_grad, scale)
    return total, grad, values


def exact_kl(p: np.ndarray, q: np.ndarray) -> float:
    """ KL(p || q) для двух распределений над словарём """
    mask = p > 0.0
    return max(float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask])))), 0.0)
