import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from src.exc import DegenerateCandidateError, DomainError, IncidentLimitExceeded, UpdateRejectedError
from src.logconf import opt_logger as log
from src.models import (
    CandidateSet, ContextShift, Incident, LangTag, MetricResult, Mode, PromptRecord,
    RunningStats, ShiftReport, StepRecord, TokenShift, TrainConfig, TrainingReport,
)
from src.services import objective
from src.services.detector import LanguageDetector
from src.services.exploration import score_candidates, select_candidates
from src.services.metrics import compute_metrics
from src.services.policy import PolicyTable

logger = log.setup_logger('trainer')

# Теги слоёв зерна: (seed, слой, ...) для независимых потоков случайности
_PERMUTATION, _ROLLOUT, _SELECTION, _LOOKAHEAD, _EVAL = 1, 2, 3, 4, 5


def lr_at(step: int, total: int, alpha: float, warmup_fraction: float = 0.1, floor_fraction: float = 0.1) -> float:
    """ Линейный разогрев на первых warmup_fraction шагов, затем косинус до floor_fraction * α """
    if total <= 0:
        return alpha
    warmup = math.ceil(warmup_fraction * total)
    if step < warmup:
        return alpha * (step + 1) / warmup
    progress = (step - warmup) / max(1, total - warmup)
    return alpha * (floor_fraction + (1.0 - floor_fraction) * 0.5 * (1.0 + math.cos(math.pi * progress)))


@dataclass
class TrainState:
    theta: PolicyTable
    ref: PolicyTable
    old: Optional[PolicyTable] = None
    step: int = 0
    cursor: int = 0
    stats: RunningStats = field(default_factory=RunningStats)
    incidents: list[Incident] = field(default_factory=list)
    records: list[StepRecord] = field(default_factory=list)
    contexts: dict[tuple[int, ...], None] = field(default_factory=dict)
    baseline: Optional[MetricResult] = None

    @classmethod
    def start(cls, policy: PolicyTable) -> "TrainState":
        """ π_ref фиксируется здесь и не меняется до конца запуска """
        return cls(theta=policy.copy(), ref=policy.snapshot())


def _confusion_ids(policy: PolicyTable, mode: Mode) -> np.ndarray:
    tags = (LangTag.CONFUSED,) if mode == Mode.ENGLISH_NEUTRAL else (LangTag.CONFUSED, LangTag.ENGLISH)
    return policy.vocab.ids_with_tag(*tags)


def confusion_mass(policy: PolicyTable, window, mode: Mode) -> float:
    return float(policy.next_token_dist(window)[_confusion_ids(policy, mode)].sum())


def split_rows(ref: PolicyTable, mode: Mode, threshold: float) -> tuple[list, list]:
    """ Сохранённые строки исходной политики: (с массой смешения, чистые) """
    designated, clean = [], []
    for key in ref.stored_keys():
        (clean if confusion_mass(ref, key, mode) <= threshold else designated).append(key)
    return designated, clean


def policy_readout(theta: PolicyTable, ref: PolicyTable, mode: Mode, threshold: float) -> dict[str, float]:
    """ KL к исходной политике по всем строкам, на чистых строках и масса смешения на остальных """
    def mean(keys, values):
        return float(np.mean([values[k] for k in keys])) if keys else 0.0

    designated, clean = split_rows(ref, mode, threshold)
    kls = {key: objective.exact_kl(theta.next_token_dist(key), ref.next_token_dist(key)) for key in ref.stored_keys()}
    masses = {key: confusion_mass(theta, key, mode) for key in designated}
    return {
        'kl_to_ref': mean(list(kls), kls),
        'clean_kl': mean(clean, kls),
        'confusion_mass': mean(designated, masses),
    }


class Trainer:
    """
    Внешний цикл: выборка ответов, поиск точки смешения, кандидаты с наградами,
    затем p итераций подъёма по целевой функции против одного старого снимка
    """

    def __init__(self, config: TrainConfig, detector: LanguageDetector, clean_threshold: float = 1e-6):
        self.config = config
        self.detector = detector
        self.clean_threshold = clean_threshold

    # = ВЫБОРКА =
    def _rollout_one(self, old: PolicyTable, prompt: PromptRecord, step: int, j: int) -> tuple[str, Optional[CandidateSet]]:
        cfg = self.config
        response = old.sample_sequence(prompt, cfg.max_len, seed=[cfg.seed, _ROLLOUT, step, j], temperature=cfg.temperature)
        point = self.detector.detect_confusion_point(response.tokens, old.vocab)
        if point is None:
            return 'clean', None

        ctx = response.context_at(point, old.m)
        try:
            cands = select_candidates(
                old, ctx, cfg.n_candidates, cfg.selection,
                seed=[cfg.seed, _SELECTION, step, j], confusion_token=response.tokens[point],
            )
        except DegenerateCandidateError as e:
            logger.debug(f'Skipped confusion context: {e}')
            return 'skipped', None
        seeds = [[cfg.seed, _LOOKAHEAD, step, j, i] for i in range(cands.n)]
        return 'confused', score_candidates(old, cands, cfg.lookahead, self.detector, seeds, cfg.greedy_lookahead)

    def rollout_step(self, state: TrainState, prompts: Sequence[PromptRecord], offset: int = 0) -> list[CandidateSet]:
        """
        По одному ответу на промпт под старым снимком. Чистые ответы отбрасываются,
        возвращаются только наборы кандидатов в точках смешения, в порядке промптов
        """
        old = state.old if state.old is not None else state.theta.snapshot()
        indices = range(offset, offset + len(prompts))
        def run(job):
            prompt, j = job
            return self._rollout_one(old, prompt, state.step, j)

        jobs = list(zip(prompts, indices))
        if self.config.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                outcomes = list(pool.map(run, jobs))
        else:
            outcomes = [run(job) for job in jobs]

        sets = []
        for kind, cands in outcomes:
            state.stats.prompts_seen += 1
            if kind == 'clean':
                state.stats.clean_responses += 1
                continue
            state.stats.confusion_hits += 1
            if cands is None:
                state.stats.skipped_contexts += 1
                continue
            state.contexts.setdefault(tuple(cands.context.window), None)
            sets.append(cands)
        state.stats.candidate_sets += len(sets)
        return sets

    # = ОПТИМИЗАЦИЯ =
    def _record_incident(self, state: TrainState, kind: str, message: str) -> None:
        state.incidents.append(Incident(step=state.step, kind=kind, message=message))
        logger.warning(f'Step {state.step}: {kind}: {message}; policy restored')
        if len(state.incidents) > self.config.incident_limit:
            logger.error(f'Aborting run after {len(state.incidents)} numeric incidents')
            raise IncidentLimitExceeded(f'{len(state.incidents)} numeric incidents exceed the limit of {self.config.incident_limit}')

    def optimize_step(self, state: TrainState, sets: Sequence[CandidateSet]) -> tuple[TrainState, Optional[float], int]:
        """
        p итераций подъёма по среднему объективу батча. Отношения считаются
        против вероятностей старого снимка, сохранённых в наборах.
        Шаг расписания продвигается и при пустом списке
        """
        cfg = self.config
        lr = lr_at(state.step, cfg.steps, cfg.lr, cfg.warmup_fraction, cfg.floor_fraction)
        scored = [(cands, objective.compute_advantages(cands, cfg.advantage)) for cands in sets]
        degenerate = sum(1 for _, adv in scored if adv.degenerate)
        state.stats.degenerate_sets += degenerate

        first_value = None
        if len(scored) > degenerate:
            backup = state.theta.copy()
            try:
                with np.errstate(over='raise', invalid='raise'):
                    for iteration in range(cfg.policy_iters):
                        value, grad, _ = objective.batch_objective(scored, state.theta, state.ref, cfg.eps, cfg.beta)
                        if not np.isfinite(value):
                            raise UpdateRejectedError(f'non-finite objective {value} at iteration {iteration}')
                        if first_value is None:
                            first_value = value
                        state.theta.apply_update(grad, lr)
                        state.stats.updates += 1
            except (UpdateRejectedError, DomainError, FloatingPointError) as e:
                state.theta = backup
                first_value = None
                self._record_incident(state, 'rejected-update', str(e) or type(e).__name__)

        state.step += 1
        return state, first_value, degenerate

    # = ОЦЕНКА =
    def evaluate(self, policy: PolicyTable, prompts: Sequence[PromptRecord], detector: Optional[LanguageDetector] = None) -> MetricResult:
        """ Один ответ на промпт, зерно зависит только от eval_seed и id промпта """
        detector = detector or self.detector
        cfg = self.config

        def respond(prompt: PromptRecord):
            response = policy.sample_sequence(prompt, cfg.max_len, seed=[cfg.eval_seed, _EVAL, prompt.id], temperature=cfg.temperature)
            return detector.analyze_tokens(response.tokens, policy.vocab)

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                reports = list(pool.map(respond, prompts))
        else:
            reports = [respond(p) for p in prompts]
        return compute_metrics(reports)

    # = ЦИКЛ =
    def _draw(self, prompts: Sequence[PromptRecord], state: TrainState, count: int, cache: dict) -> list[PromptRecord]:
        """ Поток промптов: эпоха за эпохой, порядок в эпохе - перестановка от (seed, эпоха) """
        n = len(prompts)
        drawn = []
        for position in range(state.cursor, state.cursor + count):
            epoch = position // n
            if epoch not in cache:
                cache.clear()
                cache[epoch] = np.random.default_rng([self.config.seed, _PERMUTATION, epoch]).permutation(n)
            drawn.append(prompts[int(cache[epoch][position % n])])
        state.cursor += count
        return drawn

    def _collect(self, state: TrainState, prompts: Sequence[PromptRecord], cache: dict) -> tuple[list[CandidateSet], int]:
        cfg = self.config
        batch = self._draw(prompts, state, cfg.batch_size, cache)
        sets = self.rollout_step(state, batch)
        drawn = len(batch)
        if cfg.refill_batches:
            limit = cfg.batch_size * 4
            while len(sets) < cfg.batch_size and drawn < limit:
                extra = self._draw(prompts, state, min(cfg.batch_size - len(sets), limit - drawn), cache)
                sets.extend(self.rollout_step(state, extra, offset=drawn))
                drawn += len(extra)
            sets = sets[:cfg.batch_size]
        return sets, drawn

    def run_training(
            self,
            prompts: Sequence[PromptRecord],
            heldout: Sequence[PromptRecord],
            policy: Optional[PolicyTable] = None,
            state: Optional[TrainState] = None,
            on_checkpoint: Optional[Callable[[TrainState], None]] = None,
    ) -> tuple[TrainState, TrainingReport]:
        """
        M внешних шагов. Новый запуск берёт policy, продолжение - state.
        Отчёт содержит метрики на отложенных промптах до и после обучения
        """
        cfg = self.config
        if state is None:
            state = TrainState.start(policy)
        if state.baseline is None:
            state.baseline = self.evaluate(state.ref, heldout)
            logger.info(f'Baseline held-out RPR {state.baseline.rpr:.4f}, WPR {state.baseline.wpr:.4f}')

        cache: dict = {}
        while state.step < cfg.steps:
            state.old = state.theta.snapshot()
            if prompts:
                sets, drawn = self._collect(state, prompts, cache)
            else:
                sets, drawn = [], 0
            lr = lr_at(state.step, cfg.steps, cfg.lr, cfg.warmup_fraction, cfg.floor_fraction)
            state, value, degenerate = self.optimize_step(state, sets)
            state.old = None

            readout = policy_readout(state.theta, state.ref, cfg.mode, self.clean_threshold)
            state.records.append(StepRecord(
                step=state.step - 1, lr=lr, prompts=drawn, candidate_sets=len(sets),
                degenerate_sets=degenerate, objective=value, **readout,
            ))
            logger.debug(
                f'step {state.step}/{cfg.steps} lr={lr:.4g} sets={len(sets)} '
                f'confusion={readout["confusion_mass"]:.5f} clean_kl={readout["clean_kl"]:.5f}'
            )
            if on_checkpoint and cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0:
                on_checkpoint(state)

        return state, self.report(state, heldout)

    def report(self, state: TrainState, heldout: Sequence[PromptRecord]) -> TrainingReport:
        final = None
        if self.config.steps > 0:
            final = self.evaluate(state.theta, heldout)
            logger.info(f'Final held-out RPR {final.rpr:.4f}, WPR {final.wpr:.4f}')
        readout = policy_readout(state.theta, state.ref, self.config.mode, self.clean_threshold)
        return TrainingReport(
            config=self.config.model_dump(mode='json'),
            vocab_digest=state.ref.vocab.digest(),
            baseline=state.baseline,
            final=final,
            steps=state.records,
            stats=state.stats,
            incidents=state.incidents,
            capability_kl=readout['clean_kl'],
            confusion_contexts=[list(window) for window in state.contexts],
        )


def probability_shift(
        baseline: PolicyTable,
        trained: PolicyTable,
        windows: Sequence[Sequence[int]],
        n_candidates: int,
        mode: Mode,
) -> ShiftReport:
    """
    В каждом окне: суммарные вероятности до/после для
    (a) токенов смешения в top-N исходной политики,
    (b) токенов смешения вне top-N,
    (c) остальных токенов вне top-N
    """
    vocab = baseline.vocab
    confusion = np.zeros(vocab.size, dtype=bool)
    confusion[_confusion_ids(baseline, mode)] = True

    contexts = []
    for window in windows:
        window = tuple(window)
        before, after = baseline.next_token_dist(window), trained.next_token_dist(window)
        explored = np.zeros(vocab.size, dtype=bool)
        explored[np.lexsort((np.arange(vocab.size), -before))[:n_candidates]] = True
        groups = {
            'explored_confusion': explored & confusion,
            'outside_confusion': ~explored & confusion,
            'outside_clean': ~explored & ~confusion,
        }
        tokens = [
            TokenShift(token=int(t), surface=vocab.entries[t].surface, before=float(before[t]), after=float(after[t]))
            for t in np.flatnonzero(confusion)
        ]
        contexts.append(ContextShift(
            window=list(window),
            tokens=tokens,
            **{name: (float(before[mask].sum()), float(after[mask].sum())) for name, mask in groups.items()},
        ))

    if not contexts:
        return ShiftReport(n_candidates=n_candidates, mode=mode)

    def delta(name: str) -> float:
        return float(np.mean([getattr(c, name)[1] - getattr(c, name)[0] for c in contexts]))

    return ShiftReport(
        n_candidates=n_candidates,
        mode=mode,
        contexts=contexts,
        outside_confusion_decreased=float(np.mean([c.outside_confusion[1] < c.outside_confusion[0] for c in contexts])),
        mean_delta_explored_confusion=delta('explored_confusion'),
        mean_delta_outside_confusion=delta('outside_confusion'),
        mean_delta_outside_clean=delta('outside_clean'),
    )
