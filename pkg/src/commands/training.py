import argparse
from operator import attrgetter

from src.commands import register_command
from src.commands.common import (
    CORPUS_ARGUMENT, TRAIN_ARGUMENTS, corpus_files, detector_for, finish, load_base_policy, load_split, out_dir,
    train_config,
)
from src.config import config
from src.dependencies import get_storage
from src.exc import ConfigurationError
from src.logconf import opt_logger as log
from src.models import AblationReport, AblationRow, AdvantageVariant, SelectionStrategy, SweepReport, SweepRow, TrainingReport
from src.services.corpus import filter_target_language
from src.services.metrics import summary_table
from src.services.trainer import Trainer

logger = log.setup_logger('train')


def _seeds(cfg) -> dict[str, int]:
    return {'seed': cfg.seed, 'eval_seed': cfg.eval_seed}


def _prepare(args: argparse.Namespace, **overrides):
    """ Конфиг, детектор, отфильтрованные обучающие промпты и отложенные промпты """
    cfg = train_config(args, **overrides)
    detector = detector_for(args, cfg)
    if detector.mode != cfg.mode:
        cfg = cfg.replace(mode=detector.mode)
    files = corpus_files(args.corpus)
    filtered = filter_target_language(load_split(files, 'train'), detector.rules)
    heldout = load_split(files, 'heldout')
    return cfg, detector, files, filtered, heldout


def _final(report: TrainingReport):
    return report.final or report.baseline


def training_table(report: TrainingReport) -> str:
    results = {'baseline': report.baseline}
    if report.final is not None:
        results['final'] = report.final
    stats = report.stats
    return summary_table(results) + (
        f'\ncapability KL (clean contexts): {report.capability_kl:.6f}\n'
        f'prompts seen {stats.prompts_seen}, confusion hits {stats.confusion_hits}, '
        f'candidate sets {stats.candidate_sets}, degenerate {stats.degenerate_sets}, '
        f'incidents {len(report.incidents)}\n'
    )


@register_command(
    'train',
    help='run token-level policy optimization on a generated corpus',
    arguments=(CORPUS_ARGUMENT,) + TRAIN_ARGUMENTS + (
        (('--resume',), dict(default=None, help='train-state checkpoint to continue from')),
        (('--refill',), dict(action='store_true', help='refill batches until batch-size candidate sets are found')),
    ),
)
def cmd_train(args: argparse.Namespace) -> list[str]:
    cfg, detector, files, filtered, heldout = _prepare(args, refill_batches=True if args.refill else None)
    out = out_dir(args, 'train')
    storage = get_storage()
    names = config.storage

    def checkpoint(state) -> None:
        storage.save_state(out / names.state_file, state)

    trainer = Trainer(cfg, detector, config.trainer.clean_threshold)
    if args.resume:
        state, policy = storage.load_state(args.resume), None
        logger.info(f'Resuming from step {state.step}')
    else:
        state, policy = None, load_base_policy(files)

    state, report = trainer.run_training(filtered.kept, heldout, policy=policy, state=state, on_checkpoint=checkpoint)
    storage.save_policy(out / names.trained_file, state.theta)
    storage.save_state(out / names.state_file, state)

    outputs = [names.trained_file, names.state_file]
    outputs += storage.write_report(out, 'train_report', report, training_table(report))
    return finish(
        out, 'train', cfg.model_dump(mode='json'), _seeds(cfg), outputs,
        inputs={'prompts': files.prompts, 'heldout': files.heldout, 'policy': files.policy,
                'resume': args.resume, 'rules': args.rules},
        extra={'filtered_out': filtered.dropped_ids},
    )


@register_command(
    'ablate',
    help='train every advantage variant with every selection strategy on one corpus',
    arguments=(CORPUS_ARGUMENT,) + TRAIN_ARGUMENTS,
)
def cmd_ablate(args: argparse.Namespace) -> list[str]:
    """ 3 варианта преимущества x 2 стратегии выбора, общие зёрна """
    cfg, detector, files, filtered, heldout = _prepare(args)
    base = load_base_policy(files)

    rows, baseline = [], None
    for advantage in AdvantageVariant:
        for selection in SelectionStrategy:
            variant = cfg.replace(advantage=advantage, selection=selection)
            _, report = Trainer(variant, detector, config.trainer.clean_threshold).run_training(
                filtered.kept, heldout, policy=base)
            baseline = report.baseline
            final = _final(report)
            rows.append(AblationRow(
                advantage=advantage, selection=selection, rpr=final.rpr, wpr=final.wpr,
                capability_kl=report.capability_kl, candidate_sets=report.stats.candidate_sets,
            ))
            logger.info(f'{advantage.value}/{selection.value}: RPR {final.rpr:.4f}, capability KL {report.capability_kl:.6f}')

    rows.sort(key=attrgetter('capability_kl'))
    ablation = AblationReport(baseline_rpr=baseline.rpr, baseline_wpr=baseline.wpr, rows=rows)
    out = out_dir(args, 'ablate')
    outputs = get_storage().write_report(out, 'ablation', ablation, ablation_table(ablation))
    return finish(
        out, 'ablate', cfg.model_dump(mode='json'), _seeds(cfg), outputs,
        inputs={'prompts': files.prompts, 'heldout': files.heldout, 'policy': files.policy, 'rules': args.rules},
    )


def ablation_table(report: AblationReport) -> str:
    header = f"{'advantage':<14} {'selection':<12} {'RPR':>8} {'WPR':>8} {'cap. KL':>10} {'sets':>6}"
    lines = [f'baseline RPR {report.baseline_rpr:.4f}, WPR {report.baseline_wpr:.4f}', header, '-' * len(header)]
    for row in report.rows:
        lines.append(
            f'{row.advantage.value:<14} {row.selection.value:<12} {row.rpr:>8.4f} {row.wpr:>8.4f} '
            f'{row.capability_kl:>10.6f} {row.candidate_sets:>6}'
        )
    return '\n'.join(lines) + '\n'


def parse_n_values(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f'--n-values expects comma-separated integers, got {text!r}') from e
    if not values:
        raise ConfigurationError('--n-values is empty')
    return values


@register_command(
    'sweep',
    help='train once per candidate-set size N and compare pass rates and capability',
    arguments=(CORPUS_ARGUMENT,) + TRAIN_ARGUMENTS + (
        (('--n-values',), dict(default='4,8,12,16', help='comma-separated candidate-set sizes')),
    ),
)
def cmd_sweep(args: argparse.Namespace) -> list[str]:
    cfg, detector, files, filtered, heldout = _prepare(args)
    base = load_base_policy(files)
    n_values = parse_n_values(args.n_values)
    for n in n_values:
        if not 2 <= n <= base.vocab.size:
            raise ConfigurationError(f'N={n} is outside [2, {base.vocab.size}]')

    rows, baseline = [], None
    for n in n_values:
        _, report = Trainer(cfg.replace(n_candidates=n), detector, config.trainer.clean_threshold).run_training(
            filtered.kept, heldout, policy=base)
        baseline = report.baseline
        final = _final(report)
        rows.append(SweepRow(
            n_candidates=n, rpr=final.rpr, wpr=final.wpr, capability_kl=report.capability_kl,
            candidate_sets=report.stats.candidate_sets, degenerate_sets=report.stats.degenerate_sets,
        ))
        logger.info(f'N={n}: RPR {final.rpr:.4f}, capability KL {report.capability_kl:.6f}')

    sweep = SweepReport(baseline_rpr=baseline.rpr, baseline_wpr=baseline.wpr, rows=rows)
    out = out_dir(args, 'sweep')
    outputs = get_storage().write_report(out, 'sweep', sweep, sweep_table(sweep))
    return finish(
        out, 'sweep', cfg.model_dump(mode='json'), _seeds(cfg), outputs,
        inputs={'prompts': files.prompts, 'heldout': files.heldout, 'policy': files.policy, 'rules': args.rules},
        extra={'n_values': n_values},
    )


def sweep_table(report: SweepReport) -> str:
    header = f"{'N':>4} {'RPR':>8} {'WPR':>8} {'cap. KL':>10} {'sets':>6} {'degen.':>7}"
    lines = [f'baseline RPR {report.baseline_rpr:.4f}, WPR {report.baseline_wpr:.4f}', header, '-' * len(header)]
    for row in report.rows:
        lines.append(
            f'{row.n_candidates:>4} {row.rpr:>8.4f} {row.wpr:>8.4f} {row.capability_kl:>10.6f} '
            f'{row.candidate_sets:>6} {row.degenerate_sets:>7}'
        )
    return '\n'.join(lines) + '\n'
