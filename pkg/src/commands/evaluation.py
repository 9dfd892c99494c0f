import argparse

from src.commands import register_command
from src.commands.common import CORPUS_ARGUMENT, corpus_files, detector_for, finish, load_base_policy, load_split, out_dir, train_config
from src.config import config
from src.dependencies import get_storage
from src.logconf import opt_logger as log
from src.models import Mode, ShiftReport
from src.services.metrics import summary_table
from src.services.trainer import Trainer, probability_shift, split_rows

logger = log.setup_logger('eval')


@register_command(
    'eval',
    help='compute word and response pass rates of a policy checkpoint on a prompt split',
    arguments=(
        CORPUS_ARGUMENT,
        (('--policy',), dict(default=None, help='policy checkpoint (default: the corpus base policy)')),
        (('--split',), dict(choices=('heldout', 'train'), default='heldout')),
        (('--mode',), dict(dest='eval_mode', choices=('neutral', 'strict', 'both'), default=None,
                           help='treatment of English words; both writes one report per mode')),
        (('--rules',), dict(default=None, help='detector rules JSON: target, mode, extra_patterns')),
        (('--target',), dict(dest='target', choices=('ko', 'zh', 'ja', 'ar'), default=None)),
        (('--eval-seed',), dict(dest='eval_seed', type=int, default=None)),
        (('--max-len',), dict(dest='max_len', type=int, default=None)),
        (('--temperature',), dict(dest='temperature', type=float, default=None)),
        (('--workers',), dict(dest='workers', type=int, default=None)),
    ),
)
def cmd_eval(args: argparse.Namespace) -> list[str]:
    """ Один ответ на промпт; зерно ответа зависит только от eval_seed и id промпта """
    single = args.eval_mode if args.eval_mode in ('neutral', 'strict') else None
    cfg = train_config(args, mode=single)
    detector = detector_for(args, cfg)
    if args.eval_mode == 'both':
        modes = [Mode.ENGLISH_NEUTRAL, Mode.ENGLISH_STRICT]
    else:
        modes = [Mode(single) if single else detector.mode]

    files = corpus_files(args.corpus)
    prompts = load_split(files, args.split)
    policy = load_base_policy(files, args.policy)
    trainer = Trainer(cfg, detector)
    storage = get_storage()
    out = out_dir(args, 'eval')

    outputs = []
    for mode in modes:
        result = trainer.evaluate(policy, prompts, detector.with_mode(mode))
        logger.info(f'{args.split} [{mode.value}]: RPR {result.rpr:.4f}, WPR {result.wpr:.4f}')
        outputs += storage.write_report(out, f'eval_{mode.value}', result, summary_table({args.split: result}))

    return finish(
        out, 'eval', cfg.model_dump(mode='json'), {'eval_seed': cfg.eval_seed}, outputs,
        inputs={'prompts': files.heldout if args.split == 'heldout' else files.prompts,
                'policy': args.policy or files.policy, 'rules': args.rules},
        extra={'split': args.split, 'modes': [m.value for m in modes]},
    )


def shift_table(report: ShiftReport) -> str:
    header = f"{'window':<12} {'explored conf.':>22} {'outside conf.':>22} {'outside clean':>22}"
    lines = [header, '-' * len(header)]

    def pair(values) -> str:
        return f'{values[0]:.5f}->{values[1]:.5f}'

    for ctx in report.contexts:
        lines.append(
            f'{str(ctx.window):<12} {pair(ctx.explored_confusion):>22} '
            f'{pair(ctx.outside_confusion):>22} {pair(ctx.outside_clean):>22}'
        )
    lines.append(
        f'\nN={report.n_candidates}, mode {report.mode.value}: outside confusion decreased at '
        f'{report.outside_confusion_decreased:.1%} of {len(report.contexts)} contexts; mean deltas '
        f'explored {report.mean_delta_explored_confusion:+.5f}, outside confusion '
        f'{report.mean_delta_outside_confusion:+.5f}, outside clean {report.mean_delta_outside_clean:+.5f}'
    )
    return '\n'.join(lines) + '\n'


@register_command(
    'shift',
    help='compare confusion-token probabilities inside and outside the explored top-N before and after training',
    arguments=(
        (('--baseline',), dict(required=True, help='policy checkpoint before training')),
        (('--trained',), dict(required=True, help='policy checkpoint after training')),
        (('--report',), dict(default=None, help='training report; its confusion contexts are used when given')),
        (('--n-candidates',), dict(dest='n_candidates', type=int, default=None)),
    ),
)
def cmd_shift(args: argparse.Namespace) -> list[str]:
    """ Без отчёта обучения берутся все строки исходной политики с массой смешения """
    storage = get_storage()
    baseline = storage.load_policy(args.baseline)
    trained = storage.load_policy(args.trained)

    training = storage.read_report(args.report) if args.report else {}
    # N и режим по умолчанию берутся из конфига обучения
    if args.n_candidates is None:
        args.n_candidates = training.get('config', {}).get('n_candidates')
    if args.mode is None:
        args.mode = training.get('config', {}).get('mode')
    cfg = train_config(args)
    if args.report:
        windows = training.get('confusion_contexts', [])
    else:
        windows, _ = split_rows(baseline, cfg.mode, config.trainer.clean_threshold)

    report = probability_shift(baseline, trained, windows, cfg.n_candidates, cfg.mode)
    out = out_dir(args, 'shift')
    outputs = storage.write_report(out, 'shift', report, shift_table(report))
    return finish(
        out, 'shift', cfg.model_dump(mode='json'), {}, outputs,
        inputs={'baseline': args.baseline, 'trained': args.trained, 'report': args.report},
    )
