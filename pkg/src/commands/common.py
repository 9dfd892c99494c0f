import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from src.config import config
from src.dependencies import detector_from_rules, get_detector, get_storage
from src.exc import ConfigurationError
from src.logconf import opt_logger as log
from src.models import Mode, PromptRecord, RunManifest, TrainConfig
from src.services.detector import LanguageDetector
from src.services.policy import PolicyTable

logger = log.setup_logger('commands')

# Флаги гиперпараметров запуска: (флаг, поле TrainConfig, опции argparse)
TRAIN_FLAGS = (
    ('--steps', 'steps', dict(type=int)),
    ('--batch-size', 'batch_size', dict(type=int)),
    ('--policy-iters', 'policy_iters', dict(type=int)),
    ('--n-candidates', 'n_candidates', dict(type=int)),
    ('--lookahead', 'lookahead', dict(type=int)),
    ('--lr', 'lr', dict(type=float)),
    ('--eps', 'eps', dict(type=float)),
    ('--beta', 'beta', dict(type=float)),
    ('--advantage', 'advantage', dict(choices=('tlpo_weighted', 'unweighted', 'grpo_style'))),
    ('--selection', 'selection', dict(choices=('ranked', 'multinomial'))),
    ('--max-len', 'max_len', dict(type=int)),
    ('--temperature', 'temperature', dict(type=float)),
    ('--eval-seed', 'eval_seed', dict(type=int)),
    ('--target', 'target', dict(choices=('ko', 'zh', 'ja', 'ar'))),
    ('--incident-limit', 'incident_limit', dict(type=int)),
    ('--checkpoint-every', 'checkpoint_every', dict(type=int)),
    ('--workers', 'workers', dict(type=int)),
)

TRAIN_ARGUMENTS = tuple(
    ((flag,), dict(dest=name, default=None, **options)) for flag, name, options in TRAIN_FLAGS
) + (
    (('--sampled-lookahead',), dict(dest='sampled_lookahead', action='store_true', help='sample lookahead tokens instead of greedy decoding')),
    (('--rules',), dict(default=None, help='detector rules JSON: target, mode, extra_patterns')),
)

CORPUS_ARGUMENT = (('--corpus',), dict(required=True, help='directory written by the gen command'))


@dataclass
class CorpusFiles:
    directory: Path
    prompts: Path
    heldout: Path
    policy: Path


def out_dir(args: argparse.Namespace, command: str) -> Path:
    path = Path(args.out) if args.out else Path(config.paths.out_dir) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def file_values(args: argparse.Namespace) -> dict:
    """ Значения из --config; флаги командной строки имеют приоритет """
    if not args.config:
        return {}
    values = get_storage().read_report(args.config)
    if not isinstance(values, dict):
        raise ConfigurationError(f'{args.config}: expected a JSON object')
    return values


def train_config(args: argparse.Namespace, **overrides) -> TrainConfig:
    values = file_values(args)
    for _, name, _ in TRAIN_FLAGS:
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    if getattr(args, 'sampled_lookahead', False):
        values['greedy_lookahead'] = False
    extra = dict(seed=args.seed, mode=getattr(args, 'mode', None), **overrides)
    values.update({name: value for name, value in extra.items() if value is not None})
    cfg = TrainConfig.build(**values)
    logger.debug(f'Resolved config: {cfg.model_dump(mode="json")}')
    return cfg


def corpus_files(directory) -> CorpusFiles:
    directory = Path(directory)
    names = config.storage
    return CorpusFiles(
        directory=directory,
        prompts=directory / names.prompts_file,
        heldout=directory / names.heldout_file,
        policy=directory / names.policy_file,
    )


def load_split(files: CorpusFiles, split: str) -> list[PromptRecord]:
    return get_storage().load_prompts(files.heldout if split == 'heldout' else files.prompts)


def detector_for(args: argparse.Namespace, cfg: TrainConfig) -> LanguageDetector:
    """ Детектор по файлу правил, если он задан, иначе по языку и режиму конфига """
    rules_path = getattr(args, 'rules', None)
    if rules_path:
        rules, mode = get_storage().load_rules(rules_path)
        flag = getattr(args, 'mode', None)
        return detector_from_rules(rules, Mode(flag) if flag else mode or cfg.mode)
    return get_detector(cfg.target.value, cfg.mode.value)


def load_base_policy(files: CorpusFiles, path: Optional[str] = None) -> PolicyTable:
    return get_storage().load_policy(path or files.policy)


def finish(
        out: Path,
        command: str,
        cfg: dict,
        seeds: dict[str, int],
        outputs: list[str],
        inputs: Optional[dict] = None,
        extra: Optional[dict] = None,
) -> list[str]:
    """ Манифест пишется последним: его наличие означает, что все артефакты записаны """
    manifest = RunManifest(
        command=command,
        config=cfg,
        seeds=seeds,
        inputs=get_storage().digest_inputs(**(inputs or {})),
        outputs=sorted(outputs),
        extra=extra or {},
    )
    get_storage().write_manifest(out, manifest)
    return outputs + [config.storage.manifest_file]

