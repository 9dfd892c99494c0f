import argparse

from src.commands import register_command
from src.commands.common import file_values, finish, out_dir
from src.config import config
from src.dependencies import get_storage
from src.logconf import opt_logger as log
from src.models import CorpusSpec
from src.services.corpus import gen_synthetic_corpus

logger = log.setup_logger('gen')

# (флаг, поле CorpusSpec, тип)
GEN_FLAGS = (
    ('--target', 'target', str),
    ('--n-prompts', 'n_prompts', int),
    ('--n-heldout', 'n_heldout', int),
    ('--n-target', 'n_target', int),
    ('--n-confused', 'n_confused', int),
    ('--n-english', 'n_english', int),
    ('--n-neutral', 'n_neutral', int),
    ('--confusion-rate', 'confusion_rate', float),
    ('--switch-rate', 'switch_rate', float),
    ('--english-rate', 'english_rate', float),
    ('--neutral-rate', 'neutral_rate', float),
    ('--lang-scale', 'lang_scale', float),
    ('--offscript-rate', 'offscript_rate', float),
    ('--window', 'window', int),
)


@register_command(
    'gen',
    help='generate a synthetic corpus: vocabulary, prompt splits and the seeded base policy',
    arguments=tuple(((flag,), dict(dest=name, type=kind, default=None)) for flag, name, kind in GEN_FLAGS),
)
def cmd_gen(args: argparse.Namespace) -> list[str]:
    """ prompts.jsonl, heldout.jsonl, policy.ckpt и отчёт corpus.json """
    values = file_values(args)
    values.update({name: getattr(args, name) for _, name, _ in GEN_FLAGS if getattr(args, name) is not None})
    values['seed'] = args.seed
    spec = CorpusSpec.build(**values)

    corpus = gen_synthetic_corpus(spec)
    out = out_dir(args, 'gen')
    storage = get_storage()
    names = config.storage

    storage.save_prompts(out / names.prompts_file, corpus.prompts)
    storage.save_prompts(out / names.heldout_file, corpus.heldout)
    storage.save_policy(out / names.policy_file, corpus.policy)
    summary = {
        'spec': spec.model_dump(mode='json'),
        'vocab_size': corpus.vocab.size,
        'vocab_digest': corpus.vocab.digest(),
        'prompts': len(corpus.prompts),
        'heldout': len(corpus.heldout),
        'prompts_sha256': storage.records_digest(corpus.prompts),
        'heldout_sha256': storage.records_digest(corpus.heldout),
        'offscript_ids': corpus.offscript_ids,
    }
    outputs = [names.prompts_file, names.heldout_file, names.policy_file]
    outputs += storage.write_report(out, 'corpus', summary)
    logger.info(f'Corpus written to {out}')
    return finish(
        out, 'gen', spec.model_dump(mode='json'), {'seed': spec.seed}, outputs,
        extra={'offscript_ids': corpus.offscript_ids},
    )
