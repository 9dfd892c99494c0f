from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from src.config import config
from src.exc import ConfigurationError
from src.logconf import opt_logger as log
from src.models import LangTag, Mode, PromptRecord, ScriptRules, TargetLanguage, Vocab, VocabEntry, WordClass
from src.models.corpus_models import CorpusSpec, FilterResult
from src.services.detector import analyze_text, classify_word
from src.services.policy import PolicyTable

logger = log.setup_logger('corpus')

EOS_SURFACE = '</s>'
NEUTRAL_SURFACES = ('.', ',', '!', '?', ';', ':')

# (первый код, последний код, символов в слове) для алфавитов целевых языков
_TARGET_ALPHABETS = {
    TargetLanguage.KO: (0xAC00, 0xD7A3, 2),
    TargetLanguage.ZH: (0x4E00, 0x9FA5, 2),
    TargetLanguage.JA: (0x3041, 0x3093, 3),
    TargetLanguage.AR: (0x0641, 0x064A, 3),
}
_CYRILLIC = (0x0430, 0x044F, 3)
_ASCII = (ord('a'), ord('z'), 4)


@dataclass
class SyntheticCorpus:
    vocab: Vocab
    prompts: list[PromptRecord]
    heldout: list[PromptRecord]
    policy: PolicyTable
    offscript_ids: list[int] = field(default_factory=list)


def filter_target_language(prompts: Iterable[PromptRecord], rules: ScriptRules) -> FilterResult:
    """
    Убирает промпты, где есть символ вне письменностей целевого языка.
    Правила исключения применяются раньше проверки письменности
    """
    kept, dropped = [], []
    for prompt in prompts:
        report = analyze_text(prompt.text, rules, Mode.ENGLISH_STRICT)
        if report.is_confused:
            dropped.append(prompt.id)
        else:
            kept.append(prompt)
    if dropped:
        logger.info(f'Filtered out {len(dropped)} prompts outside the {rules.target.value} script set')
    return FilterResult(kept=kept, dropped_ids=dropped)


def _words(rng: np.random.Generator, alphabet: tuple[int, int, int], count: int, accept=lambda w: True) -> list[str]:
    first, last, length = alphabet
    capacity = (last - first + 1) ** length
    if count > capacity // 2:
        raise ConfigurationError(f'alphabet of {last - first + 1} symbols cannot supply {count} distinct words')
    words: list[str] = []
    seen = set()
    while len(words) < count:
        word = ''.join(chr(c) for c in rng.integers(first, last + 1, size=length))
        if word not in seen and accept(word):
            seen.add(word)
            words.append(word)
    return words


def build_vocab(spec: CorpusSpec) -> Vocab:
    """ Токен 0 - конец последовательности, слова начинаются с пробела, пунктуация без него """
    rng = np.random.default_rng([spec.seed, 0])
    strict = ScriptRules.for_target(spec.target)

    def english_word(word: str) -> bool:
        return (classify_word(word, strict, Mode.ENGLISH_STRICT) is WordClass.CONFUSED
                and classify_word(word, strict, Mode.ENGLISH_NEUTRAL) is WordClass.PASS)

    groups = [
        (LangTag.TARGET, _words(rng, _TARGET_ALPHABETS[spec.target], spec.n_target)),
        (LangTag.CONFUSED, _words(rng, _CYRILLIC, spec.n_confused)),
        (LangTag.ENGLISH, _words(rng, _ASCII, spec.n_english, english_word)),
    ]
    entries = [VocabEntry(id=0, surface=EOS_SURFACE, tag=LangTag.NEUTRAL)]
    for tag, words in groups:
        entries.extend(VocabEntry(id=len(entries) + i, surface=' ' + w, tag=tag) for i, w in enumerate(words))
    entries.extend(
        VocabEntry(id=len(entries) + i, surface=s, tag=LangTag.NEUTRAL)
        for i, s in enumerate(NEUTRAL_SURFACES[:spec.n_neutral])
    )
    return Vocab(entries=entries, eos_id=0)


def _check_feasible(spec: CorpusSpec) -> None:
    for name, rate in (('confusion_rate', spec.confusion_rate), ('switch_rate', spec.switch_rate)):
        if rate + spec.english_rate + spec.neutral_rate > 1.0:
            raise ConfigurationError(f'{name} {rate} plus english and neutral rates exceeds 1')
    if spec.min_words > spec.max_words:
        raise ConfigurationError(f'min_words {spec.min_words} > max_words {spec.max_words}')


def _split(probs: np.ndarray, ids: np.ndarray, mass: float) -> None:
    if ids.size and mass > 0.0:
        probs[ids] += mass / ids.size


def _seed_row(rng: np.random.Generator, vocab: Vocab, spec: CorpusSpec, confusion: float) -> np.ndarray:
    target = vocab.ids_with_tag(LangTag.TARGET)
    confused = vocab.ids_with_tag(LangTag.CONFUSED)
    english = vocab.ids_with_tag(LangTag.ENGLISH)
    neutral = np.setdiff1d(vocab.ids_with_tag(LangTag.NEUTRAL), [vocab.eos_id])

    probs = np.zeros(vocab.size)
    target_mass = 1.0 - confusion - spec.english_rate - spec.neutral_rate

    head = rng.choice(target, size=min(spec.head_size, target.size), replace=False)
    tail = np.setdiff1d(target, head)
    head_mass = target_mass * (spec.head_share if tail.size else 1.0)
    probs[head] = head_mass * rng.dirichlet(np.full(head.size, 20.0))
    _split(probs, tail, target_mass - head_mass)

    salient = rng.choice(confused, size=min(spec.salient_confusion, confused.size), replace=False)
    rest = np.setdiff1d(confused, salient)
    salient_mass = confusion * (spec.salient_share if rest.size else 1.0)
    _split(probs, salient, salient_mass)
    _split(probs, rest, confusion - salient_mass)

    _split(probs, english, spec.english_rate)
    _split(probs, neutral, spec.neutral_rate)
    return np.log(np.maximum(probs, config.corpus.floor_prob))


def seed_policy(vocab: Vocab, spec: CorpusSpec) -> PolicyTable:
    """
    Строки по предыдущему токену: после целевых слов масса смешения = confusion_rate,
    после слов смешения = switch_rate, после прочих - ноль (если clean_non_target_rows)
    """
    rng = np.random.default_rng([spec.seed, 7])
    policy = PolicyTable(vocab, m=spec.window, lang_scale=spec.lang_scale)
    for entry in vocab.entries:
        if entry.id == vocab.eos_id:
            continue
        if entry.tag is LangTag.TARGET:
            confusion = spec.confusion_rate
        elif entry.tag is LangTag.CONFUSED:
            confusion = spec.switch_rate
        else:
            confusion = 0.0 if spec.clean_non_target_rows else spec.confusion_rate
        policy.set_row((entry.id,), _seed_row(rng, vocab, spec, confusion))
    return policy


def _prompts(rng: np.random.Generator, vocab: Vocab, spec: CorpusSpec, count: int, first_id: int, offscript: bool):
    target = vocab.ids_with_tag(LangTag.TARGET)
    confused = vocab.ids_with_tag(LangTag.CONFUSED)
    prompts, labels = [], []
    for i in range(count):
        length = int(rng.integers(spec.min_words, spec.max_words + 1))
        words = [vocab.entries[t].surface.strip() for t in rng.choice(target, size=length)]
        if offscript and rng.random() < spec.offscript_rate:
            words[int(rng.integers(length))] = vocab.entries[int(rng.choice(confused))].surface.strip()
            labels.append(first_id + i)
        prompts.append(PromptRecord(id=first_id + i, text=' '.join(words), lang=spec.target))
    return prompts, labels


def gen_synthetic_corpus(spec: CorpusSpec) -> SyntheticCorpus:
    """ Словарь, промпты (обучающие и отложенные) и исходная политика; детерминировано по seed """
    _check_feasible(spec)
    vocab = build_vocab(spec)
    policy = seed_policy(vocab, spec)

    rng = np.random.default_rng([spec.seed, 1])
    prompts, offscript = _prompts(rng, vocab, spec, spec.n_prompts, 0, offscript=True)
    heldout, _ = _prompts(rng, vocab, spec, spec.n_heldout, spec.n_prompts, offscript=False)

    logger.info(
        f'Generated corpus: |V|={vocab.size}, {len(prompts)} prompts ({len(offscript)} off-script), '
        f'{len(heldout)} held-out, confusion rate {spec.confusion_rate}'
    )
    return SyntheticCorpus(vocab=vocab, prompts=prompts, heldout=heldout, policy=policy, offscript_ids=offscript)
