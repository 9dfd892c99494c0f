import os

import hypothesis
import numpy as np
import pytest

from src.models import CorpusSpec, LangTag, Mode, ScriptRules, TrainConfig, Vocab, VocabEntry
from src.services.corpus import gen_synthetic_corpus
from src.services.detector import LanguageDetector

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None, derandomize=True)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def make_vocab(*surfaces_and_tags, eos_id=None) -> Vocab:
    return Vocab(
        entries=[VocabEntry(id=i, surface=s, tag=t) for i, (s, t) in enumerate(surfaces_and_tags)],
        eos_id=eos_id,
    )


@pytest.fixture
def vocab4() -> Vocab:
    """ Четыре токена без конца последовательности """
    return make_vocab(
        (' 가나', LangTag.TARGET),
        (' 다라', LangTag.TARGET),
        (' мир', LangTag.CONFUSED),
        (' cat', LangTag.ENGLISH),
    )


@pytest.fixture
def ko_rules() -> ScriptRules:
    return ScriptRules.for_target('ko')


@pytest.fixture
def neutral_detector(ko_rules) -> LanguageDetector:
    return LanguageDetector(ko_rules, Mode.ENGLISH_NEUTRAL)


@pytest.fixture
def strict_detector(ko_rules) -> LanguageDetector:
    return LanguageDetector(ko_rules, Mode.ENGLISH_STRICT)


@pytest.fixture(scope="session")
def small_corpus():
    return gen_synthetic_corpus(CorpusSpec.build(n_prompts=64, n_heldout=64, seed=3))


@pytest.fixture(scope="session")
def default_corpus():
    return gen_synthetic_corpus(CorpusSpec())


@pytest.fixture
def quick_config() -> TrainConfig:
    return TrainConfig.build(steps=6, batch_size=8, n_candidates=8, workers=1, seed=3, checkpoint_every=0)
