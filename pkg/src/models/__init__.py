__all__ = [
    'TargetLanguage',
    'Mode',
    'WordClass',
    'ExclusionRule',
    'ScriptRules',
    'WordRecord',
    'ConfusionReport',
    'LangTag',
    'TAG_ORDER',
    'VocabEntry',
    'Vocab',
    'Context',
    'PromptRecord',
    'TokenSequence',
    'SelectionStrategy',
    'AdvantageVariant',
    'Candidate',
    'CandidateSet',
    'AdvantageVector',
    'CandidateTerm',
    'ObjectiveValue',
    'TrainConfig',
    'RunningStats',
    'Incident',
    'StepRecord',
    'ResponseDetail',
    'MetricResult',
    'TrainingReport',
    'TokenShift',
    'ContextShift',
    'ShiftReport',
    'AblationRow',
    'AblationReport',
    'SweepRow',
    'SweepReport',
    'FileDigest',
    'RunManifest',
    'CorpusSpec',
    'FilterResult',
]

from .detector_models import TargetLanguage, Mode, WordClass, ExclusionRule, ScriptRules, WordRecord, ConfusionReport
from .policy_models import LangTag, TAG_ORDER, VocabEntry, Vocab, Context, PromptRecord, TokenSequence
from .train_models import (
    SelectionStrategy, AdvantageVariant, Candidate, CandidateSet, AdvantageVector,
    CandidateTerm, ObjectiveValue, TrainConfig, RunningStats, Incident, StepRecord,
)
from .report_models import (
    ResponseDetail, MetricResult, TrainingReport, TokenShift, ContextShift, ShiftReport,
    AblationRow, AblationReport, SweepRow, SweepReport, FileDigest, RunManifest,
)
from .corpus_models import CorpusSpec, FilterResult
