import os
from dataclasses import dataclass, field

# Ambient settings come from the environment, algorithm knobs never do
DEBUG = os.getenv('DEBUG')
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
OUT_DIR = os.getenv('TLPO_OUT_DIR', 'runs')


@dataclass(frozen=True)
class ExplorationConfig:
    n_candidates: int = 16
    lookahead: int = 3
    selection: str = 'ranked'
    greedy_lookahead: bool = True
    reward_pass: float = 1.0
    reward_confused: float = -1.0


@dataclass(frozen=True)
class ObjectiveConfig:
    eps: float = 0.2
    beta: float = 0.04
    advantage: str = 'tlpo_weighted'


@dataclass(frozen=True)
class ScheduleConfig:
    warmup_fraction: float = 0.1
    floor_fraction: float = 0.1


@dataclass(frozen=True)
class TrainerConfig:
    steps: int = 400
    batch_size: int = 8
    policy_iters: int = 2
    lr: float = 0.1
    max_len: int = 6
    incident_limit: int = 10
    checkpoint_every: int = 100
    refill_factor: int = 4
    workers: int = 4
    clean_threshold: float = 1e-6


@dataclass(frozen=True)
class DetectorConfig:
    target: str = 'ko'
    mode: str = 'neutral'


@dataclass(frozen=True)
class CorpusConfig:
    n_target: int = 40
    n_confused: int = 12
    n_english: int = 4
    n_neutral: int = 2
    n_prompts: int = 400
    n_heldout: int = 400
    confusion_rate: float = 0.075
    switch_rate: float = 0.5
    english_rate: float = 0.004
    neutral_rate: float = 0.02
    head_size: int = 8
    head_share: float = 0.995
    salient_confusion: int = 2
    salient_share: float = 0.97
    lang_scale: float = 8.0
    offscript_rate: float = 0.05
    min_words: int = 3
    max_words: int = 6
    window: int = 1
    floor_prob: float = 1e-30


@dataclass(frozen=True)
class StorageConfig:
    checkpoint_format = 'tlpo-checkpoint'
    checkpoint_version = 1
    prompts_file = 'prompts.jsonl'
    heldout_file = 'heldout.jsonl'
    policy_file = 'policy.ckpt'
    trained_file = 'trained.ckpt'
    state_file = 'state.ckpt'
    manifest_file = 'manifest.json'


@dataclass
class PathsConfig:
    out_dir: str = OUT_DIR


@dataclass
class Config:
    debug = DEBUG
    log_level = LOG_LEVEL
    seed: int = 0

    exploration: "ExplorationConfig" = None
    objective: "ObjectiveConfig" = None
    schedule: "ScheduleConfig" = None
    trainer: "TrainerConfig" = None
    detector: "DetectorConfig" = None
    corpus: "CorpusConfig" = None
    storage: "StorageConfig" = None
    paths: "PathsConfig" = field(default=None)

    def __post_init__(self):
        if not self.exploration: self.exploration = ExplorationConfig()
        if not self.objective: self.objective = ObjectiveConfig()
        if not self.schedule: self.schedule = ScheduleConfig()
        if not self.trainer: self.trainer = TrainerConfig()
        if not self.detector: self.detector = DetectorConfig()
        if not self.corpus: self.corpus = CorpusConfig()
        if not self.storage: self.storage = StorageConfig()
        if not self.paths: self.paths = PathsConfig()


config = Config()
