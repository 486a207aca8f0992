#!/usr/bin/env python3
"""
Pipeline Configuration
======================
Declarative configuration for every pipeline stage.

Tasks:
- bb-norm-ner (Habitat / Phenotype / Microorganism NER + normalization)
- pharmaco (chemical / protein NER)
- seedev (binary relation extraction)

Configuration sources, later wins:
1. dataclass defaults
2. per-task hyper-parameter defaults (TASK_DEFAULTS)
3. the JSON config file
4. --override dotted.key=value pairs

Unknown keys are rejected with the dotted field name.
"""

import copy
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from exceptions import ConfigError

logger = logging.getLogger('PipelineConfig')

CACHE_ENV = 'BIOEXT_CACHE_DIR'


class Task(Enum):
    """Supported extraction tasks."""
    BB_NORM_NER = "bb-norm-ner"
    PHARMACO = "pharmaco"
    SEEDEV = "seedev"


class EnsembleMode(Enum):
    """How fold models are combined at tagging time."""
    VOTE = "vote"      # token-level class-then-boundary voting
    UNION = "union"    # union of every model's spans
    NONE = "none"      # confident model only


class UnresolvedFallback(Enum):
    """What the writer does with mentions the normalizer cannot resolve."""
    OMIT = "omit"
    ROOT = "root"


@dataclass
class PathsConfig:
    """
    Input and output locations. Empty strings mean "not configured".

    Attributes:
        train_dir: Training documents (.txt/.conll/.ann)
        dev_dir: Original development documents
        test_dir: Documents to tag
        obo_file: OntoBiotope OBO file
        ncbi_names: NCBI names.dmp
        embeddings: Embedding text files, concatenated feature-wise
        schema_file: Relation schema (relation, arg1 type, arg2 type)
        keyword_dir: Per-relation keyword lists (<relation>.txt)
        work_dir: Root of every artifact the pipeline writes
    """
    train_dir: str = ""
    dev_dir: str = ""
    test_dir: str = ""
    obo_file: str = ""
    ncbi_names: str = ""
    embeddings: List[str] = field(default_factory=list)
    schema_file: str = ""
    keyword_dir: str = ""
    work_dir: str = "work"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TaggerConfig:
    """Tagger dimensions and training settings."""
    learning_rate: float = 0.005
    char_dim: int = 25
    char_hidden: int = 25
    word_hidden: int = 200
    word_dim: int = 200
    pos_dim: int = 25
    ortho_dim: int = 25
    cap_dim: int = 5
    ngram_dim: int = 25
    length_dim: int = 10
    sdp_rel_dim: int = 10
    alpha_dim: int = 2
    multitask_enabled: bool = True
    aux_loss_weight: float = 0.1
    lm_vocab_size: int = 7500
    epochs: int = 100
    patience: int = 25
    seed: int = 0
    clip_norm: float = 5.0
    dropout: float = 0.5
    scheme: str = "IOBES"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RankingConfig:
    """Hybrid loss: nll + alpha * ranking(gamma, margins)."""
    alpha: float = 1.0
    gamma: float = 1.0
    margin_pos: float = 2.5
    margin_neg: float = 0.5

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class FeaturesConfig:
    alpha_patterns: List[str] = field(default_factory=lambda: [r'\d', r'-'])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class NormalizerConfig:
    fuzzy_threshold: float = 0.85
    semantic_threshold: float = 0.5
    top_k: int = 5
    embed_synonyms: bool = False
    cache_enabled: bool = True
    unresolved_fallback: str = "omit"
    ncbi_name_classes: Optional[List[str]] = None
    include_obsolete: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class BruteForceConfig:
    min_chars: int = 3

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RelationConfig:
    """Relation SVM settings; rbf_gamma None means 1 / feature count."""
    tau: int = 20
    C: float = 1.0
    c_grid: List[float] = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0])
    grid_search: bool = False
    class_weight: float = 10.0
    rbf_gamma: Optional[float] = None
    tol: float = 1e-3
    max_iter: int = 100000
    oversample: bool = False
    entity_patterns: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EnsembleConfig:
    n_folds: int = 3
    confident_fold: int = 1
    scheme: str = "IOBES"
    drop_overlapping: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvaluationConfig:
    """Scoring settings; thresholds gate the eval command (min_f1, max_ser, ...)."""
    w_norm: float = 0.5
    mode: str = "micro"
    thresholds: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class FlagsConfig:
    nested: bool = True
    brute_force: bool = False
    ensemble_mode: str = "vote"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PipelineConfig:
    """Complete pipeline configuration."""
    task: str = "bb-norm-ner"
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    tagger: TaggerConfig = field(default_factory=TaggerConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    normalizer: NormalizerConfig = field(default_factory=NormalizerConfig)
    brute_force: BruteForceConfig = field(default_factory=BruteForceConfig)
    relation: RelationConfig = field(default_factory=RelationConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    flags: FlagsConfig = field(default_factory=FlagsConfig)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def task_enum(self) -> Task:
        return Task(self.task)

    def validate(self, check_paths: bool = True) -> List[Tuple[str, str]]:
        """Return (dotted field, problem) pairs; empty when the config is usable."""
        problems: List[Tuple[str, str]] = []

        def need(ok: bool, key: str, message: str):
            if not ok:
                problems.append((key, message))

        enum_fields = [
            ('task', self.task, Task),
            ('flags.ensemble_mode', self.flags.ensemble_mode, EnsembleMode),
            ('normalizer.unresolved_fallback', self.normalizer.unresolved_fallback,
             UnresolvedFallback),
        ]
        for key, value, enum in enum_fields:
            allowed = [e.value for e in enum]
            need(value in allowed, key, f"must be one of {allowed}, got {value!r}")
        for key, value in (('tagger.scheme', self.tagger.scheme),
                           ('ensemble.scheme', self.ensemble.scheme)):
            need(value in ('IOBES', 'BIO'), key, f"must be IOBES or BIO, got {value!r}")

        need(0.0 <= self.ranking.alpha <= 1.0, 'ranking.alpha', "must lie in [0, 1]")
        need(self.ranking.gamma > 0, 'ranking.gamma', "must be positive")
        for name in ('char_dim', 'char_hidden', 'word_hidden', 'word_dim', 'pos_dim',
                     'ortho_dim', 'cap_dim', 'ngram_dim', 'length_dim', 'sdp_rel_dim',
                     'lm_vocab_size', 'epochs'):
            need(getattr(self.tagger, name) > 0, f'tagger.{name}', "must be positive")
        need(self.tagger.alpha_dim == 2, 'tagger.alpha_dim', "two alpha flags are produced")
        need(self.tagger.learning_rate >= 0, 'tagger.learning_rate', "must be non-negative")
        need(0.0 <= self.tagger.dropout < 1.0, 'tagger.dropout', "must lie in [0, 1)")
        need(self.tagger.clip_norm > 0, 'tagger.clip_norm', "must be positive")
        need(self.ensemble.n_folds >= 2, 'ensemble.n_folds', "need at least 2 folds")
        need(1 <= self.ensemble.confident_fold <= self.ensemble.n_folds,
             'ensemble.confident_fold', "must name one of the folds")
        need(0.0 < self.normalizer.fuzzy_threshold <= 1.0, 'normalizer.fuzzy_threshold',
             "must lie in (0, 1]")
        need(self.normalizer.top_k >= 1, 'normalizer.top_k', "must be at least 1")
        need(self.brute_force.min_chars >= 1, 'brute_force.min_chars', "must be at least 1")
        need(self.relation.tau >= 0, 'relation.tau', "must be non-negative")
        need(self.relation.C > 0, 'relation.C', "must be positive")
        need(self.relation.class_weight > 0, 'relation.class_weight', "must be positive")
        need(self.relation.rbf_gamma is None or self.relation.rbf_gamma > 0,
             'relation.rbf_gamma', "must be positive")
        need(0.0 <= self.evaluation.w_norm <= 1.0, 'evaluation.w_norm', "must lie in [0, 1]")
        need(self.evaluation.mode in ('micro', 'macro'), 'evaluation.mode',
             "must be micro or macro")

        if check_paths:
            for name in ('train_dir', 'dev_dir', 'test_dir', 'obo_file', 'ncbi_names',
                         'schema_file', 'keyword_dir'):
                value = getattr(self.paths, name)
                need(not value or Path(value).exists(), f'paths.{name}',
                     f"path does not exist: {value}")
            for i, value in enumerate(self.paths.embeddings):
                need(Path(value).exists(), f'paths.embeddings[{i}]',
                     f"path does not exist: {value}")
        return problems

    def ensure_valid(self, check_paths: bool = True) -> 'PipelineConfig':
        problems = self.validate(check_paths)
        if problems:
            key, message = problems[0]
            if len(problems) > 1:
                message += f" (+{len(problems) - 1} more problem(s))"
            for other_key, other_message in problems[1:]:
                logger.error(f"config {other_key}: {other_message}")
            raise ConfigError(message, key)
        return self


# Per-task hyper-parameter defaults
TASK_DEFAULTS: Dict[str, Dict[str, Any]] = {
    Task.BB_NORM_NER.value: {
        'tagger': {'pos_dim': 25, 'ortho_dim': 25, 'word_hidden': 200, 'word_dim': 200},
        'flags': {'nested': True},
    },
    Task.PHARMACO.value: {
        'tagger': {'pos_dim': 50, 'ortho_dim': 50, 'word_hidden': 100, 'word_dim': 100},
        'flags': {'nested': False},
    },
    Task.SEEDEV.value: {
        'relation': {'class_weight': 10.0, 'tau': 20},
        'flags': {'nested': False},
    },
}


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str) -> Tuple[str, Any]:
    """'ranking.alpha=0' -> ('ranking.alpha', 0). Values are JSON, else strings."""
    if '=' not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split('=', 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    data = copy.deepcopy(data)
    for text in overrides:
        key, value = parse_override(text)
        node = data
        parts = key.split('.')
        for i, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("cannot set a sub-key of a scalar", '.'.join(parts[:i + 1]))
            node = child
        node[parts[-1]] = value
    return data


def _build(cls, data: Dict[str, Any], prefix: str = ''):
    if not isinstance(data, dict):
        raise ConfigError("expected an object", prefix.rstrip('.') or None)
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in known:
            raise ConfigError("unknown key", dotted)
        default = known[key].default_factory() if callable(known[key].default_factory) \
            else known[key].default
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, dotted + '.')
        else:
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: Dict[str, Any]) -> PipelineConfig:
    """Build a config from a (possibly partial) dict on top of the task defaults."""
    task = data.get('task', PipelineConfig.task)
    if task not in TASK_DEFAULTS:
        raise ConfigError(f"unknown task {task!r}; choose from {sorted(TASK_DEFAULTS)}", 'task')
    merged = _deep_merge(TASK_DEFAULTS[task], data)
    merged['task'] = task
    return _build(PipelineConfig, merged)


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> PipelineConfig:
    """
    Load a JSON config file (optional) and apply dotted overrides.

    Raises:
        ConfigError: unreadable file, unknown key or malformed override
    """
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", 'config') from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}", 'config') from None
    data = apply_overrides(data, overrides)
    config = config_from_dict(data)
    logger.info(f"Configuration loaded (task={config.task}, seed={config.seed})")
    return config


def save_config(config: PipelineConfig, path: str):
    with open(path, 'w') as f:
        json.dump(config.to_dict(), f, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Artifact layout
# ---------------------------------------------------------------------------

class ArtifactLayout:
    """
    Paths of every artifact under the work directory.

    work/
      folds.json
      cache/                      (unless BIOEXT_CACHE_DIR is set)
      models/fold<i>/level1.bin, level2.bin, relation.pkl
      predictions/fold<i>/        per-fold .tags and .a2
      predictions/ensemble/ norm/ brute/ relations/
    """

    def __init__(self, work_dir: str):
        self.root = Path(work_dir)

    @property
    def folds_file(self) -> Path:
        return self.root / 'folds.json'

    @property
    def cache_dir(self) -> Path:
        env = os.environ.get(CACHE_ENV)
        return Path(env) if env else self.root / 'cache'

    def model_dir(self, fold_id: int) -> Path:
        return self.root / 'models' / f'fold{fold_id}'

    def level1_model(self, fold_id: int) -> Path:
        return self.model_dir(fold_id) / 'level1.bin'

    def level2_model(self, fold_id: int) -> Path:
        return self.model_dir(fold_id) / 'level2.bin'

    def relation_model(self, fold_id: int) -> Path:
        return self.model_dir(fold_id) / 'relation.pkl'

    def predictions(self, name: str) -> Path:
        return self.root / 'predictions' / name

    def fold_predictions(self, fold_id: int) -> Path:
        return self.predictions(f'fold{fold_id}')
