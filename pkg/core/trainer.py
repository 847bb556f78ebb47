"""
Trainer - Training loop, evaluation loss, greedy decoding over a corpus, gradient check.
"""

from __future__ import annotations

import functools
import logging
import random
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .ast_tree import random_tree
from .corpus import (
    DEFAULT_MAX_CODE_LEN,
    CorpusExample,
    Vocabs,
    bar_disabled,
    build_vocab,
    encode_example,
    make_batches,
    map_examples,
)
from .errors import ConfigError, EmptyCorpusError
from .linearizer import DEFAULT_MAX_PATH_LEN, DEFAULT_MAX_PATHS, Method, pot
from .metrics import EvalPair, metric_report
from .relations import build_relations
from .tensor import Adam, finite_diff_check, no_grad
from .tree_transformer import (
    Batch,
    ModelConfig,
    ModelInput,
    ModelParams,
    collate,
    compute_loss,
    encoder_forward,
    greedy_decode_batch,
    init_params,
    train_step,
)
from .vocab import BOS_ID, EOS_ID, PAD_ID, RESERVED

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    """Data and optimization settings; model shape lives in ModelConfig."""
    method: str = Method.POT.value
    lr: float = 1e-3
    steps: int = 2000
    batch_size: int = 8
    grad_clip: float = 1.0
    min_freq: int = 2
    max_code_len: int = DEFAULT_MAX_CODE_LEN
    pd_max_path_len: int = DEFAULT_MAX_PATH_LEN
    pd_max_paths: int = DEFAULT_MAX_PATHS
    log_every: int = 50
    seed: int = 42

    def validate(self) -> None:
        if self.method not in {m.value for m in Method}:
            raise ConfigError(f"method must be one of pot, sbt, pd; got {self.method!r}", "method")
        for name in ("steps", "batch_size", "min_freq", "max_code_len", "pd_max_paths", "log_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1", name)
        if self.pd_max_path_len < 2:
            raise ConfigError("pd_max_path_len must be at least 2", "pd_max_path_len")
        if self.lr <= 0 or self.grad_clip <= 0:
            raise ConfigError("lr and grad_clip must be positive", "lr" if self.lr <= 0 else "grad_clip")

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown training config keys: {', '.join(sorted(unknown))}")
        return cls(**values)


@dataclass
class TrainResult:
    params: ModelParams
    config: ModelConfig
    vocabs: Vocabs
    losses: List[float] = field(default_factory=list)


def encode_corpus(corpus: Sequence[CorpusExample], vocabs: Vocabs, model_config: ModelConfig,
                  training: TrainingConfig, workers: int = 1) -> List[ModelInput]:
    encode = functools.partial(
        encode_example, vocabs=vocabs, method=Method(training.method), k_anc=model_config.k_anc,
        k_sib=model_config.k_sib, max_code_len=training.max_code_len, seed=training.seed,
        pd_max_path_len=training.pd_max_path_len, pd_max_paths=training.pd_max_paths,
    )
    return map_examples(encode, list(corpus), workers)


def build_vocabs(corpus: Sequence[CorpusExample], training: TrainingConfig) -> Vocabs:
    code = build_vocab(corpus, "code", training.min_freq, Method(training.method), training.seed,
                       training.pd_max_path_len, training.pd_max_paths)
    summary = build_vocab(corpus, "summary", training.min_freq)
    return Vocabs(code, summary)


def _collate(inputs: Sequence[ModelInput], config: ModelConfig) -> Batch:
    return collate(inputs, config.k_anc, config.k_sib, max_summary_len=config.max_summary_len)


def train(corpus: Sequence[CorpusExample], model_config: ModelConfig, training: TrainingConfig,
          workers: int = 1, progress: bool = True) -> TrainResult:
    """
    Fit a model on `corpus` with teacher forcing.

    Args:
        corpus: training examples
        model_config: model shape; vocabulary sizes are filled in from the corpus
        training: data and optimizer settings
        workers: process count for encoding
        progress: show a progress bar on stderr

    Returns:
        TrainResult holding the trained parameters and the per-step losses
    """
    if not corpus:
        raise EmptyCorpusError("cannot train on an empty corpus")
    training.validate()
    vocabs = build_vocabs(corpus, training)
    config = replace(model_config, code_vocab_size=len(vocabs.code), summary_vocab_size=len(vocabs.summary))
    config.validate()
    logger.info("Vocabularies: %d code tokens, %d summary tokens", len(vocabs.code), len(vocabs.summary))

    inputs = encode_corpus(corpus, vocabs, config, training, workers)
    batches = [_collate(group, config) for group in make_batches(inputs, training.batch_size)]
    params = init_params(config)
    optimizer = Adam(params.tensors(), lr=training.lr)
    order_rng = random.Random(training.seed)
    dropout_rng = np.random.default_rng(training.seed)
    logger.info("Training %d parameters on %d examples (%d batches) for %d steps",
                params.count(), len(inputs), len(batches), training.steps)

    losses: List[float] = []
    order: List[int] = []
    with tqdm(total=training.steps, desc="train", disable=bar_disabled(progress), leave=False) as bar:
        for step in range(1, training.steps + 1):
            if not order:
                order = list(range(len(batches)))
                order_rng.shuffle(order)
            loss = train_step(batches[order.pop()], params, optimizer, config, dropout_rng, training.grad_clip)
            losses.append(loss)
            bar.update(1)
            if step % training.log_every == 0 or step == training.steps:
                recent = losses[-training.log_every:]
                bar.set_postfix(loss=f"{sum(recent) / len(recent):.4f}")
                logger.debug("step %d: mean loss %.4f", step, sum(recent) / len(recent))
    return TrainResult(params, config, vocabs, losses)


def evaluate_loss(inputs: Sequence[ModelInput], params: ModelParams, config: ModelConfig,
                  batch_size: int = 8) -> float:
    """Token-weighted mean cross-entropy without dropout."""
    if not inputs:
        raise EmptyCorpusError("cannot evaluate an empty input list")
    total = 0.0
    tokens = 0
    with no_grad():
        for start in range(0, len(inputs), batch_size):
            batch = _collate(inputs[start:start + batch_size], config)
            count = int((batch.summary_out != PAD_ID).sum())
            if count:
                total += compute_loss(batch, params, config).item() * count
                tokens += count
    return total / tokens if tokens else 0.0


def decode_inputs(inputs: Sequence[ModelInput], params: ModelParams, config: ModelConfig,
                  batch_size: int = 8, progress: bool = False) -> List[List[int]]:
    """Greedy summaries in input order."""
    outputs: List[List[int]] = []
    starts = range(0, len(inputs), batch_size)
    for start in tqdm(starts, desc="decode", disable=bar_disabled(progress), leave=False):
        batch = _collate(inputs[start:start + batch_size], config)
        with no_grad():
            memory = encoder_forward(batch, params, config)
        outputs.extend(greedy_decode_batch(memory, batch.code_mask, params, config, config.max_summary_len))
    return outputs


def evaluate(corpus: Sequence[CorpusExample], params: ModelParams, config: ModelConfig, vocabs: Vocabs,
             training: TrainingConfig, workers: int = 1,
             progress: bool = False) -> Tuple[Dict[str, object], List[List[str]]]:
    """Decode every example and score against its reference summary."""
    if not corpus:
        raise EmptyCorpusError("cannot evaluate an empty corpus")
    inputs = encode_corpus(corpus, vocabs, config, training, workers)
    decoded = decode_inputs(inputs, params, config, training.batch_size, progress)
    hypotheses = [vocabs.summary.decode(ids) for ids in decoded]
    pairs = [EvalPair.of(hyp, example.summary_tokens()) for hyp, example in zip(hypotheses, corpus)]
    report = metric_report(pairs)
    logger.info("Evaluated %d examples: BLEU %.2f", len(pairs), report["bleu"])
    return report, hypotheses


def tiny_model_config() -> ModelConfig:
    return ModelConfig(d_model=8, heads=2, enc_layers=1, dec_layers=1, d_ff=16, k_anc=5, k_sib=5,
                       code_vocab_size=20, summary_vocab_size=20, max_summary_len=8, dropout=0.0)


def tiny_batch(config: ModelConfig, seed: int = 0, nodes: int = 12, summary_len: int = 5) -> Batch:
    """A single-example batch over a random tree, with random ids above the reserved range."""
    rng = np.random.default_rng(seed)
    tree = random_tree(seed, nodes, 3)
    seq = pot(tree)
    code_ids = tuple(int(i) for i in rng.integers(len(RESERVED), config.code_vocab_size, size=len(seq)))
    words = rng.integers(len(RESERVED), config.summary_vocab_size, size=summary_len)
    summary = (BOS_ID,) + tuple(int(w) for w in words) + (EOS_ID,)
    item = ModelInput(code_ids, build_relations(tree, seq, config.k_anc, config.k_sib), summary)
    return _collate([item], config)


def gradcheck_tiny_model(seed: int = 0, config: Optional[ModelConfig] = None, max_coords: int = 500) -> float:
    """Max relative error between backprop and central differences on the tiny model."""
    config = config or tiny_model_config()
    params = init_params(config, seed)
    batch = tiny_batch(config, seed)
    return finite_diff_check(lambda: compute_loss(batch, params, config), params.tensors(),
                             max_coords=max_coords, seed=seed)
