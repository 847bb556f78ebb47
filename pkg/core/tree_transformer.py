"""
Tree Transformer - Encoder-decoder whose encoder attends only along tree relations.

Each encoder layer runs two multi-head attention branches, one over the clipped
ancestor-descendant pairs and one over the clipped sibling pairs. Scores add content and
relative-distance terms; branch outputs are concatenated and projected back to d_model.
The decoder is a standard post-norm transformer decoder with learned positions.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, LengthError, ShapeError
from .relations import RelationSet, dense_relation
from .tensor import (
    Adam,
    Tensor,
    add,
    clip_grad_norm,
    concat_last_dim,
    cross_entropy,
    dropout,
    embedding_lookup,
    gather_last,
    layer_norm,
    masked_softmax,
    matmul,
    mul_scalar,
    no_grad,
    relu,
    reshape,
    transpose,
)
from .vocab import BOS_ID, EOS_ID, PAD_ID

SCORE_MODES = ("disentangled", "shaw")
BRANCHES = ("anc", "sib")


@dataclass
class ModelConfig:
    """Model hyperparameters; every parameter shape derives from these fields."""
    d_model: int = 128
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    d_ff: int = 256
    k_anc: int = 5
    k_sib: int = 5
    code_vocab_size: int = 0
    summary_vocab_size: int = 0
    max_summary_len: int = 32
    dropout: float = 0.1
    seed: int = 42
    score_mode: str = "disentangled"
    share_relative_tables: bool = False

    @property
    def d_head(self) -> int:
        return self.d_model // self.heads

    def validate(self) -> None:
        for name in ("d_model", "heads", "d_ff", "k_anc", "k_sib", "code_vocab_size",
                     "summary_vocab_size", "max_summary_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1", name)
        for name in ("enc_layers", "dec_layers"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative", name)
        if self.d_model % self.heads:
            raise ConfigError("d_model must be divisible by heads", "heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)", "dropout")
        if self.score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}", "score_mode")

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {', '.join(sorted(unknown))}")
        return cls(**values)


@dataclass(frozen=True)
class ModelInput:
    """One encoded example: code token ids, their relations, and the framed summary."""
    code_ids: Tuple[int, ...]
    relations: RelationSet
    summary_ids: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.relations.n != len(self.code_ids):
            raise ShapeError(f"relations cover {self.relations.n} positions, input has {len(self.code_ids)}")


@dataclass
class Batch:
    """Padded arrays for a group of ModelInputs; pads are in no allowed set."""
    code_ids: np.ndarray
    code_mask: np.ndarray
    anc_index: np.ndarray
    anc_mask: np.ndarray
    sib_index: np.ndarray
    sib_mask: np.ndarray
    summary_in: np.ndarray
    summary_out: np.ndarray

    @property
    def size(self) -> int:
        return self.code_ids.shape[0]


def collate(inputs: Sequence[ModelInput], k_anc: int, k_sib: int, pad_to: Optional[int] = None,
            max_summary_len: Optional[int] = None) -> Batch:
    """Pad a group of inputs; summaries are split into decoder input (BOS...) and target (...EOS)."""
    if not inputs:
        raise ShapeError("cannot collate an empty batch")
    width = max(len(item.code_ids) for item in inputs)
    if pad_to is not None:
        if pad_to < width:
            raise ShapeError(f"pad_to={pad_to} is shorter than the longest input ({width})")
        width = pad_to
    count = len(inputs)
    code_ids = np.full((count, width), PAD_ID, dtype=np.int64)
    code_mask = np.zeros((count, width), dtype=bool)
    anc_index = np.zeros((count, width, width), dtype=np.int64)
    anc_mask = np.zeros((count, width, width), dtype=bool)
    sib_index = np.zeros((count, width, width), dtype=np.int64)
    sib_mask = np.zeros((count, width, width), dtype=bool)

    summaries = [list(item.summary_ids) for item in inputs]
    if max_summary_len is not None:
        # Decoder input is at most max_summary_len long; keep the closing EOS when cutting
        limit = max_summary_len + 1
        summaries = [ids if len(ids) <= limit else ids[:limit - 1] + [ids[-1]] for ids in summaries]
    steps = max((len(ids) - 1 for ids in summaries), default=0)
    summary_in = np.full((count, max(steps, 0)), PAD_ID, dtype=np.int64)
    summary_out = np.full((count, max(steps, 0)), PAD_ID, dtype=np.int64)

    for row, item in enumerate(inputs):
        length = len(item.code_ids)
        code_ids[row, :length] = item.code_ids
        code_mask[row, :length] = True
        relations = item.relations
        anc_index[row], anc_mask[row] = dense_relation(relations.allowed_anc, relations.anc, k_anc, width)
        sib_index[row], sib_mask[row] = dense_relation(relations.allowed_sib, relations.sib, k_sib, width)
        ids = summaries[row]
        if len(ids) > 1:
            summary_in[row, :len(ids) - 1] = ids[:-1]
            summary_out[row, :len(ids) - 1] = ids[1:]
    return Batch(code_ids, code_mask, anc_index, anc_mask, sib_index, sib_mask, summary_in, summary_out)


class ModelParams:
    """Named parameter tensors in a fixed order."""

    def __init__(self, tensors: "OrderedDict[str, Tensor]"):
        self._tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def tensors(self) -> List[Tensor]:
        return list(self._tensors.values())

    def count(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Every parameter name and shape, in initialization order."""
    d, ff, dh = config.d_model, config.d_ff, config.d_head
    rows = {"anc": 2 * config.k_anc + 1, "sib": 2 * config.k_sib + 1}
    # Shaw scores only read the key-side table
    sides = ("key", "query") if config.score_mode == "disentangled" else ("key",)
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["code_embed"] = (config.code_vocab_size, d)
    shapes["summary_embed"] = (config.summary_vocab_size, d)
    if config.share_relative_tables:
        for branch in BRANCHES:
            for side in sides:
                shapes[f"enc.{branch}.rel_{side}"] = (rows[branch], dh)
    for layer in range(config.enc_layers):
        prefix = f"enc{layer}"
        for branch in BRANCHES:
            for proj in ("wq", "wk", "wv"):
                shapes[f"{prefix}.{branch}.{proj}"] = (d, d)
            if not config.share_relative_tables:
                for side in sides:
                    shapes[f"{prefix}.{branch}.rel_{side}"] = (rows[branch], dh)
        shapes[f"{prefix}.wo"] = (2 * d, d)
        _norm_shapes(shapes, f"{prefix}.ln1", d)
        _ff_shapes(shapes, f"{prefix}.ff", d, ff)
        _norm_shapes(shapes, f"{prefix}.ln2", d)
    shapes["dec.pos"] = (config.max_summary_len, d)
    for layer in range(config.dec_layers):
        prefix = f"dec{layer}"
        for block in ("self", "cross"):
            for proj in ("wq", "wk", "wv", "wo"):
                shapes[f"{prefix}.{block}.{proj}"] = (d, d)
        _norm_shapes(shapes, f"{prefix}.ln1", d)
        _norm_shapes(shapes, f"{prefix}.ln2", d)
        _ff_shapes(shapes, f"{prefix}.ff", d, ff)
        _norm_shapes(shapes, f"{prefix}.ln3", d)
    shapes["out_proj"] = (d, config.summary_vocab_size)
    shapes["out_bias"] = (config.summary_vocab_size,)
    return shapes


def _norm_shapes(shapes, prefix: str, width: int) -> None:
    shapes[f"{prefix}.gain"] = (width,)
    shapes[f"{prefix}.bias"] = (width,)


def _ff_shapes(shapes, prefix: str, width: int, hidden: int) -> None:
    shapes[f"{prefix}.w1"] = (width, hidden)
    shapes[f"{prefix}.b1"] = (hidden,)
    shapes[f"{prefix}.w2"] = (hidden, width)
    shapes[f"{prefix}.b2"] = (width,)


def init_params(config: ModelConfig, seed: Optional[int] = None) -> ModelParams:
    """
    Scaled-uniform initialization, deterministic per seed.

    Matrices draw from +-sqrt(6 / (fan_in + fan_out)); relative tables from +-0.02;
    layer-norm gains start at 1, every bias at 0.
    """
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    tensors: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".gain"):
            data = np.ones(shape)
        elif len(shape) == 1:
            data = np.zeros(shape)
        elif ".rel_" in name:
            data = rng.uniform(-0.02, 0.02, size=shape)
        else:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
            data = rng.uniform(-bound, bound, size=shape)
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    return ModelParams(tensors)


@dataclass
class AttentionCounter:
    """
    Mask density of the encoder's relation attention, counted at the softmax input.

    Scores are computed densely and then masked: `materialized` is every score entry the
    branches built (pads and heads included). `anc_scores` and `sib_scores` count the
    real-position entries the softmax keeps, per head; `dense_scores` counts the real-position
    entries an unmasked layer would keep. `reduction` is therefore the share of scores a
    sparse kernel could skip, not work this implementation saves.
    """
    anc_scores: int = 0
    sib_scores: int = 0
    dense_scores: int = 0
    materialized: int = 0
    layers: int = 0

    def record(self, branch: str, scores: np.ndarray, mask: np.ndarray, code_mask: np.ndarray) -> None:
        """Count one branch's softmax input; `scores` is B x H x n x n, `mask` is B x n x n."""
        real = code_mask[:, :, None] & code_mask[:, None, :]
        kept = int((mask & real).sum())
        if branch == "anc":
            self.anc_scores += kept
        else:
            self.sib_scores += kept
        self.dense_scores += int(real.sum())
        self.materialized += int(scores.size)

    @property
    def unmasked(self) -> int:
        return self.anc_scores + self.sib_scores

    @property
    def reduction(self) -> float:
        return 1.0 - self.unmasked / self.dense_scores if self.dense_scores else 0.0


@dataclass
class ForwardTrace:
    """Optional capture of attention probabilities for inspection and tests."""
    probabilities: Dict[str, np.ndarray] = field(default_factory=dict)


# Encoder

def _split_heads(x: Tensor, heads: int) -> Tensor:
    batch, length, width = x.shape
    return transpose(reshape(x, (batch, length, heads, width // heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    batch, heads, length, width = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (batch, length, heads * width))


def _relation_table(params: ModelParams, config: ModelConfig, layer: int, branch: str, side: str) -> Tensor:
    if config.share_relative_tables:
        return params[f"enc.{branch}.rel_{side}"]
    return params[f"enc{layer}.{branch}.rel_{side}"]


def _with_pad_self_loops(mask: np.ndarray, code_mask: np.ndarray) -> np.ndarray:
    """Pad rows attend only to themselves so every softmax row has support."""
    width = mask.shape[-1]
    pad_diagonal = np.eye(width, dtype=bool)[None] & ~code_mask[:, :, None]
    return mask | pad_diagonal


def relation_attention(x: Tensor, params: ModelParams, config: ModelConfig, layer: int, branch: str,
                       index: np.ndarray, mask: np.ndarray, trace: Optional[ForwardTrace] = None,
                       counter: Optional[AttentionCounter] = None,
                       code_mask: Optional[np.ndarray] = None) -> Tensor:
    """
    One branch: H heads attending over the allowed pairs of a single relation.

    `counter` needs `code_mask` to tell real positions from pads.
    """
    prefix = f"enc{layer}.{branch}"
    heads = config.heads
    query = _split_heads(matmul(x, params[f"{prefix}.wq"]), heads)
    key = _split_heads(matmul(x, params[f"{prefix}.wk"]), heads)
    value = _split_heads(matmul(x, params[f"{prefix}.wv"]), heads)

    rel_index = index[:, None, :, :]
    content = matmul(query, transpose(key, (0, 1, 3, 2)))
    rel_key = _relation_table(params, config, layer, branch, "key")
    to_relation = gather_last(matmul(query, transpose(rel_key, (1, 0))), rel_index)
    scores = add(content, to_relation)
    if config.score_mode == "disentangled":
        rel_query = _relation_table(params, config, layer, branch, "query")
        from_relation = gather_last(matmul(key, transpose(rel_query, (1, 0))),
                                    np.swapaxes(rel_index, -1, -2))
        scores = add(scores, transpose(from_relation, (0, 1, 3, 2)))
        scale = 1.0 / math.sqrt(3 * config.d_head)
    else:
        scale = 1.0 / math.sqrt(config.d_head)
    if counter is not None:
        if code_mask is None:
            raise ShapeError("counting attention scores needs the code mask")
        counter.record(branch, scores.data, mask, code_mask)
    probs = masked_softmax(mul_scalar(scores, scale), mask[:, None, :, :])
    if trace is not None:
        trace.probabilities[prefix] = probs.data
    return _merge_heads(matmul(probs, value))


def tree_mha(x: Tensor, batch: Batch, params: ModelParams, config: ModelConfig, layer: int,
             rng: Optional[np.random.Generator] = None, counter: Optional[AttentionCounter] = None,
             trace: Optional[ForwardTrace] = None) -> Tensor:
    """Both relation branches, concatenated, projected, then residual add and layer norm."""
    anc_mask = _with_pad_self_loops(batch.anc_mask, batch.code_mask)
    sib_mask = _with_pad_self_loops(batch.sib_mask, batch.code_mask)
    anc = relation_attention(x, params, config, layer, "anc", batch.anc_index, anc_mask, trace,
                             counter, batch.code_mask)
    sib = relation_attention(x, params, config, layer, "sib", batch.sib_index, sib_mask, trace,
                             counter, batch.code_mask)
    if counter is not None:
        counter.layers += 1
    mixed = matmul(concat_last_dim([anc, sib]), params[f"enc{layer}.wo"])
    mixed = dropout(mixed, config.dropout, rng)
    return layer_norm(add(x, mixed), params[f"enc{layer}.ln1.gain"], params[f"enc{layer}.ln1.bias"])


def _feed_forward(x: Tensor, params: ModelParams, prefix: str, rate: float,
                  rng: Optional[np.random.Generator]) -> Tensor:
    hidden = relu(add(matmul(x, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]))
    out = add(matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])
    return dropout(out, rate, rng)


def embed_code(batch: Batch, params: ModelParams) -> Tensor:
    return embedding_lookup(params["code_embed"], batch.code_ids)


def encoder_forward(batch: Batch, params: ModelParams, config: ModelConfig,
                    rng: Optional[np.random.Generator] = None, counter: Optional[AttentionCounter] = None,
                    trace: Optional[ForwardTrace] = None, embedded: Optional[Tensor] = None) -> Tensor:
    """
    Encode a batch into memory rows (B x n x d_model).

    There are no sequence-position embeddings; structure enters only through relations.
    """
    x = embed_code(batch, params) if embedded is None else embedded
    for layer in range(config.enc_layers):
        x = tree_mha(x, batch, params, config, layer, rng, counter, trace)
        prefix = f"enc{layer}"
        x = layer_norm(add(x, _feed_forward(x, params, f"{prefix}.ff", config.dropout, rng)),
                       params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])
    return x


# Decoder

def _attention(query_in: Tensor, memory: Tensor, params: ModelParams, prefix: str, heads: int,
               mask: np.ndarray) -> Tensor:
    query = _split_heads(matmul(query_in, params[f"{prefix}.wq"]), heads)
    key = _split_heads(matmul(memory, params[f"{prefix}.wk"]), heads)
    value = _split_heads(matmul(memory, params[f"{prefix}.wv"]), heads)
    scale = 1.0 / math.sqrt(query.shape[-1])
    scores = mul_scalar(matmul(query, transpose(key, (0, 1, 3, 2))), scale)
    probs = masked_softmax(scores, mask)
    return matmul(_merge_heads(matmul(probs, value)), params[f"{prefix}.wo"])


def decoder_forward(memory: Tensor, memory_mask: np.ndarray, target_in: np.ndarray, params: ModelParams,
                    config: ModelConfig, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Teacher-forced decoder logits (B x m x V) for the given prefixes."""
    target_in = np.asarray(target_in, dtype=np.int64)
    length = target_in.shape[1]
    if length > config.max_summary_len:
        raise LengthError(f"summary prefix of {length} exceeds max_summary_len={config.max_summary_len}")
    positions = embedding_lookup(params["dec.pos"], np.arange(length))
    y = add(embedding_lookup(params["summary_embed"], target_in), positions)
    causal = np.tril(np.ones((length, length), dtype=bool))[None, None]
    cross = np.asarray(memory_mask, dtype=bool)[:, None, None, :]
    for layer in range(config.dec_layers):
        prefix = f"dec{layer}"
        attended = dropout(_attention(y, y, params, f"{prefix}.self", config.heads, causal), config.dropout, rng)
        y = layer_norm(add(y, attended), params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"])
        attended = dropout(_attention(y, memory, params, f"{prefix}.cross", config.heads, cross),
                           config.dropout, rng)
        y = layer_norm(add(y, attended), params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])
        y = layer_norm(add(y, _feed_forward(y, params, f"{prefix}.ff", config.dropout, rng)),
                       params[f"{prefix}.ln3.gain"], params[f"{prefix}.ln3.bias"])
    return add(matmul(y, params["out_proj"]), params["out_bias"])


# Training and decoding

def compute_loss(batch: Batch, params: ModelParams, config: ModelConfig,
                 rng: Optional[np.random.Generator] = None,
                 counter: Optional[AttentionCounter] = None) -> Tensor:
    """Mean cross-entropy over non-pad summary targets; dropout only when `rng` is given."""
    memory = encoder_forward(batch, params, config, rng, counter)
    logits = decoder_forward(memory, batch.code_mask, batch.summary_in, params, config, rng)
    return cross_entropy(logits, batch.summary_out, ignore_index=PAD_ID)


def train_step(batch: Batch, params: ModelParams, optimizer: Adam, config: ModelConfig,
               rng: Optional[np.random.Generator] = None, grad_clip: float = 1.0) -> float:
    """Teacher-forced forward/backward, global-norm clipping and one Adam update."""
    if batch.size == 0:
        raise ShapeError("train_step needs a non-empty batch")
    optimizer.zero_grad()
    loss = compute_loss(batch, params, config, rng)
    loss.backward()
    clip_grad_norm(params.tensors(), grad_clip)
    optimizer.step()
    return loss.item()


def greedy_decode_batch(memory: Tensor, memory_mask: np.ndarray, params: ModelParams, config: ModelConfig,
                        max_len: int) -> List[List[int]]:
    """Argmax decoding from BOS; a row stops at EOS. Ties go to the lowest token id."""
    count = memory.shape[0]
    limit = min(max_len, config.max_summary_len)
    outputs: List[List[int]] = [[] for _ in range(count)]
    finished = [False] * count
    prefix = np.full((count, 1), BOS_ID, dtype=np.int64)
    with no_grad():
        for _ in range(limit):
            logits = decoder_forward(memory, memory_mask, prefix, params, config)
            chosen = np.argmax(logits.data[:, -1, :], axis=-1)
            for row, token in enumerate(chosen.tolist()):
                if finished[row]:
                    continue
                if token == EOS_ID:
                    finished[row] = True
                else:
                    outputs[row].append(token)
            if all(finished):
                break
            prefix = np.concatenate([prefix, chosen[:, None]], axis=1)
    return outputs


def greedy_decode(memory: Tensor, params: ModelParams, config: ModelConfig, max_len: int,
                  memory_mask: Optional[np.ndarray] = None) -> List[int]:
    """Greedy summary for a single encoded example (memory of shape 1 x n x d)."""
    if memory_mask is None:
        memory_mask = np.ones(memory.shape[:2], dtype=bool)
    return greedy_decode_batch(memory, memory_mask, params, config, max_len)[0]
