"""
Corpus - Code/summary examples, JSON Lines IO, vocabularies and model-input encoding.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

from tqdm import tqdm

from .ast_tree import AstTree, from_obj
from .corpus_generator import SIZE_CLASSES, generate_sample
from .errors import EmptyCorpusError, SchemaError
from .linearizer import DEFAULT_MAX_PATH_LEN, DEFAULT_MAX_PATHS, LinearSeq, Method, linearize
from .minilang import parse_source, summary_tokens
from .relations import build_relations
from .tree_transformer import ModelInput
from .vocab import BOS_ID, EOS_ID, Vocab, vocab_from_streams

DEFAULT_MAX_CODE_LEN = 512

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class CorpusExample:
    """One code/summary pair; exactly one of `source` and `ast` is set."""
    id: str
    summary: str
    source: Optional[str] = None
    ast: Optional[Dict[str, Any]] = None

    def __post_init__(self) -> None:
        if (self.source is None) == (self.ast is None):
            raise SchemaError(f"example {self.id}", 'exactly one of "source" and "ast" is required')
        if not self.summary.strip():
            raise SchemaError(f"example {self.id}.summary", "must be non-empty")

    @classmethod
    def from_record(cls, record: Any, where: str = "$") -> "CorpusExample":
        if not isinstance(record, dict):
            raise SchemaError(where, "example must be an object")
        for key in ("id", "summary"):
            if not isinstance(record.get(key), str):
                raise SchemaError(f"{where}.{key}", "must be a string")
        source = record.get("source")
        if source is not None and not isinstance(source, str):
            raise SchemaError(f"{where}.source", "must be a string")
        ast = record.get("ast")
        if ast is not None and not isinstance(ast, dict):
            raise SchemaError(f"{where}.ast", "must be an AST object")
        try:
            return cls(record["id"], record["summary"], source, ast)
        except SchemaError as e:
            raise SchemaError(where, str(e)) from e

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {}
        if self.source is not None:
            record["source"] = self.source
        else:
            record["ast"] = self.ast
        record["summary"] = self.summary
        record["id"] = self.id
        return record

    def tree(self) -> AstTree:
        return parse_source(self.source) if self.source is not None else from_obj(self.ast)

    def summary_tokens(self) -> List[str]:
        return summary_tokens(self.summary)


# IO

def atomic_write_text(path: Path, text: str) -> None:
    """Write through a temp file in the target directory, then rename over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def dumps_jsonl(records: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(record, ensure_ascii=False) + "\n" for record in records)


def read_corpus(path: Path) -> List[CorpusExample]:
    examples = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            where = f"{Path(path).name}:{line_no}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(where, f"invalid JSON: {e.msg}") from e
            examples.append(CorpusExample.from_record(record, where))
    if not examples:
        raise EmptyCorpusError(f"{path} holds no examples")
    return examples


def write_corpus(path: Path, examples: Sequence[CorpusExample]) -> None:
    atomic_write_text(path, dumps_jsonl(example.to_record() for example in examples))


def bar_disabled(progress: bool) -> Optional[bool]:
    # None lets tqdm hide itself when stderr is not a terminal
    return None if progress else True


def map_examples(fn: Callable[[T], R], items: Sequence[T], workers: int = 1, desc: Optional[str] = None,
                 progress: bool = False) -> List[R]:
    """Order-preserving map, optionally over a process pool."""
    bar = dict(total=len(items), desc=desc, disable=bar_disabled(progress), leave=False)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in tqdm(items, **bar)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, items, chunksize=64), **bar))


# Synthetic corpus

def _generated_record(job: tuple) -> CorpusExample:
    index, example_seed, size_class = job
    sample = generate_sample(example_seed, size_class)
    return CorpusExample(f"ex{index:06d}", " ".join(sample.summary), source=sample.source)


def generate_corpus(n: int, seed: int = 42, size_class: str = "mixed", workers: int = 1,
                    progress: bool = False) -> List[CorpusExample]:
    """
    Deterministic synthetic corpus.

    Args:
        n: number of examples
        seed: corpus seed; per-example seeds are drawn from it
        size_class: "small", "medium" or "mixed"
        workers: process count for generation
        progress: show a progress bar on stderr
    """
    if size_class not in SIZE_CLASSES + ("mixed",):
        raise ValueError(f"unknown size class {size_class!r}")
    rng = random.Random(seed)
    jobs = []
    for index in range(n):
        chosen = rng.choice(SIZE_CLASSES) if size_class == "mixed" else size_class
        jobs.append((index, rng.randrange(2 ** 31), chosen))
    return map_examples(_generated_record, jobs, workers, "gen", progress)


# Vocabularies and encoding

@dataclass(frozen=True)
class Vocabs:
    code: Vocab
    summary: Vocab


def example_seed(example: CorpusExample, seed: int) -> int:
    return (zlib.crc32(example.id.encode("utf-8")) ^ seed) & 0x7FFFFFFF


def linearize_example(example: CorpusExample, method: Method, seed: int = 0,
                      pd_max_path_len: int = DEFAULT_MAX_PATH_LEN,
                      pd_max_paths: int = DEFAULT_MAX_PATHS, tree: Optional[AstTree] = None) -> LinearSeq:
    tree = example.tree() if tree is None else tree
    return linearize(tree, Method(method), pd_max_path_len, pd_max_paths, example_seed(example, seed))


def build_vocab(corpus: Sequence[CorpusExample], side: str, min_freq: int = 2, method: Method = Method.POT,
                seed: int = 0, pd_max_path_len: int = DEFAULT_MAX_PATH_LEN,
                pd_max_paths: int = DEFAULT_MAX_PATHS) -> Vocab:
    """Frequency-sorted vocabulary for the code side (linearized labels) or the summary side."""
    if not corpus:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    if side == "summary":
        streams: Iterable[List[str]] = (example.summary_tokens() for example in corpus)
    elif side == "code":
        streams = (linearize_example(example, method, seed, pd_max_path_len, pd_max_paths).texts
                   for example in corpus)
    else:
        raise ValueError(f"side must be 'code' or 'summary', got {side!r}")
    return vocab_from_streams(streams, min_freq)


def encode_example(example: CorpusExample, vocabs: Vocabs, method: Method = Method.POT, k_anc: int = 5,
                   k_sib: int = 5, max_code_len: int = DEFAULT_MAX_CODE_LEN, seed: int = 0,
                   pd_max_path_len: int = DEFAULT_MAX_PATH_LEN,
                   pd_max_paths: int = DEFAULT_MAX_PATHS) -> ModelInput:
    """
    Parse, linearize, relate and look up one example.

    Sequences longer than `max_code_len` are cut; relations are built on the kept prefix, so
    no pair refers to a dropped position.
    """
    tree = example.tree()
    seq = linearize_example(example, method, seed, pd_max_path_len, pd_max_paths, tree).truncate(max_code_len)
    relations = build_relations(tree, seq, k_anc, k_sib)
    summary = (BOS_ID,) + tuple(vocabs.summary.encode(example.summary_tokens())) + (EOS_ID,)
    return ModelInput(tuple(vocabs.code.encode(seq.texts)), relations, summary)


def make_batches(inputs: Sequence[ModelInput], batch_size: int,
                 rng: Optional[random.Random] = None) -> List[List[ModelInput]]:
    """Bucket by code length, cut into batches, and optionally shuffle the batch order."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    order = sorted(range(len(inputs)), key=lambda i: (len(inputs[i].code_ids), i))
    batches = [[inputs[i] for i in order[start:start + batch_size]]
               for start in range(0, len(order), batch_size)]
    if rng is not None:
        rng.shuffle(batches)
    return batches
