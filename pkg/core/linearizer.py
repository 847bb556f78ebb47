"""
Linearizer - Turns an AstTree into a token sequence with a position -> node id map.

Three methods: pre-order traversal (POT), structure-based traversal (SBT, bracketed) and
path decomposition (PD, sampled leaf-to-leaf paths joined by a separator token).
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .ast_tree import AstTree
from .errors import DegenerateError

OPEN_BRACKET = "("
CLOSE_BRACKET = ")"
PATH_SEPARATOR = "<sep>"

DEFAULT_MAX_PATH_LEN = 8
DEFAULT_MAX_PATHS = 32


class Method(str, Enum):
    POT = "pot"
    SBT = "sbt"
    PD = "pd"


@dataclass(frozen=True)
class LinearSeq:
    """Tokens paired with the node they came from (None for brackets and separators)."""
    tokens: Tuple[Tuple[str, Optional[int]], ...]
    method: Method

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> List[str]:
        return [text for text, _ in self.tokens]

    @property
    def node_ids(self) -> List[Optional[int]]:
        return [node_id for _, node_id in self.tokens]

    def truncate(self, cap: int) -> "LinearSeq":
        if len(self.tokens) <= cap:
            return self
        return LinearSeq(self.tokens[:cap], self.method)

    def to_record(self) -> Dict[str, object]:
        return {"method": self.method.value, "tokens": self.texts, "node_ids": self.node_ids}


def pot(tree: AstTree) -> LinearSeq:
    """Pre-order traversal; ids are pre-order already, so position i holds node i."""
    return LinearSeq(tuple((node.label, node.id) for node in tree.nodes), Method.POT)


def sbt(tree: AstTree) -> LinearSeq:
    """SBT(v) = "(" label(v) SBT(c1) ... SBT(ck) ")" label(v); 4 tokens per node."""
    nodes = tree.nodes
    tokens: List[Tuple[str, Optional[int]]] = []
    # (node id, closing) pairs
    stack: List[Tuple[int, bool]] = [(0, False)]
    while stack:
        node_id, closing = stack.pop()
        label = nodes[node_id].label
        if closing:
            tokens.append((CLOSE_BRACKET, None))
            tokens.append((label, node_id))
            continue
        tokens.append((OPEN_BRACKET, None))
        tokens.append((label, node_id))
        stack.append((node_id, True))
        stack.extend((child, False) for child in reversed(nodes[node_id].children))
    return LinearSeq(tuple(tokens), Method.SBT)


def leaf_path(tree: AstTree, start: int, end: int) -> List[int]:
    """Node ids from `start` up to the lowest common ancestor and down to `end`."""
    up: List[int] = []
    down: List[int] = []
    a, b = start, end
    depth = tree.depth
    nodes = tree.nodes
    while depth[a] > depth[b]:
        up.append(a)
        a = nodes[a].parent
    while depth[b] > depth[a]:
        down.append(b)
        b = nodes[b].parent
    while a != b:
        up.append(a)
        down.append(b)
        a = nodes[a].parent
        b = nodes[b].parent
    up.append(a)
    up.extend(reversed(down))
    return up


def _path_length(tree: AstTree, start: int, end: int) -> int:
    depth = tree.depth
    nodes = tree.nodes
    a, b = start, end
    while depth[a] > depth[b]:
        a = nodes[a].parent
    while depth[b] > depth[a]:
        b = nodes[b].parent
    while a != b:
        a = nodes[a].parent
        b = nodes[b].parent
    return depth[start] + depth[end] - 2 * depth[a] + 1


def pd(tree: AstTree, max_path_len: int = DEFAULT_MAX_PATH_LEN,
       max_paths: int = DEFAULT_MAX_PATHS, seed: int = 0, strict: bool = False) -> LinearSeq:
    """
    Path decomposition.

    Leaf pairs whose path has at most `max_path_len` nodes are eligible; up to `max_paths`
    of them are sampled without replacement and emitted in pre-order of their leaves,
    separated by PATH_SEPARATOR.

    Args:
        tree: source tree
        max_path_len: longest path kept, in nodes
        max_paths: number of paths sampled
        seed: sampling seed
        strict: raise DegenerateError instead of falling back when there are < 2 leaves

    Returns:
        LinearSeq where each path position carries its node id
    """
    if max_path_len < 2:
        raise ValueError("max_path_len must be at least 2")
    if max_paths < 1:
        raise ValueError("max_paths must be at least 1")
    leaves = tree.leaves()
    if len(leaves) < 2:
        if strict:
            raise DegenerateError(f"path decomposition needs two leaves, tree has {len(leaves)}")
        return LinearSeq(((tree.nodes[leaves[0]].label, leaves[0]),), Method.PD)

    eligible = [
        pair for pair in itertools.combinations(leaves, 2)
        if _path_length(tree, *pair) <= max_path_len
    ]
    if not eligible:
        # Every leaf pair is too far apart; keep one leaf so the sequence is never empty
        return LinearSeq(((tree.nodes[leaves[0]].label, leaves[0]),), Method.PD)
    rng = random.Random(seed)
    chosen = sorted(rng.sample(eligible, min(max_paths, len(eligible))))

    tokens: List[Tuple[str, Optional[int]]] = []
    for index, (start, end) in enumerate(chosen):
        if index:
            tokens.append((PATH_SEPARATOR, None))
        tokens.extend((tree.nodes[node_id].label, node_id) for node_id in leaf_path(tree, start, end))
    return LinearSeq(tuple(tokens), Method.PD)


def linearize(tree: AstTree, method: Method, max_path_len: int = DEFAULT_MAX_PATH_LEN,
              max_paths: int = DEFAULT_MAX_PATHS, seed: int = 0) -> LinearSeq:
    method = Method(method)
    if method is Method.POT:
        return pot(tree)
    if method is Method.SBT:
        return sbt(tree)
    return pd(tree, max_path_len, max_paths, seed)


@dataclass(frozen=True)
class TimingRow:
    method: Method
    trees: int
    total_seconds: float

    @property
    def mean_seconds(self) -> float:
        return self.total_seconds / self.trees if self.trees else 0.0

    def to_record(self) -> Dict[str, object]:
        return {
            "method": self.method.value,
            "trees": self.trees,
            "total_seconds": self.total_seconds,
            "mean_seconds": self.mean_seconds,
        }


def timing_report(corpus: Sequence[AstTree], methods: Iterable[Method],
                  clock: Callable[[], float] = time.perf_counter) -> List[TimingRow]:
    """Wall time per method over the whole corpus, one method at a time on this thread."""
    rows = []
    for method in methods:
        method = Method(method)
        start = clock()
        for tree in corpus:
            linearize(tree, method)
        rows.append(TimingRow(method, len(corpus), clock() - start))
    return rows
