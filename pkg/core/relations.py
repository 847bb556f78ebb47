"""
Relations - Ancestor-descendant (A) and sibling (S) distance maps over sequence positions.

Maps are sparse: a pair that is not related is simply absent ("infinity"). Distances are
signed; A[i, j] = depth(node j) - depth(node i) when one node is an ancestor of the other,
S[i, j] = childIndex(node j) - childIndex(node i) for nodes sharing a parent.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from .ast_tree import AstTree, root_path
from .errors import MapMismatchError
from .linearizer import LinearSeq

Pair = Tuple[int, int]
DistanceMap = Dict[Pair, int]

DEFAULT_K = 5


def _positions_by_node(tree: AstTree, seq: LinearSeq) -> Dict[int, List[int]]:
    positions: Dict[int, List[int]] = defaultdict(list)
    for position, (_, node_id) in enumerate(seq.tokens):
        if node_id is None:
            continue
        if not 0 <= node_id < tree.n:
            raise MapMismatchError(position, node_id, tree.n)
        positions[node_id].append(position)
    return positions


def ancestry_matrix(tree: AstTree, seq: LinearSeq) -> DistanceMap:
    """Signed ancestry distances; positions without a node only relate to themselves."""
    positions = _positions_by_node(tree, seq)
    anc: DistanceMap = {(i, i): 0 for i in range(len(seq))}
    nodes = tree.nodes
    depth = tree.depth
    for v, below in positions.items():
        for i in below:
            for j in below:
                anc[(i, j)] = 0
        u = nodes[v].parent
        while u is not None:
            above = positions.get(u)
            if above:
                distance = depth[v] - depth[u]
                for i in above:
                    for j in below:
                        anc[(i, j)] = distance
                        anc[(j, i)] = -distance
            u = nodes[u].parent
    return anc


def sibling_matrix(tree: AstTree, seq: LinearSeq) -> DistanceMap:
    """Signed child-index differences between positions whose nodes share a parent."""
    positions = _positions_by_node(tree, seq)
    sib: DistanceMap = {(i, i): 0 for i in range(len(seq))}
    families: Dict[int, List[int]] = defaultdict(list)
    for v, here in positions.items():
        for i in here:
            for j in here:
                sib[(i, j)] = 0
        parent = tree.nodes[v].parent
        if parent is not None:
            families[parent].append(v)
    child_index = tree.child_index
    for members in families.values():
        for u in members:
            for v in members:
                if u == v:
                    continue
                distance = child_index[v] - child_index[u]
                for i in positions[u]:
                    for j in positions[v]:
                        sib[(i, j)] = distance
    return sib


def oracle_relations(tree: AstTree, seq: LinearSeq) -> Tuple[DistanceMap, DistanceMap]:
    """Reference builder: walks root paths for every one of the n^2 position pairs."""
    node_ids = seq.node_ids
    for position, node_id in enumerate(node_ids):
        if node_id is not None and not 0 <= node_id < tree.n:
            raise MapMismatchError(position, node_id, tree.n)
    anc: DistanceMap = {}
    sib: DistanceMap = {}
    n = len(node_ids)
    for i in range(n):
        for j in range(n):
            if i == j:
                anc[(i, j)] = 0
                sib[(i, j)] = 0
                continue
            u, v = node_ids[i], node_ids[j]
            if u is None or v is None:
                continue
            if u == v:
                anc[(i, j)] = 0
                sib[(i, j)] = 0
                continue
            path_u = root_path(tree, u)
            path_v = root_path(tree, v)
            if u in path_v:
                anc[(i, j)] = len(path_v) - 1 - path_v.index(u)
            elif v in path_u:
                anc[(i, j)] = -(len(path_u) - 1 - path_u.index(v))
            if len(path_u) > 1 and len(path_v) > 1 and path_u[-2] == path_v[-2]:
                siblings = list(tree.nodes[path_u[-2]].children)
                sib[(i, j)] = siblings.index(v) - siblings.index(u)
    return anc, sib


@dataclass(frozen=True)
class RelationSet:
    """Clipped relations; `k_*` of None means no clipping radius."""
    n: int
    anc: Mapping[Pair, int]
    sib: Mapping[Pair, int]
    k_anc: Optional[int]
    k_sib: Optional[int]
    allowed_anc: FrozenSet[Pair]
    allowed_sib: FrozenSet[Pair]

    @property
    def allowed_union(self) -> FrozenSet[Pair]:
        return self.allowed_anc | self.allowed_sib


def _clip_map(distances: Mapping[Pair, int], k: Optional[int]) -> Tuple[Dict[Pair, int], FrozenSet[Pair]]:
    if k is None:
        return dict(distances), frozenset(distances)
    clipped = {pair: max(-k, min(k, d)) for pair, d in distances.items()}
    allowed = frozenset(pair for pair, d in distances.items() if abs(d) <= k)
    return clipped, allowed


def clip(anc: Mapping[Pair, int], sib: Mapping[Pair, int], k_anc: Optional[int],
         k_sib: Optional[int], n: Optional[int] = None) -> RelationSet:
    """Keep pairs within the K-neighbourhood and clamp stored distances to [-K, K]."""
    for k in (k_anc, k_sib):
        if k is not None and k < 1:
            raise ValueError(f"clip radius must be >= 1 or None, got {k}")
    if n is None:
        n = sum(1 for i, j in anc if i == j)
    clipped_anc, allowed_anc = _clip_map(anc, k_anc)
    clipped_sib, allowed_sib = _clip_map(sib, k_sib)
    return RelationSet(
        n=n,
        anc=MappingProxyType(clipped_anc),
        sib=MappingProxyType(clipped_sib),
        k_anc=k_anc,
        k_sib=k_sib,
        allowed_anc=allowed_anc,
        allowed_sib=allowed_sib,
    )


def build_relations(tree: AstTree, seq: LinearSeq, k_anc: Optional[int] = DEFAULT_K,
                    k_sib: Optional[int] = DEFAULT_K) -> RelationSet:
    return clip(ancestry_matrix(tree, seq), sibling_matrix(tree, seq), k_anc, k_sib, len(seq))


@dataclass(frozen=True)
class ReductionReport:
    n: int
    allowed_anc: int
    allowed_sib: int
    allowed_union: int

    @property
    def total_pairs(self) -> int:
        return self.n * self.n

    @property
    def reduction(self) -> float:
        """Share of position pairs that no branch attends to."""
        if not self.total_pairs:
            return 0.0
        return 1.0 - self.allowed_union / self.total_pairs

    @property
    def score_reduction(self) -> float:
        """Share of attention-score evaluations saved against two dense branches."""
        if not self.total_pairs:
            return 0.0
        return 1.0 - (self.allowed_anc + self.allowed_sib) / (2 * self.total_pairs)

    def to_record(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "allowed_anc": self.allowed_anc,
            "allowed_sib": self.allowed_sib,
            "allowed_union": self.allowed_union,
            "reduction": self.reduction,
            "score_reduction": self.score_reduction,
        }


def sparsity_stats(relset: RelationSet) -> ReductionReport:
    return ReductionReport(
        n=relset.n,
        allowed_anc=len(relset.allowed_anc),
        allowed_sib=len(relset.allowed_sib),
        allowed_union=len(relset.allowed_union),
    )


def dense_relation(pairs: FrozenSet[Pair], distances: Mapping[Pair, int], k: int,
                   size: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dense (index, mask) arrays for one relation padded to `size` positions.

    index[i, j] = distance + k, a row of the relative-embedding table; mask marks allowed pairs.
    """
    index = np.zeros((size, size), dtype=np.int64)
    mask = np.zeros((size, size), dtype=bool)
    if pairs:
        rows, cols = np.array(sorted(pairs), dtype=np.int64).T
        values = np.array([distances[(i, j)] for i, j in zip(rows.tolist(), cols.tolist())], dtype=np.int64)
        index[rows, cols] = np.clip(values, -k, k) + k
        mask[rows, cols] = True
    return index, mask
