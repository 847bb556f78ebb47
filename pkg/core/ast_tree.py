"""
AST Tree - Canonical abstract syntax tree model shared by every pipeline stage.

Node ids are always assigned in pre-order, so a subtree occupies the contiguous id block
[id, id + size - 1].
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import CycleError, DanglingChildError, ForestError, SchemaError

RawNode = Tuple[str, Optional[str], Sequence[int]]

# Pools used by random_tree; leaves draw a value, BinaryOp draws an operator
_INTERNAL_KINDS = ("Block", "If", "While", "Return", "ExprStmt", "Call", "BinaryOp", "Assign")
_LEAF_KINDS = ("Identifier", "IntLiteral", "BoolLiteral")
_OPERATORS = ("+", "-", "*", "<", "==", "&&")
_LEAF_VALUES = {
    "Identifier": ("a", "b", "x", "n", "count", "total"),
    "IntLiteral": ("0", "1", "2", "10"),
    "BoolLiteral": ("true", "false"),
}


@dataclass(frozen=True)
class AstNode:
    """A single node; `value` holds identifier/literal/operator text when present."""
    id: int
    kind: str
    value: Optional[str]
    children: Tuple[int, ...]
    parent: Optional[int]

    @property
    def label(self) -> str:
        return node_label(self.kind, self.value)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class AstTree:
    """Immutable rooted ordered tree. Build it with build_tree, never directly."""
    nodes: Tuple[AstNode, ...]
    depth: Tuple[int, ...]
    size: Tuple[int, ...]
    child_index: Tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def root(self) -> AstNode:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def leaves(self) -> List[int]:
        return [node.id for node in self.nodes if not node.children]

    def height(self) -> int:
        return max(self.depth)


def node_label(kind: str, value: Optional[str]) -> str:
    return f"{kind}:{value}" if value is not None else kind


def build_tree(raw_nodes: Sequence[RawNode]) -> AstTree:
    """
    Validate raw nodes and renumber them to pre-order.

    Args:
        raw_nodes: (kind, value, children) triples; children refer to list positions

    Returns:
        A validated AstTree with depths and subtree sizes computed
    """
    count = len(raw_nodes)
    if count == 0:
        raise ForestError("a tree needs at least one node")

    for index, (kind, value, children) in enumerate(raw_nodes):
        if not isinstance(kind, str) or not kind:
            raise SchemaError(f"nodes[{index}].kind", "must be a non-empty string")
        if value is not None and not isinstance(value, str):
            raise SchemaError(f"nodes[{index}].value", "must be a string")
        if len(set(children)) != len(children):
            raise ForestError(f"node {index} lists a child twice")
        for child in children:
            if not isinstance(child, int) or not 0 <= child < count:
                raise DanglingChildError(index, child)

    _check_acyclic(raw_nodes)

    parent_count = [0] * count
    for _, _, children in raw_nodes:
        for child in children:
            parent_count[child] += 1
    shared = [index for index, c in enumerate(parent_count) if c > 1]
    if shared:
        raise ForestError(f"node {shared[0]} has {parent_count[shared[0]]} parents")
    roots = [index for index, c in enumerate(parent_count) if c == 0]
    if len(roots) != 1:
        raise ForestError(f"expected exactly one root, found {len(roots)}")

    # Pre-order renumbering
    order: List[int] = []
    stack = [roots[0]]
    while stack:
        current = stack.pop()
        order.append(current)
        stack.extend(reversed(raw_nodes[current][2]))
    new_id = {old: new for new, old in enumerate(order)}

    parents: List[Optional[int]] = [None] * count
    child_index = [0] * count
    depth = [0] * count
    nodes: List[AstNode] = []
    for new, old in enumerate(order):
        kind, value, children = raw_nodes[old]
        mapped = tuple(new_id[c] for c in children)
        for position, child in enumerate(mapped):
            parents[child] = new
            child_index[child] = position
            depth[child] = depth[new] + 1
        nodes.append(AstNode(new, kind, value, mapped, parents[new]))

    size = [1] * count
    for node in reversed(nodes):
        if node.parent is not None:
            size[node.parent] += size[node.id]

    return AstTree(tuple(nodes), tuple(depth), tuple(size), tuple(child_index))


def _check_acyclic(raw_nodes: Sequence[RawNode]) -> None:
    white, grey, black = 0, 1, 2
    colour = [white] * len(raw_nodes)
    for start in range(len(raw_nodes)):
        if colour[start] != white:
            continue
        colour[start] = grey
        stack = [(start, iter(raw_nodes[start][2]))]
        while stack:
            current, pending = stack[-1]
            child = next(pending, None)
            if child is None:
                colour[current] = black
                stack.pop()
            elif colour[child] == grey:
                raise CycleError(child)
            elif colour[child] == white:
                colour[child] = grey
                stack.append((child, iter(raw_nodes[child][2])))


def is_ancestor(tree: AstTree, a: int, b: int) -> bool:
    """Strict ancestry: True iff `a` is on the root-to-`b` path and a != b."""
    for node_id in (a, b):
        if not 0 <= node_id < tree.n:
            raise IndexError(f"node id {node_id} out of range 0..{tree.n - 1}")
    return a < b <= a + tree.size[a] - 1


def root_path(tree: AstTree, node_id: int) -> List[int]:
    """Ids from the root down to `node_id` inclusive."""
    path = []
    current: Optional[int] = node_id
    while current is not None:
        path.append(current)
        current = tree.nodes[current].parent
    path.reverse()
    return path


# JSON (de)serialization. Walks use explicit stacks; trees may be deeper than the recursion limit.

def to_obj(tree: AstTree, node_id: int = 0) -> Dict[str, Any]:
    end = node_id + tree.size[node_id]
    objs: Dict[int, Dict[str, Any]] = {}
    for node in tree.nodes[node_id:end]:
        obj: Dict[str, Any] = {"kind": node.kind}
        if node.value is not None:
            obj["value"] = node.value
        obj["children"] = []
        objs[node.id] = obj
        if node.id != node_id:
            objs[node.parent]["children"].append(obj)
    return objs[node_id]


def to_json(tree: AstTree) -> str:
    """Same text as json.dumps(to_obj(tree), ensure_ascii=False), written without recursion."""
    parts: List[str] = []
    stack: List[Any] = [0]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        node = tree.nodes[item]
        parts.append('{"kind": ' + json.dumps(node.kind, ensure_ascii=False))
        if node.value is not None:
            parts.append(', "value": ' + json.dumps(node.value, ensure_ascii=False))
        parts.append(', "children": [')
        stack.append("]}")
        for position in reversed(range(len(node.children))):
            stack.append(node.children[position])
            if position:
                stack.append(", ")
    return "".join(parts)


def from_obj(obj: Any) -> AstTree:
    """Build a tree from an already-decoded nested AST document."""
    raw: List[RawNode] = []
    stack: List[Tuple[Any, str, Optional[List[int]]]] = [(obj, "$", None)]
    while stack:
        item, path, siblings = stack.pop()
        if not isinstance(item, dict):
            raise SchemaError(path, "node must be an object")
        kind = item.get("kind")
        if kind is None:
            raise SchemaError(path, 'missing required field "kind"')
        if not isinstance(kind, str) or not kind:
            raise SchemaError(f"{path}.kind", "must be a non-empty string")
        value = item.get("value")
        if value is not None and not isinstance(value, str):
            raise SchemaError(f"{path}.value", "must be a string")
        children = item.get("children", [])
        if not isinstance(children, list):
            raise SchemaError(f"{path}.children", "must be an array")
        if siblings is not None:
            siblings.append(len(raw))
        child_ids: List[int] = []
        raw.append((kind, value, child_ids))
        for position in reversed(range(len(children))):
            stack.append((children[position], f"{path}.children[{position}]", child_ids))
    return build_tree(raw)


def from_json(text: str) -> AstTree:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"invalid JSON: {e.msg}") from e
    except RecursionError as e:
        raise SchemaError("$", "document is nested too deeply to decode") from e
    return from_obj(obj)


def random_tree(seed: int, n: int, max_branch: int) -> AstTree:
    """
    Deterministic random tree for property tests.

    Each new node attaches to a uniformly chosen node that still has room for a child.
    """
    if n < 1 or max_branch < 1:
        raise ValueError("random_tree needs n >= 1 and max_branch >= 1")
    rng = random.Random(seed)
    children: List[List[int]] = [[] for _ in range(n)]
    open_nodes = [0]
    for new in range(1, n):
        slot = rng.randrange(len(open_nodes))
        parent = open_nodes[slot]
        children[parent].append(new)
        if len(children[parent]) == max_branch:
            open_nodes[slot] = open_nodes[-1]
            open_nodes.pop()
        open_nodes.append(new)

    raw: List[RawNode] = []
    for node_id in range(n):
        if children[node_id]:
            kind = rng.choice(_INTERNAL_KINDS)
            value = rng.choice(_OPERATORS) if kind == "BinaryOp" else None
        else:
            kind = rng.choice(_LEAF_KINDS)
            value = rng.choice(_LEAF_VALUES[kind])
        raw.append((kind, value, children[node_id]))
    return build_tree(raw)
