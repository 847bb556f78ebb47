"""
Errors - One exception hierarchy for the whole pipeline.

The CLI turns any PipelineError into exit code 2; everything else is a bug.
"""

from __future__ import annotations

from typing import Iterable, Optional, Tuple


class PipelineError(Exception):
    """Base class for data errors raised anywhere in the pipeline."""


# AST model
class AstError(PipelineError):
    pass


class CycleError(AstError):
    def __init__(self, node: int):
        super().__init__(f"node {node} is its own ancestor")
        self.node = node


class ForestError(AstError):
    pass


class DanglingChildError(AstError):
    def __init__(self, parent: int, child: int):
        super().__init__(f"node {parent} lists unknown child {child}")
        self.parent = parent
        self.child = child


class SchemaError(AstError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# Mini-language front end
class LexError(PipelineError):
    def __init__(self, offset: int, char: str):
        super().__init__(f"illegal character {char!r} at offset {offset}")
        self.offset = offset
        self.char = char


class ParseError(PipelineError):
    def __init__(self, offset: int, expected: Iterable[str], found: str = "end of input"):
        self.offset = offset
        self.expected: Tuple[str, ...] = tuple(sorted(set(expected)))
        self.found = found
        super().__init__(
            f"offset {offset}: expected one of {', '.join(self.expected)}; found {found}"
        )


# Linearization / relations
class DegenerateError(PipelineError):
    pass


class MapMismatchError(PipelineError):
    def __init__(self, position: int, node_id: int, n: int):
        super().__init__(f"position {position} references node {node_id}; tree has {n} nodes")
        self.position = position
        self.node_id = node_id


# Tensor kernel
class TensorError(PipelineError):
    pass


class ShapeError(TensorError):
    pass


class EmptyRowError(TensorError):
    pass


class GraphConsumedError(TensorError):
    pass


# Model / data
class LengthError(PipelineError):
    pass


class EmptyHypothesisError(PipelineError):
    pass


class EmptyCorpusError(PipelineError):
    pass


class ConfigError(PipelineError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class CheckpointError(PipelineError):
    pass
