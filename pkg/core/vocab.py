"""
Vocab - Token <-> id maps with four reserved ids.

Reserved entries are never looked up by surface text: a literal "<pad>" in the data is an
ordinary token with its own id.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from .errors import EmptyCorpusError, SchemaError

PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<bos>", "<eos>")


class Vocab:
    def __init__(self, tokens: Sequence[str], min_freq: int = 1):
        """
        Args:
            tokens: kept surface tokens in id order, starting at id len(RESERVED)
            min_freq: cutoff the vocabulary was built with
        """
        self.min_freq = min_freq
        self._tokens: List[str] = list(RESERVED) + list(tokens)
        self._index: Dict[str, int] = {}
        for offset, token in enumerate(tokens):
            if token in self._index:
                raise SchemaError(f"vocab[{offset}]", f"duplicate token {token!r}")
            self._index[token] = offset + len(RESERVED)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self._tokens == other._tokens and self.min_freq == other.min_freq

    @property
    def kept_tokens(self) -> List[str]:
        return self._tokens[len(RESERVED):]

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> List[int]:
        return [self._index.get(token, UNK_ID) for token in tokens]

    def decode(self, ids: Iterable[int], strip_reserved: bool = True) -> List[str]:
        out = []
        for token_id in ids:
            if strip_reserved and token_id < len(RESERVED):
                if token_id == UNK_ID:
                    out.append(RESERVED[UNK_ID])
                continue
            out.append(self._tokens[token_id])
        return out

    @classmethod
    def from_counts(cls, counts: Counter, min_freq: int = 2) -> "Vocab":
        """Ids by descending frequency, ties broken by lexicographic token order."""
        kept = sorted((token for token, count in counts.items() if count >= min_freq),
                      key=lambda token: (-counts[token], token))
        return cls(kept, min_freq)

    def to_json(self) -> str:
        return json.dumps({"min_freq": self.min_freq, "tokens": self.kept_tokens},
                          ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        try:
            data = json.loads(text)
            return cls(data["tokens"], int(data["min_freq"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise SchemaError("$", f"invalid vocabulary file: {e}") from e

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def vocab_from_streams(streams: Iterable[Sequence[str]], min_freq: int = 2) -> Vocab:
    counts: Counter = Counter()
    seen_any = False
    for tokens in streams:
        seen_any = True
        counts.update(tokens)
    if not seen_any:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    return Vocab.from_counts(counts, min_freq)
