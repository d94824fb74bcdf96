"""Dictionary lookup, fuzzy suggestions, and the flagging taxonomy.

A dictionary is a case-sensitive word set with an optional frequency table.
Fuzzy lookups run against a BK-tree so a max-distance query visits only the
nodes the triangle inequality cannot rule out; results are identical to a
brute-force scan of the vocabulary.

Flagging splits annotated instances four ways:

- efp: flagged but the prediction was right (word missing from dictionary)
- etp: flagged and the prediction was wrong
- rfn: not flagged yet the prediction was wrong (error hides behind a
  dictionary word)
- tn:  not flagged and the prediction was right
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from batchcorrect.corpus import Corpus
from batchcorrect.distance import edit_distance

DEFAULT_MAX_DISTANCE = 2
DEFAULT_TOP_K = 5


class LexiconError(Exception):
    """Raised for malformed word-list files or misuse of a static dictionary."""


@dataclass(frozen=True)
class Suggestion:
    """One fuzzy-lookup candidate; rank is 1-based within the result list."""

    word: str
    distance: int
    rank: int


class _BKNode:
    __slots__ = ("word", "children")

    def __init__(self, word: str):
        self.word = word
        self.children: dict[int, _BKNode] = {}


class Dictionary:
    """Case-sensitive vocabulary with fuzzy lookup.

    ``mode`` is "static" or "growing"; only a growing dictionary accepts
    new words after construction.
    """

    def __init__(self, words, mode: str = "static", frequencies: dict[str, int] | None = None):
        if mode not in ("static", "growing"):
            raise ValueError(f"mode must be 'static' or 'growing', got {mode!r}")
        self.mode = mode
        self._words: set[str] = set()
        self._frequencies: dict[str, int] = {}
        self._root: _BKNode | None = None
        self._suggest_memo: dict[tuple[str, int, int], list[Suggestion]] = {}
        for word in words:
            self._insert(word)
        if frequencies:
            for word, count in frequencies.items():
                if word in self._words:
                    self._frequencies[word] = count

    def _insert(self, word: str) -> bool:
        if not word:
            raise ValueError("dictionary words must be non-empty")
        if word in self._words:
            return False
        self._words.add(word)
        if self._root is None:
            self._root = _BKNode(word)
            return True
        node = self._root
        while True:
            d = edit_distance(word, node.word)
            child = node.children.get(d)
            if child is None:
                node.children[d] = _BKNode(word)
                return True
            node = child

    def __contains__(self, word: str) -> bool:
        return word in self._words

    def __len__(self) -> int:
        return len(self._words)

    @property
    def words(self) -> frozenset[str]:
        return frozenset(self._words)

    def frequency(self, word: str) -> int:
        return self._frequencies.get(word, 0)

    def add_word(self, word: str, frequency: int | None = None) -> bool:
        """Add a word to a growing dictionary; returns False if present.

        Raises LexiconError on a static dictionary.
        """
        if self.mode != "growing":
            raise LexiconError("cannot add words to a static dictionary")
        added = self._insert(word)
        if added:
            self._suggest_memo.clear()
        if frequency is not None:
            self._frequencies[word] = frequency
        return added

    def suggest(
        self,
        query: str,
        max_distance: int = DEFAULT_MAX_DISTANCE,
        top_k: int = DEFAULT_TOP_K,
    ) -> list[Suggestion]:
        """Words within max_distance of query, best first.

        Sorted by distance, then frequency (higher first), then the word
        itself; truncated to top_k with ranks 1..len(result).
        """
        if max_distance < 0:
            raise ValueError("max_distance must be >= 0")
        if top_k < 0:
            raise ValueError("top_k must be >= 0")
        memo_key = (query, max_distance, top_k)
        cached = self._suggest_memo.get(memo_key)
        if cached is not None:
            return list(cached)
        matches: list[tuple[int, int, str]] = []
        if self._root is not None:
            stack = [self._root]
            while stack:
                node = stack.pop()
                d = edit_distance(query, node.word)
                if d <= max_distance:
                    matches.append((d, -self.frequency(node.word), node.word))
                lo = d - max_distance
                hi = d + max_distance
                for child_d, child in node.children.items():
                    if lo <= child_d <= hi:
                        stack.append(child)
        matches.sort()
        result = [
            Suggestion(word=word, distance=dist, rank=i)
            for i, (dist, _negfreq, word) in enumerate(matches[:top_k], 1)
        ]
        self._suggest_memo[memo_key] = result
        return list(result)


def suggest_brute_force(
    dictionary: Dictionary,
    query: str,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    top_k: int = DEFAULT_TOP_K,
) -> list[Suggestion]:
    """Reference implementation of Dictionary.suggest over a full scan."""
    matches = []
    for word in dictionary.words:
        d = edit_distance(query, word)
        if d <= max_distance:
            matches.append((d, -dictionary.frequency(word), word))
    matches.sort()
    return [
        Suggestion(word=word, distance=dist, rank=i)
        for i, (dist, _negfreq, word) in enumerate(matches[:top_k], 1)
    ]


def build_dictionary(
    paths,
    mode: str = "static",
    frequencies: dict[str, int] | None = None,
) -> Dictionary:
    """Build a dictionary from word-list files.

    One word per line; surrounding whitespace is trimmed, blank lines and
    lines starting with ``#`` are skipped. Files are unioned. Invalid UTF-8
    is reported with file and line.
    """
    words: set[str] = set()
    for path in paths:
        path = Path(path)
        with open(path, "rb") as fh:
            for lineno, raw in enumerate(fh, 1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise LexiconError(f"{path}:{lineno}: invalid UTF-8") from exc
                word = line.strip()
                if not word or word.startswith("#"):
                    continue
                words.add(word)
    return Dictionary(sorted(words), mode=mode, frequencies=frequencies)


def flagged(dictionary: Dictionary, corpus: Corpus) -> list[int]:
    """Positions of instances whose prediction is not in the dictionary."""
    return [i for i, inst in enumerate(corpus.instances) if inst.prediction not in dictionary]


@dataclass(frozen=True)
class Categories:
    """Positions of annotated instances split by flagging outcome."""

    efp: tuple[int, ...]
    etp: tuple[int, ...]
    rfn: tuple[int, ...]
    tn: tuple[int, ...]


def categorize(dictionary: Dictionary, corpus: Corpus) -> Categories:
    """Partition the ground-truth-bearing instances into efp/etp/rfn/tn.

    Unannotated instances are excluded from every bucket.
    """
    efp, etp, rfn, tn = [], [], [], []
    for i, inst in enumerate(corpus.instances):
        if inst.ground_truth is None:
            continue
        is_flagged = inst.prediction not in dictionary
        correct = inst.prediction == inst.ground_truth
        if is_flagged:
            (efp if correct else etp).append(i)
        else:
            (tn if correct else rfn).append(i)
    return Categories(efp=tuple(efp), etp=tuple(etp), rfn=tuple(rfn), tn=tuple(tn))
