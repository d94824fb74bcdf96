"""Synthetic annotated corpora with an OCR-style noise model.

Words are drawn from a generated syllable vocabulary with Zipfian
frequencies. A configurable share of instances receives a wrong
prediction; wrong predictions are either "consistent" (every affected
instance of a word shows the same fixed corruption, the way a recognizer
repeats a mistake on similar-looking images) or fresh random character
noise. Embeddings place every instance near a per-word centroid, with
consistently-corrupted instances sharing a slightly shifted centroid.

Every random draw comes from a PCG64 stream keyed by (seed, purpose,
word-or-block), so per-word artifacts (centroids, consistent corruptions)
are identical across separately generated corpora that share a seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from batchcorrect.corpus import Corpus, EmbeddingMatrix, WordInstance
from batchcorrect.distance import edit_distance

ASCII_ONSETS = (
    "b c d f g h j k l m n p r s t v w z br ch cl dr fl gr pl pr sh sl st th tr".split()
)
ASCII_VOWELS = "a e i o u ai ea ou".split()
ASCII_CODAS = ["", "", "", "n", "r", "s", "l", "t"]
ASCII_LETTERS = tuple("abcdefghijklmnopqrstuvwxyz")

DEVANAGARI_SYLLABLES = (
    "क ख ग च ज ट ड त द न प ब म य र ल व श स ह का कि मा ने ती रा ले वे सु धा".split()
)

# Visually confusable Latin letters; the first alternative is the most likely.
_ASCII_CONFUSIONS = {
    "a": "oe", "b": "hd", "c": "eo", "d": "bo", "e": "co", "f": "t", "g": "qy",
    "h": "bn", "i": "lj", "j": "i", "k": "l", "l": "it", "m": "nr", "n": "mh",
    "o": "ca", "p": "q", "q": "gp", "r": "nm", "s": "z", "t": "fl", "u": "vn",
    "v": "uy", "w": "v", "x": "z", "y": "vg", "z": "sx",
}

_EXTRA_EDIT_PROB = 0.35
_MAX_EDITS = 4
_COLLISION_RATE = 0.08
_CENTROID_SHIFT_FACTOR = 0.5


def stream(seed: int, *keys) -> np.random.Generator:
    """A PCG64 generator keyed by seed plus any hashable path of labels.

    The same (seed, keys) always yields the same stream, independent of
    what other streams were drawn before it.
    """
    digest = hashlib.blake2b(digest_size=16)
    digest.update(repr(int(seed)).encode())
    for key in keys:
        digest.update(b"\x1f")
        digest.update(repr(key).encode())
    return np.random.default_rng(int.from_bytes(digest.digest(), "little"))


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything that determines a synthetic corpus."""

    vocabulary_size: int
    total_words: int
    seed: int = 0
    zipf_exponent: float = 1.0
    target_word_accuracy: float = 0.64
    consistent_error_fraction: float = 0.5
    embedding_dim: int = 128
    embedding_noise_sigma: float = 0.15
    oov_fraction: float = 0.1
    alphabet: str = "ascii"

    def __post_init__(self):
        if self.vocabulary_size < 2:
            raise ValueError("vocabulary_size must be >= 2")
        if self.total_words < 1:
            raise ValueError("total_words must be >= 1")
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if not 0.0 < self.target_word_accuracy <= 1.0:
            raise ValueError("target_word_accuracy must lie in (0, 1]")
        if not 0.0 <= self.consistent_error_fraction <= 1.0:
            raise ValueError("consistent_error_fraction must lie in [0, 1]")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")
        if self.embedding_noise_sigma <= 0:
            raise ValueError("embedding_noise_sigma must be positive")
        if not 0.0 <= self.oov_fraction < 1.0:
            raise ValueError("oov_fraction must lie in [0, 1)")
        if self.alphabet not in ("ascii", "devanagari"):
            raise ValueError("alphabet must be 'ascii' or 'devanagari'")


@dataclass
class ConfusionTable:
    """Character confusions plus the memo of per-word consistent corruptions.

    A word's consistent corruption is created on first request from a
    stream keyed by (seed, word), so it does not depend on call order.
    Some words — always including the most frequent in-dictionary word —
    are corrupted into their nearest in-dictionary neighbour instead of a
    random edit, which plants dictionary-invisible errors.
    """

    substitutions: dict[str, list[tuple[str, float]]]
    alphabet: tuple[str, ...]
    seed: int = 0
    collision_targets: tuple[str, ...] = ()
    collision_rate: float = _COLLISION_RATE
    forced_collisions: frozenset = frozenset()
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for char, pairs in self.substitutions.items():
            for _alt, weight in pairs:
                if weight <= 0:
                    raise ValueError(f"substitution weight for {char!r} must be positive")

    def substitute(self, char: str, rng: np.random.Generator) -> str:
        pairs = self.substitutions.get(char)
        if pairs:
            weights = np.array([w for _c, w in pairs], dtype=np.float64)
            pick = int(rng.choice(len(pairs), p=weights / weights.sum()))
            return pairs[pick][0]
        return self.alphabet[int(rng.integers(len(self.alphabet)))]

    def insertion(self, rng: np.random.Generator) -> str:
        return self.alphabet[int(rng.integers(len(self.alphabet)))]

    def consistent(self, word: str) -> str:
        if word in self._memo:
            return self._memo[word]
        rng = stream(self.seed, "consistent", word)
        corrupted = None
        if self.collision_targets and (
            word in self.forced_collisions or rng.random() < self.collision_rate
        ):
            corrupted = nearest_word(word, self.collision_targets)
        if corrupted is None:
            corrupted = _apply_edits(word, self, 1, rng)
            while corrupted == word or not corrupted:
                corrupted = _apply_edits(word, self, 1, rng)
        self._memo[word] = corrupted
        return corrupted


def nearest_word(word: str, candidates: Iterable[str]) -> str | None:
    """The candidate closest to word by (edit distance, spelling), not word itself."""
    best = None
    for cand in candidates:
        if cand == word:
            continue
        key = (edit_distance(word, cand), cand)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def _apply_edits(word: str, table: ConfusionTable, n_edits: int, rng: np.random.Generator) -> str:
    chars = list(word)
    for _ in range(n_edits):
        op = rng.random()
        if op < 0.6 or len(chars) == 0:
            if chars:
                pos = int(rng.integers(len(chars)))
                chars[pos] = table.substitute(chars[pos], rng)
            else:
                chars.append(table.insertion(rng))
        elif op < 0.8 and len(chars) > 1:
            del chars[int(rng.integers(len(chars)))]
        else:
            pos = int(rng.integers(len(chars) + 1))
            chars.insert(pos, table.insertion(rng))
    return "".join(chars)


def corrupt_word(word: str, table: ConfusionTable, mode: str, rng: np.random.Generator) -> str:
    """Produce an erroneous reading of word.

    Consistent mode returns the table's memoized corruption (rng unused —
    the corruption is keyed by the table's own seed so it is stable).
    Random mode applies one edit plus occasional extras and never returns
    the input word.
    """
    if not word:
        raise ValueError("cannot corrupt an empty word")
    if mode == "consistent":
        return table.consistent(word)
    if mode != "random":
        raise ValueError(f"mode must be 'consistent' or 'random', got {mode!r}")
    for _ in range(64):
        n_edits = 1
        while n_edits < _MAX_EDITS and rng.random() < _EXTRA_EDIT_PROB:
            n_edits += 1
        corrupted = _apply_edits(word, table, n_edits, rng)
        if corrupted and corrupted != word:
            return corrupted
    return word + table.insertion(rng)


def default_confusion_table(
    config: GeneratorConfig, collision_targets: Iterable[str] = (), forced: Iterable[str] = ()
) -> ConfusionTable:
    if config.alphabet == "ascii":
        subs = {
            char: [(alt, 2.0 if i == 0 else 1.0) for i, alt in enumerate(alts)]
            for char, alts in _ASCII_CONFUSIONS.items()
        }
        inventory = ASCII_LETTERS
    else:
        inventory = tuple(dict.fromkeys("".join(DEVANAGARI_SYLLABLES)))
        subs = {}
    return ConfusionTable(
        substitutions=subs,
        alphabet=inventory,
        seed=config.seed,
        collision_targets=tuple(collision_targets),
        forced_collisions=frozenset(forced),
    )


def vocabulary_for(config: GeneratorConfig) -> tuple[str, ...]:
    """Distinct syllable words, one per frequency rank, most frequent first."""
    rng = stream(config.seed, "vocab", config.alphabet, config.vocabulary_size)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < config.vocabulary_size:
        if config.alphabet == "ascii":
            n_syll = 2 + int(rng.integers(2))
            parts = []
            for _ in range(n_syll):
                parts.append(ASCII_ONSETS[int(rng.integers(len(ASCII_ONSETS)))])
                parts.append(ASCII_VOWELS[int(rng.integers(len(ASCII_VOWELS)))])
                parts.append(ASCII_CODAS[int(rng.integers(len(ASCII_CODAS)))])
            word = "".join(parts)
            if len(word) < 4:
                continue
        else:
            n_syll = 2 + int(rng.integers(3))
            word = "".join(
                DEVANAGARI_SYLLABLES[int(rng.integers(len(DEVANAGARI_SYLLABLES)))]
                for _ in range(n_syll)
            )
        if word not in seen:
            seen.add(word)
            words.append(word)
    return tuple(words)


def split_vocabulary(config: GeneratorConfig) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(in-dictionary words, withheld words), stratified across frequency ranks.

    Withheld ranks are spread evenly and include rank 0 whenever the
    withheld share is positive, so flagged-but-correct instances occur at
    every corpus size.
    """
    vocab = vocabulary_for(config)
    n_oov = round(config.oov_fraction * len(vocab))
    if config.oov_fraction > 0:
        n_oov = max(1, n_oov)
    n_oov = min(n_oov, len(vocab) - 1)
    if n_oov == 0:
        return vocab, ()
    step = len(vocab) / n_oov
    oov_ranks = {int(i * step) for i in range(n_oov)}
    dict_words = tuple(w for r, w in enumerate(vocab) if r not in oov_ranks)
    oov_words = tuple(w for r, w in enumerate(vocab) if r in oov_ranks)
    return dict_words, oov_words


def zipf_probabilities(size: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, size + 1, dtype=np.float64) ** exponent
    return weights / weights.sum()


@dataclass(frozen=True)
class GeneratedCorpus:
    """A corpus plus the vocabulary split and noise table that produced it."""

    corpus: Corpus
    dictionary_words: tuple[str, ...]
    oov_words: tuple[str, ...]
    table: ConfusionTable


def generate(config: GeneratorConfig, book_id: str = "synth") -> GeneratedCorpus:
    """Build one fully annotated corpus block.

    Separately generated blocks with the same seed share vocabularies,
    centroids, and consistent corruptions, so they can be concatenated
    into one coherent collection.
    """
    vocab = vocabulary_for(config)
    dict_words, oov_words = split_vocabulary(config)
    dict_set = set(dict_words)
    table = default_confusion_table(
        config, collision_targets=dict_words, forced=(dict_words[0],) if dict_words else ()
    )

    n = config.total_words
    probs = zipf_probabilities(len(vocab), config.zipf_exponent)
    word_ranks = stream(config.seed, "words", book_id).choice(len(vocab), size=n, p=probs)
    truths = [vocab[r] for r in word_ranks]

    n_wrong = round((1.0 - config.target_word_accuracy) * n)
    if config.target_word_accuracy < 1.0:
        n_wrong = max(1, n_wrong)
    order = stream(config.seed, "errors", book_id).permutation(n)
    wrong_positions = sorted(int(p) for p in order[:n_wrong])
    n_consistent = round(config.consistent_error_fraction * n_wrong)
    # The permutation already randomizes which positions are wrong; its first
    # n_consistent entries make an unbiased mode split of the wrong slice.
    consistent_set = {int(p) for p in order[:n_consistent]}

    predictions = list(truths)
    random_rng = stream(config.seed, "random-corrupt", book_id)
    for pos in wrong_positions:
        word = truths[pos]
        if pos in consistent_set:
            predictions[pos] = table.consistent(word)
        else:
            predictions[pos] = corrupt_word(word, table, "random", random_rng)

    _ensure_category_coverage(
        predictions, truths, wrong_positions, consistent_set, dict_set, dict_words,
        oov_words, table, stream(config.seed, "repair", book_id),
    )

    embeddings = _embeddings_for(
        config, book_id, truths, [p in consistent_set for p in range(n)]
    )

    instances = [
        WordInstance(
            id=f"{book_id}-{pos:06d}",
            book_id=book_id,
            page_id=pos // 250,
            prediction=predictions[pos],
            ground_truth=truths[pos],
            image_ref=None,
            embedding_row=pos,
        )
        for pos in range(n)
    ]
    metadata = {
        "generator": "synthgen",
        "book_id": book_id,
        "seed": str(config.seed),
        "vocabulary_size": str(config.vocabulary_size),
        "total_words": str(config.total_words),
        "zipf_exponent": repr(config.zipf_exponent),
        "target_word_accuracy": repr(config.target_word_accuracy),
        "consistent_error_fraction": repr(config.consistent_error_fraction),
        "embedding_dim": str(config.embedding_dim),
        "embedding_noise_sigma": repr(config.embedding_noise_sigma),
        "oov_fraction": repr(config.oov_fraction),
        "alphabet": config.alphabet,
    }
    corpus = Corpus(instances=instances, embeddings=embeddings, metadata=metadata)
    return GeneratedCorpus(
        corpus=corpus, dictionary_words=dict_words, oov_words=oov_words, table=table
    )


def generate_corpus(config: GeneratorConfig) -> Corpus:
    """The corpus alone; see generate() for the full bundle."""
    return generate(config).corpus


def _ensure_category_coverage(
    predictions, truths, wrong_positions, consistent_set, dict_set, dict_words,
    oov_words, table, rng,
) -> None:
    """Nudge single instances so every detection category is populated.

    Each nudge preserves prediction correctness (accuracy is untouched) and
    only fires when the corpus would otherwise miss a category entirely.
    """
    has_etp = any(
        predictions[p] not in dict_set and predictions[p] != truths[p] for p in wrong_positions
    )
    has_rfn = any(predictions[p] in dict_set for p in wrong_positions)
    if not has_etp and wrong_positions:
        pos = wrong_positions[0]
        candidate = corrupt_word(truths[pos], table, "random", rng)
        while candidate in dict_set or candidate == truths[pos]:
            candidate = corrupt_word(truths[pos], table, "random", rng)
        predictions[pos] = candidate
    if not has_rfn and dict_words:
        for pos in wrong_positions:
            if pos in consistent_set and len(wrong_positions) > 1:
                continue
            collision = nearest_word(truths[pos], dict_words)
            if collision is not None and collision != truths[pos]:
                predictions[pos] = collision
                break
    correct_positions = [p for p in range(len(truths)) if predictions[p] == truths[p]]
    has_efp = any(truths[p] not in dict_set for p in correct_positions)
    has_tn = any(truths[p] in dict_set for p in correct_positions)
    if not has_efp and oov_words and len(correct_positions) >= 2:
        pos = correct_positions[0]
        truths[pos] = predictions[pos] = oov_words[0]
    if not has_tn and dict_words and len(correct_positions) >= 2:
        pos = correct_positions[-1]
        truths[pos] = predictions[pos] = dict_words[0]


def _embeddings_for(
    config: GeneratorConfig, book_id: str, truths: list[str], consistent_flags: list[bool]
) -> EmbeddingMatrix:
    dim = config.embedding_dim
    sigma = config.embedding_noise_sigma
    centroids: dict[str, np.ndarray] = {}
    shifts: dict[str, np.ndarray] = {}
    for word in set(truths):
        centroids[word] = stream(config.seed, "centroid", word).standard_normal(dim)
        direction = stream(config.seed, "shift", word).standard_normal(dim)
        shifts[word] = _CENTROID_SHIFT_FACTOR * sigma * direction / np.linalg.norm(direction)
    noise = stream(config.seed, "noise", book_id).standard_normal((len(truths), dim)) * sigma
    rows = np.empty((len(truths), dim), dtype=np.float64)
    for pos, word in enumerate(truths):
        rows[pos] = centroids[word] + noise[pos]
        if consistent_flags[pos]:
            rows[pos] += shifts[word]
    return EmbeddingMatrix.from_array(rows.astype(np.float32))
