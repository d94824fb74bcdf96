"""Builders shared across test modules."""

from __future__ import annotations

import numpy as np

from batchcorrect.corpus import Corpus, EmbeddingMatrix, WordInstance


def make_corpus(rows, embeddings=None, metadata=None) -> Corpus:
    """Corpus from (prediction, ground_truth) pairs or per-field dicts."""
    instances = []
    for pos, row in enumerate(rows):
        if isinstance(row, dict):
            fields = dict(row)
        else:
            prediction, truth = row
            fields = {"prediction": prediction, "ground_truth": truth}
        fields.setdefault("id", f"w-{pos:04d}")
        fields.setdefault("book_id", "test")
        fields.setdefault("page_id", 0)
        fields["embedding_row"] = pos
        instances.append(WordInstance(**fields))
    matrix = None
    if embeddings is not None:
        matrix = EmbeddingMatrix.from_array(np.asarray(embeddings, dtype=np.float32))
    return Corpus(instances=instances, embeddings=matrix, metadata=dict(metadata or {}))


def partition_sets(clustering):
    """A clustering's members as a set of frozensets, for order-free equality."""
    return {frozenset(cluster) for cluster in clustering.clusters}
