"""Grouping of word instances by image-feature and text similarity.

Three clusterers share one output type: k-means over embedding vectors,
connected components of the thresholded normalized-edit-distance graph
(equivalent to building a minimum spanning tree and cutting its
over-threshold edges), and random-hyperplane LSH bucketing. A refinement
step sub-divides any base clustering by raw edit distance, which is what
the "+mst" suffix of a pipeline method name means.

All clusterers are pure functions of their inputs and seeds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from batchcorrect.corpus import Corpus, CorpusError, EmbeddingMatrix
from batchcorrect.distance import edit_distance, normalized_distance

__all__ = [
    "Clustering",
    "ClusterConfig",
    "edit_distance",
    "normalized_distance",
    "kmeans",
    "kmeans_fit",
    "KMeansFit",
    "mst_cluster",
    "lsh_buckets",
    "refine_clusters",
    "cluster_corpus",
    "purity",
    "write_clustering",
    "load_clustering",
    "METHODS",
]

METHODS = ("kmeans", "mst", "lsh", "kmeans+mst", "lsh+mst")


@dataclass(frozen=True)
class ClusterConfig:
    """Knobs for every clusterer; k=None means one cluster per unique prediction."""

    k: int | None = None
    kmeans_max_iter: int = 50
    kmeans_seed: int = 0
    mst_threshold: float = 0.4
    refine_threshold: int = 2
    lsh_bits_per_band: int = 8
    lsh_bands: int = 16
    lsh_seed: int = 0

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("k must be positive")
        if self.kmeans_max_iter < 1:
            raise ValueError("kmeans_max_iter must be positive")
        if not 0.0 <= self.mst_threshold <= 1.0:
            raise ValueError("mst_threshold must lie in [0, 1]")
        if self.refine_threshold < 0:
            raise ValueError("refine_threshold must be >= 0")
        if self.lsh_bits_per_band < 1 or self.lsh_bands < 1:
            raise ValueError("lsh_bits_per_band and lsh_bands must be >= 1")


@dataclass(frozen=True)
class Clustering:
    """A partition of a set of instance indices into non-empty clusters.

    Canonical form: members ascending within a cluster, clusters ordered by
    their smallest member. Cluster ids are positions in ``clusters``.
    """

    clusters: tuple[tuple[int, ...], ...]
    method_tag: str = ""
    params: ClusterConfig | None = None

    def __post_init__(self):
        seen: set[int] = set()
        for cluster in self.clusters:
            if not cluster:
                raise ValueError("empty cluster")
            for idx in cluster:
                if idx in seen:
                    raise ValueError(f"index {idx} appears in more than one cluster")
                seen.add(idx)

    @property
    def indices(self) -> frozenset[int]:
        return frozenset(idx for cluster in self.clusters for idx in cluster)

    def __len__(self) -> int:
        return len(self.clusters)

    def refines(self, other: "Clustering") -> bool:
        """True when every cluster here is a subset of some cluster of other."""
        containing = {}
        for cid, cluster in enumerate(other.clusters):
            for idx in cluster:
                containing[idx] = cid
        for cluster in self.clusters:
            owners = {containing.get(idx) for idx in cluster}
            if len(owners) != 1 or None in owners:
                return False
        return True


def _canonical(groups, method_tag: str, params: ClusterConfig | None) -> Clustering:
    clusters = sorted(tuple(sorted(group)) for group in groups if group)
    return Clustering(clusters=tuple(clusters), method_tag=method_tag, params=params)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra

    def groups(self) -> list[list[int]]:
        by_root: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            by_root.setdefault(self.find(x), []).append(x)
        return list(by_root.values())


@dataclass(frozen=True)
class KMeansFit:
    """Raw Lloyd-iteration outcome; inertia_history is one entry per assignment."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: tuple[float, ...]


def _sq_dists(data: np.ndarray, data_sq: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = data_sq[:, None] - 2.0 * (data @ centroids.T)
    d2 += np.einsum("ij,ij->i", centroids, centroids)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp(
    data: np.ndarray, data_sq: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]), dtype=np.float64)
    pick = int(rng.integers(n))
    centroids[0] = data[pick]
    d2 = np.maximum(data_sq - 2.0 * (data @ centroids[0]) + data_sq[pick], 0.0)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            pick = int(rng.integers(n))
        centroids[j] = data[pick]
        step = data_sq - 2.0 * (data @ centroids[j]) + data_sq[pick]
        np.minimum(d2, np.maximum(step, 0.0), out=d2)
    return centroids


def kmeans_fit(data: np.ndarray, k: int, seed: int, max_iter: int) -> KMeansFit:
    """Lloyd iteration from a k-means++ seeding.

    Empty clusters are repaired by re-seeding their centroid with the point
    currently farthest from its assigned centroid; the within-cluster sum
    of squares recorded at each assignment step is non-increasing.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    data_sq = np.einsum("ij,ij->i", data, data)
    centroids = _kmeanspp(data, data_sq, k, rng)
    labels = None
    history: list[float] = []
    rows = np.arange(n)
    for _ in range(max_iter):
        d2 = _sq_dists(data, data_sq, centroids)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[rows, new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, data)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        empties = np.flatnonzero(~nonempty)
        if empties.size:
            assigned_d2 = _sq_dists(data, data_sq, centroids)[rows, labels]
            order = np.argsort(-assigned_d2, kind="stable")
            for slot, cluster_id in enumerate(empties):
                donor = int(order[slot])
                if assigned_d2[donor] <= 0.0:
                    break
                centroids[cluster_id] = data[donor]
    return KMeansFit(labels=labels, centroids=centroids, inertia_history=tuple(history))


def kmeans(
    matrix: EmbeddingMatrix,
    indices,
    k: int,
    seed: int = 0,
    max_iter: int = 50,
    params: ClusterConfig | None = None,
) -> Clustering:
    """Partition the given embedding rows into at most k clusters."""
    indices = list(indices)
    fit = kmeans_fit(matrix.data[indices], k, seed=seed, max_iter=max_iter)
    groups: dict[int, list[int]] = {}
    for pos, label in enumerate(fit.labels):
        groups.setdefault(int(label), []).append(indices[pos])
    return _canonical(groups.values(), "kmeans", params)


def mst_cluster(items, threshold: float, params: ClusterConfig | None = None) -> Clustering:
    """Group (index, string) pairs into components linked by normalized distance.

    Two items join the same cluster when a chain of pairs at normalized
    distance <= threshold connects them — the same partition obtained by
    cutting the over-threshold edges of a minimum spanning tree.
    """
    items = list(items)
    if not items:
        raise ValueError("mst_cluster requires at least one item")
    # Identical strings are at distance 0, so the graph only needs one node
    # per distinct string.
    uniques: list[str] = []
    members: dict[str, list[int]] = {}
    for index, text in items:
        if text not in members:
            members[text] = []
            uniques.append(text)
        members[text].append(index)
    uf = _UnionFind(len(uniques))
    for i, a in enumerate(uniques):
        la = len(a)
        for j in range(i + 1, len(uniques)):
            b = uniques[j]
            # |len difference| is a lower bound on the edit distance.
            if abs(la - len(b)) > threshold * max(la, len(b)):
                continue
            if normalized_distance(a, b) <= threshold:
                uf.union(i, j)
    groups = [
        [idx for u in group for idx in members[uniques[u]]]
        for group in uf.groups()
    ]
    return _canonical(groups, "mst", params)


def lsh_buckets(
    matrix: EmbeddingMatrix,
    indices,
    bits_per_band: int,
    bands: int,
    seed: int = 0,
    params: ClusterConfig | None = None,
) -> Clustering:
    """Cluster embedding rows by banded random-hyperplane signatures.

    Each vector is signed against bits_per_band*bands seeded unit
    hyperplanes (a zero projection counts as positive); rows agreeing on
    every bit of at least one band are linked, and clusters are the
    connected components of that relation.
    """
    if bits_per_band < 1 or bands < 1:
        raise ValueError("bits_per_band and bands must be >= 1")
    indices = list(indices)
    if not indices:
        return Clustering(clusters=(), method_tag="lsh", params=params)
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((matrix.dim, bits_per_band * bands))
    planes /= np.linalg.norm(planes, axis=0, keepdims=True)
    data = matrix.data[indices].astype(np.float64)
    bits = (data @ planes) >= 0.0
    uf = _UnionFind(len(indices))
    for band in range(bands):
        chunk = np.packbits(bits[:, band * bits_per_band : (band + 1) * bits_per_band], axis=1)
        first_seen: dict[bytes, int] = {}
        for pos in range(len(indices)):
            key = chunk[pos].tobytes()
            if key in first_seen:
                uf.union(first_seen[key], pos)
            else:
                first_seen[key] = pos
    groups = [[indices[pos] for pos in group] for group in uf.groups()]
    return _canonical(groups, "lsh", params)


def refine_clusters(
    base: Clustering,
    predictions: dict[int, str],
    refine_threshold: int,
    params: ClusterConfig | None = None,
) -> Clustering:
    """Split each base cluster into components linked by raw edit distance.

    Never merges across base clusters, so the result refines the input.
    """
    groups: list[list[int]] = []
    for cluster in base.clusters:
        texts: list[str] = []
        members: dict[str, list[int]] = {}
        for idx in cluster:
            text = predictions[idx]
            if text not in members:
                members[text] = []
                texts.append(text)
            members[text].append(idx)
        uf = _UnionFind(len(texts))
        for i, a in enumerate(texts):
            for j in range(i + 1, len(texts)):
                if abs(len(a) - len(texts[j])) > refine_threshold:
                    continue
                if edit_distance(a, texts[j]) <= refine_threshold:
                    uf.union(i, j)
        for group in uf.groups():
            groups.append([idx for t in group for idx in members[texts[t]]])
    tag = f"{base.method_tag}+mst" if base.method_tag else "mst-refine"
    return _canonical(groups, tag, params if params is not None else base.params)


def cluster_corpus(
    corpus: Corpus,
    indices,
    method: str,
    config: ClusterConfig | None = None,
) -> Clustering:
    """Run one named clustering method over the given instance positions.

    Methods: kmeans, mst, lsh, kmeans+mst, lsh+mst. The "+mst" suffix
    applies refine_clusters to the base clustering. k-means and LSH need
    the corpus to carry embeddings; k defaults to the number of distinct
    prediction strings among the clustered instances.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    config = config or ClusterConfig()
    indices = sorted(indices)
    if not indices:
        return Clustering(clusters=(), method_tag=method, params=config)
    base_name = method.split("+")[0]
    if base_name in ("kmeans", "lsh") and corpus.embeddings is None:
        raise CorpusError(f"method {method!r} needs embeddings, corpus has none")
    if base_name == "kmeans":
        k = config.k
        if k is None:
            k = len({corpus.instances[i].prediction for i in indices})
        k = max(1, min(k, len(indices)))
        base = kmeans(
            corpus.embeddings,
            indices,
            k,
            seed=config.kmeans_seed,
            max_iter=config.kmeans_max_iter,
            params=config,
        )
    elif base_name == "lsh":
        base = lsh_buckets(
            corpus.embeddings,
            indices,
            config.lsh_bits_per_band,
            config.lsh_bands,
            seed=config.lsh_seed,
            params=config,
        )
    else:
        base = mst_cluster(
            [(i, corpus.instances[i].prediction) for i in indices],
            config.mst_threshold,
            params=config,
        )
    if method.endswith("+mst"):
        predictions = {i: corpus.instances[i].prediction for i in indices}
        base = refine_clusters(base, predictions, config.refine_threshold, params=config)
        return Clustering(clusters=base.clusters, method_tag=method, params=config)
    return Clustering(clusters=base.clusters, method_tag=method, params=config)


def purity(clustering: Clustering, corpus: Corpus) -> float:
    """Fraction of clustered instances sharing their cluster's majority truth."""
    total = 0
    agreeing = 0
    for cluster in clustering.clusters:
        counts: dict[str, int] = {}
        for idx in cluster:
            truth = corpus.instances[idx].ground_truth
            if truth is None:
                raise ValueError(
                    f"instance {corpus.instances[idx].id!r} has no ground truth"
                )
            counts[truth] = counts.get(truth, 0) + 1
        total += len(cluster)
        agreeing += max(counts.values())
    return agreeing / total if total else 1.0


def write_clustering(clustering: Clustering, corpus: Corpus, path: str | Path) -> None:
    """Serialize to a line-delimited file: one header record, one per cluster."""
    header = {
        "method": clustering.method_tag,
        "params": asdict(clustering.params) if clustering.params else None,
        "clusters": len(clustering.clusters),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for cid, cluster in enumerate(clustering.clusters):
            record = {
                "cluster": cid,
                "members": [corpus.instances[idx].id for idx in cluster],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_clustering(path: str | Path, corpus: Corpus) -> Clustering:
    """Read a clustering file back, resolving instance ids to positions."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty clustering file")
    header = json.loads(lines[0])
    params = ClusterConfig(**header["params"]) if header.get("params") else None
    groups = []
    for line in lines[1:]:
        record = json.loads(line)
        groups.append([corpus.index_of(instance_id) for instance_id in record["members"]])
    return _canonical(groups, header.get("method", ""), params)
