"""End-to-end orchestration: detect flagged words, cluster them, correct in
batch, and price the human effort — plus the collection-size experiment.

Every run writes its artifacts with stable ordering and no timestamps or
absolute output paths, so identical configurations produce byte-identical
output directories.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

import batchcorrect
from batchcorrect import correction, costing, lexicon
from batchcorrect.clustering import METHODS, ClusterConfig, Clustering, cluster_corpus, purity, write_clustering
from batchcorrect.corpus import Corpus, concat_corpora, load_corpus
from batchcorrect.costing import DEFAULT_COST_MODEL, CostModel, CostReport
from batchcorrect.lexicon import Dictionary
from batchcorrect.synthgen import GeneratorConfig, generate


class PipelineStageError(Exception):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    """One correction run: inputs, clustering method, mode, and prices."""

    corpus_path: str
    dictionary_paths: tuple[str, ...]
    method: str = "kmeans+mst"
    mode: str = "auto"
    dictionary_mode: str = "static"
    cluster: ClusterConfig = ClusterConfig()
    cost_model: CostModel = DEFAULT_COST_MODEL
    max_distance: int = lexicon.DEFAULT_MAX_DISTANCE
    top_k: int = lexicon.DEFAULT_TOP_K
    per_member_verify: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.mode not in ("auto", "oracle"):
            raise ValueError("mode must be 'auto' or 'oracle'")
        if self.dictionary_mode not in ("static", "growing"):
            raise ValueError("dictionary_mode must be 'static' or 'growing'")


@dataclass(frozen=True)
class PipelineOutcome:
    """In-memory artifacts of one run, mirroring what lands on disk."""

    clustering: Clustering
    result: correction.CorrectionResult
    report: CostReport
    categories: lexicon.Categories | None
    dictionary: Dictionary
    flagged: tuple[int, ...]
    summary: dict


def _stage(name, thunk):
    try:
        return thunk()
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def build_dictionary_for(corpus: Corpus, config: PipelineConfig) -> Dictionary:
    """Load the word lists and weight entries by how often they are predicted."""
    frequencies = {}
    counts = correction.prediction_frequencies(corpus)
    dictionary = lexicon.build_dictionary(config.dictionary_paths, mode=config.dictionary_mode)
    for word in dictionary.words:
        if counts[word]:
            frequencies[word] = counts[word]
    return Dictionary(sorted(dictionary.words), mode=config.dictionary_mode, frequencies=frequencies)


def correct_corpus(
    corpus: Corpus,
    dictionary: Dictionary,
    clustering: Clustering,
    config: PipelineConfig,
) -> correction.CorrectionResult:
    """Run the configured correction mode over one clustering."""
    if config.mode == "oracle":
        return correction.oracle_correct(
            clustering,
            corpus,
            dictionary,
            max_distance=config.max_distance,
            top_k=config.top_k,
            per_member_verify=config.per_member_verify,
        )
    result = correction.auto_correct(clustering, corpus, dictionary)
    if corpus.fully_annotated:
        log = correction.verification_pass(
            result,
            corpus,
            dictionary,
            clustering=clustering,
            max_distance=config.max_distance,
            top_k=config.top_k,
        )
        result = correction.CorrectionResult(
            labels=result.labels, sources=result.sources, log=log
        )
    return result


def run_pipeline(config: PipelineConfig, output_dir: str | Path) -> PipelineOutcome:
    """detect → cluster → correct → cost, writing all artifacts to output_dir.

    The manifest records the configuration and environment versions but not
    the output location, so re-running the same configuration elsewhere
    yields byte-identical directories.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    corpus = _stage("load", lambda: load_corpus(config.corpus_path))
    dictionary = _stage("load", lambda: build_dictionary_for(corpus, config))

    flagged = _stage("detect", lambda: lexicon.flagged(dictionary, corpus))
    categories = None
    if corpus.fully_annotated:
        categories = _stage("detect", lambda: lexicon.categorize(dictionary, corpus))

    clustering = _stage(
        "cluster", lambda: cluster_corpus(corpus, flagged, config.method, config.cluster)
    )

    result = _stage("correct", lambda: correct_corpus(corpus, dictionary, clustering, config))

    def _price() -> CostReport:
        baseline = None
        if categories is not None:
            baseline = costing.naive_typing_cost(categories, config.cost_model)
        tag = f"{config.method}/{config.mode}/{config.dictionary_mode}"
        return costing.batch_cost(
            result.log, config.cost_model, baseline_typing_seconds=baseline, method_tag=tag
        )

    report = _stage("cost", _price)

    summary = {
        "instances": len(corpus),
        "flagged": len(flagged),
        "clusters": len(clustering.clusters),
        "actions": len(result.log),
        "v_t": report.v_t,
        "v_d": report.v_d,
        "v_v": report.v_v,
        "absolute_seconds": report.absolute_seconds,
        "relative_to_typing": report.relative_to_typing,
    }
    if categories is not None:
        summary["categories"] = {
            "efp": len(categories.efp),
            "etp": len(categories.etp),
            "rfn": len(categories.rfn),
            "tn": len(categories.tn),
        }
        summary["naive_typing_seconds"] = costing.naive_typing_cost(
            categories, config.cost_model
        )
        summary["naive_selection_seconds"] = costing.naive_selection_cost(
            categories,
            corpus,
            dictionary,
            config.cost_model,
            config.max_distance,
            config.top_k,
        )
        before = correction.CorrectionResult(
            labels=tuple(i.prediction for i in corpus.instances),
            sources=(correction.SOURCE_UNTOUCHED,) * len(corpus),
            log=correction.ActionLog(),
        )
        summary["accuracy_before"] = correction.accuracy(before, corpus)
        summary["accuracy_after"] = correction.accuracy(result, corpus)
        if clustering.clusters:
            summary["purity"] = purity(clustering, corpus)

    def _write() -> None:
        write_clustering(clustering, corpus, output_dir / "clustering.jsonl")
        correction.write_result(result, corpus, output_dir / "corrected.jsonl")
        correction.write_action_log(result.log, output_dir / "actions.jsonl")
        costing.write_report(report, output_dir / "report.txt")
        manifest = {
            "tool": {
                "name": "batchcorrect",
                "version": batchcorrect.__version__,
                "numpy": np.__version__,
            },
            "config": asdict(config),
            "artifacts": {
                "clustering": "clustering.jsonl",
                "corrected": "corrected.jsonl",
                "actions": "actions.jsonl",
                "report": "report.txt",
            },
            "summary": summary,
        }
        with open(output_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")

    _stage("write", _write)
    return PipelineOutcome(
        clustering=clustering,
        result=result,
        report=report,
        categories=categories,
        dictionary=dictionary,
        flagged=tuple(flagged),
        summary=summary,
    )


# ---------------------------------------------------------------------------
# Collection-size scaling experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingConfig:
    """Grow the collection around a fixed evaluation subset and re-measure."""

    generator: GeneratorConfig
    sizes: tuple[int, ...] = (1000, 5000, 10000, 25000, 50000)
    eval_size: int = 2000
    repetitions: int = 1
    method: str = "kmeans+mst"
    cluster: ClusterConfig | None = None
    cost_model: CostModel = DEFAULT_COST_MODEL
    max_distance: int = lexicon.DEFAULT_MAX_DISTANCE
    top_k: int = lexicon.DEFAULT_TOP_K

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be strictly ascending")
        if self.eval_size < 1:
            raise ValueError("eval_size must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class ScalingRow:
    size: int
    seed: int
    accuracy_before: float
    accuracy_after: float
    naive_typing_seconds: float
    naive_selection_seconds: float
    flagged: int
    clusters: int


@dataclass(frozen=True)
class ScalingResult:
    rows: tuple[ScalingRow, ...]
    sizes: tuple[int, ...]
    mean_accuracy: tuple[float, ...]
    spearman_rho: float | None
    per_seed_rho: tuple[float | None, ...]


def _spearman(xs, ys) -> float | None:
    if len(xs) < 2 or len(set(ys)) < 2:
        return None
    from scipy.stats import spearmanr

    rho = spearmanr(xs, ys).statistic
    return None if np.isnan(rho) else float(rho)


def scaling_experiment(config: ScalingConfig) -> ScalingResult:
    """Measure evaluation-subset accuracy as filler data grows around it.

    The evaluation block is generated once per seed and concatenated with a
    fresh filler block of each size; both share vocabulary, centroids, and
    consistent corruptions, so filler instances genuinely enlarge the
    clusters evaluation members sit in. Correction runs in auto mode; the
    naive per-word baselines are computed on the evaluation block only and
    therefore do not move with collection size.
    """
    rows: list[ScalingRow] = []
    for rep in range(config.repetitions):
        seed = config.generator.seed + rep
        gen_cfg = replace(config.generator, seed=seed)
        eval_block = generate(replace(gen_cfg, total_words=config.eval_size), book_id="eval")
        dictionary_words = eval_block.dictionary_words
        eval_positions = list(range(config.eval_size))
        for size in config.sizes:
            filler = generate(replace(gen_cfg, total_words=size), book_id="fill")
            combined = concat_corpora(
                eval_block.corpus, filler.corpus, metadata=eval_block.corpus.metadata
            )
            counts = correction.prediction_frequencies(combined)
            dictionary = Dictionary(
                sorted(dictionary_words),
                mode="static",
                frequencies={w: counts[w] for w in dictionary_words if counts[w]},
            )
            cluster_cfg = config.cluster or ClusterConfig(
                k=min(config.generator.vocabulary_size, max(1, len(combined))),
                kmeans_max_iter=8,
                kmeans_seed=seed,
                lsh_seed=seed,
            )
            flagged = lexicon.flagged(dictionary, combined)
            clustering = cluster_corpus(combined, flagged, config.method, cluster_cfg)
            result = correction.auto_correct(clustering, combined, dictionary)

            eval_only = Corpus(
                instances=list(eval_block.corpus.instances),
                embeddings=eval_block.corpus.embeddings,
                metadata=eval_block.corpus.metadata,
            )
            categories = lexicon.categorize(dictionary, eval_only)
            before = correction.CorrectionResult(
                labels=tuple(i.prediction for i in combined.instances),
                sources=(correction.SOURCE_UNTOUCHED,) * len(combined),
                log=correction.ActionLog(),
            )
            rows.append(
                ScalingRow(
                    size=size,
                    seed=seed,
                    accuracy_before=correction.accuracy(before, combined, eval_positions),
                    accuracy_after=correction.accuracy(result, combined, eval_positions),
                    naive_typing_seconds=costing.naive_typing_cost(categories, config.cost_model),
                    naive_selection_seconds=costing.naive_selection_cost(
                        categories,
                        eval_only,
                        dictionary,
                        config.cost_model,
                        config.max_distance,
                        config.top_k,
                    ),
                    flagged=len(flagged),
                    clusters=len(clustering.clusters),
                )
            )

    sizes = tuple(config.sizes)
    means = tuple(
        float(np.mean([r.accuracy_after for r in rows if r.size == size])) for size in sizes
    )
    per_seed = []
    for rep in range(config.repetitions):
        seed = config.generator.seed + rep
        series = [r.accuracy_after for r in rows if r.seed == seed]
        per_seed.append(_spearman(sizes, series))
    return ScalingResult(
        rows=tuple(rows),
        sizes=sizes,
        mean_accuracy=means,
        spearman_rho=_spearman(sizes, means),
        per_seed_rho=tuple(per_seed),
    )


def write_scaling_series(result: ScalingResult, path: str | Path) -> None:
    """Plot-ready TSV: one row per (size, seed) plus a mean series block."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "size\tseed\taccuracy_before\taccuracy_after\t"
            "naive_typing_seconds\tnaive_selection_seconds\tflagged\tclusters\n"
        )
        for row in result.rows:
            fh.write(
                f"{row.size}\t{row.seed}\t{row.accuracy_before:.6f}\t{row.accuracy_after:.6f}\t"
                f"{row.naive_typing_seconds}\t{row.naive_selection_seconds}\t"
                f"{row.flagged}\t{row.clusters}\n"
            )
        fh.write("\n")
        fh.write("size\tmean_accuracy_after\n")
        for size, mean in zip(result.sizes, result.mean_accuracy):
            fh.write(f"{size}\t{mean:.6f}\n")
        rho = "" if result.spearman_rho is None else f"{result.spearman_rho:.6f}"
        fh.write(f"\nspearman_rho\t{rho}\n")
