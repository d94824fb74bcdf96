"""Command-line entry points.

Every command exits 0 on success and nonzero with a stage-tagged message on
failure; all randomness hangs off explicit --seed flags so reruns reproduce
outputs exactly.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import click

import batchcorrect
from batchcorrect import correction, costing, lexicon, pipeline
from batchcorrect.clustering import (
    METHODS,
    ClusterConfig,
    cluster_corpus,
    purity,
    write_clustering,
)
from batchcorrect.corpus import CorpusError, load_corpus, write_corpus
from batchcorrect.costing import CostModel
from batchcorrect.pipeline import (
    PipelineConfig,
    PipelineStageError,
    ScalingConfig,
    run_pipeline,
    scaling_experiment,
    write_scaling_series,
)
from batchcorrect.synthgen import GeneratorConfig, generate


def _fail(stage: str, exc: Exception) -> click.ClickException:
    if isinstance(exc, PipelineStageError):
        return click.ClickException(str(exc))
    return click.ClickException(f"[{stage}] {exc}")


def _parse_costs(text: str) -> CostModel:
    try:
        c_v, c_d, c_t = (float(part) for part in text.split(","))
    except ValueError as exc:
        raise click.ClickException(
            f"[config] --costs expects three comma-separated numbers, got {text!r}"
        ) from exc
    if all(v == int(v) for v in (c_v, c_d, c_t)):
        return CostModel(int(c_v), int(c_d), int(c_t))
    return CostModel(c_v, c_d, c_t)


def _cluster_config(k, max_iter, kmeans_seed, threshold, refine, lsh_bits, lsh_bands, lsh_seed, seed):
    return ClusterConfig(
        k=k,
        kmeans_max_iter=max_iter,
        kmeans_seed=seed if kmeans_seed is None else kmeans_seed,
        mst_threshold=threshold,
        refine_threshold=refine,
        lsh_bits_per_band=lsh_bits,
        lsh_bands=lsh_bands,
        lsh_seed=seed if lsh_seed is None else lsh_seed,
    )


def _generator_config(vocab, words, seed, accuracy, oov, consistent, zipf, dim, sigma, alphabet):
    try:
        return GeneratorConfig(
            vocabulary_size=vocab,
            total_words=words,
            seed=seed,
            zipf_exponent=zipf,
            target_word_accuracy=accuracy,
            consistent_error_fraction=consistent,
            embedding_dim=dim,
            embedding_noise_sigma=sigma,
            oov_fraction=oov,
            alphabet=alphabet,
        )
    except ValueError as exc:
        raise _fail("config", exc) from exc


def generator_options(fn):
    options = [
        click.option("--vocab", type=int, default=100, show_default=True, help="Vocabulary size."),
        click.option("--words", type=int, default=10000, show_default=True, help="Total word instances."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--accuracy", type=float, default=0.64, show_default=True, help="Target share of correct predictions."),
        click.option("--oov", type=float, default=0.1, show_default=True, help="Share of vocabulary withheld from the dictionary."),
        click.option("--consistent", type=float, default=0.5, show_default=True, help="Share of errors that repeat the same corruption per word."),
        click.option("--zipf", type=float, default=1.0, show_default=True, help="Word-frequency skew exponent."),
        click.option("--dim", type=int, default=128, show_default=True, help="Embedding dimensionality."),
        click.option("--sigma", type=float, default=0.15, show_default=True, help="Embedding noise scale."),
        click.option("--alphabet", type=click.Choice(["ascii", "devanagari"]), default="ascii", show_default=True),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def cluster_options(fn):
    options = [
        click.option("--k", type=int, default=None, help="Cluster count for k-means (default: unique predictions)."),
        click.option("--max-iter", type=int, default=50, show_default=True),
        click.option("--kmeans-seed", type=int, default=None, help="Defaults to --seed."),
        click.option("--threshold", type=float, default=0.4, show_default=True, help="Normalized-distance cut for the text clusterer."),
        click.option("--refine", type=int, default=2, show_default=True, help="Raw edit distance for sub-cluster refinement."),
        click.option("--lsh-bits", type=int, default=8, show_default=True),
        click.option("--lsh-bands", type=int, default=16, show_default=True),
        click.option("--lsh-seed", type=int, default=None, help="Defaults to --seed."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
@click.version_option(version=batchcorrect.__version__, prog_name="batchcorrect")
def main() -> None:
    """Batch correction of OCR word errors."""


@main.command()
@generator_options
@click.option("-o", "--out", type=click.Path(file_okay=False), required=True)
def gen(vocab, words, seed, accuracy, oov, consistent, zipf, dim, sigma, alphabet, out) -> None:
    """Generate an annotated synthetic corpus plus its dictionary files."""
    config = _generator_config(vocab, words, seed, accuracy, oov, consistent, zipf, dim, sigma, alphabet)
    try:
        bundle = generate(config)
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_corpus(bundle.corpus, out_dir / "corpus.jsonl")
        (out_dir / "dictionary.txt").write_text(
            "".join(word + "\n" for word in sorted(bundle.dictionary_words)), encoding="utf-8"
        )
        (out_dir / "withheld.txt").write_text(
            "".join(word + "\n" for word in sorted(bundle.oov_words)), encoding="utf-8"
        )
    except (OSError, ValueError, CorpusError) as exc:
        raise _fail("gen", exc) from exc
    click.echo(
        f"wrote {len(bundle.corpus)} instances to {out_dir / 'corpus.jsonl'} "
        f"(dictionary {len(bundle.dictionary_words)} words, withheld {len(bundle.oov_words)})"
    )


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dictionary", "dictionary_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--dictionary-mode", type=click.Choice(["static", "growing"]), default="static", show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None, help="Optional file for flagged instance ids.")
def detect(corpus_path, dictionary_paths, dictionary_mode, out) -> None:
    """Flag predictions missing from the dictionary; report categories."""
    try:
        corpus = load_corpus(corpus_path)
        dictionary = lexicon.build_dictionary(dictionary_paths, mode=dictionary_mode)
        flagged = lexicon.flagged(dictionary, corpus)
    except (OSError, ValueError, CorpusError, lexicon.LexiconError) as exc:
        raise _fail("detect", exc) from exc
    click.echo(f"flagged {len(flagged)} of {len(corpus)} instances")
    if corpus.fully_annotated:
        cats = lexicon.categorize(dictionary, corpus)
        click.echo(
            f"efp={len(cats.efp)} etp={len(cats.etp)} rfn={len(cats.rfn)} tn={len(cats.tn)}"
        )
    if out:
        Path(out).write_text(
            "".join(corpus.instances[i].id + "\n" for i in flagged), encoding="utf-8"
        )


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dictionary", "dictionary_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--method", type=click.Choice(list(METHODS)), default="kmeans+mst", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@cluster_options
@click.option("-o", "--out", type=click.Path(dir_okay=False), required=True)
def cluster(corpus_path, dictionary_paths, method, seed, k, max_iter, kmeans_seed, threshold,
            refine, lsh_bits, lsh_bands, lsh_seed, out) -> None:
    """Cluster the flagged instances and write the clustering file."""
    config = _cluster_config(k, max_iter, kmeans_seed, threshold, refine, lsh_bits, lsh_bands, lsh_seed, seed)
    try:
        corpus = load_corpus(corpus_path)
        dictionary = lexicon.build_dictionary(dictionary_paths)
        flagged = lexicon.flagged(dictionary, corpus)
        clustering = cluster_corpus(corpus, flagged, method, config)
        write_clustering(clustering, corpus, out)
    except (OSError, ValueError, CorpusError, lexicon.LexiconError) as exc:
        raise _fail("cluster", exc) from exc
    line = f"{method}: {len(clustering.clusters)} clusters over {len(flagged)} flagged instances"
    if corpus.fully_annotated and clustering.clusters:
        line += f", purity {purity(clustering, corpus):.4f}"
    click.echo(line)


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dictionary", "dictionary_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--method", type=click.Choice(list(METHODS)), default="kmeans+mst", show_default=True)
@click.option("--mode", type=click.Choice(["auto", "oracle"]), default="auto", show_default=True)
@click.option("--dictionary-mode", type=click.Choice(["static", "growing"]), default="static", show_default=True)
@click.option("--costs", default="1,5,15", show_default=True, help="c_v,c_d,c_t in seconds.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--per-member-verify", is_flag=True, help="Charge a verification per member in oracle mode.")
@cluster_options
@click.option("-o", "--out", type=click.Path(file_okay=False), required=True)
def correct(corpus_path, dictionary_paths, method, mode, dictionary_mode, costs, seed,
            per_member_verify, k, max_iter, kmeans_seed, threshold, refine, lsh_bits,
            lsh_bands, lsh_seed, out) -> None:
    """Run detect → cluster → correct → cost and write all artifacts."""
    config = PipelineConfig(
        corpus_path=str(corpus_path),
        dictionary_paths=tuple(str(p) for p in dictionary_paths),
        method=method,
        mode=mode,
        dictionary_mode=dictionary_mode,
        cluster=_cluster_config(k, max_iter, kmeans_seed, threshold, refine, lsh_bits, lsh_bands, lsh_seed, seed),
        cost_model=_parse_costs(costs),
        per_member_verify=per_member_verify,
        seed=seed,
    )
    try:
        outcome = run_pipeline(config, out)
    except PipelineStageError as exc:
        raise _fail("run", exc) from exc
    report = outcome.report
    click.echo(f"{report.method_tag}: {len(outcome.clustering.clusters)} clusters, "
               f"v_t={report.v_t} v_d={report.v_d} v_v={report.v_v}, "
               f"{report.absolute_seconds} s")
    if report.relative_to_typing is not None:
        click.echo(f"relative to typing: {report.relative_to_typing:.4f}")


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dictionary", "dictionary_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--methods", default=",".join(METHODS), show_default=True)
@click.option("--modes", default="auto,oracle", show_default=True)
@click.option("--dictionary-modes", default="static,growing", show_default=True)
@click.option("--costs", default="1,5,15", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@cluster_options
@click.option("-o", "--out", type=click.Path(file_okay=False), required=True)
def simulate(corpus_path, dictionary_paths, methods, modes, dictionary_modes, costs, seed,
             k, max_iter, kmeans_seed, threshold, refine, lsh_bits, lsh_bands, lsh_seed, out) -> None:
    """Run the full method × mode × dictionary grid and print the cost table."""
    cluster_cfg = _cluster_config(k, max_iter, kmeans_seed, threshold, refine, lsh_bits, lsh_bands, lsh_seed, seed)
    model = _parse_costs(costs)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    mode_list = [m.strip() for m in modes.split(",") if m.strip()]
    dict_modes = [m.strip() for m in dictionary_modes.split(",") if m.strip()]
    out_dir = Path(out)
    rows = []
    for method in method_list:
        for mode in mode_list:
            for dictionary_mode in dict_modes:
                config = PipelineConfig(
                    corpus_path=str(corpus_path),
                    dictionary_paths=tuple(str(p) for p in dictionary_paths),
                    method=method,
                    mode=mode,
                    dictionary_mode=dictionary_mode,
                    cluster=cluster_cfg,
                    cost_model=model,
                    seed=seed,
                )
                run_dir = out_dir / f"{method.replace('+', '-')}__{mode}__{dictionary_mode}"
                try:
                    outcome = run_pipeline(config, run_dir)
                except PipelineStageError as exc:
                    raise _fail("run", exc) from exc
                rows.append(outcome.summary | {
                    "method": method, "mode": mode, "dictionary_mode": dictionary_mode,
                })
    click.echo(_format_table(rows))


def _format_table(rows) -> str:
    combos = sorted({(r["mode"], r["dictionary_mode"]) for r in rows})
    methods = list(dict.fromkeys(r["method"] for r in rows))
    headers = ["method"] + [f"{m}/{d}" for m, d in combos]
    table = [headers]
    for method in methods:
        line = [method]
        for mode, dmode in combos:
            cell = "-"
            for r in rows:
                if (r["method"], r["mode"], r["dictionary_mode"]) == (method, mode, dmode):
                    rel = r.get("relative_to_typing")
                    cell = f"{rel:.4f}" if rel is not None else f"{r['absolute_seconds']}s"
            line.append(cell)
        table.append(line)
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in table]
    return "\n".join(lines)


@main.command()
@generator_options
@click.option("--sizes", default="1000,5000,10000,25000,50000", show_default=True)
@click.option("--eval-size", type=int, default=2000, show_default=True)
@click.option("--reps", type=int, default=1, show_default=True, help="Seeds per size (seed, seed+1, ...).")
@click.option("--method", type=click.Choice(list(METHODS)), default="kmeans+mst", show_default=True)
@click.option("--costs", default="1,5,15", show_default=True)
@click.option("-o", "--out", type=click.Path(file_okay=False), required=True)
def scale(vocab, words, seed, accuracy, oov, consistent, zipf, dim, sigma, alphabet,
          sizes, eval_size, reps, method, costs, out) -> None:
    """Grow the collection around a fixed evaluation subset and re-measure."""
    generator = _generator_config(vocab, words, seed, accuracy, oov, consistent, zipf, dim, sigma, alphabet)
    try:
        size_list = tuple(int(s) for s in sizes.split(","))
    except ValueError as exc:
        raise _fail("config", exc) from exc
    try:
        config = ScalingConfig(
            generator=generator,
            sizes=size_list,
            eval_size=eval_size,
            repetitions=reps,
            method=method,
            cost_model=_parse_costs(costs),
        )
        result = scaling_experiment(config)
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_scaling_series(result, out_dir / "scaling.tsv")
    except PipelineStageError as exc:
        raise _fail("scale", exc) from exc
    except (OSError, ValueError) as exc:
        raise _fail("scale", exc) from exc
    for size, mean in zip(result.sizes, result.mean_accuracy):
        click.echo(f"size {size}: accuracy {mean:.4f}")
    rho = "undefined" if result.spearman_rho is None else f"{result.spearman_rho:.4f}"
    click.echo(f"rank correlation (size vs accuracy): {rho}")


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--clustering", "clustering_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dictionary", "dictionary_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--dictionary-mode", type=click.Choice(["static", "growing"]), default="growing", show_default=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None, help="Durable action log (replayed on start).")
@click.option("--costs", default="1,5,15", show_default=True)
@click.option("--token", default=None, help="Require this shared token in the x-review-token header.")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of built UI assets to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(corpus_path, clustering_path, dictionary_paths, dictionary_mode, log_path, costs,
          token, ui_dir, host, port) -> None:
    """Serve the human review API over a correction session."""
    from batchcorrect.service import create_app, load_session

    try:
        session = load_session(
            corpus_path, clustering_path, dictionary_paths, dictionary_mode
        )
        app = create_app(
            session,
            log_path=log_path,
            cost_model=_parse_costs(costs),
            token=token,
            static_dir=ui_dir,
        )
    except (OSError, ValueError, CorpusError, lexicon.LexiconError) as exc:
        raise _fail("serve", exc) from exc
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--runs", "runs_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of pipeline run directories (each with manifest.json).")
@click.option("--scaling", "scaling_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="scaling.tsv produced by the scale command.")
def report(runs_dir, scaling_path) -> None:
    """Render the cost comparison table and/or the scaling series."""
    if runs_dir is None and scaling_path is None:
        raise click.ClickException("[report] pass --runs and/or --scaling")
    if runs_dir is not None:
        rows = []
        for manifest_path in sorted(Path(runs_dir).glob("*/manifest.json")):
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            config = manifest["config"]
            rows.append(manifest["summary"] | {
                "method": config["method"],
                "mode": config["mode"],
                "dictionary_mode": config["dictionary_mode"],
            })
        if not rows:
            raise click.ClickException(f"[report] no manifests under {runs_dir}")
        click.echo("cost relative to typing (absolute seconds where no baseline):")
        click.echo(_format_table(rows))
    if scaling_path is not None:
        click.echo(Path(scaling_path).read_text(encoding="utf-8").rstrip("\n"))


if __name__ == "__main__":
    main()
