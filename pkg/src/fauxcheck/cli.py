"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 data error, 4 external-service
error, 5 internal error. Failures print a single machine-parseable line
`fauxcheck: <category>-error: <message>` to stderr.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import evaluation, evidence, features, model
from .config import RunConfig, load_run_config
from .ela import DEFAULT_QUALITY, compute_ela
from .errors import ConfigError, DataError, ExternalServiceError, FauxcheckError
from .features import ALL_GROUPS, FeatureConfig, FeatureGroup, fit_extractor
from .text import (
    HashedEmbeddings,
    load_category_rules,
    load_embedding_table,
    load_stopwords,
    load_suffix_rules,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_EXTERNAL = 4
EXIT_INTERNAL = 5


@click.group()
def cli() -> None:
    """Predict the factuality of image-claim pairs from web evidence."""


# ---------------------------------------------------------------------------
# corpus


@cli.group("corpus")
def corpus_group() -> None:
    """Corpus inspection commands."""


@corpus_group.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def corpus_validate(path: Path) -> None:
    """Load a corpus file and report invariant violations."""
    loaded = corpus_mod.load_corpus(path)
    violations = corpus_mod.validate_corpus(loaded)
    for entry in violations:
        click.echo(entry)
    if violations:
        raise DataError(f"{path}: {len(violations)} validation problem(s)")
    counts = loaded.label_counts
    click.echo(f"ok: {len(loaded)} pairs ({counts[True]} true / {counts[False]} false)")


# ---------------------------------------------------------------------------
# evidence


@cli.group("evidence")
def evidence_group() -> None:
    """Evidence acquisition commands."""


@evidence_group.command("fetch")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--cache", "cache_dir", required=True, type=click.Path(path_type=Path))
@click.option("--offline", is_flag=True, help="Fail instead of hitting the network on a cache miss.")
@click.option("--jobs", default=4, show_default=True, help="Parallel fetch workers.")
@click.option("--search-fixture", type=click.Path(exists=True, path_type=Path), default=None,
              help="Canned search responses (JSON) instead of the live endpoint.")
@click.option("--crawl-fixture", type=click.Path(exists=True, path_type=Path), default=None,
              help="Canned page contents (JSON) instead of live crawling.")
@click.option("--suffix-rules", type=click.Path(exists=True, path_type=Path), default=None)
def evidence_fetch(corpus_path, cache_dir, offline, jobs, search_fixture, crawl_fixture, suffix_rules):
    """Fetch (or verify, with --offline) one evidence bundle per corpus pair."""
    loaded = corpus_mod.load_corpus(corpus_path)
    rules = load_suffix_rules(suffix_rules) if suffix_rules else None
    cache = evidence.BundleCache(cache_dir, suffix_rules=rules)
    search = (
        evidence.FixtureSearch.from_file(search_fixture)
        if search_fixture
        else evidence.HttpSearch()
    )
    crawler = (
        evidence.FixtureCrawler.from_file(crawl_fixture)
        if crawl_fixture
        else evidence.HttpCrawler()
    )
    bundles = evidence.fetch_corpus_evidence(loaded, search, crawler, cache, offline=offline, jobs=jobs)
    n_pages = sum(len(b.pages) for b in bundles.values())
    click.echo(f"ok: {len(bundles)} bundles, {n_pages} pages in {cache_dir}")


# ---------------------------------------------------------------------------
# ela


@cli.command("ela")
@click.argument("image", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--quality", default=DEFAULT_QUALITY, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Write the brightened difference map as PNG.")
def ela_command(image: Path, quality: int, out_path: Path | None) -> None:
    """Error level analysis of a JPEG file."""
    result = compute_ela(image.read_bytes(), quality=quality)
    click.echo(f"mean={result.mean:.4f} max={result.max_value} quality={result.quality}")
    if out_path is not None:
        result.to_image().save(out_path, "PNG")
        click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------------------
# resource assembly shared by pipeline commands


def _feature_config(
    stopwords_path=None, suffix_rules_path=None, category_rules_path=None, embedding_table_path=None
) -> FeatureConfig:
    from .text import default_category_rules, default_stopwords, default_suffix_rules

    return FeatureConfig(
        stopwords=load_stopwords(stopwords_path) if stopwords_path else default_stopwords(),
        suffix_rules=load_suffix_rules(suffix_rules_path) if suffix_rules_path else default_suffix_rules(),
        category_rules=(
            load_category_rules(category_rules_path) if category_rules_path else default_category_rules()
        ),
        embeddings=(
            load_embedding_table(embedding_table_path) if embedding_table_path else HashedEmbeddings(0)
        ),
    )


def _experiment_from_config(config: RunConfig) -> evaluation.Experiment:
    loaded = corpus_mod.load_corpus(config.corpus)
    violations = corpus_mod.validate_corpus(loaded)
    if violations:
        detail = violations[0] + (f" (+{len(violations) - 1} more)" if len(violations) > 1 else "")
        raise DataError(f"corpus {config.corpus} is invalid: {detail}")
    new_corpus = corpus_mod.load_corpus(config.new_corpus) if config.new_corpus else None
    feature_config = _feature_config(
        config.stopwords, config.suffix_rules, config.category_rules, config.embedding_table
    )
    rules = feature_config.suffix_rules
    cache = evidence.BundleCache(config.cache_dir, suffix_rules=rules)
    if config.offline:
        bundles = evidence.load_corpus_evidence(loaded, cache)
        if new_corpus is not None:
            bundles.update(evidence.load_corpus_evidence(new_corpus, cache))
    else:
        search = evidence.HttpSearch()
        crawler = evidence.HttpCrawler()
        bundles = evidence.fetch_corpus_evidence(loaded, search, crawler, cache, jobs=config.jobs)
        if new_corpus is not None:
            bundles.update(
                evidence.fetch_corpus_evidence(new_corpus, search, crawler, cache, jobs=config.jobs)
            )
    return evaluation.Experiment(
        corpus=loaded,
        bundles=bundles,
        reliability=evidence.ReliabilityTable.from_csv(config.reliability_table),
        blacklist=(
            evidence.load_blacklist(config.blacklist) if config.blacklist else evidence.default_blacklist()
        ),
        features=feature_config,
        groups=config.groups,
        C=config.C,
        epochs=config.epochs,
        model_seed=config.model_seed,
        tol=config.tol,
        new_corpus=new_corpus,
    )


def _write_run_artifacts(config: RunConfig, report: evaluation.EvalReport) -> None:
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out / "table1.txt").write_text(evaluation.render_table(report), encoding="utf-8")
    (out / "fingerprint.txt").write_text(report.fingerprint + "\n", encoding="utf-8")
    if report.sweep:
        (out / "sweep.tsv").write_text(evaluation.render_sweep(report.sweep), encoding="utf-8")
    if report.weights:
        (out / "weights.txt").write_text(evaluation.render_weights(report.weights), encoding="utf-8")


def _run_pipeline(config: RunConfig, do_sweep: bool, weight_k: int) -> evaluation.EvalReport:
    exp = _experiment_from_config(config)
    result = evaluation.run_protocol(exp, config.protocol)
    sweep_points = evaluation.topn_sweep(result) if do_sweep else ()
    weights = None
    if weight_k > 0:
        positive, negative, _ = evaluation.concatenated_weight_report(exp, k=weight_k)
        weights = (positive, negative)
    report = evaluation.build_report(result, sweep=sweep_points, weights=weights)
    _write_run_artifacts(config, report)
    return report


@cli.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--offline/--online", "offline_override", default=None,
              help="Override the config's offline flag.")
@click.option("--jobs", type=int, default=None, help="Override the config's worker count.")
@click.option("--out", "out_override", type=click.Path(path_type=Path), default=None,
              help="Override the config's output directory.")
def run_command(config_path: Path, offline_override, jobs, out_override) -> None:
    """Execute the full pipeline described by a config file."""
    from dataclasses import replace

    config = load_run_config(config_path)
    if offline_override is not None:
        config = replace(config, offline=offline_override)
    if jobs is not None:
        config = replace(config, jobs=jobs)
    if out_override is not None:
        config = replace(config, output_dir=out_override.resolve())
    report = _run_pipeline(config, do_sweep=config.sweep, weight_k=config.weight_report_k)
    click.echo(
        f"ok: {report.protocol} protocol, mean accuracy {report.mean['accuracy']:.1f}, "
        f"mean AP {report.mean['average_precision']:.1f} -> {config.output_dir}"
    )


@cli.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def eval_command(config_path: Path) -> None:
    """Run the configured protocol and write report files (no sweep, no weights)."""
    config = load_run_config(config_path)
    report = _run_pipeline(config, do_sweep=False, weight_k=0)
    click.echo(f"ok: report written to {config.output_dir}")
    click.echo(evaluation.render_table(report), nl=False)


@cli.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def sweep_command(config_path: Path) -> None:
    """Run the configured protocol plus the top-n feature sweep."""
    config = load_run_config(config_path)
    report = _run_pipeline(config, do_sweep=True, weight_k=config.weight_report_k)
    click.echo(evaluation.render_sweep(report.sweep), nl=False)


# ---------------------------------------------------------------------------
# featurize / train


@cli.command("featurize")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--cache", "cache_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--reliability", "reliability_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--blacklist", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--embedding-table", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--groups", "groups_csv", default=None, help="Comma-separated group subset.")
def featurize_command(corpus_path, cache_dir, reliability_path, out_dir, blacklist, embedding_table, groups_csv):
    """Fit feature states on a corpus and write one matrix file per group."""
    loaded = corpus_mod.load_corpus(corpus_path)
    feature_config = _feature_config(embedding_table_path=embedding_table)
    cache = evidence.BundleCache(cache_dir, suffix_rules=feature_config.suffix_rules)
    bundles = evidence.load_corpus_evidence(loaded, cache)
    table = evidence.ReliabilityTable.from_csv(reliability_path)
    bl = evidence.load_blacklist(blacklist) if blacklist else evidence.default_blacklist()
    prepared = {pid: evidence.prepare_bundle(b, bl, table) for pid, b in bundles.items()}
    groups = _parse_groups(groups_csv)
    data = [(p, prepared[p.id]) for p in loaded.pairs]
    extractor = fit_extractor(groups, data, feature_config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for group in groups:
        state = extractor.states[group]
        rows = [
            (pair.id, features.extract_group(group, pair, bundle, state, feature_config).vector)
            for pair, bundle in data
        ]
        features.save_feature_matrix(out_dir / f"{group.value}.features.tsv", group, state.dim, rows)
        names = features.feature_names(state)
        (out_dir / f"{group.value}.names.txt").write_text("\n".join(names) + "\n", encoding="utf-8")
    click.echo(f"ok: {len(groups)} feature matrices for {len(loaded)} examples in {out_dir}")


def _parse_groups(groups_csv: str | None) -> tuple[FeatureGroup, ...]:
    if not groups_csv:
        return ALL_GROUPS
    try:
        return tuple(FeatureGroup(name.strip()) for name in groups_csv.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --groups value: {exc}")


@cli.command("train")
@click.option("--features", "features_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("-C", "c_value", default=1.0, show_default=True)
@click.option("--epochs", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_command(features_dir, corpus_path, out_dir, c_value, epochs, seed):
    """Train one SVM per feature matrix file and write an ensemble manifest."""
    loaded = corpus_mod.load_corpus(corpus_path)
    labels_by_id = {p.id: p.label for p in loaded.pairs}
    matrices = sorted(Path(features_dir).glob("*.features.tsv"))
    if not matrices:
        raise DataError(f"no *.features.tsv files in {features_dir}")
    grouped: dict[FeatureGroup, list] = {}
    labels: list[bool] | None = None
    for path in matrices:
        group, dim, rows = features.load_feature_matrix(path)
        row_labels = []
        for example_id, _ in rows:
            if example_id not in labels_by_id:
                raise DataError(f"{path}: example {example_id!r} is not in the corpus")
            row_labels.append(labels_by_id[example_id])
        if labels is None:
            labels = row_labels
        elif labels != row_labels:
            raise DataError(f"{path}: example order differs from the other matrices")
        grouped[group] = [features.GroupFeatures(group, vec, dim) for _, vec in rows]
    assert labels is not None
    ensemble = model.train_ensemble(grouped, labels, C=c_value, epochs=epochs, seed=seed)
    manifest = model.save_ensemble(ensemble, out_dir)
    click.echo(f"ok: {len(grouped)} models -> {manifest}")


# ---------------------------------------------------------------------------
# report


@cli.command("report")
@click.argument("report_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--what", type=click.Choice(["table", "sweep", "weights", "all"]), default="all",
              show_default=True)
def report_command(report_path: Path, what: str) -> None:
    """Render a report file as aligned text tables."""
    report = evaluation.EvalReport.from_json(report_path.read_text(encoding="utf-8"))
    if what in ("table", "all"):
        click.echo(evaluation.render_table(report), nl=False)
    if what in ("sweep", "all") and report.sweep:
        click.echo(evaluation.render_sweep(report.sweep), nl=False)
    if what in ("weights", "all") and report.weights:
        click.echo(evaluation.render_weights(report.weights), nl=False)


# ---------------------------------------------------------------------------
# entry point


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        print(f"fauxcheck: config-error: {exc.format_message()}", file=sys.stderr)
        return EXIT_CONFIG
    except click.ClickException as exc:
        print(f"fauxcheck: config-error: {exc.format_message()}", file=sys.stderr)
        return EXIT_CONFIG
    except click.Abort:
        print("fauxcheck: internal-error: aborted", file=sys.stderr)
        return EXIT_INTERNAL
    except ConfigError as exc:
        print(f"fauxcheck: config-error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"fauxcheck: data-error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ExternalServiceError as exc:
        print(f"fauxcheck: external-error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except FauxcheckError as exc:
        print(f"fauxcheck: internal-error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last-resort mapping
        print(f"fauxcheck: internal-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
