"""Command-line entry point: ``vocatree <subcommand>``."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .corpus import SynthSpec, generate_synthetic_corpus, load_manifest, materialize_wavs, write_manifest
from .errors import ConfigurationError, VocatreeError
from .features import FeatureTable, extract_corpus_features, write_schema
from .fusion import STRATEGIES, TREE_STRATEGIES, cards_from_metrics, export_tree, read_cards_csv, \
    read_predictions_csv, simulate_fusion, traces_to_json
from .harness import ExperimentConfig, render_report, run_experiment, write_run_log


def _fail(exc: Exception, code: int = 1):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


@click.group(context_settings={"show_default": True, "help_option_names": ["-h", "--help"]})
@click.version_option(__version__)
def main():
    """Depression screening experiments on segmented speech recordings.

    Worker processes are capped by the VOCATREE_THREADS environment variable
    (default 1, 0 = one per CPU); results do not depend on it.
    """


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="SynthSpec JSON; omitted keys take defaults (52 subjects: 29 healthy, 23 depressed, "
                   "fs 16000, rng_seed 0). A 'preset' key of 'strong' or 'null' selects an effect preset.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.option("--write-wavs/--no-write-wavs", default=True, help="Write WAV files and manifest.csv.")
@click.option("--features/--no-features", "with_features", default=False,
              help="Also extract features.csv from the generated audio.")
def synth(spec_path, out_dir, write_wavs, with_features):
    """Generate a synthetic corpus with a controllable class effect."""
    try:
        spec = SynthSpec.from_json(spec_path) if spec_path else SynthSpec()
        corpus = generate_synthetic_corpus(spec)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "synth_spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
        if write_wavs:
            manifest = materialize_wavs(corpus, out)
            click.echo(f"wrote {manifest}")
        else:
            write_manifest(corpus, out / "manifest.csv")
        if with_features:
            extract_corpus_features(corpus).to_csv(out / "features.csv")
            click.echo(f"wrote {out / 'features.csv'}")
    except VocatreeError as exc:
        _fail(exc)


@main.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV subject_id,gender,label,segment_id,wav_path.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="features.csv",
              help="Feature matrix CSV; a schema JSON is written next to it.")
def extract(manifest, out_path):
    """Extract the 113-dimensional feature vector of every recording."""
    try:
        table = extract_corpus_features(load_manifest(manifest))
        table.to_csv(out_path)
        write_schema(Path(out_path).with_suffix(".schema.json"), table.names)
        click.echo(f"wrote {out_path} ({len(table.vectors)} rows)")
    except VocatreeError as exc:
        _fail(exc)


@main.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Corpus manifest (features are extracted first).")
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Precomputed feature CSV, used instead of --manifest.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="ExperimentConfig JSON. Defaults: group all, n_folds 4, n_repetitions 50, top_n 20, "
                   "classifier both, fusion_classifier svm, fusion_strategies vote/accuracy_tree/"
                   "sens_spec_tree, rng_seed 0, relief_k 10, svm_C 1.0, svm_tol 0.001, n_trees 100, "
                   "inner_folds 4.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.option("--format", "formats", multiple=True, type=click.Choice(["json", "csv", "markdown"]),
              default=("json", "csv", "markdown"), help="Report formats to write.")
def run(manifest, features_path, config_path, out_dir, formats):
    """Run the repeated cross-validation experiment and write the report.

    Exit code 2 signals a configuration error.
    """
    try:
        cfg = ExperimentConfig.from_json(config_path) if config_path else ExperimentConfig()
        if features_path:
            source = FeatureTable.from_csv(features_path)
        elif manifest:
            source = load_manifest(manifest)
        else:
            raise ConfigurationError("one of --manifest or --features is required")
        report = run_experiment(source, cfg)
    except ConfigurationError as exc:
        _fail(exc, 2)
    except VocatreeError as exc:
        _fail(exc)
    for fmt in formats:
        for p in render_report(report, fmt, out_dir):
            click.echo(f"wrote {p}")
    write_run_log(report, Path(out_dir) / "run_log.json")


@main.command("fuse-sim")
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV subject_id,segment_id,prediction (1/-1, healthy/depressed; blank = absent).")
@click.option("--cards", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV segment_id,accuracy,sensitivity,specificity.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default="sens_spec_tree", help="Fusion strategy.")
@click.option("--traces", type=click.Path(dir_okay=False), default=None, help="Write per-subject traces as JSON.")
def fuse_sim(predictions, cards, strategy, traces):
    """Fuse a prediction matrix without audio or models."""
    try:
        labels, trs = simulate_fusion(read_predictions_csv(predictions), read_cards_csv(cards), strategy)
    except VocatreeError as exc:
        _fail(exc)
    click.echo("subject_id,label")
    for t in trs:
        click.echo(f"{t.subject_id},{t.label}")
    if traces:
        Path(traces).write_text(traces_to_json(trs), encoding="utf-8")


@main.command("export-tree")
@click.option("--cards", type=click.Path(exists=True, dir_okay=False), required=True,
              help="CSV segment_id,accuracy,sensitivity,specificity.")
@click.option("--strategy", type=click.Choice(TREE_STRATEGIES), default="sens_spec_tree", help="Tree strategy.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="tree.dot", help="DOT output file.")
def export_tree_cmd(cards, strategy, out_path):
    """Write the fully expanded fusion tree induced by card metrics as DOT."""
    try:
        text = export_tree(cards_from_metrics(read_cards_csv(cards)), strategy)
    except VocatreeError as exc:
        _fail(exc)
    Path(out_path).write_text(text, encoding="utf-8")
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
