"""Command-line entry points: index, sweep, eval, report and cache tools."""

from __future__ import annotations

import dataclasses
import json
import sys
from collections import Counter
from pathlib import Path

import click

from . import harness, retrieval
from .corpus import normalize_copy
from .modelclient import ResponseCache
from .normalize import build_normalizer


def _load(config_path: str) -> harness.ExperimentConfig:
    try:
        return harness.load_config(config_path)
    except (harness.HarnessError, OSError) as exc:
        raise click.ClickException(str(exc))


def _pick_mechanism(
    config: harness.ExperimentConfig, kind: str | None
) -> harness.MechanismConfig:
    if kind is None:
        return config.mechanisms[0]
    for mechanism in config.mechanisms:
        if mechanism.kind == kind or mechanism.label == kind:
            return mechanism
    return harness.MechanismConfig(kind=kind)


def _apply_overrides(
    config: harness.ExperimentConfig,
    seed: int | None,
    model: str | None,
    replay_only: bool,
) -> harness.ExperimentConfig:
    if seed is not None:
        config = dataclasses.replace(
            config,
            mechanisms=tuple(
                dataclasses.replace(m, seed=seed) for m in config.mechanisms
            ),
        )
    if model is not None:
        config.model.model = model
    if replay_only:
        config = dataclasses.replace(config, replay_only=True)
    return config


@click.group()
def main():
    """Few-shot NER experiments with retrieved in-context examples."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--mechanism", default="all", show_default=True,
              help="bm25, semantic, or all")
def index(config_path, mechanism):
    """Build retrieval indexes over the training split and persist them."""
    config = _load(config_path)
    train = harness.load_split(config, "train")
    normalizer = build_normalizer(config.normalizer_spec)
    config.cache_dir.mkdir(parents=True, exist_ok=True)
    if mechanism in ("bm25", "all"):
        params = retrieval.Bm25Params(
            k1=config.mechanisms[0].k1, b=config.mechanisms[0].b
        )
        idx = retrieval.build_bm25_index(
            normalize_copy(train, normalizer), params, normalizer_name=normalizer.name
        )
        path = config.cache_dir / f"{config.dataset.name}-bm25.json"
        retrieval.save_bm25_index(idx, path)
        click.echo(f"wrote {path} ({idx.n} documents)")
    if mechanism in ("semantic", "all"):
        provider = harness.build_embedding_provider(config)
        idx = retrieval.build_semantic_index(
            train, provider, config.embedding.instruction
        )
        path = config.cache_dir / f"{config.dataset.name}-semantic.json"
        retrieval.save_semantic_index(idx, path)
        click.echo(f"wrote {path} ({len(idx.ids)} embeddings, d={idx.vectors.shape[1]})")


@main.command(name="eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="validation", show_default=True,
              type=click.Choice(["validation", "test"]))
@click.option("--mechanism", default=None, help="mechanism kind to evaluate")
@click.option("--k", type=int, default=None)
@click.option("--seed", type=int, default=None, help="override the fixed-random seed")
@click.option("--model", default=None, help="override the model id")
@click.option("--replay-only", is_flag=True, help="serve every call from the cache")
@click.option("--out", "out_dir", default=None, type=click.Path())
def eval_command(config_path, split, mechanism, k, seed, model, replay_only, out_dir):
    """Evaluate one (mechanism, k) configuration on a split."""
    config = _apply_overrides(_load(config_path), seed, model, replay_only)
    try:
        report = harness.run_eval(
            config, split=split, mechanism=_pick_mechanism(config, mechanism), k=k
        )
    except Exception as exc:
        raise click.ClickException(str(exc))
    payload = report.to_payload()
    written = harness.write_report(payload, out_dir or config.report_dir)
    result = report.result
    click.echo(
        f"{report.dataset}/{split} {report.mechanism} k={report.k}: "
        f"P={result.precision:.4f} R={result.recall:.4f} F={result.f1:.4f}"
    )
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="validation", show_default=True,
              type=click.Choice(["validation", "test"]))
@click.option("--mechanism", "mechanisms", multiple=True,
              help="restrict to these mechanism kinds (repeatable)")
@click.option("--seed", type=int, default=None)
@click.option("--model", default=None)
@click.option("--replay-only", is_flag=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
def sweep(config_path, split, mechanisms, seed, model, replay_only, out_dir):
    """Run the k sweep over the configured grid and report best rows."""
    config = _apply_overrides(_load(config_path), seed, model, replay_only)
    selected = None
    if mechanisms:
        selected = [_pick_mechanism(config, kind) for kind in mechanisms]
    try:
        report = harness.sweep_k(config, split=split, mechanisms=selected)
    except Exception as exc:
        raise click.ClickException(str(exc))
    payload = report.to_payload()
    written = harness.write_report(payload, out_dir or config.report_dir)
    for mechanism in sorted(report.best):
        row = report.best[mechanism]
        click.echo(f"best {mechanism}: k={row['k']} F={row['f1']:.4f}")
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(results_path, out_dir):
    """Regenerate report files from a saved results.json; fully deterministic."""
    payload = json.loads(Path(results_path).read_text(encoding="utf-8"))
    try:
        written = harness.write_report(payload, out_dir)
    except OSError as exc:
        raise click.ClickException(str(exc))
    for path in written:
        click.echo(f"wrote {path}")


@main.group()
def cache():
    """Inspect or warm the response cache."""


@cache.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def inspect(config_path):
    """Print entry counts for every cache file under the cache directory."""
    config = _load(config_path)
    files = sorted(config.cache_dir.glob("*.jsonl")) if config.cache_dir.exists() else []
    if not files:
        click.echo(f"no cache files under {config.cache_dir}")
        return
    for path in files:
        store = ResponseCache(path)
        models = Counter(entry["model"] for entry in store.entries())
        detail = ", ".join(f"{m}: {c}" for m, c in sorted(models.items()))
        click.echo(f"{path}: {len(store)} entries ({detail})")


@cache.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="validation", show_default=True,
              type=click.Choice(["validation", "test"]))
@click.option("--mechanism", default=None)
@click.option("--k", type=int, default=None)
def warm(config_path, split, mechanism, k):
    """Run the completions for a split so later runs replay from the cache."""
    config = _load(config_path)
    try:
        run = harness.run_eval(
            config, split=split, mechanism=_pick_mechanism(config, mechanism), k=k
        )
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"cache warm: {run.cache['misses']} new entries, {run.cache['hits']} hits"
    )


if __name__ == "__main__":
    sys.exit(main())
