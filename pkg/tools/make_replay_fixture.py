#!/usr/bin/env python3
"""Build the committed replay fixture under tests/fixtures/replay/.

Runs the pipeline once over a 20-example mini split with a deterministic,
deliberately imperfect model (misses every 3rd example's last entity,
fabricates one non-entity on every 4th, adds noise lines on every 5th),
captures every response into the cache file, and freezes the resulting
score in reference.json. The committed cache then replays byte-exactly
with no model at all.

The script prints a per-example count table plus an independent recount
so the frozen reference can be checked by hand before committing.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import yaml

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from make_datasets import POLITICS, write_labels, write_split  # noqa: E402

import random  # noqa: E402

from fewner import evaluation, harness  # noqa: E402
from fewner.corpus import load_label_config, read_bio_file  # noqa: E402
from fewner.modelclient import (  # noqa: E402
    CachingCompletionClient,
    CallableCompletionClient,
    ModelHandle,
)
from fewner.recognition import final_input_text, parse_output  # noqa: E402

FIXTURE = HERE.parent / "tests" / "fixtures" / "replay"
PROVIDER = "fixture"
MODEL = "fixture-v1"


def crafted_response(idx: int, example, first_label: str) -> str:
    ordered = sorted(
        example.entities, key=lambda e: (example.text.find(e.segment), e.segment, e.label)
    )
    kept = list(ordered)
    if idx % 3 == 1 and kept:
        kept.pop()  # false negative
    lines = [f"{i}. {e.segment} ({e.label})" for i, e in enumerate(kept, start=1)]
    if idx % 4 == 2:
        lines.append(f"{len(kept) + 1}. . ({first_label})")  # false positive
    if idx % 5 == 3:
        lines.insert(0, "Here are the entities I found:")
        lines.append(f"{len(lines)}. Flux Capacitor (gadget)")
    return "\n".join(lines)


def main() -> None:
    FIXTURE.mkdir(parents=True, exist_ok=True)
    (FIXTURE / "cache").mkdir(exist_ok=True)
    for stale in (FIXTURE / "cache").glob("*.jsonl"):
        stale.unlink()

    rng = random.Random(4242)
    seen: set[str] = set()
    write_labels(FIXTURE / "labels.yaml", POLITICS)
    write_split(FIXTURE / "train.bio", rng, POLITICS, 30, seen, False, None)
    write_split(FIXTURE / "dev.bio", rng, POLITICS, 20, seen, False, None)

    config_doc = {
        "dataset": {
            "name": "replay",
            "format": "bio",
            "labels": "labels.yaml",
            "train": "train.bio",
            "validation": "dev.bio",
        },
        "mechanisms": ["bm25"],
        "k": 3,
        "model": {"provider": PROVIDER, "name": MODEL},
        "embedding": {"provider": "hash", "dim": 64, "instruction": None},
        "cache_dir": "cache",
        "report_dir": "reports",
        "replay_only": True,
        "limits": {"max_concurrency": 1},
    }
    (FIXTURE / "config.yaml").write_text(yaml.safe_dump(config_doc), encoding="utf-8")

    label_set, tags = load_label_config(FIXTURE / "labels.yaml")
    dev = read_bio_file(FIXTURE / "dev.bio", label_set, tag_map=tags, name="replay-validation")
    first_label = list(label_set)[0]
    index_of = {ex.text: i for i, ex in enumerate(dev.examples)}
    by_text = {ex.text: ex for ex in dev.examples}

    def model_fn(prompt: str) -> str:
        text = final_input_text(prompt)
        return crafted_response(index_of[text], by_text[text], first_label)

    config = harness.load_config(FIXTURE / "config.yaml")
    cache_path = FIXTURE / "cache" / f"{PROVIDER}__{MODEL}.jsonl"

    def build_with_crafted_model(cfg, gold_sources=(), replay_only=None):
        caching = CachingCompletionClient(
            CallableCompletionClient(model_fn),
            cache_path,
            provider_name=PROVIDER,
            template_version=harness.load_run_template(cfg).version,
        )
        return ModelHandle(caching, MODEL), caching

    original = harness.build_model
    harness.build_model = build_with_crafted_model
    try:
        report = harness.run_eval(config, split="validation")
    finally:
        harness.build_model = original

    # independent recount: arithmetic straight from the crafting rules
    tp = fp = fn = 0
    print(f"{'idx':>3} {'gold':>4} {'tp':>3} {'fp':>3} {'fn':>3}")
    for idx, example in enumerate(dev.examples):
        gold = len(example.entities)
        miss = 1 if idx % 3 == 1 and gold else 0
        fab = 1 if idx % 4 == 2 else 0
        tp_i, fp_i, fn_i = gold - miss, fab, miss
        # cross-check through the real parser and scorer
        parsed = parse_output(
            crafted_response(idx, example, first_label), example.text, label_set
        )
        counts = evaluation.compare(parsed.entities, example.entities)
        assert (counts.tp, counts.fp, counts.fn) == (tp_i, fp_i, fn_i), idx
        tp, fp, fn = tp + tp_i, fp + fp_i, fn + fn_i
        print(f"{idx:>3} {gold:>4} {tp_i:>3} {fp_i:>3} {fn_i:>3}")

    expected = evaluation.result_from_counts(evaluation.EvalCounts(tp, fp, fn))
    got = report.result
    assert (got.counts.tp, got.counts.fp, got.counts.fn) == (tp, fp, fn)
    assert got == expected

    reference = {
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "precision": expected.precision,
        "recall": expected.recall,
        "f1": expected.f1,
        "examples": len(dev.examples),
        "cache_entries": len(cache_path.read_text().splitlines()),
    }
    (FIXTURE / "reference.json").write_text(
        json.dumps(reference, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"\ntotals: tp={tp} fp={fp} fn={fn}")
    print(f"precision={expected.precision!r} recall={expected.recall!r} f1={expected.f1!r}")
    print(f"wrote {FIXTURE / 'reference.json'}")


if __name__ == "__main__":
    main()
