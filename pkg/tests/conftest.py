from __future__ import annotations

from pathlib import Path

import pytest

from fewner.corpus import (
    Dataset,
    Entity,
    Example,
    LabelSet,
    load_label_config,
    read_bio_file,
)

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "data"


def mk_example(example_id: str, text: str, entities=()) -> Example:
    return Example(
        id=example_id,
        text=text,
        entities=frozenset(Entity(segment=s, label=l) for s, l in entities),
    )


def mk_dataset(records, labels, name="toy") -> Dataset:
    """records: list of (text, [(segment, label), ...])."""
    examples = tuple(
        mk_example(f"{name}:{i:04d}", text, entities)
        for i, (text, entities) in enumerate(records)
    )
    return Dataset(name=name, label_set=LabelSet(tuple(labels)), examples=examples)


@pytest.fixture(scope="session")
def politics_labels():
    return load_label_config(DATA / "crossner" / "politics" / "labels.yaml")


@pytest.fixture(scope="session")
def politics_train(politics_labels):
    label_set, tags = politics_labels
    return read_bio_file(
        DATA / "crossner" / "politics" / "train.bio",
        label_set,
        tag_map=tags,
        name="politics-train",
    )


@pytest.fixture(scope="session")
def politics_dev(politics_labels):
    label_set, tags = politics_labels
    return read_bio_file(
        DATA / "crossner" / "politics" / "dev.bio",
        label_set,
        tag_map=tags,
        name="politics-dev",
    )


@pytest.fixture(scope="session")
def reuters_valid():
    label_set, tags = load_label_config(DATA / "conll2003" / "labels.yaml")
    return read_bio_file(
        DATA / "conll2003" / "valid.bio", label_set, tag_map=tags, name="reuters-valid"
    )


def all_fixture_datasets():
    """Every shipped (labels, tag_map, dataset) triple, freshly loaded."""
    out = []
    for labels_path in sorted(DATA.glob("**/labels.yaml")):
        label_set, tags = load_label_config(labels_path)
        for bio_path in sorted(labels_path.parent.glob("*.bio")):
            name = f"{labels_path.parent.name}-{bio_path.stem}"
            out.append(
                (label_set, tags, read_bio_file(bio_path, label_set, tag_map=tags, name=name))
            )
    return out
