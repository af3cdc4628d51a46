"""Dataset loading, validation and normalization.

Supported inputs: CoNLL-style BIO files (token per line, blank-line
sentence breaks), and a YAML/JSON document format where each example
carries its text and a list of ``{segment, label}`` entities.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import yaml

from .normalize import Normalizer

_BIO_TAG_RE = re.compile(r"^([BI])-(.+)$")


class CorpusError(ValueError):
    """Raised for malformed dataset files or invariant violations."""


@dataclass(frozen=True, order=True)
class Entity:
    """A mention: the exact text segment plus its label."""

    segment: str
    label: str


@dataclass(frozen=True)
class Example:
    """One annotated text with its (deduplicated) entity set."""

    id: str
    text: str
    entities: frozenset[Entity]


@dataclass(frozen=True)
class LabelSet:
    """Ordered, distinct, lowercase label names.

    Order is meaningful: it is the order labels are listed in the prompt
    definition line.
    """

    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise CorpusError("label set must not be empty")
        seen = set()
        for label in self.labels:
            if not label or label != label.lower():
                raise CorpusError(f"invalid label {label!r}: must be non-empty lowercase")
            if label in seen:
                raise CorpusError(f"duplicate label {label!r}")
            seen.add(label)

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def canonical(self, label: str) -> str | None:
        """Case-insensitive lookup returning the canonical spelling, or None."""
        folded = label.strip().lower()
        return folded if folded in self.labels else None


@dataclass(frozen=True)
class Dataset:
    name: str
    label_set: LabelSet
    examples: tuple[Example, ...]

    def __len__(self) -> int:
        return len(self.examples)

    def by_id(self) -> dict[str, Example]:
        return {ex.id: ex for ex in self.examples}


def validate_example(example: Example, label_set: LabelSet) -> None:
    """Check the loader invariants: non-empty text, segments in text, known labels."""
    if not example.text:
        raise CorpusError(f"example {example.id}: empty text")
    for entity in example.entities:
        if not entity.segment:
            raise CorpusError(f"example {example.id}: empty entity segment")
        if entity.segment not in example.text:
            raise CorpusError(
                f"example {example.id}: segment {entity.segment!r} not found in text"
            )
        if entity.label not in label_set:
            raise CorpusError(
                f"example {example.id}: unknown label {entity.label!r}"
            )


def _validate_dataset(dataset: Dataset) -> Dataset:
    seen_ids = set()
    for example in dataset.examples:
        if example.id in seen_ids:
            raise CorpusError(f"duplicate example id {example.id!r}")
        seen_ids.add(example.id)
        validate_example(example, dataset.label_set)
    return dataset


def _entities_from_runs(
    tokens: list[str], runs: list[tuple[int, int, str]]
) -> frozenset[Entity]:
    return frozenset(
        Entity(segment=" ".join(tokens[start:end]), label=label)
        for start, end, label in runs
    )


def parse_bio(
    lines: Iterable[str],
    label_set: LabelSet,
    tag_map: Mapping[str, str] | None = None,
    strict: bool = False,
    name: str = "corpus",
) -> Dataset:
    """Parse BIO-tagged lines into a Dataset.

    Lines hold whitespace-separated columns with the token in column 0 and
    the tag in the last column; blank lines separate sentences and
    ``-DOCSTART-`` marker lines are skipped. ``tag_map`` translates raw tag
    types (e.g. ``PER``) to label names (e.g. ``person``); without it the
    raw type itself must be a member of ``label_set``.

    In lenient mode (default) an ``I-`` tag that does not continue a run of
    the same type opens a new run; strict mode rejects it.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()

    examples: list[Example] = []
    tokens: list[str] = []
    runs: list[tuple[int, int, str]] = []
    open_run: tuple[int, str] | None = None  # (start index, label)

    def close_run(end: int) -> None:
        nonlocal open_run
        if open_run is not None:
            runs.append((open_run[0], end, open_run[1]))
            open_run = None

    def flush_sentence() -> None:
        nonlocal tokens, runs
        close_run(len(tokens))
        if tokens:
            examples.append(
                Example(
                    id=f"{name}:{len(examples):04d}",
                    text=" ".join(tokens),
                    entities=_entities_from_runs(tokens, runs),
                )
            )
        tokens = []
        runs = []

    def resolve_label(raw: str, lineno: int) -> str:
        if tag_map is not None:
            label = tag_map.get(raw)
            if label is None:
                raise CorpusError(f"line {lineno}: unknown entity tag {raw!r}")
        else:
            label = raw
        if label not in label_set:
            raise CorpusError(
                f"line {lineno}: tag {raw!r} maps to unknown label {label!r}"
            )
        return label

    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped:
            flush_sentence()
            continue
        columns = stripped.split()
        token, tag = columns[0], columns[-1]
        if token == "-DOCSTART-":
            continue
        if len(columns) < 2:
            raise CorpusError(f"line {lineno}: expected token and tag, got {line!r}")
        if tag == "O":
            close_run(len(tokens))
        else:
            match = _BIO_TAG_RE.match(tag)
            if match is None:
                raise CorpusError(f"line {lineno}: malformed tag {tag!r}")
            prefix, raw = match.groups()
            label = resolve_label(raw, lineno)
            if prefix == "B":
                close_run(len(tokens))
                open_run = (len(tokens), label)
            else:  # I-
                if open_run is None or open_run[1] != label:
                    if strict:
                        raise CorpusError(
                            f"line {lineno}: I-{raw} does not continue a run of the same type"
                        )
                    close_run(len(tokens))
                    open_run = (len(tokens), label)
        tokens.append(token)
    flush_sentence()

    return _validate_dataset(Dataset(name=name, label_set=label_set, examples=tuple(examples)))


def emit_bio(dataset: Dataset, tag_map: Mapping[str, str] | None = None) -> str:
    """Write a Dataset back out as two-column BIO text.

    ``tag_map`` is the same raw-tag -> label mapping used at parse time; it
    is inverted here so emitted tag types match the source encoding. Each
    entity is placed at its first free token span, longest segments first.
    """
    inverse: dict[str, str] = {}
    if tag_map:
        for raw, label in tag_map.items():
            inverse.setdefault(label, raw)

    def tag_type(label: str) -> str:
        raw = inverse.get(label, label)
        if any(ch.isspace() for ch in raw):
            raise CorpusError(
                f"label {label!r} needs a whitespace-free tag code; provide tag_map"
            )
        return raw

    blocks: list[str] = []
    for example in dataset.examples:
        tokens = example.text.split(" ")
        tags = ["O"] * len(tokens)
        taken = [False] * len(tokens)
        ordered = sorted(
            example.entities,
            key=lambda e: (-len(e.segment.split(" ")), e.segment, e.label),
        )
        for entity in ordered:
            seg_tokens = entity.segment.split(" ")
            width = len(seg_tokens)
            for start in range(0, len(tokens) - width + 1):
                if tokens[start : start + width] != seg_tokens:
                    continue
                if any(taken[start : start + width]):
                    continue
                raw = tag_type(entity.label)
                tags[start] = f"B-{raw}"
                for i in range(start + 1, start + width):
                    tags[i] = f"I-{raw}"
                for i in range(start, start + width):
                    taken[i] = True
                break
            else:
                raise CorpusError(
                    f"example {example.id}: no free span for segment {entity.segment!r}"
                )
        blocks.append("\n".join(f"{tok} {tag}" for tok, tag in zip(tokens, tags)))
    return "\n\n".join(blocks) + "\n"


def parse_yaml_examples(document: str, name: str | None = None) -> Dataset:
    """Parse the YAML (or JSON, same schema) example document format.

    Expected shape::

        name: my-dataset        # optional, also overridable via argument
        labels: [person, location]
        examples:
          - id: my-dataset:0000   # optional; assigned when missing
            text: John lives in Paris
            entities:
              - {segment: John, label: person}
    """
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise CorpusError(f"unparseable document: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorpusError("document root must be a mapping")
    labels = doc.get("labels")
    if not isinstance(labels, list):
        raise CorpusError("document must carry a 'labels' list")
    label_set = LabelSet(tuple(str(lbl) for lbl in labels))
    records = doc.get("examples")
    if not isinstance(records, list):
        raise CorpusError("document must carry an 'examples' list")
    dataset_name = name or str(doc.get("name") or "corpus")

    examples = []
    for i, record in enumerate(records):
        if not isinstance(record, dict) or "text" not in record:
            raise CorpusError(f"example #{i}: expected a mapping with a 'text' field")
        example_id = str(record.get("id") or f"{dataset_name}:{i:04d}")
        entities = []
        for raw in record.get("entities") or []:
            if not isinstance(raw, dict) or "segment" not in raw or "label" not in raw:
                raise CorpusError(
                    f"example {example_id}: entity records need 'segment' and 'label'"
                )
            entities.append(Entity(segment=str(raw["segment"]), label=str(raw["label"])))
        examples.append(
            Example(id=example_id, text=str(record["text"]), entities=frozenset(entities))
        )

    return _validate_dataset(
        Dataset(name=dataset_name, label_set=label_set, examples=tuple(examples))
    )


def dump_yaml_examples(dataset: Dataset) -> str:
    """Serialize a Dataset to the YAML document format (round-trips exactly)."""
    doc = {
        "name": dataset.name,
        "labels": list(dataset.label_set.labels),
        "examples": [
            {
                "id": ex.id,
                "text": ex.text,
                "entities": [
                    {"segment": e.segment, "label": e.label}
                    for e in sorted(ex.entities)
                ],
            }
            for ex in dataset.examples
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def load_label_config(path: str | Path) -> tuple[LabelSet, dict[str, str]]:
    """Read a label config file: ``labels`` (prompt order) and ``tags`` map."""
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "labels" not in doc:
        raise CorpusError(f"{path}: expected a mapping with a 'labels' list")
    label_set = LabelSet(tuple(str(lbl) for lbl in doc["labels"]))
    tags = {str(k): str(v) for k, v in (doc.get("tags") or {}).items()}
    for raw, label in tags.items():
        if label not in label_set:
            raise CorpusError(f"{path}: tag {raw!r} maps to unknown label {label!r}")
    return label_set, tags


def read_bio_file(
    path: str | Path,
    label_set: LabelSet,
    tag_map: Mapping[str, str] | None = None,
    strict: bool = False,
    name: str | None = None,
) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    return parse_bio(
        text, label_set, tag_map=tag_map, strict=strict, name=name or Path(path).stem
    )


def read_yaml_file(path: str | Path, name: str | None = None) -> Dataset:
    return parse_yaml_examples(Path(path).read_text(encoding="utf-8"), name=name)


def normalize_copy(dataset: Dataset, normalizer: Normalizer) -> Dataset:
    """Return a retrieval-only copy with normalized texts and original ids.

    Entities are carried through untouched: the copy exists purely so the
    lexical index can match inflected forms, and its ids map results back
    to the original examples. The input dataset is not modified.
    """
    examples = tuple(
        Example(id=ex.id, text=normalizer.text(ex.text), entities=ex.entities)
        for ex in dataset.examples
    )
    return Dataset(name=dataset.name, label_set=dataset.label_set, examples=examples)
