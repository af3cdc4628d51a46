"""Prompt rendering and model-output parsing.

The prompt lists the allowed labels, the retrieved examples with their
answers as numbered ``segment (label)`` lines, and the input text with an
empty answer slot. The parser is the mirror image: it is total over
arbitrary model text and only keeps lines that name a valid label and a
segment actually present in the input text.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .corpus import Entity, Example, LabelSet

# A candidate line: number, dot, segment, final parenthesized label. The
# label group cannot contain parentheses, so a segment may carry its own.
_ENTITY_LINE_RE = re.compile(r"^\s*\d+\.\s*(.+?)\s*\(([^()]+)\)\s*$")

DISCARD_NOT_ENTITY_LINE = "not-entity-line"
DISCARD_INVALID_LABEL = "invalid-label"
DISCARD_SEGMENT_NOT_IN_INPUT = "segment-not-in-input"


class RecognitionError(RuntimeError):
    """Model call failed; carries the prompt digest for replay."""

    def __init__(self, message: str, prompt_digest: str):
        super().__init__(message)
        self.prompt_digest = prompt_digest


@dataclass(frozen=True)
class PromptTemplate:
    """Immutable prompt skeleton loaded from a versioned asset file."""

    version: str
    definition_line: str
    example_header: str
    answer_header: str
    entity_line: str


def load_template(path: str | Path) -> PromptTemplate:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return PromptTemplate(
        version=str(doc["version"]),
        definition_line=str(doc["definition_line"]),
        example_header=str(doc["example_header"]),
        answer_header=str(doc["answer_header"]),
        entity_line=str(doc["entity_line"]),
    )


def default_template() -> PromptTemplate:
    text = resources.files("fewner").joinpath("templates/ner_prompt_v1.yaml").read_text(
        encoding="utf-8"
    )
    doc = yaml.safe_load(text)
    return PromptTemplate(
        version=str(doc["version"]),
        definition_line=str(doc["definition_line"]),
        example_header=str(doc["example_header"]),
        answer_header=str(doc["answer_header"]),
        entity_line=str(doc["entity_line"]),
    )


_DEFAULT_TEMPLATE: PromptTemplate | None = None


def _template(template: PromptTemplate | None) -> PromptTemplate:
    global _DEFAULT_TEMPLATE
    if template is not None:
        return template
    if _DEFAULT_TEMPLATE is None:
        _DEFAULT_TEMPLATE = default_template()
    return _DEFAULT_TEMPLATE


def _label_listing(label_set: LabelSet) -> str:
    labels = list(label_set)
    if len(labels) == 1:
        return labels[0]
    return ", ".join(labels[:-1]) + ", or " + labels[-1]


def _ordered_entities(entities: Iterable[Entity], text: str) -> list[Entity]:
    # first occurrence in the text, then lexicographic, for stable rendering
    return sorted(entities, key=lambda e: (text.find(e.segment), e.segment, e.label))


def render_answer_block(
    entities: Iterable[Entity], text: str, template: PromptTemplate | None = None
) -> str:
    """Numbered entity lines for one example (empty string for no entities)."""
    tpl = _template(template)
    return "\n".join(
        tpl.entity_line.format(index=i, segment=e.segment, label=e.label)
        for i, e in enumerate(_ordered_entities(entities, text), start=1)
    )


def render_prompt(
    label_set: LabelSet,
    examples: Sequence[Example],
    input_text: str,
    template: PromptTemplate | None = None,
) -> str:
    """Render the full few-shot prompt; deterministic for identical inputs."""
    if not len(label_set):
        raise ValueError("cannot render a prompt with an empty label set")
    tpl = _template(template)
    blocks = [tpl.definition_line.format(labels=_label_listing(label_set))]
    for i, example in enumerate(examples, start=1):
        block = (
            tpl.example_header.format(index=i, text=example.text)
            + "\n"
            + tpl.answer_header
        )
        answers = render_answer_block(example.entities, example.text, tpl)
        if answers:
            block += "\n" + answers
        blocks.append(block)
    blocks.append(
        tpl.example_header.format(index=len(examples) + 1, text=input_text)
        + "\n"
        + tpl.answer_header
    )
    return "\n\n".join(blocks)


def final_input_text(prompt: str, template: PromptTemplate | None = None) -> str:
    """Recover the input text from a rendered prompt's closing block."""
    tpl = _template(template)
    lines = prompt.splitlines()
    if len(lines) < 2 or lines[-1] != tpl.answer_header:
        raise ValueError("prompt does not end with an empty answer block")
    match = re.match(r"^Example \d+: (.*)$", lines[-2])
    if match is None:
        raise ValueError("prompt's final block has no example header")
    return match.group(1)


@dataclass(frozen=True)
class ParsedOutput:
    """Validated entity set plus every line that was rejected, with reasons."""

    entities: frozenset[Entity]
    discarded_lines: tuple[tuple[str, str], ...]


def parse_output(raw: str, input_text: str, label_set: LabelSet) -> ParsedOutput:
    """Turn arbitrary model text into entities; never raises.

    Keeps a numbered ``segment (label)`` line only when the label matches
    the label set case-insensitively and the segment occurs verbatim in
    the input text. Everything else lands in ``discarded_lines``.
    """
    entities: set[Entity] = set()
    discarded: list[tuple[str, str]] = []
    for line in raw.splitlines():
        match = _ENTITY_LINE_RE.match(line)
        if match is None:
            discarded.append((line, DISCARD_NOT_ENTITY_LINE))
            continue
        segment, raw_label = match.groups()
        label = label_set.canonical(raw_label)
        if label is None:
            discarded.append((line, DISCARD_INVALID_LABEL))
            continue
        if segment not in input_text:
            discarded.append((line, DISCARD_SEGMENT_NOT_IN_INPUT))
            continue
        entities.add(Entity(segment=segment, label=label))
    return ParsedOutput(entities=frozenset(entities), discarded_lines=tuple(discarded))


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def recognize(
    model,
    label_set: LabelSet,
    examples: Sequence[Example],
    input_text: str,
    template: PromptTemplate | None = None,
) -> ParsedOutput:
    """Render, query the model handle, and parse its output.

    ``model`` is anything with ``generate(prompt) -> str``. Failures are
    wrapped in RecognitionError carrying the prompt digest so the call can
    be replayed against a response cache.
    """
    prompt = render_prompt(label_set, examples, input_text, template)
    try:
        raw = model.generate(prompt)
    except Exception as exc:
        digest = prompt_digest(prompt)
        raise RecognitionError(
            f"model call failed for prompt {digest[:12]}: {exc}", digest
        ) from exc
    return parse_output(raw, input_text, label_set)
