"""Experiment orchestration.

Wires datasets, retrieval mechanisms, the model client and the scorer
into runnable experiments: single-split evaluation, the validation k
sweep, and deterministic report files. Every model call goes through the
response cache, which doubles as the resume checkpoint: an aborted run
never re-queries completions it already paid for.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import yaml

from . import evaluation, recognition, retrieval
from .corpus import (
    CorpusError,
    Dataset,
    Example,
    load_label_config,
    read_bio_file,
    read_yaml_file,
)
from .modelclient import (
    CachingCompletionClient,
    CallableCompletionClient,
    DecodingParams,
    FixedCompletionClient,
    GoldEchoCompletionClient,
    HttpCompletionClient,
    HttpEmbeddingProvider,
    HashEmbeddingProvider,
    ModelHandle,
    PrecomputedEmbeddingProvider,
    ScriptedCompletionClient,
    ThrottledCompletionClient,
)
from .normalize import Normalizer, build_normalizer
from .recognition import PromptTemplate, RecognitionError, load_template

# Experiment defaults shipped with the repo; configs/paper-defaults.yaml
# mirrors this mapping and a test keeps the two in sync.
PAPER_DEFAULTS = {
    "bm25": {"k1": 1.2, "b": 0.75},
    "mmr_lambdas": [0.0, 0.5],
    "rrf_c": 60.0,
    "k_range": [1, 25],
    "query_instruction": "Represent this sentence for searching relevant passages:",
    "fixed_random_seed": 1,
}

MECHANISM_KINDS = ("bm25", "semantic", "mmr", "hybrid", "random", "none")


class HarnessError(RuntimeError):
    """Configuration or orchestration failure."""


class LeakageError(HarnessError):
    """A retrieved example id is not a training-split id."""


@dataclass(frozen=True)
class MechanismConfig:
    kind: str
    k1: float = PAPER_DEFAULTS["bm25"]["k1"]
    b: float = PAPER_DEFAULTS["bm25"]["b"]
    mmr_lambda: float = 0.5
    rrf_c: float = PAPER_DEFAULTS["rrf_c"]
    seed: int = PAPER_DEFAULTS["fixed_random_seed"]

    def __post_init__(self):
        if self.kind not in MECHANISM_KINDS:
            raise HarnessError(f"unknown mechanism kind {self.kind!r}")

    @property
    def label(self) -> str:
        # mmr is the one kind swept with several parameter values at once
        if self.kind == "mmr":
            return f"mmr(lambda={self.mmr_lambda})"
        return self.kind


@dataclass
class DatasetConfig:
    name: str
    format: str
    train: Path
    validation: Path | None = None
    test: Path | None = None
    labels: Path | None = None
    strict_bio: bool = False


@dataclass
class ModelConfig:
    provider: str = "stub-gold"
    model: str = "stub"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    endpoint: str | None = None
    auth_env: str | None = None
    fixed_text: str = ""
    scripted_path: Path | None = None

    @property
    def decoding(self) -> DecodingParams:
        return DecodingParams(
            temperature=self.temperature, max_output_tokens=self.max_output_tokens
        )


@dataclass
class EmbeddingConfig:
    provider: str = "hash"
    dim: int = 64
    path: Path | None = None
    endpoint: str | None = None
    model: str | None = None
    auth_env: str | None = None
    instruction: str | None = None


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    mechanisms: tuple[MechanismConfig, ...]
    model: ModelConfig = field(default_factory=ModelConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    normalizer_spec: dict | None = None
    k: int | None = None
    k_range: tuple[int, int] = (1, 25)
    cache_dir: Path = Path(".fewner-cache")
    report_dir: Path = Path("reports")
    example_order: str = "most-similar-first"
    max_examples: int | None = None
    max_concurrency: int = 1
    replay_only: bool = False
    template_path: Path | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode("utf-8")
        ).hexdigest()


def _as_mechanism(entry, defaults: dict) -> MechanismConfig:
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict) or "kind" not in entry:
        raise HarnessError(f"mechanism entries need a kind: {entry!r}")
    return MechanismConfig(
        kind=str(entry["kind"]),
        k1=float(entry.get("k1", defaults["bm25"]["k1"])),
        b=float(entry.get("b", defaults["bm25"]["b"])),
        mmr_lambda=float(entry.get("lambda", entry.get("mmr_lambda", 0.5))),
        rrf_c=float(entry.get("c", entry.get("rrf_c", defaults["rrf_c"]))),
        seed=int(entry.get("seed", defaults["fixed_random_seed"])),
    )


def _resolve_path(base: Path, value) -> Path:
    path = Path(str(value))
    return path if path.is_absolute() else base / path


def _require_exists(path: Path | None, what: str) -> None:
    if path is not None and not path.exists():
        raise HarnessError(f"{what} path does not exist: {path}")


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment config; paths resolve against the file."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise HarnessError(f"{path}: config root must be a mapping")
    base = path.parent

    ds = raw.get("dataset")
    if not isinstance(ds, dict) or "train" not in ds:
        raise HarnessError(f"{path}: config needs dataset.train")
    dataset = DatasetConfig(
        name=str(ds.get("name", "dataset")),
        format=str(ds.get("format", "bio")),
        train=_resolve_path(base, ds["train"]),
        validation=_resolve_path(base, ds["validation"]) if ds.get("validation") else None,
        test=_resolve_path(base, ds["test"]) if ds.get("test") else None,
        labels=_resolve_path(base, ds["labels"]) if ds.get("labels") else None,
        strict_bio=bool(ds.get("strict_bio", False)),
    )
    if dataset.format not in ("bio", "yaml"):
        raise HarnessError(f"{path}: unknown dataset format {dataset.format!r}")
    if dataset.format == "bio" and dataset.labels is None:
        raise HarnessError(f"{path}: bio datasets need a labels config file")
    _require_exists(dataset.train, "train")
    _require_exists(dataset.validation, "validation")
    _require_exists(dataset.test, "test")
    _require_exists(dataset.labels, "labels")

    mechanisms = tuple(
        _as_mechanism(entry, PAPER_DEFAULTS)
        for entry in (raw.get("mechanisms") or ["bm25"])
    )

    model_raw = raw.get("model") or {}
    model = ModelConfig(
        provider=str(model_raw.get("provider", "stub-gold")),
        model=str(model_raw.get("name", model_raw.get("model", "stub"))),
        temperature=float(model_raw.get("temperature", 0.0)),
        max_output_tokens=int(model_raw.get("max_output_tokens", 1024)),
        endpoint=model_raw.get("endpoint"),
        auth_env=model_raw.get("auth_env"),
        fixed_text=str(model_raw.get("fixed_text", "")),
        scripted_path=(
            _resolve_path(base, model_raw["scripted_path"])
            if model_raw.get("scripted_path")
            else None
        ),
    )
    _require_exists(model.scripted_path, "scripted responses")

    embedding_raw = raw.get("embedding") or {}
    embedding = EmbeddingConfig(
        provider=str(embedding_raw.get("provider", "hash")),
        dim=int(embedding_raw.get("dim", 64)),
        path=_resolve_path(base, embedding_raw["path"]) if embedding_raw.get("path") else None,
        endpoint=embedding_raw.get("endpoint"),
        model=embedding_raw.get("model"),
        auth_env=embedding_raw.get("auth_env"),
        instruction=embedding_raw.get(
            "instruction", PAPER_DEFAULTS["query_instruction"]
        ),
    )
    _require_exists(embedding.path, "precomputed embeddings")

    k_range_raw = raw.get("k_range", PAPER_DEFAULTS["k_range"])
    if (
        not isinstance(k_range_raw, (list, tuple))
        or len(k_range_raw) != 2
        or int(k_range_raw[0]) < 1
        or int(k_range_raw[1]) < int(k_range_raw[0])
    ):
        raise HarnessError(f"{path}: k_range must be [lo, hi] with 1 <= lo <= hi")

    limits = raw.get("limits") or {}
    template_path = (
        _resolve_path(base, raw["template"]) if raw.get("template") else None
    )
    _require_exists(template_path, "template")

    order = str(raw.get("example_order", "most-similar-first"))
    if order not in ("most-similar-first", "most-similar-last"):
        raise HarnessError(f"{path}: unknown example_order {order!r}")

    return ExperimentConfig(
        dataset=dataset,
        mechanisms=mechanisms,
        model=model,
        embedding=embedding,
        normalizer_spec=raw.get("normalizer"),
        k=int(raw["k"]) if raw.get("k") is not None else None,
        k_range=(int(k_range_raw[0]), int(k_range_raw[1])),
        cache_dir=_resolve_path(base, raw.get("cache_dir", ".fewner-cache")),
        report_dir=_resolve_path(base, raw.get("report_dir", "reports")),
        example_order=order,
        max_examples=limits.get("max_examples"),
        max_concurrency=int(limits.get("max_concurrency", 1)),
        replay_only=bool(raw.get("replay_only", False)),
        template_path=template_path,
        raw=raw,
    )


# ---------------------------------------------------------------------------
# Component assembly


def load_split(config: ExperimentConfig, split: str) -> Dataset:
    paths = {
        "train": config.dataset.train,
        "validation": config.dataset.validation,
        "test": config.dataset.test,
    }
    if split not in paths:
        raise HarnessError(f"unknown split {split!r}")
    path = paths[split]
    if path is None:
        raise HarnessError(f"config has no {split} split")
    name = f"{config.dataset.name}-{split}"
    if config.dataset.format == "bio":
        label_set, tag_map = load_label_config(config.dataset.labels)
        return read_bio_file(
            path,
            label_set,
            tag_map=tag_map,
            strict=config.dataset.strict_bio,
            name=name,
        )
    return read_yaml_file(path, name=name)


def build_embedding_provider(config: ExperimentConfig):
    emb = config.embedding
    if emb.provider == "hash":
        return HashEmbeddingProvider(dim=emb.dim)
    if emb.provider == "precomputed":
        if emb.path is None:
            raise HarnessError("precomputed embedding provider needs a path")
        return PrecomputedEmbeddingProvider(emb.path)
    if emb.provider == "http":
        if not emb.endpoint or not emb.model:
            raise HarnessError("http embedding provider needs endpoint and model")
        return HttpEmbeddingProvider(
            emb.endpoint, model=emb.model, auth_env=emb.auth_env
        )
    raise HarnessError(f"unknown embedding provider {emb.provider!r}")


def build_retriever(
    mechanism: MechanismConfig,
    train: Dataset,
    normalizer: Normalizer,
    provider_factory: Callable[[], object],
    instruction: str | None,
) -> retrieval.Retriever:
    kind = mechanism.kind
    if kind == "bm25":
        return retrieval.Bm25Retriever(
            train, normalizer, retrieval.Bm25Params(k1=mechanism.k1, b=mechanism.b)
        )
    if kind == "semantic":
        return retrieval.SemanticRetriever(train, provider_factory(), instruction)
    if kind == "mmr":
        return retrieval.MmrRetriever(
            train,
            provider_factory(),
            retrieval.MmrParams(lambda_=mechanism.mmr_lambda),
            instruction,
        )
    if kind == "hybrid":
        return retrieval.HybridRetriever(
            train,
            normalizer,
            provider_factory(),
            retrieval.Bm25Params(k1=mechanism.k1, b=mechanism.b),
            retrieval.RrfParams(c=mechanism.rrf_c),
            instruction,
        )
    if kind == "random":
        return retrieval.FixedRandomRetriever(train, seed=mechanism.seed)
    if kind == "none":
        return retrieval.NullRetriever()
    raise HarnessError(f"unknown mechanism kind {kind!r}")


def _sanitize(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "-" for ch in name)


def build_model(
    config: ExperimentConfig,
    gold_sources: Sequence[Dataset] = (),
    replay_only: bool | None = None,
) -> tuple[ModelHandle, CachingCompletionClient]:
    """Assemble inner client -> throttle -> cache, per the model config."""
    model_cfg = config.model
    replay = config.replay_only if replay_only is None else replay_only
    inner = None
    if not replay:
        if model_cfg.provider == "stub-gold":
            inner = GoldEchoCompletionClient.from_datasets(*gold_sources)
        elif model_cfg.provider == "stub-empty":
            inner = FixedCompletionClient("")
        elif model_cfg.provider == "stub-fixed":
            inner = FixedCompletionClient(model_cfg.fixed_text)
        elif model_cfg.provider == "scripted":
            if model_cfg.scripted_path is None:
                raise HarnessError("scripted model provider needs scripted_path")
            table = json.loads(model_cfg.scripted_path.read_text(encoding="utf-8"))
            default = table.pop("__default__", None)
            inner = ScriptedCompletionClient(table, default=default)
        elif model_cfg.provider in ("http-chat", "http-text"):
            if not model_cfg.endpoint:
                raise HarnessError("http model provider needs an endpoint")
            inner = HttpCompletionClient(
                model_cfg.endpoint,
                api_shape=model_cfg.provider.split("-", 1)[1],
                auth_env=model_cfg.auth_env,
            )
        else:
            raise HarnessError(f"unknown model provider {model_cfg.provider!r}")
        if config.max_concurrency > 1:
            inner = ThrottledCompletionClient(inner, config.max_concurrency)
    template_version = load_run_template(config).version
    cache_path = config.cache_dir / (
        f"{_sanitize(model_cfg.provider)}__{_sanitize(model_cfg.model)}.jsonl"
    )
    caching = CachingCompletionClient(
        inner,
        cache_path,
        provider_name=model_cfg.provider,
        template_version=template_version,
    )
    handle = ModelHandle(client=caching, model=model_cfg.model, decoding=model_cfg.decoding)
    return handle, caching


def load_run_template(config: ExperimentConfig) -> PromptTemplate:
    if config.template_path is not None:
        return load_template(config.template_path)
    return recognition.default_template()


# ---------------------------------------------------------------------------
# Evaluation runs

PromptHook = Callable[[Example, Sequence[Example], str], None]


@dataclass
class RunReport:
    dataset: str
    split: str
    mechanism: str
    descriptor: str
    k: int
    result: evaluation.EvalResult
    per_example: list[dict]
    cache: dict
    config_digest: str
    template_version: str
    aggregation: str = evaluation.AGGREGATION

    def to_payload(self) -> dict:
        return {
            "kind": "eval",
            "dataset": self.dataset,
            "split": self.split,
            "mechanism": self.mechanism,
            "descriptor": self.descriptor,
            "k": self.k,
            "result": evaluation.result_row(self.result),
            "per_example": self.per_example,
            "cache": self.cache,
            "config_digest": self.config_digest,
            "template_version": self.template_version,
            "aggregation": self.aggregation,
        }


def _check_k(config: ExperimentConfig, k: int, train_size: int, kind: str) -> None:
    if kind == "none":
        return
    if not 1 <= k <= train_size:
        raise HarnessError(
            f"k={k} outside [1, {train_size}] for the loaded training split"
        )


def _evaluate_examples(
    config: ExperimentConfig,
    train: Dataset,
    split_examples: Sequence[Example],
    retriever: retrieval.Retriever,
    mechanism: MechanismConfig,
    handle: ModelHandle,
    template: PromptTemplate,
    k: int,
    prompt_hook: PromptHook | None,
) -> list[dict]:
    train_ids = set(train.by_id())
    label_set = train.label_set

    def run_one(example: Example) -> dict:
        retrieved = (
            [] if mechanism.kind == "none" else retriever.retrieve(example.text, k)
        )
        leaked = [ex.id for ex in retrieved if ex.id not in train_ids]
        if leaked:
            raise LeakageError(
                f"retrieved ids outside the training split: {leaked[:3]}"
            )
        ordered = (
            list(reversed(retrieved))
            if config.example_order == "most-similar-last"
            else retrieved
        )
        prompt = recognition.render_prompt(label_set, ordered, example.text, template)
        if prompt_hook is not None:
            prompt_hook(example, retrieved, prompt)
        try:
            raw = handle.generate(prompt)
        except Exception as exc:
            digest = recognition.prompt_digest(prompt)
            raise RecognitionError(
                f"model call failed for prompt {digest[:12]}: {exc}", digest
            ) from exc
        parsed = recognition.parse_output(raw, example.text, label_set)
        counts = evaluation.compare(parsed.entities, example.entities)
        return {
            "id": example.id,
            "tp": counts.tp,
            "fp": counts.fp,
            "fn": counts.fn,
            "discarded": len(parsed.discarded_lines),
        }

    workers = max(1, config.max_concurrency)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run_one, split_examples))


def run_eval(
    config: ExperimentConfig,
    split: str = "validation",
    mechanism: MechanismConfig | None = None,
    k: int | None = None,
    prompt_hook: PromptHook | None = None,
) -> RunReport:
    """Evaluate one (mechanism, k) configuration on a split.

    Retrieval always draws from the training split; the model client is
    wrapped in the response cache, so rerunning after an abort replays
    completed calls instead of re-querying them.
    """
    mechanism = mechanism or config.mechanisms[0]
    k = k if k is not None else (config.k or config.k_range[0])
    train = load_split(config, "train")
    split_ds = load_split(config, split)
    _check_k(config, k, len(train), mechanism.kind)

    normalizer = build_normalizer(config.normalizer_spec)
    provider_factory = lambda: build_embedding_provider(config)  # noqa: E731
    retriever = build_retriever(
        mechanism, train, normalizer, provider_factory, config.embedding.instruction
    )
    handle, caching = build_model(config, gold_sources=(train, split_ds))
    template = load_run_template(config)

    examples = split_ds.examples[: config.max_examples]
    per_example = _evaluate_examples(
        config,
        train,
        examples,
        retriever,
        mechanism,
        handle,
        template,
        k,
        prompt_hook,
    )
    result = evaluation.aggregate(
        evaluation.EvalCounts(row["tp"], row["fp"], row["fn"]) for row in per_example
    )
    return RunReport(
        dataset=config.dataset.name,
        split=split,
        mechanism=mechanism.label,
        descriptor=retriever.descriptor,
        k=k,
        result=result,
        per_example=per_example,
        cache={
            "hits": caching.hits,
            "misses": caching.misses,
            "ratio": caching.hit_ratio(),
        },
        config_digest=config.digest(),
        template_version=template.version,
    )


@dataclass
class SweepReport:
    dataset: str
    split: str
    rows: list[dict]
    best: dict[str, dict]
    cache: dict
    config_digest: str
    template_version: str
    aggregation: str = evaluation.AGGREGATION

    def to_payload(self) -> dict:
        return {
            "kind": "sweep",
            "dataset": self.dataset,
            "split": self.split,
            "rows": self.rows,
            "best": self.best,
            "cache": self.cache,
            "config_digest": self.config_digest,
            "template_version": self.template_version,
            "aggregation": self.aggregation,
        }


def best_rows(rows: Sequence[dict]) -> dict[str, dict]:
    """Per mechanism: the highest F row, ties resolved to the smallest k."""
    best: dict[str, dict] = {}
    for row in rows:
        current = best.get(row["mechanism"])
        if (
            current is None
            or row["f1"] > current["f1"]
            or (row["f1"] == current["f1"] and row["k"] < current["k"])
        ):
            best[row["mechanism"]] = row
    return best


def sweep_k(
    config: ExperimentConfig,
    split: str = "validation",
    mechanisms: Sequence[MechanismConfig] | None = None,
    ks: Sequence[int] | None = None,
    prompt_hook: PromptHook | None = None,
) -> SweepReport:
    """Run the full (mechanism, k) grid on a split and pick best rows.

    Indexes and the model cache are built once and shared across the grid.
    """
    mechanisms = tuple(mechanisms if mechanisms is not None else config.mechanisms)
    if ks is None:
        ks = range(config.k_range[0], config.k_range[1] + 1)
    ks = list(ks)
    train = load_split(config, "train")
    split_ds = load_split(config, split)
    for k in ks:
        for mechanism in mechanisms:
            _check_k(config, k, len(train), mechanism.kind)

    normalizer = build_normalizer(config.normalizer_spec)
    provider_factory = lambda: build_embedding_provider(config)  # noqa: E731
    handle, caching = build_model(config, gold_sources=(train, split_ds))
    template = load_run_template(config)
    examples = split_ds.examples[: config.max_examples]

    rows = []
    for mechanism in mechanisms:
        retriever = build_retriever(
            mechanism, train, normalizer, provider_factory, config.embedding.instruction
        )
        for k in ks:
            per_example = _evaluate_examples(
                config,
                train,
                examples,
                retriever,
                mechanism,
                handle,
                template,
                k,
                prompt_hook,
            )
            result = evaluation.aggregate(
                evaluation.EvalCounts(r["tp"], r["fp"], r["fn"]) for r in per_example
            )
            row = {"mechanism": mechanism.label, "descriptor": retriever.descriptor, "k": k}
            row.update(evaluation.result_row(result))
            rows.append(row)

    return SweepReport(
        dataset=config.dataset.name,
        split=split,
        rows=rows,
        best=best_rows(rows),
        cache={
            "hits": caching.hits,
            "misses": caching.misses,
            "ratio": caching.hit_ratio(),
        },
        config_digest=config.digest(),
        template_version=template.version,
    )


# ---------------------------------------------------------------------------
# Reports


def dumps_results(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _sorted_rows(rows: Sequence[dict]) -> list[dict]:
    return sorted(rows, key=lambda r: (r["mechanism"], r["k"]))


def render_report_files(payload: dict) -> dict[str, str]:
    """Derive every report artifact from a results payload, deterministically.

    Regenerating from the same payload yields byte-identical files.
    """
    rows = payload.get("rows")
    if rows is None:
        row = {"mechanism": payload["mechanism"], "k": payload["k"]}
        row.update(payload["result"])
        rows = [row]
    rows = _sorted_rows(rows)
    best = payload.get("best") or best_rows(rows)

    sweep_csv = _csv_text(
        ["mechanism", "k", "tp", "fp", "fn", "precision", "recall", "f1"],
        [
            [
                r["mechanism"],
                r["k"],
                r["tp"],
                r["fp"],
                r["fn"],
                repr(r["precision"]),
                repr(r["recall"]),
                repr(r["f1"]),
            ]
            for r in rows
        ],
    )

    random_by_k = {r["k"]: r for r in rows if r["mechanism"] == "random"}
    table2_rows = []
    for mechanism in sorted(best):
        if mechanism == "random":
            continue
        row = best[mechanism]
        baseline = random_by_k.get(row["k"])
        table2_rows.append(
            [
                payload["dataset"],
                row["k"],
                mechanism,
                repr(row["f1"]),
                repr(baseline["f1"]) if baseline else "",
            ]
        )
    table2_csv = _csv_text(
        ["domain", "k", "mechanism", "f_with_retrieval", "f_without_retrieval"],
        table2_rows,
    )

    lines = [
        f"dataset: {payload['dataset']}   split: {payload['split']}",
        f"config_digest: {payload['config_digest']}",
        f"template_version: {payload['template_version']}",
        f"aggregation: {payload['aggregation']}",
        f"cache_hit_ratio: {payload['cache']['ratio']:.4f}",
        "",
        f"{'mechanism':<12} {'k':>3} {'P':>8} {'R':>8} {'F':>8}",
    ]
    for r in rows:
        lines.append(
            f"{r['mechanism']:<12} {r['k']:>3} "
            f"{r['precision'] * 100:>7.2f}% {r['recall'] * 100:>7.2f}% {r['f1'] * 100:>7.2f}%"
        )
    if best:
        lines.append("")
        lines.append("best per mechanism (highest F, then smallest k):")
        for mechanism in sorted(best):
            row = best[mechanism]
            lines.append(
                f"  {mechanism:<12} k={row['k']:<3} F={row['f1'] * 100:.2f}%"
            )
    table_txt = "\n".join(lines) + "\n"

    return {
        "results.json": dumps_results(payload),
        "sweep.csv": sweep_csv,
        "table2.csv": table2_csv,
        "report.txt": table_txt,
    }


def write_report(payload: dict, out_dir: str | Path) -> list[Path]:
    """Write the report files; an unwritable directory raises OSError."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for filename, content in render_report_files(payload).items():
        target = out_dir / filename
        target.write_text(content, encoding="utf-8")
        written.append(target)
    return written
