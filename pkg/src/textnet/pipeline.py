"""Staged end-to-end runs with on-disk artifacts and a hash manifest.

Stages run in the order ingest, vectorize, embed, graph, extract, merge,
evaluate. Each stage reads the artifacts of earlier stages from the output
directory and records the sha256 of its inputs, outputs and relevant config
in ``manifest.json``. A stage whose recorded hashes still match is skipped.
Wall-clock times go to ``timings.json`` so the manifest stays byte-stable.

With ``planted`` set in the config the three text stages are skipped and the
graph stage draws a planted block graph instead.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, corpus, evaluate, lsa, merge, simgraph, vectorize
from .config import PipelineConfig
from .extraction import ExtractionResult

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0.0"
STAGES = ("ingest", "vectorize", "embed", "graph", "extract", "merge", "evaluate")
TEXT_STAGES = STAGES[:3]
TABLE_MAX_DOCS = 50  # dense tf-idf CSV only for small corpora
STABILITY_STRIDE = 100000

_EXTRACT_KEYS = ("chunk_size", "min_residual", "restarts", "tenure", "stall_limit", "max_moves", "seed")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class MissingArtifactError(PipelineError):
    pass


class StageFailed(PipelineError):
    """Wraps an exception raised inside a stage; the original is ``__cause__``."""


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class Context:
    cfg: PipelineConfig
    out: Path
    workers: int = 1

    @property
    def planted(self) -> bool:
        return self.cfg.planted is not None

    def path(self, name: str) -> Path:
        return self.out / name

    def graph(self) -> simgraph.SimilarityGraph:
        return simgraph.read_edge_list(self.path("graph.csv"))

    def tags(self) -> dict[str, str] | None:
        """Reference labels: first manual tag per document, or the planted truth."""
        if self.planted:
            return _read_json(self.path("tags.json"))
        docs = [corpus.Document.from_json(json.loads(line))
                for line in self.path("docs.jsonl").read_text(encoding="utf-8").splitlines()]
        if not any(d.tags for d in docs):
            return None
        return {d.id: d.tags[0] if d.tags else evaluate.MISC for d in docs}


# -- stage bodies; each returns the names of the files it wrote -------------

def _ingest(ctx: Context) -> list[str]:
    cfg = ctx.cfg
    docs = corpus.load_corpus(cfg.corpus, cfg.corpus_format)
    dictionary = corpus.load_spelling_dictionary(cfg.dictionary) if cfg.dictionary else None
    stopwords = corpus.load_stopwords(cfg.stopwords)
    docs = corpus.normalize_corpus(docs, dictionary, stopwords)
    with open(ctx.path("docs.jsonl"), "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d.to_json(), sort_keys=True) + "\n")
    return ["docs.jsonl"]


def _vectorize(ctx: Context) -> list[str]:
    lines = ctx.path("docs.jsonl").read_text(encoding="utf-8").splitlines()
    docs = [corpus.Document.from_json(json.loads(line)) for line in lines]
    tdm = vectorize.build_tfidf_matrix(docs, ctx.cfg.min_df)
    vectorize.save(tdm, ctx.out)
    names = ["tfidf.mtx", "vocabulary.json"]
    if tdm.n <= TABLE_MAX_DOCS:
        vectorize.write_table_csv(tdm, ctx.path("tfidf_table.csv"))
        names.append("tfidf_table.csv")
    return names


_LSA_FILES = ["lsa_singular_values.npy", "lsa_term_factors.npy", "lsa_doc_factors.npy",
              "lsa.json", "embeddings.csv", "singular_values.csv"]


def _embed(ctx: Context) -> list[str]:
    cfg = ctx.cfg
    tdm = vectorize.load(ctx.out)
    factors = lsa.fit(tdm.X, rank=cfg.rank, energy_fraction=cfg.energy_fraction, cap=cfg.rank_cap, seed=cfg.seed)
    lsa.save(factors, ctx.out, tdm.doc_ids)
    return list(_LSA_FILES)


def _graph(ctx: Context) -> list[str]:
    cfg = ctx.cfg
    names = ["correlation.npy", "graph.csv", "graph.json"]
    if ctx.planted:
        planted_graph, labels = evaluate.generate_planted(evaluate.load_planted_spec(cfg.planted))
        C, ids = planted_graph.adjacency, planted_graph.node_ids
        meta = {"source": "planted", "k": None}
        _write_json(ctx.path("tags.json"), labels)
        names.append("tags.json")
    else:
        ids = tuple(_read_json(ctx.path("vocabulary.json"))["doc_ids"])
        E = np.load(ctx.path("lsa_doc_factors.npy"))
        C = simgraph.correlation_matrix(E, ids)
        meta = {"source": "lsa", "k": int(E.shape[1])}
    np.save(ctx.path("correlation.npy"), C)
    g = simgraph.apply_threshold(C, ids, cfg.threshold, meta)
    simgraph.write_edge_list(g, ctx.path("graph.csv"))
    return names


def _extract(ctx: Context) -> list[str]:
    cfg = ctx.cfg
    g = ctx.graph()
    plan = merge.random_partition(list(g.node_ids), cfg.chunk_size, cfg.seed)
    results = merge.extract_partitions(g, plan, cfg.min_residual, cfg.restarts, cfg.seed, cfg.tabu, ctx.workers)
    _write_json(ctx.path("partitions.json"),
                {"chunk_size": plan.chunk_size, "seed": plan.seed, "partitions": plan.partitions})
    _write_json(ctx.path("partition_results.json"), [r.to_json() for r in results])
    return ["partitions.json", "partition_results.json"]


def write_labels_csv(labels: dict[str, str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "label"])
        for d in sorted(labels):
            w.writerow([d, labels[d]])


def _merge(ctx: Context) -> list[str]:
    cfg = ctx.cfg
    g = ctx.graph()
    results = [ExtractionResult.from_json(r) for r in _read_json(ctx.path("partition_results.json"))]
    decisions: list = []
    fused = merge.merge_communities(g, results, cfg.merge_ratio, decisions)
    fused.config["chunk_size"] = cfg.chunk_size
    fused.config["seed"] = cfg.seed
    fused.dump(ctx.path("result.json"))
    merge.write_merge_report(decisions, [c for r in results for c in r.communities], ctx.path("merge_report.csv"))
    write_labels_csv(fused.labels(), ctx.path("labels.csv"))
    return ["result.json", "merge_report.csv", "labels.csv"]


def _group_reports(C, ids, grouping, gcm_path, het_path):
    gcm = evaluate.group_correlation(C, grouping, ids)
    gcm.write_csv(gcm_path)
    groups = [lab for lab in gcm.labels if lab != evaluate.MISC]
    fractions = evaluate.heterophily_fraction(gcm) if len(groups) >= 2 else {}
    evaluate.write_heterophily_csv(fractions, het_path)
    return fractions


def _median(values):
    return float(np.median(list(values))) if values else None


def _evaluate(ctx: Context) -> list[str]:
    cfg = ctx.cfg
    C = np.load(ctx.path("correlation.npy"))
    ids = tuple(_read_json(ctx.path("graph.json"))["node_ids"])
    result = ExtractionResult.load(ctx.path("result.json"))
    found = result.labels()
    names = ["gcm.csv", "heterophily.csv", "nmi.csv", "evaluation.json"]
    het = _group_reports(C, ids, found, ctx.path("gcm.csv"), ctx.path("heterophily.csv"))
    summary = {
        "communities": len(result.communities),
        "residual": len(result.residual),
        "median_heterophily": _median(het.values()),
    }
    rows = []
    tags = ctx.tags()
    if tags is not None:
        het_tags = _group_reports(C, ids, tags, ctx.path("gcm_tags.csv"), ctx.path("heterophily_tags.csv"))
        names += ["gcm_tags.csv", "heterophily_tags.csv"]
        summary["median_heterophily_tags"] = _median(het_tags.values())
        rows.append(("result", "tags", evaluate.nmi(found, tags, cfg.nmi_average)))

    if cfg.stability_runs:
        g = ctx.graph()
        runs = {"result": found}
        for i in range(1, cfg.stability_runs + 1):
            seed = cfg.seed + STABILITY_STRIDE * i
            r = merge.divide_and_extract(g, cfg.chunk_size, cfg.merge_ratio, cfg.min_residual,
                                         cfg.restarts, seed, cfg.tabu, ctx.workers)
            runs[f"run{i}"] = r.labels()
        for a, b in itertools.combinations(runs, 2):
            rows.append((a, b, evaluate.nmi(runs[a], runs[b], cfg.nmi_average)))
        stab = [v for a, b, v in rows if b != "tags"]
        summary["median_stability_nmi"] = _median(stab)
    evaluate.write_nmi_csv(rows, ctx.path("nmi.csv"))
    summary["nmi"] = [{"run_a": a, "run_b": b, "nmi": v} for a, b, v in rows]
    _write_json(ctx.path("evaluation.json"), summary)
    return names


@dataclass(frozen=True)
class Stage:
    name: str
    body: Callable[[Context], list[str]]
    keys: tuple[str, ...]  # config fields that influence the outputs
    text_inputs: tuple[str, ...] = ()  # upstream artifacts in text mode
    planted_inputs: tuple[str, ...] | None = None  # ... and in planted mode, if different

    def inputs(self, ctx: Context) -> tuple[str, ...]:
        if ctx.planted and self.planted_inputs is not None:
            return self.planted_inputs
        return self.text_inputs


_GRAPH = ("graph.csv", "graph.json")
_STAGE_TABLE = {
    s.name: s
    for s in (
        Stage("ingest", _ingest, ("corpus_format",)),
        Stage("vectorize", _vectorize, ("min_df",), ("docs.jsonl",)),
        Stage("embed", _embed, ("rank", "energy_fraction", "rank_cap", "seed"), ("tfidf.mtx", "vocabulary.json")),
        Stage("graph", _graph, ("threshold",), ("lsa_doc_factors.npy", "vocabulary.json"), ()),
        Stage("extract", _extract, _EXTRACT_KEYS, _GRAPH),
        Stage("merge", _merge, ("merge_ratio", "chunk_size", "seed"), _GRAPH + ("partition_results.json",)),
        Stage(
            "evaluate",
            _evaluate,
            ("stability_runs", "nmi_average", "merge_ratio") + _EXTRACT_KEYS,
            ("correlation.npy", "result.json", "docs.jsonl") + _GRAPH,
            ("correlation.npy", "result.json", "tags.json") + _GRAPH,
        ),
    )
}

# which stage writes each artifact, for "run stage X first" messages
_PRODUCER = {
    "docs.jsonl": "ingest",
    "tfidf.mtx": "vectorize",
    "vocabulary.json": "vectorize",
    "lsa_doc_factors.npy": "embed",
    "correlation.npy": "graph",
    "graph.csv": "graph",
    "graph.json": "graph",
    "tags.json": "graph",
    "partition_results.json": "extract",
    "result.json": "merge",
}


def _external_inputs(ctx: Context, stage: str) -> dict[str, str]:
    cfg = ctx.cfg
    if stage == "ingest":
        files = {"corpus": cfg.corpus, "dictionary": cfg.dictionary, "stopwords": cfg.stopwords}
    elif stage == "graph" and ctx.planted:
        files = {"planted": cfg.planted}
    else:
        return {}
    return {f"config:{k}": sha256_file(v) for k, v in files.items() if v}


def stages_for(cfg: PipelineConfig) -> tuple[str, ...]:
    return STAGES[3:] if cfg.planted else STAGES


class Manifest:
    def __init__(self, path: Path):
        self.path = path
        self.data = _read_json(path) if path.exists() else {}
        if self.data.get("schema_version") != SCHEMA_VERSION:
            self.data = {"schema_version": SCHEMA_VERSION, "stages": {}}

    def entry(self, stage: str) -> dict | None:
        return self.data["stages"].get(stage)

    def record(self, stage: str, entry: dict) -> None:
        self.data["stages"][stage] = entry
        self.data["textnet_version"] = __version__
        _write_json(self.path, self.data)


def _timings(out: Path) -> dict:
    p = out / "timings.json"
    return _read_json(p) if p.exists() else {}


def run_stage(stage: str, cfg: PipelineConfig, workers: int = 1, force: bool = False) -> dict:
    """Run one stage unless its manifest entry is current. Returns the entry plus ``skipped``."""
    if stage not in _STAGE_TABLE:
        raise ValueError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    ctx = Context(cfg, Path(cfg.output_dir), workers)
    if ctx.planted and stage in TEXT_STAGES:
        raise PipelineError(stage, "not available for a planted graph config")
    ctx.out.mkdir(parents=True, exist_ok=True)
    spec = _STAGE_TABLE[stage]

    inputs = _external_inputs(ctx, stage)
    for name in spec.inputs(ctx):
        p = ctx.path(name)
        if not p.exists():
            raise MissingArtifactError(stage, f"missing {name}: run stage {_PRODUCER[name]} first")
        inputs[name] = sha256_file(p)
    entry = {
        "config_hash": cfg.digest(spec.keys),
        "inputs": inputs,
        "seed": cfg.seed,
    }

    manifest = Manifest(ctx.path("manifest.json"))
    old = manifest.entry(stage)
    if not force and old is not None and all(old.get(k) == v for k, v in entry.items()):
        outputs = old.get("outputs", {})
        if outputs and all(ctx.path(n).exists() and sha256_file(ctx.path(n)) == h for n, h in outputs.items()):
            log.info("stage %s is up to date", stage)
            return {**old, "skipped": True}

    t0 = time.perf_counter()
    try:
        names = spec.body(ctx)
    except PipelineError:
        raise
    except Exception as exc:
        raise StageFailed(stage, f"{type(exc).__name__}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    entry["outputs"] = {n: sha256_file(ctx.path(n)) for n in sorted(names)}
    manifest.record(stage, entry)
    timings = _timings(ctx.out)
    timings[stage] = round(elapsed, 6)
    _write_json(ctx.path("timings.json"), timings)
    return {**entry, "skipped": False}


@dataclass
class RunSummary:
    documents: int
    vocabulary: int | None
    k: int | None
    nodes: int
    edges: int
    partitions: int
    communities: int
    residual: int
    timings: dict

    def format(self) -> str:
        def show(v):
            return "-" if v is None else str(v)

        lines = [
            f"documents      {self.documents}",
            f"vocabulary     {show(self.vocabulary)}",
            f"lsa rank k     {show(self.k)}",
            f"graph N        {self.nodes}",
            f"graph M        {self.edges}",
            f"partitions     {self.partitions}",
            f"communities    {self.communities}",
            f"residual       {self.residual}",
        ]
        total = sum(self.timings.values())
        lines.append("timings (s)    " + ", ".join(f"{k} {v:.2f}" for k, v in self.timings.items()) + f"; total {total:.2f}")
        return "\n".join(lines)


def summarize(cfg: PipelineConfig) -> RunSummary:
    out = Path(cfg.output_dir)
    g = simgraph.read_edge_list(out / "graph.csv")
    result = ExtractionResult.load(out / "result.json")
    vocab = k = None
    if not cfg.planted:
        vocab = len(_read_json(out / "vocabulary.json")["vocabulary"]["terms"])
        k = _read_json(out / "lsa.json")["k"]
    timings = _timings(out)
    return RunSummary(
        documents=g.size,
        vocabulary=vocab,
        k=k,
        nodes=g.size,
        edges=g.edge_count,
        partitions=len(_read_json(out / "partitions.json")["partitions"]),
        communities=len(result.communities),
        residual=len(result.residual),
        timings={s: timings[s] for s in stages_for(cfg) if s in timings},
    )


def run_all(cfg: PipelineConfig, workers: int = 1, echo: Callable[[str], None] | None = print) -> tuple[ExtractionResult, RunSummary]:
    """Run every stage in order and report a summary."""
    for stage in stages_for(cfg):
        run_stage(stage, cfg, workers)
    summary = summarize(cfg)
    if echo is not None:
        echo(summary.format())
    return ExtractionResult.load(Path(cfg.output_dir) / "result.json"), summary


def _combo_name(combo: dict) -> str:
    return "_".join(f"{k}={v}" for k, v in combo.items())


def sweep(cfg: PipelineConfig, grid: dict[str, list], workers: int = 1, echo=print) -> list[tuple[str, RunSummary]]:
    """Full run per grid combination under ``<output_dir>/<key=value_...>``; pairwise NMI in ``sweep_nmi.csv``."""
    if not grid:
        raise ValueError("empty sweep grid")
    base = Path(cfg.output_dir)
    keys = list(grid)
    done = []
    labels = {}
    for values in itertools.product(*(grid[k] for k in keys)):
        combo = dict(zip(keys, values))
        name = _combo_name(combo)
        sub = replace(cfg, output_dir=str(base / name), **combo).validate()
        if echo is not None:
            echo(f"== {name}")
        result, summary = run_all(sub, workers, echo)
        labels[name] = result.labels()
        done.append((name, summary))
    rows = [(a, b, evaluate.nmi(labels[a], labels[b], cfg.nmi_average)) for a, b in itertools.combinations(labels, 2)]
    base.mkdir(parents=True, exist_ok=True)
    evaluate.write_nmi_csv(rows, base / "sweep_nmi.csv")
    return done
