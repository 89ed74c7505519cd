"""Single entry point wiring the pipeline stages into subcommands.

Every run lives under ``<runs-root>/<run-id>/`` with a manifest recording
the config snapshot, stage completion, and content fingerprints of every
artifact, so interrupted runs resume and finished runs can be audited. All
stochastic choices derive from the global ``--seed``; with a primed
transcript cache and ``--replay-only``, two runs are byte-identical.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import atelier, forge, inspector, metrics, proofstand, stats
from .config import Config, load_config
from .errors import GrammarProbeError, MalformedInterchange, PreconditionError
from .hashio import (
    content_hash,
    fingerprint_file,
    read_json,
    read_jsonl,
    write_json,
    write_jsonl,
)
from .llm import LlmClient, OracleProvider, RandomAnswerProvider, TranscriptCache, load_providers
from .prompts import TemplateSet
from .sampling import derive_seed

log = logging.getLogger(__name__)

KIND_BY_NUMBER = {1: "T1", 2: "T2", 3: "T3", 4: "T4"}


def slugify(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


@dataclass
class RunContext:
    cfg: Config
    runs_root: Path
    run_id: str
    cache_dir: Path | None
    replay_only: bool
    providers_path: Path | None
    prompts_dir: Path | None
    extra_providers: dict | None = None

    @property
    def run_dir(self) -> Path:
        return self.runs_root / self.run_id

    def path(self, *parts: str) -> Path:
        return self.run_dir.joinpath(*parts)

    def templates(self) -> TemplateSet:
        return TemplateSet.load(self.prompts_dir)

    def client(self) -> LlmClient:
        import os

        providers = {
            "oracle": OracleProvider(),
            "random": RandomAnswerProvider(seed=derive_seed(self.cfg.seed, "random")),
        }
        if self.providers_path is not None:
            providers.update(load_providers(self.providers_path))
        if os.environ.get("GRAMMARPROBE_FIXTURE_SYNTH") == "1":
            # fixture regeneration hook: records synthetic transcripts
            from .fixtures.synth import FixtureSynthesizer

            providers["fixture"] = FixtureSynthesizer()
        if self.extra_providers:
            providers.update(self.extra_providers)
        cache = TranscriptCache(self.cache_dir) if self.cache_dir else None
        return LlmClient(providers, cache=cache, replay_only=self.replay_only,
                         concurrency=self.cfg.concurrency)

    def prompt_settings(self, provider: str, model_id: str,
                        chapter_titles: dict | None = None) -> atelier.PromptSettings:
        return atelier.PromptSettings(
            provider=provider, model_id=model_id, templates=self.templates(),
            source_language=self.cfg.source_language,
            target_language=self.cfg.target_language,
            parse_retries=self.cfg.atelier.parse_retries,
            chapter_titles=chapter_titles)

    # --- manifest ---

    def manifest_path(self) -> Path:
        return self.path("manifest.json")

    def load_manifest(self) -> dict:
        if self.manifest_path().exists():
            return read_json(self.manifest_path())
        return {"run_id": self.run_id, "config": self.cfg.snapshot(),
                "stages": {}, "artifacts": {}}

    def finish_stage(self, stage: str, outputs: list[Path], extra: dict | None = None) -> None:
        """Record completion and refresh fingerprints; later writers win."""
        manifest = self.load_manifest()
        rels = []
        for out in outputs:
            try:
                rel = str(out.relative_to(self.run_dir))
            except ValueError:
                continue  # user-directed output outside the run dir
            rels.append(rel)
            manifest.setdefault("artifacts", {})[rel] = fingerprint_file(out)
        entry: dict = {"outputs": sorted(rels)}
        if extra:
            entry.update(extra)
        manifest["stages"][stage] = entry
        write_json(self.manifest_path(), manifest)


def _load_document(ctx: RunContext) -> inspector.SourceDocument:
    path = ctx.path("document.json")
    if not path.exists():
        raise PreconditionError(f"no ingested document at {path}; run `ingest` first")
    return inspector.document_from_dict(read_json(path))


def _load_chapters(ctx: RunContext) -> list[inspector.Chapter]:
    path = ctx.path("chapters.jsonl")
    if not path.exists():
        raise PreconditionError(f"no chapters at {path}; run `segment` first")
    chapters = []
    for rec in read_jsonl(path):
        chapters.append(inspector.Chapter(
            chapter_id=rec["chapter_id"], title=rec["title"],
            block_range=tuple(rec["block_range"]),
            section_kind=rec["section_kind"],
            heading_block=rec.get("heading_block")))
    return chapters


def _load_points(ctx: RunContext) -> list[atelier.GrammarPoint]:
    path = ctx.path("grammar_points.jsonl")
    if not path.exists():
        raise PreconditionError(f"no grammar points at {path}; run `extract` first")
    return [atelier.GrammarPoint.from_record(r) for r in read_jsonl(path)]


def _load_pairs(ctx: RunContext) -> list[atelier.ExamplePair]:
    path = ctx.path("pairs.jsonl")
    if not path.exists():
        raise PreconditionError(f"no pairs at {path}; run `generate` first")
    return [atelier.ExamplePair.from_record(r) for r in read_jsonl(path)]


# --- click wiring ---

@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML or JSON config overriding shipped defaults.")
@click.option("--seed", type=int, default=None, help="Master seed for every stochastic choice.")
@click.option("--cache-dir", type=click.Path(), default=None,
              help="Transcript cache directory (content-addressed).")
@click.option("--replay-only", is_flag=True,
              help="Serve every LLM call from the cache; a miss is an error.")
@click.option("--concurrency", type=int, default=None, help="Max in-flight LLM calls.")
@click.option("--runs-root", type=click.Path(), default="runs", show_default=True)
@click.option("--run-id", default=None,
              help="Run directory name; defaults to a config-derived id.")
@click.option("--providers", "providers_path", type=click.Path(exists=True), default=None,
              help="providers.toml with HTTP provider definitions.")
@click.option("--prompts-dir", type=click.Path(exists=True), default=None,
              help="Directory of prompt template overrides.")
@click.pass_context
def cli(ctx, config_path, seed, cache_dir, replay_only, concurrency, runs_root,
        run_id, providers_path, prompts_dir):
    """Grammar-book mining and grammatical-competence benchmarking."""
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(config_path, seed=seed, concurrency=concurrency)
    if run_id is None:
        run_id = "run-" + content_hash(cfg.snapshot())[:8]
    ctx.obj = RunContext(
        cfg=cfg, runs_root=Path(runs_root), run_id=run_id,
        cache_dir=Path(cache_dir) if cache_dir else None,
        replay_only=replay_only,
        providers_path=Path(providers_path) if providers_path else None,
        prompts_dir=Path(prompts_dir) if prompts_dir else None)


@cli.command()
@click.option("--book", required=True, type=click.Path(exists=True),
              help="Document-interchange JSON file.")
@click.pass_obj
def ingest(ctx: RunContext, book):
    """Validate and normalize the grammar-document interchange file."""
    doc = inspector.parse_interchange(book)
    out = ctx.path("document.json")
    write_json(out, inspector.serialize_document(doc))
    ctx.finish_stage("ingest", [out], {"doc_id": doc.doc_id,
                                       "blocks": len(doc.blocks),
                                       "tables": len(doc.tables)})
    click.echo(f"ingested {doc.doc_id}: {len(doc.blocks)} blocks, "
               f"{len(doc.tables)} tables -> {out}")


@cli.command()
@click.option("--heading-ratio", type=float, default=None,
              help="Heading threshold as a multiple of the median font size.")
@click.pass_obj
def segment(ctx: RunContext, heading_ratio):
    """Segment the document into chapters and classify their sections."""
    doc = _load_document(ctx)
    ratio = heading_ratio if heading_ratio is not None else ctx.cfg.heading_ratio
    chapters = inspector.segment_chapters(doc, ratio)
    chapters = inspector.classify_sections(chapters, ctx.cfg.section_keywords)
    out = ctx.path("chapters.jsonl")
    write_jsonl(out, [{"chapter_id": c.chapter_id, "title": c.title,
                       "block_range": list(c.block_range),
                       "section_kind": c.section_kind,
                       "heading_block": c.heading_block} for c in chapters])
    ctx.finish_stage("segment", [out], {"chapters": len(chapters)})
    for c in chapters:
        click.echo(f"{c.chapter_id} [{c.section_kind}] {c.title}")


@cli.command()
@click.option("--model", default=None, help="Extraction model id.")
@click.option("--provider", default=None)
@click.pass_obj
def extract(ctx: RunContext, model, provider):
    """Mine grammar points from the grammar-bearing chapters."""
    doc = _load_document(ctx)
    chapters = _load_chapters(ctx)
    extra = ("lexicon",) if ctx.cfg.include_lexicon else ()
    selected = inspector.grammar_sections(chapters, extra_kinds=extra)
    ps = ctx.prompt_settings(provider or ctx.cfg.provider,
                             model or ctx.cfg.generator_model,
                             {c.chapter_id: c.title for c in chapters})
    raw = atelier.extract_corpus(doc, selected, ctx.client(), ctx.cfg, ps,
                                 workers=ctx.cfg.concurrency)
    points = atelier.dedupe_points(raw, ctx.cfg.atelier.dedupe_threshold)
    out = ctx.path("grammar_points.jsonl")
    write_jsonl(out, [p.to_record() for p in points])
    ctx.finish_stage("extract", [out], {"raw_points": len(raw),
                                        "distinct_points": len(points)})
    click.echo(f"extracted {len(raw)} raw points -> {len(points)} distinct")


@cli.command()
@click.option("--count", type=int, default=None, help="Pairs per grammar point.")
@click.option("--min-words", type=int, default=None)
@click.option("--max-words", type=int, default=None)
@click.option("--model", default=None)
@click.option("--provider", default=None)
@click.pass_obj
def generate(ctx: RunContext, count, min_words, max_words, model, provider):
    """Generate controlled bilingual example pairs per grammar point."""
    from dataclasses import replace

    a = ctx.cfg.atelier
    a = replace(a, pairs_per_point=count or a.pairs_per_point,
                min_words=min_words or a.min_words,
                max_words=max_words or a.max_words)
    cfg = replace(ctx.cfg, atelier=a)
    points = _load_points(ctx)
    ps = ctx.prompt_settings(provider or cfg.provider, model or cfg.generator_model)
    pairs = atelier.generate_corpus(points, ctx.client(), cfg, ps,
                                    workers=cfg.concurrency)
    out = ctx.path("pairs.jsonl")
    write_jsonl(out, [p.to_record() for p in pairs])
    per_point = _pairs_per_point(pairs)
    ctx.finish_stage("generate", [out], {"pairs": len(pairs),
                                         "per_point": per_point})
    click.echo(f"generated {len(pairs)} pairs for {len(points)} points "
               f"(per-point {per_point})")


def _pairs_per_point(pairs) -> str:
    counts: dict[str, int] = {}
    for p in pairs:
        counts[p.gp_ids[0]] = counts.get(p.gp_ids[0], 0) + 1
    if not counts:
        return "0"
    lo, hi = min(counts.values()), max(counts.values())
    return str(lo) if lo == hi else f"{lo}-{hi}"


@cli.command()
@click.option("--model", default=None, help="Judge model id.")
@click.option("--provider", default=None)
@click.pass_obj
def backcheck(ctx: RunContext, model, provider):
    """Re-judge every unchecked pair for rule instantiation and quality."""
    pairs = _load_pairs(ctx)
    points = {p.gp_id: p for p in _load_points(ctx)}
    out = ctx.path("verdicts.jsonl")
    have = {r["pair_id"] for r in read_jsonl(out)} if out.exists() else set()
    todo = [p for p in pairs if p.pair_id not in have]
    ps = ctx.prompt_settings(provider or ctx.cfg.provider,
                             model or ctx.cfg.judge_model)
    verdicts = forge.backcheck_corpus(todo, points, ctx.client(), ps,
                                      workers=ctx.cfg.concurrency)
    from .hashio import upsert_jsonl

    upsert_jsonl(out, [v.to_record() for v in verdicts], "pair_id")
    ctx.finish_stage("backcheck", [out], {"verdicts": len(have) + len(verdicts)})
    click.echo(f"back-checked {len(verdicts)} pairs ({len(have)} already done)")


@cli.command("pairs")
@click.option("--min-score", type=float, default=None,
              help="Translation-score gate (0 disables).")
@click.option("--require-rule/--no-require-rule", default=None,
              help="Gate on the rule-instantiation judgment.")
@click.option("--model", default=None, help="Minimal-pair forging model id.")
@click.option("--provider", default=None)
@click.pass_obj
def pairs_cmd(ctx: RunContext, min_score, require_rule, model, provider):
    """Apply the back-check policy, then forge minimal pairs."""
    from dataclasses import replace

    policy = ctx.cfg.forge
    if min_score is not None:
        policy = replace(policy, min_score=min_score)
    if require_rule is not None:
        policy = replace(policy, require_rule=require_rule)
    pairs = _load_pairs(ctx)
    points = {p.gp_id: p for p in _load_points(ctx)}
    verdicts_path = ctx.path("verdicts.jsonl")
    if not verdicts_path.exists():
        raise PreconditionError(f"no verdicts at {verdicts_path}; run `backcheck` first")
    verdicts = [forge.BackcheckVerdict.from_record(r) for r in read_jsonl(verdicts_path)]
    unchecked = [p for p in pairs if p.status == "unchecked"]
    already = [p for p in pairs if p.status != "unchecked"]
    verified, rejected, _ = forge.filter_verified(unchecked, verdicts, policy)
    all_pairs = already + verified + rejected
    order = {p.pair_id: i for i, p in enumerate(pairs)}
    all_pairs.sort(key=lambda p: order[p.pair_id])
    pairs_out = ctx.path("pairs.jsonl")
    write_jsonl(pairs_out, [p.to_record() for p in all_pairs])

    # summarize the full post-filter state so reruns are idempotent
    n_verified = sum(1 for p in all_pairs if p.status == "verified")
    n_rejected = sum(1 for p in all_pairs if p.status == "rejected")
    summary = forge.FilterSummary(total=n_verified + n_rejected,
                                  verified=n_verified, rejected=n_rejected)
    summary_out = ctx.path("filter_summary.json")
    write_json(summary_out, {"total": summary.total, "verified": summary.verified,
                             "rejected": summary.rejected,
                             "retention_rate": summary.retention_rate})
    ps = ctx.prompt_settings(provider or ctx.cfg.provider,
                             model or ctx.cfg.generator_model)
    keep = [p for p in all_pairs if p.status == "verified"]
    minimal = forge.forge_corpus(keep, points, ctx.client(), ps,
                                 workers=ctx.cfg.concurrency)
    mp_out = ctx.path("minimal_pairs.jsonl")
    write_jsonl(mp_out, [m.to_record() for m in minimal])
    ctx.finish_stage("pairs", [pairs_out, summary_out, mp_out],
                     {"verified": summary.verified, "rejected": summary.rejected,
                      "retention_rate": summary.retention_rate,
                      "minimal_pairs": len(minimal)})
    click.echo(f"retention {summary.verified}/{summary.total} = "
               f"{summary.retention_rate:.4f}; forged {len(minimal)} minimal pairs")


@cli.group()
def tasks():
    """Build, run, and sweep the four probing tasks."""


def _dataset(ctx: RunContext) -> proofstand.Dataset:
    return proofstand.Dataset.load(ctx.path("grammar_points.jsonl"),
                                   ctx.path("pairs.jsonl"),
                                   ctx.path("minimal_pairs.jsonl"))


def _task_config(ctx: RunContext, kind_num: int, n_grammars, n_sentences,
                 n_candidates, instances, seed, t2_mode) -> proofstand.TaskConfig:
    d = ctx.cfg.tasks
    kind = KIND_BY_NUMBER[kind_num]
    defaults = {
        "T1": {"n_grammars": d.t1_n_grammars},
        "T2": {"n_sentences": d.t2_n_sentences},
        "T3": {"n_grammars": d.t3_n_grammars, "n_sentences": d.t3_n_sentences},
        "T4": {"n_candidates": d.t4_n_candidates},
    }[kind]
    params = dict(defaults)
    if n_grammars is not None:
        params["n_grammars"] = n_grammars
    if n_sentences is not None:
        params["n_sentences"] = n_sentences
    if n_candidates is not None:
        params["n_candidates"] = n_candidates
    return proofstand.TaskConfig(
        kind=kind, seed=seed if seed is not None else ctx.cfg.seed,
        instances=instances if instances is not None else d.instances,
        t2_mode=t2_mode or d.t2_mode, **params)


@tasks.command("build")
@click.option("--kind", type=click.IntRange(1, 4), required=True)
@click.option("--n-grammars", type=int, default=None)
@click.option("--n-sentences", type=int, default=None)
@click.option("--n-candidates", type=int, default=None)
@click.option("--instances", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--t2-mode", type=click.Choice(["select", "judge"]), default=None)
@click.pass_obj
def tasks_build(ctx: RunContext, kind, n_grammars, n_sentences, n_candidates,
                instances, seed, t2_mode):
    """Build a deterministic instance set for one task kind."""
    cfg = _task_config(ctx, kind, n_grammars, n_sentences, n_candidates,
                       instances, seed, t2_mode)
    built = proofstand.build_tasks(_dataset(ctx), cfg)
    out = ctx.path("tasks", f"t{kind}.jsonl")
    write_jsonl(out, [inst.to_record() for inst in built])
    ctx.finish_stage(f"tasks.build.t{kind}", [out], {"instances": len(built)})
    click.echo(f"built {len(built)} T{kind} instances -> {out}")


@tasks.command("run")
@click.option("--kind", type=click.IntRange(1, 4), required=True)
@click.option("--model", required=True)
@click.option("--provider", default=None)
@click.option("--concurrency", type=int, default=None)
@click.pass_obj
def tasks_run(ctx: RunContext, kind, model, provider, concurrency):
    """Run one task kind against a model; resumes from persisted results."""
    tasks_path = ctx.path("tasks", f"t{kind}.jsonl")
    if not tasks_path.exists():
        raise PreconditionError(f"no instances at {tasks_path}; run `tasks build` first")
    instances = [proofstand.TaskInstance.from_record(r) for r in read_jsonl(tasks_path)]
    results_path = ctx.path("results", slugify(model), f"t{kind}.jsonl")
    results = proofstand.run_tasks(
        instances, ctx.client(), model, provider or ctx.cfg.provider,
        ctx.templates(), results_path=results_path,
        workers=concurrency or ctx.cfg.concurrency)
    report = proofstand.score_tasks(results,
                                    resamples=ctx.cfg.tasks.bootstrap_resamples,
                                    seed=derive_seed(ctx.cfg.seed, "bootstrap", kind))
    report_path = ctx.path("results", slugify(model), f"t{kind}_report.json")
    write_json(report_path, {"model_id": model, **report.to_record()})
    ctx.finish_stage(f"tasks.run.t{kind}.{slugify(model)}",
                     [results_path, report_path],
                     {"accuracy": report.accuracy, "n": report.n})
    click.echo(f"T{kind} {model}: accuracy {report.accuracy:.4f} "
               f"± {report.std:.4f} (n={report.n}, "
               f"unparseable {report.unparseable_rate:.3f})")


@tasks.command("sweep")
@click.option("--kind", type=click.IntRange(1, 4), required=True)
@click.option("--n", "n_values", default="2,4,6,8,10", show_default=True,
              help="Comma-separated candidate-set sizes.")
@click.option("--model", required=True)
@click.option("--provider", default=None)
@click.option("--instances", type=int, default=None)
@click.pass_obj
def tasks_sweep(ctx: RunContext, kind, n_values, model, provider, instances):
    """Accuracy as a function of the number of presented options."""
    values = [int(v) for v in n_values.split(",") if v.strip()]
    kind_name = KIND_BY_NUMBER[kind]
    report = proofstand.option_sweep(
        _dataset(ctx), kind_name, values, ctx.client(), model,
        provider or ctx.cfg.provider, ctx.templates(), seed=ctx.cfg.seed,
        instances=instances if instances is not None else ctx.cfg.tasks.instances,
        t3_n_sentences=ctx.cfg.tasks.t3_n_sentences,
        workers=ctx.cfg.concurrency)
    out_dir = ctx.path("sweeps", slugify(model))
    out_json = out_dir / f"t{kind}.json"
    write_json(out_json, {"model_id": model, "kind": kind_name, "rows": report.rows})
    out_tsv = out_dir / f"t{kind}.tsv"
    lines = ["n\taccuracy\tstd"]
    lines += [f"{r['n']}\t{r['accuracy']:.6f}\t{r['std']:.6f}" for r in report.rows]
    out_tsv.parent.mkdir(parents=True, exist_ok=True)
    out_tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    ctx.finish_stage(f"tasks.sweep.t{kind}.{slugify(model)}", [out_json, out_tsv])
    for row in report.rows:
        click.echo(f"n={row['n']}: accuracy {row['accuracy']:.4f} ± {row['std']:.4f}")


@cli.command()
@click.option("--direction", type=click.Choice(["en-lb", "lb-en"]), default="en-lb",
              show_default=True)
@click.option("--model", required=True)
@click.option("--provider", default=None)
@click.option("--pairs-file", type=click.Path(exists=True), default=None,
              help="Pairs JSONL to translate; defaults to the run's verified pairs.")
@click.option("--dataset", "dataset_manifest", type=click.Path(exists=True), default=None,
              help="Tagged dataset manifest (list of named pair sources).")
@click.pass_obj
def translate(ctx: RunContext, direction, model, provider, pairs_file,
              dataset_manifest):
    """Elicit translations for a segment corpus; resumes mid-corpus."""
    segments = _translation_segments(ctx, pairs_file, dataset_manifest)
    source_field = "english" if direction == "en-lb" else "luxembourgish"
    ref_field = "luxembourgish" if direction == "en-lb" else "english"
    corpus_path = ctx.path("corpus", "segments.jsonl")
    write_jsonl(corpus_path, [{"segment_id": s["segment_id"],
                               "source": s[source_field],
                               "reference": s[ref_field]} for s in segments])
    ps = ctx.prompt_settings(provider or ctx.cfg.provider, model)
    out = ctx.path("translations", f"{slugify(model)}.jsonl")
    done = {}
    if out.exists():
        done = {r["segment_id"]: r["hypothesis"] for r in read_jsonl(out)}
    from .hashio import append_jsonl

    hyps = metrics.translate_corpus(segments, direction, ctx.client(), ps,
                                    done=done,
                                    on_result=lambda rec: append_jsonl(out, rec))
    write_jsonl(out, hyps)
    ctx.finish_stage(f"translate.{slugify(model)}", [out, corpus_path],
                     {"segments": len(hyps), "direction": direction})
    click.echo(f"translated {len(hyps)} segments -> {out}")


def _translation_segments(ctx: RunContext, pairs_file, dataset_manifest) -> list[dict]:
    if dataset_manifest is not None:
        manifest = read_json(dataset_manifest)
        segments = []
        for source in manifest["sources"]:
            name, path = source["name"], source["path"]
            base = Path(dataset_manifest).parent
            for rec in read_jsonl((base / path) if not Path(path).is_absolute() else path):
                segments.append({
                    "segment_id": f"{name}/{rec.get('pair_id', rec.get('segment_id'))}",
                    "english": rec["english"], "luxembourgish": rec["luxembourgish"],
                    "role": source.get("role", "unspecified")})
        return segments
    if pairs_file is not None:
        records = read_jsonl(pairs_file)
    else:
        records = [p.to_record() for p in _load_pairs(ctx)
                   if p.status == "verified"]
    return [{"segment_id": r.get("pair_id") or r["segment_id"],
             "english": r["english"], "luxembourgish": r["luxembourgish"]}
            for r in records]


def _read_segments(path: str, value_fields: tuple[str, ...],
                   explicit: str | None = None) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, rec in enumerate(read_jsonl(path), 1):
        sid = rec.get("segment_id") or rec.get("pair_id")
        if sid is None:
            raise MalformedInterchange(f"{path}:{lineno}",
                                       "record lacks segment_id/pair_id")
        fields = (explicit,) if explicit else value_fields
        value = next((rec[f] for f in fields if f in rec), None)
        if value is None:
            raise MalformedInterchange(
                f"{path}:{lineno}", f"record lacks any of fields {fields}")
        out[sid] = value
    return out


@cli.command()
@click.option("--metrics", "metric_names", default="chrfpp,bleu", show_default=True,
              help="Comma list from: chrfpp,bleu,judge,external.")
@click.option("--hyp", "hyp_path", required=True, type=click.Path(exists=True))
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True))
@click.option("--src", "src_path", type=click.Path(exists=True), default=None)
@click.option("--hyp-field", default=None, help="Field holding the hypothesis text.")
@click.option("--ref-field", default=None)
@click.option("--src-field", default=None)
@click.option("--external", "external_path", type=click.Path(), default=None,
              help="Scorer-bridge output file (segment_id, score).")
@click.option("--vocab", "vocab_path", type=click.Path(), default=None,
              help="Ranked subword vocabulary for BLEU (defaults to bundled).")
@click.option("--judge-model", default=None)
@click.option("--judge-provider", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--emit-segments", type=click.Path(), default=None,
              help="Also write the scorer-bridge input file.")
@click.option("--model-tag", default=None,
              help="Model name for the per-model score summary (report joins on it).")
@click.pass_obj
def score(ctx: RunContext, metric_names, hyp_path, ref_path, src_path, hyp_field,
          ref_field, src_field, external_path, vocab_path, judge_model,
          judge_provider, out_path, emit_segments, model_tag):
    """Score hypotheses against references; emits per-segment rows + summary."""
    wanted = {m.strip() for m in metric_names.split(",") if m.strip()}
    hyps = _read_segments(hyp_path, ("text", "hypothesis"), hyp_field)
    refs = _read_segments(ref_path, ("text", "reference", "luxembourgish"), ref_field)
    sources = None
    if src_path is not None:
        sources = _read_segments(src_path, ("text", "source", "english"), src_field)
    if "judge" in wanted and sources is None:
        raise PreconditionError("judge metric needs --src")
    vocab = None
    if "bleu" in wanted:
        if vocab_path is None:
            from .fixtures import data_dir

            vocab_path = data_dir() / "vocab.txt"
        vocab = metrics.SubwordVocab.load(vocab_path)
    external = None
    if "external" in wanted:
        if external_path is None or not Path(external_path).exists():
            from .errors import AlignmentMismatch

            raise AlignmentMismatch("external metric requested but --external "
                                    "file is missing")
        external = metrics.load_external_scores(external_path)
    judge_ps = None
    client = None
    if "judge" in wanted:
        judge_ps = ctx.prompt_settings(judge_provider or ctx.cfg.provider,
                                       judge_model or ctx.cfg.judge_model)
        client = ctx.client()

    if emit_segments:
        rows = []
        for sid, hyp in hyps.items():
            row = {"segment_id": sid, "source": (sources or {}).get(sid, ""),
                   "hypothesis": hyp, "reference": refs.get(sid, "")}
            rows.append(row)
        write_jsonl(Path(emit_segments), rows)

    scored = metrics.score_corpus(hyps, refs, wanted, sources=sources,
                                  client=client, judge_ps=judge_ps, vocab=vocab,
                                  external_scores=external)
    tag = slugify(model_tag) if model_tag else "corpus"
    out = Path(out_path) if out_path else ctx.path("scores", tag, "scores.jsonl")
    write_jsonl(out, [r.to_record() for r in scored.rows])
    summary_path = out.parent / "summary.json"
    write_json(summary_path, {"model_id": model_tag or tag,
                              "metrics": scored.summary})
    ctx.finish_stage(f"score.{tag}", [out, summary_path])
    for metric, agg in sorted(scored.summary.items()):
        click.echo(f"{metric}: {agg['mean']:.2f} ± {agg['std']:.2f} (n={agg['n']})")


@cli.command()
@click.option("--results", "results_dir", type=click.Path(), default=None,
              help="Directory of per-model task results (default: run's).")
@click.option("--scores", "scores_dir", type=click.Path(), default=None)
@click.option("--sweeps", "sweeps_dir", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_obj
def report(ctx: RunContext, results_dir, scores_dir, sweeps_dir, out_dir):
    """Assemble the metric/accuracy grid, correlations, and sweep tables."""
    results_dir = Path(results_dir) if results_dir else ctx.path("results")
    scores_dir = Path(scores_dir) if scores_dir else ctx.path("scores")
    sweeps_dir = Path(sweeps_dir) if sweeps_dir else ctx.path("sweeps")
    out = Path(out_dir) if out_dir else ctx.path("report")

    task_reports: dict[str, dict] = {}
    if results_dir.exists():
        for path in sorted(results_dir.glob("*/t*_report.json")):
            rec = read_json(path)
            task_reports.setdefault(rec["model_id"], {})[rec["kind"]] = rec
    corpus: dict[str, dict] = {}
    if scores_dir.exists():
        for path in sorted(scores_dir.glob("*/summary.json")):
            rec = read_json(path)
            corpus[rec["model_id"]] = rec["metrics"]
    sweeps: dict[str, list[dict]] = {}
    if sweeps_dir.exists():
        for path in sorted(sweeps_dir.glob("*/t*.json")):
            rec = read_json(path)
            rows = [{"model_id": rec["model_id"], **row} for row in rec["rows"]]
            sweeps.setdefault(rec["kind"], []).extend(rows)

    written = stats.export_report(task_reports, corpus, sweeps, out)
    ctx.finish_stage("report", list(written))
    click.echo(f"report written to {out} ({len(written)} files)")


@cli.command()
@click.pass_obj
def validate(ctx: RunContext):
    """Check dataset invariants and print the accounting of the run."""
    from .hashio import grammar_point_id

    problems: list[str] = []
    points = _load_points(ctx)
    ids = set()
    for p in points:
        if p.gp_id in ids:
            problems.append(f"duplicate gp_id {p.gp_id}")
        ids.add(p.gp_id)
        if grammar_point_id(p.description) != p.gp_id:
            problems.append(f"gp_id {p.gp_id} does not hash its description")
        if not p.description.strip():
            problems.append(f"gp {p.gp_id} has empty description")
        if not p.source:
            problems.append(f"gp {p.gp_id} has no provenance")
    click.echo(f"grammar_points: {len(points)}")

    pairs_path = ctx.path("pairs.jsonl")
    pairs = []
    if pairs_path.exists():
        pairs = [atelier.ExamplePair.from_record(r) for r in read_jsonl(pairs_path)]
        per_point: dict[str, int] = {}
        for p in pairs:
            if p.status not in atelier.PAIR_STATUSES:
                problems.append(f"pair {p.pair_id} has bad status {p.status}")
            if not p.gp_ids or any(g not in ids for g in p.gp_ids):
                problems.append(f"pair {p.pair_id} references unknown grammar point")
            if not p.english or not p.luxembourgish:
                problems.append(f"pair {p.pair_id} has an empty sentence")
            per_point[p.gp_ids[0]] = per_point.get(p.gp_ids[0], 0) + 1
        verified = sum(1 for p in pairs if p.status == "verified")
        rejected = sum(1 for p in pairs if p.status == "rejected")
        lo = min(per_point.values()) if per_point else 0
        hi = max(per_point.values()) if per_point else 0
        click.echo(f"pairs: {len(pairs)} (per-point {lo}-{hi})")
        click.echo(f"verified: {verified}")
        click.echo(f"rejected: {rejected}")
        judged = verified + rejected
        if judged:
            click.echo(f"retention: {verified / judged:.4f}")

    mp_path = ctx.path("minimal_pairs.jsonl")
    if mp_path.exists():
        minimal = [forge.MinimalPair.from_record(r) for r in read_jsonl(mp_path)]
        for m in minimal:
            if m.correct == m.incorrect:
                problems.append(f"minimal pair {m.mp_id} is degenerate")
            if m.gp_id not in ids:
                problems.append(f"minimal pair {m.mp_id} references unknown point")
        click.echo(f"minimal_pairs: {len(minimal)}")

    manifest = ctx.load_manifest()
    for rel, digest in manifest.get("artifacts", {}).items():
        path = ctx.path(rel)
        if not path.exists():
            problems.append(f"manifest: artifact {rel} missing")
        elif fingerprint_file(path) != digest:
            problems.append(f"manifest: artifact {rel} fingerprint drift")

    if problems:
        for p in problems:
            click.echo(f"invariant violation: {p}", err=True)
        raise PreconditionError(f"{len(problems)} invariant violation(s)")
    click.echo("invariants: ok")


@cli.command("verify-fixtures")
def verify_fixtures_cmd():
    """Replay the bundled fixture pipeline and diff against golden outputs."""
    from .fixtures import verify_fixtures

    report = verify_fixtures()
    click.echo(report)


def main(argv=None) -> int:
    """Exit 0 on success, 1 on domain errors, 2 on usage errors."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 2
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        return 130
    except GrammarProbeError as e:
        click.echo(f"error: {e}", err=True)
        click.echo(e.machine_tail(), err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
