"""Command-line interface: one subcommand per pipeline stage.

Every stage reads and writes under ``--workdir`` by default::

    fixtures/      make-fixtures (transcripts/, protocols/, gold/, embeddings.txt)
    graphs/        parse-protocol, one JSON graph per document
    matches/       match, one JSONL report per document
    datasets/      gen-datasets (split, sequence and pair JSONL, manifest.json)
    models/        train-seq / train-re
    predictions/   predict, spans and pair labels per document (<doc>.json, <doc>.pairs.jsonl)
    kg/            assemble, DOT and JSON knowledge graphs
    reports/       evaluate / sweep tables, TSV, JSON and figures

Tunables come from the defaults, then ``--config`` (``key = value`` lines),
then ``CTAPARSE_SEED``, then command-line flags.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import typing
from pathlib import Path

from .corpus import FormatError, SpanError, Transcript, read_transcript, span_from_json, span_to_json
from .crf import CrfModel, DataError, crf_train
from .datasets import (
    PairExample,
    SamplingPortion,
    SeqExample,
    build_pair_dataset,
    build_seq_dataset,
    dumps_jsonl,
    iobes_tags,
    label_counts,
    sample_labels,
    sha256_text,
    split_documents,
)
from .embeddings import read_embeddings
from .evaluation import (
    format_table,
    load_annotation,
    mention_metrics,
    phrase_accuracy,
    relation_metrics,
    token_metrics,
)
from .fixtures import make_fixtures
from .matcher import match_protocol, match_report
from .pipeline import PipelineConfig, assemble, atomic_write, export_graph, matched_from_report, relate_pairs, run_extract
from .protocol import ProtocolParseError, RelationLabel, dumps_graph, graph_from_json, read_protocol, validate_graph
from .relation import ReConfig, ReModel, TrainingError, re_train

log = logging.getLogger("ctaparse")

SEED_ENV = "CTAPARSE_SEED"
FIXTURES_ENV = "CTAPARSE_FIXTURES"


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- configuration -----------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}
_HINTS = typing.get_type_hints(PipelineConfig)


def _convert(key: str, raw: str):
    hint = _HINTS[key]
    if raw.strip().lower() in ("none", "") and type(None) in typing.get_args(hint):
        return None
    base = next((a for a in typing.get_args(hint) if a is not type(None)), hint)
    try:
        return base(raw.strip())
    except ValueError:
        raise ValidationFailure(f"config key {key!r}: cannot read {raw!r} as {base.__name__}") from None


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys use ``_`` or ``-``."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise FormatError(f"{path}:{n}: unknown config key {key!r}")
        out[key] = _convert(key, val)
    return out


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values = {}
    if args.config:
        values.update(read_config(args.config))
    if os.environ.get(SEED_ENV):
        values["seed"] = _convert("seed", os.environ[SEED_ENV])
    for key in _FIELDS:
        v = getattr(args, "cfg_" + key, None)
        if v is not None:
            values[key] = _convert(key, v)
    cfg = PipelineConfig(**values)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ValidationFailure(f"invalid configuration: {exc}") from None
    return cfg


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (override --config)")
    g.add_argument("--config", help="flat key = value config file")
    for key, f in _FIELDS.items():
        g.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, metavar=key.upper(),
                       help=f"default {f.default}")


# -- file helpers ------------------------------------------------------------

def _wd(args, *parts) -> Path:
    return Path(args.workdir).joinpath(*parts)


def _fixtures_dir(args) -> Path:
    return Path(os.environ.get(FIXTURES_ENV) or _wd(args, "fixtures"))


def _path(value, default: Path) -> Path:
    return Path(value) if value else default


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            if raw.strip():
                try:
                    rows.append(json.loads(raw))
                except ValueError as exc:
                    raise FormatError(f"{path}:{n}: {exc}") from None
    return rows


def _doc_files(directory: Path, suffix: str) -> dict[str, Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    files = {p.name[: -len(suffix)]: p for p in sorted(directory.iterdir()) if p.name.endswith(suffix)}
    if not files:
        raise FormatError(f"no *{suffix} files in {directory}")
    return files


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_transcripts(directory: Path, docs=None) -> dict[str, Transcript]:
    files = _doc_files(directory, ".txt")
    if docs is not None:
        missing = sorted(set(docs) - set(files))
        if missing:
            raise FormatError(f"transcripts missing for: {', '.join(missing)}")
        files = {d: files[d] for d in docs}
    return {d: read_transcript(p) for d, p in files.items()}


def _load_matched(args):
    """``doc -> (matched graph, transcript)`` for every document with a match report."""
    graphs = {d: graph_from_json(json.loads(p.read_text(encoding="utf-8")))
              for d, p in _doc_files(_path(args.graphs, _wd(args, "graphs")), ".json").items()}
    reports = _doc_files(_path(args.matches, _wd(args, "matches")), ".jsonl")
    transcripts = _load_transcripts(_path(args.transcripts, _fixtures_dir(args) / "transcripts"), reports)
    matched = {}
    for d, p in reports.items():
        if d not in graphs:
            raise FormatError(f"match report {p} has no protocol graph")
        matched[d] = (matched_from_report(graphs[d], d, _read_jsonl(p)), transcripts[d])
    return matched


# -- subcommands -------------------------------------------------------------

def cmd_make_fixtures(args, cfg: PipelineConfig) -> int:
    out = _path(args.out, _fixtures_dir(args))
    docs = make_fixtures(out, n_docs=args.n_docs, seed=cfg.seed, family=args.family)
    print(f"wrote {len(docs)} {args.family} documents to {out}")
    return 0


def cmd_parse_protocol(args, cfg: PipelineConfig) -> int:
    src = _path(args.protocols, _fixtures_dir(args) / "protocols")
    files = {src.stem: src} if src.is_file() else _doc_files(src, ".txt")
    out = _path(args.out, _wd(args, "graphs"))
    failed = 0
    for doc, path in files.items():
        g = read_protocol(path)
        problems = validate_graph(g)
        for msg in problems:
            (log.warning if msg.startswith("unanchored") else log.error)("%s: %s", doc, msg)
        if any(not m.startswith("unanchored") for m in problems):
            failed += 1
            continue
        atomic_write(out / f"{doc}.json", dumps_graph(g))
        print(f"{doc}\t{len(g.phrases)} phrases\t{len(g.edges)} edges")
    if failed:
        raise ValidationFailure(f"{failed} protocol(s) failed validation")
    return 0


def cmd_match(args, cfg: PipelineConfig) -> int:
    fx = _fixtures_dir(args)
    graphs = {d: graph_from_json(json.loads(p.read_text(encoding="utf-8")))
              for d, p in _doc_files(_path(args.graphs, _wd(args, "graphs")), ".json").items()}
    transcripts = _load_transcripts(_path(args.transcripts, fx / "transcripts"), graphs)
    emb = read_embeddings(_path(args.embeddings, fx / "embeddings.txt")) if cfg.match_method == "fuzzy" else None
    out = _path(args.out, _wd(args, "matches"))
    mcfg = cfg.matcher()
    print("doc\tphrases\tmatched\tdropped")
    for doc, g in graphs.items():
        t = transcripts[doc]
        m = match_protocol(g, t, mcfg, emb, cfg.match_method)
        for msg in m.diagnostics:
            log.info("%s: %s", doc, msg)
        rows = match_report(m, t)
        atomic_write(out / f"{doc}.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
        print(f"{doc}\t{len(g.phrases)}\t{len(m.matches)}\t{len(g.phrases) - len(m.matches)}")
    return 0


def cmd_gen_datasets(args, cfg: PipelineConfig) -> int:
    matched = _load_matched(args)
    out = _path(args.out, _wd(args, "datasets"))
    split = split_documents(list(matched), cfg.seed)
    portion = SamplingPortion.parse(cfg.portion)
    files: dict[str, str] = {"split.json": _dumps(split)}
    counts: dict[str, dict] = {}
    for part, docs in split.items():
        seq = [ex for d in docs for ex in build_seq_dataset(*matched[d])]
        pairs = [p for d in docs for p in build_pair_dataset(*matched[d], cfg.k)]
        raw_counts = label_counts(pairs)
        if part == "train":
            pairs = sample_labels(pairs, portion, cfg.seed)
        files[f"seq-{part}.jsonl"] = dumps_jsonl(ex.to_json() for ex in seq)
        files[f"pairs-{part}.jsonl"] = dumps_jsonl(p.to_json() for p in pairs)
        counts[part] = {"docs": len(docs), "sentences": len(seq), "pairs_before_sampling": raw_counts,
                        "pairs": label_counts(pairs)}
    manifest = {
        "seed": cfg.seed,
        "k": cfg.k,
        "portion": str(portion),
        "counts": counts,
        "sha256": {name: sha256_text(text) for name, text in sorted(files.items())},
    }
    for name, text in files.items():
        atomic_write(out / name, text)
    atomic_write(out / "manifest.json", _dumps(manifest))
    rows = [[part, c["docs"], c["sentences"]] + [c["pairs"][lbl.value] for lbl in RelationLabel.order()]
            for part, c in counts.items()]
    print(format_table(["split", "docs", "sentences", "none", "next", "if"], rows), end="")
    return 0


def _manifest(datasets: Path) -> dict:
    return json.loads((datasets / "manifest.json").read_text(encoding="utf-8"))


def cmd_train_seq(args, cfg: PipelineConfig) -> int:
    ds = _path(args.datasets, _wd(args, "datasets"))
    data = [SeqExample.from_json(r) for r in _read_jsonl(ds / "seq-train.jsonl")]
    model, trace = crf_train(data, l2=cfg.crf_l2, lr=cfg.crf_lr, epochs=cfg.crf_epochs, seed=cfg.seed)
    out = _path(args.out, _wd(args, "models", "crf.json"))
    atomic_write(out, json.dumps(model.to_json(), sort_keys=True) + "\n")
    print(f"crf: {len(data)} sentences, {len(model.vocab)} features, final objective {trace[-1]:.6f} -> {out}")
    return 0


def cmd_train_re(args, cfg: PipelineConfig) -> int:
    ds = _path(args.datasets, _wd(args, "datasets"))
    man = _manifest(ds)
    if man["k"] != cfg.k:
        raise ValidationFailure(f"datasets were built with k={man['k']} but the config says k={cfg.k}")
    data = [PairExample.from_json(r) for r in _read_jsonl(ds / "pairs-train.jsonl")]
    emb = read_embeddings(_path(args.embeddings, _fixtures_dir(args) / "embeddings.txt"))
    rcfg = ReConfig(pooling=cfg.pooling, k=cfg.k)
    model, trace = re_train(data, emb, rcfg, l2=cfg.re_l2, lr=cfg.re_lr, epochs=cfg.re_epochs, seed=cfg.seed)
    out = _path(args.out, _wd(args, "models", "re.json"))
    atomic_write(out, json.dumps(model.to_json(), sort_keys=True) + "\n")
    print(f"re: {len(data)} pairs {label_counts(data)}, final objective {trace[-1]:.6f} -> {out}")
    return 0


def _target_docs(args, available) -> list[str]:
    if args.docs:
        return sorted(args.docs)
    split_file = _path(args.datasets, _wd(args, "datasets")) / "split.json"
    if args.split != "all" and split_file.exists():
        return json.loads(split_file.read_text(encoding="utf-8"))[args.split]
    return sorted(available)


def cmd_predict(args, cfg: PipelineConfig) -> int:
    fx = _fixtures_dir(args)
    tdir = _path(args.transcripts, fx / "transcripts")
    docs = _target_docs(args, _doc_files(tdir, ".txt"))
    transcripts = _load_transcripts(tdir, docs)
    crf = CrfModel.load(_path(args.crf, _wd(args, "models", "crf.json")))
    re_model = ReModel.load(_path(args.re, _wd(args, "models", "re.json")))
    emb = read_embeddings(_path(args.embeddings, fx / "embeddings.txt"))
    out = _path(args.out, _wd(args, "predictions"))
    print("doc\tspans\tnext\tif")
    for doc, t in transcripts.items():
        spans = run_extract(t, crf)
        scored = relate_pairs(spans, t, re_model, emb, cfg.max_distance)
        preds = [(i, j, lbl, sc[lbl]) for i, j, lbl, sc in scored]
        atomic_write(out / f"{doc}.pairs.jsonl", dumps_jsonl(
            {"u_span": span_to_json(spans[i], doc), "v_span": span_to_json(spans[j], doc), "label": lbl.value,
             "scores": {k.value: round(v, 12) for k, v in sc.items()}} for i, j, lbl, sc in scored))
        rec = {
            "doc": doc,
            "spans": [span_to_json(s, doc) for s in spans],
            "relations": [[i, j, RelationLabel(lbl).value, round(score, 12)] for i, j, lbl, score in preds],
        }
        atomic_write(out / f"{doc}.json", _dumps(rec))
        n = {lbl: sum(p[2] is lbl for p in preds) for lbl in (RelationLabel.NEXT, RelationLabel.IF)}
        print(f"{doc}\t{len(spans)}\t{n[RelationLabel.NEXT]}\t{n[RelationLabel.IF]}")
    return 0


def _load_predictions(directory: Path):
    out = {}
    for doc, p in _doc_files(directory, ".json").items():
        rec = json.loads(p.read_text(encoding="utf-8"))
        spans = [span_from_json(s)[1] for s in rec["spans"]]
        rels = [(int(i), int(j), RelationLabel(lbl), float(s)) for i, j, lbl, s in rec["relations"]]
        out[doc] = (spans, rels)
    return out


def cmd_assemble(args, cfg: PipelineConfig) -> int:
    preds = _load_predictions(_path(args.predictions, _wd(args, "predictions")))
    transcripts = _load_transcripts(_path(args.transcripts, _fixtures_dir(args) / "transcripts"), preds)
    out = _path(args.out, _wd(args, "kg"))
    formats = ("dot", "json") if args.format == "both" else (args.format,)
    for doc, (spans, rels) in preds.items():
        g = assemble(spans, rels, transcripts[doc])
        for fmt in formats:
            atomic_write(out / f"{doc}.{fmt}", export_graph(g, fmt))
        print(f"{doc}\t{len(g.nodes)} nodes\t{len(g.edges)} edges")
    return 0


def evaluate_predictions(preds, transcripts, annotations) -> dict:
    """Token, mention and relation metrics of predictions against annotations."""
    gold_tags, pred_tags, gold_spans, pred_spans = [], [], [], []
    rel_gold, rel_pred = [], []
    for doc, (spans, rels) in preds.items():
        t, ann = transcripts[doc], annotations[doc]
        g_by = [[] for _ in t.lines]
        p_by = [[] for _ in t.lines]
        for s in ann.spans.values():
            if s is not None:
                g_by[s.sent_index].append((s.start, s.end))
        for s in spans:
            p_by[s.sent_index].append((s.start, s.end))
        for ln, g, p in zip(t.lines, g_by, p_by):
            gold_tags.append(iobes_tags(len(ln.tokens), g))
            pred_tags.append(iobes_tags(len(ln.tokens), p))
        gold_spans += g_by
        pred_spans += p_by
        index = {s: i for i, s in enumerate(spans)}
        by_pair = {(i, j): lbl for i, j, lbl, _ in rels}
        ids = [pid for pid, s in ann.spans.items() if s is not None]
        for a in ids:
            for b in ids:
                if a == b:
                    continue
                rel_gold.append(ann.relations.get((a, b), RelationLabel.NONE))
                ia, ib = index.get(ann.spans[a]), index.get(ann.spans[b])
                rel_pred.append(RelationLabel.NONE if ia is None or ib is None else by_pair.get((ia, ib), RelationLabel.NONE))
    tm = token_metrics(gold_tags, pred_tags)
    mm = mention_metrics(gold_spans, pred_spans)
    rm = relation_metrics(rel_gold, rel_pred)
    return {
        "docs": sorted(preds),
        "token": {"accuracy": tm.accuracy, "f1": tm.f1},
        "mention": {k: getattr(mm, k) for k in ("precision", "recall", "f1", "accuracy", "n_gold", "n_pred", "hits", "overlap_f1")},
        "relation": rm.to_json(),
    }


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    from .plotting import plot_confusion

    fx = _fixtures_dir(args)
    preds = _load_predictions(_path(args.predictions, _wd(args, "predictions")))
    transcripts = _load_transcripts(_path(args.transcripts, fx / "transcripts"), preds)
    gdir = _path(args.gold, fx / "gold")
    annotations = {d: load_annotation(gdir / f"{d}.jsonl", d) for d in preds}
    report = evaluate_predictions(preds, transcripts, annotations)

    matches_dir = _path(args.matches, _wd(args, "matches"))
    if matches_dir.is_dir():
        accs = []
        for doc, p in _doc_files(matches_dir, ".jsonl").items():
            if (gdir / f"{doc}.jsonl").exists():
                got = {r["phrase_id"]: span_from_json(r["span"])[1] for r in _read_jsonl(p) if r["span"]}
                accs.append((doc, phrase_accuracy(load_annotation(gdir / f"{doc}.jsonl", doc).spans, got)))
        if accs:
            report["matching"] = {"docs": len(accs), "mention_accuracy": sum(a for _, a in accs) / len(accs)}

    out = _path(args.out, _wd(args, "reports"))
    rel = report["relation"]
    rows = [
        ["token accuracy", f"{100 * report['token']['accuracy']:.1f}"],
        ["token F1", f"{100 * report['token']['f1']:.1f}"],
        ["mention P", f"{100 * report['mention']['precision']:.1f}"],
        ["mention R", f"{100 * report['mention']['recall']:.1f}"],
        ["mention F1", f"{100 * report['mention']['f1']:.1f}"],
        ["relation accuracy", f"{100 * rel['accuracy']:.1f}"],
        ["relation micro F1", f"{100 * rel['micro_f1']:.1f}"],
        ["<next> F1", f"{100 * rel['f1']['next']:.1f}"],
        ["<if> F1", f"{100 * rel['f1']['if']:.1f}"],
    ]
    if "matching" in report:
        rows.insert(0, ["matching mention accuracy", f"{100 * report['matching']['mention_accuracy']:.1f}"])
    table = format_table(["metric", "value"], rows, title=f"Evaluation on {len(preds)} document(s)")
    atomic_write(out / "metrics.json", _dumps(report))
    atomic_write(out / "metrics.tsv", "metric\tvalue\n" + "".join(f"{a}\t{b}\n" for a, b in rows))
    atomic_write(out / "metrics.txt", table)
    out.mkdir(parents=True, exist_ok=True)
    plot_confusion(rel["confusion"], rel["labels"], out / "confusion.png", title="relation confusion")
    print(table, end="")
    return 0


def cmd_sweep(args, cfg: PipelineConfig) -> int:
    from .plotting import plot_context_curves
    from .sweep import check_monotone, run_sweep, summarize, sweep_table

    matched = _load_matched(args)
    emb = read_embeddings(_path(args.embeddings, _fixtures_dir(args) / "embeddings.txt"))
    split = split_documents(list(matched), cfg.seed)
    test_docs = split["dev"] + split["test"]
    annotations = None
    gdir = _path(args.gold, _fixtures_dir(args) / "gold")
    if gdir.is_dir():
        annotations = {d: load_annotation(gdir / f"{d}.jsonl", d) for d in test_docs if (gdir / f"{d}.jsonl").exists()}
    results = run_sweep(
        matched, emb, split["train"], test_docs,
        ks=args.ks, portions=args.portions, seeds=range(args.seeds), poolings=args.poolings or [cfg.pooling],
        annotations=annotations, l2=cfg.re_l2, lr=cfg.re_lr, epochs=cfg.re_epochs,
    )
    summary = summarize(results)
    out = _path(args.out, _wd(args, "reports"))
    keys = ["test_set", "pooling", "k", "portion", "seed", "accuracy", "micro_f1", "next_f1", "if_f1"]
    atomic_write(out / "sweep-runs.tsv", "\t".join(keys) + "\n" + "".join(
        "\t".join(str(r.to_json()[k]) for k in keys) + "\n" for r in results))
    skeys = list(summary[0]) if summary else []
    atomic_write(out / "sweep-summary.tsv", "\t".join(skeys) + "\n" + "".join(
        "\t".join(str(r[k]) for k in skeys) + "\n" for r in summary))
    table = sweep_table(summary)
    atomic_write(out / "sweep.txt", table)
    out.mkdir(parents=True, exist_ok=True)
    plot_context_curves(summary, out / "sweep-context.png")
    print(table, end="")
    if not any(r["pooling"] == args.monotone_pooling for r in summary):
        print(f"monotone check skipped: no {args.monotone_pooling} runs in the sweep")
        return 0
    failures = check_monotone(summary, args.monotone_pooling)
    print(f"monotone check ({args.monotone_pooling}, K=2 > K=0 micro-F1): " + ("pass" if not failures else "FAIL"))
    for f in failures:
        print("  " + f)
    if failures and args.require_monotone:
        raise ValidationFailure("K=2 does not beat K=0")
    return 0


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--workdir", default=".", help="root of the stage directories (default: .)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    _add_config_flags(common)

    p = _Parser(prog="ctaparse", description="Weakly-supervised procedural knowledge extraction from transcripts.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("make-fixtures", cmd_make_fixtures, "write a synthetic corpus with planted spans and relations")
    sp.add_argument("--out")
    sp.add_argument("--family", choices=("separable", "contextual"), default="separable")
    sp.add_argument("--n-docs", type=int, default=30)

    sp = add("parse-protocol", cmd_parse_protocol, "parse and validate protocol files")
    sp.add_argument("--protocols", help="protocol file or directory of <doc>.txt")
    sp.add_argument("--out")

    sp = add("match", cmd_match, "match protocol phrases to transcript spans")
    for opt in ("--graphs", "--transcripts", "--embeddings", "--out"):
        sp.add_argument(opt)

    for name, fn, help_ in (("gen-datasets", cmd_gen_datasets, "build sequence and pair datasets from matches"),
                            ("sweep", cmd_sweep, "context level x sampling portion ablation grid")):
        sp = add(name, fn, help_)
        for opt in ("--graphs", "--matches", "--transcripts", "--out"):
            sp.add_argument(opt)
    sp.add_argument("--embeddings")
    sp.add_argument("--gold")
    sp.add_argument("--ks", type=int, nargs="+", default=[0, 1, 2, 3])
    sp.add_argument("--portions", nargs="+", default=["6:3:1", "4:2:1", "1:1:1"])
    sp.add_argument("--seeds", type=int, default=5, help="number of seeds per cell (0..n-1)")
    sp.add_argument("--poolings", nargs="+", choices=("masked-max", "masked-avg", "unmasked-avg"))
    sp.add_argument("--monotone-pooling", default="unmasked-avg", help="pooling mode the K=2 > K=0 check applies to")
    sp.add_argument("--require-monotone", action="store_true", help="exit 3 if K=2 does not beat K=0")

    sp = add("train-seq", cmd_train_seq, "train the CRF span labeler")
    sp.add_argument("--datasets")
    sp.add_argument("--out")

    sp = add("train-re", cmd_train_re, "train the span-pair relation classifier")
    for opt in ("--datasets", "--embeddings", "--out"):
        sp.add_argument(opt)

    sp = add("predict", cmd_predict, "extract spans and classify span pairs")
    for opt in ("--transcripts", "--crf", "--re", "--embeddings", "--datasets", "--out"):
        sp.add_argument(opt)
    sp.add_argument("--split", choices=("train", "dev", "test", "all"), default="test")
    sp.add_argument("--docs", nargs="+", help="explicit document ids (overrides --split)")

    sp = add("evaluate", cmd_evaluate, "score predictions against annotations")
    for opt in ("--predictions", "--transcripts", "--gold", "--matches", "--out"):
        sp.add_argument(opt)

    sp = add("assemble", cmd_assemble, "assemble knowledge graphs and export them")
    for opt in ("--predictions", "--transcripts", "--out"):
        sp.add_argument(opt)
    sp.add_argument("--format", choices=("dot", "json", "both"), default="both")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except ValidationFailure as exc:
        print(f"ctaparse: validation failed: {exc}", file=sys.stderr)
        return 3
    except (FormatError, ProtocolParseError, SpanError, DataError, TrainingError, FileNotFoundError,
            KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"ctaparse: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
