"""Command-line entry point: ingest, refine, graph, train, eval, ablate,
classify, analyze.

Exit codes: 0 success, 1 validation/config failure, 2 environment or
endpoint failure. Every state-changing command leaves a manifest next to
its outputs so artifacts chain by digest.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import taxonomy
from .config import ConfigError, data_paths_from, read_config, train_config_from
from .dataset import ValidationError, dump_samples, load_samples, sample_to_record
from .manifest import write_manifest
from .refine import EndpointError, endpoint_from_env, refine_batch

log = logging.getLogger("ltc")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ltc", description=__doc__)
    p.add_argument("--stub", action="store_true",
                   help="force all external endpoints to fixture mode")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command")

    sp = sub.add_parser("ingest", help="validate samples and build a store")
    sp.add_argument("--samples", required=True)
    sp.add_argument("--parses")
    sp.add_argument("--out", required=True)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true")
    mode.add_argument("--lenient", action="store_true")

    sp = sub.add_parser("refine", help="rewrite sentences through the LLM endpoint")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--style", default="requirement-list",
                    choices=["requirement-list", "role-playing"])
    sp.add_argument("--retries", type=int, default=3)

    sp = sub.add_parser("graph", help="export one sample's graph as DOT")
    sp.add_argument("--store", help="ingest output directory")
    sp.add_argument("--samples")
    sp.add_argument("--parses")
    sp.add_argument("--sample", required=True, help="sample id")
    sp.add_argument("--dot", required=True)
    sp.add_argument("--variant", default="regular", choices=["regular", "llm-refined"])

    for name in ("train", "ablate"):
        sp = sub.add_parser(name, help="cross-validated training" if name == "train"
                            else "train an ablation variant")
        sp.add_argument("--config", required=True)
        sp.add_argument("--samples")
        sp.add_argument("--parses")
        sp.add_argument("--out", default=f"runs/{name}")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--folds", type=int)
        if name == "ablate":
            sp.add_argument("--variant", required=True,
                            choices=["no-mask", "no-scl", "no-triple"])

    sp = sub.add_parser("eval", help="evaluate a checkpoint on labeled samples")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--samples", required=True)
    sp.add_argument("--parses")
    sp.add_argument("--out")

    sp = sub.add_parser("classify", help="label corpus triples with a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--parses")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("analyze", help="corpus analytics over labeled tuples")
    sp.add_argument("what", choices=["ratios", "departures", "lifestages", "distances"])
    sp.add_argument("--config", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--types", default="Military,Competition",
                    help="comma-separated types for ratio series")
    return p


# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples, report = load_samples(args.samples, args.parses, strict=args.strict)
    dump_samples(samples, out / "samples.jsonl")
    with open(out / "rejects.jsonl", "w", encoding="utf-8") as fp:
        fp.write(report.to_jsonl())
    inputs = {"samples": args.samples}
    if args.parses:
        inputs["parses"] = args.parses
    write_manifest(out, "ingest", inputs,
                   {"samples": out / "samples.jsonl", "rejects": out / "rejects.jsonl"})
    print(f"ingested {len(samples)} samples, rejected {len(report)}")
    return 0


def cmd_refine(args) -> int:
    samples, rejects = load_samples(args.inp, require_parse=False)
    endpoint = endpoint_from_env(stub=args.stub)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report_path = out.with_suffix(out.suffix + ".report.jsonl")
    n_fallback = 0
    with open(out, "w", encoding="utf-8") as fo, open(report_path, "w", encoding="utf-8") as fr:
        for sample, result in refine_batch(samples, endpoint, style=args.style,
                                           max_retries=args.retries):
            rec = sample_to_record(sample)
            rec["refined_sentence"] = result.refined
            fo.write(json.dumps(rec, ensure_ascii=False) + "\n")
            fr.write(json.dumps({
                "id": sample.id, "attempts": result.attempts,
                "fell_back": result.fell_back,
                "constraints": result.constraint_report.to_dict(),
            }) + "\n")
            n_fallback += result.fell_back
    write_manifest(out.parent, "refine", {"samples": args.inp},
                   {"refined": out, "report": report_path},
                   name=out.name + ".manifest.json")
    print(f"refined {len(samples)} samples ({n_fallback} fell back, "
          f"{len(rejects)} rejected at load)")
    return 0


def cmd_graph(args) -> int:
    from .syntax_graph import build_graph, entity_verb_paths, to_dot, tokenize_with_markers
    from .tokenization import HashTokenizer

    samples_path = Path(args.store) / "samples.jsonl" if args.store else args.samples
    if not samples_path:
        raise ValidationError("provide --store or --samples")
    samples, _ = load_samples(samples_path, args.parses)
    match = [s for s in samples if s.id == args.sample]
    if not match:
        raise ValidationError(f"sample id {args.sample!r} not found in {samples_path}")
    view = match[0].active_view(args.variant)
    alignment = tokenize_with_markers(view, HashTokenizer())
    graph = build_graph(view, alignment)
    subgraph = entity_verb_paths(graph)
    Path(args.dot).write_text(to_dot(graph, alignment, subgraph), encoding="utf-8")
    print(f"wrote {args.dot} ({len(graph.nodes)} nodes, "
          f"{len(subgraph.nodes)} in trajectory subgraph"
          + (", fallback" if subgraph.fallback else "") + ")")
    return 0


def _load_train_inputs(args):
    cp = read_config(args.config)
    cfg_samples, cfg_parses = data_paths_from(cp)
    samples_path = args.samples or cfg_samples
    parses_path = args.parses or cfg_parses
    if not samples_path:
        raise ValidationError("no samples path given (flag --samples or [dataset] samples)")
    overrides = {"seed": args.seed, "epochs": args.epochs, "folds": args.folds}
    if getattr(args, "variant", None):
        overrides["ablation"] = args.variant
    config = train_config_from(cp, **overrides)
    samples, rejects = load_samples(samples_path, parses_path)
    if not samples:
        raise ValidationError(f"no valid samples in {samples_path}")
    if len(rejects):
        log.warning("%d records rejected at load", len(rejects))
    return config, samples, samples_path, parses_path


def cmd_train(args) -> int:
    from .fusion import save_checkpoint
    from .training import run_cv, train_full

    config, samples, samples_path, parses_path = _load_train_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = run_cv(samples, config)
    with open(out / "cv_report.json", "w", encoding="utf-8") as fp:
        json.dump(result.to_dict(), fp, indent=2)
    for fold in result.folds:
        (out / f"confusion_fold{fold.fold}.csv").write_text(
            fold.best.confusion_csv(), encoding="utf-8")

    model, tokenizer, final_report = train_full(samples, config)
    ckpt = out / "checkpoint"
    save_checkpoint(model, tokenizer, ckpt, extra={
        "granularity": config.granularity, "dataset_variant": config.dataset_variant,
        "verb_tags": list(config.verb_tags), "seed": config.seed,
        "train_config_hash": config.hash(),
    })

    inputs = {"samples": samples_path}
    if parses_path:
        inputs["parses"] = parses_path
    write_manifest(out, args.command, inputs,
                   {"cv_report": out / "cv_report.json", "checkpoint": ckpt},
                   config_hash=config.hash(), seed=config.seed,
                   extra={"aggregate": result.aggregate()})
    agg = result.aggregate()
    print(f"cv accuracy {agg['accuracy']:.4f}, weighted f1 {agg['weighted_f1']:.4f} "
          f"(final full-fit train accuracy {final_report.accuracy:.4f})")
    return 0


def cmd_eval(args) -> int:
    from .fusion import load_checkpoint
    from .training import TrainConfig, encode_for_run, evaluate

    model, tokenizer, manifest = load_checkpoint(args.checkpoint)
    samples, _ = load_samples(args.samples, args.parses)
    config = TrainConfig(granularity=manifest.get("granularity", "type"),
                         dataset_variant=manifest.get("dataset_variant", "regular"),
                         verb_tags=tuple(manifest.get("verb_tags", ["VERB"])))
    encoded = encode_for_run(samples, tokenizer, config)
    labeled = [e for e in encoded if e.label_id is not None]
    if not labeled:
        raise ValidationError("no labeled samples to evaluate")
    report = evaluate(model, labeled, config)
    line = (f"accuracy {report.accuracy:.4f}  weighted P {report.weighted_precision:.4f} "
            f"R {report.weighted_recall:.4f} F1 {report.weighted_f1:.4f}")
    print(line)
    if args.out:
        report.to_json(args.out)
    return 0


def cmd_classify(args) -> int:
    from .classify import classify_corpus_file
    from .fusion import load_checkpoint

    model, tokenizer, manifest = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report = classify_corpus_file(args.inp, out, model, tokenizer, manifest,
                                  parses_path=args.parses)
    skips = out.with_suffix(out.suffix + ".skips.json")
    with open(skips, "w", encoding="utf-8") as fp:
        json.dump(report.to_dict(), fp, indent=2)
    inputs = {"triples": args.inp, "checkpoint": args.checkpoint}
    write_manifest(out.parent, "classify", inputs, {"tuples": out, "skips": skips},
                   name=out.name + ".manifest.json")
    print(f"labeled tuples written to {out} "
          f"({report.no_year} without a year, {len(report.encode_failures)} skipped)")
    return 0


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fp:
        w = csv.writer(fp)
        w.writerow(header)
        w.writerows(rows)


def cmd_analyze(args) -> int:
    from . import analytics, plots
    from .geocode import enrich_tuples, geocoder_from_env

    cp = read_config(args.config)
    sec = cp["analytics"] if cp.has_section("analytics") else {}
    year_range = (int(sec.get("year_min", 1700)), int(sec.get("year_max", 2000)))
    bin_width = int(sec.get("bin_width", 5))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    tuples = analytics.read_tuples(args.inp)
    outputs: dict[str, Path] = {}

    if args.what == "ratios":
        names = [taxonomy.parse_label(t) for t in args.types.split(",")]
        series = {n: analytics.type_ratio_series(tuples, n, bin_width, year_range)
                  for n in names}
        rows = [(b, n, "" if v is None else f"{v:.6f}")
                for n in names for b, v in series[n]]
        _write_csv(out / "ratios.csv", ["bin_start", "type", "ratio"], rows)
        plots.save_ratio_series(series, out / "ratios.png", bin_width)
        outputs = {"csv": out / "ratios.csv", "png": out / "ratios.png"}
        if len(names) >= 2:
            xs, ys = analytics.paired_series(series[names[0]], series[names[1]])
            try:
                r, p = analytics.pearson(xs, ys)
            except ValueError as err:
                log.info("correlation skipped: %s", err)
            else:
                with open(out / "correlation.json", "w", encoding="utf-8") as fp:
                    json.dump({"types": names[:2], "pearson_r": r, "p_value": p,
                               "paired_bins": len(xs)}, fp, indent=2)
                outputs["correlation"] = out / "correlation.json"
                print(f"pearson r between {names[0]} and {names[1]}: {r:.3f} (p={p:.3g})")

    if args.what in ("departures", "distances"):
        geo = cp["geocoder"] if cp.has_section("geocoder") else {}
        cache = geo.get("cache", str(out / "geocache.json"))
        geocoder = geocoder_from_env(cache, stub=args.stub,
                                     min_interval=float(geo.get("min_interval", 1.0)))
        tuples = enrich_tuples(tuples, geocoder)

    timelines = analytics.build_timelines(tuples, year_range)

    if args.what == "departures":
        home = sec.get("home_country")
        if not home:
            raise ConfigError("analyze departures needs [analytics] home_country")
        series = analytics.departure_ratio_series(
            timelines, home, top_types=int(sec.get("top_types", 8)),
            bin_width=bin_width, year_range=year_range,
            min_distance_km=float(sec.get("min_distance_km", 0.0)))
        rows = []
        for b in series.bin_starts:
            if series.travels.get(b):
                for t, v in series.stacked_ratios(b).items():
                    rows.append((b, t, f"{v:.6f}", series.travels[b],
                                 series.departures.get(b, 0)))
        _write_csv(out / "departures.csv",
                   ["bin_start", "type", "ratio", "travels", "departures"], rows)
        plots.save_departures(series, out / "departures.png")
        outputs = {"csv": out / "departures.csv", "png": out / "departures.png"}

    elif args.what == "lifestages":
        hist = analytics.life_stage_histogram(timelines,
                                              group_width=int(sec.get("group_width", 10)))
        rows = [(g, t, hist.counts.get(g, {}).get(t, 0))
                for g in hist.age_groups
                for t in list(analytics.LIFE_STAGE_TYPES) + ["Other"]]
        _write_csv(out / "lifestages.csv", ["age_group", "type", "count"], rows)
        plots.save_life_stages(hist, out / "lifestages.png")
        outputs = {"csv": out / "lifestages.csv", "png": out / "lifestages.png"}

    elif args.what == "distances":
        dists = {t: analytics.birth_distance_distribution(timelines, t)
                 for t in ("Education", "Career")}
        rows = []
        for t, d in dists.items():
            for i, c in enumerate(d.bin_counts):
                rows.append((t, f"{d.bin_edges[i]:.3f}", f"{d.bin_edges[i + 1]:.3f}", c))
            rows.append((t, "mean", "", f"{d.mean_km:.3f}"))
        _write_csv(out / "distances.csv", ["type", "bin_lo_km", "bin_hi_km", "count"], rows)
        plots.save_distance_distribution(dists, out / "distances.png")
        outputs = {"csv": out / "distances.csv", "png": out / "distances.png"}

    write_manifest(out, f"analyze {args.what}", {"tuples": args.inp}, outputs,
                   name=f"{args.what}.manifest.json")
    print(f"wrote {', '.join(str(p) for p in outputs.values())}")
    return 0


_HANDLERS = {
    "ingest": cmd_ingest,
    "refine": cmd_refine,
    "graph": cmd_graph,
    "train": cmd_train,
    "ablate": cmd_train,
    "eval": cmd_eval,
    "classify": cmd_classify,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0; usage errors map to the validation exit code
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_help()
        return 1
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError, ConfigError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (EndpointError, RuntimeError, OSError) as err:
        print(f"environment error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
