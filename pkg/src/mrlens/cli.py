"""Command-line interface: one subcommand per pipeline stage.

Each command reads and writes only declared artifacts below --out, removes
partial outputs on failure, and exits 0 on success, 2 on usage errors, 3 on
data/validation errors, 4 on network errors, and 5 on insufficient data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .annotations import diff_annotations, import_annotations, write_template
from .config import EXAMPLE_CONFIG, RunConfig, load_config
from .corpus import export_archive, import_archive, parse_timestamp
from .errors import DataValidationError, MrlensError, UsageError
from .features import (
    completion_time,
    extract_completion_features,
    extract_deviation_features,
    history_defaults,
    normalize_target,
)
from .gitlab import ingest_corpus
from .impact import ImpactConfig, run_deviation_vs_regular, run_impact
from .report import (
    category_distribution_figure,
    prevalence_figure,
    rank_eval_records,
    read_verdicts_csv,
    render_impact_csv_markdown,
    render_impact_markdown,
    write_completion_features_csv,
    write_corpus_stats_csv,
    write_deviation_features_csv,
    write_impact_csv,
    write_prevalence_csv,
    write_rank_table_csv,
    write_removal_log_csv,
    write_runs_csv,
    write_verdicts_csv,
)
from .sampling import draw_sample, sample_size
from .service import classify_via_command, classify_via_socket
from .taxonomy import NORMAL_LABEL, detect_corpus, prevalence_report


class OutputTracker:
    """Registers written artifacts so a failing command leaves nothing behind."""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = out_dir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / name
        self.written.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            if p.exists():
                p.unlink()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrlens",
        description="Merge-request review analytics: deviation detection and impact.",
    )
    parser.add_argument("--version", action="version", version=f"mrlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="TOML run configuration file")
        p.add_argument("--out", help="output directory (default from config)")

    ingest = sub.add_parser("ingest", help="fetch MRs from a forge into an archive")
    common(ingest)
    ingest.add_argument("--host", help="forge base URL (overrides config)")
    ingest.add_argument(
        "--project-id", type=int, action="append", help="project to fetch (repeatable)"
    )
    ingest.add_argument("--group", help="group name stored in the corpus metadata")
    ingest.add_argument("--since", help="only MRs updated at/after this ISO timestamp")
    ingest.add_argument(
        "--archive", default="corpus.ndjson", help="archive filename under --out"
    )

    sample = sub.add_parser("sample", help="compute a sample size and draw a sample")
    common(sample)
    sample.add_argument("--population", type=int, help="population size (no corpus needed)")
    sample.add_argument("--corpus", help="corpus archive to sample from")
    sample.add_argument("--size", type=int, help="override the computed sample size")
    sample.add_argument("--seed", type=int, help="sampling seed (overrides config)")
    sample.add_argument(
        "--stratify", action="store_true", help="stratify the draw by project"
    )

    detect = sub.add_parser("detect", help="run the rule-based deviation detector")
    common(detect)
    detect.add_argument("--corpus", required=True, help="corpus archive")
    detect.add_argument(
        "--enable-du", action="store_true",
        help="enable the opt-in documentation-updates category",
    )

    annotate = sub.add_parser("annotate", help="annotation file utilities")
    ann_sub = annotate.add_subparsers(dest="annotate_command", required=True)
    ann_import = ann_sub.add_parser("import", help="validate an annotation file")
    ann_import.add_argument("--file", required=True, help="annotation CSV")
    ann_diff = ann_sub.add_parser("diff", help="agreement between two annotators")
    common(ann_diff)
    ann_diff.add_argument("--left", required=True, help="first annotation CSV")
    ann_diff.add_argument("--right", required=True, help="second annotation CSV")

    classify = sub.add_parser("classify", help="label MRs by rules or via a service")
    common(classify)
    classify.add_argument("--corpus", required=True, help="corpus archive")
    classify.add_argument(
        "--backend", choices=["rules", "service"], help="classifier backend"
    )
    classify.add_argument("--service-cmd", help="command to spawn the classifier service")
    classify.add_argument("--socket", help="host:port of a running classifier service")

    features = sub.add_parser("features", help="export feature tables")
    common(features)
    features.add_argument("--corpus", required=True, help="corpus archive")

    impact = sub.add_parser("impact", help="compare models with vs without deviations")
    common(impact)
    impact.add_argument("--corpus", required=True, help="corpus archive")
    impact.add_argument("--verdicts", required=True, help="verdicts or labels CSV")
    impact.add_argument(
        "--mode", choices=["exclude", "split"], default="exclude",
        help="exclude: full vs deviation-free; split: deviation-only vs regular-only",
    )
    impact.add_argument(
        "--full", action="store_true", help="run the paper-scale 100 bootstraps"
    )
    impact.add_argument("--n-boot", type=int, help="override bootstrap iteration count")
    impact.add_argument("--seed", type=int, help="override the experiment seed")
    impact.add_argument("--n-trees", type=int, help="override trees per ensemble")

    report = sub.add_parser("report", help="render figures and summary tables")
    common(report)
    report.add_argument("--corpus", help="corpus archive")
    report.add_argument("--verdicts", help="verdicts CSV for prevalence figures")
    report.add_argument(
        "--eval-records", help="classifier evaluation export to rank (CSV)"
    )
    report.add_argument(
        "--impact-csv", help="impact table to re-render as a markdown summary"
    )

    init = sub.add_parser("init-config", help="print an example configuration")
    init.add_argument("--out", help="write the example to out/mrlens.toml instead")

    return parser


def _load(args) -> tuple[RunConfig, Path]:
    config = load_config(getattr(args, "config", None))
    out_dir = Path(getattr(args, "out", None) or config.output_dir)
    return config, out_dir


def _read_corpus(path: str):
    return import_archive(path)


def _load_verdicts(path: str, corpus):
    """Accept either detect's verdicts.csv or classify's labels.csv."""
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = next(_csv.reader(fh), [])
    if header[:2] == ["mr_id", "label"] and "matched" in header:
        return read_verdicts_csv(path)
    if header[:2] == ["mr_id", "label"]:
        from .taxonomy import DeviationCategory, DeviationVerdict

        verdicts = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = _csv.DictReader(fh)
            for row in reader:
                label = row["label"]
                if label == NORMAL_LABEL:
                    verdicts.append(
                        DeviationVerdict(
                            mr_id=int(row["mr_id"]), matched=(), primary=None,
                            is_deviation=False,
                        )
                    )
                else:
                    cat = DeviationCategory(label)
                    verdicts.append(
                        DeviationVerdict(
                            mr_id=int(row["mr_id"]),
                            matched=((cat, "classifier"),),
                            primary=cat,
                            is_deviation=True,
                        )
                    )
        return verdicts
    raise DataValidationError(f"{path}: not a verdicts or labels file")


def cmd_ingest(args, config: RunConfig, out: OutputTracker) -> int:
    host = args.host or config.api.host
    if not host:
        raise UsageError("no forge host: pass --host or set api.host in the config")
    project_ids = args.project_id or list(config.api.project_ids)
    if not project_ids:
        raise UsageError("no projects: pass --project-id or set api.project_ids")
    token = config.api.token()
    since = parse_timestamp(args.since) if args.since else None
    corpus = ingest_corpus(
        host,
        project_ids,
        token,
        since=since,
        group=args.group or config.api.group,
        page_size=config.api.page_size,
        retry=config.api.retry_policy(),
        fanout=config.api.fanout,
    )
    archive_path = out.path(args.archive)
    export_archive(corpus, archive_path)
    print(f"ingested {len(corpus.records)} merge requests into {archive_path}")
    return 0


def cmd_sample(args, config: RunConfig, out: OutputTracker) -> int:
    corpus = None
    if args.corpus:
        corpus = _read_corpus(args.corpus)
        population = len(corpus.records)
    elif args.population is not None:
        population = args.population
    else:
        raise UsageError("pass --population or --corpus")
    plan = sample_size(
        population,
        z=config.sampling.z,
        margin=config.sampling.margin,
        proportion=config.sampling.proportion,
    )
    size = args.size if args.size is not None else plan.final
    print(
        f"population {plan.population}: sample size {plan.final} "
        f"(z={plan.z}, margin={plan.margin}, p={plan.proportion}, "
        f"unadjusted {plan.unadjusted:.2f})"
    )
    template_path = out.path("annotation_template.csv")
    if corpus is not None:
        seed = args.seed if args.seed is not None else config.sampling.seed
        stratify = args.stratify or config.sampling.stratify
        picked = draw_sample(corpus, size, seed=seed, stratify_by_project=stratify)
        by_key = {(r.project_id, r.id): r for r in corpus.records}
        rows = [(mr_id, by_key[(pid, mr_id)].web_url) for pid, mr_id in picked]
        write_template(template_path, rows)
        print(f"wrote {len(rows)}-row annotation template to {template_path}")
    else:
        write_template(template_path, [])
        print(f"wrote empty annotation template to {template_path}")
    return 0


def cmd_detect(args, config: RunConfig, out: OutputTracker) -> int:
    corpus = _read_corpus(args.corpus)
    rules = config.rules.with_du(True) if args.enable_du else config.rules
    verdicts = detect_corpus(corpus, rules)
    prevalences = prevalence_report(verdicts, corpus)
    write_verdicts_csv(out.path("verdicts.csv"), verdicts)
    write_prevalence_csv(out.path("prevalence.csv"), prevalences)
    n_dev = sum(1 for v in verdicts if v.is_deviation)
    print(
        f"detected {n_dev} deviations across {len(verdicts)} MRs "
        f"({100.0 * n_dev / len(verdicts):.2f}%)" if verdicts else "empty corpus"
    )
    return 0


def cmd_annotate(args, config: RunConfig, out: OutputTracker) -> int:
    if args.annotate_command == "import":
        ann = import_annotations(args.file)
        counts: dict[str, int] = {}
        for e in ann.entries:
            counts[e.label] = counts.get(e.label, 0) + 1
        print(f"annotator {ann.annotator}: {len(ann.entries)} annotated MRs")
        for label in sorted(counts):
            print(f"  {label}: {counts[label]}")
        return 0
    left = import_annotations(args.left)
    right = import_annotations(args.right)
    agreement = diff_annotations(left, right)
    print(
        f"agreement {agreement.agreement_pct:.2f}% "
        f"({agreement.matches}/{agreement.total})"
    )
    if agreement.disagreeing_ids:
        print(f"disagreements: {', '.join(map(str, agreement.disagreeing_ids))}")
    import csv as _csv

    with out.path("agreement.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["left_label", "right_label", "count"])
        for (la, lb), count in sorted(agreement.confusion.items()):
            writer.writerow([la, lb, count])
    return 0


def cmd_classify(args, config: RunConfig, out: OutputTracker) -> int:
    corpus = _read_corpus(args.corpus)
    backend = args.backend or config.classifier.backend
    records = sorted(corpus.records, key=lambda r: (r.project_id, r.id))
    import csv as _csv

    labels_path = out.path("labels.csv")
    if backend == "rules":
        verdicts = {v.mr_id: v for v in detect_corpus(corpus, config.rules)}
        rows = [
            [r.id, verdicts[r.id].label, "1.000000"]
            for r in records
        ]
    else:
        command = args.service_cmd or config.classifier.service_cmd
        socket_addr = args.socket or config.classifier.socket
        if command:
            labels = classify_via_command(records, command)
        elif socket_addr:
            labels = classify_via_socket(records, socket_addr)
        else:
            raise UsageError(
                "service backend needs --service-cmd or --socket (or config keys)"
            )
        rows = [[c.mr_id, c.label, f"{c.score:.6f}"] for c in labels]
    with labels_path.open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["mr_id", "label", "score"])
        writer.writerows(rows)
    print(f"classified {len(rows)} MRs via {backend} backend -> {labels_path}")
    return 0


def cmd_features(args, config: RunConfig, out: OutputTracker) -> int:
    corpus = _read_corpus(args.corpus)
    dev_vectors = [extract_deviation_features(r) for r in corpus.records]
    write_deviation_features_csv(out.path("deviation_features.csv"), dev_vectors)

    defaults = history_defaults(corpus)
    merged = [r for r in corpus.records if r.state == "merged"]
    completion_vectors = [
        extract_completion_features(r, corpus, defaults) for r in merged
    ]
    hours = [completion_time(r) for r in merged]
    targets = {}
    if merged:
        values, _ = normalize_target(hours)
        targets = {r.id: v for r, v in zip(merged, values)}
    write_completion_features_csv(
        out.path("completion_features.csv"), completion_vectors, targets
    )
    print(
        f"wrote {len(dev_vectors)} deviation vectors and "
        f"{len(completion_vectors)} completion vectors"
    )
    return 0


def cmd_impact(args, config: RunConfig, out: OutputTracker) -> int:
    corpus = _read_corpus(args.corpus)
    verdicts = _load_verdicts(args.verdicts, corpus)
    n_boot = 100 if args.full else config.impact.n_boot
    if args.n_boot is not None:
        n_boot = args.n_boot
    impact_config = ImpactConfig(
        n_boot=n_boot,
        seed=args.seed if args.seed is not None else config.impact.seed,
        corr_threshold=config.impact.corr_threshold,
        r2_threshold=config.impact.r2_threshold,
        min_arm_size=config.impact.min_arm_size,
        n_trees=args.n_trees if args.n_trees is not None else config.models.n_trees,
        min_leaf=config.models.min_leaf,
        learning_rate=config.models.learning_rate,
        model_kinds=tuple(config.models.kinds),
        importance=config.models.importance,
    )
    runner = run_impact if args.mode == "exclude" else run_deviation_vs_regular
    report = runner(corpus, verdicts, impact_config)
    write_impact_csv(out.path("impact.csv"), report)
    out.path("impact.md").write_text(render_impact_markdown(report), encoding="utf-8")
    write_runs_csv(out.path("runs.csv"), report)
    for proj in report.projects:
        for arm in (proj.arm_a, proj.arm_b):
            write_removal_log_csv(
                out.path(f"removals_{proj.project_id}_{arm.arm}.csv"), arm.removal_log
            )
            for kind, ko in sorted(arm.per_kind.items()):
                write_rank_table_csv(
                    out.path(f"ranks_{proj.project_id}_{arm.arm}_{kind}.csv"),
                    ko.rank_table,
                )
    for row in report.all_rows():
        if row.mse is not None:
            print(
                f"project {row.project_id} {row.kind}: "
                f"mse x{row.mse.ratio:.2f} mae x{row.mae.ratio:.2f} "
                f"sa x{row.sa.ratio:.2f} tau {row.kendall.value:.2f}"
            )
        else:
            print(
                f"project {row.project_id} {row.kind}: tau {row.kendall.value:.2f} "
                f"t1 {row.t1.value:.2f} t3 {row.t3.value:.2f} t5 {row.t5.value:.2f}"
            )
    return 0


def cmd_report(args, config: RunConfig, out: OutputTracker) -> int:
    wrote_anything = False
    if args.corpus and args.verdicts:
        corpus = _read_corpus(args.corpus)
        verdicts = _load_verdicts(args.verdicts, corpus)
        prevalences = prevalence_report(verdicts, corpus)
        write_prevalence_csv(out.path("prevalence.csv"), prevalences)
        out.path("prevalence.svg").write_text(
            prevalence_figure(prevalences), encoding="utf-8"
        )
        out.path("categories.svg").write_text(
            category_distribution_figure(prevalences), encoding="utf-8"
        )
        write_corpus_stats_csv(out.path("corpus_stats.csv"), corpus)
        wrote_anything = True
        print(f"prevalence figures for {len(prevalences)} project(s) written")
    if args.eval_records:
        table = rank_eval_records(args.eval_records)
        write_rank_table_csv(out.path("classifier_ranks.csv"), table)
        wrote_anything = True
        best = [e.name for e in table.entries if e.rank == 1]
        print(f"classifier configurations ranked; rank 1: {', '.join(best)}")
    if args.impact_csv:
        out.path("impact_summary.md").write_text(
            render_impact_csv_markdown(args.impact_csv), encoding="utf-8"
        )
        wrote_anything = True
        print("impact summary rendered")
    if not wrote_anything:
        raise UsageError(
            "report needs --corpus with --verdicts, --eval-records, or --impact-csv"
        )
    return 0


def cmd_init_config(args) -> int:
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / "mrlens.toml"
        target.write_text(EXAMPLE_CONFIG, encoding="utf-8")
        print(f"wrote {target}")
    else:
        print(EXAMPLE_CONFIG, end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "init-config":
        return cmd_init_config(args)
    handlers = {
        "ingest": cmd_ingest,
        "sample": cmd_sample,
        "detect": cmd_detect,
        "annotate": cmd_annotate,
        "classify": cmd_classify,
        "features": cmd_features,
        "impact": cmd_impact,
        "report": cmd_report,
    }
    out: OutputTracker | None = None
    try:
        config, out_dir = _load(args)
        out = OutputTracker(out_dir)
        return handlers[args.command](args, config, out)
    except MrlensError as exc:
        if out is not None:
            out.cleanup()
        print(f"error: {exc.code_name}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - unexpected failures
        if out is not None:
            out.cleanup()
        print(f"error: internal-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
