"""Rendering of every artifact the CLI writes: verdict and prevalence tables,
removal logs, rank tables, the impact comparison table with its markdown
summary, and deterministic SVG bar charts.

All writers emit stable bytes for identical inputs: fixed float formatting,
sorted iteration, LF newlines, no timestamps.
"""

from __future__ import annotations

import csv
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from .annotations import VALID_LABELS
from .corpus import Corpus
from .errors import ParseError
from .features import (
    COMPLETION_FEATURE_NAMES,
    CompletionFeatureVector,
    DeviationFeatureVector,
    TargetValue,
)
from .impact import ImpactReport, MetricComparison
from .stats import EffectSizeLabel, RankTable, RemovalLogEntry, scott_knott_esd
from .taxonomy import (
    NORMAL_LABEL,
    PRIORITY_ORDER,
    DeviationCategory,
    DeviationVerdict,
    ProjectPrevalence,
)

# Superscript marks follow the published table conventions per measure family.
EFFECT_MARKS = {"negligible": "", "small": "+", "medium": "++", "large": "+++"}
KENDALL_MARKS = {"weak": "*", "moderate": "+", "strong": "++"}
TOPK_MARKS = {"negligible": "", "small": "*", "medium": "+", "large": "++"}

SIGNIFICANCE_MARK = "†"  # dagger


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def fmt(value: float) -> str:
    return f"{value:.6f}"


# ---------------------------------------------------------------- verdicts

VERDICT_HEADER = ["mr_id", "label", "is_deviation", "matched", "evidence"]


def write_verdicts_csv(path: str | Path, verdicts: list[DeviationVerdict]) -> None:
    rows = []
    for v in sorted(verdicts, key=lambda v: v.mr_id):
        rows.append(
            [
                v.mr_id,
                v.label,
                int(v.is_deviation),
                "|".join(c.value for c, _ in v.matched),
                "|".join(e for _, e in v.matched),
            ]
        )
    _write_rows(Path(path), VERDICT_HEADER, rows)


def read_verdicts_csv(path: str | Path) -> list[DeviationVerdict]:
    path = Path(path)
    verdicts: list[DeviationVerdict] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != VERDICT_HEADER:
            raise ParseError(f"{path}: expected header {','.join(VERDICT_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                mr_id = int(row[0])
                label = row[1]
                matched_codes = [c for c in row[3].split("|") if c]
                evidence = row[4].split("|") if len(row) > 4 and row[4] else []
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: malformed verdict row") from None
            if label not in VALID_LABELS:
                raise ParseError(f"{path}:{lineno}: unknown label {label!r}")
            matched = tuple(
                (
                    DeviationCategory(code),
                    evidence[i] if i < len(evidence) else "",
                )
                for i, code in enumerate(matched_codes)
            )
            primary = matched[0][0] if matched else None
            if label != NORMAL_LABEL and (primary is None or primary.value != label):
                raise ParseError(
                    f"{path}:{lineno}: label {label!r} does not match matched column"
                )
            verdicts.append(
                DeviationVerdict(
                    mr_id=mr_id,
                    matched=matched,
                    primary=primary,
                    is_deviation=bool(matched),
                )
            )
    return verdicts


# -------------------------------------------------------------- prevalence


def write_prevalence_csv(
    path: str | Path, prevalences: list[ProjectPrevalence]
) -> None:
    header = ["project_id", "n_mrs", "n_deviations", "deviation_pct"] + [
        c.value for c in PRIORITY_ORDER
    ]
    rows = []
    for p in sorted(prevalences, key=lambda p: p.project_id):
        rows.append(
            [p.project_id, p.n_mrs, p.n_deviations, fmt(p.deviation_pct)]
            + [fmt(p.category_shares.get(c.value, 0.0)) for c in PRIORITY_ORDER]
        )
    _write_rows(Path(path), header, rows)


# ------------------------------------------------------------- rank tables


def write_rank_table_csv(path: str | Path, table: RankTable) -> None:
    rows = [[e.name, e.rank, fmt(e.score)] for e in table.entries]
    _write_rows(Path(path), ["name", "rank", "score"], rows)


def write_removal_log_csv(path: str | Path, log: list[RemovalLogEntry]) -> None:
    rows = [[e.dropped, e.cause, fmt(e.statistic)] for e in log]
    _write_rows(Path(path), ["dropped", "cause", "statistic"], rows)


# ------------------------------------------------------------ impact table

IMPACT_HEADER = [
    "project_id",
    "model",
    "mse_ratio",
    "mae_ratio",
    "sa_ratio",
    "kendall",
    "t1",
    "t3",
    "t5",
    "mse_effect",
    "mse_significant",
    "mae_effect",
    "mae_significant",
    "sa_effect",
    "sa_significant",
    "kendall_label",
    "t1_label",
    "t3_label",
    "t5_label",
]


def _comparison_cells(c: MetricComparison | None) -> tuple[str, str, str]:
    if c is None:
        return "", "", ""
    return fmt(c.ratio), c.effect.magnitude, str(int(c.wilcoxon.significant))


def write_impact_csv(path: str | Path, report: ImpactReport) -> None:
    rows = []
    for row in report.all_rows():
        mse = _comparison_cells(row.mse)
        mae = _comparison_cells(row.mae)
        sa = _comparison_cells(row.sa)
        rows.append(
            [
                row.project_id,
                row.kind,
                mse[0],
                mae[0],
                sa[0],
                fmt(row.kendall.value),
                fmt(row.t1.value),
                fmt(row.t3.value),
                fmt(row.t5.value),
                mse[1],
                mse[2],
                mae[1],
                mae[2],
                sa[1],
                sa[2],
                row.kendall.magnitude,
                row.t1.magnitude,
                row.t3.magnitude,
                row.t5.magnitude,
            ]
        )
    _write_rows(Path(path), IMPACT_HEADER, rows)


def _ratio_md(c: MetricComparison | None) -> str:
    if c is None:
        return "-"
    mark = EFFECT_MARKS[c.effect.magnitude]
    sig = SIGNIFICANCE_MARK if c.wilcoxon.significant else ""
    return f"{c.ratio:.2f}{mark}{sig}"


def _label_md(label: EffectSizeLabel, marks: dict[str, str]) -> str:
    return f"{label.value:.2f}{marks[label.magnitude]}"


def render_impact_markdown(report: ImpactReport) -> str:
    lines: list[str] = []
    if report.mode == "exclude":
        lines.append("# Impact of excluding deviation MRs")
    else:
        lines.append("# Deviation-trained vs regular-trained models")
    lines.append("")
    lines.append(
        f"Bootstrap iterations per arm: {report.config.n_boot}; seed {report.config.seed}."
    )
    lines.append("")
    lines.append(
        "| Project | Model | MSE | MAE | SA | K | T1 | T3 | T5 |"
    )
    lines.append("|---|---|---|---|---|---|---|---|---|")
    for row in report.all_rows():
        lines.append(
            "| {p} | {m} | {mse} | {mae} | {sa} | {k} | {t1} | {t3} | {t5} |".format(
                p=row.project_id,
                m=row.kind,
                mse=_ratio_md(row.mse),
                mae=_ratio_md(row.mae),
                sa=_ratio_md(row.sa),
                k=_label_md(row.kendall, KENDALL_MARKS),
                t1=_label_md(row.t1, TOPK_MARKS),
                t3=_label_md(row.t3, TOPK_MARKS),
                t5=_label_md(row.t5, TOPK_MARKS),
            )
        )
    lines.append("")
    lines.append("Effect size on performance deltas: small `+`, medium `++`, large `+++`;")
    lines.append(f"`{SIGNIFICANCE_MARK}` marks a significant paired test (p <= 0.05).")
    lines.append("Rank similarity: weak `*`, moderate `+`, strong `++`.")
    lines.append("Top-k overlap: small `*`, medium `+`, large `++` (negligible unmarked).")
    lines.append("")
    for proj in report.projects:
        lines.append(f"## Project {proj.project_id}")
        lines.append("")
        for arm in (proj.arm_a, proj.arm_b):
            lines.append(
                f"- arm `{arm.arm}`: {arm.n_rows} MRs, "
                f"{len(arm.features)} surviving features, "
                f"{len(arm.removal_log)} dropped"
            )
        common = proj.rows[0].common_features if proj.rows else ()
        lines.append(f"- features compared across arms: {len(common)}")
        lines.append("")
    return "\n".join(lines) + "\n"


def write_runs_csv(path: str | Path, report: ImpactReport) -> None:
    header = ["project_id", "arm", "model", "iteration", "mse", "mae", "sa"]
    rows = []
    for proj in report.projects:
        for arm in (proj.arm_a, proj.arm_b):
            for kind in sorted(arm.per_kind):
                for run in arm.per_kind[kind].runs:
                    rows.append(
                        [
                            proj.project_id,
                            arm.arm,
                            kind,
                            run.iteration,
                            fmt(run.metrics.mse),
                            fmt(run.metrics.mae),
                            fmt(run.metrics.sa),
                        ]
                    )
    _write_rows(Path(path), header, rows)


def render_impact_csv_markdown(path: str | Path) -> str:
    """Re-render the comparison table from a written impact CSV (used by the
    report command so figures and the summary can be produced in one place)."""
    path = Path(path)
    lines = [
        "# Impact comparison",
        "",
        "| Project | Model | MSE | MAE | SA | K | T1 | T3 | T5 |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != IMPACT_HEADER:
            raise ParseError(f"{path}: not an impact table")
        for row in reader:
            def ratio_cell(prefix: str) -> str:
                raw = row[f"{prefix}_ratio"]
                if not raw:
                    return "-"
                mark = EFFECT_MARKS.get(row[f"{prefix}_effect"], "")
                sig = SIGNIFICANCE_MARK if row[f"{prefix}_significant"] == "1" else ""
                return f"{float(raw):.2f}{mark}{sig}"

            def label_cell(name: str, marks: dict[str, str]) -> str:
                return f"{float(row[name]):.2f}{marks.get(row[f'{name}_label'], '')}"

            lines.append(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |".format(
                    row["project_id"],
                    row["model"],
                    ratio_cell("mse"),
                    ratio_cell("mae"),
                    ratio_cell("sa"),
                    label_cell("kendall", KENDALL_MARKS),
                    label_cell("t1", TOPK_MARKS),
                    label_cell("t3", TOPK_MARKS),
                    label_cell("t5", TOPK_MARKS),
                )
            )
    lines.append("")
    return "\n".join(lines) + "\n"


# --------------------------------------------------- classifier eval ranks

EVAL_RECORD_HEADER = ["method", "param", "iteration", "accuracy", "precision", "recall", "f1"]


def rank_eval_records(path: str | Path) -> RankTable:
    """Rank classifier configurations from an evaluation-record export by
    their per-iteration accuracy."""
    path = Path(path)
    groups: dict[str, list[float]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVAL_RECORD_HEADER:
            raise ParseError(
                f"{path}: expected header {','.join(EVAL_RECORD_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = f"{row[0]}-{row[1]}"
                groups.setdefault(key, []).append(float(row[3]))
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: malformed evaluation row") from None
    return scott_knott_esd({k: np.array(v) for k, v in groups.items()})


# ------------------------------------------------------------ feature CSVs


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, frozenset):
        return "|".join(sorted(value))
    if isinstance(value, tuple):
        return "|".join(str(x) for x in value)
    return str(value)


def write_deviation_features_csv(
    path: str | Path, vectors: list[DeviationFeatureVector]
) -> None:
    names = [f.name for f in dataclass_fields(DeviationFeatureVector)]
    rows = [
        [_cell(getattr(v, nm)) for nm in names]
        for v in sorted(vectors, key=lambda v: v.mr_id)
    ]
    _write_rows(Path(path), names, rows)


def write_completion_features_csv(
    path: str | Path,
    vectors: list[CompletionFeatureVector],
    targets: dict[int, TargetValue] | None = None,
) -> None:
    names = ["mr_id", *COMPLETION_FEATURE_NAMES]
    header = list(names)
    if targets is not None:
        header += ["target_hours", "target_normalized"]
    rows = []
    for v in sorted(vectors, key=lambda v: v.mr_id):
        row = [_cell(getattr(v, nm)) for nm in names]
        if targets is not None:
            t = targets.get(v.mr_id)
            row += [fmt(t.raw_hours), fmt(t.normalized)] if t else ["", ""]
        rows.append(row)
    _write_rows(Path(path), header, rows)


# -------------------------------------------------------------- SVG charts

_PALETTE = (
    "#4878a8", "#e49444", "#d1605e", "#85b6b2", "#6a9f58",
    "#e7ca60", "#a87c9f", "#967662",
)


def _svg_header(width: int, height: int, title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width // 2}" y="20" text-anchor="middle" font-size="16">{title}</text>',
    ]


def bar_chart_svg(title: str, bars: list[tuple[str, float]], unit: str = "%") -> str:
    """Simple vertical bar chart; output text is deterministic."""
    width = max(320, 80 + 70 * len(bars))
    height = 320
    plot_h = 220
    base_y = 280
    max_v = max((v for _, v in bars), default=0.0) or 1.0
    parts = _svg_header(width, height, title)
    for i, (label, value) in enumerate(bars):
        x = 50 + i * 70
        h = round(plot_h * value / max_v, 2)
        y = round(base_y - h, 2)
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(
            f'<rect x="{x}" y="{y}" width="44" height="{h}" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{x + 22}" y="{y - 5}" text-anchor="middle">{value:.1f}{unit}</text>'
        )
        parts.append(
            f'<text x="{x + 22}" y="{base_y + 16}" text-anchor="middle">{label}</text>'
        )
    parts.append(f'<line x1="40" y1="{base_y}" x2="{width - 20}" y2="{base_y}" stroke="#333"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def grouped_bar_chart_svg(
    title: str,
    groups: list[str],
    series: list[tuple[str, list[float]]],
    unit: str = "%",
) -> str:
    """Grouped bars: one cluster per group, one colored bar per series."""
    n_groups, n_series = len(groups), len(series)
    bar_w = 18
    cluster_w = bar_w * max(1, n_series) + 24
    width = max(360, 70 + cluster_w * n_groups)
    height = 360
    plot_h = 230
    base_y = 300
    max_v = max((v for _, vs in series for v in vs), default=0.0) or 1.0
    parts = _svg_header(width, height, title)
    for s, (name, _) in enumerate(series):
        color = _PALETTE[s % len(_PALETTE)]
        lx = 60 + s * 120
        parts.append(f'<rect x="{lx}" y="30" width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{lx + 16}" y="41">{name}</text>')
    for g, group in enumerate(groups):
        gx = 50 + g * cluster_w
        for s, (_, values) in enumerate(series):
            v = values[g]
            h = round(plot_h * v / max_v, 2)
            y = round(base_y - h, 2)
            color = _PALETTE[s % len(_PALETTE)]
            parts.append(
                f'<rect x="{gx + s * bar_w}" y="{y}" width="{bar_w - 2}" height="{h}" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{gx + (n_series * bar_w) // 2}" y="{base_y + 16}" '
            f'text-anchor="middle">{group}</text>'
        )
    parts.append(f'<line x1="40" y1="{base_y}" x2="{width - 20}" y2="{base_y}" stroke="#333"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def prevalence_figure(prevalences: list[ProjectPrevalence]) -> str:
    bars = [
        (f"proj {p.project_id}", p.deviation_pct)
        for p in sorted(prevalences, key=lambda p: p.project_id)
    ]
    return bar_chart_svg("Share of deviation MRs per project", bars)


def category_distribution_figure(prevalences: list[ProjectPrevalence]) -> str:
    cats = [c.value for c in PRIORITY_ORDER]
    ordered = sorted(prevalences, key=lambda p: p.project_id)
    series = [
        (f"proj {p.project_id}", [p.category_shares.get(c, 0.0) for c in cats])
        for p in ordered
    ]
    return grouped_bar_chart_svg(
        "Deviation category distribution (% of deviations)", cats, series
    )


def write_corpus_stats_csv(path: str | Path, corpus: Corpus) -> None:
    from .corpus import corpus_stats

    header = ["project_id", "n_mrs", "n_merged", "first_created", "last_created"]
    rows = []
    for s in corpus_stats(corpus):
        rows.append(
            [
                s.project_id,
                s.n_mrs,
                s.n_merged,
                s.first_created.isoformat() if s.first_created else "",
                s.last_created.isoformat() if s.last_created else "",
            ]
        )
    _write_rows(Path(path), header, rows)
