"""One-pass-evaluation scoring: precision/success curves and breakdowns.

Precision at threshold tau = fraction of frames whose predicted-vs-truth
center distance is within tau pixels (full-frame pixels). Success at
threshold t = fraction of frames whose IoU exceeds t; the sample at t = 1.0
uses IoU >= 1.0 so perfect tracks do not score a degenerate zero endpoint.
Curves are computed per sequence and averaged with equal sequence weight.
PR is the precision curve at 20 px; SR is the mean of the 21 success samples.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quadscan.boxes import BBox, center_distance, iou
from quadscan.errors import InputError

PRECISION_THRESHOLDS = np.arange(0, 51, dtype=np.float64)
SUCCESS_THRESHOLDS = np.round(np.arange(21, dtype=np.float64) * 0.05, 10)
PRECISION_TAU = 20


@dataclass
class TrackResult:
    """Per-frame predictions and ground truth for one sequence."""

    sequence_id: str
    predictions: list[BBox]
    groundtruth: list[BBox]
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.predictions) != len(self.groundtruth):
            raise InputError(
                f"{self.sequence_id}: {len(self.predictions)} predictions vs "
                f"{len(self.groundtruth)} ground-truth boxes"
            )


@dataclass
class EvalReport:
    precision_curve: np.ndarray  # 51 samples, thresholds 0..50 px
    success_curve: np.ndarray    # 21 samples, thresholds 0..1 step 0.05
    n_sequences: int
    unknown_tags: tuple[str, ...] = ()

    @property
    def pr(self) -> float:
        return float(self.precision_curve[PRECISION_TAU])

    @property
    def sr(self) -> float:
        return float(self.success_curve.mean())


def _sequence_curves(result: TrackResult) -> tuple[np.ndarray, np.ndarray]:
    dists = np.array(
        [center_distance(p, g) for p, g in zip(result.predictions, result.groundtruth)]
    )
    ious = np.array(
        [iou(p, g) for p, g in zip(result.predictions, result.groundtruth)]
    )
    precision = (dists[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    success = (ious[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    success[-1] = (ious >= 1.0).mean()
    return precision, success


def score(results: list[TrackResult]) -> EvalReport:
    """Aggregate OPE metrics, each sequence weighted equally."""
    if not results:
        raise InputError("score requires at least one tracking result")
    precisions = []
    successes = []
    for result in results:
        p, s = _sequence_curves(result)
        precisions.append(p)
        successes.append(s)
    return EvalReport(
        precision_curve=np.mean(precisions, axis=0),
        success_curve=np.mean(successes, axis=0),
        n_sequences=len(results),
    )


def attribute_breakdown(
    results: list[TrackResult], known_tags: tuple[str, ...] | None = None
) -> dict[str, EvalReport]:
    """Metrics restricted to the sequences carrying each tag.

    Tags outside ``known_tags`` (when given) still get reports but are listed
    in each report's ``unknown_tags`` so callers can warn without failing.
    """
    by_tag: dict[str, list[TrackResult]] = {}
    for result in results:
        for tag in result.tags:
            by_tag.setdefault(tag, []).append(result)
    out: dict[str, EvalReport] = {}
    for tag in sorted(by_tag):
        report = score(by_tag[tag])
        if known_tags is not None and tag not in known_tags:
            report.unknown_tags = (tag,)
        out[tag] = report
    return out


def report_summary_text(report: EvalReport,
                        breakdown: dict[str, EvalReport] | None = None) -> str:
    lines = [
        f"sequences = {report.n_sequences}",
        f"pr = {report.pr!r}",
        f"sr = {report.sr!r}",
    ]
    if breakdown:
        for tag, sub in breakdown.items():
            flag = " (unknown tag)" if sub.unknown_tags else ""
            lines.append(f"attr {tag}: pr = {sub.pr!r}, sr = {sub.sr!r}, "
                         f"sequences = {sub.n_sequences}{flag}")
    return "\n".join(lines) + "\n"


def curves_csv_text(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "threshold", "value"])
    for tau, value in zip(PRECISION_THRESHOLDS, report.precision_curve):
        writer.writerow(["precision", repr(float(tau)), repr(float(value))])
    for thr, value in zip(SUCCESS_THRESHOLDS, report.success_curve):
        writer.writerow(["success", repr(float(thr)), repr(float(value))])
    return buf.getvalue()


def write_report(report: EvalReport, out_dir,
                 breakdown: dict[str, EvalReport] | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text(report_summary_text(report, breakdown))
    (out / "curves.csv").write_text(curves_csv_text(report))
