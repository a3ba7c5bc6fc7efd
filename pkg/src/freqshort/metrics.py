"""Degree-of-shortcut metrics: threshold grouping and group averages.

A class counts as shortcut-affected at threshold t when its TPR on
frequency-filtered images strictly exceeds t. For each threshold the report
carries both groups' average TPR on original and on filtered images,
averaged within the group only; an empty group yields NaN, never zero.
Classes whose TPR is undefined (no images) are excluded from both groups
and listed separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "DEFAULT_THRESHOLDS",
    "ThresholdRow",
    "ShortcutReport",
    "group_and_average",
    "shortcut_class_counts",
    "write_report_table",
    "read_report_table",
    "write_plot_data",
]

DEFAULT_THRESHOLDS: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass(frozen=True)
class ThresholdRow:
    """Grouping and the four group averages at one threshold."""

    threshold: float
    shortcut_classes: tuple[int, ...]
    nonshortcut_classes: tuple[int, ...]
    avg_tpr_sct: float
    avg_tpr_dfm_sct: float
    avg_tpr_non: float
    avg_tpr_dfm_non: float

    @property
    def shortcut_count(self) -> int:
        return len(self.shortcut_classes)

    @property
    def nonshortcut_count(self) -> int:
        return len(self.nonshortcut_classes)

    @property
    def dfm_exceeds_full(self) -> bool:
        """Filtered beats full-spectrum within the shortcut group — the
        signature of classes classified almost entirely from their map."""
        if np.isnan(self.avg_tpr_sct) or np.isnan(self.avg_tpr_dfm_sct):
            return False
        return self.avg_tpr_dfm_sct > self.avg_tpr_sct


@dataclass(frozen=True)
class ShortcutReport:
    class_count: int
    thresholds: tuple[float, ...]
    rows: tuple[ThresholdRow, ...]
    undefined_classes: tuple[int, ...]

    def row(self, threshold: float) -> ThresholdRow:
        for r in self.rows:
            if np.isclose(r.threshold, threshold):
                return r
        raise KeyError(f"no row at threshold {threshold}")

    def counts(self) -> np.ndarray:
        return np.asarray([r.shortcut_count for r in self.rows])


def _group_mean(values: np.ndarray, members: tuple[int, ...]) -> float:
    if not members:
        return float("nan")
    return float(values[list(members)].mean())


def group_and_average(
    tpr: np.ndarray,
    tpr_dfm: np.ndarray,
    thresholds: tuple[float, ...] | None = None,
) -> ShortcutReport:
    """Split classes into shortcut / non-shortcut per threshold and average.

    Grouping uses strict inequality tpr_dfm > t; a class sitting exactly at
    the threshold is non-shortcut.
    """
    tpr = np.asarray(tpr, dtype=float)
    tpr_dfm = np.asarray(tpr_dfm, dtype=float)
    if tpr.shape != tpr_dfm.shape or tpr.ndim != 1:
        raise ConfigurationError(
            f"TPR vectors must share one length, got {tpr.shape} and {tpr_dfm.shape}"
        )
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else tuple(thresholds)
    if any(not (0.0 < t < 1.0) for t in thresholds):
        raise ConfigurationError("thresholds must lie strictly inside (0, 1)")

    defined = ~(np.isnan(tpr) | np.isnan(tpr_dfm))
    undefined = tuple(int(i) for i in np.flatnonzero(~defined))
    rows = []
    for t in thresholds:
        sct = tuple(int(i) for i in np.flatnonzero(defined & (tpr_dfm > t)))
        non = tuple(int(i) for i in np.flatnonzero(defined & ~(tpr_dfm > t)))
        rows.append(
            ThresholdRow(
                threshold=float(t),
                shortcut_classes=sct,
                nonshortcut_classes=non,
                avg_tpr_sct=_group_mean(tpr, sct),
                avg_tpr_dfm_sct=_group_mean(tpr_dfm, sct),
                avg_tpr_non=_group_mean(tpr, non),
                avg_tpr_dfm_non=_group_mean(tpr_dfm, non),
            )
        )
    return ShortcutReport(
        class_count=len(tpr),
        thresholds=thresholds,
        rows=tuple(rows),
        undefined_classes=undefined,
    )


def shortcut_class_counts(
    reports: list[ShortcutReport], thresholds: tuple[float, ...] | None = None
) -> np.ndarray:
    """Stage x threshold matrix of shortcut-class counts."""
    if not reports:
        raise ConfigurationError("no reports given")
    thresholds = reports[0].thresholds if thresholds is None else tuple(thresholds)
    table = np.zeros((len(reports), len(thresholds)), dtype=int)
    for i, report in enumerate(reports):
        for j, t in enumerate(thresholds):
            table[i, j] = report.row(t).shortcut_count
    return table


_REPORT_COLUMNS = (
    "threshold", "n_shortcut", "n_nonshortcut",
    "avg_tpr_sct", "avg_tpr_dfm_sct", "avg_tpr_non", "avg_tpr_dfm_non",
    "dfm_exceeds_full",
)


def write_report_table(report: ShortcutReport, path) -> None:
    """One TSV row per threshold; floats use repr so reads round-trip."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(_REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([
                repr(row.threshold),
                row.shortcut_count,
                row.nonshortcut_count,
                repr(row.avg_tpr_sct),
                repr(row.avg_tpr_dfm_sct),
                repr(row.avg_tpr_non),
                repr(row.avg_tpr_dfm_non),
                int(row.dfm_exceeds_full),
            ])


def read_report_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        out = []
        for rec in reader:
            out.append({
                "threshold": float(rec["threshold"]),
                "n_shortcut": int(rec["n_shortcut"]),
                "n_nonshortcut": int(rec["n_nonshortcut"]),
                "avg_tpr_sct": float(rec["avg_tpr_sct"]),
                "avg_tpr_dfm_sct": float(rec["avg_tpr_dfm_sct"]),
                "avg_tpr_non": float(rec["avg_tpr_non"]),
                "avg_tpr_dfm_non": float(rec["avg_tpr_dfm_non"]),
                "dfm_exceeds_full": bool(int(rec["dfm_exceeds_full"])),
            })
        return out


def write_plot_data(report: ShortcutReport, path) -> None:
    """Plot-ready columns: threshold, the four averages, both group sizes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow([
            "threshold", "avg_tpr_sct", "avg_tpr_dfm_sct",
            "avg_tpr_non", "avg_tpr_dfm_non", "n_shortcut", "n_nonshortcut",
        ])
        for row in report.rows:
            writer.writerow([
                repr(row.threshold),
                repr(row.avg_tpr_sct), repr(row.avg_tpr_dfm_sct),
                repr(row.avg_tpr_non), repr(row.avg_tpr_dfm_non),
                row.shortcut_count, row.nonshortcut_count,
            ])
