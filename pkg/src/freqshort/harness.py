"""End-to-end evaluation of a classifier across ID and OOD datasets.

The shortcut/non-shortcut partition is fixed once from the ID test set's
filtered TPR and then reused verbatim on every other dataset, so the same
class groups are tracked across distribution shifts. OOD sets may cover
only part of the class vocabulary (an alias file maps their class names
onto the searched classes); metrics then use the intersection and group
sizes shrink accordingly.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import LabeledDataset
from .errors import ConfigurationError
from .metrics import DEFAULT_THRESHOLDS, ShortcutReport, group_and_average
from .models import ClassifierEndpoint, class_tpr
from .search import DFMSet
from .spectral import filter_batch

__all__ = [
    "ROLE_ID_TEST",
    "ROLE_OOD_TEXTURE",
    "ROLE_OOD_RENDITION",
    "ROLE_ADVERSARIAL",
    "EvaluationDataset",
    "DatasetResult",
    "EvaluationRun",
    "evaluate_datasets",
    "compare_groups",
    "write_comparison",
]

ROLE_ID_TEST = "id-test"
ROLE_OOD_TEXTURE = "ood-texture-preserving"
ROLE_OOD_RENDITION = "ood-rendition"
ROLE_ADVERSARIAL = "adversarial"
_ROLES = (ROLE_ID_TEST, ROLE_OOD_TEXTURE, ROLE_OOD_RENDITION, ROLE_ADVERSARIAL)


@dataclass
class EvaluationDataset:
    """A dataset plus its role; alias maps dataset class name -> DFM class name."""

    name: str
    dataset: LabeledDataset
    role: str
    alias: dict[str, str] | None = None

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ConfigurationError(
                f"unknown dataset role {self.role!r}; expected one of {_ROLES}"
            )


@dataclass
class DatasetResult:
    """Per-class TPRs (in DFM class order, NaN where absent) and the report."""

    name: str
    role: str
    tpr: np.ndarray
    tpr_dfm: np.ndarray
    evaluated_classes: tuple[str, ...]
    report: ShortcutReport


@dataclass
class EvaluationRun:
    endpoint_name: str
    config_hash: str
    thresholds: tuple[float, ...]
    class_names: tuple[str, ...]
    id_grouping: dict[float, tuple[tuple[int, ...], tuple[int, ...]]]
    results: list[DatasetResult] = field(default_factory=list)

    def result(self, name: str) -> DatasetResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def _dataset_tprs(
    endpoint: ClassifierEndpoint,
    dfms: DFMSet,
    entry: EvaluationDataset,
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Original and filtered TPR vectors in DFM class order (NaN = absent)."""
    ds = entry.dataset
    alias = entry.alias or {}
    dfm_index = {name: i for i, name in enumerate(dfms.class_names)}

    tpr = np.full(len(dfms.class_names), np.nan)
    tpr_dfm = np.full(len(dfms.class_names), np.nan)
    evaluated = []
    for local_idx, local_name in enumerate(ds.class_names):
        target = alias.get(local_name, local_name)
        if target not in dfm_index:
            continue
        k = dfm_index[target]
        sel = ds.class_indices(local_idx)
        if sel.size == 0:
            continue
        images = ds.images[sel]
        logits = endpoint.predict_logits(images)
        preds_to = logits.argmax(axis=1)
        tpr[k] = float((preds_to == k).mean())
        filtered = filter_batch(images, dfms.masks[target])
        logits_f = endpoint.predict_logits(filtered)
        tpr_dfm[k] = float((logits_f.argmax(axis=1) == k).mean())
        evaluated.append(target)
    if not evaluated:
        raise ConfigurationError(
            f"dataset {entry.name!r} shares no classes with the DFM set"
        )
    return tpr, tpr_dfm, tuple(evaluated)


def evaluate_datasets(
    endpoint: ClassifierEndpoint,
    dfms: DFMSet,
    datasets: list[EvaluationDataset],
    thresholds: tuple[float, ...] | None = None,
    workers: int = 1,
) -> EvaluationRun:
    """Score every dataset on originals and filtered images.

    Exactly one dataset must carry the id-test role; its filtered TPR fixes
    the class grouping for the whole run.
    """
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else tuple(thresholds)
    id_entries = [d for d in datasets if d.role == ROLE_ID_TEST]
    if len(id_entries) != 1:
        raise ConfigurationError(
            f"need exactly one {ROLE_ID_TEST} dataset, got {len(id_entries)}"
        )

    def score(entry: EvaluationDataset) -> tuple[EvaluationDataset, np.ndarray, np.ndarray, tuple[str, ...]]:
        tpr, tpr_dfm, evaluated = _dataset_tprs(endpoint, dfms, entry)
        return entry, tpr, tpr_dfm, evaluated

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(score, datasets))
    else:
        scored = [score(d) for d in datasets]

    id_scored = next(s for s in scored if s[0].role == ROLE_ID_TEST)
    id_report = group_and_average(id_scored[1], id_scored[2], thresholds)
    grouping = {
        row.threshold: (row.shortcut_classes, row.nonshortcut_classes)
        for row in id_report.rows
    }

    run = EvaluationRun(
        endpoint_name=endpoint.name,
        config_hash=dfms.config_hash,
        thresholds=thresholds,
        class_names=dfms.class_names,
        id_grouping=grouping,
    )
    for entry, tpr, tpr_dfm, evaluated in scored:
        if entry.role == ROLE_ID_TEST:
            report = id_report
        else:
            report = _regroup_with_id_partition(tpr, tpr_dfm, grouping, thresholds)
        run.results.append(
            DatasetResult(
                name=entry.name, role=entry.role,
                tpr=tpr, tpr_dfm=tpr_dfm,
                evaluated_classes=evaluated, report=report,
            )
        )
    return run


def _regroup_with_id_partition(
    tpr: np.ndarray,
    tpr_dfm: np.ndarray,
    grouping: dict[float, tuple[tuple[int, ...], tuple[int, ...]]],
    thresholds: tuple[float, ...],
) -> ShortcutReport:
    """Apply the ID partition to another dataset's TPR vectors.

    Group membership is byte-identical to the ID grouping; classes the
    dataset does not cover drop out of the averages and the reported sizes.
    """
    from .metrics import ShortcutReport, ThresholdRow

    defined = ~(np.isnan(tpr) | np.isnan(tpr_dfm))
    rows = []
    for t in thresholds:
        sct_all, non_all = grouping[float(t)]
        sct = tuple(i for i in sct_all if defined[i])
        non = tuple(i for i in non_all if defined[i])
        mean = lambda vec, members: float(vec[list(members)].mean()) if members else float("nan")
        rows.append(
            ThresholdRow(
                threshold=float(t),
                shortcut_classes=sct,
                nonshortcut_classes=non,
                avg_tpr_sct=mean(tpr, sct),
                avg_tpr_dfm_sct=mean(tpr_dfm, sct),
                avg_tpr_non=mean(tpr, non),
                avg_tpr_dfm_non=mean(tpr_dfm, non),
            )
        )
    return ShortcutReport(
        class_count=len(tpr),
        thresholds=tuple(thresholds),
        rows=tuple(rows),
        undefined_classes=tuple(int(i) for i in np.flatnonzero(~defined)),
    )


def compare_groups(run: EvaluationRun) -> list[dict]:
    """Cross-dataset rows: group averages, sizes and the sct-vs-non sign."""
    out = []
    for result in run.results:
        for row in result.report.rows:
            delta = row.avg_tpr_sct - row.avg_tpr_non
            sign = "na" if np.isnan(delta) else ("+" if delta > 0 else ("-" if delta < 0 else "0"))
            out.append({
                "dataset": result.name,
                "role": result.role,
                "threshold": row.threshold,
                "avg_tpr_sct": row.avg_tpr_sct,
                "avg_tpr_dfm_sct": row.avg_tpr_dfm_sct,
                "avg_tpr_non": row.avg_tpr_non,
                "avg_tpr_dfm_non": row.avg_tpr_dfm_non,
                "n_shortcut": row.shortcut_count,
                "n_nonshortcut": row.nonshortcut_count,
                "sct_minus_non_sign": sign,
            })
    return out


def write_comparison(run: EvaluationRun, path) -> None:
    rows = compare_groups(run)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                repr(v) if isinstance(v, float) else v for v in (row[k] for k in header)
            ])


def save_tpr_vectors(run: EvaluationRun, out_dir) -> None:
    """Per-dataset TPR vectors with the config hash, for later re-reporting."""
    out = Path(out_dir)
    for result in run.results:
        payload = {
            "config_hash": run.config_hash,
            "dataset": result.name,
            "role": result.role,
            "classes": list(run.class_names),
            "thresholds": list(run.thresholds),
            "tpr": [repr(float(v)) for v in result.tpr],
            "tpr_dfm": [repr(float(v)) for v in result.tpr_dfm],
        }
        (out / f"{result.name}.tprs.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True)
        )
