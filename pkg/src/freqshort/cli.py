"""Command-line entry point.

Subcommands: synth, search, filter, eval, report. Progress goes to stderr;
machine-readable output only to files. Exit codes: 0 success, 2
configuration error, 3 I/O error, 4 remote-endpoint failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import dfmfile
from .datasets import (
    LabeledDataset,
    build_planted_oracle,
    generate_planted,
    load_folder_dataset,
    make_band_spec,
    planted_spec_from_dict,
    planted_spec_to_dict,
    save_dataset_tree,
)
from .errors import ConfigurationError, DataError, FreqshortError, RemoteEndpointError
from .harness import EvaluationDataset, evaluate_datasets, save_tpr_vectors, write_comparison
from .metrics import DEFAULT_THRESHOLDS, group_and_average, write_plot_data, write_report_table
from .models import ClassifierEndpoint, load_endpoint, save_endpoint
from .presets import available_presets, load_config
from .protocol import RemoteClassifier
from .search import run_search, select_eval_subset
from .spectral import filter_batch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_REMOTE = 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _prepare_out(path: str, overwrite: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise ConfigurationError(
            f"output directory {out} is not empty (use --overwrite to replace)"
        )
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_thresholds(text: str | None):
    if not text:
        return None
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad --thresholds value: {exc}") from exc
    return values


def _open_endpoint(spec: str) -> ClassifierEndpoint:
    """builtin:<weights.npz> or remote:<host:port>."""
    if spec.startswith("builtin:"):
        return load_endpoint(spec[len("builtin:"):])
    if spec.startswith("remote:"):
        address = spec[len("remote:"):]
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigurationError(f"remote endpoint must be host:port, got {address!r}")
        client = RemoteClassifier.connect(host, int(port))
        # class count resolves on first use; input shape is the caller's business
        return ClassifierEndpoint(
            model=client, class_count=-1, input_shape=(), name=spec,
        )
    raise ConfigurationError(
        f"endpoint must start with builtin: or remote:, got {spec!r}"
    )


def _finish_remote_endpoint(endpoint: ClassifierEndpoint, input_shape, probe: np.ndarray) -> None:
    """Resolve a remote endpoint's class count with one probe batch."""
    endpoint.input_shape = tuple(input_shape)
    logits = endpoint.model.predict(probe[None].astype(np.float64))
    endpoint.class_count = int(logits.shape[1])


# --------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    out = _prepare_out(args.out, args.overwrite)
    if args.spec:
        try:
            data = json.loads(Path(args.spec).read_text())
        except OSError as exc:
            raise DataError(f"cannot read spec file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"bad JSON in spec file: {exc}") from exc
        spec = planted_spec_from_dict(data)
    else:
        spec = make_band_spec()
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, seed=args.seed)

    _log(f"synthesizing {len(spec.classes)} classes at {spec.image_size}x{spec.image_size}")
    train, test, truth = generate_planted(spec)
    save_dataset_tree(train, out / "train")
    save_dataset_tree(test, out / "test")

    np.savez(
        out / "truth_masks.npz",
        classes=np.array(list(truth), dtype=object),
        **{f"mask_{name}": truth[name].bits for name in truth},
    )
    oracle = build_planted_oracle(spec, train)
    save_endpoint(oracle, out / "oracle.npz")
    (out / "planted_spec.json").write_text(
        json.dumps(planted_spec_to_dict(spec), indent=2, sort_keys=True)
    )
    manifest = {
        "classes": list(train.class_names),
        "image_size": spec.image_size,
        "channels": spec.channels,
        "seed": spec.seed,
        "train_per_class": spec.train_per_class,
        "test_per_class": spec.test_per_class,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    _log(f"wrote dataset + oracle to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# search


def _load_tree(path: Path, shape, split: str = "") -> LabeledDataset:
    channels, height, width = shape
    policy = "replicate-to-3" if channels == 3 else "grayscale"
    return load_folder_dataset(path, (height, width), channel_policy=policy, split=split)


def cmd_search(args) -> int:
    config = load_config(args.config, seed=args.seed)
    out = _prepare_out(args.out, args.overwrite)
    endpoint = _open_endpoint(args.endpoint)
    root = Path(args.dataset)

    if endpoint.input_shape:
        shape = endpoint.input_shape
    elif args.image_size:
        shape = (args.channels, args.image_size, args.image_size)
    else:
        raise ConfigurationError("remote endpoints need --image-size (+ --channels)")

    train = _load_tree(root / "train", shape, "train")
    test = _load_tree(root / "test", shape, "test")
    if not endpoint.input_shape or endpoint.class_count < 0:
        _finish_remote_endpoint(endpoint, shape, train.images[0])

    eval_set = select_eval_subset(train, test.per_class_counts(), seed=config.seed)
    _log(
        f"searching: {len(config.stages)} stages, {config.total_candidates} candidates, "
        f"eval set {len(eval_set)} images, workers={args.workers}"
    )
    started = time.perf_counter()
    dfms, trace = run_search(config, endpoint, eval_set, workers=args.workers)
    wall = time.perf_counter() - started

    dfmfile.write_dfms(dfms, out / "dfms.dfm")
    trace_payload = {
        "config_hash": config.config_hash,
        "seed": config.seed,
        "best_loss": {
            f"{stage}:{name}": points
            for (stage, name), points in trace.best_loss.items()
        },
    }
    (out / "trace.json").write_text(json.dumps(trace_payload, indent=2, sort_keys=True))
    summary = {
        "config_hash": config.config_hash,
        "seed": config.seed,
        "preset": config.preset_id,
        "eval_set_size": len(eval_set),
        "candidates": config.total_candidates,
        "images_evaluated": trace.images_processed,
        "wall_seconds": wall,
        "coverage": dfms.coverage(),
        "final_loss": dfms.final_loss,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    _log(f"search done in {wall:.1f}s; {trace.images_processed} images evaluated")
    return EXIT_OK


# --------------------------------------------------------------------------
# filter


def cmd_filter(args) -> int:
    dfms = dfmfile.read_dfms(args.dfm)
    out = _prepare_out(args.out, args.overwrite)
    root = Path(args.dataset)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    ds = load_folder_dataset(root, (dfms.height, dfms.width), channel_policy="keep",
                             write_manifest=False)
    written = 0
    filtered_classes = []
    for idx, name in enumerate(ds.class_names):
        if name not in dfms.masks:
            _log(f"warning: class {name!r} has no map in {args.dfm}; skipped")
            continue
        sel = ds.class_indices(idx)
        filtered = filter_batch(ds.images[sel], dfms.masks[name])
        subset = LabeledDataset(
            (name,), filtered, np.zeros(len(sel), dtype=int), source=str(root)
        )
        save_dataset_tree(subset, out)
        filtered_classes.append(name)
        written += len(sel)
    (out / "filter_manifest.json").write_text(json.dumps({
        "config_hash": dfms.config_hash,
        "dfm_seed": dfms.seed,
        "classes": filtered_classes,
        "images": written,
    }, indent=2, sort_keys=True))
    _log(f"wrote {written} filtered images to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read run manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"bad JSON in run manifest: {exc}") from exc
    base = manifest_path.parent

    def resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base / path

    dfms = dfmfile.read_dfms(resolve(manifest["dfm"]))
    endpoint_spec = str(manifest["endpoint"])
    if endpoint_spec.startswith("builtin:"):
        endpoint = _open_endpoint(
            "builtin:" + str(resolve(endpoint_spec[len("builtin:"):]))
        )
    else:
        endpoint = _open_endpoint(endpoint_spec)
    thresholds = _parse_thresholds(args.thresholds) or tuple(
        manifest.get("thresholds", DEFAULT_THRESHOLDS)
    )

    entries = []
    for item in manifest["datasets"]:
        shape = endpoint.input_shape or (
            int(manifest.get("channels", 1)), dfms.height, dfms.width
        )
        ds = _load_tree(resolve(item["path"]), shape, split=item["name"])
        alias = None
        if item.get("alias"):
            alias = json.loads(resolve(item["alias"]).read_text())
        entries.append(EvaluationDataset(item["name"], ds, item["role"], alias))
        if not endpoint.input_shape or endpoint.class_count < 0:
            _finish_remote_endpoint(endpoint, shape, ds.images[0])

    out = _prepare_out(args.out, args.overwrite)
    _log(f"evaluating {len(entries)} datasets, thresholds {list(thresholds)}")
    run = evaluate_datasets(endpoint, dfms, entries, thresholds, workers=args.workers)

    for result in run.results:
        write_report_table(result.report, out / f"{result.name}.report.tsv")
        write_plot_data(result.report, out / f"{result.name}.plot.tsv")
    save_tpr_vectors(run, out)
    write_comparison(run, out / "comparison.tsv")
    (out / "run_summary.json").write_text(json.dumps({
        "endpoint": run.endpoint_name,
        "config_hash": run.config_hash,
        "thresholds": list(run.thresholds),
        "datasets": [r.name for r in run.results],
    }, indent=2, sort_keys=True))
    _log(f"wrote reports to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    records = []
    for path in sorted(run_dir.glob("*.tprs.json")):
        records.append(json.loads(path.read_text()))
    if not records:
        raise DataError(f"no *.tprs.json files under {run_dir}")
    hashes = {rec["config_hash"] for rec in records}
    if len(hashes) > 1:
        raise ConfigurationError(
            f"mixed config hashes in {run_dir}: {', '.join(sorted(hashes))}"
        )

    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    id_records = [r for r in records if r["role"] == "id-test"]
    if len(id_records) != 1:
        raise ConfigurationError(f"need exactly one id-test record, got {len(id_records)}")

    thresholds = tuple(id_records[0]["thresholds"])
    from .harness import _regroup_with_id_partition

    id_tpr = np.array([float(v) for v in id_records[0]["tpr"]])
    id_dfm = np.array([float(v) for v in id_records[0]["tpr_dfm"]])
    id_report = group_and_average(id_tpr, id_dfm, thresholds)
    grouping = {
        row.threshold: (row.shortcut_classes, row.nonshortcut_classes)
        for row in id_report.rows
    }

    summary_rows = []
    for rec in records:
        tpr = np.array([float(v) for v in rec["tpr"]])
        tpr_dfm = np.array([float(v) for v in rec["tpr_dfm"]])
        if rec["role"] == "id-test":
            report = id_report
        else:
            report = _regroup_with_id_partition(tpr, tpr_dfm, grouping, thresholds)
        write_report_table(report, out / f"{rec['dataset']}.report.tsv")
        write_plot_data(report, out / f"{rec['dataset']}.plot.tsv")
        for row in report.rows:
            summary_rows.append((rec["dataset"], rec["role"], row))

    with open(out / "summary.tsv", "w") as fh:
        fh.write("dataset\trole\tthreshold\tavg_tpr_sct\tavg_tpr_dfm_sct\t"
                 "avg_tpr_non\tavg_tpr_dfm_non\tn_shortcut\tn_nonshortcut\n")
        for dataset, role, row in summary_rows:
            fh.write(
                f"{dataset}\t{role}\t{row.threshold!r}\t{row.avg_tpr_sct!r}\t"
                f"{row.avg_tpr_dfm_sct!r}\t{row.avg_tpr_non!r}\t{row.avg_tpr_dfm_non!r}\t"
                f"{row.shortcut_count}\t{row.nonshortcut_count}\n"
            )
    _log(f"wrote summary tables to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freqshort",
        description="Frequency-shortcut search and evaluation for image classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a planted-shortcut dataset")
    p_synth.add_argument("--spec", help="planted spec JSON (default: built-in 4-class spec)")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--overwrite", action="store_true")
    p_synth.set_defaults(fn=cmd_synth)

    p_search = sub.add_parser("search", help="run the hierarchical subset search")
    p_search.add_argument("--config", required=True,
                          help="preset name or config JSON file")
    p_search.add_argument("--dataset", required=True,
                          help="directory containing train/ and test/ class trees")
    p_search.add_argument("--endpoint", required=True,
                          help="builtin:<weights.npz> or remote:<host:port>")
    p_search.add_argument("--out", required=True)
    p_search.add_argument("--seed", type=int, default=None)
    p_search.add_argument("--workers", type=int, default=1)
    p_search.add_argument("--image-size", type=int, default=None)
    p_search.add_argument("--channels", type=int, default=3)
    p_search.add_argument("--overwrite", action="store_true")
    p_search.set_defaults(fn=cmd_search)

    p_filter = sub.add_parser("filter", help="write map-filtered copies of a dataset")
    p_filter.add_argument("--dataset", required=True)
    p_filter.add_argument("--dfm", required=True)
    p_filter.add_argument("--out", required=True)
    p_filter.add_argument("--overwrite", action="store_true")
    p_filter.set_defaults(fn=cmd_filter)

    p_eval = sub.add_parser("eval", help="evaluate datasets listed in a run manifest")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--thresholds", default=None, help="comma-separated grid")
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.add_argument("--overwrite", action="store_true")
    p_eval.set_defaults(fn=cmd_eval)

    p_report = sub.add_parser("report", help="recompute tables from a run directory")
    p_report.add_argument("--run", required=True)
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RemoteEndpointError as exc:
        _log(f"remote endpoint failure: {exc}")
        return EXIT_REMOTE
    except ConfigurationError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        _log(f"I/O error: {exc}")
        return EXIT_IO
    except FreqshortError as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
