"""Command-line interface."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import fault_kg
from .pipeline import (
    PipelineConfig,
    RunReport,
    StageError,
    build_knowledge_graph,
    discover,
    emit_report,
    filter_datasets,
    prepare,
    run,
    stage_seed,
)
from .saliency_net import (
    Architecture,
    TrainConfig,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    saliency,
    train,
    write_saliency_csv,
)

log = logging.getLogger("subclass_discovery")


def _config(args) -> PipelineConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "mode", None):
        data["modes"] = args.mode
    if getattr(args, "offline", False):
        data["matcher"] = "offline"
    if getattr(args, "out", None):
        data["out_dir"] = args.out
    return PipelineConfig.from_dict(data)


def _out_dir(config: PipelineConfig) -> Path:
    out = Path(config.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_model(config: PipelineConfig):
    train_ds, test = prepare(config)
    if train_ds is None:
        raise ValueError("config has no training split")
    tc = TrainConfig(**{**config.classifier, "seed": stage_seed(config.seed, "classifier")})
    model = train(train_ds.series, train_ds.binary_labels, tc, Architecture(train_ds.length))
    return model, test


def cmd_filter(args) -> int:
    with open(args.metadata, encoding="utf-8") as fh:
        metadata = json.load(fh)
    verdicts = filter_datasets(metadata)
    rows = []
    for v in verdicts:
        failed = [name for name, ok in v.checks.items() if not ok]
        status = "accepted" if v.accepted else "rejected: " + ", ".join(failed)
        print(f"{v.name}: {status}")
        rows.append({"name": v.name, "accepted": v.accepted, "checks": v.checks})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "filter.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    model, test = _train_model(config)
    accuracy = float(np.mean(predict_batch(model, test.series) == test.binary_labels))
    path = _out_dir(config) / "classifier.json"
    save_checkpoint(model, path)
    print(f"test accuracy {accuracy:.3f}; checkpoint written to {path}")
    return 0


def cmd_saliency(args) -> int:
    config = _config(args)
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
        _, test = prepare(config)
    else:
        model, test = _train_model(config)
    out = _out_dir(config)
    write_saliency_csv(saliency(model, test.series), out / "saliency.csv")
    np.savetxt(out / "predictions.txt", predict_batch(model, test.series), fmt="%d")
    print(f"saliency maps and predictions for {len(test)} series written to {out}")
    return 0


def cmd_cluster(args) -> int:
    config = _config(args)
    config.match = False
    report = run(config)
    for path in emit_report(report, _out_dir(config), plots=config.plots):
        print(path)
    return 0


def cmd_discover(args) -> int:
    config = _config(args)
    report_path = Path(args.report or _out_dir(config) / "report.json")
    report = RunReport.from_json(report_path.read_text(encoding="utf-8"))
    report = discover(config, report)
    out = _out_dir(config)
    train_ds, test = prepare(config)
    kg = build_knowledge_graph(train_ds if train_ds is not None else test, config.backend(),
                               stage_seed(config.seed, "kg"))
    (out / "knowledge_graph.ttl").write_text(fault_kg.to_turtle(kg), encoding="utf-8")
    for path in emit_report(report, out, plots=config.plots):
        print(path)
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    report = run(config)
    for path in emit_report(report, out, plots=config.plots or args.plots):
        print(path)
    return 0


def cmd_report(args) -> int:
    report = RunReport.from_json(Path(args.input).read_text(encoding="utf-8"))
    out = Path(args.out or Path(args.input).parent)
    for path in emit_report(report, out, formats=("csv",), plots=args.plots):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subclass-discovery",
        description="Saliency-guided subclass discovery with knowledge-graph matching.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, modes=True):
        p.add_argument("--config", help="JSON pipeline config")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--out", help="output directory")
        if modes:
            p.add_argument("--mode", action="append", choices=["input", "saliency", "multivariate"],
                           help="clustering mode; repeat for several")
            p.add_argument("--offline", action="store_true", help="force the offline matcher")

    p = sub.add_parser("filter", help="check datasets against the selection criteria")
    p.add_argument("metadata", help="JSON list of dataset descriptors")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train the binary classifier")
    common(p, modes=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("saliency", help="write saliency maps and predictions for the test split")
    common(p, modes=False)
    p.add_argument("--checkpoint", help="classifier checkpoint instead of training")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("cluster", help="cluster per predicted class and mode, no matching")
    common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("discover", help="match centroids of a clustering report against the KG")
    common(p)
    p.add_argument("--report", help="clustering report (default: <out>/report.json)")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("run", help="end-to-end pipeline")
    common(p)
    p.add_argument("--plots", action="store_true", help="write SVG centroid plots")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="rebuild CSV tables and plots from report.json")
    p.add_argument("input", help="report.json")
    p.add_argument("--out", help="output directory (default: next to the input)")
    p.add_argument("--plots", action="store_true", help="write SVG centroid plots")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc.detail}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
