"""Command-line entry point.

Subcommands: gen-data, train, eval, compare, inspect-weights. Results go
to stdout, errors to stderr; exit code 0 on success, 1 on any domain or
IO error, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import sys
from typing import Any, Callable

import numpy as np

from .configfile import (
    TRAIN_SCHEMA,
    WORLD_SCHEMA,
    build_train_config,
    build_world_config,
    read_config,
)
from .data import generate_world, load_dataset, save_dataset, split
from .errors import GeoContrastError, InvalidInputError
from .evalsuite import EvalReport, evaluate, load_report, save_report
from .geodesy import distance_matrix
from .model import load_checkpoint, save_checkpoint
from .supervision import hierarchical_prior, local_kernel, soft_labels
from .trainer import train, write_training_log

_BOOL_KEYS = ("stratify_regions", "symmetric_loss", "freeze_tau")


def _add_schema_flags(
    parser: argparse.ArgumentParser, schema: dict[str, Callable[[str], Any]]
) -> None:
    for key, conv in schema.items():
        flag = "--" + key.replace("_", "-")
        if key in _BOOL_KEYS:
            parser.add_argument(
                flag, dest=key, action=argparse.BooleanOptionalAction, default=None
            )
        else:
            parser.add_argument(flag, dest=key, type=conv, default=None)


def _overrides(args: argparse.Namespace, schema: dict[str, Any]) -> dict[str, Any]:
    return {
        key: getattr(args, key)
        for key in schema
        if getattr(args, key, None) is not None
    }


def _read_optional_config(path: str | None) -> dict[str, str] | None:
    return read_config(path) if path else None


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = build_world_config(
        _read_optional_config(args.config), _overrides(args, WORLD_SCHEMA)
    )
    samples = generate_world(cfg)
    save_dataset(samples, args.out)
    lats = [s.point.lat_deg for s in samples]
    lons = [s.point.lon_deg for s in samples]
    print(f"wrote {len(samples)} samples to {args.out}")
    print(
        f"bounding box: lat [{min(lats):.5f}, {max(lats):.5f}], "
        f"lon [{min(lons):.5f}, {max(lons):.5f}]"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = build_train_config(
        _read_optional_config(args.config), _overrides(args, TRAIN_SCHEMA)
    )
    samples = load_dataset(args.data)
    train_split, _ = split(samples, cfg.train_frac, cfg.seed)
    result = train(train_split, cfg, mode=args.mode)
    meta = {
        "mode": result.mode,
        "train_config": cfg.to_dict(),
        "dataset_size": len(samples),
        "n_train": len(train_split),
        "d_img": train_split[0].image_feature.size,
    }
    save_checkpoint(result.params, meta, args.out)
    if args.log:
        write_training_log(result.records, args.log)
    final = result.records[-1]
    print(
        f"trained mode={result.mode} on {len(train_split)} samples, "
        f"{len(result.records)} steps"
    )
    print(
        f"final l_total={final['l_total']:.6f} l_sw={final['l_sw']:.6f} "
        f"l_fair={final['l_fair']:.6f}"
    )
    print(f"wrote checkpoint to {args.out}")
    return 0


def _select_split(samples: list, meta: dict, which: str) -> list:
    if which == "all":
        return samples
    train_cfg = meta.get("train_config")
    if not isinstance(train_cfg, dict):
        raise InvalidInputError(
            "checkpoint carries no train_config; only --split all is available"
        )
    train_side, test_side = split(
        samples, float(train_cfg["train_frac"]), int(train_cfg["seed"])
    )
    return train_side if which == "train" else test_side


def cmd_eval(args: argparse.Namespace) -> int:
    params, meta = load_checkpoint(args.checkpoint)
    samples = load_dataset(args.data)
    part = _select_split(samples, meta, args.split)
    report, errors = evaluate(params, part)
    save_report(report, args.report)
    if args.errors:
        np.savetxt(args.errors, errors, fmt="%.17g")
    print(f"split={args.split} n_queries={report.n_queries}")
    print(_format_report_line(report))
    print(f"wrote report to {args.report}")
    return 0


def _format_report_line(report: EvalReport) -> str:
    d = report.to_dict()
    parts = [
        f"med_ge_m={d['med_ge_m']:.2f}",
        f"mean_ge_m={d['mean_ge_m']:.2f}",
        f"r_at_1={d['r_at_1']:.3f}",
        f"geo_align={d['geo_align']:.3f}",
        "ssi=n/a" if d["ssi"] is None else f"ssi={d['ssi']:.3f}",
        f"city_align={d['city_align']:.3f}",
    ]
    return " ".join(parts)


_COMPARE_COLUMNS = (
    # (key, lower_is_better)
    ("med_ge_m", True),
    ("mean_ge_m", True),
    ("r_at_1", False),
    ("geo_align", False),
    ("ssi", False),
    ("city_align", False),
)


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.reports) < 2:
        print("error: compare needs at least 2 report files", file=sys.stderr)
        return 2
    rows = [(path, load_report(path).to_dict()) for path in args.reports]
    best: dict[str, float | None] = {}
    for key, lower in _COMPARE_COLUMNS:
        vals = [d[key] for _, d in rows if d.get(key) is not None]
        best[key] = None if not vals else (min(vals) if lower else max(vals))

    name_w = max(len("report"), *(len(p) for p, _ in rows))
    header = f"{'report':<{name_w}}"
    for key, _ in _COMPARE_COLUMNS:
        header += f"  {key:>11}"
    print(header)
    for path, d in rows:
        line = f"{path:<{name_w}}"
        for key, _ in _COMPARE_COLUMNS:
            val = d.get(key)
            if val is None:
                cell = "n/a"
            else:
                cell = f"{val:.2f}" if key.endswith("ge_m") else f"{val:.3f}"
                if best[key] is not None and val == best[key]:
                    cell += "*"
            line += f"  {cell:>11}"
        print(line)
    print("* best per column (geolocation errors: lower is better)")
    return 0


def cmd_inspect_weights(args: argparse.Namespace) -> int:
    cfg = build_train_config(
        _read_optional_config(args.config), _overrides(args, TRAIN_SCHEMA)
    )
    samples = load_dataset(args.data)
    if not 0 <= args.index < len(samples):
        raise InvalidInputError(
            f"index {args.index} out of range for {len(samples)} samples"
        )
    d = distance_matrix([s.point for s in samples])
    kernel = local_kernel(d, cfg.kernel)
    prior = hierarchical_prior(samples, cfg.kernel)
    w = soft_labels(d, samples, cfg.kernel).values
    i = args.index
    anchor = samples[i]
    print(
        f"sample {anchor.id} street={anchor.street} city={anchor.city} "
        f"lat={anchor.point.lat_deg:.5f} lon={anchor.point.lon_deg:.5f}"
    )
    print(f"{'id':>8}  {'dist_m':>10}  {'kernel':>8}  {'prior':>6}  {'weight':>8}")
    for j in np.argsort(d.values[i]):
        if w[i, j] == 0.0:
            continue
        print(
            f"{samples[j].id:>8}  {d.values[i, j]:>10.2f}  {kernel[i, j]:>8.6f}  "
            f"{prior[i, j]:>6.2f}  {w[i, j]:>8.6f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geocontrast",
        description=(
            "Distance-weighted contrastive geo-localization: synthetic world "
            "generation, training, and retrieval evaluation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser(
        "gen-data", help="generate a synthetic geo-world dataset", formatter_class=fmt
    )
    p.add_argument("--config", help="world config file")
    p.add_argument("--out", required=True, help="output dataset path")
    _add_schema_flags(p, WORLD_SCHEMA)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser(
        "train", help="train an encoder pair on a dataset", formatter_class=fmt
    )
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--config", help="train config file")
    p.add_argument(
        "--mode",
        choices=("sw", "baseline"),
        default="sw",
        help="sw = spatial soft labels + fairness; baseline = hard labels",
    )
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--log", help="optional per-step training log path")
    _add_schema_flags(p, TRAIN_SCHEMA)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "eval", help="evaluate a checkpoint as retrieval", formatter_class=fmt
    )
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--checkpoint", required=True, help="checkpoint path")
    p.add_argument(
        "--split",
        choices=("train", "test", "all"),
        default="test",
        help="which side of the checkpoint's split to score",
    )
    p.add_argument("--report", required=True, help="output report path")
    p.add_argument("--errors", help="optional per-query error file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "compare", help="side-by-side table of report files", formatter_class=fmt
    )
    p.add_argument("--reports", nargs="+", required=True, help="report files")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser(
        "inspect-weights",
        help="print one sample's soft-label row against the dataset",
        formatter_class=fmt,
    )
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--config", help="train config file (kernel keys apply)")
    p.add_argument("--index", type=int, required=True, help="sample index")
    _add_schema_flags(p, TRAIN_SCHEMA)
    p.set_defaults(func=cmd_inspect_weights)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GeoContrastError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
