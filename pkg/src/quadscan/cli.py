"""Command-line entry point: gen, train, eval, bench-fusion, scan-dump.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error. Every command
is deterministic given (config, seed); the fully-resolved configuration is
written next to each command's outputs. QUADSCAN_THREADS caps worker count
(the current implementation is single-threaded; the cap is recorded).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


from quadscan.bench import bench_csv_text, bench_fusion
from quadscan.config import RunConfig
from quadscan.errors import (
    ConfigError,
    DataFormatError,
    GeometryError,
    InputError,
    QuadscanError,
    ShapeError,
)
from quadscan.evaluation import attribute_breakdown, score, write_report
from quadscan.scanorders import TokenGeometry, scan_dump_lines
from quadscan.synthdata import NAMED_SPECS, make_corpus, parse_corpus_spec, read_manifest
from quadscan.synthdata.sequence import read_sequence
from quadscan.tracker import load_tracker, track_sequence, train

_USAGE_ERRORS = (ConfigError, DataFormatError, GeometryError, InputError, ShapeError)


def worker_cap() -> int:
    raw = os.environ.get("QUADSCAN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"QUADSCAN_THREADS must be an integer, got {raw!r}")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(getattr(args, "config", None), getattr(args, "set", None) or [])
    if getattr(args, "seed", None) is not None:
        cfg.set("seed", str(args.seed))
    if getattr(args, "modalities", None):
        cfg.set("modalities", args.modalities)
    if getattr(args, "mfm_paths", None):
        cfg.set("mfm.paths", args.mfm_paths)
    return cfg


def _log_run(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    text = cfg.resolved_text() + f"# workers = {worker_cap()}\n"
    (out_dir / "config_resolved.txt").write_text(text)


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    if args.spec in NAMED_SPECS:
        spec = NAMED_SPECS[args.spec]()
    else:
        spec = parse_corpus_spec(args.spec)
    out = Path(args.out)
    _log_run(cfg, out)
    make_corpus(spec, cfg.get("seed"), out)
    print(f"corpus written to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    _log_run(cfg, out)
    result = train(args.data, cfg.tracker_config(), cfg.schedule(), cfg.get("seed"), out)
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"loss curve: {result.curve_path}")
    print(f"final loss: {result.final_loss!r} after {result.steps} steps")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    _log_run(cfg, out)
    data = Path(args.data)
    manifest = data / args.manifest
    rels = read_manifest(manifest)
    if not rels:
        raise ConfigError(f"{manifest}: manifest lists no sequences")
    model = load_tracker(cfg.tracker_config(), args.checkpoint)
    results = []
    for rel in rels:
        seq = read_sequence(data / rel)
        results.append(track_sequence(model, seq, rel))
    report = score(results)
    breakdown = attribute_breakdown(results)
    write_report(report, out, breakdown)
    print(f"sequences: {report.n_sequences}")
    print(f"pr: {report.pr!r}")
    print(f"sr: {report.sr!r}")
    return 0


def cmd_bench_fusion(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    _log_run(cfg, out)
    lengths = cfg.get("bench.lengths")
    if args.lengths:
        lengths = tuple(int(v) for v in args.lengths.split(","))
    rows = bench_fusion(
        list(lengths),
        dim=cfg.get("bench.dim"),
        state_dim=cfg.get("bench.d_state"),
        conv_width=cfg.get("bench.conv_width"),
        expand=cfg.get("bench.expand"),
        seed=cfg.get("seed"),
        warmups=cfg.get("bench.warmups"),
        repeats=cfg.get("bench.repeats"),
    )
    csv_text = bench_csv_text(rows)
    (out / "fusion_scaling.csv").write_text(csv_text)
    print(csv_text, end="")
    return 0


def cmd_scan_dump(args) -> int:
    cfg = _load_config(args)
    m = args.m if args.m is not None else cfg.get("scan.m")
    n_z = args.n_z if args.n_z is not None else cfg.get("scan.n_z")
    n_x = args.n_x if args.n_x is not None else cfg.get("scan.n_x")
    geo = TokenGeometry(m, n_z, n_x)
    for line in scan_dump_lines(geo):
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadscan",
        description="desk-scale quad-modal tracking: data, training, evaluation, benchmarks",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="base seed (overrides config)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="corpus output directory")
    p.add_argument("--spec", default="default",
                   help="named spec (default, mini) or a spec file path")
    p.set_defaults(fn=cmd_gen)

    modal = argparse.ArgumentParser(add_help=False)
    modal.add_argument("--modalities", help="comma list, e.g. rgb,t,e,l")
    modal.add_argument("--mfm-paths", dest="mfm_paths",
                       help="comma list of fusion paths, e.g. forward,backward")

    p = sub.add_parser("train", parents=[common, modal], help="train a tracker")
    p.add_argument("--data", required=True, help="corpus root (contains train.txt)")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", parents=[common, modal], help="run OPE scoring")
    p.add_argument("--data", required=True, help="corpus root")
    p.add_argument("--checkpoint", required=True, help="model.qtck path")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--manifest", default="test.txt", help="manifest file name")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench-fusion", parents=[common],
                       help="fusion cost scaling vs attention baselines")
    p.add_argument("--out", required=True, help="CSV output directory")
    p.add_argument("--lengths", help="comma list of per-modality token counts")
    p.set_defaults(fn=cmd_bench_fusion)

    p = sub.add_parser("scan-dump", parents=[common],
                       help="print the four scan orders as index lines")
    p.add_argument("--m", type=int, help="modality count")
    p.add_argument("--n-z", dest="n_z", type=int, help="template tokens")
    p.add_argument("--n-x", dest="n_x", type=int, help="search tokens")
    p.set_defaults(fn=cmd_scan_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QuadscanError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
