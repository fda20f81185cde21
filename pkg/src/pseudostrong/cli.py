"""Command-line interface.

Subcommands mirror the pipeline: ``simulate`` (or bring your own dump),
``filter``, ``export``, ``eval`` and ``compare``. Every written artifact
gets a run manifest next to it; ``replay`` re-runs a manifest and checks
that the outputs come out byte-identical.

Exit status: 0 on success, 2 on bad input, 1 on internal errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .detections import DEFAULT_TAU, dumps, read_dump, threshold_filter
from .errors import ManifestMismatch, PseudoStrongError
from .metrics import ApReport, evaluate
from .pseudo_labels import build_pseudo_labels, class_consistency_filter, export_voc, nms
from .report import render_table
from .simulator import NoiseParams, corrupt_dataset
from .voc import image_level_labels, load_devkit

log = logging.getLogger("pseudostrong")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2

MANIFEST_SUFFIX = ".manifest.json"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(out: Path) -> Path:
    out = Path(out)
    if out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + MANIFEST_SUFFIX)


def _output_digests(out: Path) -> dict[str, str]:
    out = Path(out)
    if out.is_dir():
        files = sorted(
            p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json"
        )
        return {p.relative_to(out).as_posix(): sha256_file(p) for p in files}
    return {out.name: sha256_file(out)}


def write_manifest(command: str, args: argparse.Namespace, inputs: dict, out: Path) -> Path:
    """Record how ``out`` was produced. No timestamps, so reruns match byte for byte."""
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "verbose")}
    doc = {
        "command": command,
        "tool_version": __version__,
        "inputs": {k: {"path": str(p), "sha256": sha256_file(p)} if Path(p).is_file()
                   else {"path": str(p)} for k, p in inputs.items()},
        "params": params,
        "outputs": _output_digests(out),
    }
    path = manifest_path(out)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def _write_text(path: Path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    path.write_text(text)


def _read_dets(path):
    with open(path) as fh:
        return read_dump(fh, provenance=Path(path).name)


# -- commands ---------------------------------------------------------------


def cmd_eval(args) -> int:
    gt = load_devkit(args.gt, args.split, workers=args.workers)
    dets = _read_dets(args.dets)
    report = evaluate(dets, gt, iou_thr=args.iou, mode=args.mode, workers=args.workers)
    sys.stdout.write(render_table([(args.name or Path(args.dets).stem, report)]))
    if args.out:
        _write_text(args.out, report.to_json())
        write_manifest("eval", args, {"dets": args.dets, "gt": args.gt}, Path(args.out))
    return EXIT_OK


def filter_pipeline(dets, gt, tau=DEFAULT_TAU, nms_iou=None):
    """Threshold, then class-consistency filter, then optional NMS."""
    out = threshold_filter(dets, tau)
    out = class_consistency_filter(out, image_level_labels(gt))
    if nms_iou is not None:
        out = nms(out, nms_iou)
    return out


def cmd_filter(args) -> int:
    gt = load_devkit(args.gt, args.split)
    dets = _read_dets(args.dets)
    out = filter_pipeline(dets, gt, args.tau, args.nms)
    _write_text(args.out, dumps(out))
    write_manifest("filter", args, {"dets": args.dets, "gt": args.gt}, Path(args.out))
    log.info("kept %d of %d detections", len(out), len(dets))
    return EXIT_OK


def _filter_params_for(dets_path: Path) -> dict:
    mpath = manifest_path(dets_path)
    if not mpath.is_file():
        return {}
    doc = json.loads(mpath.read_text())
    if doc.get("command") != "filter":
        return {}
    params = doc.get("params", {})
    return {"tau": params.get("tau"), "labels_applied": True, "nms_iou": params.get("nms")}


def cmd_export(args) -> int:
    dets = _read_dets(args.dets)
    pl = build_pseudo_labels(
        dets, max_per_class=args.max_per_class, **_filter_params_for(Path(args.dets))
    )
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise PseudoStrongError(f"output directory {out} is not empty")
    export_voc(pl, out, args.split_name)
    write_manifest("export", args, {"dets": args.dets}, out)
    log.info("exported %d images", len(pl))
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = NoiseParams(
        jitter_sigma=args.jitter,
        miss_prob=args.miss,
        flip_prob=args.flip,
        spurious_rate=args.spurious,
        score_tp=tuple(args.score_tp),
        score_noise=tuple(args.score_noise),
    )
    gt = load_devkit(args.gt, args.split)
    dets = corrupt_dataset(gt, params, args.seed)
    _write_text(args.out, dumps(dets))
    write_manifest("simulate", args, {"gt": args.gt}, Path(args.out))
    return EXIT_OK


def _parse_named(spec: str) -> tuple[str, Path]:
    if "=" in spec:
        name, path = spec.split("=", 1)
        return name, Path(path)
    return Path(spec).stem, Path(spec)


def cmd_compare(args) -> int:
    rows = []
    for spec in args.reports:
        name, path = _parse_named(spec)
        rows.append((name, ApReport.from_json(path.read_text())))
    sys.stdout.write(render_table(rows))
    return EXIT_OK


def replay(manifest: str | os.PathLike, out: str | os.PathLike | None = None) -> dict[str, str]:
    """Re-run the command recorded in ``manifest`` and verify its outputs.

    Writes to ``out`` (a fresh temporary location by default) and raises
    ManifestMismatch unless every output digest matches the record.
    """
    doc = json.loads(Path(manifest).read_text())
    command = doc["command"]
    recorded = doc["outputs"]
    params = dict(doc["params"])
    with tempfile.TemporaryDirectory() as tmp:
        if out is None:
            if command == "export":
                target = Path(tmp) / "export"
            else:
                target = Path(tmp) / next(iter(recorded))
        else:
            target = Path(out)
        params["out"] = str(target)
        args = argparse.Namespace(**params)
        COMMANDS[command](args)
        got = _output_digests(target)
    if got != recorded:
        raise ManifestMismatch(f"replay of {manifest} produced different outputs")
    return got


def cmd_replay(args) -> int:
    digests = replay(args.manifest)
    for name, digest in digests.items():
        print(f"{digest}  {name}")
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "filter": cmd_filter,
    "export": cmd_export,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudostrong", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a detection dump (VOC2007 protocol)")
    p.add_argument("--gt", required=True, help="devkit directory (Annotations/, ImageSets/Main/)")
    p.add_argument("--split", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--iou", type=_unit, default=0.5)
    p.add_argument("--mode", choices=("11pt", "area"), default="11pt")
    p.add_argument("--name", help="row label in the printed table")
    p.add_argument("--out", help="write the AP report (JSON) here")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("filter", help="threshold and class-consistency filter a dump")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--tau", type=_unit, default=DEFAULT_TAU)
    p.add_argument("--nms", type=_unit, default=None, metavar="IOU",
                   help="apply per-class NMS at this IoU (off by default)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("export", help="write a dump as VOC pseudo annotations")
    p.add_argument("--dets", required=True)
    p.add_argument("--out", required=True, help="output devkit directory")
    p.add_argument("--split-name", default="trainval")
    p.add_argument("--max-per-class", type=int, default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("simulate", help="corrupt ground truth into a synthetic dump")
    p.add_argument("--gt", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--miss", type=float, default=0.0)
    p.add_argument("--flip", type=float, default=0.0)
    p.add_argument("--spurious", type=float, default=0.0)
    p.add_argument("--score-tp", type=float, nargs=2, default=[1.0, 1.0], metavar=("LO", "HI"))
    p.add_argument("--score-noise", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="render saved AP reports as one table")
    p.add_argument("reports", nargs="+", metavar="[NAME=]REPORT")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (PseudoStrongError, OSError, ValueError, KeyError) as exc:
        print(f"pseudostrong {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
