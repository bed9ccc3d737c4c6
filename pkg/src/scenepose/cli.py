"""Command line entry point.

Exit codes: 0 on success, 2 on invalid input, 1 on any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .canonical import DEFAULT_BETA, canonical_pose
from .errors import ValidationError
from .report import format_table, report_metrics
from .so3grid import generate_grid
from .tensorfile import read_tensor, write_tensor

log = logging.getLogger("scenepose")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _gen_scene(args) -> dict:
    from .scene import gen_scene

    skeleton = None
    if args.manifest:
        try:
            skeleton = json.loads(Path(args.manifest).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"cannot read scene skeleton: {e}") from None
    path = gen_scene(skeleton, args.out, seed=args.seed or 0, frames=args.frames)
    return {"manifest": str(path)}


def _decompose(args) -> dict:
    from .pipeline import run_pipeline

    summary = run_pipeline(args.manifest, args.out, seed=args.seed, grid_level=args.grid_level, frames=args.frames)
    return {"out": str(args.out), "mean_metrics": summary["mean_metrics"]}


def _pose(args) -> dict:
    pts = read_tensor(args.points)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"points must be N x 3, got {pts.shape}")
    res = canonical_pose(pts.astype(float), generate_grid(args.grid_level), args.beta, args.box_size)
    return {
        "T": res.pose.T.tolist(),
        "R": res.pose.R.m.tolist(),
        "s": res.pose.s,
        "min_volume": res.min_volume,
        "candidate_count": res.candidate_count,
        "chosen_distance": res.chosen_distance,
        "rotation_index": res.rotation_index,
        "degenerate": res.degenerate,
    }


def _metrics(args) -> dict:
    report = report_metrics(args.runs)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=1, sort_keys=True))
    print(format_table(report), file=sys.stderr)
    return report


def _grid_cache(args) -> dict:
    grid = generate_grid(args.grid_level)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"so3_grid_L{args.grid_level}.obpt"
    write_tensor(path, grid.matrices)
    return {"path": str(path), "rotations": len(grid)}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scenepose", description="Object pose recovery and scene decomposition on RGB-D video.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-scene", help="render a synthetic table-top video")
    g.add_argument("--out", required=True)
    g.add_argument("--manifest", help="optional JSON scene skeleton")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--frames", type=int)
    g.set_defaults(func=_gen_scene)

    d = sub.add_parser("decompose", help="run the full pipeline on a manifest")
    d.add_argument("--manifest", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--seed", type=int)
    d.add_argument("--grid-level", type=int)
    d.add_argument("--frames", type=int)
    d.set_defaults(func=_decompose)

    q = sub.add_parser("pose", help="canonical pose of a point tensor")
    q.add_argument("--points", required=True)
    q.add_argument("--grid-level", type=int, default=2)
    q.add_argument("--beta", type=float, default=DEFAULT_BETA)
    q.add_argument("--box-size", type=float, default=0.4)
    q.set_defaults(func=_pose)

    m = sub.add_parser("metrics", help="aggregate scores over run directories")
    m.add_argument("runs", nargs="+")
    m.add_argument("--out")
    m.set_defaults(func=_metrics)

    c = sub.add_parser("grid-cache", help="write a rotation grid to a tensor file")
    c.add_argument("--grid-level", type=int, default=2)
    c.add_argument("--out", required=True)
    c.set_defaults(func=_grid_cache)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        result = args.func(args)
    except (ValidationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
