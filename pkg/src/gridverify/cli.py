"""Command-line entry point tying scene generation, decoding, per-cell
verification, proof-map construction, and heatmap emission together.

Exit codes: 0 success, 1 a counterexample was found (verify-cell only, so
scripts can branch on it), 2 usage error, 3 runtime failure. Every run
writes a JSON run manifest recording the subcommand, resolved parameters,
input digests, and timestamps. The environment variable GV_SEED overrides
all stochastic seeds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .netpbm import write_pgm
from .network import ManifestError, forward, load_composed, load_network
from .proofmap import (
    build_partition,
    build_proofmap,
    emit_heatmap,
    load_proofmap,
    save_proofmap,
    stats_table,
)
from .scene import BreakMask, Configuration, SceneModel, apply_break, generate_dataset, render_scene
from .solver import Cell, CorrectnessProperty, SolverConfig, prove_cell

__all__ = ["main"]

_RANGE_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*=\s*\[([^,\]]+),([^,\]]+)\]\s*$")


class UsageError(Exception):
    """Bad argument values; reported with the offending flag, exit code 2."""


def parse_ranges(text: str, flag: str) -> list[tuple[str, float, float]]:
    """Parse `name=[lo,hi];...` into ordered (name, lo, hi) triples."""
    out = []
    for part in text.split(";"):
        if not part.strip():
            continue
        m = _RANGE_RE.match(part)
        if not m:
            raise UsageError(f"{flag}: cannot parse range {part.strip()!r} (expected name=[lo,hi])")
        name = m.group(1)
        try:
            lo, hi = float(m.group(2)), float(m.group(3))
        except ValueError:
            raise UsageError(f"{flag}: non-numeric bound in {part.strip()!r}") from None
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
            raise UsageError(f"{flag}: malformed interval [{lo}, {hi}] for {name}")
        out.append((name, lo, hi))
    if not out:
        raise UsageError(f"{flag}: no ranges given")
    return out


def parse_grid(text: str, flag: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(tok) for tok in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"{flag}: cannot parse grid {text!r} (expected e.g. 20x20)") from None
    if not counts or any(n < 1 for n in counts):
        raise UsageError(f"{flag}: grid counts must be positive")
    return counts


def parse_point(text: str, flag: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"{flag}: cannot parse point {text!r} (expected comma-separated numbers)") from None


def _resolved_seed(args) -> int:
    env = os.environ.get("GV_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"GV_SEED: not an integer: {env!r}") from None
    return getattr(args, "seed", 0)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _network_digests(manifest_path: Path) -> dict[str, str]:
    """Digest a network or composed manifest plus every file it references."""
    digests = {str(manifest_path): _sha256(manifest_path)}
    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    if doc.get("format") == "gridverify-composed":
        for key in ("decoder", "regressor"):
            digests.update(_network_digests(manifest_path.parent / doc[key]))
    elif "blob" in doc:
        blob = manifest_path.parent / doc["blob"]
        digests[str(blob)] = _sha256(blob)
    return digests


def _write_run_manifest(args, default_path, inputs: dict[str, str], started: float) -> None:
    path = Path(getattr(args, "run_manifest", None) or default_path)
    params = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "run_manifest") and not k.startswith("_")
    }
    if "seed" in params:
        params["seed"] = _resolved_seed(args)
    doc = {
        "tool": "gridverify",
        "version": __version__,
        "subcommand": args._subcommand,
        "parameters": params,
        "inputs": inputs,
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _load_composed_checked(path_text: str, flag: str):
    path = Path(path_text)
    if not path.exists():
        raise UsageError(f"{flag}: no such file {path}")
    try:
        return load_composed(path), _network_digests(path)
    except (ManifestError, OSError, json.JSONDecodeError, KeyError) as e:
        raise UsageError(f"{flag}: {e}") from None


# ------------------------------------------------------------------ subcommands

def cmd_dataset(args) -> int:
    started = time.time()
    ranges = {name: (lo, hi) for name, lo, hi in parse_ranges(args.range, "--range")}
    for required in ("d", "theta"):
        if required not in ranges:
            raise UsageError(f"--range: missing {required}=[lo,hi]")
    seed = _resolved_seed(args)
    out = generate_dataset(
        args.count,
        args.out,
        d_range=ranges["d"],
        theta_range=ranges["theta"],
        break_prob=args.break_prob,
        break_max=args.break_max,
        seed=seed,
    )
    print(f"wrote {args.count} images + labels.csv to {out}")
    _write_run_manifest(args, Path(args.out) / "run.json", {}, started)
    return 0


def cmd_render(args) -> int:
    started = time.time()
    img = render_scene(Configuration(args.d, args.theta), SceneModel())
    if args.break_width > 0:
        img = apply_break(img, BreakMask(args.break_width))
    write_pgm(args.out, img)
    print(f"wrote {args.out}")
    _write_run_manifest(args, str(args.out) + ".run.json", {}, started)
    return 0


def cmd_decode(args) -> int:
    started = time.time()
    path = Path(args.net)
    if not path.exists():
        raise UsageError(f"--net: no such file {path}")
    try:
        net = load_network(path)
        digests = _network_digests(path)
    except (ManifestError, OSError, json.JSONDecodeError, KeyError) as e:
        raise UsageError(f"--net: {e}") from None
    point = parse_point(args.point, "--point")
    if point.shape != net.input_shape:
        raise UsageError(
            f"--point: got {point.size} coordinates but {net.name} expects input shape {net.input_shape}"
        )
    out = forward(net, point)
    if out.ndim != 2:
        raise UsageError(f"--net: {net.name} does not produce an image (output shape {out.shape})")
    write_pgm(args.out, np.clip(np.round(out * 255.0), 0, 255).astype(np.uint8))
    if args.values:
        Path(args.values).write_text(
            "".join(f"{float(v)!r}\n" for v in out.reshape(-1)), encoding="utf-8"
        )
    print(f"wrote {args.out}")
    _write_run_manifest(args, str(args.out) + ".run.json", digests, started)
    return 0


def _property_and_config(args) -> tuple[CorrectnessProperty, SolverConfig]:
    if args.epsilon <= 0:
        raise UsageError("--epsilon: must be positive")
    if args.delta <= 0:
        raise UsageError("--delta: must be positive")
    prop = CorrectnessProperty(args.epsilon, args.coord)
    cfg = SolverConfig(
        delta=args.delta,
        max_splits=args.max_splits,
        candidate_points_per_box=args.probes,
        seed=_resolved_seed(args),
    )
    return prop, cfg


def cmd_verify_cell(args) -> int:
    started = time.time()
    net, digests = _load_composed_checked(args.net, "--net")
    ranges = parse_ranges(args.cell, "--cell")
    if len(ranges) != net.input_dim:
        raise UsageError(
            f"--cell: {len(ranges)} dimensions given but the network takes {net.input_dim}"
        )
    prop, cfg = _property_and_config(args)
    if not 0 <= prop.ground_truth_coord < net.input_dim:
        raise UsageError("--coord: out of range for the network input")
    cell = Cell(tuple((lo, hi) for _, lo, hi in ranges))
    res = prove_cell(net, cell, prop, cfg)
    print(f"verdict: {res.verdict.value}")
    print(
        f"boxes explored: {res.stats.boxes_explored}  pruned: {res.stats.boxes_pruned}  "
        f"time: {res.stats.wall_time_s:.3f}s"
    )
    if res.counterexample is not None:
        cex = res.counterexample
        print(f"counterexample point: {list(cex.point)}")
        print(f"network output: {cex.output!r}  violation: {cex.violation!r}")
    if res.stats.note:
        print(f"note: {res.stats.note}")
    if args.out:
        doc = {
            "verdict": res.verdict.value,
            "cell": [list(b) for b in cell.bounds],
            "epsilon": prop.epsilon,
            "delta": cfg.delta,
            "stats": {
                "boxes_explored": res.stats.boxes_explored,
                "boxes_pruned": res.stats.boxes_pruned,
                "time_s": res.stats.wall_time_s,
                "note": res.stats.note,
            },
        }
        if res.counterexample is not None:
            doc["counterexample"] = {
                "point": list(res.counterexample.point),
                "output": res.counterexample.output,
                "violation": res.counterexample.violation,
            }
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    default_manifest = (str(args.out) + ".run.json") if args.out else "verify-cell.run.json"
    _write_run_manifest(args, default_manifest, digests, started)
    return 1 if res.verdict.value == "counterexample" else 0


def cmd_proofmap(args) -> int:
    started = time.time()
    net, digests = _load_composed_checked(args.net, "--net")
    ranges = parse_ranges(args.range, "--range")
    counts = parse_grid(args.grid, "--grid")
    if len(ranges) != len(counts):
        raise UsageError(f"--grid: {len(counts)} dimensions but --range gives {len(ranges)}")
    if len(ranges) != net.input_dim:
        raise UsageError(
            f"--range: {len(ranges)} dimensions given but the network takes {net.input_dim}"
        )
    if args.jobs < 1:
        raise UsageError("--jobs: must be >= 1")
    prop, cfg = _property_and_config(args)
    partition = build_partition(
        [(lo, hi) for _, lo, hi in ranges], counts, [name for name, _, _ in ranges]
    )
    done = {"n": 0}

    def progress(entry):
        done["n"] += 1
        if args.verbose:
            print(f"[{done['n']}/{partition.n_cells}] cell {entry.index}: {entry.result:+d}")

    pm = build_proofmap(
        partition,
        net,
        prop,
        cfg,
        jobs=args.jobs,
        presample_points=args.presample_points,
        out_path=args.out,
        resume=args.resume,
        progress=progress,
    )
    print(stats_table(pm))
    print(f"wrote {args.out}")
    _write_run_manifest(args, str(args.out) + ".run.json", digests, started)
    return 0


def cmd_heatmap(args) -> int:
    started = time.time()
    path = Path(args.map)
    if not path.exists():
        raise UsageError(f"--map: no such file {path}")
    try:
        pm = load_proofmap(path)
    except (ValueError, json.JSONDecodeError) as e:
        raise UsageError(f"--map: {e}") from None
    try:
        emit_heatmap(pm, args.mode, args.out, scale=args.scale, z_slice=args.z_slice)
    except ValueError as e:
        raise UsageError(f"--mode/--z-slice: {e}") from None
    print(f"wrote {args.out}")
    _write_run_manifest(args, str(args.out) + ".run.json", {str(path): _sha256(path)}, started)
    return 0


def cmd_stats(args) -> int:
    started = time.time()
    path = Path(args.map)
    if not path.exists():
        raise UsageError(f"--map: no such file {path}")
    try:
        pm = load_proofmap(path)
    except (ValueError, json.JSONDecodeError) as e:
        raise UsageError(f"--map: {e}") from None
    print(stats_table(pm))
    _write_run_manifest(args, "stats.run.json", {str(path): _sha256(path)}, started)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridverify",
        description="Certify a perception regressor over a partitioned configuration space.",
    )
    parser.add_argument("--version", action="version", version=f"gridverify {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func, _subcommand=name)
        p.add_argument("--run-manifest", default=None, help="path for the run manifest JSON")
        return p

    p = add("dataset", cmd_dataset, "render a labeled synthetic dataset (PGM + CSV)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, required=True, help="number of images")
    p.add_argument(
        "--range",
        default="d=[-3,0];theta=[-0.1,0.2]",
        help="sampling ranges, e.g. 'd=[-3,0];theta=[-0.1,0.2]'",
    )
    p.add_argument("--break-prob", type=float, default=0.0, help="probability of a line break")
    p.add_argument("--break-max", type=float, default=6.0, help="maximum break width (pixels)")
    p.add_argument("--seed", type=int, default=0)

    p = add("render", cmd_render, "render one scene image")
    p.add_argument("--d", type=float, required=True, help="distance to the marker (m)")
    p.add_argument("--theta", type=float, required=True, help="yaw angle (rad)")
    p.add_argument("--break-width", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output PGM path")

    p = add("decode", cmd_decode, "decode a configuration through a decoder network")
    p.add_argument("--net", required=True, help="decoder network manifest")
    p.add_argument("--point", required=True, help="comma-separated configuration; use --point=-1.0,0.05 for negative values")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--values", default=None, help="also write raw float pixel values, one per line")

    p = add("verify-cell", cmd_verify_cell, "decide the correctness property on one cell")
    p.add_argument("--net", required=True, help="composed network manifest")
    p.add_argument("--cell", required=True, help="cell bounds, e.g. 'd=[-1,-0.5];theta=[0,0.1]'")
    p.add_argument("--epsilon", type=float, required=True, help="correctness tolerance (m)")
    p.add_argument("--delta", type=float, default=1e-3, help="minimum box width before giving up")
    p.add_argument("--coord", type=int, default=0, help="ground-truth coordinate index")
    p.add_argument("--max-splits", type=int, default=200_000, help="box budget")
    p.add_argument("--probes", type=int, default=5, help="candidate points per box")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the cell result as JSON")

    p = add("proofmap", cmd_proofmap, "solve every cell of a partition")
    p.add_argument("--net", required=True, help="composed network manifest")
    p.add_argument("--grid", required=True, help="cells per dimension, e.g. 20x20")
    p.add_argument("--range", required=True, help="domain, e.g. 'd=[-3,-0.37];theta=[-0.03,0.17]'")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--coord", type=int, default=0)
    p.add_argument("--max-splits", type=int, default=200_000)
    p.add_argument("--probes", type=int, default=5)
    p.add_argument("--presample-points", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=5, help="cells solved simultaneously")
    p.add_argument("--out", required=True, help="proof-map file (JSON lines)")
    p.add_argument("--resume", action="store_true", help="skip cells already in --out")
    p.add_argument("--verbose", action="store_true")

    p = add("heatmap", cmd_heatmap, "render a proof map as a PPM heatmap")
    p.add_argument("--map", required=True, help="proof-map file")
    p.add_argument("--mode", choices=("results", "timing"), default="results")
    p.add_argument("--scale", type=int, default=20, help="pixels per cell")
    p.add_argument("--z-slice", type=int, default=None, help="latent slice for 3-D maps")
    p.add_argument("--out", required=True, help="output PPM path")

    p = add("stats", cmd_stats, "print the aggregated count/percent table of a proof map")
    p.add_argument("--map", required=True, help="proof-map file")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
