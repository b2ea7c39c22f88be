"""Partition construction, center pre-sampling, parallel per-cell solving,
and aggregation into proof maps with result and timing heatmaps.

Proof-map files are JSON lines: a header record followed by one record per
cell. Cell records are appended as they complete, so an interrupted run can
resume without re-solving finished cells; a finished map is rewritten in
canonical row-major order so identical runs produce identical bytes
(timing fields aside).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .netpbm import write_ppm
from .solver import (
    Cell,
    CorrectnessProperty,
    EvaluationError,
    SolverConfig,
    Verdict,
    _probe_points,
    check_candidate,
    prove_cell,
)

__all__ = [
    "Partition",
    "MapEntry",
    "ProofMap",
    "build_partition",
    "presample",
    "build_proofmap",
    "save_proofmap",
    "load_proofmap",
    "aggregate",
    "stats_table",
    "emit_heatmap",
    "RESULT_PALETTE",
]

MAP_FORMAT = "gridverify-proofmap"
MAP_VERSION = 1

# SAT red, Unknown purple, UNSAT blue.
RESULT_PALETTE = {1: (200, 30, 30), 0: (120, 60, 160), -1: (30, 60, 200)}

DEFAULT_COORDS = ("d", "theta", "z")


@dataclass(frozen=True)
class Partition:
    """A linearly spaced grid of almost-disjoint cells tiling a box domain.

    Cells are indexed row-major in dimension order (d, theta[, z]); cell
    (0, ..., 0) starts at the domain's lower corner.
    """

    domain: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    coords: tuple[str, ...] = ()

    def __post_init__(self):
        domain = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        counts = tuple(int(n) for n in self.counts)
        if len(domain) != len(counts):
            raise ValueError("domain and grid counts must have the same dimension")
        if any(n < 1 for n in counts):
            raise ValueError("grid counts must be >= 1")
        for lo, hi in domain:
            if not hi > lo:
                raise ValueError(f"degenerate domain interval [{lo}, {hi}]")
        coords = tuple(self.coords) or DEFAULT_COORDS[: len(domain)]
        if len(coords) != len(domain):
            raise ValueError("coordinate names must match domain dimension")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "coords", coords)
        edges = tuple(
            tuple(np.linspace(lo, hi, n + 1).tolist())
            for (lo, hi), n in zip(domain, counts)
        )
        object.__setattr__(self, "_edges", edges)

    @property
    def dim(self) -> int:
        return len(self.domain)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    def cell_at(self, index: tuple[int, ...]) -> Cell:
        bounds = tuple(
            (self._edges[d][i], self._edges[d][i + 1]) for d, i in enumerate(index)
        )
        return Cell(bounds, tuple(index))

    def indices(self):
        return np.ndindex(*self.counts)

    def cells(self) -> list[Cell]:
        return [self.cell_at(idx) for idx in self.indices()]


def build_partition(domain, counts, coords=()) -> Partition:
    """Linearly spaced grid over `domain` with `counts` cells per dimension."""
    return Partition(tuple(domain), tuple(counts), tuple(coords))


@dataclass
class MapEntry:
    """One cell's verdict: result is 1 SAT, -1 proved, 0 unknown."""

    index: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    result: int
    time_s: float = 0.0
    boxes_explored: int = 0
    boxes_pruned: int = 0
    witness: dict | None = None
    note: str = ""


@dataclass
class ProofMap:
    partition: Partition
    prop: CorrectnessProperty
    cfg: SolverConfig
    entries: dict[tuple[int, ...], MapEntry] = field(default_factory=dict)

    def complete(self) -> bool:
        return len(self.entries) == self.partition.n_cells

    def results_grid(self) -> np.ndarray:
        """Result codes as an integer array shaped like the grid."""
        grid = np.zeros(self.partition.counts, dtype=np.int8)
        for idx, entry in self.entries.items():
            grid[idx] = entry.result
        return grid

    def times_grid(self) -> np.ndarray:
        grid = np.zeros(self.partition.counts, dtype=np.float64)
        for idx, entry in self.entries.items():
            grid[idx] = entry.time_s
        return grid


def presample(
    partition: Partition,
    net,
    prop: CorrectnessProperty,
    points_per_cell: int = 1,
    seed: int = 0,
) -> dict[tuple[int, ...], MapEntry]:
    """Probe cell centers (plus extra points) to mark cheap SAT cells.

    A cell is marked iff a concrete probe violates the property; marked cells
    skip the solver and enter the proof map as result 1 with their witness.
    """
    if points_per_cell < 1:
        raise ValueError("points_per_cell must be >= 1")
    marked: dict[tuple[int, ...], MapEntry] = {}
    for idx in partition.indices():
        cell = partition.cell_at(idx)
        t0 = time.perf_counter()
        for point in _probe_points(cell.bounds, points_per_cell, seed):
            try:
                hit = check_candidate(net, point, prop)
            except EvaluationError:
                break  # leave the cell to the solver, which records the failure
            if hit is not None:
                marked[cell.index] = MapEntry(
                    index=cell.index,
                    bounds=cell.bounds,
                    result=1,
                    time_s=time.perf_counter() - t0,
                    witness={
                        "point": list(hit.point),
                        "output": hit.output,
                        "violation": hit.violation,
                    },
                    note="presample",
                )
                break
    return marked


def _entry_from_result(res) -> MapEntry:
    witness = None
    if res.counterexample is not None:
        cex = res.counterexample
        witness = {
            "point": list(cex.point),
            "output": cex.output,
            "violation": cex.violation,
        }
    return MapEntry(
        index=res.cell.index,
        bounds=res.cell.bounds,
        result=res.verdict.code,
        time_s=res.stats.wall_time_s,
        boxes_explored=res.stats.boxes_explored,
        boxes_pruned=res.stats.boxes_pruned,
        witness=witness,
        note=res.stats.note,
    )


def _solve_one(net, cell: Cell, prop: CorrectnessProperty, cfg: SolverConfig) -> MapEntry:
    t0 = time.perf_counter()
    try:
        return _entry_from_result(prove_cell(net, cell, prop, cfg))
    except Exception as e:  # a failed cell must not sink the whole map
        return MapEntry(
            index=cell.index,
            bounds=cell.bounds,
            result=0,
            time_s=time.perf_counter() - t0,
            note=f"error: {e}",
        )


def build_proofmap(
    partition: Partition,
    net,
    prop: CorrectnessProperty,
    cfg: SolverConfig = SolverConfig(),
    jobs: int = 5,
    presample_points: int = 1,
    out_path=None,
    resume: bool = False,
    progress=None,
) -> ProofMap:
    """Solve every cell of `partition` and assemble the proof map.

    Runs the center pre-sampling pass first, then `prove_cell` on the
    remaining cells on a pool of `jobs` workers. Verdicts are independent of
    `jobs` and of completion order. With `out_path`, each finished cell is
    appended to the file immediately and `resume=True` skips cells already
    recorded there.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    pm = ProofMap(partition, prop, cfg)

    writer = None
    if out_path is not None:
        out_path = Path(out_path)
        if resume and out_path.exists() and out_path.stat().st_size > 0:
            prior = load_proofmap(out_path)
            _check_compatible(prior, pm)
            pm.entries.update(prior.entries)
            writer = out_path.open("a", encoding="utf-8")
        else:
            writer = out_path.open("w", encoding="utf-8")
            writer.write(_header_line(pm))
            writer.flush()

    def record(entry: MapEntry):
        pm.entries[entry.index] = entry
        if writer is not None:
            writer.write(_entry_line(entry))
            writer.flush()
        if progress is not None:
            progress(entry)

    try:
        todo = [idx for idx in partition.indices() if tuple(idx) not in pm.entries]
        pre = presample(partition, net, prop, presample_points, cfg.seed)
        for idx in todo:
            if tuple(idx) in pre:
                record(pre[tuple(idx)])
        todo = [idx for idx in todo if tuple(idx) not in pre]

        if jobs == 1:
            for idx in todo:
                record(_solve_one(net, partition.cell_at(idx), prop, cfg))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    pool.submit(_solve_one, net, partition.cell_at(idx), prop, cfg): idx
                    for idx in todo
                }
                pending = set(futures)
                while pending:
                    done, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in done:
                        record(fut.result())
    finally:
        if writer is not None:
            writer.close()

    if out_path is not None:
        save_proofmap(pm, out_path)  # canonical row-major rewrite
    return pm


def _check_compatible(prior: ProofMap, current: ProofMap) -> None:
    same = (
        prior.partition.domain == current.partition.domain
        and prior.partition.counts == current.partition.counts
        and prior.prop == current.prop
        and prior.cfg == current.cfg
    )
    if not same:
        raise ValueError("existing proof-map file was produced with different settings")


# ------------------------------------------------------------------ file format

def _header_line(pm: ProofMap) -> str:
    header = {
        "format": MAP_FORMAT,
        "version": MAP_VERSION,
        "domain": [list(b) for b in pm.partition.domain],
        "grid": list(pm.partition.counts),
        "coords": list(pm.partition.coords),
        "epsilon": pm.prop.epsilon,
        "ground_truth_coord": pm.prop.ground_truth_coord,
        "delta": pm.cfg.delta,
        "max_splits": pm.cfg.max_splits,
        "candidate_points_per_box": pm.cfg.candidate_points_per_box,
        "seed": pm.cfg.seed,
    }
    return json.dumps(header, sort_keys=True) + "\n"


def _entry_line(entry: MapEntry) -> str:
    rec = {
        "index": list(entry.index),
        "bounds": [list(b) for b in entry.bounds],
        "result": entry.result,
        "time_s": entry.time_s,
        "boxes_explored": entry.boxes_explored,
        "boxes_pruned": entry.boxes_pruned,
    }
    if entry.witness is not None:
        rec["witness"] = entry.witness
    if entry.note:
        rec["note"] = entry.note
    return json.dumps(rec, sort_keys=True) + "\n"


def save_proofmap(pm: ProofMap, path) -> None:
    """Write the canonical (row-major ordered) proof-map file."""
    lines = [_header_line(pm)]
    for idx in pm.partition.indices():
        entry = pm.entries.get(tuple(idx))
        if entry is not None:
            lines.append(_entry_line(entry))
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_proofmap(path) -> ProofMap:
    """Read a proof-map file, tolerating partial (interrupted) files."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty proof-map file")
    header = json.loads(lines[0])
    if header.get("format") != MAP_FORMAT:
        raise ValueError(f"{path}: not a proof-map file")
    if header.get("version") != MAP_VERSION:
        raise ValueError(f"{path}: unsupported version {header.get('version')}")
    partition = Partition(
        tuple(tuple(b) for b in header["domain"]),
        tuple(header["grid"]),
        tuple(header["coords"]),
    )
    prop = CorrectnessProperty(header["epsilon"], header["ground_truth_coord"])
    cfg = SolverConfig(
        delta=header["delta"],
        max_splits=header["max_splits"],
        candidate_points_per_box=header["candidate_points_per_box"],
        seed=header["seed"],
    )
    pm = ProofMap(partition, prop, cfg)
    for line in lines[1:]:
        if not line.strip():
            continue
        rec = json.loads(line)
        entry = MapEntry(
            index=tuple(rec["index"]),
            bounds=tuple(tuple(b) for b in rec["bounds"]),
            result=int(rec["result"]),
            time_s=float(rec["time_s"]),
            boxes_explored=int(rec["boxes_explored"]),
            boxes_pruned=int(rec["boxes_pruned"]),
            witness=rec.get("witness"),
            note=rec.get("note", ""),
        )
        pm.entries[entry.index] = entry
    return pm


# ------------------------------------------------------------------ aggregation

def _percent(count: int, total: int) -> int:
    # Half-up integer rounding: 54.5% prints as 55%.
    return int(np.floor(100.0 * count / total + 0.5)) if total else 0


def aggregate(pm: ProofMap) -> dict[str, tuple[int, int]]:
    """Verdict counts and half-up integer percentages, keyed UNSAT/SAT/Unknown."""
    codes = [e.result for e in pm.entries.values()]
    total = len(codes)
    counts = {
        "UNSAT": sum(1 for c in codes if c == -1),
        "SAT": sum(1 for c in codes if c == 1),
        "Unknown": sum(1 for c in codes if c == 0),
    }
    return {k: (v, _percent(v, total)) for k, v in counts.items()}


def stats_table(pm: ProofMap) -> str:
    """Aggregated cell results as a printable count/percent table."""
    agg = aggregate(pm)
    lines = [f"{'Cell Result':<12}{'Count':>8}{'Percent':>10}"]
    for key in ("UNSAT", "SAT", "Unknown"):
        count, pct = agg[key]
        lines.append(f"{key:<12}{count:>8}{pct:>9}%")
    total = sum(v for v, _ in agg.values())
    lines.append(f"{'Total':<12}{total:>8}")
    return "\n".join(lines)


# ------------------------------------------------------------------ heatmaps

def _hot_ramp(t: float) -> tuple[int, int, int]:
    # Monotone black -> red -> yellow -> white ramp on [0, 1].
    r = min(max(3.0 * t, 0.0), 1.0)
    g = min(max(3.0 * t - 1.0, 0.0), 1.0)
    b = min(max(3.0 * t - 2.0, 0.0), 1.0)
    return (round(255 * r), round(255 * g), round(255 * b))


def emit_heatmap(pm: ProofMap, mode: str, out_path, scale: int = 20, z_slice: int | None = None) -> None:
    """Render the proof map as a PPM image, one `scale`-pixel square per cell.

    `mode` is "results" (fixed SAT/Unknown/UNSAT palette) or "timing"
    (monotone ramp over [0, max cell time]). Image row 0 is the lowest first
    coordinate. Three-dimensional maps need `z_slice`; more than two non-z
    dimensions are rejected.
    """
    if mode not in ("results", "timing"):
        raise ValueError(f"unknown heatmap mode {mode!r}")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    counts = pm.partition.counts
    if len(counts) == 2:
        if z_slice is not None:
            raise ValueError("z_slice only applies to 3-D maps")
        results = pm.results_grid()
        times = pm.times_grid()
    elif len(counts) == 3:
        if z_slice is None or not 0 <= z_slice < counts[2]:
            raise ValueError(f"3-D map needs z_slice in [0, {counts[2]})")
        results = pm.results_grid()[:, :, z_slice]
        times = pm.times_grid()[:, :, z_slice]
    else:
        raise ValueError("heatmaps need 2 grid dimensions plus an optional z axis")

    rows, cols = results.shape
    img = np.zeros((rows, cols, 3), dtype=np.uint8)
    if mode == "results":
        for code, rgb in RESULT_PALETTE.items():
            img[results == code] = rgb
    else:
        tmax = float(times.max())
        for i in range(rows):
            for j in range(cols):
                t = times[i, j] / tmax if tmax > 0 else 1.0
                img[i, j] = _hot_ramp(t)
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    write_ppm(out_path, img)
