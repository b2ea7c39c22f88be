"""Per-cell decision procedure: branch-and-prune search over a configuration
box, returning a proof, a validated counterexample, or unknown.

The search hunts for counterexamples of the correctness property, so a proof
is exhaustion: every sub-box was pruned by a sound interval bound. A SAT
verdict is only ever reported with a concrete witness that replays under
`check_candidate`; interval over-approximation alone never produces SAT.
"""

from __future__ import annotations

import hashlib
import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .intervals import Interval, IntervalTensor, error_interval
from .network import ComposedNetwork, forward, forward_composed

__all__ = [
    "Verdict",
    "Cell",
    "CorrectnessProperty",
    "SolverConfig",
    "Violation",
    "Counterexample",
    "SolveStats",
    "CellResult",
    "EvaluationError",
    "split_box",
    "widest_dim",
    "check_candidate",
    "prove_cell",
]

Bounds = tuple[tuple[float, float], ...]


class EvaluationError(RuntimeError):
    """The network produced a non-finite value during a cell solve."""


class Verdict(Enum):
    PROVED = "proved"
    COUNTEREXAMPLE = "counterexample"
    UNKNOWN = "unknown"

    @property
    def code(self) -> int:
        """Proof-map encoding: -1 proved, 1 counterexample, 0 unknown."""
        return {"proved": -1, "counterexample": 1, "unknown": 0}[self.value]


@dataclass(frozen=True)
class Cell:
    """A cartesian product of closed intervals; one element of a partition."""

    bounds: Bounds
    index: tuple[int, ...] = ()

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid cell bound [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def center(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.bounds])

    def as_box(self) -> IntervalTensor:
        return IntervalTensor(
            np.array([lo for lo, _ in self.bounds]),
            np.array([hi for _, hi in self.bounds]),
        )


@dataclass(frozen=True)
class CorrectnessProperty:
    """Estimates must stay within `epsilon` of coordinate `ground_truth_coord`."""

    epsilon: float
    ground_truth_coord: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class SolverConfig:
    """Search budgets: per-dimension width floor `delta`, box budget, probe
    count per box, and the seed feeding the random probe points."""

    delta: float = 1e-3
    max_splits: int = 200_000
    candidate_points_per_box: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.max_splits < 1:
            raise ValueError("max_splits must be >= 1")
        if self.candidate_points_per_box < 1:
            raise ValueError("candidate_points_per_box must be >= 1")


@dataclass(frozen=True)
class Violation:
    """Concrete evaluation result breaking the property at one point."""

    point: tuple[float, ...]
    output: float
    violation: float  # |output - point[k]|, >= epsilon by construction


@dataclass
class Counterexample:
    """A validated violating configuration with its decoded image."""

    point: tuple[float, ...]
    image: np.ndarray
    output: float
    violation: float


@dataclass
class SolveStats:
    boxes_explored: int = 0
    boxes_pruned: int = 0
    wall_time_s: float = 0.0
    budget_exhausted: bool = False
    note: str = ""


@dataclass
class CellResult:
    verdict: Verdict
    cell: Cell
    counterexample: Counterexample | None = None
    stats: SolveStats = field(default_factory=SolveStats)


def split_box(bounds: Bounds, dim: int) -> tuple[Bounds, Bounds]:
    """Halve `bounds` along `dim` at the midpoint; halves share that boundary."""
    lo, hi = bounds[dim]
    if not hi > lo:
        raise ValueError(f"cannot split zero-width dimension {dim}")
    mid = 0.5 * (lo + hi)
    lower = bounds[:dim] + ((lo, mid),) + bounds[dim + 1 :]
    upper = bounds[:dim] + ((mid, hi),) + bounds[dim + 1 :]
    return lower, upper


def widest_dim(bounds: Bounds) -> int:
    """Index of the widest dimension; ties break toward the lowest index."""
    return max(range(len(bounds)), key=lambda d: bounds[d][1] - bounds[d][0])


def check_candidate(net: ComposedNetwork, point, prop: CorrectnessProperty) -> Violation | None:
    """Concrete violation record at `point`, or None if the property holds there."""
    point = np.asarray(point, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        out = forward_composed(net, point)
    if not np.isfinite(out):
        raise EvaluationError(f"non-finite network output at {point.tolist()}")
    err = abs(out - float(point[prop.ground_truth_coord]))
    if err >= prop.epsilon:
        return Violation(tuple(float(v) for v in point), out, err)
    return None


def _box_rng(bounds: Bounds, seed: int) -> np.random.Generator:
    # Seed probes from the box geometry so results do not depend on visit order.
    h = hashlib.blake2b(digest_size=8)
    h.update(np.int64(seed).tobytes())
    h.update(np.array(bounds, dtype=np.float64).tobytes())
    return np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))


def _probe_points(bounds: Bounds, count: int, seed: int) -> list[np.ndarray]:
    """Box center, then corners (in low dimension), then seeded uniform points."""
    n = len(bounds)
    pts = [np.array([0.5 * (lo + hi) for lo, hi in bounds])]
    if n <= 3:
        for corner in itertools.product(*bounds):
            if len(pts) >= count:
                break
            pts.append(np.array(corner, dtype=np.float64))
    if len(pts) < count:
        rng = _box_rng(bounds, seed)
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        for _ in range(count - len(pts)):
            pts.append(lo + rng.random(n) * (hi - lo))
    return pts[:count]


def _violation_score(err: Interval) -> float:
    # Midpoint of |err|: how strongly the box looks like it hides a violation.
    if err.lo <= 0.0 <= err.hi:
        nearest = 0.0
    else:
        nearest = min(abs(err.lo), abs(err.hi))
    return 0.5 * (nearest + max(abs(err.lo), abs(err.hi)))


def _box_error(net: ComposedNetwork, bounds: Bounds, prop: CorrectnessProperty) -> Interval:
    box = IntervalTensor(
        np.array([lo for lo, _ in bounds]),
        np.array([hi for _, hi in bounds]),
    )
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            err = error_interval(net, box, prop)
    except ValueError as e:
        # overflow inside propagation surfaces as invalid bounds
        raise EvaluationError(f"interval propagation failed on box {bounds}: {e}") from None
    if not (np.isfinite(err.lo) and np.isfinite(err.hi)):
        raise EvaluationError(f"non-finite error enclosure on box {bounds}")
    return err


def prove_cell(
    net: ComposedNetwork,
    cell: Cell,
    prop: CorrectnessProperty,
    cfg: SolverConfig = SolverConfig(),
    collect: dict | None = None,
) -> CellResult:
    """Decide the correctness property on one cell.

    Returns PROVED when every sub-box was pruned by a sound bound,
    COUNTEREXAMPLE with a validated witness as soon as a concrete probe
    violates the property, and UNKNOWN when unresolved sub-boxes remain at
    width `delta` or the box budget runs out. Budget exhaustion is reported
    in the stats, never raised.

    `collect`, when given, receives lists of the final "pruned", "unresolved"
    and "pending" boxes for search-cover inspection.
    """
    if cell.dim != net.input_dim:
        raise ValueError(f"cell dim {cell.dim} != network input dim {net.input_dim}")
    t0 = time.perf_counter()
    stats = SolveStats()
    eps = prop.epsilon
    collecting = collect is not None
    pruned: list[Bounds] = []
    unresolved_boxes: list[Bounds] = []
    unresolved = False

    # Worklist entries carry the error enclosure computed when the box was
    # created, so every box is propagated exactly once.
    stack: list[tuple[Bounds, Interval | None]] = [(cell.bounds, None)]

    def finish(verdict: Verdict, counterexample=None, pending=()) -> CellResult:
        stats.wall_time_s = time.perf_counter() - t0
        if collect is not None:
            collect["pruned"] = pruned
            collect["unresolved"] = unresolved_boxes
            collect["pending"] = [b for b, _ in pending]
        return CellResult(verdict, cell, counterexample, stats)

    try:
        while stack:
            if stats.boxes_explored >= cfg.max_splits:
                stats.budget_exhausted = True
                stats.note = "box budget exhausted"
                return finish(Verdict.UNKNOWN, pending=stack)
            bounds, err = stack.pop()
            stats.boxes_explored += 1
            if err is None:
                err = _box_error(net, bounds, prop)

            # (i) prune when the enclosure sits strictly inside (-eps, eps)
            if -eps < err.lo and err.hi < eps:
                stats.boxes_pruned += 1
                if collecting:
                    pruned.append(bounds)
                continue

            # (ii) concrete probes; any hit is a validated counterexample
            hit = None
            for point in _probe_points(bounds, cfg.candidate_points_per_box, cfg.seed):
                hit = check_candidate(net, point, prop)
                if hit is not None:
                    break
            if hit is not None:
                image = forward(net.decoder, np.asarray(hit.point))
                cex = Counterexample(hit.point, image, hit.output, hit.violation)
                return finish(Verdict.COUNTEREXAMPLE, cex, pending=stack + [(bounds, err)])

            # (iii) refine, or give up on this box at width delta
            if all(hi - lo < cfg.delta for lo, hi in bounds):
                unresolved = True
                if collecting:
                    unresolved_boxes.append(bounds)
                continue
            dim = widest_dim(bounds)
            lo, hi = bounds[dim]
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                # Width stepped below float resolution; treat as unresolved.
                unresolved = True
                if collecting:
                    unresolved_boxes.append(bounds)
                continue
            halves = split_box(bounds, dim)
            scored = [(b, _box_error(net, b, prop)) for b in halves]
            scored.sort(key=lambda item: _violation_score(item[1]))
            stack.extend(scored)  # larger potential violation on top
    except EvaluationError as e:
        raise EvaluationError(f"cell {cell.index or cell.bounds}: {e}") from None

    if unresolved:
        stats.note = "unresolved boxes at delta"
        return finish(Verdict.UNKNOWN)
    return finish(Verdict.PROVED)
