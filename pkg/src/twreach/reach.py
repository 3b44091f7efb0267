"""Reach tubes over delta-covers with selective refinement.

A cover tiles the initial/parameter box exactly (spacing = width/count per
dimension, never above 2*delta), so partitions assemble back to the full
box and measures add up without overlap bookkeeping.  Each cell is
certified independently: simulate from its center, bloat by the local
discrepancy bound, scan the tube against a property's sufficient
condition.  Inconclusive cells are re-covered at the next (smaller) delta.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .discrepancy import DiscrepancyBound, local_discrepancy
from .errors import DomainError, ResourceError
from .geometry import Box
from .odesim import ValidatedTrace, simulate

SATISFIED = "satisfied"
VIOLATED = "violated"
UNKNOWN = "unknown"

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Cover:
    """Regular grid cover of a box by balls of radius delta (max-norm)."""

    theta: Box
    delta: float
    counts: tuple
    centers: np.ndarray   # (n_cells, dim), row-major over the grid
    tiles: tuple          # per-cell Box, an exact partition of theta

    def __len__(self) -> int:
        return len(self.tiles)


def delta_cover(theta: Box, delta: float, budget: int | None = None) -> Cover:
    """Cover theta with a regular grid of delta-balls.

    Cell count is prod(ceil(width_d / (2 delta))); a budget caps it so a
    misjudged delta fails fast instead of allocating the grid.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    widths = theta.widths
    counts = [max(1, int(math.ceil(w / (2.0 * delta) - 1e-12))) for w in widths]
    total = int(np.prod(counts, dtype=float))
    if budget is not None and total > budget:
        raise ResourceError(
            f"cover needs {total} cells at delta={delta:g}, over the budget of {budget}")
    axes = []
    for lo, w, c in zip(theta.lo, widths, counts):
        spacing = w / c
        axes.append(lo + (np.arange(c) + 0.5) * spacing)
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    tiles = []
    half = 0.5 * np.array([w / c for w, c in zip(widths, counts)])
    for center in centers:
        tiles.append(Box(center - half, center + half))
    return Cover(theta=theta, delta=float(delta), counts=tuple(counts),
                 centers=centers, tiles=tuple(tiles))


@dataclass(frozen=True)
class ReachTube:
    """Time-indexed over-approximation of the reach set of one cell."""

    boxes: tuple          # full-state segment boxes
    spans: tuple          # matching (t_lo, t_hi) intervals, tiling [0, T]
    cell_center: np.ndarray
    cell_radius: float
    bound: DiscrepancyBound
    trace: ValidatedTrace

    def segments(self):
        return zip(self.boxes, self.spans)

    @property
    def horizon(self) -> float:
        return self.spans[-1][1]


@dataclass(frozen=True)
class Verdict:
    kind: str             # satisfied / violated / unknown
    center: np.ndarray
    delta: float


@dataclass(frozen=True)
class Region:
    box: Box
    kind: str
    delta: float


def reach_cell(center, delta: float, horizon: float, field, tau: float,
               eps: float, v_radius: float | None = None,
               passes: int = 1) -> ReachTube:
    """Tube covering every trajectory from the delta-ball around center.

    For augmented systems the ball width lives on the constant parameter
    dimensions and the voltage block starts as a point, matching how sweeps
    set up their initial sets; plain systems get the full-width ball.
    """
    if delta <= 0:
        raise DomainError("cell radius must be positive")
    center = np.asarray(center, dtype=float)
    const = tuple(getattr(field, "constant_dims", ()) or ())
    if v_radius is None:
        v_radius = 0.0 if const else delta
    trace = simulate(center, tau, eps, horizon, field)
    bound = local_discrepancy(trace, delta, field, v_radius=v_radius, passes=passes)
    dim = center.size
    state_idx = np.array([i for i in range(dim) if i not in const], dtype=int)
    boxes = []
    spans = []
    for k in range(1, len(trace)):
        grow = np.zeros(dim)
        grow[state_idx] = bound.segment_v_bloat(k)
        for i in const:
            grow[i] = delta
        boxes.append(trace.segment_hull(k).bloat(grow))
        spans.append((float(trace.times[k - 1]), float(trace.times[k])))
    return ReachTube(boxes=tuple(boxes), spans=tuple(spans), cell_center=center,
                     cell_radius=float(delta), bound=bound, trace=trace)


def check_cell(tube: ReachTube, condition, t_int, *,
               partial_containment_violates: bool = False) -> Verdict:
    """Scan the tube's segments over the checked window.

    `condition` maps a segment box to holds/fails/inconclusive.  Satisfied
    needs the condition to hold on every overlapping segment; violated needs
    its negation everywhere (or, in the looser optional mode, a single
    conclusively failing segment).
    """
    lo, hi = float(t_int[0]), float(t_int[1])
    if lo >= hi:
        raise DomainError("checked interval is empty")
    if hi > tube.horizon + 1e-9:
        raise DomainError("checked interval extends past the tube horizon")
    outcomes = [condition(box) for box, (a, b) in tube.segments()
                if a < hi and b > lo]
    if not outcomes:
        raise DomainError("checked interval overlaps no tube segments")
    if all(o == HOLDS for o in outcomes):
        kind = SATISFIED
    elif all(o == FAILS for o in outcomes):
        kind = VIOLATED
    elif partial_containment_violates and any(o == FAILS for o in outcomes):
        kind = VIOLATED
    else:
        kind = UNKNOWN
    return Verdict(kind=kind, center=tube.cell_center, delta=tube.cell_radius)


@dataclass
class RefinementResult:
    regions: list                 # Region entries partitioning theta
    exhausted: bool
    cells_processed: int
    rounds: list                  # (delta, cell count) per refinement round
    history: list = dc_field(default_factory=list)  # (delta, center, kind)

    def by_kind(self, kind: str):
        return [r for r in self.regions if r.kind == kind]


def halving_schedule(delta0: float, delta_min: float) -> list:
    if not delta0 >= delta_min > 0:
        raise DomainError("need delta0 >= delta_min > 0")
    out = [float(delta0)]
    while out[-1] / 2.0 >= delta_min * (1.0 - 1e-12):
        out.append(out[-1] / 2.0)
    return out


def verify_refine(theta: Box, tube_builder, checker, delta0: float,
                  delta_min: float, schedule=None, budget: int = 1_000_000,
                  workers: int = 1) -> RefinementResult:
    """Selective refinement over theta.

    `tube_builder(center, delta) -> ReachTube` and
    `checker(tube) -> Verdict` close over the system and property.  Cells
    with conclusive verdicts become regions; unknown cells are re-covered at
    the next delta until the schedule runs out or the budget is hit.  The
    outcome is deterministic for fixed inputs at any worker count.
    """
    if schedule is None:
        schedule = halving_schedule(delta0, delta_min)
    else:
        schedule = [float(d) for d in schedule]
        if any(b >= a for a, b in zip(schedule, schedule[1:])):
            raise DomainError("refinement schedule must be strictly decreasing")
    result = RefinementResult(regions=[], exhausted=False, cells_processed=0, rounds=[])
    frontier = [(tile, center) for tile, center
                in zip(*_cover_parts(theta, schedule[0], budget))]
    for level, delta in enumerate(schedule):
        if not frontier:
            break
        if result.cells_processed + len(frontier) > budget:
            result.exhausted = True
            for tile, _ in frontier:
                result.regions.append(Region(tile, UNKNOWN, delta))
            break
        verdicts = _run_cells(frontier, tube_builder, checker, delta, workers)
        result.cells_processed += len(frontier)
        result.rounds.append((delta, len(frontier)))
        next_frontier = []
        last = level == len(schedule) - 1
        for (tile, center), verdict in zip(frontier, verdicts):
            result.history.append((delta, center, verdict.kind))
            if verdict.kind != UNKNOWN or last:
                result.regions.append(Region(tile, verdict.kind, delta))
            else:
                sub_tiles, sub_centers = _cover_parts(tile, schedule[level + 1], None)
                next_frontier.extend(zip(sub_tiles, sub_centers))
        frontier = next_frontier
    return result


def _cover_parts(box: Box, delta: float, budget):
    cover = delta_cover(box, delta, budget=budget)
    return list(cover.tiles), list(cover.centers)


def _run_cells(frontier, tube_builder, checker, delta, workers):
    def work(item):
        _, center = item
        return checker(tube_builder(center, delta))

    if workers <= 1:
        return [work(item) for item in frontier]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, frontier))
