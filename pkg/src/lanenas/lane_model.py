"""Grid/anchor lane parameterization and decoding.

Each prediction head covers the image with a grid; a grid cell proposes
at most one lane as horizontal offsets from its center column at fixed
vertical anchor rows, plus an upper ending row and a confidence score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateLineError


@dataclass(frozen=True)
class AnchorLayout:
    image_size: tuple[int, int]  # (width, height) px
    rows: tuple[float, ...]      # anchor row y coordinates, top to bottom

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(float(y) for y in self.rows))
        if len(self.rows) < 2:
            raise ValueError("need at least 2 anchor rows")
        if any(b <= a for a, b in zip(self.rows, self.rows[1:])):
            raise ValueError("anchor rows must be strictly increasing")
        if self.rows[0] < 0 or self.rows[-1] >= self.image_size[1]:
            raise ValueError("anchor rows must lie within [0, height)")

    @classmethod
    def uniform(cls, image_size, num_rows=72):
        """Evenly spaced rows over the image height (default one per 4 px
        on a 288-px-high input)."""
        w, h = image_size
        step = h / num_rows
        return cls((w, h), tuple(i * step for i in range(num_rows)))


@dataclass(frozen=True)
class GridCell:
    center: tuple[float, float]       # (c_x, c_y) image px
    score: float
    offsets: tuple                    # length Z; None entries mean no offset
    end_y: float                      # predicted upper ending row

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(self.offsets))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class HeadGrid:
    level: int
    grid_w: int
    grid_h: int
    cells: tuple[GridCell, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if len(self.cells) != self.grid_w * self.grid_h:
            raise ValueError("cells length must equal grid_w * grid_h")


@dataclass(frozen=True)
class PointSource:
    """Provenance of one decoded point: which cell proposed it."""

    level: int
    cell_index: int
    score: float                      # masked score of the proposing cell
    cell_center: tuple[float, float]


@dataclass(frozen=True)
class LanePoint:
    x: float
    y: float
    source: PointSource


@dataclass(frozen=True)
class LaneLine:
    points: tuple[LanePoint, ...]
    score: float

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if any(b.y <= a.y for a, b in zip(self.points, self.points[1:])):
            raise ValueError("points must be sorted by y")

    def x_at(self):
        """Dict of row y -> x, for distance computations."""
        return {p.y: p.x for p in self.points}


@dataclass(frozen=True)
class LaneProposalSet:
    layout: AnchorLayout
    heads: tuple[HeadGrid, ...]

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))


def decode_cell(
    cell: GridCell,
    layout: AnchorLayout,
    level: int = 0,
    cell_index: int = 0,
    score: float | None = None,
) -> LaneLine:
    """Decode one cell into a lane polyline.

    A point is emitted at every anchor row at or below the ending row
    (the ending point is the lane's upper terminus); each point records
    the proposing cell. `score` overrides the cell's raw score when the
    caller has already applied masking.
    """
    s = cell.score if score is None else score
    src = PointSource(level, cell_index, s, cell.center)
    cx = cell.center[0]
    pts = []
    for z, y in enumerate(layout.rows):
        if y < cell.end_y:
            continue
        dx = cell.offsets[z]
        if dx is None:
            continue
        pts.append(LanePoint(cx + dx, y, src))
    if len(pts) < 2:
        raise DegenerateLineError(
            f"cell at {cell.center} decodes to {len(pts)} point(s)"
        )
    return LaneLine(points=tuple(pts), score=s)


def line_distance(a: LaneLine, b: LaneLine) -> float:
    """Mean |x_a(y) - x_b(y)| over shared anchor rows; +inf if disjoint."""
    xb = b.x_at()
    gaps = [abs(p.x - xb[p.y]) for p in a.points if p.y in xb]
    if not gaps:
        return math.inf
    return sum(gaps) / len(gaps)


def decode_all(proposals: LaneProposalSet, score_threshold: float):
    """One LaneLine per cell whose (already masked) score passes the
    threshold and decodes to at least 2 points."""
    lines = []
    for head in proposals.heads:
        for idx, cell in enumerate(head.cells):
            if cell.score < score_threshold:
                continue
            try:
                lines.append(
                    decode_cell(cell, proposals.layout, head.level, idx)
                )
            except DegenerateLineError:
                continue
    return lines
