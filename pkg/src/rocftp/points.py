"""Planar point configurations and neighbor counting on a rectangle."""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned region [0, width] x [0, height]."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError("rectangle sides must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, p: Point) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height


class PointConfiguration:
    """Immutable finite point set in a rectangle.

    Duplicate coordinates are rejected: they arise with probability zero
    from the continuous samplers, so a duplicate always signals a bug.
    """

    __slots__ = ("points", "region")

    def __init__(self, points, region: Rectangle):
        pts = tuple((float(x), float(y)) for x, y in points)
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate points in configuration")
        for p in pts:
            if not region.contains(p):
                raise ValueError(f"point {p} outside region")
        self.points = pts
        self.region = region

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other):
        return (
            isinstance(other, PointConfiguration)
            and self.region == other.region
            and sorted(self.points) == sorted(other.points)
        )

    def __repr__(self):
        return f"PointConfiguration({len(self.points)} points, {self.region})"

    def close_pairs(self, r: float) -> int:
        """Number of unordered pairs at distance strictly below r."""
        return count_close_pairs(self.points, r)


def _dist2(a: Point, b: Point) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


class GridIndex:
    """Uniform-grid index for counting points within distance r of a query.

    Cell side equals r, so all points closer than r to a query live in the
    3x3 block of cells around it.
    """

    def __init__(self, r: float):
        if r <= 0.0:
            raise ValueError("interaction radius must be positive")
        self.r = r
        self._r2 = r * r
        self._cells: dict[tuple[int, int], list[Point]] = {}
        self._count = 0

    def _cell(self, p: Point) -> tuple[int, int]:
        return (math.floor(p[0] / self.r), math.floor(p[1] / self.r))

    def __len__(self):
        return self._count

    def add(self, p: Point) -> None:
        self._cells.setdefault(self._cell(p), []).append(p)
        self._count += 1

    def remove(self, p: Point) -> None:
        cell = self._cell(p)
        bucket = self._cells[cell]
        bucket.remove(p)
        if not bucket:
            del self._cells[cell]
        self._count -= 1

    def count_near(self, p: Point) -> int:
        """Points already indexed at distance strictly below r from p."""
        cx, cy = self._cell(p)
        r2 = self._r2
        total = 0
        for gx in (cx - 1, cx, cx + 1):
            for gy in (cy - 1, cy, cy + 1):
                bucket = self._cells.get((gx, gy))
                if bucket:
                    for q in bucket:
                        if _dist2(p, q) < r2:
                            total += 1
        return total


def count_close_pairs(points, r: float) -> int:
    """Unordered pairs at distance strictly below r, via a grid sweep."""
    grid = GridIndex(r)
    total = 0
    for p in points:
        total += grid.count_near(p)
        grid.add(p)
    return total
