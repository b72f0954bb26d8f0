"""Geometry tests: configurations and the grid index vs brute force."""

import math
import random

import pytest

from rocftp.points import (
    GridIndex,
    PointConfiguration,
    Rectangle,
    count_close_pairs,
)


def _brute_count_near(points, p, r):
    r2 = r * r
    return sum(
        1
        for q in points
        if (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2 < r2
    )


def _brute_close_pairs(points, r):
    r2 = r * r
    n = len(points)
    return sum(
        1
        for i in range(n)
        for j in range(i + 1, n)
        if (points[i][0] - points[j][0]) ** 2
        + (points[i][1] - points[j][1]) ** 2
        < r2
    )


def test_rectangle_basics():
    region = Rectangle(2.0, 3.0)
    assert region.area == 6.0
    assert region.contains((0.0, 0.0))
    assert region.contains((2.0, 3.0))
    assert not region.contains((2.1, 1.0))
    with pytest.raises(ValueError):
        Rectangle(0.0, 1.0)
    with pytest.raises(ValueError):
        Rectangle(1.0, -2.0)


def test_point_configuration_validation():
    region = Rectangle(1.0, 1.0)
    config = PointConfiguration([(0.5, 0.5), (0.1, 0.9)], region)
    assert len(config) == 2
    assert set(config) == {(0.5, 0.5), (0.1, 0.9)}
    with pytest.raises(ValueError):
        PointConfiguration([(0.5, 0.5), (0.5, 0.5)], region)
    with pytest.raises(ValueError):
        PointConfiguration([(1.5, 0.5)], region)


def test_point_configuration_equality_ignores_order():
    region = Rectangle(1.0, 1.0)
    a = PointConfiguration([(0.1, 0.2), (0.3, 0.4)], region)
    b = PointConfiguration([(0.3, 0.4), (0.1, 0.2)], region)
    assert a == b
    assert a != PointConfiguration([(0.1, 0.2)], region)


def test_grid_index_matches_brute_force():
    rng = random.Random(0)
    for r in (0.3, 1.0, 2.5):
        points = [(rng.uniform(0, 5), rng.uniform(0, 5)) for _ in range(200)]
        grid = GridIndex(r)
        for p in points:
            grid.add(p)
        assert len(grid) == 200
        probes = points[:50] + [
            (rng.uniform(0, 5), rng.uniform(0, 5)) for _ in range(50)
        ]
        for p in probes:
            assert grid.count_near(p) == _brute_count_near(points, p, r)


def test_grid_index_distance_strictly_less():
    # A point at exactly distance r does not count as close.
    grid = GridIndex(1.0)
    grid.add((0.0, 0.0))
    assert grid.count_near((1.0, 0.0)) == 0
    assert grid.count_near((math.nextafter(1.0, 0.0), 0.0)) == 1
    assert grid.count_near((0.0, 0.0)) == 1


def test_grid_index_remove():
    grid = GridIndex(1.0)
    pts = [(0.1, 0.1), (0.2, 0.2), (3.0, 3.0)]
    for p in pts:
        grid.add(p)
    grid.remove((0.2, 0.2))
    assert len(grid) == 2
    assert grid.count_near((0.15, 0.15)) == 1
    with pytest.raises((KeyError, ValueError)):
        grid.remove((9.0, 9.0))


def test_count_close_pairs_matches_quadratic():
    rng = random.Random(1)
    for n, r in ((0, 1.0), (1, 1.0), (40, 0.5), (120, 1.5), (60, 10.0)):
        points = [(rng.uniform(0, 4), rng.uniform(0, 4)) for _ in range(n)]
        assert count_close_pairs(points, r) == _brute_close_pairs(points, r)


def test_close_pairs_method_agrees():
    region = Rectangle(4.0, 4.0)
    rng = random.Random(2)
    points = [(rng.uniform(0, 4), rng.uniform(0, 4)) for _ in range(80)]
    config = PointConfiguration(points, region)
    assert config.close_pairs(1.0) == _brute_close_pairs(points, 1.0)
