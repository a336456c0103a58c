"""Pytest configuration and fixtures for ttpqd tests."""

import os
import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

# Add the src directory to the path so we can import ttpqd modules
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from ttpqd.harness.oracle import hand_instance  # noqa: E402
from ttpqd.instance.instance_io import Instance, Item, parse_instance  # noqa: E402

# 3 x 4 rectangle: sides 3 and 4, diagonals 5
RECTANGLE_TTP = """PROBLEM NAME: \trectangle-TTP
KNAPSACK DATA TYPE: \tbounded strongly corr
DIMENSION:\t4
NUMBER OF ITEMS: \t3
CAPACITY OF KNAPSACK: \t20
MIN SPEED: \t0.1
MAX SPEED: \t1
RENTING RATIO: \t0.5
EDGE_WEIGHT_TYPE:\tCEIL_2D
NODE_COORD_SECTION\t(INDEX, X, Y):
1\t0\t0
2\t3\t0
3\t3\t4
4\t0\t4
ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER):
1\t10\t5\t2
2\t20\t8\t3
3\t15\t7\t4
"""


@pytest.fixture
def caplog(caplog):
    """Route loguru records into pytest's caplog."""
    handler_id = logger.add(caplog.handler, format="{message}", level=0)
    yield caplog
    logger.remove(handler_id)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def triangle():
    """Equilateral triangle of side 10, one item (p=100, w=10) in city 2, W=10, R=1."""
    return hand_instance()


@pytest.fixture
def rectangle_text():
    """A complete 4-city, 3-item benchmark document."""
    return RECTANGLE_TTP


@pytest.fixture
def rectangle(rectangle_text):
    return parse_instance(rectangle_text)


@pytest.fixture
def rectangle_file(tmp_path, rectangle_text):
    path = tmp_path / "rectangle_n3_bounded-strongly-corr_01.ttp"
    path.write_text(rectangle_text, encoding="utf-8")
    return path


@pytest.fixture
def octagon():
    """8 cities on a convex ring with 10 items and a small renting ratio."""
    coords = ((0, 0), (20, 0), (40, 10), (50, 30), (40, 50), (20, 60), (0, 50), (-10, 25))
    table = [
        (40, 10, 2),
        (30, 8, 3),
        (25, 9, 4),
        (50, 15, 5),
        (20, 6, 6),
        (35, 12, 7),
        (15, 5, 8),
        (45, 14, 3),
        (10, 4, 5),
        (28, 11, 6),
    ]
    return Instance(
        name="octagon",
        n=8,
        coords=tuple((float(x), float(y)) for x, y in coords),
        capacity=40,
        min_speed=0.1,
        max_speed=1.0,
        renting_ratio=0.01,
        items=tuple(
            Item(index=k, profit=float(p), weight=w, city=c) for k, (p, w, c) in enumerate(table, start=1)
        ),
    )


@pytest.fixture
def instance_dir():
    """Directory holding the benchmark .ttp files; integration tests skip without it."""
    path = os.getenv("TTPQD_INSTANCE_DIR")
    if not path or not Path(path).is_dir():
        pytest.skip("TTPQD_INSTANCE_DIR is not set")
    return Path(path)
