"""Parsing, validation and serialization of TTP benchmark instances."""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import TextIO

import numpy as np
from loguru import logger

from ttpqd.config.config import MATRIX_THRESHOLD
from ttpqd.errors import (
    CountMismatch,
    IndexOutOfRange,
    InstanceFormatError,
    InvalidItemCity,
    MalformedHeader,
    NonIntegerWeight,
)

HEADER_KEYS = {
    "PROBLEM NAME": "name",
    "KNAPSACK DATA TYPE": "knapsack_data_type",
    "DIMENSION": "n",
    "NUMBER OF ITEMS": "m",
    "CAPACITY OF KNAPSACK": "capacity",
    "MIN SPEED": "min_speed",
    "MAX SPEED": "max_speed",
    "RENTING RATIO": "renting_ratio",
    "EDGE_WEIGHT_TYPE": "edge_weight_type",
}

_HEADER_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z_ ]*?)\s*:\s*(.*?)\s*$")
_ITEM_COUNT_RE = re.compile(r"_n(\d+)_")


class EdgeWeightType(str, Enum):
    CEIL_2D = "CEIL_2D"
    EUC_2D = "EUC_2D"


@dataclass(frozen=True)
class Item:
    """One item: 1-based index, profit, integral weight and the city holding it."""

    index: int
    profit: float
    weight: int
    city: int


@dataclass(frozen=True)
class Instance:
    """Immutable TTP problem data.

    Cities and items are 1-based in the public API. Numpy views over the item table and
    the distance matrix are derived lazily and cached on the instance.
    """

    name: str
    n: int
    coords: tuple[tuple[float, float], ...]
    capacity: int
    min_speed: float
    max_speed: float
    renting_ratio: float
    items: tuple[Item, ...] = ()
    edge_weight_type: EdgeWeightType = EdgeWeightType.CEIL_2D
    knapsack_data_type: str = ""
    matrix_threshold: int = field(default=MATRIX_THRESHOLD, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise MalformedHeader(f"DIMENSION must be at least 2, got {self.n}")
        if len(self.coords) != self.n:
            raise CountMismatch(f"expected {self.n} coordinates, got {len(self.coords)}")
        if self.capacity < 0:
            raise MalformedHeader(f"CAPACITY OF KNAPSACK must be non-negative, got {self.capacity}")
        if not self.max_speed > self.min_speed > 0:
            raise MalformedHeader(
                f"speeds must satisfy MAX SPEED > MIN SPEED > 0, "
                f"got {self.min_speed} and {self.max_speed}"
            )
        if self.items and self.capacity == 0:
            raise MalformedHeader("CAPACITY OF KNAPSACK must be positive when items exist")
        for item in self.items:
            if not 2 <= item.city <= self.n:
                raise InvalidItemCity(
                    f"item {item.index} is assigned to city {item.city}; "
                    f"items may only sit in cities 2..{self.n}"
                )
            if not isinstance(item.weight, (int, np.integer)) or item.weight < 0:
                raise NonIntegerWeight(f"item {item.index} has weight {item.weight!r}")

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def nu(self) -> float:
        """Speed loss per unit of carried weight."""
        if self.capacity == 0:
            return 0.0
        return (self.max_speed - self.min_speed) / self.capacity

    @cached_property
    def profits(self) -> np.ndarray:
        return np.array([item.profit for item in self.items], dtype=np.float64)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([item.weight for item in self.items], dtype=np.int64)

    @cached_property
    def item_cities(self) -> np.ndarray:
        """0-based city of every item."""
        return np.array([item.city - 1 for item in self.items], dtype=np.int64)

    @cached_property
    def coord_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=np.float64).reshape(self.n, 2)

    @cached_property
    def distance_matrix(self) -> np.ndarray | None:
        """Full n x n matrix, or None when the instance is above the matrix threshold."""
        if self.n > self.matrix_threshold:
            logger.debug(f"{self.name}: n={self.n} above threshold, distances on demand")
            return None
        xy = self.coord_array
        diff = xy[:, None, :] - xy[None, :, :]
        return _round(np.sqrt((diff**2).sum(axis=2)), self.edge_weight_type)

    def dist(self, u: int, v: int) -> float:
        """Distance between 1-based cities without bounds checking."""
        matrix = self.distance_matrix
        if matrix is not None:
            return matrix.item(u - 1, v - 1)
        return _scalar_distance(self, u, v)

    def legs(self, order: np.ndarray) -> np.ndarray:
        """Lengths of the legs departing each position of a 0-based tour order.

        The last entry is the closing leg back to the first city.
        """
        nxt = np.roll(order, -1)
        matrix = self.distance_matrix
        if matrix is not None:
            return matrix[order, nxt]
        xy = self.coord_array
        diff = xy[order] - xy[nxt]
        return _round(np.sqrt((diff**2).sum(axis=1)), self.edge_weight_type)


def _round(values: np.ndarray, kind: EdgeWeightType) -> np.ndarray:
    if kind == EdgeWeightType.CEIL_2D:
        return np.ceil(values)
    return np.floor(values + 0.5)


def _scalar_distance(inst: Instance, u: int, v: int) -> float:
    (x1, y1), (x2, y2) = inst.coords[u - 1], inst.coords[v - 1]
    dx, dy = x1 - x2, y1 - y2
    raw = math.sqrt(dx * dx + dy * dy)
    if inst.edge_weight_type == EdgeWeightType.CEIL_2D:
        return float(math.ceil(raw))
    return float(math.floor(raw + 0.5))


def distance(inst: Instance, u: int, v: int) -> float:
    """Symmetric TSPLIB distance between 1-based cities u and v.

    Args:
        inst: The instance.
        u: First city, in [1, n].
        v: Second city, in [1, n].

    Returns:
        float: Ceiling (CEIL_2D) or nearest-integer (EUC_2D) Euclidean distance.

    Raises:
        IndexOutOfRange: If either index lies outside [1, n].
    """
    for city in (u, v):
        if not 1 <= city <= inst.n:
            raise IndexOutOfRange(f"city {city} outside [1, {inst.n}]")
    if u == v:
        return 0.0
    return inst.dist(u, v)


def _parse_number(key: str, raw: str, cast):
    try:
        return cast(raw)
    except ValueError as e:
        raise MalformedHeader(f"{key}: cannot parse {raw!r}") from e


def _parse_int(key: str, raw: str) -> int:
    value = _parse_number(key, raw, float)
    if not value.is_integer():
        raise MalformedHeader(f"{key}: expected an integer, got {raw!r}")
    return int(value)


def _parse_field(lineno: int, label: str, raw: str, cast):
    try:
        return cast(raw)
    except ValueError as e:
        raise InstanceFormatError(f"line {lineno}: cannot parse {label} {raw!r}") from e


def _section_kind(line: str) -> str | None:
    upper = line.strip().upper()
    if upper.startswith("NODE_COORD_SECTION"):
        return "coords"
    if upper.startswith("ITEMS SECTION"):
        return "items"
    if upper == "EOF":
        return "eof"
    return None


def parse_instance(text: str | TextIO, name: str | None = None) -> Instance:
    """Parse a benchmark `.ttp` document.

    Args:
        text: The document, as a string or an open text stream.
        name: Optional instance name overriding PROBLEM NAME.

    Returns:
        Instance: The validated instance.

    Raises:
        MalformedHeader: Missing or duplicate header keys, unusable values.
        CountMismatch: A section length differs from DIMENSION or NUMBER OF ITEMS.
        InvalidItemCity: An item sits in city 1 or outside the instance.
        NonIntegerWeight: An item weight is fractional or negative.
        InstanceFormatError: A coordinate or item field is not a number.
    """
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()

    header: dict[str, str] = {}
    sections: dict[str, list[tuple[int, list[str]]]] = {"coords": [], "items": []}
    current = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        kind = _section_kind(line)
        if kind == "eof":
            break
        if kind is not None:
            current = kind
            continue
        if current is not None:
            sections[current].append((lineno, line.split()))
            continue
        match = _HEADER_RE.match(line)
        if not match:
            raise MalformedHeader(f"unrecognised header line: {line!r}")
        key = " ".join(match.group(1).upper().split())
        if key not in HEADER_KEYS:
            logger.warning(f"Ignoring unknown header key: {key}")
            continue
        if key in header:
            raise MalformedHeader(f"duplicate header key: {key}")
        header[key] = match.group(2)

    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise MalformedHeader(f"missing header keys: {', '.join(missing)}")

    n = _parse_int("DIMENSION", header["DIMENSION"])
    m = _parse_int("NUMBER OF ITEMS", header["NUMBER OF ITEMS"])
    capacity = _parse_int("CAPACITY OF KNAPSACK", header["CAPACITY OF KNAPSACK"])
    edge_type = header["EDGE_WEIGHT_TYPE"].upper()
    try:
        edge_weight_type = EdgeWeightType(edge_type)
    except ValueError as e:
        raise MalformedHeader(f"unsupported EDGE_WEIGHT_TYPE: {edge_type}") from e

    if len(sections["coords"]) != n:
        raise CountMismatch(f"DIMENSION is {n} but NODE_COORD_SECTION has {len(sections['coords'])} lines")
    if len(sections["items"]) != m:
        raise CountMismatch(f"NUMBER OF ITEMS is {m} but ITEMS SECTION has {len(sections['items'])} lines")

    coords = []
    for lineno, parts in sections["coords"]:
        if len(parts) < 3:
            raise CountMismatch(f"line {lineno}: coordinate line needs 3 fields: {' '.join(parts)}")
        coords.append(
            (_parse_field(lineno, "x", parts[1], float), _parse_field(lineno, "y", parts[2], float))
        )

    items = []
    for k, (lineno, parts) in enumerate(sections["items"], start=1):
        if len(parts) < 4:
            raise CountMismatch(f"line {lineno}: item line needs 4 fields: {' '.join(parts)}")
        profit = _parse_field(lineno, "profit", parts[1], float)
        weight = _parse_field(lineno, "weight", parts[2], float)
        if not weight.is_integer() or weight < 0:
            raise NonIntegerWeight(f"line {lineno}: item {k} has weight {parts[2]}")
        city = _parse_field(lineno, "assigned node", parts[3], int)
        items.append(Item(index=k, profit=profit, weight=int(weight), city=city))

    return Instance(
        name=name if name is not None else header["PROBLEM NAME"],
        n=n,
        coords=tuple(coords),
        capacity=capacity,
        min_speed=_parse_number("MIN SPEED", header["MIN SPEED"], float),
        max_speed=_parse_number("MAX SPEED", header["MAX SPEED"], float),
        renting_ratio=_parse_number("RENTING RATIO", header["RENTING RATIO"], float),
        items=tuple(items),
        edge_weight_type=edge_weight_type,
        knapsack_data_type=header["KNAPSACK DATA TYPE"],
    )


def load_instance(path: str | Path) -> Instance:
    """Read a `.ttp` file; the instance is named after the file stem."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        inst = parse_instance(fh, name=path.stem)
    expected = expected_item_count(inst.name)
    if expected is not None and expected != inst.m:
        logger.warning(f"{inst.name}: file name implies {expected} items but the file holds {inst.m}")
    logger.info(f"Loaded {inst.name}: n={inst.n}, m={inst.m}, W={inst.capacity}")
    return inst


def serialize_instance(inst: Instance) -> str:
    """Write an instance back to the benchmark layout."""
    out = io.StringIO()
    out.write(f"PROBLEM NAME: \t{inst.name}\n")
    out.write(f"KNAPSACK DATA TYPE: \t{inst.knapsack_data_type}\n")
    out.write(f"DIMENSION:\t{inst.n}\n")
    out.write(f"NUMBER OF ITEMS: \t{inst.m}\n")
    out.write(f"CAPACITY OF KNAPSACK: \t{inst.capacity}\n")
    out.write(f"MIN SPEED: \t{inst.min_speed!r}\n")
    out.write(f"MAX SPEED: \t{inst.max_speed!r}\n")
    out.write(f"RENTING RATIO: \t{inst.renting_ratio!r}\n")
    out.write(f"EDGE_WEIGHT_TYPE:\t{inst.edge_weight_type.value}\n")
    out.write("NODE_COORD_SECTION\t(INDEX, X, Y): \n")
    for k, (x, y) in enumerate(inst.coords, start=1):
        out.write(f"{k}\t{x!r}\t{y!r}\n")
    out.write("ITEMS SECTION\t(INDEX, PROFIT, WEIGHT, ASSIGNED NODE NUMBER): \n")
    for item in inst.items:
        out.write(f"{item.index}\t{item.profit!r}\t{item.weight}\t{item.city}\n")
    return out.getvalue()


def expected_item_count(name: str) -> int | None:
    """Item count encoded in a benchmark file name (`_n50_` means 50 items)."""
    match = _ITEM_COUNT_RE.search(name)
    return int(match.group(1)) if match else None
