"""
Areas Of Interest, cursor trajectories and region classification.

An interface is a set of named kernel rectangles. Each kernel gets an
attraction power from the number of corpus fixations it receives per square
pixel, and the attraction sets how wide the "Near" band around the kernel is.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AllAttractionsZero, FormatError, LayoutOverlapError, ValidationError


class Region(enum.Enum):
    KERNEL = "Kernel"
    NEAR = "Near"
    FAR = "Far"


@dataclass(frozen=True)
class Fixation:
    t: int
    x: float
    y: float

    def __post_init__(self):
        for v in (self.x, self.y):
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"fixation coordinates must be finite and >= 0, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class AreaOfInterest:
    name: str
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ValidationError(f"area name must be a non-empty token without whitespace, got {self.name!r}")
        if not (self.width > 0 and self.height > 0):
            raise ValidationError(f"area {self.name}: width and height must be > 0")
        if not all(math.isfinite(v) for v in (self.left, self.top, self.width, self.height)):
            raise ValidationError(f"area {self.name}: kernel coordinates must be finite")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def surface(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2, self.top + self.height / 2)

    def intersects(self, other: AreaOfInterest) -> bool:
        # closed rectangles: shared edges count as an intersection
        return not (
            self.right < other.left
            or other.right < self.left
            or self.bottom < other.top
            or other.bottom < self.top
        )


class InterfaceLayout:
    """Ordered, validated collection of AOIs; the order defines symbol indices."""

    def __init__(self, areas: Iterable[AreaOfInterest]):
        areas = tuple(areas)
        if not areas:
            raise ValidationError("a layout needs at least one area")
        seen = set()
        for a in areas:
            if a.name in seen:
                raise ValidationError(f"duplicate area name {a.name!r}")
            seen.add(a.name)
        for i, a in enumerate(areas):
            for b in areas[i + 1:]:
                if a.intersects(b):
                    raise LayoutOverlapError(f"kernels of areas {a.name!r} and {b.name!r} overlap")
        self.areas = areas
        self._bounds = np.array([[a.left, a.top, a.right, a.bottom] for a in areas], dtype=float)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.areas)

    def __len__(self):
        return len(self.areas)

    def __iter__(self):
        return iter(self.areas)

    def __getitem__(self, i):
        return self.areas[i]

    def __eq__(self, other):
        return isinstance(other, InterfaceLayout) and self.areas == other.areas

    def __hash__(self):
        return hash(self.areas)

    def __repr__(self):
        return f"InterfaceLayout({list(self.names)})"

    def index(self, name: str) -> int:
        return self.names.index(name)

    def distances(self, xy) -> np.ndarray:
        """Kernel distance of every point in `xy` (shape (T, 2)) to every area; shape (T, N)."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        x = xy[:, 0:1]
        y = xy[:, 1:2]
        left, top, right, bottom = self._bounds.T
        dx = np.maximum(np.maximum(left - x, x - right), 0.0)
        dy = np.maximum(np.maximum(top - y, y - bottom), 0.0)
        return np.hypot(dx, dy)

    def to_json(self) -> str:
        rows = [
            {"name": a.name, "left": a.left, "top": a.top, "width": a.width, "height": a.height}
            for a in self.areas
        ]
        return json.dumps(rows, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str, path=None) -> InterfaceLayout:
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
        if not isinstance(rows, list):
            raise FormatError("layout must be a JSON list of area objects", path)
        areas = []
        for i, row in enumerate(rows):
            try:
                areas.append(
                    AreaOfInterest(
                        name=str(row["name"]),
                        left=float(row["left"]),
                        top=float(row["top"]),
                        width=float(row["width"]),
                        height=float(row["height"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"area #{i}: {exc}", path) from exc
        try:
            return cls(areas)
        except ValidationError as exc:
            raise FormatError(str(exc), path) from exc

    @classmethod
    def load(cls, path) -> InterfaceLayout:
        path = Path(path)
        return cls.from_json(path.read_text(), path)

    def save(self, path):
        Path(path).write_text(self.to_json())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Cursor positions sampled once per `ds` centiseconds.

    Positions are stored as a (T, 2) float array; time indices run
    ``t0, t0 + 1, ...``.
    """

    xy: np.ndarray
    ds: int = 1
    label: str | None = None
    id: str | None = None
    t0: int = 0

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(-1, 2)
        if len(xy) == 0:
            raise ValidationError("a trajectory needs at least one fixation")
        if not np.all(np.isfinite(xy)) or np.any(xy < 0):
            raise ValidationError("fixation coordinates must be finite and >= 0")
        if int(self.ds) != self.ds or self.ds <= 0:
            raise ValidationError(f"ds must be a positive integer, got {self.ds}")
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)

    def __len__(self):
        return len(self.xy)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            (self.ds, self.label, self.id, self.t0) == (other.ds, other.label, other.id, other.t0)
            and np.array_equal(self.xy, other.xy)
        )

    @property
    def fixations(self) -> list[Fixation]:
        return [Fixation(self.t0 + i, float(x), float(y)) for i, (x, y) in enumerate(self.xy)]

    @classmethod
    def from_fixations(cls, fixations: Sequence[Fixation], **kwargs) -> Trajectory:
        if not fixations:
            raise ValidationError("a trajectory needs at least one fixation")
        ts = [f.t for f in fixations]
        if any(b - a != 1 for a, b in zip(ts, ts[1:])):
            raise ValidationError("fixation time indices must increase by exactly 1")
        return cls(np.array([[f.x, f.y] for f in fixations]), t0=ts[0], **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for i, (x, y) in enumerate(self.xy):
            w.writerow([self.t0 + i, _fmt_coord(x), _fmt_coord(y)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, path=None, **kwargs) -> Trajectory:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x", "y"]:
            raise FormatError("expected header 't,x,y'", path, 1)
        ts, xy = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"expected 3 fields, got {len(row)}", path, lineno)
            try:
                t, x, y = int(row[0]), float(row[1]), float(row[2])
            except ValueError as exc:
                raise FormatError(str(exc), path, lineno) from exc
            if ts and t != ts[-1] + 1:
                raise FormatError(f"time index {t} does not follow {ts[-1]}", path, lineno)
            if not (math.isfinite(x) and math.isfinite(y)) or x < 0 or y < 0:
                raise FormatError("coordinates must be finite and >= 0", path, lineno)
            ts.append(t)
            xy.append((x, y))
        if not ts:
            raise FormatError("trajectory has no fixations", path)
        return cls(np.array(xy), t0=ts[0], **kwargs)

    @classmethod
    def load(cls, path, **kwargs) -> Trajectory:
        path = Path(path)
        kwargs.setdefault("id", path.stem)
        return cls.from_csv(path.read_text(), path, **kwargs)

    def save(self, path):
        Path(path).write_text(self.to_csv())


def _fmt_coord(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class AttractionStats:
    """Per-area attraction power, normalized attraction and Near-band width."""

    names: tuple[str, ...]
    atr: np.ndarray
    lam: np.ndarray
    psi: np.ndarray
    omega: float
    counts: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("atr", "lam", "psi", "counts"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=float)
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    def __eq__(self, other):
        if not isinstance(other, AttractionStats):
            return NotImplemented
        return (
            self.names == other.names
            and self.omega == other.omega
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("atr", "lam", "psi"))
        )

    def for_area(self, name: str) -> tuple[float, float, float]:
        i = self.names.index(name)
        return float(self.atr[i]), float(self.lam[i]), float(self.psi[i])


def kernel_distance(f: Fixation, a: AreaOfInterest) -> float:
    """Euclidean distance from the fixation to the nearest point of the kernel (0 inside)."""
    dx = max(a.left - f.x, 0.0, f.x - a.right)
    dy = max(a.top - f.y, 0.0, f.y - a.bottom)
    return math.hypot(dx, dy)


def kernel_counts(layout: InterfaceLayout, corpus: Iterable[Trajectory]) -> np.ndarray:
    counts = np.zeros(len(layout))
    for traj in corpus:
        counts += (layout.distances(traj.xy) == 0).sum(axis=0)
    return counts


def stats_from_counts(layout: InterfaceLayout, counts, omega: float) -> AttractionStats:
    if not (omega >= 0 and math.isfinite(omega)):
        raise ValidationError(f"omega must be finite and >= 0, got {omega}")
    counts = np.asarray(counts, dtype=float)
    surfaces = np.array([a.surface for a in layout])
    atr = counts / surfaces
    top = atr.max()
    if top <= 0:
        raise AllAttractionsZero("no fixation of the corpus lies inside any kernel")
    lam = atr / top
    return AttractionStats(layout.names, atr, lam, lam + omega, float(omega), counts)


def compute_attraction_stats(layout: InterfaceLayout, corpus: Sequence[Trajectory], omega: float) -> AttractionStats:
    """Attraction statistics of each area over a training corpus.

    Raises
    ------
    ValidationError
        If the corpus is empty or omega is negative.
    AllAttractionsZero
        If no fixation lies in any kernel.
    """
    if not corpus:
        raise ValidationError("attraction statistics need a non-empty corpus")
    return stats_from_counts(layout, kernel_counts(layout, corpus), omega)


def classify_distance(d: float, psi: float) -> Region:
    if d == 0:
        return Region.KERNEL
    if d < psi:
        return Region.NEAR
    return Region.FAR


def classify_region(f: Fixation, a: AreaOfInterest, stats: AttractionStats) -> Region:
    _, _, psi = stats.for_area(a.name)
    return classify_distance(kernel_distance(f, a), psi)
