"""Turning cursor trajectories into observation sequences over AOI names."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, UnknownSymbol, ValidationError
from .geometry import AttractionStats, InterfaceLayout, Trajectory
from .possibility import DEFAULT_FUZZIFIER, assess_distances

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ObservationSequence:
    """Ordered AOI symbols emitted for one trajectory.

    `source` identifies the trajectory the sequence was built from; it is
    not part of the sequence file format and is ignored by equality.
    """

    symbols: tuple[str, ...]
    label: str | None = None
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def encode(self, alphabet: Sequence[str]) -> np.ndarray:
        index = {s: i for i, s in enumerate(alphabet)}
        try:
            return np.array([index[s] for s in self.symbols], dtype=np.int64)
        except KeyError as exc:
            raise UnknownSymbol(f"symbol {exc.args[0]!r} is not in the alphabet") from None


@dataclass(frozen=True)
class VectorizerParams:
    omega: float = 0.0
    m: float = DEFAULT_FUZZIFIER
    threshold: float = DEFAULT_THRESHOLD
    ds: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega >= 0):
            raise ValidationError(f"omega must be finite and >= 0, got {self.omega}")
        if not (self.m > 1):
            raise ValidationError(f"fuzzifier m must be > 1, got {self.m}")
        if not (0 <= self.threshold <= 1):
            raise ValidationError(f"possibility threshold must lie in [0, 1], got {self.threshold}")
        if int(self.ds) != self.ds or self.ds <= 0:
            raise ValidationError(f"ds must be a positive integer, got {self.ds}")


def _sample(traj: Trajectory, ds: int) -> np.ndarray:
    # trajectories are recorded at their own ds; emit once per params.ds ticks
    step = max(1, ds // traj.ds)
    return traj.xy[::step]


def classical_emissions(dist: np.ndarray) -> np.ndarray:
    """Per-tick emitted area index (-1 for none) under strict kernel membership."""
    inside = dist == 0
    return np.where(inside.any(axis=1), inside.argmax(axis=1), -1)


def possibilistic_emissions(dist: np.ndarray, psi: np.ndarray, m: float, threshold: float) -> np.ndarray:
    """Per-tick emitted area index (-1 for none) under possibilistic membership.

    Highest necessity wins when any necessity is positive; otherwise the
    highest possibility wins if it exceeds `threshold`. Ties go to the
    nearer kernel, then to the earlier area.
    """
    if len(dist) == 0:
        return np.zeros(0, dtype=np.int64)
    _, pos, nec = assess_distances(dist, psi, m)
    top_n = nec.max(axis=1)
    top_p = pos.max(axis=1)
    by_n = top_n > 0
    score = np.where(by_n[:, None], nec, pos)
    best = np.where(by_n, top_n, top_p)
    emits = by_n | (top_p > threshold)
    tied_dist = np.where(score == best[:, None], dist, np.inf)
    return np.where(emits, tied_dist.argmin(axis=1), -1)


def classical_indices(dist: np.ndarray) -> np.ndarray:
    e = classical_emissions(dist)
    return e[e >= 0]


def possibilistic_indices(dist: np.ndarray, psi: np.ndarray, m: float, threshold: float) -> np.ndarray:
    e = possibilistic_emissions(dist, psi, m, threshold)
    return e[e >= 0]


def vectorize_classical(traj: Trajectory, layout: InterfaceLayout, ds: int | None = None) -> ObservationSequence:
    """Emit an area each time the cursor sits inside its kernel; skip everything else."""
    dist = layout.distances(_sample(traj, ds or traj.ds))
    names = layout.names
    return ObservationSequence(tuple(names[i] for i in classical_indices(dist)), traj.label, traj.id)


def vectorize_possibilistic(
    traj: Trajectory,
    layout: InterfaceLayout,
    stats: AttractionStats,
    params: VectorizerParams,
) -> ObservationSequence:
    if stats.names != layout.names:
        raise ValidationError("attraction statistics were built for a different layout")
    if stats.omega != params.omega:
        raise ValidationError(f"statistics built with omega={stats.omega}, params ask for omega={params.omega}")
    dist = layout.distances(_sample(traj, params.ds))
    idx = possibilistic_indices(dist, stats.psi, params.m, params.threshold)
    names = layout.names
    return ObservationSequence(tuple(names[i] for i in idx), traj.label, traj.id)


def format_sequence(seq: ObservationSequence) -> str:
    body = " ".join(seq.symbols)
    if seq.label is None:
        return body
    return f"{seq.label}\t{body}"


def parse_sequence(line: str, path=None, lineno=None) -> ObservationSequence:
    label = None
    if "\t" in line:
        label, line = line.split("\t", 1)
        if not label or any(c.isspace() for c in label):
            raise FormatError(f"invalid label {label!r}", path, lineno)
    return ObservationSequence(tuple(line.split()), label)


def write_sequences(path, seqs: Iterable[ObservationSequence]):
    lines = []
    for seq in seqs:
        if seq.label is not None and (not seq.label or any(c.isspace() for c in seq.label)):
            raise ValidationError(f"label {seq.label!r} cannot be written to a sequence file")
        lines.append(format_sequence(seq) + "\n")
    Path(path).write_text("".join(lines))


def read_sequences(path) -> list[ObservationSequence]:
    path = Path(path)
    text = path.read_text()
    if not text:
        return []
    lines = text.split("\n")
    if text.endswith("\n"):
        lines.pop()
    return [parse_sequence(line, path, i) for i, line in enumerate(lines, start=1)]
