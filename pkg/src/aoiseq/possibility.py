"""
Possibility/necessity measures and fixation membership quantification.

Two layers live here. `PossibilityDistribution` with `possibility_of_event`
and `necessity_of_event` are the plain measures over a finite universe. The
remaining functions grade how strongly one cursor fixation belongs to each
Area Of Interest: inside a kernel both degrees are 1, inside the Near band
the possibility is 1 and the necessity falls off with distance, and in the
Far region the necessity is 0 and the possibility decays as the
fixation-to-kernel distance grows past the band width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidFuzzifier, RegionViolation, UnknownElement, ValidationError, ZeroDistance
from .geometry import AttractionStats, Fixation, InterfaceLayout, Region

DEFAULT_FUZZIFIER = 2.0


class PossibilityDistribution:
    """A normalized possibility distribution over a finite ordered universe."""

    def __init__(self, degrees: Mapping[str, float]):
        if not degrees:
            raise ValidationError("the universe must be non-empty")
        values = list(degrees.values())
        if any(not (0.0 <= v <= 1.0) for v in values):
            raise ValidationError("possibility degrees must lie in [0, 1]")
        if max(values) != 1.0:
            raise ValidationError(f"distribution is not normalized: sup = {max(values)}")
        self.degrees = dict(degrees)

    @property
    def universe(self) -> tuple:
        return tuple(self.degrees)

    def __getitem__(self, element):
        return self.degrees[element]

    def _check(self, event):
        event = set(event)
        unknown = event - self.degrees.keys()
        if unknown:
            raise UnknownElement(f"elements outside the universe: {sorted(map(str, unknown))}")
        return event

    def complement(self, event) -> set:
        return set(self.degrees) - self._check(event)


def possibility_of_event(dist: PossibilityDistribution, event: Iterable) -> float:
    event = dist._check(event)
    return max((dist.degrees[e] for e in event), default=0.0)


def necessity_of_event(dist: PossibilityDistribution, event: Iterable) -> float:
    return 1.0 - possibility_of_event(dist, dist.complement(event))


def _check_fuzzifier(m):
    if not (m > 1) or not math.isfinite(m):
        raise InvalidFuzzifier(f"fuzzifier must be > 1, got {m}")


def bezdek_membership(distances: Sequence[float], m: float = DEFAULT_FUZZIFIER) -> np.ndarray:
    """Fuzzy c-means membership of one point to each area, from its distances.

    ``U_i = (1/d_i)^(2/(m-1)) / sum_k (1/d_k)^(2/(m-1))``. Evaluated through
    the ratios ``d_min / d_i`` so large exponents do not overflow.
    """
    _check_fuzzifier(m)
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1 or len(d) == 0:
        raise ValidationError("need a non-empty 1-D list of distances")
    if np.any(d <= 0):
        raise ZeroDistance("Bezdek membership is undefined at zero distance")
    w = (d.min() / d) ** (2.0 / (m - 1.0))
    return w / w.sum()


def attachment_degree(memberships: Sequence[float]) -> np.ndarray:
    u = np.asarray(memberships, dtype=float)
    return u / u.max()


def possibility_far(phi: float, d: float, psi: float) -> float:
    """Possibility that a Far-region fixation belongs to the area: ``phi * psi / d``."""
    if d < psi or d <= 0:
        raise RegionViolation(f"distance {d} is not in the Far region (psi = {psi})")
    return phi * psi / d


def necessity_near(d: float, psi: float, d_min: float) -> float:
    """Necessity that a Near-region fixation belongs to the area.

    ``(1 - d/psi) * d_min / d`` where `d_min` is the fixation's smallest
    kernel distance over all areas.
    """
    if not (0 < d < psi):
        raise RegionViolation(f"distance {d} is not in the Near region (psi = {psi})")
    if not (0 <= d_min <= d):
        raise ValidationError(f"d_min must satisfy 0 <= d_min <= d, got {d_min}")
    return (1.0 - d / psi) * (d_min / d)


@dataclass(frozen=True)
class MembershipAssessment:
    area: str
    region: Region
    possibility: float
    necessity: float


# Region codes used by the array form.
KERNEL, NEAR, FAR = 0, 1, 2
_REGIONS = (Region.KERNEL, Region.NEAR, Region.FAR)


def assess_distances(dist: np.ndarray, psi: np.ndarray, m: float = DEFAULT_FUZZIFIER):
    """Array form of the per-fixation assessment.

    Parameters
    ----------
    dist : ndarray, shape (T, N)
        Kernel distance of each fixation to each area.
    psi : ndarray, shape (N,)
        Near-band width of each area.

    Returns
    -------
    region, possibility, necessity : ndarray, shape (T, N)
        `region` holds the codes KERNEL / NEAR / FAR.
    """
    _check_fuzzifier(m)
    dist = np.atleast_2d(np.asarray(dist, dtype=float))
    psi = np.asarray(psi, dtype=float)
    kernel = dist == 0
    near = ~kernel & (dist < psi)
    far = ~kernel & ~near
    region = np.where(kernel, KERNEL, np.where(near, NEAR, FAR))

    d_min = dist.min(axis=1, keepdims=True)
    safe = np.where(kernel, 1.0, dist)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        necessity_n = (1.0 - safe / psi) * (d_min / safe)
        # attachment U_i / max_k U_k == (d_min / d_i)^(2/(m-1)); rows touching a
        # kernel take the limit (1 on the kernel area, 0 elsewhere)
        phi = np.where(d_min > 0, (d_min / safe) ** (2.0 / (m - 1.0)), kernel.astype(float))
        possibility_f = phi * psi / safe

    necessity = np.where(kernel, 1.0, np.where(near, necessity_n, 0.0))
    possibility = np.where(far, possibility_f, 1.0)
    return region, possibility, necessity


def assess_fixation(
    f: Fixation,
    layout: InterfaceLayout,
    stats: AttractionStats,
    m: float = DEFAULT_FUZZIFIER,
) -> list[MembershipAssessment]:
    """Region, possibility and necessity of one fixation for every area of the layout."""
    if stats.names != layout.names:
        raise ValidationError("attraction statistics were built for a different layout")
    d = layout.distances([[f.x, f.y]])[0]
    psi = stats.psi
    d_min = float(d.min())
    phi = None
    if d_min > 0 and np.any(d >= psi):
        phi = attachment_degree(bezdek_membership(d, m))
    out = []
    for i, area in enumerate(layout):
        di, psii = float(d[i]), float(psi[i])
        if di == 0:
            out.append(MembershipAssessment(area.name, Region.KERNEL, 1.0, 1.0))
        elif di < psii:
            out.append(MembershipAssessment(area.name, Region.NEAR, 1.0, necessity_near(di, psii, d_min)))
        else:
            # phi is None only when another kernel holds the fixation: limit membership 0
            p = possibility_far(float(phi[i]), di, psii) if phi is not None else 0.0
            out.append(MembershipAssessment(area.name, Region.FAR, p, 0.0))
    return out
