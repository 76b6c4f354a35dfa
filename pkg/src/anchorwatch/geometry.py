"""Closed-form 2-D trilateration.

Three anchors are mapped into a canonical frame where anchor 1 sits at the
origin, anchor 2 on the positive x-axis at ``(D, 0)`` and anchor 3 at
``(i, j)``.  Subtracting the range-circle equations pairwise gives the
target's canonical coordinates in closed form::

    A1 = (L1^2 - L2^2 + D^2) / (2 D)
    A2 = (L1^2 - L3^2 + i^2 + j^2) / (2 j) - (i / j) A1

The leftover ``L1^2 - A1^2 - A2^2`` is what would be the squared height above
the plane in 3-D.  In the plane it should be zero, so its magnitude is
returned as a consistency residual.

``solve_canonical`` and ``CanonicalFrame.to_world`` are plain arithmetic and
accept numpy arrays of ranges as well as floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import CollinearAnchors, DegenerateBaseline, EmptyInput

D_MIN = 1.0
J_MIN = 1.0


class Point(NamedTuple):
    x: float
    y: float


class RangeTriple(NamedTuple):
    L1: float
    L2: float
    L3: float


@dataclass(frozen=True)
class CanonicalFrame:
    """Rigid transform taking world coordinates to the canonical frame.

    ``rotation`` maps world offsets (relative to ``origin``) to canonical
    coordinates; its transpose maps back.
    """

    origin: Point
    rotation: tuple[tuple[float, float], tuple[float, float]]
    D: float
    i: float
    j: float

    def to_canonical(self, p: Point) -> Point:
        (r00, r01), (r10, r11) = self.rotation
        dx = p[0] - self.origin[0]
        dy = p[1] - self.origin[1]
        return Point(r00 * dx + r01 * dy, r10 * dx + r11 * dy)

    def to_world(self, u, v):
        """Inverse transform; ``u``/``v`` may be floats or arrays."""
        (r00, r01), (r10, r11) = self.rotation
        return (self.origin[0] + r00 * u + r10 * v,
                self.origin[1] + r01 * u + r11 * v)


def canonical_frame(p1: Point, p2: Point, p3: Point,
                    d_min: float = D_MIN, j_min: float = J_MIN) -> CanonicalFrame:
    dx = p2[0] - p1[0]
    dy = p2[1] - p1[1]
    D = math.hypot(dx, dy)
    if D == 0.0:
        raise DegenerateBaseline("anchors 1 and 2 coincide")
    c, s = dx / D, dy / D
    ox, oy = p3[0] - p1[0], p3[1] - p1[1]
    i = c * ox + s * oy
    j = -s * ox + c * oy
    # collinearity is tested first so a flat triangle is reported as such
    # even when its baseline is also short
    if abs(j) < j_min:
        raise CollinearAnchors(f"third anchor is {abs(j):.3g} m off the baseline (< {j_min})")
    if D < d_min:
        raise DegenerateBaseline(f"baseline {D:.3g} m is shorter than {d_min} m")
    return CanonicalFrame(Point(float(p1[0]), float(p1[1])), ((c, s), (-s, c)), D, i, j)


def solve_canonical(frame: CanonicalFrame, r):
    """Return ``(A1, A2, residual)`` for ranges ``r = (L1, L2, L3)``."""
    L1, L2, L3 = r
    D, i, j = frame.D, frame.i, frame.j
    L1sq = L1 * L1
    a1 = (L1sq - L2 * L2 + D * D) / (2.0 * D)
    a2 = (L1sq - L3 * L3 + i * i + j * j) / (2.0 * j) - (i / j) * a1
    residual = abs(L1sq - a1 * a1 - a2 * a2)
    return a1, a2, residual


def trilaterate(anchors: Sequence[Point], r, d_min: float = D_MIN,
                j_min: float = J_MIN) -> tuple[Point, float]:
    frame = canonical_frame(anchors[0], anchors[1], anchors[2], d_min, j_min)
    a1, a2, residual = solve_canonical(frame, r)
    x, y = frame.to_world(a1, a2)
    return Point(x, y), residual


def range_jacobian(frame: CanonicalFrame, r) -> tuple[tuple[float, float, float],
                                                       tuple[float, float, float]]:
    """First-order sensitivity of the world-frame solution to each range.

    Row 0 holds d(x)/d(L_k), row 1 holds d(y)/d(L_k).
    """
    L1, L2, L3 = r
    D, i, j = frame.D, frame.i, frame.j
    da1 = (L1 / D, -L2 / D, 0.0)
    da2 = (L1 / j - (i / j) * da1[0], -(i / j) * da1[1], -L3 / j)
    (r00, r01), (r10, r11) = frame.rotation
    dx = tuple(r00 * u + r10 * v for u, v in zip(da1, da2))
    dy = tuple(r01 * u + r11 * v for u, v in zip(da1, da2))
    return dx, dy


def circles_intersect(D: float, L1: float, L2: float) -> bool:
    """True iff two circles with centres ``D`` apart cross at two points."""
    return abs(L1 - L2) < D < L1 + L2


def centroid(points: Sequence[Point]) -> Point:
    if not points:
        raise EmptyInput("centroid of an empty point set")
    n = len(points)
    return Point(math.fsum(p[0] for p in points) / n, math.fsum(p[1] for p in points) / n)


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
