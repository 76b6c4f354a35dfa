"""Anchor deployment, compromise injection and quarantine.

Deployment follows a chained trilateration scheme.  Three random anchors form
the first group and a fourth anchor is dropped on that group's trilateration
point.  Every later group joins the most recently dropped anchor, one member
of the previous group and one fresh random anchor, and the next anchor is
dropped on the new group's trilateration point.  Consecutive groups therefore
share an anchor, which is what links them as neighbours.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (CountExceedsPopulation, DegenerateGeometry, PlacementExhausted,
                     UnknownAnchorId)
from .geometry import D_MIN, J_MIN, Point, canonical_frame, centroid

log = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class AnchorNode:
    id: int
    true_position: Point
    reported_position: Point
    compromised: bool = False
    quarantined: bool = False


@dataclass(frozen=True)
class TrilaterationGroup:
    group_id: int
    member_ids: tuple[int, int, int]
    trilateration_point: Point


@dataclass(frozen=True)
class AttackSpec:
    count: int = 0
    offset_min: float = 20.0
    offset_max: float = 100.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("attack count must be >= 0")
        if not 0 <= self.offset_min <= self.offset_max:
            raise ValueError("need 0 <= offset_min <= offset_max")


@dataclass(frozen=True)
class Deployment:
    area_width: float
    area_height: float
    anchors: tuple[AnchorNode, ...]
    groups: tuple[TrilaterationGroup, ...]
    neighbor_map: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def anchor(self, anchor_id: int) -> AnchorNode:
        # ids are assigned densely from 0
        if not 0 <= anchor_id < len(self.anchors):
            raise UnknownAnchorId(anchor_id)
        return self.anchors[anchor_id]

    def group(self, group_id: int) -> TrilaterationGroup:
        return self.groups[group_id]

    def is_active(self, group: TrilaterationGroup) -> bool:
        """A group is usable unless one of its members is quarantined."""
        return not any(self.anchors[a].quarantined for a in group.member_ids)

    def active_groups(self) -> list[TrilaterationGroup]:
        return [g for g in self.groups if self.is_active(g)]

    def groups_of(self, anchor_id: int) -> list[int]:
        return [g.group_id for g in self.groups if anchor_id in g.member_ids]

    @property
    def compromised_ids(self) -> frozenset[int]:
        return frozenset(a.id for a in self.anchors if a.compromised)

    def to_lines(self) -> list[str]:
        lines = ["id,true_x,true_y,reported_x,reported_y,compromised,quarantined"]
        for a in self.anchors:
            lines.append(",".join([
                str(a.id), repr(a.true_position.x), repr(a.true_position.y),
                repr(a.reported_position.x), repr(a.reported_position.y),
                str(int(a.compromised)), str(int(a.quarantined))]))
        return lines

    def dump(self, path) -> None:
        Path(path).write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8", newline="\n")


def _clamp(p: Point, width: float, height: float) -> Point:
    return Point(min(max(p.x, 0.0), width), min(max(p.y, 0.0), height))


def _uniform_point(rng: np.random.Generator, width: float, height: float) -> Point:
    x, y = rng.uniform(0.0, 1.0, size=2)
    return Point(float(x) * width, float(y) * height)


def _valid_triple(a: Point, b: Point, c: Point) -> bool:
    try:
        canonical_frame(a, b, c, D_MIN, J_MIN)
    except DegenerateGeometry:
        return False
    return True


def neighbor_map_of(groups: Iterable[TrilaterationGroup]) -> dict[int, tuple[int, ...]]:
    """Groups are neighbours when they share at least one anchor."""
    groups = list(groups)
    by_anchor: dict[int, set[int]] = {}
    for g in groups:
        for a in g.member_ids:
            by_anchor.setdefault(a, set()).add(g.group_id)
    out = {}
    for g in groups:
        adj = set()
        for a in g.member_ids:
            adj |= by_anchor[a]
        adj.discard(g.group_id)
        out[g.group_id] = tuple(sorted(adj))
    return out


def deploy(area: tuple[float, float], node_count: int, rng: np.random.Generator,
           max_attempts: int = MAX_PLACEMENT_ATTEMPTS) -> Deployment:
    width, height = float(area[0]), float(area[1])
    if not (width > 0 and height > 0):
        raise ValueError("deployment area must be positive")
    if node_count < 4:
        raise ValueError("node_count must be >= 4")

    for _ in range(max_attempts):
        positions = [_uniform_point(rng, width, height) for _ in range(3)]
        if _valid_triple(*positions):
            break
    else:
        raise PlacementExhausted("could not draw a non-degenerate initial triple")

    groups: list[TrilaterationGroup] = []

    def add_group(members: tuple[int, int, int]) -> Point:
        point = _clamp(centroid([positions[m] for m in members]), width, height)
        groups.append(TrilaterationGroup(len(groups), members, point))
        return point

    last = (0, 1, 2)
    positions.append(add_group(last))
    pending: int | None = 3

    while len(positions) < node_count:
        if pending is not None:
            seed = pending
        else:
            others = [k for k in range(len(positions)) if k not in last]
            seed = others[int(rng.integers(len(others)))]
        shared_choices = [m for m in last if m != seed]
        for _ in range(max_attempts):
            shared = shared_choices[int(rng.integers(len(shared_choices)))]
            fresh = _uniform_point(rng, width, height)
            if _valid_triple(positions[seed], positions[shared], fresh):
                break
        else:
            raise PlacementExhausted(f"no valid triple around anchor {seed} "
                                     f"after {max_attempts} attempts")
        positions.append(fresh)
        last = (seed, shared, len(positions) - 1)
        point = add_group(last)
        # only drop an anchor on the trilateration point when a later group
        # can still pick it up
        if node_count - len(positions) >= 2:
            positions.append(point)
            pending = len(positions) - 1
        else:
            pending = None

    anchors = tuple(AnchorNode(k, p, p) for k, p in enumerate(positions))
    groups_t = tuple(groups)
    return Deployment(width, height, anchors, groups_t, neighbor_map_of(groups_t))


def inject_attack(dep: Deployment, spec: AttackSpec, rng: np.random.Generator) -> Deployment:
    """Compromise ``spec.count`` random anchors.

    The victim order, offsets and directions are drawn for the whole
    population before truncating to ``count``, so for a fixed stream the
    victims of a smaller attack are a prefix of those of a larger one.
    """
    n = len(dep.anchors)
    if spec.count > n:
        raise CountExceedsPopulation(f"cannot compromise {spec.count} of {n} anchors")
    order = rng.permutation(n)
    radius = rng.uniform(spec.offset_min, spec.offset_max, size=n)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    if spec.count == 0:
        return dep
    anchors = list(dep.anchors)
    for k in range(spec.count):
        a = anchors[int(order[k])]
        r, t = float(radius[k]), float(theta[k])
        moved = Point(a.true_position.x + r * math.cos(t), a.true_position.y + r * math.sin(t))
        anchors[a.id] = replace(a, reported_position=moved, compromised=True)
    return replace(dep, anchors=tuple(anchors))


def displace_anchor(dep: Deployment, anchor_id: int, offset: tuple[float, float]) -> Deployment:
    """Compromise a single anchor with an explicit displacement vector."""
    a = dep.anchor(anchor_id)
    moved = Point(a.true_position.x + offset[0], a.true_position.y + offset[1])
    anchors = list(dep.anchors)
    anchors[anchor_id] = replace(a, reported_position=moved, compromised=True)
    return replace(dep, anchors=tuple(anchors))


def quarantine(dep: Deployment, flagged: Iterable[int]) -> Deployment:
    flagged = set(flagged)
    for a in flagged:
        dep.anchor(a)
    if not flagged:
        return dep
    anchors = tuple(replace(a, quarantined=True) if a.id in flagged else a for a in dep.anchors)
    return replace(dep, anchors=anchors)
