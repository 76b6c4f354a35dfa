"""Reference location store held by the aggregation server.

Each group gets an ``M1`` record, its own trilateration point.  For every
neighbouring group it also gets one cross record (``M2``, ``M3``, ... in
neighbour order) whose triple mixes members of both groups, so each anchor is
observed from several reference points.  All references come from true
positions, before any anchor is compromised.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .errors import DegenerateGeometry, ParseError
from .geometry import D_MIN, J_MIN, Point, canonical_frame, centroid
from .network import Deployment

log = logging.getLogger(__name__)

HEADER = ("group_id", "member_a", "member_b", "member_c", "ref_x", "ref_y", "store_tag")


@dataclass(frozen=True)
class ReferenceRecord:
    group_id: int
    member_ids: tuple[int, int, int]
    reference_point: Point
    store_tag: str

    @property
    def is_primary(self) -> bool:
        return self.store_tag == "M1"


@dataclass(frozen=True)
class ReferenceStore:
    records: tuple[ReferenceRecord, ...] = ()

    def __post_init__(self):
        seen = set()
        for r in self.records:
            key = (r.group_id, r.store_tag)
            if key in seen:
                raise ValueError(f"duplicate record {key}")
            seen.add(key)

    @cached_property
    def _by_group(self) -> dict[int, list[ReferenceRecord]]:
        out: dict[int, list[ReferenceRecord]] = {}
        for r in self.records:
            out.setdefault(r.group_id, []).append(r)
        return out

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def for_group(self, group_id: int) -> list[ReferenceRecord]:
        return self._by_group.get(group_id, [])

    def m1(self, group_id: int) -> ReferenceRecord:
        for r in self.for_group(group_id):
            if r.is_primary:
                return r
        raise KeyError(f"no M1 record for group {group_id}")

    def cross_records(self, group_id: int) -> list[ReferenceRecord]:
        return [r for r in self.for_group(group_id) if not r.is_primary]


def _mixed_candidates(own: tuple[int, ...], other: tuple[int, ...]):
    own_only = [a for a in own if a not in other]
    other_only = [a for a in other if a not in own]
    shared = [a for a in own if a in other]
    pool = own_only[:2] + other_only + own_only[2:] + shared
    seen = []
    for a in pool:
        if a not in seen:
            seen.append(a)
    # keep at least one anchor from each side; try the preferred order first
    # and fall back to the other orderings of the pool
    yield tuple(seen[:3])
    for a in range(len(seen)):
        for b in range(a + 1, len(seen)):
            for c in range(b + 1, len(seen)):
                yield seen[a], seen[b], seen[c]


def mixed_triple(dep: Deployment, group_id: int, neighbor_id: int) -> tuple[int, int, int] | None:
    """The cross-check triple for ``group_id`` looking at ``neighbor_id``.

    Prefers up to two anchors private to the group plus anchors private to
    the neighbour.  Returns None when no candidate is geometrically usable.
    """
    own = dep.group(group_id).member_ids
    other = dep.group(neighbor_id).member_ids
    for triple in _mixed_candidates(own, other):
        if len(triple) < 3:
            continue
        if set(triple) in (set(own), set(other)):
            continue
        if not (set(triple) & (set(own) - set(other))):
            continue
        pts = [dep.anchors[a].true_position for a in triple]
        try:
            canonical_frame(pts[0], pts[1], pts[2], D_MIN, J_MIN)
        except DegenerateGeometry:
            continue
        return triple
    return None


def build_references(dep: Deployment) -> ReferenceStore:
    records = []
    for g in dep.groups:
        records.append(ReferenceRecord(g.group_id, g.member_ids, g.trilateration_point, "M1"))
        tag = 2
        for h in dep.neighbor_map.get(g.group_id, ()):
            triple = mixed_triple(dep, g.group_id, h)
            if triple is None:
                log.info("group %d: no usable mixed triple with neighbour %d", g.group_id, h)
                continue
            point = centroid([dep.anchors[a].true_position for a in triple])
            records.append(ReferenceRecord(g.group_id, triple, point, f"M{tag}"))
            tag += 1
    return ReferenceStore(tuple(records))


def dumps(store: ReferenceStore) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in store.records:
        a, b, c = r.member_ids
        w.writerow([r.group_id, a, b, c, repr(r.reference_point.x), repr(r.reference_point.y),
                    r.store_tag])
    return buf.getvalue()


def loads(text: str) -> ReferenceStore:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or tuple(lines[0].split(",")) != HEADER:
        raise ParseError(1, f"expected header {','.join(HEADER)}")
    records = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(HEADER):
            raise ParseError(lineno, f"expected {len(HEADER)} fields, got {len(fields)}")
        try:
            gid, a, b, c = (int(f) for f in fields[:4])
            x, y = float(fields[4]), float(fields[5])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        tag = fields[6]
        if not (tag.startswith("M") and tag[1:].isdigit()):
            raise ParseError(lineno, f"bad store tag {tag!r}")
        if (gid, tag) in seen:
            raise ParseError(lineno, f"duplicate record for group {gid} tag {tag}")
        seen.add((gid, tag))
        records.append(ReferenceRecord(gid, (a, b, c), Point(x, y), tag))
    return ReferenceStore(tuple(records))


def save(store: ReferenceStore, path) -> None:
    Path(path).write_text(dumps(store), encoding="utf-8", newline="\n")


def load(path) -> ReferenceStore:
    return loads(Path(path).read_text(encoding="utf-8"))
