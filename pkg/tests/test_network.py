import math

import numpy as np
import pytest

from anchorwatch.errors import CountExceedsPopulation, UnknownAnchorId
from anchorwatch.geometry import canonical_frame, centroid
from anchorwatch.network import (AttackSpec, deploy, displace_anchor, inject_attack,
                                 neighbor_map_of, quarantine)


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.fixture(scope="module")
def dep117():
    return deploy((600, 600), 117, rng(42))


def test_full_size_deployment(dep117):
    assert len(dep117.anchors) == 117
    for a in dep117.anchors:
        assert 0 <= a.true_position.x <= 600 and 0 <= a.true_position.y <= 600
        assert a.reported_position == a.true_position
        assert not a.compromised and not a.quarantined
    assert [a.id for a in dep117.anchors] == list(range(117))


def test_every_anchor_grouped_and_groups_linked(dep117):
    grouped = {a for g in dep117.groups for a in g.member_ids}
    assert grouped == set(range(117))
    assert all(dep117.neighbor_map[g.group_id] for g in dep117.groups)


def test_groups_are_valid_triples(dep117):
    for g in dep117.groups:
        assert len(set(g.member_ids)) == 3
        pts = [dep117.anchors[a].true_position for a in g.member_ids]
        canonical_frame(*pts)
        assert g.trilateration_point == pytest.approx(centroid(pts))


def test_chain_places_anchor_on_previous_trilateration_point(dep117):
    # every group after the first contains the anchor dropped on its
    # predecessor's trilateration point, when one was dropped
    positions = {a.true_position: a.id for a in dep117.anchors}
    for prev, nxt in zip(dep117.groups, dep117.groups[1:]):
        dropped = positions.get(prev.trilateration_point)
        if dropped is not None:
            assert dropped in nxt.member_ids
        assert set(prev.member_ids) & set(nxt.member_ids)


def test_minimal_chain():
    dep = deploy((600, 600), 4, rng(1))
    assert len(dep.groups) == 1
    assert dep.anchors[3].true_position == dep.groups[0].trilateration_point
    assert dep.neighbor_map == {0: ()}


@pytest.mark.parametrize("n", [5, 6, 7, 8, 50])
def test_small_counts_group_everyone(n):
    dep = deploy((100, 200), n, rng(n))
    assert len(dep.anchors) == n
    assert {a for g in dep.groups for a in g.member_ids} == set(range(n))


def test_deploy_deterministic():
    assert deploy((600, 600), 117, rng(9)) == deploy((600, 600), 117, rng(9))
    assert deploy((600, 600), 117, rng(9)) != deploy((600, 600), 117, rng(10))


@pytest.mark.parametrize("bad", [dict(node_count=3), dict(area=(0, 10)), dict(area=(10, -1))])
def test_deploy_rejects_bad_input(bad):
    kwargs = dict(area=(600, 600), node_count=10)
    kwargs.update(bad)
    with pytest.raises(ValueError):
        deploy(kwargs["area"], kwargs["node_count"], rng())


def test_neighbor_map_shared_anchor():
    from anchorwatch.network import TrilaterationGroup
    from anchorwatch.geometry import Point
    groups = [TrilaterationGroup(0, (0, 1, 2), Point(0, 0)),
              TrilaterationGroup(1, (2, 3, 4), Point(0, 0)),
              TrilaterationGroup(2, (5, 6, 7), Point(0, 0))]
    assert neighbor_map_of(groups) == {0: (1,), 1: (0,), 2: ()}


def test_attack_none_is_identity(dep117):
    assert inject_attack(dep117, AttackSpec(0), rng()) == dep117


def test_attack_displacements(dep117):
    out = inject_attack(dep117, AttackSpec(20, 20, 100), rng(3))
    moved = [a for a in out.anchors if a.compromised]
    assert len(moved) == 20
    for a in moved:
        r = math.dist(a.reported_position, a.true_position)
        assert 20 <= r <= 100
    for a in out.anchors:
        if not a.compromised:
            assert a.reported_position == a.true_position
            assert a == dep117.anchors[a.id]
    assert [a.true_position for a in out.anchors] == [a.true_position for a in dep117.anchors]


def test_attack_sets_nested_for_one_stream(dep117):
    small = inject_attack(dep117, AttackSpec(5), rng(4)).compromised_ids
    large = inject_attack(dep117, AttackSpec(15), rng(4)).compromised_ids
    assert small < large


def test_attack_too_large(dep117):
    with pytest.raises(CountExceedsPopulation):
        inject_attack(dep117, AttackSpec(118), rng())


@pytest.mark.parametrize("kwargs", [dict(count=-1), dict(offset_min=-1.0),
                                    dict(offset_min=50.0, offset_max=10.0)])
def test_attack_spec_validation(kwargs):
    with pytest.raises(ValueError):
        AttackSpec(**kwargs)


def test_quarantine_empty(dep117):
    assert quarantine(dep117, set()) is dep117


def test_quarantine_shared_anchor_excludes_all_its_groups(dep117):
    counts = {}
    for g in dep117.groups:
        for a in g.member_ids:
            counts[a] = counts.get(a, 0) + 1
    shared = next(a for a, c in sorted(counts.items()) if c == 2)
    containing = {g.group_id for g in dep117.groups if shared in g.member_ids}
    # the two groups are neighbours of each other
    g1, g2 = sorted(containing)
    assert g2 in dep117.neighbor_map[g1]
    out = quarantine(dep117, {shared})
    assert out.anchors[shared].quarantined
    active = {g.group_id for g in out.active_groups()}
    assert active == {g.group_id for g in dep117.groups} - containing


def test_quarantine_unknown(dep117):
    with pytest.raises(UnknownAnchorId):
        quarantine(dep117, {999})


def test_displace_anchor(dep117):
    out = displace_anchor(dep117, 5, (3.0, 4.0))
    a = out.anchors[5]
    assert a.compromised
    assert math.dist(a.reported_position, a.true_position) == pytest.approx(5.0)


def test_dump_format(dep117, tmp_path):
    out = inject_attack(dep117, AttackSpec(3), rng(5))
    path = tmp_path / "dep.txt"
    out.dump(path)
    lines = path.read_bytes().decode().split("\n")
    assert lines[0] == "id,true_x,true_y,reported_x,reported_y,compromised,quarantined"
    assert lines[-1] == ""
    rows = [l.split(",") for l in lines[1:-1]]
    assert len(rows) == 117
    for row, a in zip(rows, out.anchors):
        assert int(row[0]) == a.id
        assert (float(row[1]), float(row[2])) == a.true_position
        assert (float(row[3]), float(row[4])) == a.reported_position
        assert row[5] == str(int(a.compromised))
