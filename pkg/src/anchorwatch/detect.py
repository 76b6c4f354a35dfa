"""Detection of cheating anchors.

Three detectors share one pipeline: decide which trilateration groups look
wrong, then work out which member of each such group is lying.

* ``consistency`` re-localizes every stored reference point of a group from
  the members' reported positions and compares against the stored value
  with a fixed tolerance.
* ``mle`` scores the re-localized trilateration point with a Gaussian class
  model per group.  The group is suspect if the point classifies into
  another group or its own discriminant falls below a chi-square floor.
* ``mahalanobis`` scores the same point by its Mahalanobis distance to the
  stored trilateration point under the group's fitted covariance.

``cross_check`` then isolates individual anchors.  Each candidate anchor is
re-localized from triples of anchors that passed their own checks, and the
result is compared with the position the anchor claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (DegenerateGeometry, EmptyStatistics, InsufficientNeighbors,
                     SingularCovariance, TooFewSamples)
from .geometry import (Point, canonical_frame, distance, range_jacobian, solve_canonical)
from .network import Deployment
from .radio import NoiseModel, measure_range, measure_ranges, range_sigma, true_distance
from .registry import ReferenceRecord, ReferenceStore

CONFIDENCE = 0.99
CHI2_2_99 = -2.0 * math.log(1.0 - CONFIDENCE)
MAHALANOBIS_THRESHOLD = math.sqrt(CHI2_2_99)
EPS = 1.0
REGULARIZATION = 1e-6
MIN_DET = 1e-18
JITTER_SAMPLES = 100

# anchor isolation: how many trusted triples to try, how many to keep,
# and how many predicted standard deviations count as a mismatch
CANDIDATE_SOURCES = 8
MAX_SOURCES = 3
TOLERANCE_SIGMAS = 4.0

Matrix2 = tuple[tuple[float, float], tuple[float, float]]


def chi2_2_quantile(p: float) -> float:
    """Quantile of the chi-square distribution with two degrees of freedom."""
    return -2.0 * math.log1p(-p)


# -- small linear algebra ------------------------------------------------------

def sample_covariance(points) -> np.ndarray:
    """Mean-centred sample covariance with divisor n - 1."""
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    n = X.shape[0]
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (n - 1)
    # enforce exact symmetry
    off = 0.5 * (C[0, 1] + C[1, 0])
    C[0, 1] = C[1, 0] = off
    return C


def _inv2(a: float, b: float, c: float, d: float, min_det: float = MIN_DET):
    det = a * d - b * c
    if not det > min_det:
        raise SingularCovariance(f"determinant {det:.3g} <= {min_det:g}")
    return (d / det, -b / det, -c / det, a / det), det


def invert_2x2(C, min_det: float = MIN_DET) -> np.ndarray:
    """Closed-form inverse.

    For a covariance [[s1^2, r s1 s2], [r s1 s2, s2^2]] the determinant is
    s1^2 s2^2 (1 - r^2), so perfectly correlated coordinates are singular.
    """
    (a, b), (c, d) = C[0], C[1]
    inv, _ = _inv2(float(a), float(b), float(c), float(d), min_det)
    return np.array([[inv[0], inv[1]], [inv[2], inv[3]]])


def _quad(inv, dx: float, dy: float) -> float:
    i00, i01, i10, i11 = inv
    return dx * (i00 * dx + i01 * dy) + dy * (i10 * dx + i11 * dy)


def mahalanobis_distance(x, c, C) -> float:
    (a, b), (cc, d) = C[0], C[1]
    inv, _ = _inv2(float(a), float(b), float(cc), float(d))
    q = _quad(inv, x[0] - c[0], x[1] - c[1])
    return math.sqrt(max(q, 0.0))


# -- Gaussian class model ------------------------------------------------------

@dataclass(frozen=True)
class GroupStatistics:
    group_id: int
    mean: Point
    covariance: Matrix2
    prior: float
    sample_count: int

    @cached_property
    def _inverse(self):
        (a, b), (c, d) = self.covariance
        return _inv2(a, b, c, d)

    @property
    def inverse(self) -> np.ndarray:
        i00, i01, i10, i11 = self._inverse[0]
        return np.array([[i00, i01], [i10, i11]])

    @property
    def determinant(self) -> float:
        return self._inverse[1]

    def quadratic_form(self, z) -> float:
        return _quad(self._inverse[0], z[0] - self.mean[0], z[1] - self.mean[1])


def gaussian_density(z, g: GroupStatistics) -> float:
    return math.exp(-0.5 * g.quadratic_form(z)) / (2.0 * math.pi * math.sqrt(g.determinant))


def discriminant(z, g: GroupStatistics) -> float:
    """Log-likelihood score with constants and the prior dropped, scaled by 2."""
    return -math.log(g.determinant) - g.quadratic_form(z)


def classify(z, stats: Sequence[GroupStatistics]) -> int:
    """Most probable group for location ``z``; ties go to the lowest id.

    Uses ``discriminant + 2 ln prior``, which orders groups exactly like
    ``p(z | group) * p(group)``.  With uniform priors the prior term is a
    shared constant and the ranking is the plain discriminant's.
    """
    if not stats:
        raise EmptyStatistics("no group statistics to classify against")
    best_id, best = None, -math.inf
    for g in sorted(stats, key=lambda s: s.group_id):
        score = discriminant(z, g) + (2.0 * math.log(g.prior) if g.prior > 0 else -math.inf)
        if best_id is None or score > best:
            best_id, best = g.group_id, score
    return best_id


def _localize_batch(true_members: Sequence[Point], target: Point, noise: NoiseModel,
                    n: int, rng: np.random.Generator) -> np.ndarray:
    frame = canonical_frame(*true_members)
    d = np.array([true_distance(p, target) for p in true_members])
    r = measure_ranges(d, noise, rng, size=(n, 3))
    a1, a2, _ = solve_canonical(frame, (r[:, 0], r[:, 1], r[:, 2]))
    xs, ys = frame.to_world(a1, a2)
    return np.column_stack([xs, ys])


def fit_group_statistics(store: ReferenceStore, dep: Deployment, noise: NoiseModel,
                         jitter_samples: int, rng: np.random.Generator,
                         regularization: float = REGULARIZATION) -> list[GroupStatistics]:
    """Training-time class models, one per group.

    The group's trilateration point is re-localized ``jitter_samples`` times
    from its members' true positions under ``noise``.  The spread of those
    estimates, plus ``regularization * I``, is the group covariance.  The mean
    is the stored reference itself.
    """
    if jitter_samples < 3:
        raise ValueError("jitter_samples must be >= 3")
    primaries = [r for r in store if r.is_primary]
    prior = 1.0 / len(primaries) if primaries else 0.0
    out = []
    for rec in primaries:
        members = [dep.anchors[a].true_position for a in rec.member_ids]
        samples = _localize_batch(members, rec.reference_point, noise, jitter_samples, rng)
        C = sample_covariance(samples)
        cov = ((float(C[0, 0]) + regularization, float(C[0, 1])),
               (float(C[1, 0]), float(C[1, 1]) + regularization))
        out.append(GroupStatistics(rec.group_id, rec.reference_point, cov, prior, jitter_samples))
    return out


# -- re-localization helpers ---------------------------------------------------

@dataclass
class DetectionReport:
    detector: str
    flagged: frozenset[int] = frozenset()
    scores: dict[int, float] = field(default_factory=dict)
    threshold_used: float = math.nan
    suspect_groups: frozenset[int] = frozenset()
    group_scores: dict[int, float] = field(default_factory=dict)
    new_locations: dict[int, Point] = field(default_factory=dict)
    relocation_errors: dict[int, float] = field(default_factory=dict)
    notes: list[InsufficientNeighbors] = field(default_factory=list)
    trilaterations: int = 0


@dataclass
class _Fix:
    estimate: Point
    ranges: tuple[float, float, float]
    frame: object


class _Locator:
    """Measures ranges from true positions and solves with reported ones."""

    def __init__(self, dep: Deployment, noise: NoiseModel, rng: np.random.Generator):
        self.dep = dep
        self.noise = noise
        self.rng = rng
        self.count = 0

    def fix(self, triple: Iterable[int], target: Point) -> _Fix | None:
        anchors = [self.dep.anchors[a] for a in triple]
        ranges = tuple(measure_range(true_distance(a.true_position, target), self.noise, self.rng)
                       for a in anchors)
        self.count += 1
        try:
            frame = canonical_frame(*(a.reported_position for a in anchors))
        except DegenerateGeometry:
            return None
        a1, a2, _ = solve_canonical(frame, ranges)
        x, y = frame.to_world(a1, a2)
        if not (math.isfinite(x) and math.isfinite(y)):
            return None
        return _Fix(Point(x, y), ranges, frame)

    def covariance(self, fx: _Fix) -> Matrix2:
        """First-order covariance of ``fx.estimate`` under the noise model."""
        jx, jy = range_jacobian(fx.frame, fx.ranges)
        var = [range_sigma(L, self.noise) ** 2 for L in fx.ranges]
        sxx = sum(v * a * a for v, a in zip(var, jx))
        syy = sum(v * b * b for v, b in zip(var, jy))
        sxy = sum(v * a * b for v, a, b in zip(var, jx, jy))
        return (sxx, sxy), (sxy, syy)

    def spread(self, fx: _Fix) -> float:
        (sxx, _), (_, syy) = self.covariance(fx)
        return math.sqrt(sxx + syy)

    def tolerance(self, fx: _Fix, eps: float) -> float:
        return max(eps, TOLERANCE_SIGMAS * self.spread(fx))

    def record_members_active(self, rec: ReferenceRecord) -> bool:
        return not any(self.dep.anchors[a].quarantined for a in rec.member_ids)


def _cross_record_outlier(loc: _Locator, rec: ReferenceRecord, alpha: float) -> bool:
    """Chi-square test of a cross record against its predicted covariance."""
    fx = loc.fix(rec.member_ids, rec.reference_point)
    if fx is None:
        return True
    (sxx, sxy), (_, syy) = loc.covariance(fx)
    inv, _ = _inv2(sxx + REGULARIZATION, sxy, sxy, syy + REGULARIZATION)
    q = _quad(inv, fx.estimate.x - rec.reference_point.x, fx.estimate.y - rec.reference_point.y)
    return q > -2.0 * math.log(alpha)


def _cross_records_outlying(loc: _Locator, store: ReferenceStore, group_id: int,
                            alpha: float) -> bool:
    # the group's cross records share a Bonferroni budget of alpha
    recs = [r for r in store.cross_records(group_id) if loc.record_members_active(r)]
    return any(_cross_record_outlier(loc, r, alpha / len(recs)) for r in recs)


# -- trilateration consistency -------------------------------------------------

def _scan_consistency(loc: _Locator, store: ReferenceStore, eps: float, cross_records: bool):
    suspects, group_scores = set(), {}
    for g in loc.dep.active_groups():
        gid = g.group_id
        records = store.for_group(gid) if cross_records else [store.m1(gid)]
        for rec in records:
            if not loc.record_members_active(rec):
                continue
            fx = loc.fix(rec.member_ids, rec.reference_point)
            err = math.inf if fx is None else distance(fx.estimate, rec.reference_point)
            if rec.is_primary:
                group_scores[gid] = err
            if err > eps:
                suspects.add(gid)
                break
    return suspects, group_scores


def group_consistency(dep: Deployment, store: ReferenceStore, noise: NoiseModel, eps: float,
                      rng: np.random.Generator, cross_records: bool = False) -> set[int]:
    """Groups whose trilateration point no longer re-localizes within ``eps``.

    With ``cross_records`` the group's ``M2``, ``M3``, ... points are checked
    too, after ``M1``.  A displacement that keeps an anchor at the same range
    from one reference point is invisible there but not from the others.
    """
    suspects, _ = _scan_consistency(_Locator(dep, noise, rng), store, eps, cross_records)
    return suspects


def _isolate(loc: _Locator, store: ReferenceStore, suspect_groups: set[int], eps: float,
             report: DetectionReport) -> None:
    dep = loc.dep
    active = {g.group_id for g in dep.active_groups()}
    trusted: dict[frozenset, tuple[int, int, int]] = {}
    for gid in sorted(active - suspect_groups):
        triple = dep.group(gid).member_ids
        trusted.setdefault(frozenset(triple), triple)
    for gid in sorted(suspect_groups & active):
        for rec in store.cross_records(gid):
            if not loc.record_members_active(rec) or frozenset(rec.member_ids) in trusted:
                continue
            fx = loc.fix(rec.member_ids, rec.reference_point)
            if fx is not None and distance(fx.estimate, rec.reference_point) <= loc.tolerance(fx, eps):
                trusted[frozenset(rec.member_ids)] = rec.member_ids
    sources = list(trusted.values())
    centres = [Point(sum(dep.anchors[a].reported_position.x for a in t) / 3.0,
                     sum(dep.anchors[a].reported_position.y for a in t) / 3.0) for t in sources]

    home: dict[int, int] = {}
    for gid in sorted(suspect_groups & active):
        for a in dep.group(gid).member_ids:
            home.setdefault(a, gid)

    flagged, scores, new_locations = set(), {}, {}
    for a in sorted(home):
        anchor = dep.anchors[a]
        claimed = anchor.reported_position
        pool = [(distance(c, claimed), k) for k, (t, c) in enumerate(zip(sources, centres))
                if a not in t]
        if not pool:
            report.notes.append(InsufficientNeighbors(a, home[a]))
            continue
        pool.sort()
        fixes = []
        for _, k in pool[:CANDIDATE_SOURCES]:
            fx = loc.fix(sources[k], anchor.true_position)
            if fx is not None:
                fixes.append((loc.spread(fx), k, fx))
        if not fixes:
            report.notes.append(InsufficientNeighbors(a, home[a]))
            continue
        fixes.sort(key=lambda f: (f[0], f[1]))
        best = fixes[:MAX_SOURCES]
        misses = [distance(fx.estimate, claimed) - max(eps, TOLERANCE_SIGMAS * s)
                  for s, _, fx in best]
        scores[a] = min(distance(fx.estimate, claimed) for _, _, fx in best)
        if all(m > 0 for m in misses):
            flagged.add(a)
            new_locations[a] = best[0][2].estimate
    report.flagged = frozenset(flagged)
    report.new_locations = new_locations
    report.relocation_errors = scores


def cross_check(dep: Deployment, store: ReferenceStore, suspect_groups: Iterable[int],
                noise: NoiseModel, eps: float, rng: np.random.Generator) -> DetectionReport:
    """Resolve suspect groups to individual cheating anchors.

    Trusted triples are the members of every active group outside
    ``suspect_groups`` plus any cross record of a suspect group that still
    re-localizes.  Each member of a suspect group is located from the
    trusted triples that exclude it, using the few with the best predicted
    precision.  The anchor is flagged when every one of those fixes
    disagrees with its claimed position by more than the tolerance.  The
    tolerance is ``eps`` or four predicted standard deviations, whichever is
    larger.  A flagged anchor's re-derived position is kept in
    ``new_locations``.
    """
    suspect = set(suspect_groups)
    report = DetectionReport("consistency", threshold_used=eps, suspect_groups=frozenset(suspect))
    if not suspect:
        return report
    loc = _Locator(dep, noise, rng)
    _isolate(loc, store, suspect, eps, report)
    report.scores = dict(report.relocation_errors)
    report.trilaterations = loc.count
    return report


# -- full detectors ------------------------------------------------------------

def _member_scores(dep: Deployment, group_scores: dict[int, float], worst) -> dict[int, float]:
    out: dict[int, float] = {}
    for gid, s in group_scores.items():
        for a in dep.group(gid).member_ids:
            out[a] = worst(out[a], s) if a in out else s
    return out


def consistency_detect(dep: Deployment, store: ReferenceStore, noise: NoiseModel, eps: float,
                       rng: np.random.Generator) -> DetectionReport:
    loc = _Locator(dep, noise, rng)
    suspects, group_scores = _scan_consistency(loc, store, eps, cross_records=True)
    report = DetectionReport("consistency", threshold_used=eps, suspect_groups=frozenset(suspects),
                             group_scores=group_scores,
                             scores=_member_scores(dep, group_scores, max))
    if suspects:
        _isolate(loc, store, suspects, eps, report)
    report.trilaterations = loc.count
    return report


def mle_detect(dep: Deployment, store: ReferenceStore, stats: Sequence[GroupStatistics],
               noise: NoiseModel, rng: np.random.Generator, eps: float = EPS,
               confidence: float = CONFIDENCE) -> DetectionReport:
    """Gaussian maximum-likelihood screening followed by ``cross_check``.

    A group is suspect when its re-localized point classifies elsewhere, or
    when its own discriminant drops below ``-ln|C| - chi2_2(confidence)``.
    That floor rejects the same Gaussian tail as the Mahalanobis detector.
    """
    chi2 = chi2_2_quantile(confidence)
    by_id = {s.group_id: s for s in stats}
    loc = _Locator(dep, noise, rng)
    suspects, group_scores = set(), {}
    for g in dep.active_groups():
        gid = g.group_id
        rec = store.m1(gid)
        fx = loc.fix(rec.member_ids, rec.reference_point)
        if fx is None:
            suspects.add(gid)
            group_scores[gid] = -math.inf
            continue
        own = by_id[gid]
        delta = discriminant(fx.estimate, own)
        group_scores[gid] = delta
        floor = -math.log(own.determinant) - chi2
        if delta < floor or classify(fx.estimate, stats) != gid:
            suspects.add(gid)
        elif _cross_records_outlying(loc, store, gid, 1.0 - confidence):
            suspects.add(gid)
    report = DetectionReport("mle", threshold_used=chi2, suspect_groups=frozenset(suspects),
                             group_scores=group_scores,
                             scores=_member_scores(dep, group_scores, min))
    if suspects:
        _isolate(loc, store, suspects, eps, report)
    report.trilaterations = loc.count
    return report


def mahalanobis_detect(dep: Deployment, store: ReferenceStore, noise: NoiseModel,
                       threshold: float, rng: np.random.Generator,
                       stats: Sequence[GroupStatistics] | None = None,
                       jitter_samples: int = JITTER_SAMPLES, eps: float = EPS) -> DetectionReport:
    """Mahalanobis outlier screening followed by ``cross_check``.

    The distance is taken from each group's re-localized trilateration point
    to the stored one, under the group's fitted covariance.  Covariances are
    fitted from ``rng`` when ``stats`` is not supplied.
    """
    if stats is None:
        stats = fit_group_statistics(store, dep, noise, jitter_samples, rng)
    by_id = {s.group_id: s for s in stats}
    alpha = math.exp(-0.5 * threshold * threshold)
    loc = _Locator(dep, noise, rng)
    suspects, group_scores = set(), {}
    for g in dep.active_groups():
        gid = g.group_id
        rec = store.m1(gid)
        fx = loc.fix(rec.member_ids, rec.reference_point)
        if fx is None:
            suspects.add(gid)
            group_scores[gid] = math.inf
            continue
        d = mahalanobis_distance(fx.estimate, rec.reference_point, by_id[gid].covariance)
        group_scores[gid] = d
        if d > threshold or _cross_records_outlying(loc, store, gid, alpha):
            suspects.add(gid)
    report = DetectionReport("mahalanobis", threshold_used=threshold,
                             suspect_groups=frozenset(suspects), group_scores=group_scores,
                             scores=_member_scores(dep, group_scores, max))
    if suspects:
        _isolate(loc, store, suspects, eps, report)
    report.trilaterations = loc.count
    return report
