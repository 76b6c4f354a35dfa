"""Monte Carlo experiment runner.

A trial deploys a network, stores its references, compromises anchors, runs
one detector, quarantines whatever it flagged and measures the remaining
localization error.  Every random draw comes from streams derived from
``(master_seed, trial_index)``, so a trial is reproducible on its own and
trials can run in any order.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from . import detect
from .detect import DetectionReport, GroupStatistics
from .geometry import distance
from .network import AttackSpec, Deployment, deploy, inject_attack, quarantine
from .radio import NoiseModel
from .registry import ReferenceStore, build_references

log = logging.getLogger(__name__)

DETECTORS = ("none", "consistency", "mle", "mahalanobis")
CSV_HEADER = ("detector", "num_malicious", "trials", "mean_error_m", "std_error_m", "mean_tp",
              "mean_fp", "mean_fn", "mean_elapsed_ms", "mean_trilaterations")


@dataclass(frozen=True)
class SimulationConfig:
    area_width: float = 600.0
    area_height: float = 600.0
    node_count: int = 117
    trials: int = 50
    master_seed: int = 1
    noise: NoiseModel = field(default_factory=NoiseModel)
    attack: AttackSpec = field(default_factory=AttackSpec)
    detector: str = "all"
    eps: float = detect.EPS
    threshold: float = detect.MAHALANOBIS_THRESHOLD
    jitter_samples: int = detect.JITTER_SAMPLES
    out: str | None = None
    refs: str | None = None
    dump_deployment: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.node_count < 4:
            raise ValueError("node_count must be >= 4")
        if not (self.area_width > 0 and self.area_height > 0):
            raise ValueError("area must be positive")
        if self.detector not in DETECTORS + ("all",):
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.attack.count > self.node_count:
            raise ValueError("attack count exceeds node_count")
        if not self.eps >= 0:
            raise ValueError("eps must be >= 0")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.jitter_samples < 3:
            raise ValueError("jitter_samples must be >= 3")

    @property
    def detectors(self) -> tuple[str, ...]:
        return DETECTORS if self.detector == "all" else (self.detector,)


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    mean_localization_error: float
    flagged: frozenset[int]
    true_positives: int
    false_positives: int
    false_negatives: int
    elapsed: float
    trilateration_count: int


@dataclass(frozen=True)
class AggregateRow:
    detector: str
    num_malicious: int
    trials: int
    mean_error_m: float
    std_error_m: float
    mean_tp: float
    mean_fp: float
    mean_fn: float
    mean_elapsed_ms: float
    mean_trilaterations: float


@dataclass
class AggregateResult:
    rows: list[AggregateRow] = field(default_factory=list)
    trials: dict[tuple[str, int], list[TrialResult]] = field(default_factory=dict)

    def row(self, detector: str, num_malicious: int) -> AggregateRow:
        for r in self.rows:
            if r.detector == detector and r.num_malicious == num_malicious:
                return r
        raise KeyError((detector, num_malicious))


def trial_streams(master_seed: int, trial_index: int) -> list[np.random.Generator]:
    """Independent generators for deployment, fitting, attack and detection."""
    seq = np.random.SeedSequence([master_seed, trial_index])
    return [np.random.default_rng(s) for s in seq.spawn(4)]


@dataclass(frozen=True)
class _Setup:
    deployment: Deployment
    store: ReferenceStore
    stats: tuple[GroupStatistics, ...]


@lru_cache(maxsize=256)
def _setup(area: tuple[float, float], node_count: int, master_seed: int, trial_index: int,
           noise: NoiseModel, jitter_samples: int) -> _Setup:
    # attack-independent, so it is shared by every detector and attack size
    deploy_rng, fit_rng, _, _ = trial_streams(master_seed, trial_index)
    dep = deploy(area, node_count, deploy_rng)
    store = build_references(dep)
    stats = tuple(detect.fit_group_statistics(store, dep, noise, jitter_samples, fit_rng))
    return _Setup(dep, store, stats)


def prepare_trial(cfg: SimulationConfig, trial_index: int) -> tuple[Deployment, ReferenceStore,
                                                                     tuple[GroupStatistics, ...]]:
    """Deployment, reference store and fitted statistics for one trial, pre-attack."""
    s = _setup((cfg.area_width, cfg.area_height), cfg.node_count, cfg.master_seed, trial_index,
               cfg.noise, cfg.jitter_samples)
    return s.deployment, s.store, s.stats


def attacked_deployment(cfg: SimulationConfig, trial_index: int) -> Deployment:
    dep, _, _ = prepare_trial(cfg, trial_index)
    attack_rng = trial_streams(cfg.master_seed, trial_index)[2]
    return inject_attack(dep, cfg.attack, attack_rng)


def run_detector(name: str, dep: Deployment, store: ReferenceStore,
                 stats: Sequence[GroupStatistics], cfg: SimulationConfig,
                 rng: np.random.Generator) -> DetectionReport:
    if name == "consistency":
        return detect.consistency_detect(dep, store, cfg.noise, cfg.eps, rng)
    if name == "mle":
        return detect.mle_detect(dep, store, stats, cfg.noise, rng, eps=cfg.eps)
    if name == "mahalanobis":
        return detect.mahalanobis_detect(dep, store, cfg.noise, cfg.threshold, rng, stats=stats,
                                         eps=cfg.eps)
    raise ValueError(f"unknown detector {name!r}")


def localization_error(dep: Deployment, store: ReferenceStore, noise: NoiseModel,
                       rng: np.random.Generator) -> tuple[float, int]:
    """Mean distance between re-localized and stored points of the active groups.

    Returns ``(error, trilaterations)``; the error is NaN if every group has
    been quarantined.
    """
    loc = detect._Locator(dep, noise, rng)
    errors = []
    for g in dep.active_groups():
        rec = store.m1(g.group_id)
        fx = loc.fix(rec.member_ids, rec.reference_point)
        if fx is not None:
            errors.append(distance(fx.estimate, rec.reference_point))
    return (math.fsum(errors) / len(errors) if errors else math.nan), loc.count


def run_trial(cfg: SimulationConfig, trial_index: int) -> TrialResult:
    if cfg.detector == "all":
        raise ValueError("run_trial needs a single detector, not 'all'")
    try:
        dep, store, stats = prepare_trial(cfg, trial_index)
        start = time.perf_counter()
        _, _, attack_rng, detect_rng = trial_streams(cfg.master_seed, trial_index)
        attacked = inject_attack(dep, cfg.attack, attack_rng)
        count = 0
        if cfg.detector == "none":
            flagged: frozenset[int] = frozenset()
            evaluated = attacked
        else:
            report = run_detector(cfg.detector, attacked, store, stats, cfg, detect_rng)
            flagged = report.flagged
            count += report.trilaterations
            evaluated = quarantine(attacked, flagged)
        error, n = localization_error(evaluated, store, cfg.noise, detect_rng)
        count += n
        elapsed = (time.perf_counter() - start) * 1000.0
    except Exception as exc:
        raise RuntimeError(f"trial {trial_index} failed: {exc}") from exc
    truth = attacked.compromised_ids
    return TrialResult(
        trial_index=trial_index,
        mean_localization_error=error,
        flagged=flagged,
        true_positives=len(flagged & truth),
        false_positives=len(flagged - truth),
        false_negatives=len(truth - flagged),
        elapsed=elapsed,
        trilateration_count=count,
    )


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def aggregate(detector: str, num_malicious: int, results: Sequence[TrialResult]) -> AggregateRow:
    results = sorted(results, key=lambda r: r.trial_index)
    mean_err, std_err = _mean_std([r.mean_localization_error for r in results])

    def mean(attr):
        return _mean_std([float(getattr(r, attr)) for r in results])[0]

    return AggregateRow(detector, num_malicious, len(results), mean_err, std_err,
                        mean("true_positives"), mean("false_positives"), mean("false_negatives"),
                        mean("elapsed"), mean("trilateration_count"))


def run_experiment(cfg: SimulationConfig, malicious_counts: Sequence[int]) -> AggregateResult:
    if any(c < 0 for c in malicious_counts):
        raise ValueError("malicious counts must be >= 0")
    result = AggregateResult()
    for name in cfg.detectors:
        for count in malicious_counts:
            sub = replace(cfg, detector=name, attack=replace(cfg.attack, count=count))
            trials = [run_trial(sub, i) for i in range(cfg.trials)]
            log.info("%s count=%d done", name, count)
            result.trials[(name, count)] = trials
            result.rows.append(aggregate(name, count, trials))
    return result


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_csv(agg: AggregateResult, path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in agg.rows:
            w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])


def read_csv(path) -> list[dict[str, str]]:
    with open(Path(path), encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
