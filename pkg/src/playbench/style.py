"""Behavior style distance: n-gram action distributions + lambda-weighted aggregate.

Two behaviors (episode sets) are compared by the distance between their
empirical distributions of consecutive quantized action (n+1)-tuples, for
n = 0..N, aggregated as

    D(V, W) = lam/(1-lam) * sum_{n=0}^{N} lam^n d(v_n, w_n)
            + lam^{N+1}/(1-lam) * d(v_N, w_N)

with d either base-2 Jensen-Shannon divergence or Hellinger distance, both
in [0, 1]. The aggregate as written is NOT bounded by 1 (all d = 1 at
lam = 0.5, N = 1 gives 2.0), so the report carries both the verbatim value
and a normalized one divided by the all-ones aggregate; normalization
preserves the ordering of comparisons at fixed (lam, N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .core import Episode
from .quantize import QuantizationScheme

REPORT_FORMAT = "playbench/style-report"
REPORT_VERSION = 1

METRICS = ("jsd", "hellinger")


@dataclass(frozen=True)
class NgramDistribution:
    """Empirical probabilities of quantized action (n+1)-grams at one level."""

    order: int
    level: int
    weights: Mapping[Hashable, float]

    def __post_init__(self):
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("negative probability")


def ngram_distribution(
    episodes: Sequence[Episode],
    n: int,
    scheme: QuantizationScheme,
    j: int,
    include_state: bool = False,
) -> NgramDistribution:
    """Frequencies of consecutive (n+1)-tuples, never spanning episodes.

    Grams are over quantized actions; ``include_state`` switches to
    (state, action) pairs per gram element.
    """
    if n < 0:
        raise ValueError(f"gram order must be >= 0, got {n}")
    counts: dict[Hashable, int] = {}
    total = 0
    for episode in episodes:
        steps = episode.steps
        if include_state:
            elems = [
                (scheme.state_key(s.state, j), scheme.action_key(s.action, j)) for s in steps
            ]
        else:
            elems = [scheme.action_key(s.action, j) for s in steps]
        for i in range(len(elems) - n):
            gram = tuple(elems[i : i + n + 1])
            counts[gram] = counts.get(gram, 0) + 1
            total += 1
    if total == 0:
        raise ValueError(
            f"not enough steps for order-{n} grams "
            f"({sum(len(e) for e in episodes)} steps total)"
        )
    weights = {gram: c / total for gram, c in counts.items()}
    return NgramDistribution(order=n, level=j, weights=weights)


def _aligned(p: Mapping, q: Mapping) -> tuple[np.ndarray, np.ndarray]:
    """Probability vectors over the key union, zero-padded for absent grams."""
    keys = list(p.keys())
    keys.extend(k for k in q.keys() if k not in p)
    pv = np.array([p.get(k, 0.0) for k in keys], dtype=np.float64)
    qv = np.array([q.get(k, 0.0) for k in keys], dtype=np.float64)
    return pv, qv


def _weights_of(dist) -> Mapping:
    return dist.weights if isinstance(dist, NgramDistribution) else dist


def jsd(p, q) -> float:
    """Base-2 Jensen-Shannon divergence; 0 iff p == q, 1 on disjoint support."""
    pv, qv = _aligned(_weights_of(p), _weights_of(q))
    m = 0.5 * (pv + qv)
    # 0*log(0) = 0 by convention; m == 0 only where both are 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(pv > 0, pv * np.log2(np.where(pv > 0, pv / m, 1.0)), 0.0)
        lq = np.where(qv > 0, qv * np.log2(np.where(qv > 0, qv / m, 1.0)), 0.0)
    value = 0.5 * float(lp.sum()) + 0.5 * float(lq.sum())
    return min(max(value, 0.0), 1.0)


def hellinger(p, q) -> float:
    """(1/sqrt(2)) * l2 distance between sqrt-probability vectors."""
    pv, qv = _aligned(_weights_of(p), _weights_of(q))
    value = math.sqrt(0.5 * float(((np.sqrt(pv) - np.sqrt(qv)) ** 2).sum()))
    return min(max(value, 0.0), 1.0)


_METRIC_FNS = {"jsd": jsd, "hellinger": hellinger}


def weighted_aggregate(per_n: Sequence[float], lam: float) -> float:
    """The verbatim aggregate over d_0..d_N at weight lam."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    if not per_n:
        raise ValueError("need at least the order-0 distance")
    head = sum(lam**n * d for n, d in enumerate(per_n))
    tail = lam ** len(per_n) * per_n[-1]
    return lam / (1.0 - lam) * head + tail / (1.0 - lam)


@dataclass(frozen=True)
class StyleDistanceReport:
    lam: float
    order: int  # N, the maximum gram order
    metric: str
    level: int
    per_n: tuple[float, ...]
    verbatim: float
    normalized: float

    def to_doc(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "lambda": self.lam,
            "order": self.order,
            "metric": self.metric,
            "level": self.level,
            "per_n": list(self.per_n),
            "verbatim": self.verbatim,
            "normalized": self.normalized,
        }

    @staticmethod
    def from_doc(doc: Mapping) -> "StyleDistanceReport":
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError(f"not a style report: {doc.get('format')!r}")
        if doc.get("version") != REPORT_VERSION:
            raise ValueError(
                f"report version mismatch: file has {doc.get('version')}, "
                f"reader supports {REPORT_VERSION}"
            )
        return StyleDistanceReport(
            lam=float(doc["lambda"]),
            order=int(doc["order"]),
            metric=str(doc["metric"]),
            level=int(doc["level"]),
            per_n=tuple(float(d) for d in doc["per_n"]),
            verbatim=float(doc["verbatim"]),
            normalized=float(doc["normalized"]),
        )

    def render(self) -> str:
        lines = [
            f"style distance  metric={self.metric}  lambda={self.lam}  "
            f"N={self.order}  level={self.level}",
            "  n    d(v_n, w_n)",
        ]
        for n, d in enumerate(self.per_n):
            lines.append(f"  {n:<4d} {d:.6f}")
        lines.append(f"  D (verbatim)   = {self.verbatim:.6f}")
        lines.append(f"  D (normalized) = {self.normalized:.6f}")
        return "\n".join(lines)


def style_distance(
    behavior_v: Sequence[Episode],
    behavior_w: Sequence[Episode],
    lam: float,
    order: int,
    metric: str,
    scheme: QuantizationScheme,
    level: int,
    include_state: bool = False,
) -> StyleDistanceReport:
    """Per-order distances d(v_n, w_n) for n = 0..order plus the aggregate."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    if metric not in _METRIC_FNS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    fn = _METRIC_FNS[metric]
    per_n = []
    for n in range(order + 1):
        v_n = ngram_distribution(behavior_v, n, scheme, level, include_state=include_state)
        w_n = ngram_distribution(behavior_w, n, scheme, level, include_state=include_state)
        per_n.append(fn(v_n, w_n))
    verbatim = weighted_aggregate(per_n, lam)
    ceiling = weighted_aggregate([1.0] * len(per_n), lam)
    return StyleDistanceReport(
        lam=lam,
        order=order,
        metric=metric,
        level=level,
        per_n=tuple(per_n),
        verbatim=verbatim,
        normalized=verbatim / ceiling,
    )
