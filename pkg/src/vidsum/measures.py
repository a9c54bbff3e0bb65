"""Summary quality measures and the temporal-F1 evaluation protocol.

Five measures score a summary against its annotation: modular importance
(IMP), mega-event continuity (MC), clustered diversity over time (DT) and
over concepts (DC), and minimum pairwise dissimilarity (DSi). Raw values are
normalized into percentages where 100 means "as good as greedily optimizing
this measure alone at the same budget". Temporal F1 compares two summaries
by time overlap; AF1/MF1 aggregate F1 over a reference set.

Everything here is a pure function over immutable inputs. Per-annotation
precomputations (ratings, cluster labels, the pairwise dissimilarity matrix)
live in a read-only :class:`VideoIndex` cached per annotation.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .annotation import (
    Annotation,
    Summary,
    duration_of,
    mega_event_rating,
    snippet_rating,
)
from .optimize import ObjectiveHandle, lazy_greedy

# Canonical measure order, used by reports, tables and dominance checks.
MEASURES = ("IMP", "MC", "DT", "DC", "DSi")

# Default adjacent-snippet keyword IoU above which time clusters merge.
TIME_CLUSTER_IOU = 0.5


def keyword_iou(p: frozenset, q: frozenset) -> float:
    """IoU of two keyword sets; two empty sets count as identical (1.0)."""
    if not p and not q:
        return 1.0
    return len(p & q) / len(p | q)


@dataclass(frozen=True)
class Cluster:
    """A group of snippet indices, either a consecutive time run or the
    carriers of one concept keyword."""

    id: str
    members: tuple[int, ...]
    kind: str  # "time" or "concept"


def time_clusters(a: Annotation, sim_threshold: float = TIME_CLUSTER_IOU) -> tuple[Cluster, ...]:
    """Partition the snippet sequence into maximal runs of similar snippets.

    Consecutive snippets stay in one cluster while their keyword IoU is at
    least ``sim_threshold``; a drop below it starts a new cluster. With
    threshold 0 everything collapses into a single cluster.
    """
    if a.n_snippets == 0:
        return ()
    runs: list[list[int]] = [[0]]
    for i in range(1, a.n_snippets):
        iou = keyword_iou(a.snippets[i - 1].keywords, a.snippets[i].keywords)
        if iou >= sim_threshold:
            runs[-1].append(i)
        else:
            runs.append([i])
    return tuple(
        Cluster(f"t{k}", tuple(members), "time") for k, members in enumerate(runs)
    )


def concept_clusters(a: Annotation) -> tuple[Cluster, ...]:
    """One cluster per distinct keyword, holding every snippet bearing it."""
    carriers: dict[tuple[str, str], list[int]] = {}
    for s in a.snippets:
        for key in s.keywords:
            carriers.setdefault(key, []).append(s.index)
    return tuple(
        Cluster(f"{cat}/{name}", tuple(sorted(ix)), "concept")
        for (cat, name), ix in sorted(carriers.items())
    )


class VideoIndex:
    """Precomputed per-annotation arrays backing the measure functions.

    Read-only after construction, so one instance may be shared freely
    across threads and measure calls. Obtain instances through
    :meth:`for_annotation`, which caches one per (annotation, threshold).
    """

    def __init__(self, a: Annotation, sim_threshold: float = TIME_CLUSTER_IOU):
        self.annotation = a
        self.sim_threshold = sim_threshold
        m = a.rating_lookup()
        n = a.n_snippets
        self.ratings = np.array([snippet_rating(s, m) for s in a.snippets], dtype=float)
        non_mega = np.array([s.mega_event_id is None for s in a.snippets], dtype=bool)
        self.imp_vector = self.ratings * non_mega
        self.mega = tuple(
            (float(mega_event_rating(e, a)), frozenset(e.members)) for e in a.mega_events
        )
        self.time_clusters = time_clusters(a, sim_threshold)
        self.concept_clusters = concept_clusters(a)
        self.time_label = np.zeros(n, dtype=int)
        for k, cl in enumerate(self.time_clusters):
            for i in cl.members:
                self.time_label[i] = k
        self.keyword_sets = tuple(s.keywords for s in a.snippets)
        dissim = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = 1.0 - keyword_iou(self.keyword_sets[i], self.keyword_sets[j])
                dissim[i, j] = dissim[j, i] = d
        self.dissim = dissim
        self._norm_cache: dict[tuple[str, float], float] = {}

    _CACHE: "weakref.WeakKeyDictionary[Annotation, dict[float, VideoIndex]]" = (
        weakref.WeakKeyDictionary()
    )

    @classmethod
    def for_annotation(cls, a: Annotation, sim_threshold: float = TIME_CLUSTER_IOU) -> "VideoIndex":
        per_threshold = cls._CACHE.setdefault(a, {})
        if sim_threshold not in per_threshold:
            per_threshold[sim_threshold] = cls(a, sim_threshold)
        return per_threshold[sim_threshold]


def _indices(X: Summary | Iterable[int]) -> tuple[int, ...]:
    if isinstance(X, Summary):
        return X.indices
    return tuple(sorted(set(int(i) for i in X)))


# ---------------------------------------------------------------------------
# The five measures

def imp_score(X: Summary | Iterable[int], a: Annotation) -> float:
    """Sum of snippet ratings over selected snippets outside all mega-events."""
    ix = _indices(X)
    if not ix:
        return 0.0
    vx = VideoIndex.for_annotation(a)
    return float(vx.imp_vector[list(ix)].sum())


def mega_cont(X: Summary | Iterable[int], a: Annotation) -> float:
    """Mega-event continuity: each event contributes its rating times the
    squared count of selected members, rewarding taking events whole."""
    ix = set(_indices(X))
    vx = VideoIndex.for_annotation(a)
    return float(sum(r * len(ix & members) ** 2 for r, members in vx.mega))


def div_sim(X: Summary | Iterable[int], a: Annotation) -> float:
    """Minimum pairwise keyword dissimilarity within the selection.

    Dissimilarity is 1 minus keyword IoU. A selection of one snippet or
    fewer has no pair to compare and counts as maximally diverse (1.0).
    """
    ix = _indices(X)
    if len(ix) <= 1:
        return 1.0
    vx = VideoIndex.for_annotation(a)
    sub = vx.dissim[np.ix_(ix, ix)]
    return float(sub[np.triu_indices(len(ix), k=1)].min())


def div_cluster(
    X: Summary | Iterable[int],
    clusters: Sequence[Cluster],
    a: Annotation,
) -> float:
    """Clustered diversity: per cluster, the best selected snippet rating.

    Clusters with no selected member contribute 0, so covering many distinct
    clusters with well-rated snippets is what pays.
    """
    ix = set(_indices(X))
    vx = VideoIndex.for_annotation(a)
    total = 0.0
    for cl in clusters:
        picked = ix.intersection(cl.members)
        if picked:
            total += max(vx.ratings[i] for i in picked)
    return float(total)


def _measure_evaluator(vx: VideoIndex, measure: str):
    """Closure computing one raw measure from a tuple of snippet indices."""
    if measure == "IMP":
        vec = vx.imp_vector

        def ev(X: tuple[int, ...]) -> float:
            return float(vec[list(X)].sum()) if X else 0.0

    elif measure == "MC":
        events = vx.mega

        def ev(X: tuple[int, ...]) -> float:
            sel = set(X)
            return float(sum(r * len(sel & members) ** 2 for r, members in events))

    elif measure == "DT":
        label, ratings = vx.time_label, vx.ratings

        def ev(X: tuple[int, ...]) -> float:
            best: dict[int, float] = {}
            for i in X:
                lab = int(label[i])
                r = ratings[i]
                if r > best.get(lab, -1.0):
                    best[lab] = r
            return float(sum(best.values()))

    elif measure == "DC":
        sets, ratings = vx.keyword_sets, vx.ratings

        def ev(X: tuple[int, ...]) -> float:
            best: dict[tuple[str, str], float] = {}
            for i in X:
                r = ratings[i]
                for key in sets[i]:
                    if r > best.get(key, -1.0):
                        best[key] = r
            return float(sum(best.values()))

    elif measure == "DSi":
        dissim = vx.dissim

        def ev(X: tuple[int, ...]) -> float:
            if len(X) <= 1:
                return 1.0
            sub = dissim[np.ix_(X, X)]
            return float(sub[np.triu_indices(len(X), k=1)].min())

    else:
        raise ValueError(f"unknown measure {measure!r}, expected one of {MEASURES}")
    return ev


def measure_evaluator(a: Annotation, measure: str):
    """Public access to the raw evaluator of one measure for one video."""
    return _measure_evaluator(VideoIndex.for_annotation(a), measure)


def _greedy_optimum_at(vx: VideoIndex, measure: str, budget: float) -> float:
    """Cached raw value of the lazy-greedy maximizer of one measure."""
    key = (measure, round(float(budget), 6))
    if key not in vx._norm_cache:
        ev = _measure_evaluator(vx, measure)
        a = vx.annotation
        obj = ObjectiveHandle(
            ev,
            tuple(range(a.n_snippets)),
            tuple(s.duration for s in a.snippets),
        )
        best = lazy_greedy(obj, budget, a)
        vx._norm_cache[key] = ev(best.indices)
    return vx._norm_cache[key]


def greedy_measure_optimum(a: Annotation, measure: str, budget: float) -> float:
    """Raw value of the lazy-greedy maximizer of one measure at a budget.

    This is the normalization denominator; results are cached per
    (annotation, measure, budget) since bank generation reuses the same few
    budgets many times.
    """
    return _greedy_optimum_at(VideoIndex.for_annotation(a), measure, budget)


def _normalize_at(raw: float, measure: str, vx: VideoIndex, budget: float) -> tuple[float, bool]:
    if measure == "DSi":
        return float(np.clip(100.0 * raw, 0.0, 100.0)), False
    denom = _greedy_optimum_at(vx, measure, budget)
    if denom <= 0:
        return 0.0, True
    return float(np.clip(100.0 * raw / denom, 0.0, 100.0)), False


def normalize_measure(
    raw: float, measure: str, a: Annotation, budget: float
) -> tuple[float, bool]:
    """Scale a raw measure value into [0, 100] against the greedy optimum.

    Returns ``(percentage, flagged)``. DSi is already a fraction and passes
    through as ``100 * raw``. A zero denominator cannot be divided through;
    the percentage is forced to 0 and ``flagged`` is True.
    """
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}, expected one of {MEASURES}")
    if budget <= 0:
        raise ValueError("budget must be positive")
    return _normalize_at(raw, measure, VideoIndex.for_annotation(a), budget)


# ---------------------------------------------------------------------------
# Temporal F1

def temporal_f1(candidate: Summary, reference: Summary, a: Annotation) -> tuple[float, float, float]:
    """Precision, recall and F1 of the time overlap between two summaries.

    Overlap is the duration of the intersection of the two selections'
    segment unions; on a shared snippet grid that is the total duration of
    the snippet indices both summaries picked. Precision divides by the
    candidate duration, recall by the reference duration.
    """
    cd = duration_of(candidate.indices, a)
    rd = duration_of(reference.indices, a)
    if cd <= 0 or rd <= 0:
        raise ValueError("temporal F1 is undefined for a zero-duration summary")
    overlap = duration_of(set(candidate.indices) & set(reference.indices), a)
    p = min(1.0, overlap / cd)
    r = min(1.0, overlap / rd)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def avg_max_f1(
    candidate: Summary, references: Sequence[Summary], a: Annotation
) -> tuple[float, float]:
    """AF1 (mean F1) and MF1 (max F1, nearest neighbor) over a reference set."""
    if not references:
        raise ValueError("need at least one reference summary")
    f1s = [temporal_f1(candidate, ref, a)[2] for ref in references]
    return float(np.mean(f1s)), float(max(f1s))


def leave_one_out_f1(
    summaries: Sequence[Summary], a: Annotation
) -> tuple[tuple[float, float], ...]:
    """Each summary's (AF1, MF1) against all the others; needs two or more."""
    if len(summaries) < 2:
        raise ValueError("leave-one-out needs at least 2 summaries")
    out = []
    for k, s in enumerate(summaries):
        rest = [r for j, r in enumerate(summaries) if j != k]
        out.append(avg_max_f1(s, rest, a))
    return tuple(out)


# ---------------------------------------------------------------------------
# Reports

@dataclass(frozen=True)
class MeasureReport:
    """All normalized measures for one candidate summary, as percentages.

    ``af1`` and ``mf1`` are None when no references were supplied.
    ``warnings`` lists measures whose normalizer was zero at this budget.
    """

    video_id: str
    budget: float
    imp: float
    mc: float
    dt: float
    dc: float
    dsi: float
    af1: float | None = None
    mf1: float | None = None
    warnings: tuple[str, ...] = ()

    def measure_vector(self) -> tuple[float, ...]:
        """The five measure percentages in canonical MEASURES order."""
        return (self.imp, self.mc, self.dt, self.dc, self.dsi)


def measure_report(
    X: Summary,
    a: Annotation,
    references: Sequence[Summary] | None = None,
    budget: float | None = None,
    sim_threshold: float = TIME_CLUSTER_IOU,
) -> MeasureReport:
    """Assemble the full report for one summary.

    ``budget`` is the normalization budget; it defaults to the summary's own
    duration. The summary must select at least one snippet.
    """
    if not X.indices:
        raise ValueError("cannot report on an empty summary")
    if budget is None:
        budget = duration_of(X.indices, a)
    if budget <= 0:
        raise ValueError("budget must be positive")
    vx = VideoIndex.for_annotation(a, sim_threshold)

    raws = {
        "IMP": imp_score(X, a),
        "MC": mega_cont(X, a),
        "DT": div_cluster(X, vx.time_clusters, a),
        "DC": div_cluster(X, vx.concept_clusters, a),
        "DSi": div_sim(X, a),
    }
    pct: dict[str, float] = {}
    flagged: list[str] = []
    for name in MEASURES:
        value, flag = _normalize_at(raws[name], name, vx, float(budget))
        pct[name] = value
        if flag:
            flagged.append(f"{name} normalizer is 0 at budget {budget:g}; percentage forced to 0")

    af1 = mf1 = None
    if references:
        raw_a, raw_m = avg_max_f1(X, list(references), a)
        af1, mf1 = 100.0 * raw_a, 100.0 * raw_m

    return MeasureReport(
        video_id=a.video_id,
        budget=float(budget),
        imp=pct["IMP"],
        mc=pct["MC"],
        dt=pct["DT"],
        dc=pct["DC"],
        dsi=pct["DSi"],
        af1=af1,
        mf1=mf1,
        warnings=tuple(flagged),
    )


def report_to_dict(r: MeasureReport) -> dict:
    return {
        "video_id": r.video_id,
        "budget": r.budget,
        "IMP": r.imp,
        "MC": r.mc,
        "DT": r.dt,
        "DC": r.dc,
        "DSi": r.dsi,
        "AF1": r.af1,
        "MF1": r.mf1,
        "warnings": list(r.warnings),
    }


def report_from_dict(d: Mapping) -> MeasureReport:
    return MeasureReport(
        video_id=str(d["video_id"]),
        budget=float(d["budget"]),
        imp=float(d["IMP"]),
        mc=float(d["MC"]),
        dt=float(d["DT"]),
        dc=float(d["DC"]),
        dsi=float(d["DSi"]),
        af1=None if d.get("AF1") is None else float(d["AF1"]),
        mf1=None if d.get("MF1") is None else float(d["MF1"]),
        warnings=tuple(d.get("warnings", ())),
    )


def format_report_table(rows: Sequence[tuple[str, MeasureReport]]) -> str:
    """Aligned text table, one row per labeled report.

    Column order is AF1 MF1 IMP MC DT DC DSi with one decimal per value;
    a dash stands in when no references were available.
    """

    def fmt(v: float | None) -> str:
        return "-" if v is None else f"{v:.1f}"

    header = ["summary", "AF1", "MF1", "IMP", "MC", "DT", "DC", "DSi"]
    body = [
        [label, fmt(r.af1), fmt(r.mf1), fmt(r.imp), fmt(r.mc), fmt(r.dt), fmt(r.dc), fmt(r.dsi)]
        for label, r in rows
    ]
    widths = [max(len(line[c]) for line in [header] + body) for c in range(len(header))]
    lines = []
    for line in [header] + body:
        first = line[0].ljust(widths[0])
        rest = [line[c].rjust(widths[c]) for c in range(1, len(header))]
        lines.append("  ".join([first] + rest).rstrip())
    return "\n".join(lines)
