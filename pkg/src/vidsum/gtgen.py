"""Automatic reference-summary generation and the random/uniform baselines.

A mixture configuration weights the five measures into one scoring function;
sweeping a grid of configurations at sampled budgets yields many candidate
summaries. Candidates that no other candidate beats on every measure form
the Pareto set, which seeds the reference bank; the bank is then filled to
its target size by jittering Pareto configurations. A Nash-welfare selector
picks the single most balanced outcome when only one summary is wanted.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .annotation import (
    TIME_EPS,
    Annotation,
    Summary,
    duration_of,
    load_summary,
    save_summary,
)
from .measures import (
    MEASURES,
    MeasureReport,
    VideoIndex,
    measure_evaluator,
    measure_report,
)
from .optimize import ObjectiveHandle, lazy_greedy

# Grid levels used when the caller does not supply any.
DEFAULT_GRID_LEVELS = (0.0, 0.5, 1.0, 2.0)

# Scores below this floor are clamped before taking logs in nash_select.
NASH_EPS = 1e-6

# Default number of distinct budget levels sampled inside the budget window.
DEFAULT_BUDGET_LEVELS = 8


@dataclass(frozen=True)
class MixtureConfig:
    """Non-negative weights for the five measure terms of the generator."""

    lam_mc: float = 0.0
    lam_imp: float = 0.0
    lam_div_t: float = 0.0
    lam_div_c: float = 0.0
    lam_div_s: float = 0.0

    def __post_init__(self):
        lams = self.as_tuple()
        if any(v < 0 for v in lams):
            raise ValueError("mixture weights must be non-negative")
        if all(v == 0 for v in lams):
            raise ValueError("at least one mixture weight must be positive")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.lam_mc, self.lam_imp, self.lam_div_t, self.lam_div_c, self.lam_div_s)

    def to_dict(self) -> dict:
        return {
            "lam_mc": self.lam_mc,
            "lam_imp": self.lam_imp,
            "lam_div_t": self.lam_div_t,
            "lam_div_c": self.lam_div_c,
            "lam_div_s": self.lam_div_s,
        }

    @classmethod
    def from_dict(cls, d) -> "MixtureConfig":
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class ConfigOutcome:
    """One generated summary together with the configuration that made it.

    The report is computed at the budget the summary was generated under,
    which the report itself records.
    """

    config: MixtureConfig
    summary: Summary
    report: MeasureReport


@dataclass(frozen=True)
class BankEntry:
    """Provenance of one bank member."""

    config: MixtureConfig
    budget: float
    origin: str  # "grid" or "jitter"


@dataclass(frozen=True)
class ReferenceBank:
    """The automatically generated ground-truth summaries for one video."""

    video_id: str
    summaries: tuple[Summary, ...]
    entries: tuple[BankEntry, ...]
    seed: int

    @property
    def n(self) -> int:
        return len(self.summaries)


def config_grid(levels: Sequence[float]) -> tuple[MixtureConfig, ...]:
    """Cartesian product of weight levels over the five mixture slots.

    The all-zero combination is dropped. Levels are deduplicated and sorted,
    so the output order depends only on the set of levels.
    """
    if not levels:
        raise ValueError("need at least one grid level")
    uniq = sorted(set(float(v) for v in levels))
    if any(v < 0 for v in uniq):
        raise ValueError("grid levels must be non-negative")
    if uniq == [0.0]:
        raise ValueError("grid levels are all zero; no valid configuration exists")
    out = []
    for combo in itertools.product(uniq, repeat=5):
        if any(v > 0 for v in combo):
            out.append(MixtureConfig(*combo))
    return tuple(out)


def eligible_ground_set(a: Annotation) -> tuple[int, ...]:
    """Snippet indices admissible to the generator: rating above zero."""
    vx = VideoIndex.for_annotation(a)
    return tuple(i for i in range(a.n_snippets) if vx.ratings[i] > 0)


def mixture_evaluator(a: Annotation, c: MixtureConfig):
    """Closure computing the weighted measure mixture for an index tuple."""
    weights = {
        "MC": c.lam_mc,
        "IMP": c.lam_imp,
        "DT": c.lam_div_t,
        "DC": c.lam_div_c,
        "DSi": c.lam_div_s,
    }
    active = [(lam, measure_evaluator(a, name)) for name, lam in weights.items() if lam > 0]

    def ev(X: tuple[int, ...]) -> float:
        return sum(lam * f(X) for lam, f in active)

    return ev


def generate_summary(
    a: Annotation,
    c: MixtureConfig,
    budget: float,
    min_pct: float = 1.0,
    max_pct: float = 5.0,
) -> Summary:
    """Greedy-maximize one mixture configuration under a duration budget.

    Snippets rated 0 never enter the ground set. Budgets outside the
    [min_pct, max_pct] window of the video duration are allowed but warned
    about, since downstream bank invariants assume the window.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    lo, hi = a.duration * min_pct / 100.0, a.duration * max_pct / 100.0
    if not lo - TIME_EPS <= budget <= hi + TIME_EPS:
        warnings.warn(
            f"budget {budget:g}s outside the [{min_pct:g}%, {max_pct:g}%] window "
            f"([{lo:g}s, {hi:g}s]) of video {a.video_id!r}",
            stacklevel=2,
        )
    ground = eligible_ground_set(a)
    if not ground:
        raise ValueError(f"video {a.video_id!r} has no snippet rated above 0")
    obj = ObjectiveHandle(
        mixture_evaluator(a, c),
        ground,
        tuple(a.snippets[i].duration for i in ground),
    )
    return lazy_greedy(obj, budget, a)


def _vector(outcome: ConfigOutcome, measures: Sequence[str]) -> tuple[float, ...]:
    by_name = dict(zip(MEASURES, outcome.report.measure_vector()))
    return tuple(by_name[m] for m in measures)


def _dominates(u: Sequence[float], v: Sequence[float]) -> bool:
    """Strict Pareto dominance: at least as good everywhere, better somewhere."""
    return all(a >= b for a, b in zip(u, v)) and any(a > b for a, b in zip(u, v))


def pareto_filter(
    outcomes: Sequence[ConfigOutcome],
    measures: Sequence[str] = MEASURES,
    seed: int = 0,
) -> list[ConfigOutcome]:
    """Keep exactly the outcomes no other outcome strictly dominates.

    Runs as an incremental frontier scan starting from a seeded random
    element; because dominance is strict, the result is order-independent
    and equals full pairwise filtering. Output preserves input order.
    """
    if not outcomes:
        raise ValueError("no outcomes to filter")
    vectors = [_vector(o, measures) for o in outcomes]
    start = int(np.random.default_rng(seed).integers(len(outcomes)))
    order = [start] + [i for i in range(len(outcomes)) if i != start]

    frontier: list[int] = []
    for i in order:
        if any(_dominates(vectors[j], vectors[i]) for j in frontier):
            continue
        frontier = [j for j in frontier if not _dominates(vectors[i], vectors[j])]
        frontier.append(i)
    keep = sorted(frontier)
    return [outcomes[i] for i in keep]


def nash_select(
    outcomes: Sequence[ConfigOutcome], measures: Sequence[str] = MEASURES
) -> ConfigOutcome:
    """The outcome maximizing the sum of log measure scores.

    Scores are floored at a small epsilon before the log. Ties keep the
    earliest outcome in input order.
    """
    if not outcomes:
        raise ValueError("no outcomes to select from")
    best, best_welfare = None, -np.inf
    for o in outcomes:
        welfare = float(sum(np.log(max(v, NASH_EPS)) for v in _vector(o, measures)))
        if welfare > best_welfare:
            best, best_welfare = o, welfare
    return best


def budget_levels(
    a: Annotation,
    min_pct: float = 1.0,
    max_pct: float = 5.0,
    n_levels: int = DEFAULT_BUDGET_LEVELS,
) -> tuple[float, ...]:
    """Evenly spaced budget levels inside the window, endpoint included.

    The bottom endpoint is excluded: a summary generated at exactly the
    minimum budget could only re-enter the window by filling it perfectly.
    Few distinct levels keep the per-budget normalizer cache effective.
    """
    if not 0 < min_pct <= max_pct:
        raise ValueError("need 0 < min_pct <= max_pct")
    pcts = np.linspace(min_pct, max_pct, n_levels + 1)[1:]
    return tuple(float(p) / 100.0 * a.duration for p in pcts)


def build_reference_bank(
    a: Annotation,
    grid: Sequence[MixtureConfig],
    n_target: int = 100,
    seed: int = 0,
    min_pct: float = 1.0,
    max_pct: float = 5.0,
) -> ReferenceBank:
    """Sweep the grid, Pareto-filter, then jitter-fill to the target size.

    Every admitted summary is non-empty, fits its budget, and has duration
    at least min_pct of the video duration. Duplicated index sets are kept
    once. When the jitter phase cannot reach ``n_target`` distinct summaries
    a warning is emitted and the shorter bank returned.
    """
    if not grid:
        raise ValueError("empty configuration grid")
    if n_target < 1:
        raise ValueError("n_target must be at least 1")
    rng = np.random.default_rng(seed)
    levels = budget_levels(a, min_pct, max_pct)
    floor = a.duration * min_pct / 100.0

    def admissible(s: Summary, budget: float) -> bool:
        d = duration_of(s.indices, a)
        return bool(s.indices) and floor <= d <= budget

    seen: set[tuple[int, ...]] = set()
    outcomes: list[ConfigOutcome] = []
    budgets: list[float] = []
    for c in grid:
        budget = levels[int(rng.integers(len(levels)))]
        s = generate_summary(a, c, budget, min_pct, max_pct)
        if not admissible(s, budget) or s.indices in seen:
            continue
        seen.add(s.indices)
        outcomes.append(ConfigOutcome(c, s, measure_report(s, a, budget=budget)))
        budgets.append(budget)

    if not outcomes:
        warnings.warn(f"no admissible grid summary for video {a.video_id!r}; bank is empty")
        return ReferenceBank(a.video_id, (), (), seed)

    pareto = pareto_filter(outcomes, MEASURES, seed)
    members: list[tuple[ConfigOutcome, float, str]] = []
    pareto_set = {id(o) for o in pareto}
    for o, b in zip(outcomes, budgets):
        if id(o) in pareto_set:
            members.append((o, b, "grid"))
    members = members[:n_target]

    bank_seen = {m[0].summary.indices for m in members}
    attempts, max_attempts = 0, 60 * n_target
    while len(members) < n_target and attempts < max_attempts:
        attempts += 1
        base = pareto[int(rng.integers(len(pareto)))].config
        jittered = MixtureConfig(
            *(lam * float(rng.uniform(0.75, 1.25)) for lam in base.as_tuple())
        )
        budget = levels[int(rng.integers(len(levels)))]
        s = generate_summary(a, jittered, budget, min_pct, max_pct)
        if not admissible(s, budget) or s.indices in bank_seen:
            continue
        bank_seen.add(s.indices)
        outcome = ConfigOutcome(jittered, s, measure_report(s, a, budget=budget))
        members.append((outcome, budget, "jitter"))

    if len(members) < n_target:
        warnings.warn(
            f"bank shortfall for video {a.video_id!r}: "
            f"{len(members)} of {n_target} distinct summaries"
        )

    return ReferenceBank(
        video_id=a.video_id,
        summaries=tuple(m[0].summary for m in members),
        entries=tuple(BankEntry(m[0].config, m[1], m[2]) for m in members),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Baselines

def baseline_random(a: Annotation, budget: float, seed: int) -> Summary:
    """Seeded random fill: shuffle all snippets, keep whatever still fits."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    order = np.random.default_rng(seed).permutation(a.n_snippets)
    picked: list[int] = []
    for i in order:
        if duration_of(picked + [int(i)], a) <= budget:
            picked.append(int(i))
    return Summary.for_annotation(picked, a)


def baseline_uniform(a: Annotation, budget: float) -> Summary:
    """Largest evenly spaced selection that fits the budget.

    For k picks the indices are floor(j*n/k); k is the largest count whose
    spaced selection still fits. Deterministic, no randomness involved.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    n = a.n_snippets
    for k in range(n, 0, -1):
        ix = [j * n // k for j in range(k)]
        if duration_of(ix, a) <= budget:
            return Summary.for_annotation(ix, a)
    return Summary((), 0.0, a.video_id)


# ---------------------------------------------------------------------------
# Bank persistence: a directory of one JSON per summary plus bank.json

def save_reference_bank(bank: ReferenceBank, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (s, e) in enumerate(zip(bank.summaries, bank.entries)):
        name = f"summary_{k:03d}.json"
        save_summary(s, directory / name)
        entries.append(
            {
                "file": name,
                "budget": e.budget,
                "origin": e.origin,
                "config": e.config.to_dict(),
            }
        )
    payload = {
        "video_id": bank.video_id,
        "seed": bank.seed,
        "n": bank.n,
        "members": entries,
    }
    (directory / "bank.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )


def load_reference_bank(directory: str | Path, a: Annotation) -> ReferenceBank:
    """Read a bank directory back; the annotation must be the matching video."""
    directory = Path(directory)
    raw = json.loads((directory / "bank.json").read_text(encoding="utf-8"))
    if raw["video_id"] != a.video_id:
        raise ValueError(
            f"bank is for video {raw['video_id']!r}, annotation is {a.video_id!r}"
        )
    summaries = []
    entries = []
    for m in raw["members"]:
        summaries.append(load_summary(directory / m["file"], a))
        entries.append(
            BankEntry(MixtureConfig.from_dict(m["config"]), float(m["budget"]), str(m["origin"]))
        )
    return ReferenceBank(raw["video_id"], tuple(summaries), tuple(entries), int(raw["seed"]))
