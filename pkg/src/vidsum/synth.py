"""Deterministic synthetic annotation corpora for desk-scale experiments.

Generated videos mimic the structure real annotations exhibit: contiguous
snippets, keyword persistence across neighbouring snippets, a skewed-low
rating distribution with a small high-importance tail, and disjoint runs of
consecutive snippets grouped into mega-events. Every generated annotation
passes :func:`vidsum.annotation.validate` with an empty report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotation import Annotation, Keyword, MegaEvent, Snippet

# P(rating = r) for r = 0..10: mostly mundane content, a rare important tail.
DEFAULT_RATING_WEIGHTS = (0.06, 0.30, 0.22, 0.12, 0.06, 0.05, 0.04, 0.04, 0.04, 0.04, 0.03)

DEFAULT_VOCAB = (("actor", 6), ("action", 8), ("scene", 5))


@dataclass(frozen=True)
class CorpusSpec:
    """Parameters of a synthetic corpus.

    ``rating_weights`` gives the probability of each keyword rating 0..10.
    ``keyword_persistence`` is the chance a snippet copies its predecessor's
    keywords, creating the consecutive-similarity runs time clusters rely on.
    """

    n_videos: int = 1
    n_snippets: int = 100
    snippet_duration: tuple[float, float] = (2.0, 5.0)
    vocab_sizes: tuple[tuple[str, int], ...] = DEFAULT_VOCAB
    keywords_per_snippet: tuple[int, int] = (1, 3)
    keyword_persistence: float = 0.3
    n_mega_events: int = 0
    mega_event_length: tuple[int, int] = (2, 4)
    rating_weights: tuple[float, ...] = DEFAULT_RATING_WEIGHTS
    domain: str = "synthetic"
    video_id_prefix: str = "synth"


def _check_spec(spec: CorpusSpec) -> None:
    if spec.n_videos < 1 or spec.n_snippets < 1:
        raise ValueError("infeasible corpus spec: need at least one video and snippet")
    if spec.snippet_duration[0] <= 0 or spec.snippet_duration[1] < spec.snippet_duration[0]:
        raise ValueError("infeasible corpus spec: bad snippet duration range")
    vocab_total = sum(size for _, size in spec.vocab_sizes)
    if vocab_total < 1:
        raise ValueError("infeasible corpus spec: empty keyword vocabulary")
    kmin, kmax = spec.keywords_per_snippet
    if kmin < 0 or kmax < kmin or kmax > vocab_total:
        raise ValueError("infeasible corpus spec: keywords_per_snippet exceeds vocabulary")
    if len(spec.rating_weights) != 11 or min(spec.rating_weights) < 0:
        raise ValueError("infeasible corpus spec: rating_weights must be 11 non-negative values")
    if spec.n_mega_events > 0:
        lmin, lmax = spec.mega_event_length
        if lmin < 2 or lmax < lmin:
            raise ValueError("infeasible corpus spec: mega-event length must span >= 2 snippets")
        if spec.n_mega_events * lmax > spec.n_snippets:
            raise ValueError(
                "infeasible corpus spec: "
                f"{spec.n_mega_events} mega-events of up to {lmax} snippets "
                f"cannot fit in {spec.n_snippets} snippets"
            )


def _place_mega_events(n: int, count: int, lengths: np.ndarray, rng: np.random.Generator):
    """Disjoint consecutive runs: spread the leftover slots over the gaps."""
    free = n - int(lengths.sum())
    gaps = rng.multinomial(free, [1.0 / (count + 1)] * (count + 1))
    spans = []
    pos = 0
    for i in range(count):
        pos += int(gaps[i])
        spans.append((pos, pos + int(lengths[i])))
        pos += int(lengths[i])
    return spans


def synth_video(spec: CorpusSpec, seed: int, video_index: int = 0) -> Annotation:
    """Generate one annotation, deterministically for (spec, seed, video_index)."""
    _check_spec(spec)
    rng = np.random.default_rng([seed, video_index])

    vocab: list[tuple[str, str]] = []
    for category, size in spec.vocab_sizes:
        vocab.extend((category, f"{category}_{i}") for i in range(size))
    weights = np.asarray(spec.rating_weights, dtype=float)
    ratings = rng.choice(11, size=len(vocab), p=weights / weights.sum())
    rating_map = tuple(
        Keyword(cat, name, int(r)) for (cat, name), r in zip(vocab, ratings)
    )

    n = spec.n_snippets
    durations = np.round(rng.uniform(*spec.snippet_duration, size=n), 1)

    kmin, kmax = spec.keywords_per_snippet
    keyword_sets: list[frozenset[tuple[str, str]]] = []
    for i in range(n):
        if i > 0 and rng.random() < spec.keyword_persistence:
            keyword_sets.append(keyword_sets[-1])
            continue
        k = int(rng.integers(kmin, kmax + 1))
        picks = rng.choice(len(vocab), size=k, replace=False) if k else np.empty(0, int)
        keyword_sets.append(frozenset(vocab[j] for j in picks))

    event_of: dict[int, str] = {}
    mega_events: list[MegaEvent] = []
    if spec.n_mega_events > 0:
        lmin, lmax = spec.mega_event_length
        lengths = rng.integers(lmin, lmax + 1, size=spec.n_mega_events)
        for eid, (lo, hi) in enumerate(_place_mega_events(n, spec.n_mega_events, lengths, rng)):
            event_id = f"m{eid}"
            mega_events.append(MegaEvent(event_id, tuple(range(lo, hi))))
            for i in range(lo, hi):
                event_of[i] = event_id

    snippets = []
    start = 0.0
    for i in range(n):
        end = start + float(durations[i])
        snippets.append(
            Snippet(
                index=i,
                start=start,
                end=end,
                keywords=keyword_sets[i],
                mega_event_id=event_of.get(i),
            )
        )
        start = end

    return Annotation(
        video_id=f"{spec.video_id_prefix}-s{seed}-{video_index:03d}",
        domain=spec.domain,
        snippets=tuple(snippets),
        mega_events=tuple(mega_events),
        rating_map=rating_map,
        duration=sum(s.duration for s in snippets),
    )


def synth_corpus(spec: CorpusSpec, seed: int) -> list[Annotation]:
    """Generate ``spec.n_videos`` annotations; deterministic for a fixed seed."""
    return [synth_video(spec, seed, v) for v in range(spec.n_videos)]


def corpus_spec_from_options(**overrides) -> CorpusSpec:
    """CorpusSpec with keyword overrides; unknown keys raise."""
    valid = {f for f in CorpusSpec.__dataclass_fields__}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown corpus spec options: {sorted(unknown)}")
    return CorpusSpec(**overrides)
