"""Hand-assembly helpers for annotations used across the test modules."""

from __future__ import annotations

from vidsum.annotation import Annotation, Keyword, MegaEvent, Snippet


def build_annotation(
    ratings,
    durations=None,
    mega=(),
    keyword_sets=None,
    video_id="test-video",
    domain="synthetic",
    extra_keywords=(),
):
    """Assemble a consistent annotation from per-snippet ratings.

    By default snippet i carries one private keyword ("concept", "k<i>")
    rated ratings[i], so snippet ratings equal the given numbers exactly
    and every snippet lands in its own concept cluster. Pass keyword_sets
    (a list of name lists) to share keywords across snippets instead; the
    rating of keyword name n is then taken from ratings[first snippet
    using n].

    mega is a list of (event_id, member index range) tuples; members must
    be consecutive.
    """
    n = len(ratings)
    durations = durations if durations is not None else [1.0] * n

    if keyword_sets is None:
        keyword_sets = [[f"k{i}"] for i in range(n)]
    name_rating: dict[str, int] = {}
    for i, names in enumerate(keyword_sets):
        for name in names:
            name_rating.setdefault(name, int(ratings[i]))
    rating_map = tuple(
        Keyword("concept", name, r) for name, r in sorted(name_rating.items())
    ) + tuple(extra_keywords)

    member_event: dict[int, str | int] = {}
    events = []
    for event_id, members in mega:
        members = tuple(sorted(int(m) for m in members))
        events.append(MegaEvent(event_id, members))
        for m in members:
            member_event[m] = event_id

    snippets = []
    t = 0.0
    for i in range(n):
        snippets.append(
            Snippet(
                index=i,
                start=t,
                end=t + durations[i],
                keywords=frozenset(("concept", name) for name in keyword_sets[i]),
                mega_event_id=member_event.get(i),
            )
        )
        t += durations[i]

    return Annotation(
        video_id=video_id,
        domain=domain,
        snippets=tuple(snippets),
        mega_events=tuple(events),
        rating_map=rating_map,
        duration=t,
    )


def random_annotation(rng, n=8, max_rating=10, with_mega=False):
    """Small random annotation for property sweeps. Ratings >= 1."""
    ratings = [int(rng.integers(1, max_rating + 1)) for _ in range(n)]
    durations = [float(rng.uniform(0.5, 3.0)) for _ in range(n)]
    mega = []
    if with_mega and n >= 4:
        start = int(rng.integers(0, n - 2))
        mega.append(("e0", range(start, start + 2)))
    # Shared keywords so concept clusters and IoU structure are nontrivial.
    vocab = [f"w{j}" for j in range(max(3, n // 2))]
    keyword_sets = [
        list({vocab[int(rng.integers(len(vocab)))] for _ in range(int(rng.integers(1, 3)))})
        for _ in range(n)
    ]
    return build_annotation(
        ratings, durations, mega=mega, keyword_sets=keyword_sets
    )
