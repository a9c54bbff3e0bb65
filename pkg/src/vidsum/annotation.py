"""Annotation data model: snippets, keywords, mega-events, ratings.

An annotation describes one video as an ordered sequence of snippets, each
carrying a set of concept keywords. A per-domain rating map assigns every
keyword an integer importance in [0, 10]; rating 0 marks undesirable content.
Runs of consecutive snippets that only make sense together are grouped into
mega-events. All types are immutable after construction and all functions
here are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

DOMAINS = (
    "soccer",
    "tvshow",
    "surveillance",
    "techtalk",
    "birthday",
    "wedding",
    "synthetic",
)

# Tolerance for time arithmetic on second-valued floats.
TIME_EPS = 1e-9


class AnnotationParseError(ValueError):
    """Raised when an annotation file is malformed or misses required fields."""


class AnnotationReferenceError(LookupError):
    """Raised when a cross-reference (keyword, mega-event member) cannot be resolved."""


@dataclass(frozen=True)
class Keyword:
    """One concept label with its domain rating.

    ``(category, name)`` identifies the concept; ``rating`` is an integer in
    [0, 10] where 0 flags undesirable content and 10 the most important.
    """

    category: str
    name: str
    rating: int

    @property
    def key(self) -> tuple[str, str]:
        return (self.category, self.name)


@dataclass(frozen=True)
class Snippet:
    """Atomic annotated time unit of a video; the selection unit for summaries."""

    index: int
    start: float
    end: float
    keywords: frozenset[tuple[str, str]]
    mega_event_id: str | int | None = None

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class MegaEvent:
    """A run of consecutive snippets constituting one cohesive event."""

    id: str | int
    members: tuple[int, ...]


@dataclass(frozen=True)
class Annotation:
    """Full annotation of one video: the indirect ground truth.

    ``duration`` is always the sum of snippet durations; it is derived at
    load time and never stored independently in files.
    """

    video_id: str
    domain: str
    snippets: tuple[Snippet, ...]
    mega_events: tuple[MegaEvent, ...]
    rating_map: tuple[Keyword, ...]
    duration: float

    @property
    def n_snippets(self) -> int:
        return len(self.snippets)

    def rating_lookup(self) -> dict[tuple[str, str], int]:
        """Keyword key -> rating mapping (fresh dict, safe to mutate)."""
        return {k.key: k.rating for k in self.rating_map}

    def mega_event_by_id(self, event_id: str | int) -> MegaEvent | None:
        for e in self.mega_events:
            if e.id == event_id:
                return e
        return None


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by :func:`validate`."""

    rule_id: str
    subject: str | int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Deterministically ordered list of invariant violations (empty = valid)."""

    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "OK"
        return "\n".join(
            f"{v.rule_id} [{v.subject}]: {v.message}" for v in self.violations
        )


@dataclass(frozen=True)
class Summary:
    """A budget-constrained selection of snippets from one video.

    ``indices`` is kept sorted; ``total_duration`` is derived from the
    companion annotation via :func:`duration_of` and never set by hand.
    """

    indices: tuple[int, ...]
    total_duration: float
    video_id: str = ""

    @classmethod
    def for_annotation(cls, indices: Iterable[int], a: Annotation) -> "Summary":
        idx = tuple(sorted(set(int(i) for i in indices)))
        for i in idx:
            if i < 0 or i >= a.n_snippets:
                raise IndexError(f"snippet index {i} out of range for {a.video_id!r}")
        return cls(idx, duration_of(idx, a), a.video_id)

    def segments(self, a: Annotation) -> list[tuple[float, float]]:
        """Selected time as merged [start, end) intervals."""
        segs: list[tuple[float, float]] = []
        for i in self.indices:
            s = a.snippets[i]
            if segs and abs(segs[-1][1] - s.start) <= TIME_EPS:
                segs[-1] = (segs[-1][0], s.end)
            else:
                segs.append((s.start, s.end))
        return segs


def duration_of(indices: Iterable[int], a: Annotation) -> float:
    """Canonical summary duration: snippet durations summed in index order.

    Every budget-feasibility check in the package uses this exact summation
    so that 'duration <= budget' holds bit-for-bit downstream.
    """
    return sum(a.snippets[i].duration for i in sorted(set(indices)))


def snippet_rating(s: Snippet, m: Mapping[tuple[str, str], int]) -> int:
    """Rating of a snippet from its keywords.

    0 if any keyword is rated 0 (undesirable content wins), else the maximum
    keyword rating. A snippet with no keywords rates 0.
    """
    best = 0
    for key in s.keywords:
        if key not in m:
            raise AnnotationReferenceError(
                f"snippet {s.index}: keyword {key!r} not in rating map"
            )
        r = m[key]
        if r == 0:
            return 0
        best = max(best, r)
    return best


def mega_event_rating(e: MegaEvent, a: Annotation) -> int:
    """Rating of a mega-event: the maximum over its member snippet ratings."""
    m = a.rating_lookup()
    return max(snippet_rating(a.snippets[i], m) for i in e.members)


# ---------------------------------------------------------------------------
# Validation

def validate(a: Annotation) -> ValidationReport:
    """Check every annotation invariant; violations are data, not errors.

    The report lists all problems at once, ordered by (rule_id, subject),
    so a CLI pass over many files can print everything in one go.
    """
    found: list[Violation] = []

    seen_keys: set[tuple[str, str]] = set()
    for k in a.rating_map:
        if k.key in seen_keys:
            found.append(
                Violation("dup-keyword", f"{k.category}/{k.name}", "duplicate keyword in rating map")
            )
        seen_keys.add(k.key)
        if not 0 <= k.rating <= 10:
            found.append(
                Violation("rating-range", f"{k.category}/{k.name}", f"rating {k.rating} outside [0, 10]")
            )

    for i, s in enumerate(a.snippets):
        if s.index != i:
            found.append(Violation("snippet-index", i, f"stored index {s.index} != position {i}"))
        if s.end <= s.start:
            found.append(Violation("snippet-times", i, f"end {s.end} <= start {s.start}"))
        if i > 0:
            prev = a.snippets[i - 1]
            if s.start < prev.end - TIME_EPS:
                found.append(
                    Violation("snippet-overlap", i, f"starts at {s.start} before previous end {prev.end}")
                )
            elif s.start > prev.end + TIME_EPS:
                found.append(
                    Violation("snippet-gap", i, f"starts at {s.start} after previous end {prev.end}")
                )
        for key in sorted(s.keywords):
            if key not in seen_keys:
                found.append(
                    Violation("unknown-keyword", i, f"keyword {key!r} not in rating map")
                )

    claimed: dict[int, str | int] = {}
    for e in a.mega_events:
        if len(e.members) < 2:
            found.append(Violation("mega-size", e.id, f"{len(e.members)} member(s), need >= 2"))
        members = sorted(e.members)
        out_of_range = [i for i in members if i < 0 or i >= a.n_snippets]
        if out_of_range:
            found.append(
                Violation("mega-range", e.id, f"member indices {out_of_range} out of range")
            )
        elif members and members != list(range(members[0], members[-1] + 1)):
            found.append(
                Violation("mega-consecutive", e.id, f"members {members} are not consecutive")
            )
        for i in members:
            if i in claimed:
                found.append(
                    Violation("mega-overlap", e.id, f"snippet {i} already in mega-event {claimed[i]!r}")
                )
            else:
                claimed[i] = e.id
        for i in members:
            if 0 <= i < a.n_snippets and a.snippets[i].mega_event_id != e.id:
                found.append(
                    Violation(
                        "mega-link",
                        e.id,
                        f"snippet {i} does not carry mega_event_id {e.id!r}",
                    )
                )

    event_ids = {e.id for e in a.mega_events}
    for i, s in enumerate(a.snippets):
        if s.mega_event_id is None:
            continue
        if s.mega_event_id not in event_ids:
            found.append(
                Violation("mega-link", i, f"snippet cites unknown mega-event {s.mega_event_id!r}")
            )
        else:
            e = a.mega_event_by_id(s.mega_event_id)
            if e is not None and i not in e.members:
                found.append(
                    Violation("mega-link", i, f"mega-event {s.mega_event_id!r} does not list snippet {i}")
                )

    total = sum(s.duration for s in a.snippets)
    if abs(a.duration - total) > 1e-6:
        found.append(
            Violation("duration-mismatch", a.video_id, f"duration {a.duration} != snippet sum {total}")
        )

    found.sort(key=lambda v: (v.rule_id, str(v.subject), v.message))
    return ValidationReport(tuple(found))


# ---------------------------------------------------------------------------
# File I/O
#
# Annotation file format (UTF-8 JSON, normative for all modules):
#   {video_id, domain, rating_map: [{category, name, rating}],
#    snippets: [{start, end, keywords: [[category, name]], mega_event_id?}],
#    mega_events: [{id, members: [int]}]}
# Times are seconds as decimals. Summary files: {video_id, snippet_indices}.

def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise AnnotationParseError(f"{where}: missing required field {key!r}")
    return obj[key]


def load_annotation(path: str | Path, strict: bool = True) -> Annotation:
    """Load and materialize one annotation file.

    With ``strict=True`` (default) unresolved cross-references raise
    :class:`AnnotationReferenceError`. With ``strict=False`` the annotation
    is returned as-is so that :func:`validate` can report every problem.
    Malformed files always raise :class:`AnnotationParseError`.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise AnnotationParseError(f"{path}: top level must be a JSON object")

    where = str(path)
    video_id = _require(raw, "video_id", where)
    domain = _require(raw, "domain", where)
    raw_map = _require(raw, "rating_map", where)
    raw_snippets = _require(raw, "snippets", where)
    raw_events = raw.get("mega_events", [])
    if not isinstance(raw_map, list) or not isinstance(raw_snippets, list) or not isinstance(raw_events, list):
        raise AnnotationParseError(f"{where}: rating_map, snippets and mega_events must be arrays")

    try:
        rating_map = tuple(
            Keyword(str(k["category"]), str(k["name"]), int(k["rating"])) for k in raw_map
        )
        snippets = []
        for i, s in enumerate(raw_snippets):
            keywords = frozenset((str(c), str(n)) for c, n in s.get("keywords", []))
            snippets.append(
                Snippet(
                    index=i,
                    start=float(s["start"]),
                    end=float(s["end"]),
                    keywords=keywords,
                    mega_event_id=s.get("mega_event_id"),
                )
            )
        events = tuple(
            MegaEvent(e["id"], tuple(sorted(int(i) for i in e["members"]))) for e in raw_events
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AnnotationParseError(f"{where}: malformed entry: {exc}") from exc

    ann = Annotation(
        video_id=str(video_id),
        domain=str(domain),
        snippets=tuple(snippets),
        mega_events=events,
        rating_map=rating_map,
        duration=sum(s.duration for s in snippets),
    )

    if strict:
        known = {k.key for k in rating_map}
        for s in ann.snippets:
            for key in sorted(s.keywords):
                if key not in known:
                    raise AnnotationReferenceError(
                        f"{where}: snippet {s.index} cites unknown keyword {key!r}"
                    )
        for e in ann.mega_events:
            for i in e.members:
                if i < 0 or i >= ann.n_snippets:
                    raise AnnotationReferenceError(
                        f"{where}: mega-event {e.id!r} member {i} out of range"
                    )
    return ann


def annotation_to_dict(a: Annotation) -> dict:
    """Serializable dict in the normative file layout (keywords sorted)."""
    return {
        "video_id": a.video_id,
        "domain": a.domain,
        "rating_map": [
            {"category": k.category, "name": k.name, "rating": k.rating} for k in a.rating_map
        ],
        "snippets": [
            {
                "start": s.start,
                "end": s.end,
                "keywords": [list(k) for k in sorted(s.keywords)],
                **({"mega_event_id": s.mega_event_id} if s.mega_event_id is not None else {}),
            }
            for s in a.snippets
        ],
        "mega_events": [{"id": e.id, "members": list(e.members)} for e in a.mega_events],
    }


def save_annotation(a: Annotation, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(annotation_to_dict(a), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_summary(path: str | Path, a: Annotation) -> Summary:
    """Load a summary file ({video_id, snippet_indices}) against its annotation."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}: not valid JSON: {exc}") from exc
    indices = _require(raw, "snippet_indices", str(path))
    summary = Summary.for_annotation(indices, a)
    file_vid = raw.get("video_id", a.video_id)
    return Summary(summary.indices, summary.total_duration, str(file_vid))


def summary_to_dict(s: Summary) -> dict:
    return {"video_id": s.video_id, "snippet_indices": list(s.indices)}


def save_summary(s: Summary, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(summary_to_dict(s), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
