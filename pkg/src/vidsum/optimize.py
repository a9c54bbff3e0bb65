"""Budgeted set-function maximization: lazy greedy, exact oracles, knapsack.

All selection routines share one determinism contract: ties break toward the
lowest snippet index, budgets are durations in seconds, and feasibility is
decided with the canonical duration summation of
:func:`vidsum.annotation.duration_of` so that ``duration <= budget`` holds
exactly for every emitted summary.
"""

from __future__ import annotations

import heapq
import itertools
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .annotation import Annotation, Summary, duration_of

# Knapsack durations are discretized to this step; finer than any annotation.
KNAPSACK_TICK = 0.1


@dataclass(frozen=True)
class ObjectiveHandle:
    """A set function over snippet indices plus per-element costs in seconds.

    ``evaluate`` must be a deterministic pure function of the index set.
    Values are used relatively (offset at the empty set is corrected), so an
    objective with ``evaluate(()) != 0`` is fine.
    """

    evaluate: Callable[[tuple[int, ...]], float]
    ground_set: tuple[int, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        if len(self.ground_set) != len(self.costs):
            raise ValueError("ground_set and costs must align")

    def cost_of(self, index: int) -> float:
        return self.costs[self.ground_set.index(index)]


def objective_for_annotation(
    evaluate: Callable[[tuple[int, ...]], float],
    a: Annotation,
    ground_set: Sequence[int] | None = None,
) -> ObjectiveHandle:
    """Objective over an annotation's snippets with durations as costs."""
    indices = tuple(ground_set) if ground_set is not None else tuple(range(a.n_snippets))
    costs = tuple(a.snippets[i].duration for i in indices)
    return ObjectiveHandle(evaluate, indices, costs)


def _summary_from(selected: Sequence[int], obj: ObjectiveHandle, a: Annotation | None) -> Summary:
    idx = tuple(sorted(selected))
    if a is not None:
        return Summary.for_annotation(idx, a)
    cost = {i: c for i, c in zip(obj.ground_set, obj.costs)}
    return Summary(idx, sum(cost[i] for i in idx))


def lazy_greedy(
    obj: ObjectiveHandle,
    budget: float,
    a: Annotation | None = None,
    cost_aware: bool = False,
) -> Summary:
    """Accelerated greedy maximization under a duration budget.

    Keeps a stale-gain priority queue and re-evaluates only the queue head,
    selecting the feasible element of maximal marginal gain until the budget
    is exhausted or no positive gain remains -- whichever comes first. Output
    is identical to naive greedy under the lowest-index tie rule. With
    ``cost_aware=True`` the queue is ordered by gain per second instead.

    When ``a`` is given, feasibility uses the canonical annotation durations;
    otherwise the handle's own costs are summed in sorted index order.
    """
    if not obj.ground_set:
        raise ValueError("empty ground set")
    if budget <= 0:
        raise ValueError("budget must be positive")
    if min(obj.costs) <= 0:
        raise ValueError("all costs must be positive")

    def total_cost(indices) -> float:
        if a is not None:
            return duration_of(indices, a)
        cost = {i: c for i, c in zip(obj.ground_set, obj.costs)}
        return sum(cost[i] for i in sorted(indices))

    base = obj.evaluate(())
    selected: list[int] = []
    current = base
    round_no = 0

    def keyed(gain: float, index: int, cost: float) -> tuple[float, int]:
        return ((-gain / cost) if cost_aware else -gain, index)

    cost_by_index = dict(zip(obj.ground_set, obj.costs))
    # Heap entries: (key, index, round the gain was computed in, gain).
    heap = [
        (keyed(np.inf, i, cost_by_index[i]), i, -1, np.inf) for i in sorted(obj.ground_set)
    ]
    heapq.heapify(heap)

    while heap:
        key, index, stamp, gain = heapq.heappop(heap)
        if total_cost(selected + [index]) > budget:
            continue  # budget only shrinks; this element is out for good
        if stamp != round_no:
            fresh = obj.evaluate(tuple(sorted(selected + [index]))) - current
            heapq.heappush(heap, (keyed(fresh, index, cost_by_index[index]), index, round_no, fresh))
            continue
        if gain <= 0:
            break
        selected.append(index)
        current += gain
        round_no += 1

    return _summary_from(selected, obj, a)


def brute_force_opt(
    obj: ObjectiveHandle,
    budget: float,
    n_max: int = 20,
    a: Annotation | None = None,
) -> Summary:
    """Exact maximizer over all feasible subsets; test oracle for small n.

    Ties break toward the lexicographically smallest sorted index tuple
    (so the empty set is preferred over a zero-gain singleton).
    """
    n = len(obj.ground_set)
    if n > n_max:
        raise ValueError(f"ground set of {n} exceeds brute-force cap {n_max}")

    def total_cost(indices) -> float:
        if a is not None:
            return duration_of(indices, a)
        cost = {i: c for i, c in zip(obj.ground_set, obj.costs)}
        return sum(cost[i] for i in sorted(indices))

    base = obj.evaluate(())
    ordered = sorted(obj.ground_set)
    best: tuple[int, ...] = ()
    best_value = 0.0
    for size in range(n + 1):
        for combo in itertools.combinations(ordered, size):
            if combo and total_cost(combo) > budget:
                continue
            value = obj.evaluate(combo) - base
            if value > best_value or (value == best_value and combo < best):
                best, best_value = combo, value
    return _summary_from(best, obj, a)


def knapsack_select(scores: Sequence[float], a: Annotation, budget: float) -> Summary:
    """Exact 0/1 knapsack over snippet scores under a duration budget.

    Durations are discretized to ``KNAPSACK_TICK`` seconds (ceiling) and the
    budget floored to the grid, so any selected set also satisfies the real
    duration budget. Among equal-value solutions the reconstruction prefers
    including lower indices.
    """
    if len(scores) != a.n_snippets:
        raise ValueError(f"got {len(scores)} scores for {a.n_snippets} snippets")
    durations = [s.duration for s in a.snippets]
    if min(durations) <= 0:
        raise ValueError("snippet durations must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive")
    if a.duration <= budget:
        return Summary.for_annotation(range(a.n_snippets), a)

    weights = [int(np.ceil(d / KNAPSACK_TICK - 1e-12)) for d in durations]
    capacity = int(np.floor(budget / KNAPSACK_TICK + 1e-12))
    n = a.n_snippets

    # value[i] holds the best achievable score using items i.. at each
    # residual capacity; float64 so reconstruction can compare exactly.
    value = np.zeros((n + 1, capacity + 1))
    for i in range(n - 1, -1, -1):
        value[i] = value[i + 1]
        w, s = weights[i], float(scores[i])
        if w <= capacity:
            take = s + value[i + 1, : capacity + 1 - w]
            value[i, w:] = np.maximum(value[i + 1, w:], take)

    chosen = []
    residual = capacity
    for i in range(n):
        w, s = weights[i], float(scores[i])
        if w <= residual and s + value[i + 1, residual - w] == value[i, residual]:
            chosen.append(i)
            residual -= w
    return Summary.for_annotation(chosen, a)


def facility_location(X: Summary | Sequence[int], S: np.ndarray) -> float:
    """Sum over the ground set of the best similarity to a selected element."""
    indices = list(X.indices if isinstance(X, Summary) else sorted(set(X)))
    if not indices:
        return 0.0
    return float(S[:, indices].max(axis=1).sum())


# ---------------------------------------------------------------------------
# Similarity matrices

def check_similarity_matrix(S: np.ndarray, n: int | None = None) -> np.ndarray:
    """Validate an n x n similarity matrix: [0, 1], symmetric, unit diagonal."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"similarity matrix must be square, got shape {S.shape}")
    if n is not None and S.shape[0] != n:
        raise ValueError(f"similarity matrix is {S.shape[0]}x{S.shape[0]}, expected {n}")
    if S.size and (S.min() < -1e-9 or S.max() > 1 + 1e-9):
        raise ValueError("similarity entries must lie in [0, 1]")
    if not np.allclose(S, S.T, atol=1e-6):
        raise ValueError("similarity matrix must be symmetric")
    if S.size and not np.allclose(np.diag(S), 1.0, atol=1e-6):
        raise ValueError("similarity matrix must have a unit diagonal")
    return S


def load_similarity(path: str | Path) -> np.ndarray:
    """Read a similarity matrix from JSON or dense binary.

    JSON: ``{"n": int, "values": [...]}`` with values row-major (flat or
    nested). Binary: little-endian uint32 ``n`` followed by ``n*n`` float32
    values, row-major.
    """
    path = Path(path)
    if path.suffix == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
        n = int(raw["n"])
        values = np.asarray(raw["values"], dtype=float).reshape(n, n)
    else:
        blob = path.read_bytes()
        (n,) = struct.unpack("<I", blob[:4])
        values = np.frombuffer(blob[4:], dtype="<f4", count=n * n).astype(float).reshape(n, n)
    return check_similarity_matrix(values)


def save_similarity(S: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    S = check_similarity_matrix(S)
    n = S.shape[0]
    if path.suffix == ".json":
        payload = {"n": n, "values": [float(v) for v in S.reshape(-1)]}
        path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    else:
        path.write_bytes(struct.pack("<I", n) + S.astype("<f4").tobytes())
