"""Trainable summarizer: facility location plus modular importance.

The model scores a summary as w_fl * facility_location + w_imp * importance
sum. Weights are learned from reference banks with a large-margin objective:
for every (video, reference) pair the loss-augmented best summary must not
outscore the reference, where the loss combines temporal-F1 and measure
deficits. Training is projected subgradient descent over the non-negative
orthant, iterating the references one at a time in seeded shuffled order.

:class:`MixtureSummarizer` wraps the same machinery behind the scikit-learn
estimator interface (fit, predict, score, get_params).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .annotation import TIME_EPS, Annotation, Summary, duration_of
from .gtgen import ReferenceBank
from .measures import (
    MEASURES,
    VideoIndex,
    avg_max_f1,
    div_cluster,
    div_sim,
    imp_score,
    mega_cont,
    normalize_measure,
    temporal_f1,
)
from .optimize import ObjectiveHandle, check_similarity_matrix, facility_location, lazy_greedy

# Order of the combined-loss terms everywhere: weights, files, reports.
LOSS_TERMS = ("F1", "IMP", "MC", "DT", "DC", "DSi")


class TrainDivergenceError(RuntimeError):
    """Training objective exploded; carries the objective trace for diagnosis."""

    def __init__(self, message: str, trace: tuple[float, ...]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    """Per-video model inputs: a snippet similarity matrix and importance scores."""

    sim: np.ndarray
    importance: np.ndarray


def feature_bundle(a: Annotation, scores: Sequence[float] | None = None) -> FeatureBundle:
    """Build features from the annotation itself or from external scores.

    The similarity matrix is keyword IoU between snippets. Importance
    defaults to the snippet ratings; an external per-snippet score vector
    (for example from a pretrained frame scorer) replaces it when given.
    """
    vx = VideoIndex.for_annotation(a)
    sim = 1.0 - vx.dissim
    np.fill_diagonal(sim, 1.0)
    if scores is None:
        importance = vx.ratings.astype(float).copy()
    else:
        importance = np.asarray(scores, dtype=float)
    f = FeatureBundle(sim, importance)
    check_feature_bundle(f, a)
    f.sim.setflags(write=False)
    f.importance.setflags(write=False)
    return f


def check_feature_bundle(f: FeatureBundle, a: Annotation) -> FeatureBundle:
    """Validate dimensions and value ranges of a feature bundle."""
    check_similarity_matrix(f.sim, a.n_snippets)
    if f.importance.ndim != 1 or len(f.importance) != a.n_snippets:
        raise ValueError(
            f"importance has shape {f.importance.shape}, expected ({a.n_snippets},)"
        )
    if not np.all(np.isfinite(f.importance)):
        raise ValueError("importance scores must be finite")
    if f.importance.min() < 0:
        raise ValueError("importance scores must be non-negative")
    return f


def _loss_weight_tuple(
    loss_weights: Mapping[str, float] | Sequence[float] | None,
) -> tuple[float, ...]:
    """Coerce user loss weights into the canonical normalized tuple.

    None means uniform weight over all terms. Nonzero vectors are scaled to
    sum to 1; the all-zero vector is kept as-is (a valid degenerate choice
    that turns the loss off).
    """
    if loss_weights is None:
        w = np.full(len(LOSS_TERMS), 1.0 / len(LOSS_TERMS))
    elif isinstance(loss_weights, Mapping):
        unknown = set(loss_weights) - set(LOSS_TERMS)
        if unknown:
            raise ValueError(f"unknown loss terms {sorted(unknown)}, expected {LOSS_TERMS}")
        w = np.array([float(loss_weights.get(t, 0.0)) for t in LOSS_TERMS])
    else:
        w = np.asarray(loss_weights, dtype=float)
        if w.shape != (len(LOSS_TERMS),):
            raise ValueError(f"need {len(LOSS_TERMS)} loss weights, one per {LOSS_TERMS}")
    if w.min() < 0:
        raise ValueError("loss weights must be non-negative")
    total = w.sum()
    if total > 0:
        w = w / total
    return tuple(float(v) for v in w)


@dataclass(frozen=True)
class MixtureModel:
    """Learned mixture weights plus the loss weighting they were trained with."""

    w_fl: float
    w_imp: float
    loss_weights: tuple[float, ...] | Mapping[str, float] | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.w_fl < 0 or self.w_imp < 0:
            raise ValueError("mixture weights must be non-negative")
        object.__setattr__(self, "loss_weights", _loss_weight_tuple(self.loss_weights))


def model_score(X: Summary | Sequence[int], m: MixtureModel, f: FeatureBundle) -> float:
    """w_fl times facility location plus w_imp times selected importance."""
    indices = list(X.indices) if isinstance(X, Summary) else sorted(set(int(i) for i in X))
    if not indices:
        return 0.0
    fl = facility_location(indices, f.sim) if m.w_fl != 0 else 0.0
    return m.w_fl * fl + m.w_imp * float(f.importance[indices].sum())


def combined_loss(
    X: Summary | Sequence[int],
    ref: Summary,
    a: Annotation,
    m: MixtureModel,
    budget: float,
) -> float:
    """Weighted sum of deficits in [0, 1]: temporal F1 plus the five measures.

    Each measure deficit is 1 minus the normalized percentage over 100; the
    F1 deficit is 1 minus F1 against the reference. An empty candidate has
    F1 deficit 1 outright.
    """
    lw = dict(zip(LOSS_TERMS, m.loss_weights))
    if all(v == 0 for v in m.loss_weights):
        return 0.0
    indices = tuple(X.indices) if isinstance(X, Summary) else tuple(sorted(set(int(i) for i in X)))
    candidate = Summary(indices, duration_of(indices, a), a.video_id)

    total = 0.0
    if lw["F1"] > 0:
        f1 = temporal_f1(candidate, ref, a)[2] if indices else 0.0
        total += lw["F1"] * (1.0 - f1)
    vx = VideoIndex.for_annotation(a)
    raws = {
        "IMP": lambda: imp_score(candidate, a),
        "MC": lambda: mega_cont(candidate, a),
        "DT": lambda: div_cluster(candidate, vx.time_clusters, a),
        "DC": lambda: div_cluster(candidate, vx.concept_clusters, a),
        "DSi": lambda: div_sim(candidate, a),
    }
    for name in MEASURES:
        if lw[name] > 0:
            pct, _ = normalize_measure(raws[name](), name, a, budget)
            total += lw[name] * (1.0 - pct / 100.0)
    return total


def loss_augmented_inference(
    m: MixtureModel,
    f: FeatureBundle,
    a: Annotation,
    ref: Summary,
    budget: float,
    loss_scale: float = 1.0,
) -> Summary:
    """Greedy-maximize model score plus scaled loss against one reference.

    This finds the margin-violating summary during training. The combined
    loss is not submodular, so greedy is a heuristic here; that is the
    standard practice for this training scheme and is what tests pin down.
    """

    def ev(X: tuple[int, ...]) -> float:
        return model_score(X, m, f) + loss_scale * combined_loss(X, ref, a, m, budget)

    obj = ObjectiveHandle(
        ev, tuple(range(a.n_snippets)), tuple(s.duration for s in a.snippets)
    )
    return lazy_greedy(obj, budget, a)


def infer(
    m: MixtureModel,
    f: FeatureBundle,
    a: Annotation,
    budget: float,
    min_pct: float = 1.0,
    max_pct: float = 5.0,
) -> Summary:
    """Greedy summary under the trained model at the requested budget."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    lo, hi = a.duration * min_pct / 100.0, a.duration * max_pct / 100.0
    if not lo - TIME_EPS <= budget <= hi + TIME_EPS:
        warnings.warn(
            f"budget {budget:g}s outside the [{min_pct:g}%, {max_pct:g}%] window "
            f"([{lo:g}s, {hi:g}s]) of video {a.video_id!r}",
            stacklevel=2,
        )

    def ev(X: tuple[int, ...]) -> float:
        return model_score(X, m, f)

    obj = ObjectiveHandle(
        ev, tuple(range(a.n_snippets)), tuple(s.duration for s in a.snippets)
    )
    return lazy_greedy(obj, budget, a)


# ---------------------------------------------------------------------------
# Training

@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the projected subgradient trainer.

    ``budget_policy`` picks the inference budget per training pair:
    "reference" reuses the budget each reference was generated at;
    "fixed" uses ``budget_pct`` of the video duration throughout.
    ``loss_scale`` None means calibrate kappa to the mean reference score
    at initialization.
    """

    epochs: int = 15
    eta0: float = 0.1
    lam_reg: float = 1e-4
    budget_policy: str = "reference"
    budget_pct: float = 5.0
    loss_weights: Mapping[str, float] | Sequence[float] | None = None
    loss_scale: float | None = None
    w_init: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if self.lam_reg < 0:
            raise ValueError("lam_reg must be non-negative")
        if self.budget_policy not in ("reference", "fixed"):
            raise ValueError("budget_policy must be 'reference' or 'fixed'")
        if not 0 < self.budget_pct <= 100:
            raise ValueError("budget_pct must be in (0, 100]")
        _loss_weight_tuple(self.loss_weights)
        if self.loss_scale is not None and self.loss_scale <= 0:
            raise ValueError("loss_scale must be positive when given")
        if len(self.w_init) != 2 or min(self.w_init) < 0:
            raise ValueError("w_init must be two non-negative weights")


Corpus = Sequence[tuple[Annotation, FeatureBundle, ReferenceBank]]


def check_corpus(corpus: Corpus) -> None:
    if not corpus:
        raise ValueError("empty training corpus")
    for a, f, bank in corpus:
        check_feature_bundle(f, a)
        if bank.n == 0:
            raise ValueError(f"reference bank for video {a.video_id!r} is empty")
        if bank.video_id != a.video_id:
            raise ValueError(
                f"bank is for video {bank.video_id!r}, annotation is {a.video_id!r}"
            )


def _phi(indices: Sequence[int], f: FeatureBundle) -> np.ndarray:
    """Feature map of a selection: (facility location, importance sum)."""
    ix = sorted(set(int(i) for i in indices))
    if not ix:
        return np.zeros(2)
    return np.array([facility_location(ix, f.sim), float(f.importance[ix].sum())])


def train(corpus: Corpus, cfg: TrainConfig = TrainConfig()) -> MixtureModel:
    """Fit mixture weights by large-margin projected subgradient descent.

    One step per (video, reference) pair, shuffled each epoch; global step
    size eta0 / sqrt(t). The hinge for a pair compares the loss-augmented
    greedy summary against the reference. After every step the weights are
    clipped to the non-negative orthant. The returned model carries the
    weights of whichever epoch end (or the initialization) had the lowest
    full objective, plus the objective trace in its provenance.
    """
    check_corpus(corpus)
    lw = _loss_weight_tuple(cfg.loss_weights)

    pairs: list[tuple[int, int, float]] = []  # (video pos, ref pos, budget)
    for vi, (a, f, bank) in enumerate(corpus):
        for ri in range(bank.n):
            if cfg.budget_policy == "reference":
                budget = bank.entries[ri].budget
            else:
                budget = cfg.budget_pct / 100.0 * a.duration
            pairs.append((vi, ri, budget))

    def as_model(w: np.ndarray) -> MixtureModel:
        return MixtureModel(float(w[0]), float(w[1]), lw)

    w = np.array(cfg.w_init, dtype=float)
    if w.shape != (2,) or w.min() < 0:
        raise ValueError("w_init must be two non-negative weights")

    if cfg.loss_scale is not None:
        kappa = float(cfg.loss_scale)
    else:
        init = as_model(w)
        ref_scores = [
            model_score(corpus[vi][2].summaries[ri], init, corpus[vi][1])
            for vi, ri, _ in pairs
        ]
        kappa = float(np.mean(ref_scores))
        if kappa <= 0:
            kappa = 1.0

    def objective(weights: np.ndarray) -> float:
        m = as_model(weights)
        total = 0.0
        for vi, ri, budget in pairs:
            a, f, bank = corpus[vi]
            ref = bank.summaries[ri]
            x_hat = loss_augmented_inference(m, f, a, ref, budget, kappa)
            augmented = model_score(x_hat, m, f) + kappa * combined_loss(
                x_hat, ref, a, m, budget
            )
            total += max(0.0, augmented - model_score(ref, m, f))
        return total + 0.5 * cfg.lam_reg * float(weights @ weights)

    initial = objective(w)
    trace = [initial]
    best_w, best_objective, best_epoch = w.copy(), initial, 0

    t = 0
    for epoch in range(1, cfg.epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(pairs))
        for p in order:
            vi, ri, budget = pairs[p]
            a, f, bank = corpus[vi]
            ref = bank.summaries[ri]
            t += 1
            eta = cfg.eta0 / np.sqrt(t)
            m = as_model(w)
            x_hat = loss_augmented_inference(m, f, a, ref, budget, kappa)
            augmented = model_score(x_hat, m, f) + kappa * combined_loss(
                x_hat, ref, a, m, budget
            )
            hinge = augmented - model_score(ref, m, f)
            grad = (cfg.lam_reg / len(pairs)) * w
            if hinge > 0:
                grad = grad + _phi(x_hat.indices, f) - _phi(ref.indices, f)
            w = np.maximum(0.0, w - eta * grad)

        value = objective(w)
        trace.append(value)
        if value < best_objective:
            best_w, best_objective, best_epoch = w.copy(), value, epoch
        if initial > 0 and value > 10.0 * initial:
            raise TrainDivergenceError(
                f"objective {value:g} exceeds 10x the initial {initial:g} "
                f"at epoch {epoch}; last weights {w.tolist()}",
                tuple(trace),
            )

    return MixtureModel(
        w_fl=float(best_w[0]),
        w_imp=float(best_w[1]),
        loss_weights=lw,
        provenance={
            "objective_trace": [float(v) for v in trace],
            "initial_objective": float(initial),
            "best_objective": float(best_objective),
            "best_epoch": int(best_epoch),
            "kappa": kappa,
            "epochs": cfg.epochs,
            "eta0": cfg.eta0,
            "lam_reg": cfg.lam_reg,
            "budget_policy": cfg.budget_policy,
            "budget_pct": cfg.budget_pct,
            "seed": cfg.seed,
            "n_videos": len(corpus),
            "n_pairs": len(pairs),
        },
    )


# ---------------------------------------------------------------------------
# Model and score-file persistence

def model_to_dict(m: MixtureModel) -> dict:
    return {
        "w_fl": m.w_fl,
        "w_imp": m.w_imp,
        "loss_weights": dict(zip(LOSS_TERMS, m.loss_weights)),
        "provenance": m.provenance,
    }


def save_model(m: MixtureModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> MixtureModel:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return MixtureModel(
        w_fl=float(raw["w_fl"]),
        w_imp=float(raw["w_imp"]),
        loss_weights=_loss_weight_tuple(raw.get("loss_weights")),
        provenance=dict(raw.get("provenance", {})),
    )


def load_scores(path: str | Path) -> tuple[str, np.ndarray]:
    """Read an external per-snippet score file: {video_id, scores:[float]}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return str(raw["video_id"]), np.asarray(raw["scores"], dtype=float)


def save_scores(video_id: str, scores: Sequence[float], path: str | Path) -> None:
    payload = {"video_id": video_id, "scores": [float(v) for v in scores]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# scikit-learn estimator interface

class MixtureSummarizer(BaseEstimator):
    """Estimator wrapper: fit on (annotation, features, bank) triples.

    fit(X) trains the mixture weights, predict(X) summarizes
    (annotation, features) pairs at ``budget_pct`` of each video duration,
    and score(X) is the mean MF1 of predictions against the banks in X.
    Hyperparameters follow the scikit-learn convention of being stored
    verbatim at construction and validated at fit time.
    """

    def __init__(
        self,
        epochs: int = 15,
        eta0: float = 0.1,
        lam_reg: float = 1e-4,
        budget_policy: str = "reference",
        budget_pct: float = 5.0,
        loss_weights=None,
        loss_scale: float | None = None,
        seed: int = 0,
    ):
        self.epochs = epochs
        self.eta0 = eta0
        self.lam_reg = lam_reg
        self.budget_policy = budget_policy
        self.budget_pct = budget_pct
        self.loss_weights = loss_weights
        self.loss_scale = loss_scale
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            eta0=self.eta0,
            lam_reg=self.lam_reg,
            budget_policy=self.budget_policy,
            budget_pct=self.budget_pct,
            loss_weights=self.loss_weights,
            loss_scale=self.loss_scale,
            seed=self.seed,
        )

    def fit(self, X: Corpus, y=None) -> "MixtureSummarizer":
        self.model_ = train(X, self._config())
        return self

    def predict(self, X: Sequence[tuple[Annotation, FeatureBundle]]) -> list[Summary]:
        check_is_fitted(self, "model_")
        out = []
        for a, f in X:
            budget = self.budget_pct / 100.0 * a.duration
            out.append(infer(self.model_, f, a, budget))
        return out

    def score(self, X: Corpus, y=None) -> float:
        """Mean MF1 of this model's summaries against each video's bank."""
        check_is_fitted(self, "model_")
        values = []
        for a, f, bank in X:
            budget = self.budget_pct / 100.0 * a.duration
            s = infer(self.model_, f, a, budget)
            if not s.indices:
                values.append(0.0)
                continue
            values.append(avg_max_f1(s, list(bank.summaries), a)[1])
        return float(np.mean(values))
