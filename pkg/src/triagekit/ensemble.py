"""Confidence-threshold ensembling, evaluation metrics, clustering baseline.

The ensemble trusts the supervised prediction only when its confidence is
strictly above the threshold delta; otherwise it falls back to the
unsupervised label. Delta defaults to 0.9 and a grid-search helper over
{0.5, 0.55, ..., 0.95} is provided for picking it on a validation set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CLASS_ORDER, ArtefactLabel, Prediction, highest_priority


@dataclass(frozen=True)
class EnsembleConfig:
    delta: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")


def ensemble_predict(sup: Prediction, unsup: Prediction,
                     config: EnsembleConfig | None = None) -> Prediction:
    """Supervised label iff its confidence is strictly above delta.

    A confidence exactly equal to delta selects the unsupervised side.
    """
    config = config or EnsembleConfig()
    if sup.source != "ffb":
        raise ValueError(f"supervised prediction must come from ffb, got {sup.source!r}")
    if unsup.source != "dkg":
        raise ValueError(f"unsupervised prediction must come from dkg, got {unsup.source!r}")
    winner = sup if sup.confidence > config.delta else unsup
    return Prediction(label=winner.label, confidence=winner.confidence, source="ensemble")


@dataclass(frozen=True)
class ClassMetrics:
    precision: float | None
    recall: float | None
    f1: float | None
    support: int


@dataclass(frozen=True)
class EvalReport:
    """Per-class one-vs-rest metrics plus aggregates.

    ``macro_avg_precision`` is the unweighted mean over classes with
    defined precision (``weighted_avg_precision`` is the support-weighted
    alternative). ``distribution`` holds gold class percentages.
    """

    per_class: dict
    macro_avg_precision: float | None
    weighted_avg_precision: float | None
    distribution: dict
    total: int

    def as_record(self) -> dict:
        return {
            "per_class": {
                label.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for label, m in self.per_class.items()
            },
            "macro_avg_precision": self.macro_avg_precision,
            "weighted_avg_precision": self.weighted_avg_precision,
            "distribution": {label.value: pct for label, pct in self.distribution.items()},
            "total": self.total,
        }

    def as_table(self) -> str:
        def fmt(value):
            return f"{value:.3f}" if value is not None else "-"

        lines = [f"{'class':<12}{'P':>8}{'R':>8}{'F1':>8}{'support':>9}{'gold %':>8}"]
        for label in CLASS_ORDER:
            m = self.per_class[label]
            lines.append(
                f"{label.value:<12}{fmt(m.precision):>8}{fmt(m.recall):>8}"
                f"{fmt(m.f1):>8}{m.support:>9}{self.distribution[label]:>8.1f}"
            )
        macro = self.macro_avg_precision
        lines.append(f"macro avg precision: {macro:.3f}" if macro is not None
                     else "macro avg precision: -")
        return "\n".join(lines)


def evaluate_artefacts(predicted, gold) -> EvalReport:
    """One-vs-rest precision/recall/F1 per class over parallel label lists."""
    predicted = list(predicted)
    gold = list(gold)
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predicted vs {len(gold)} gold")
    if not gold:
        raise ValueError("empty evaluation input")
    per_class = {}
    precisions = []
    weighted = []
    for label in CLASS_ORDER:
        tp = sum(1 for p, g in zip(predicted, gold) if p == label and g == label)
        fp = sum(1 for p, g in zip(predicted, gold) if p == label and g != label)
        fn = sum(1 for p, g in zip(predicted, gold) if p != label and g == label)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else None
        recall = tp / support if support > 0 else None
        if precision is None or recall is None:
            f1 = None
        elif precision + recall == 0:
            f1 = 0.0
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_class[label] = ClassMetrics(precision=precision, recall=recall, f1=f1,
                                        support=support)
        if precision is not None:
            precisions.append(precision)
            weighted.append((precision, support))
    macro = sum(precisions) / len(precisions) if precisions else None
    weight_total = sum(s for _, s in weighted)
    weighted_avg = (sum(p * s for p, s in weighted) / weight_total
                    if weight_total > 0 else None)
    distribution = {
        label: 100.0 * sum(1 for g in gold if g == label) / len(gold)
        for label in CLASS_ORDER
    }
    return EvalReport(
        per_class=per_class,
        macro_avg_precision=macro,
        weighted_avg_precision=weighted_avg,
        distribution=distribution,
        total=len(gold),
    )


def grid_search_delta(pairs, gold, deltas=None) -> tuple[float, float]:
    """Pick delta maximizing macro average precision on a validation set.

    ``pairs`` holds (supervised, unsupervised) predictions aligned with
    ``gold``. Ties go to the smallest delta. Returns (delta, score).
    """
    if deltas is None:
        deltas = [round(0.5 + 0.05 * i, 2) for i in range(10)]
    best = None
    for delta in deltas:
        config = EnsembleConfig(delta=delta)
        labels = [ensemble_predict(s, u, config).label for s, u in pairs]
        score = evaluate_artefacts(labels, gold).macro_avg_precision or 0.0
        if best is None or score > best[1]:
            best = (delta, score)
    return best


# --- TF-IDF + k-means baseline -------------------------------------------

def tfidf_matrix(token_lists) -> np.ndarray:
    """Log-scaled tf, smoothed idf, L2-normalized rows.

    tf term: 1 + ln(count); idf term: ln((1 + N) / (1 + df)) + 1.
    """
    vocabulary = sorted({t for tokens in token_lists for t in tokens})
    index = {t: i for i, t in enumerate(vocabulary)}
    n_docs = len(token_lists)
    matrix = np.zeros((n_docs, len(vocabulary)), dtype=np.float64)
    df = np.zeros(len(vocabulary), dtype=np.float64)
    for row, tokens in enumerate(token_lists):
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, count in counts.items():
            matrix[row, index[token]] = 1.0 + np.log(count)
            df[index[token]] += 1
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    matrix *= idf
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    np.divide(matrix, norms, out=matrix, where=norms > 0)
    return matrix


def _kmeans_pp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    centroids = np.empty((k, points.shape[1]), dtype=points.dtype)
    first = rng.integers(len(points))
    centroids[0] = points[first]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total == 0:
            centroids[i] = points[rng.integers(len(points))]
            continue
        target = rng.random() * total
        chosen = int(np.searchsorted(np.cumsum(closest), target))
        chosen = min(chosen, len(points) - 1)
        centroids[i] = points[chosen]
        closest = np.minimum(closest, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def lloyd_kmeans(points: np.ndarray, k: int, seed: int,
                 tol: float = 1e-6, max_iter: int = 100) -> np.ndarray:
    """Seeded k-means++ init, Lloyd's iterations until centroid movement
    drops below ``tol``. Returns cluster assignments; ties in distance go
    to the lowest centroid index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = len(np.unique(points, axis=0))
    if k > distinct:
        raise ValueError(f"k={k} exceeds {distinct} distinct vectors")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    assignments = np.zeros(len(points), dtype=np.int64)
    for _ in range(max_iter):
        distances = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = distances.argmin(axis=1)
        moved = 0.0
        for c in range(k):
            members = points[assignments == c]
            if len(members) == 0:
                continue
            new_centroid = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new_centroid - centroids[c])))
            centroids[c] = new_centroid
        if moved < tol:
            break
    return assignments


def kmeans_baseline(token_lists, gold, k: int, seed: int = 42):
    """Cluster TF-IDF vectors and label each cluster by gold majority
    (ties by label priority). Returns (predicted labels, EvalReport)."""
    gold = list(gold)
    if len(token_lists) != len(gold) or not gold:
        raise ValueError("token lists and gold labels must align and be nonempty")
    matrix = tfidf_matrix(token_lists)
    assignments = lloyd_kmeans(matrix, k, seed)
    predicted: list[ArtefactLabel] = [ArtefactLabel.CHITCHAT] * len(gold)
    for cluster in range(k):
        members = [i for i in range(len(gold)) if assignments[i] == cluster]
        if not members:
            continue
        counts: dict[ArtefactLabel, int] = {}
        for i in members:
            counts[gold[i]] = counts.get(gold[i], 0) + 1
        top = max(counts.values())
        label = highest_priority([l for l, c in counts.items() if c == top])
        for i in members:
            predicted[i] = label
    return predicted, evaluate_artefacts(predicted, gold)
