"""Relationship retrieval metrics: R@K, mean R@K and zero-shot R@K.

Every ordered pair of a scene is scored against every non-background
predicate by its softmax probability. Candidates are ranked per scene; a
ground-truth triplet counts as recalled at K when its (subject, object,
predicate) candidate sits in the top K. Under the graph constraint (the
default) each pair contributes only its best non-background predicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_KS = (20, 50, 100)


@dataclass
class ScenePrediction:
    """Predicate probabilities for all ordered pairs of one scene."""

    subj: np.ndarray
    obj: np.ndarray
    probs: np.ndarray
    # entity labels used for prediction; must match ground truth for a hit
    labels: np.ndarray


@dataclass
class MetricsReport:
    ks: tuple[int, ...]
    recall: dict[int, float]
    mean_recall: dict[int, float]
    zs_recall: dict[int, float | None]
    per_predicate_recall: dict[int, list[float | None]]
    config: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        top = max(self.ks)
        return {
            "k": {
                str(k): {
                    "recall": self.recall[k],
                    "mean_recall": self.mean_recall[k],
                    "zs_recall": self.zs_recall[k],
                    "per_predicate_recall": self.per_predicate_recall[k],
                }
                for k in self.ks
            },
            "per_predicate_recall": self.per_predicate_recall[top],
            "config": self.config,
            "history": self.history,
        }


def rank_candidates(probs: np.ndarray, graph_constraint: bool = True):
    """Rank (pair, predicate) candidates of one scene by probability.

    Returns ``(pair_idx, predicate, score)`` arrays in ranked order. Ties keep
    pair-major, predicate-minor order.
    """
    fg = probs[:, 1:]
    n_pairs = fg.shape[0]
    if graph_constraint:
        pair_idx = np.arange(n_pairs)
        pred = np.argmax(fg, axis=1) + 1
        score = fg[pair_idx, pred - 1]
    else:
        pair_idx = np.repeat(np.arange(n_pairs), fg.shape[1])
        pred = np.tile(np.arange(1, fg.shape[1] + 1), n_pairs)
        score = fg.ravel()
    order = np.argsort(-score, kind="stable")
    return pair_idx[order], pred[order], score[order]


def _safe_div(num: float, den: float):
    return num / den if den > 0 else None


def compute_metrics(
    predictions: Sequence[ScenePrediction],
    scenes: Sequence,
    train_triplets: set,
    num_rel_classes: int,
    ks: Sequence[int] = DEFAULT_KS,
    graph_constraint: bool = True,
    macro: bool = False,
) -> MetricsReport:
    """Aggregate recall metrics over scenes.

    ``train_triplets`` holds the (subject class, predicate, object class)
    combinations seen in training; ground truth outside it forms the
    zero-shot set. With ``macro=False`` recalls are summed over scenes before
    dividing; with ``macro=True`` they are averaged per scene.
    """
    if not scenes:
        raise ValueError("no scenes to evaluate")
    ks = tuple(sorted(int(k) for k in ks))
    n_pred = num_rel_classes - 1
    # hits/gts: [K, predicate] and zero-shot [K]
    hits = np.zeros((len(ks), n_pred))
    gts = np.zeros(n_pred)
    zs_hits = np.zeros(len(ks))
    zs_gt = 0
    scene_recalls = [[] for _ in ks]
    scene_zs = [[] for _ in ks]
    scene_pred = [[[] for _ in range(n_pred)] for _ in ks]

    for pred, scene in zip(predictions, scenes, strict=True):
        if not scene.triplets:
            continue
        pair_idx, pred_r, _ = rank_candidates(pred.probs, graph_constraint)
        rank_of = {}
        for rank, (p, r) in enumerate(zip(pair_idx.tolist(), pred_r.tolist())):
            rank_of[(int(pred.subj[p]), int(pred.obj[p]), r)] = rank
        s_hits = np.zeros((len(ks), n_pred))
        s_gts = np.zeros(n_pred)
        s_zs_hits = np.zeros(len(ks))
        s_zs = 0
        for s, o, r in scene.triplets:
            key = (int(scene.labels[s]), r, int(scene.labels[o]))
            zero_shot = key not in train_triplets
            labels_ok = pred.labels[s] == scene.labels[s] and pred.labels[o] == scene.labels[o]
            rank = rank_of.get((s, o, r)) if labels_ok else None
            s_gts[r - 1] += 1
            s_zs += zero_shot
            for ki, k in enumerate(ks):
                hit = rank is not None and rank < k
                s_hits[ki, r - 1] += hit
                if zero_shot:
                    s_zs_hits[ki] += hit
        hits += s_hits
        gts += s_gts
        zs_hits += s_zs_hits
        zs_gt += s_zs
        for ki in range(len(ks)):
            scene_recalls[ki].append(s_hits[ki].sum() / s_gts.sum())
            if s_zs:
                scene_zs[ki].append(s_zs_hits[ki] / s_zs)
            for r in np.flatnonzero(s_gts):
                scene_pred[ki][r].append(s_hits[ki, r] / s_gts[r])

    recall, mean_recall, zs_recall, per_pred = {}, {}, {}, {}
    for ki, k in enumerate(ks):
        if macro:
            recall[k] = float(np.mean(scene_recalls[ki])) if scene_recalls[ki] else 0.0
            zs_recall[k] = float(np.mean(scene_zs[ki])) if scene_zs[ki] else None
            per = [float(np.mean(v)) if v else None for v in scene_pred[ki]]
        else:
            recall[k] = float(hits[ki].sum() / gts.sum()) if gts.sum() else 0.0
            zs = _safe_div(zs_hits[ki], zs_gt)
            zs_recall[k] = None if zs is None else float(zs)
            per = [float(hits[ki, r] / gts[r]) if gts[r] else None for r in range(n_pred)]
        present = [v for v in per if v is not None]
        mean_recall[k] = float(np.mean(present)) if present else 0.0
        per_pred[k] = per
    return MetricsReport(
        ks=ks,
        recall=recall,
        mean_recall=mean_recall,
        zs_recall=zs_recall,
        per_predicate_recall=per_pred,
    )
