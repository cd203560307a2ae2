"""Non-visual predicate priors: the FREQ count table and label-embedding pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_EPSILON = 1e-3
LOGIT_CLAMP = 30.0
BACKGROUND = 0


@dataclass(eq=False)
class FreqTable:
    """Counts of (subject class, object class, predicate) over ordered training pairs.

    Every ordered pair of distinct entities in a scene contributes one count;
    pairs without an annotation count as background (predicate 0).
    """

    counts: np.ndarray
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 3 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError(f"counts must be [C_obj, C_obj, C_rel], got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if not self.epsilon > 0:
            raise ValueError("smoothing epsilon must be positive")

    @property
    def num_obj_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def num_rel_classes(self) -> int:
        return self.counts.shape[2]

    def probabilities(self) -> np.ndarray:
        """Smoothed p(predicate | subject class, object class), shape [C_obj, C_obj, C_rel]."""
        c = self.counts.astype(np.float64)
        denom = c.sum(axis=2, keepdims=True) + self.epsilon * self.num_rel_classes
        return (c + self.epsilon) / denom

    def logit_table(self) -> np.ndarray:
        """``freq_logits`` for every class pair at once (cached; treat counts as frozen)."""
        cached = self.__dict__.get("_logits")
        if cached is None:
            cached = _smoothed_logits(self.counts, self.epsilon)
            self.__dict__["_logits"] = cached
        return cached

    def to_json(self) -> dict:
        return {
            "num_obj_classes": self.num_obj_classes,
            "num_rel_classes": self.num_rel_classes,
            "epsilon": self.epsilon,
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "FreqTable":
        counts = np.asarray(data["counts"], dtype=np.int64)
        expected = (data["num_obj_classes"], data["num_obj_classes"], data["num_rel_classes"])
        if counts.shape != expected:
            raise ValueError(f"counts shape {counts.shape} does not match header {expected}")
        return cls(counts=counts, epsilon=float(data["epsilon"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FreqTable":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def build_freq_table(
    train_scenes: Iterable,
    vocab_sizes: tuple[int, int],
    epsilon: float = DEFAULT_EPSILON,
) -> FreqTable:
    num_obj, num_rel = vocab_sizes
    counts = np.zeros((num_obj, num_obj, num_rel), dtype=np.int64)
    for k, scene in enumerate(train_scenes):
        labels = np.asarray(scene.labels, dtype=np.int64)
        n = labels.size
        if np.any(labels < 0) or np.any(labels >= num_obj):
            raise ValueError(f"scene {k}: object label out of range [0, {num_obj})")
        rel = np.zeros((n, n), dtype=np.int64)
        for s, o, r in scene.triplets:
            if not 1 <= r < num_rel:
                raise ValueError(f"scene {k}: predicate {r} out of range [1, {num_rel})")
            rel[s, o] = r
        subj, obj = np.nonzero(~np.eye(n, dtype=bool))
        np.add.at(counts, (labels[subj], labels[obj], rel[subj, obj]), 1)
    return FreqTable(counts=counts, epsilon=epsilon)


def freq_logits(table: FreqTable, subj: int, obj: int) -> np.ndarray:
    """Clamped logit of the smoothed predicate distribution for one class pair."""
    num_obj = table.num_obj_classes
    if not (0 <= subj < num_obj and 0 <= obj < num_obj):
        raise IndexError(f"class pair ({subj}, {obj}) out of range [0, {num_obj})")
    return _smoothed_logits(table.counts[subj, obj], table.epsilon)


def _smoothed_logits(counts: np.ndarray, epsilon: float) -> np.ndarray:
    # odds of class r = (c_r + eps) / (sum of the other counts + (C - 1) eps)
    n_rel = counts.shape[-1]
    others = (counts.sum(axis=-1, keepdims=True) - counts).astype(np.float64)
    logit = np.log(counts + epsilon) - np.log(others + (n_rel - 1) * epsilon)
    return np.clip(logit, -LOGIT_CLAMP, LOGIT_CLAMP)


def init_embedding_table(num_obj_classes: int, dim: int = 16, rng=None, scale: float = 0.1) -> np.ndarray:
    if rng is None:
        return np.zeros((num_obj_classes, dim))
    return rng.normal(0.0, scale, size=(num_obj_classes, dim))


def pair_embedding(emb: np.ndarray, subj: int, obj: int) -> np.ndarray:
    n = emb.shape[0]
    if not (0 <= subj < n and 0 <= obj < n):
        raise IndexError(f"class pair ({subj}, {obj}) out of range [0, {n})")
    return np.concatenate([emb[subj], emb[obj]])


def pair_embeddings(emb: np.ndarray, subj: Sequence[int], obj: Sequence[int]) -> np.ndarray:
    """Row-wise ``pair_embedding`` for index vectors."""
    return np.concatenate([emb[np.asarray(subj)], emb[np.asarray(obj)]], axis=1)
