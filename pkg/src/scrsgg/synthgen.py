"""Seeded synthetic long-tailed scene-graph corpora.

A corpus is built from a latent :class:`GroundTruthModel`:

* one Gaussian prototype per object class; entity features are the prototype
  plus isotropic noise;
* one predicate distribution per ordered (subject class, object class) pair.
  The conditionals come from Sinkhorn-balancing a random, additively
  structured kernel so that, with uniformly drawn entity classes, the
  non-background predicate marginal is exactly Zipf.

Each ordered entity pair is annotated with probability ``annotation_rate``;
all other pairs are background (predicate 0). Every scene draws from its own
random stream derived from ``(seed, scene index)``, so scenes can be produced
in any order with identical results.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.7, 0.1, 0.2)
MAX_RESEEDS = 16
_SINKHORN_TOL = 1e-14
_SINKHORN_MAX_ITER = 10_000
# stream tags for SeedSequence spawn keys
_TRUTH_STREAM, _SCENE_STREAM, _PROTO_STREAM = 0, 1, 2


@dataclass
class DatasetConfig:
    num_scenes: int = 2000
    entities_per_scene: tuple[int, int] = (4, 10)
    num_obj_classes: int = 20
    num_rel_classes: int = 31  # background included
    zipf_exponent: float = 1.5
    annotation_rate: float = 0.15
    feature_dim: int = 16
    feature_noise_sigma: float = 1.0
    seed: int = 42
    # strength of pair-conditional skew in the latent predicate kernel
    pair_skew: float = 1.5

    def __post_init__(self):
        self.entities_per_scene = tuple(int(v) for v in self.entities_per_scene)

    def validate(self) -> None:
        lo, hi = self.entities_per_scene
        if self.num_scenes < 1:
            raise ValueError("num_scenes must be at least 1")
        if hi < 2:
            raise ValueError("max entities per scene must be at least 2 to form a pair")
        if lo < 1 or lo > hi:
            raise ValueError(f"invalid entity range {self.entities_per_scene}")
        if self.num_obj_classes < 2 or self.num_rel_classes < 2:
            raise ValueError("vocabulary sizes must be at least 2")
        if not 0 < self.annotation_rate <= 1:
            raise ValueError("annotation_rate must lie in (0, 1]")
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be nonnegative")
        if self.feature_dim < 1 or self.feature_noise_sigma < 0:
            raise ValueError("invalid feature settings")

    @property
    def num_predicates(self) -> int:
        return self.num_rel_classes - 1

    def to_json(self) -> dict:
        d = asdict(self)
        d["entities_per_scene"] = list(self.entities_per_scene)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "DatasetConfig":
        return cls(**data)


def reference_config(**overrides) -> DatasetConfig:
    """The reference corpus: 2000 scenes, 30 predicates, Zipf 1.5, seed 42."""
    cfg = DatasetConfig()
    for k, v in overrides.items():
        setattr(cfg, k, v)
    cfg.__post_init__()
    return cfg


@dataclass(eq=False)
class SceneRecord:
    """One scene: entity labels and features plus annotated (subj, obj, predicate) triplets."""

    labels: np.ndarray
    features: np.ndarray
    triplets: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1 and self.labels.size == 0:
            self.features = self.features.reshape(0, 0)
        self.triplets = [(int(s), int(o), int(r)) for s, o, r in self.triplets]

    @property
    def num_entities(self) -> int:
        return int(self.labels.size)

    @property
    def num_pairs(self) -> int:
        n = self.num_entities
        return n * (n - 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SceneRecord):
            return NotImplemented
        return (
            np.array_equal(self.labels, other.labels)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and self.triplets == other.triplets
        )

    def relation_matrix(self) -> np.ndarray:
        """[n, n] predicate matrix; background everywhere not annotated."""
        rel = np.zeros((self.num_entities, self.num_entities), dtype=np.int64)
        for s, o, r in self.triplets:
            rel[s, o] = r
        return rel

    def validate(self, num_obj_classes: int | None = None, num_rel_classes: int | None = None) -> None:
        n = self.num_entities
        if self.features.shape[0] != n:
            raise ValueError("feature rows do not match entity count")
        if num_obj_classes is not None and (np.any(self.labels < 0) or np.any(self.labels >= num_obj_classes)):
            raise ValueError("object label out of range")
        seen = set()
        for s, o, r in self.triplets:
            if not (0 <= s < n and 0 <= o < n):
                raise ValueError(f"triplet ({s}, {o}, {r}) references a missing entity")
            if s == o:
                raise ValueError(f"triplet ({s}, {o}, {r}) relates an entity to itself")
            if r < 1 or (num_rel_classes is not None and r >= num_rel_classes):
                raise ValueError(f"predicate {r} out of range")
            if (s, o) in seen:
                raise ValueError(f"duplicate annotation for pair ({s}, {o})")
            seen.add((s, o))

    def to_json(self) -> dict:
        return {
            "entities": [
                {"c": int(c), "f": f.tolist()} for c, f in zip(self.labels, self.features)
            ],
            "triplets": [list(t) for t in self.triplets],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SceneRecord":
        ents = data["entities"]
        labels = [e["c"] for e in ents]
        feats = [e["f"] for e in ents]
        features = np.asarray(feats, dtype=np.float64) if feats else np.zeros((0, 0))
        return cls(labels=labels, features=features, triplets=[tuple(t) for t in data["triplets"]])


@dataclass(eq=False)
class GroundTruthModel:
    prototypes: np.ndarray
    # [C_obj, C_obj, C_rel]; column 0 (background) is always zero
    conditionals: np.ndarray

    def to_json(self) -> dict:
        return {"prototypes": self.prototypes.tolist(), "conditionals": self.conditionals.tolist()}


def zipf_pmf(num_classes: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, num_classes + 1, dtype=np.float64)
    w = ranks ** (-exponent)
    return w / w.sum()


def sinkhorn(kernel: np.ndarray, row_sums: np.ndarray, col_sums: np.ndarray) -> np.ndarray:
    """Scale a positive matrix so its row and column sums match the targets."""
    t = kernel.copy()
    for _ in range(_SINKHORN_MAX_ITER):
        t *= (row_sums / t.sum(axis=1))[:, None]
        t *= (col_sums / t.sum(axis=0))[None, :]
        if np.max(np.abs(t.sum(axis=1) - row_sums)) < _SINKHORN_TOL:
            break
    return t


def _seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)


def build_ground_truth(config: DatasetConfig, attempt: int = 0) -> GroundTruthModel:
    c_obj, n_pred = config.num_obj_classes, config.num_predicates
    proto_rng = np.random.default_rng(_seed_sequence(config.seed, _PROTO_STREAM))
    prototypes = proto_rng.normal(0.0, 1.0, size=(c_obj, config.feature_dim))

    rng = np.random.default_rng(_seed_sequence(config.seed, _TRUTH_STREAM, attempt))
    subj_pref = rng.normal(size=(c_obj, n_pred))
    obj_pref = rng.normal(size=(c_obj, n_pred))
    noise = rng.normal(size=(c_obj, c_obj, n_pred))
    logits = subj_pref[:, None, :] + obj_pref[None, :, :] + 0.5 * noise
    kernel = np.exp(config.pair_skew * (logits - logits.max())).reshape(c_obj * c_obj, n_pred)

    pair_mass = np.full(c_obj * c_obj, 1.0 / (c_obj * c_obj))
    joint = sinkhorn(kernel, pair_mass, zipf_pmf(n_pred, config.zipf_exponent))
    cond = joint / joint.sum(axis=1, keepdims=True)
    conditionals = np.zeros((c_obj, c_obj, config.num_rel_classes))
    conditionals[:, :, 1:] = cond.reshape(c_obj, c_obj, n_pred)
    return GroundTruthModel(prototypes=prototypes, conditionals=conditionals)


def sample_scene(config: DatasetConfig, truth: GroundTruthModel, index: int, attempt: int = 0) -> SceneRecord:
    rng = np.random.default_rng(_seed_sequence(config.seed, _SCENE_STREAM, attempt, index))
    lo, hi = config.entities_per_scene
    n = int(rng.integers(lo, hi + 1))
    labels = rng.integers(0, config.num_obj_classes, size=n)
    noise = rng.normal(size=(n, config.feature_dim))
    features = truth.prototypes[labels] + config.feature_noise_sigma * noise

    subj, obj = np.nonzero(~np.eye(n, dtype=bool))
    annotated = rng.random(subj.size) < config.annotation_rate
    u = rng.random(subj.size)
    triplets = []
    for k in np.flatnonzero(annotated):
        s, o = int(subj[k]), int(obj[k])
        cdf = np.cumsum(truth.conditionals[labels[s], labels[o]])
        r = int(np.searchsorted(cdf, u[k] * cdf[-1], side="right"))
        triplets.append((s, o, min(max(r, 1), config.num_rel_classes - 1)))
    return SceneRecord(labels=labels, features=features, triplets=triplets)


def split_sizes(num_scenes: int) -> tuple[int, int, int]:
    n_train = int(round(SPLIT_FRACTIONS[0] * num_scenes))
    n_val = int(round(SPLIT_FRACTIONS[1] * num_scenes))
    return n_train, n_val, num_scenes - n_train - n_val


def triplet_classes(scenes: Iterable[SceneRecord]) -> set[tuple[int, int, int]]:
    """Set of (subject class, predicate, object class) combinations present."""
    out = set()
    for sc in scenes:
        for s, o, r in sc.triplets:
            out.add((int(sc.labels[s]), r, int(sc.labels[o])))
    return out


def has_zero_shot(train: Sequence[SceneRecord], test: Sequence[SceneRecord]) -> bool:
    return bool(triplet_classes(test) - triplet_classes(train))


def sample_dataset(config: DatasetConfig):
    """Generate ``(train, val, test, truth)`` for a config.

    If the test split would contain no triplet class unseen in training, the
    pair-conditional tables are redrawn (up to ``MAX_RESEEDS`` times).
    """
    config.validate()
    n_train, n_val, _ = split_sizes(config.num_scenes)
    for attempt in range(MAX_RESEEDS):
        truth = build_ground_truth(config, attempt)
        scenes = [sample_scene(config, truth, i, attempt) for i in range(config.num_scenes)]
        train, val, test = scenes[:n_train], scenes[n_train:n_train + n_val], scenes[n_train + n_val:]
        if has_zero_shot(train, test):
            break
        logger.info("attempt %d has no zero-shot test triplet; reseeding", attempt)
    else:
        logger.warning("no zero-shot test triplet after %d attempts", MAX_RESEEDS)
    return train, val, test, truth


def scene_to_line(scene: SceneRecord) -> str:
    return json.dumps(scene.to_json(), separators=(",", ":"))


def write_jsonl(scenes: Iterable[SceneRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sc in scenes:
            fh.write(scene_to_line(sc))
            fh.write("\n")


def read_jsonl(path, num_obj_classes: int | None = None, num_rel_classes: int | None = None) -> list[SceneRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    scenes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                scene = SceneRecord.from_json(json.loads(line))
                scene.validate(num_obj_classes, num_rel_classes)
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed scene: {exc}") from exc
            scenes.append(scene)
    return scenes


def dataset_stats(scenes: Sequence[SceneRecord], num_rel_classes: int | None = None) -> dict:
    """Per-predicate pair counts (background at index 0) and the background share."""
    if not scenes:
        raise ValueError("empty corpus")
    if num_rel_classes is None:
        num_rel_classes = 1 + max((r for sc in scenes for _, _, r in sc.triplets), default=0)
    counts = np.zeros(num_rel_classes, dtype=np.int64)
    total = 0
    for sc in scenes:
        total += sc.num_pairs
        for _, _, r in sc.triplets:
            counts[r] += 1
    counts[0] = total - counts[1:].sum()
    share = float(counts[0] / total) if total else 1.0
    return {"counts": counts.tolist(), "background_share": share}
