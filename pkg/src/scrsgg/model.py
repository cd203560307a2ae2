"""Toy predicate predictor and SCR-weighted losses with analytic gradients.

The predictor fuses three predicate logit sources by element-wise sum::

    R_hat = R_vis + sigmoid(R_freq) + R_emb

with ``R_vis`` an affine map of concatenated entity features, ``R_freq`` the
FREQ prior logit for the (subject, object) label pair and ``R_emb`` an affine
map of the concatenated label embeddings. Objects are classified by one
affine layer over entity features.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from scrsgg import scr
from scrsgg.numerics import finite_diff_gradient, log_softmax, relative_error, softmax, stable_sigmoid
from scrsgg.priors import FreqTable, pair_embeddings


class LossMode(enum.Enum):
    CE = "ce"
    SCR = "scr"

    @classmethod
    def parse(cls, value) -> "LossMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


PARAM_BLOCKS = ("W_obj", "b_obj", "W_vis", "b_vis", "W_emb", "b_emb", "embedding")


@dataclass(eq=False)
class ModelParams:
    W_obj: np.ndarray
    b_obj: np.ndarray
    W_vis: np.ndarray
    b_vis: np.ndarray
    W_emb: np.ndarray
    b_emb: np.ndarray
    embedding: np.ndarray
    seed: int | None = None

    @classmethod
    def init(
        cls,
        feature_dim: int,
        num_obj_classes: int,
        num_rel_classes: int,
        emb_dim: int = 16,
        seed: int = 0,
        scale: float = 0.01,
        emb_scale: float = 0.1,
    ) -> "ModelParams":
        rng = np.random.default_rng(seed)
        return cls(
            W_obj=rng.normal(0.0, scale, size=(feature_dim, num_obj_classes)),
            b_obj=np.zeros(num_obj_classes),
            W_vis=rng.normal(0.0, scale, size=(2 * feature_dim, num_rel_classes)),
            b_vis=np.zeros(num_rel_classes),
            W_emb=rng.normal(0.0, scale, size=(2 * emb_dim, num_rel_classes)),
            b_emb=np.zeros(num_rel_classes),
            embedding=rng.normal(0.0, emb_scale, size=(num_obj_classes, emb_dim)),
            seed=seed,
        )

    @classmethod
    def zeros_like(cls, other: "ModelParams") -> "ModelParams":
        return cls(**{k: np.zeros_like(getattr(other, k)) for k in PARAM_BLOCKS}, seed=other.seed)

    @property
    def feature_dim(self) -> int:
        return self.W_obj.shape[0]

    @property
    def num_obj_classes(self) -> int:
        return self.W_obj.shape[1]

    @property
    def num_rel_classes(self) -> int:
        return self.W_vis.shape[1]

    @property
    def emb_dim(self) -> int:
        return self.embedding.shape[1]

    def blocks(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_BLOCKS}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.blocks().items()}, seed=self.seed)

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.blocks().values()])

    def unflatten(self, vec: np.ndarray) -> "ModelParams":
        out, pos = {}, 0
        for k, v in self.blocks().items():
            out[k] = np.asarray(vec[pos:pos + v.size], dtype=np.float64).reshape(v.shape).copy()
            pos += v.size
        return ModelParams(**out, seed=self.seed)

    def sgd_step(self, grads: "ModelParams", lr: float) -> None:
        for k in PARAM_BLOCKS:
            getattr(self, k)[...] -= lr * getattr(grads, k)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.blocks().values())

    def to_json(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "num_obj_classes": self.num_obj_classes,
            "num_rel_classes": self.num_rel_classes,
            "emb_dim": self.emb_dim,
            "seed": self.seed,
            "params": {k: v.tolist() for k, v in self.blocks().items()},
        }

    @classmethod
    def from_json(cls, data: dict) -> "ModelParams":
        arrays = {k: np.asarray(data["params"][k], dtype=np.float64) for k in PARAM_BLOCKS}
        p = cls(**arrays, seed=data.get("seed"))
        dims = (p.feature_dim, p.num_obj_classes, p.num_rel_classes, p.emb_dim)
        header = (data["feature_dim"], data["num_obj_classes"], data["num_rel_classes"], data["emb_dim"])
        if dims != header:
            raise ValueError(f"checkpoint arrays {dims} disagree with header {header}")
        return p

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelParams":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")))


@dataclass
class ObjectBatch:
    features: np.ndarray
    labels: np.ndarray


@dataclass
class PairBatch:
    """Ordered subject-object pairs. ``subj_labels``/``obj_labels`` feed the priors."""

    pair_features: np.ndarray
    subj_labels: np.ndarray
    obj_labels: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.subj_labels = np.asarray(self.subj_labels, dtype=np.int64)
        self.obj_labels = np.asarray(self.obj_labels, dtype=np.int64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        n = self.pair_features.shape[0]
        if not (len(self.subj_labels) == len(self.obj_labels) == len(self.targets) == n):
            raise ValueError("pair batch vectors must share the same row count")

    def __len__(self) -> int:
        return self.pair_features.shape[0]


@dataclass
class LossBreakdown:
    obj_loss: float
    rel_loss: float
    total: float
    grads: ModelParams
    diagnostics: scr.SkewDiagnostics


def scene_pairs(scene, labels: np.ndarray | None = None):
    """All ordered pairs of a scene: (subject idx, object idx, features, targets)."""
    n = scene.num_entities
    subj, obj = np.nonzero(~np.eye(n, dtype=bool))
    feats = np.concatenate([scene.features[subj], scene.features[obj]], axis=1)
    targets = scene.relation_matrix()[subj, obj]
    return subj, obj, feats, targets


def build_batches(scenes: Sequence, predicted_labels: Sequence[np.ndarray] | None = None):
    """Stack scenes into an :class:`ObjectBatch` and a :class:`PairBatch`.

    ``predicted_labels`` (one array per scene) replaces the ground-truth labels
    fed to the priors, as in scene-graph classification.
    """
    feats, labels, pf, sl, ol, tg = [], [], [], [], [], []
    for k, sc in enumerate(scenes):
        if sc.num_entities == 0:
            continue
        feats.append(sc.features)
        labels.append(sc.labels)
        lab = sc.labels if predicted_labels is None else np.asarray(predicted_labels[k])
        subj, obj, f, t = scene_pairs(sc)
        pf.append(f)
        sl.append(lab[subj])
        ol.append(lab[obj])
        tg.append(t)
    if not feats:
        raise ValueError("empty batch")
    obj_batch = ObjectBatch(features=np.concatenate(feats), labels=np.concatenate(labels))
    width = 2 * feats[0].shape[1]
    pair_batch = PairBatch(
        pair_features=np.concatenate(pf) if pf else np.zeros((0, width)),
        subj_labels=np.concatenate(sl),
        obj_labels=np.concatenate(ol),
        targets=np.concatenate(tg),
    )
    return obj_batch, pair_batch


def object_logits(params: ModelParams, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.feature_dim:
        raise ValueError(f"feature width {features.shape[-1]} != {params.feature_dim}")
    return features @ params.W_obj + params.b_obj


def predicate_logits(params: ModelParams, batch: PairBatch, freq: FreqTable):
    """Return ``(R_hat, R_freq_raw, R_emb)`` for every pair in the batch."""
    if freq.num_rel_classes != params.num_rel_classes or freq.num_obj_classes != params.num_obj_classes:
        raise ValueError("FREQ table vocabularies do not match the model")
    if batch.pair_features.shape[1] != 2 * params.feature_dim:
        raise ValueError("pair feature width does not match the model")
    r_vis = batch.pair_features @ params.W_vis + params.b_vis
    r_freq_raw = freq.logit_table()[batch.subj_labels, batch.obj_labels]
    l_emb = pair_embeddings(params.embedding, batch.subj_labels, batch.obj_labels)
    r_emb = l_emb @ params.W_emb + params.b_emb
    r_hat = r_vis + stable_sigmoid(r_freq_raw) + r_emb
    return r_hat, r_freq_raw, r_emb


def object_loss(obj_logits: np.ndarray, obj_targets) -> tuple[float, np.ndarray]:
    obj_targets = np.asarray(obj_targets, dtype=np.int64)
    n = obj_logits.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    logp = log_softmax(obj_logits)
    rows = np.arange(n)
    loss = float(-logp[rows, obj_targets].mean())
    grad = np.exp(logp)
    grad[rows, obj_targets] -= 1.0
    return loss, grad / n


def relation_loss(r_hat: np.ndarray, targets, diagnostics: scr.SkewDiagnostics | None = None):
    """Weighted cross-entropy normalized by the total sample weight.

    Weights come from ``diagnostics`` and are treated as constants; ``None``
    means every weight is one.
    """
    targets = np.asarray(targets, dtype=np.int64)
    n = r_hat.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    w = np.ones(n) if diagnostics is None else np.asarray(diagnostics.weight, dtype=np.float64)
    if w.shape != targets.shape or targets.shape != (n,):
        raise ValueError("weight/target length mismatch")
    gamma = 1.0 / w.sum()
    logp = log_softmax(r_hat)
    rows = np.arange(n)
    loss = float(gamma * np.sum(w * -logp[rows, targets]))
    grad = np.exp(logp)
    grad[rows, targets] -= 1.0
    grad *= (gamma * w)[:, None]
    return loss, grad


def sample_diagnostics(r_freq_raw, r_emb, targets, config) -> scr.SkewDiagnostics:
    if LossMode.parse(config.loss_mode) is LossMode.CE:
        return scr.uniform_diagnostics(len(targets), r_freq_raw.shape[1])
    skew = scr.skew_logits(r_freq_raw, r_emb, config.skew_variant)
    return scr.compute_sample_weights(skew, targets, config.delta, config.lambda_skew)


def total_loss(
    params: ModelParams,
    obj_batch: ObjectBatch | None,
    pair_batch: PairBatch,
    freq: FreqTable,
    config,
    diagnostics: scr.SkewDiagnostics | None = None,
) -> LossBreakdown:
    """Object loss plus SCR relation loss, with gradients for every parameter block.

    ``obj_batch=None`` switches the object loss off (predicate classification).
    Passing ``diagnostics`` freezes the sample weights instead of recomputing
    them, which is what a finite-difference check needs.
    """
    grads = ModelParams.zeros_like(params)

    obj_loss = 0.0
    if obj_batch is not None:
        logits = object_logits(params, obj_batch.features)
        obj_loss, g_obj = object_loss(logits, obj_batch.labels)
        grads.W_obj = obj_batch.features.T @ g_obj
        grads.b_obj = g_obj.sum(axis=0)

    r_hat, r_freq_raw, r_emb = predicate_logits(params, pair_batch, freq)
    if diagnostics is None:
        diagnostics = sample_diagnostics(r_freq_raw, r_emb, pair_batch.targets, config)
    rel_loss, g_rel = relation_loss(r_hat, pair_batch.targets, diagnostics)

    grads.W_vis = pair_batch.pair_features.T @ g_rel
    grads.b_vis = g_rel.sum(axis=0)
    l_emb = pair_embeddings(params.embedding, pair_batch.subj_labels, pair_batch.obj_labels)
    grads.W_emb = l_emb.T @ g_rel
    grads.b_emb = g_rel.sum(axis=0)
    g_l = g_rel @ params.W_emb.T
    d = params.emb_dim
    np.add.at(grads.embedding, pair_batch.subj_labels, g_l[:, :d])
    np.add.at(grads.embedding, pair_batch.obj_labels, g_l[:, d:])

    return LossBreakdown(
        obj_loss=obj_loss,
        rel_loss=rel_loss,
        total=obj_loss + rel_loss,
        grads=grads,
        diagnostics=diagnostics,
    )


def predict_scene(params: ModelParams, scene, freq: FreqTable, use_gt_labels: bool = True):
    """Predicate probabilities for every ordered pair of one scene.

    Returns ``(subj_idx, obj_idx, probs, labels)`` where ``labels`` are the
    entity labels that fed the priors.
    """
    labels = scene.labels if use_gt_labels else np.argmax(object_logits(params, scene.features), axis=1)
    subj, obj, feats, targets = scene_pairs(scene)
    batch = PairBatch(feats, labels[subj], labels[obj], targets)
    r_hat, _, _ = predicate_logits(params, batch, freq)
    return subj, obj, softmax(r_hat), labels


def gradient_check(
    params: ModelParams,
    obj_batch: ObjectBatch | None,
    pair_batch: PairBatch,
    freq: FreqTable,
    config,
    h: float = 1e-5,
) -> dict[str, float]:
    """Per-block max relative error between analytic and central-difference gradients.

    The SCR weights are computed once at ``params`` and held fixed, matching
    the analytic gradient, which does not flow through the weighting path.
    """
    base = total_loss(params, obj_batch, pair_batch, freq, config)
    frozen = base.diagnostics

    def f(vec):
        return total_loss(params.unflatten(vec), obj_batch, pair_batch, freq, config, frozen).total

    numeric = params.unflatten(finite_diff_gradient(f, params.flatten(), h))
    return {
        k: relative_error(getattr(base.grads, k), getattr(numeric, k)) for k in PARAM_BLOCKS
    }


@dataclass
class _CheckConfig:
    loss_mode: str = "scr"
    skew_variant: str = "freq-emb"
    delta: float = scr.DEFAULT_DELTA
    lambda_skew: float = scr.DEFAULT_LAMBDA_SKEW


def random_instance(seed: int, num_scenes: int = 3):
    """A random micro-batch with random parameters, for gradient checking.

    Returns ``(params, obj_batch, pair_batch, freq, config)``. The object loss
    is active so every parameter block receives a gradient.
    """
    from scrsgg.priors import build_freq_table
    from scrsgg.synthgen import DatasetConfig, build_ground_truth, sample_scene

    rng = np.random.default_rng(seed)
    cfg = DatasetConfig(
        num_scenes=num_scenes,
        entities_per_scene=(2, 5),
        num_obj_classes=int(rng.integers(3, 7)),
        num_rel_classes=int(rng.integers(3, 8)),
        annotation_rate=0.4,
        feature_dim=int(rng.integers(2, 6)),
        seed=seed,
    )
    truth = build_ground_truth(cfg)
    scenes = [sample_scene(cfg, truth, i) for i in range(num_scenes)]
    freq = build_freq_table(scenes, (cfg.num_obj_classes, cfg.num_rel_classes))
    params = ModelParams.init(
        cfg.feature_dim, cfg.num_obj_classes, cfg.num_rel_classes,
        emb_dim=int(rng.integers(2, 5)), seed=seed, scale=0.5, emb_scale=0.5,
    )
    for v in (params.b_obj, params.b_vis, params.b_emb):
        v[...] = rng.normal(0.0, 0.5, size=v.shape)
    obj_batch, pair_batch = build_batches(scenes)
    config = _CheckConfig(skew_variant=list(scr.SkewVariant)[seed % 3].value)
    return params, obj_batch, pair_batch, freq, config


def gradcheck_suite(num_instances: int = 20, seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """Max relative error per parameter block over ``num_instances`` random instances."""
    worst = {k: 0.0 for k in PARAM_BLOCKS}
    for i in range(num_instances):
        errs = gradient_check(*random_instance(seed + i), h=h)
        for k, v in errs.items():
            worst[k] = max(worst[k], v)
    return worst
