"""Seeded SGD training loop and evaluation entry point."""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from scrsgg import scr
from scrsgg.bench.metrics import DEFAULT_KS, MetricsReport, ScenePrediction, compute_metrics
from scrsgg.model import (
    LossMode,
    ModelParams,
    build_batches,
    object_logits,
    predict_scene,
    relation_loss,
    predicate_logits,
    total_loss,
)
from scrsgg.priors import FreqTable
from scrsgg.synthgen import triplet_classes

logger = logging.getLogger(__name__)


class Task(enum.Enum):
    PREDCLS = "predcls"
    SGCLS = "sgcls"

    @classmethod
    def parse(cls, value) -> "Task":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass
class TrainConfig:
    loss_mode: str = "scr"
    skew_variant: str = "freq-emb"
    delta: float = scr.DEFAULT_DELTA
    lambda_skew: float = scr.DEFAULT_LAMBDA_SKEW
    task: str = "predcls"
    learning_rate: float = 0.5
    epochs: int = 60
    batch_scenes: int = 8
    seed: int = 42
    emb_dim: int = 16

    def __post_init__(self):
        # normalise spellings; raises on unknown values
        self.loss_mode = LossMode.parse(self.loss_mode).value
        self.skew_variant = scr.SkewVariant.parse(self.skew_variant).value
        self.task = Task.parse(self.task).value

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("delta", "lambda_skew"):
            if not np.isfinite(d[k]):
                d[k] = str(d[k])
        return d

    @classmethod
    def from_json(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        for k in ("delta", "lambda_skew"):
            if k in data:
                data[k] = float(data[k])
        return cls(**data)


def _vocab(scenes, freq: FreqTable):
    feature_dim = next(sc.features.shape[1] for sc in scenes if sc.num_entities)
    return feature_dim, freq.num_obj_classes, freq.num_rel_classes


def train(
    config: TrainConfig,
    train_scenes: Sequence,
    val_scenes: Sequence,
    freq: FreqTable,
    params: ModelParams | None = None,
):
    """Train the toy predictor; returns ``(params, history)``.

    Each epoch shuffles the training scenes with a generator seeded from
    ``config.seed`` and steps through them ``batch_scenes`` at a time.
    """
    if not train_scenes:
        raise ValueError("empty training set")
    task = Task.parse(config.task)
    if params is None:
        feature_dim, n_obj, n_rel = _vocab(train_scenes, freq)
        params = ModelParams.init(feature_dim, n_obj, n_rel, emb_dim=config.emb_dim, seed=config.seed)
    else:
        params = params.copy()
    rng = np.random.default_rng(config.seed)
    history = {"step_loss": [], "step_rel_loss": [], "epoch_loss": [], "val_loss": []}

    for epoch in range(config.epochs):
        order = rng.permutation(len(train_scenes))
        epoch_losses = []
        for start in range(0, len(order), config.batch_scenes):
            chunk = [train_scenes[i] for i in order[start:start + config.batch_scenes]]
            chunk = [sc for sc in chunk if sc.num_pairs > 0]
            if not chunk:
                continue
            predicted = None
            if task is Task.SGCLS:
                predicted = [np.argmax(object_logits(params, sc.features), axis=1) for sc in chunk]
            obj_batch, pair_batch = build_batches(chunk, predicted)
            out = total_loss(
                params,
                obj_batch if task is Task.SGCLS else None,
                pair_batch,
                freq,
                config,
            )
            params.sgd_step(out.grads, config.learning_rate)
            history["step_loss"].append(out.total)
            history["step_rel_loss"].append(out.rel_loss)
            epoch_losses.append(out.total)
        history["epoch_loss"].append(float(np.mean(epoch_losses)) if epoch_losses else float("nan"))
        if val_scenes:
            history["val_loss"].append(validation_loss(params, val_scenes, freq, task))
        logger.info("epoch %d loss %.6f", epoch, history["epoch_loss"][-1])
    if not params.is_finite():
        raise FloatingPointError("training diverged: non-finite parameters")
    return params, history


def validation_loss(params: ModelParams, scenes: Sequence, freq: FreqTable, task: Task) -> float:
    """Unweighted relation cross-entropy over all pairs of ``scenes``."""
    scenes = [sc for sc in scenes if sc.num_pairs > 0]
    if not scenes:
        return float("nan")
    predicted = None
    if Task.parse(task) is Task.SGCLS:
        predicted = [np.argmax(object_logits(params, sc.features), axis=1) for sc in scenes]
    _, batch = build_batches(scenes, predicted)
    r_hat, _, _ = predicate_logits(params, batch, freq)
    loss, _ = relation_loss(r_hat, batch.targets)
    return loss


def predict(params: ModelParams, scenes: Sequence, freq: FreqTable, task) -> list[ScenePrediction]:
    use_gt = Task.parse(task) is Task.PREDCLS
    out = []
    for sc in scenes:
        if sc.num_entities == 0:
            out.append(ScenePrediction(np.zeros(0, int), np.zeros(0, int), np.zeros((0, freq.num_rel_classes)), sc.labels))
            continue
        subj, obj, probs, labels = predict_scene(params, sc, freq, use_gt_labels=use_gt)
        out.append(ScenePrediction(subj, obj, probs, labels))
    return out


def evaluate(
    params: ModelParams,
    scenes: Sequence,
    freq: FreqTable,
    task,
    train_triplet_set: set,
    ks: Sequence[int] = DEFAULT_KS,
    graph_constraint: bool = True,
    macro: bool = False,
) -> MetricsReport:
    if not scenes:
        raise ValueError("no scenes to evaluate")
    preds = predict(params, scenes, freq, task)
    return compute_metrics(
        preds,
        scenes,
        train_triplet_set,
        freq.num_rel_classes,
        ks=ks,
        graph_constraint=graph_constraint,
        macro=macro,
    )


def train_and_evaluate(config: TrainConfig, train_scenes, val_scenes, test_scenes, freq: FreqTable, **eval_kwargs):
    params, history = train(config, train_scenes, val_scenes, freq)
    report = evaluate(params, test_scenes, freq, config.task, triplet_classes(train_scenes), **eval_kwargs)
    report.config = config.to_json()
    report.history = history
    return params, report
