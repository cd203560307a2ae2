"""Command-line entry point: gen, train, eval, sweep, gradcheck.

Dataset files are JSON lines holding every scene in split order
(train, val, test); a sidecar ``<stem>.meta.json`` records the generating
config, split sizes and predicate statistics. ``train`` writes a checkpoint
plus ``<stem>.history.json``; ``eval`` reads both and emits a metrics report.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from scrsgg.bench.metrics import DEFAULT_KS
from scrsgg.bench.sweep import DEFAULT_DELTA_GRID, DEFAULT_LAMBDA_GRID, SweepData, run_sweep, sweep_csv
from scrsgg.bench.train import TrainConfig, evaluate, train
from scrsgg.model import ModelParams, gradcheck_suite
from scrsgg.priors import build_freq_table
from scrsgg.synthgen import DatasetConfig, dataset_stats, read_jsonl, sample_dataset, triplet_classes, write_jsonl

GRADCHECK_TOL = 1e-4


def meta_path(data_path) -> Path:
    p = Path(data_path)
    return p.with_name(p.stem + ".meta.json")


def history_path(checkpoint) -> Path:
    p = Path(checkpoint)
    return p.with_name(p.stem + ".history.json")


def load_dataset(path):
    """Read a generated dataset; returns ``(train, val, test, config)``."""
    meta_file = meta_path(path)
    if not meta_file.exists():
        raise FileNotFoundError(f"dataset metadata not found: {meta_file}")
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    config = DatasetConfig.from_json(meta["config"])
    scenes = read_jsonl(path, config.num_obj_classes, config.num_rel_classes)
    n_train, n_val, n_test = meta["splits"]
    if len(scenes) != n_train + n_val + n_test:
        raise ValueError(f"{path}: expected {n_train + n_val + n_test} scenes, found {len(scenes)}")
    return scenes[:n_train], scenes[n_train:n_train + n_val], scenes[n_train + n_val:], config


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


# ---- subcommands ----


def cmd_gen(args) -> int:
    config = DatasetConfig(
        num_scenes=args.scenes,
        entities_per_scene=(args.min_entities, args.max_entities),
        num_obj_classes=args.obj_classes,
        num_rel_classes=args.predicates + 1,
        zipf_exponent=args.zipf,
        annotation_rate=args.annotation_rate,
        feature_dim=args.feature_dim,
        feature_noise_sigma=args.noise,
        seed=args.seed,
    )
    train_s, val_s, test_s, _ = sample_dataset(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(train_s + val_s + test_s, out)
    meta = {
        "config": config.to_json(),
        "splits": [len(train_s), len(val_s), len(test_s)],
        "stats": dataset_stats(train_s + val_s + test_s, config.num_rel_classes),
    }
    meta_path(out).write_text(_dump(meta), encoding="utf-8")
    print(f"wrote {out} ({config.num_scenes} scenes, background share {meta['stats']['background_share']:.4f})")
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        loss_mode=args.loss,
        skew_variant=args.variant,
        delta=args.delta,
        lambda_skew=args.lambda_skew,
        task=args.task,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_scenes=args.batch_scenes,
        seed=args.seed,
        emb_dim=args.emb_dim,
    )


def cmd_train(args) -> int:
    config = _train_config(args)
    train_s, val_s, _, dcfg = load_dataset(args.data)
    freq = build_freq_table(train_s, (dcfg.num_obj_classes, dcfg.num_rel_classes))
    params, history = train(config, train_s, val_s, freq)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    params.save(out)
    history_path(out).write_text(_dump({"config": config.to_json(), "history": history}), encoding="utf-8")
    print(f"wrote {out}; final epoch loss {history['epoch_loss'][-1] if history['epoch_loss'] else float('nan'):.6f}")
    return 0


def cmd_eval(args) -> int:
    if args.checkpoint is None:
        raise FileNotFoundError("checkpoint not found (pass --checkpoint)")
    params = ModelParams.load(args.checkpoint)
    train_s, val_s, test_s, dcfg = load_dataset(args.data)
    freq = build_freq_table(train_s, (dcfg.num_obj_classes, dcfg.num_rel_classes))
    scenes = {"val": val_s, "test": test_s}[args.split]
    report = evaluate(
        params,
        scenes,
        freq,
        args.task,
        triplet_classes(train_s),
        ks=DEFAULT_KS,
        graph_constraint=not args.no_graph_constraint,
        macro=args.macro,
    )
    hist_file = history_path(args.checkpoint)
    config = {"task": args.task, "split": args.split, "graph_constraint": not args.no_graph_constraint, "macro": args.macro}
    if hist_file.exists():
        saved = json.loads(hist_file.read_text(encoding="utf-8"))
        config["train"] = saved["config"]
        report.history = saved["history"]
    report.config = config
    text = _dump(report.to_json())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        k = max(report.ks)
        print(f"wrote {args.out}; R@{k} {report.recall[k]:.4f} mR@{k} {report.mean_recall[k]:.4f}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    train_s, val_s, test_s, dcfg = load_dataset(args.data)
    freq = build_freq_table(train_s, (dcfg.num_obj_classes, dcfg.num_rel_classes))
    results = run_sweep(
        _train_config(args),
        _float_list(args.deltas),
        _float_list(args.lambdas),
        _str_list(args.variants),
        SweepData(train_s, val_s, test_s, freq),
        workers=args.workers,
    )
    text = sweep_csv(results)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out} ({len(results)} settings)")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gradcheck(args) -> int:
    errs = gradcheck_suite(num_instances=args.instances, seed=args.seed, h=args.h)
    worst = max(errs.values())
    for k, v in errs.items():
        print(f"{k:10s} {v:.3e}")
    print(f"max relative error {worst:.3e}")
    return 0 if worst < GRADCHECK_TOL else 1


# ---- parser ----


def _add_train_flags(p):
    p.add_argument("--loss", choices=["ce", "scr"], default="scr")
    p.add_argument("--variant", choices=["emb", "freq", "freq-emb"], default="freq-emb")
    p.add_argument("--delta", type=float, default=0.7)
    p.add_argument("--lambda-skew", type=float, default=0.06)
    p.add_argument("--task", choices=["predcls", "sgcls"], default="predcls")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-scenes", type=int, default=8)
    p.add_argument("--emb-dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=42)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scrsgg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--scenes", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="dataset .jsonl path")
    p.add_argument("--obj-classes", type=int, default=20)
    p.add_argument("--predicates", type=int, default=30, help="non-background predicate count")
    p.add_argument("--zipf", type=float, default=1.5)
    p.add_argument("--annotation-rate", type=float, default=0.15)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--min-entities", type=int, default=4)
    p.add_argument("--max-entities", type=int, default=10)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["val", "test"], default="test")
    p.add_argument("--task", choices=["predcls", "sgcls"], default="predcls")
    p.add_argument("--macro", action="store_true", help="average recalls per scene")
    p.add_argument("--no-graph-constraint", action="store_true")
    p.add_argument("--out", help="report path (stdout if omitted)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over variant, delta and lambda")
    p.add_argument("--data", required=True)
    p.add_argument("--deltas", default=",".join(map(str, DEFAULT_DELTA_GRID)))
    p.add_argument("--lambdas", default=",".join(map(str, DEFAULT_LAMBDA_GRID)))
    p.add_argument("--variants", default="freq-emb")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
