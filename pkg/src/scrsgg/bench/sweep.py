"""Grid sweeps over (variant, delta, lambda_skew) with CSV output."""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from scrsgg.bench.metrics import MetricsReport
from scrsgg.bench.train import TrainConfig, train_and_evaluate
from scrsgg.priors import FreqTable

CSV_HEADER = ("variant", "delta", "lambda", "k", "recall", "mean_recall", "zs_recall")
# default sweep grid
DEFAULT_DELTA_GRID = (0.6, 0.7, 0.8)
DEFAULT_LAMBDA_GRID = (0.03, 0.06, 0.08)


@dataclass
class SweepData:
    train: Sequence
    val: Sequence
    test: Sequence
    freq: FreqTable


def grid(base: TrainConfig, deltas, lambdas, variants) -> list[TrainConfig]:
    if not deltas or not lambdas or not variants:
        raise ValueError("sweep grids must be nonempty")
    return [
        replace(base, skew_variant=v, delta=float(d), lambda_skew=float(lam))
        for v, d, lam in itertools.product(variants, deltas, lambdas)
    ]


def _run_one(args):
    config, data = args
    _, report = train_and_evaluate(config, data.train, data.val, data.test, data.freq)
    return report


def run_sweep(
    base: TrainConfig,
    deltas: Sequence[float],
    lambdas: Sequence[float],
    variants: Sequence[str],
    data: SweepData,
    workers: int = 1,
) -> list[tuple[TrainConfig, MetricsReport]]:
    """Train and evaluate every grid point with ``base.seed``.

    Runs share nothing, so ``workers > 1`` farms them out to processes with
    identical results.
    """
    configs = grid(base, deltas, lambdas, variants)
    jobs = [(c, data) for c in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]
    return list(zip(configs, reports))


def sweep_csv(results) -> str:
    """One row per (setting, K)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for config, report in results:
        for k in report.ks:
            z = report.zs_recall[k]
            w.writerow(
                [
                    config.skew_variant,
                    repr(config.delta),
                    repr(config.lambda_skew),
                    k,
                    repr(report.recall[k]),
                    repr(report.mean_recall[k]),
                    "" if z is None else repr(z),
                ]
            )
    return buf.getvalue()
