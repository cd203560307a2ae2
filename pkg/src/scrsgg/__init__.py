"""Skew class-balanced re-weighting (SCR) for long-tailed relation prediction.

The package is organised bottom-up:

- :mod:`scrsgg.numerics` -- stable sigmoid / softmax primitives and a
  finite-difference oracle.
- :mod:`scrsgg.scr` -- skew logits, sample estimates, target skew, entropy,
  effective number and the per-sample weights.
- :mod:`scrsgg.priors` -- the FREQ count table and label-embedding pair features.
- :mod:`scrsgg.model` -- the toy predicate predictor and its losses with
  analytic gradients.
- :mod:`scrsgg.synthgen` -- seeded long-tailed synthetic scene-graph corpora.
- :mod:`scrsgg.bench` -- training, R@K / mR@K / zero-shot R@K, sweeps and the CLI.
"""

from scrsgg.scr import SkewVariant, SkewDiagnostics, compute_sample_weights

__all__ = ["SkewVariant", "SkewDiagnostics", "compute_sample_weights"]
__version__ = "0.1.0"
