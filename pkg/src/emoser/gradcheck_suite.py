"""Named gradient checks for every layer and the composed model stack.

Used by the `gradcheck` subcommand and the verification tests. All checks run
in float64: the point is to compare analytic backprop against central
differences, not to measure float32 rounding.
"""

from __future__ import annotations

import numpy as np

from .models import build_cnn
from .nn import (Conv2D, Dense, Dropout, Flatten, MaxPool2D, ReLU, SeededRng,
                 grad_check)

LAYER_THRESHOLD = 1e-3
STACK_THRESHOLD = 5e-3


def _randn(rng: SeededRng, *shape: int) -> np.ndarray:
    return rng.normal(int(np.prod(shape))).reshape(shape)


def run_suite(seed: int = 0, stack_coords: int = 12) -> list[tuple[str, float, float]]:
    """Run every check; returns (name, max relative error, threshold) rows."""
    rng = SeededRng(seed)
    results = []

    layer = Dense(12, 7, rng, dtype=np.float64)
    err = grad_check(layer, _randn(rng, 4, 12), seed=seed)
    results.append(("dense", err, LAYER_THRESHOLD))

    layer = Conv2D(3, 3, 2, 3, rng, dtype=np.float64)
    err = grad_check(layer, _randn(rng, 2, 5, 5, 2), seed=seed)
    results.append(("conv2d", err, LAYER_THRESHOLD))

    err = grad_check(ReLU(), _randn(rng, 4, 11), seed=seed)
    results.append(("relu", err, LAYER_THRESHOLD))

    err = grad_check(MaxPool2D(), _randn(rng, 2, 6, 6, 3), seed=seed)
    results.append(("maxpool2d", err, LAYER_THRESHOLD))

    err = grad_check(Dropout(0.25), _randn(rng, 4, 50), seed=seed, train=True)
    results.append(("dropout", err, LAYER_THRESHOLD))

    err = grad_check([], _randn(rng, 3, 8), label=np.array([1, 0, 7]), seed=seed)
    results.append(("softmax_xent", err, LAYER_THRESHOLD))

    model = build_cnn((16, 16), 8, rng, dtype=np.float64)
    x = _randn(rng, 2, 16, 16, 1)
    err = grad_check(model.layers[:-1], x, label=np.array([3, 5]), seed=seed,
                     train=True, max_coords_per_tensor=stack_coords)
    results.append(("full_stack", err, STACK_THRESHOLD))
    return results
