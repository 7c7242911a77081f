"""Central finite-difference verification of analytic gradients.

Checks a layer stack (one layer or a whole model's layers) against
(f(x+eps) - f(x-eps)) / 2eps per coordinate. Coordinates whose +eps / -eps
evaluations land on different sides of a ReLU or max-pool kink are resampled,
since the analytic subgradient is not comparable across a kink.
"""

from __future__ import annotations

import numpy as np

from .layers import Layer
from .loss import softmax_xent
from .rng import SeededRng


def _forward(layers: list[Layer], x: np.ndarray, label, projection,
             train: bool, rng_seed: int) -> tuple[float, bytes]:
    """Scalar objective plus the kink signature of the pass."""
    rng = SeededRng(rng_seed)
    out = x
    for layer in layers:
        out = layer.forward(out, train=train, rng=rng)
    if label is not None:
        _, losses, _ = softmax_xent(out, label)
        value = float(np.sum(losses))
    else:
        value = float(np.sum(out * projection))
    sig = b"".join(layer.kink_signature() for layer in layers
                   if hasattr(layer, "kink_signature"))
    return value, sig


def grad_check(layers: Layer | list[Layer], x: np.ndarray, *, eps: float = 1e-3,
               label=None, seed: int = 0, train: bool = False,
               max_coords_per_tensor: int | None = None) -> float:
    """Max relative error between analytic and numeric gradients.

    With `label` set, the objective is the summed softmax cross-entropy of
    the stack's output; otherwise a fixed random projection of the output.
    Relative error is |a - n| / max(|a|, |n|, 1e-8). For large stacks,
    `max_coords_per_tensor` checks a random coordinate subset per tensor.
    Run with float64 layers and inputs; float32 rounding drowns the signal.
    """
    if isinstance(layers, Layer):
        layers = [layers]
    x = np.asarray(x, dtype=np.float64)
    rng = SeededRng(seed)
    dropout_seed = seed ^ 0x5EED

    projection = None
    if label is None:
        out = x  # dry run to learn the output shape
        r = SeededRng(dropout_seed)
        for layer in layers:
            out = layer.forward(out, train=train, rng=r)
        projection = rng.normal(out.size).reshape(out.shape)

    # analytic pass
    for layer in layers:
        for p in layer.params():
            p.zero_grad()
    r = SeededRng(dropout_seed)
    out = x
    for layer in layers:
        out = layer.forward(out, train=train, rng=r)
    if label is not None:
        _, _, grad = softmax_xent(out, label)
    else:
        grad = projection
    for layer in reversed(layers):
        grad = layer.backward(grad)
    x_grad = grad

    tensors: list[tuple[np.ndarray, np.ndarray]] = [(x, x_grad)]
    for layer in layers:
        for p in layer.params():
            tensors.append((p.value, p.grad))

    max_rel = 0.0
    for value, analytic in tensors:
        flat_value = value.reshape(-1)
        flat_grad = analytic.reshape(-1)
        size = flat_value.size
        if max_coords_per_tensor is None or size <= max_coords_per_tensor:
            coords = list(range(size))
            budget = len(coords)
        else:
            coords = [rng.integer(size) for _ in range(4 * max_coords_per_tensor)]
            budget = max_coords_per_tensor
        checked = 0
        for idx in coords:
            if checked >= budget:
                break
            original = flat_value[idx]
            flat_value[idx] = original + eps
            f_plus, sig_plus = _forward(layers, x, label, projection, train, dropout_seed)
            flat_value[idx] = original - eps
            f_minus, sig_minus = _forward(layers, x, label, projection, train, dropout_seed)
            flat_value[idx] = original
            if sig_plus != sig_minus:
                continue  # kink-adjacent coordinate: resample
            checked += 1
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = flat_grad[idx]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel
