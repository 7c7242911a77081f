"""Minimal dense/conv neural-network engine with verified backprop."""

from .gradcheck import grad_check
from .layers import (Conv2D, Dense, Dropout, Flatten, InvalidRate, Layer,
                     MaxPool2D, Parameter, ReLU, ShapeMismatch, Softmax,
                     glorot_uniform, he_normal)
from .loss import LabelOutOfRange, softmax_xent
from .optim import SGD, Adam, make_optimizer
from .rng import SeededRng

__all__ = [
    "Adam", "Conv2D", "Dense", "Dropout", "Flatten", "InvalidRate",
    "LabelOutOfRange", "Layer", "MaxPool2D", "Parameter", "ReLU", "SGD",
    "SeededRng", "ShapeMismatch", "Softmax", "glorot_uniform", "grad_check",
    "he_normal", "make_optimizer", "softmax_xent",
]
