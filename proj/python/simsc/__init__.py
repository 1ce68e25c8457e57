"""Semantic correspondence with learned softmax temperature."""

try:
    from ._core import (
        evaluate,
        generate_pair,
        generate_split,
        kernel_soft_argmax,
        pck,
        softmax,
        temperature_regularizer,
        train,
    )
except ImportError:  # in-tree test runs put the extension on sys.path directly
    from _core import (
        evaluate,
        generate_pair,
        generate_split,
        kernel_soft_argmax,
        pck,
        softmax,
        temperature_regularizer,
        train,
    )

__all__ = [
    "evaluate",
    "generate_pair",
    "generate_split",
    "kernel_soft_argmax",
    "pck",
    "softmax",
    "temperature_regularizer",
    "train",
]
