"""Monarch-structured surrogate attention and FFN blocks."""

from ._core import (
    check_names,
    count_flops,
    count_params,
    fit_scaling_exponent,
    generate_sine,
    monarch_apply,
    monarch_param_count,
    monarch_to_dense,
    permutation,
    random_monarch_blocks,
    run_verify,
    surrogate_attention,
    surrogate_ffn,
)

__all__ = [
    "check_names",
    "count_flops",
    "count_params",
    "fit_scaling_exponent",
    "generate_sine",
    "monarch_apply",
    "monarch_param_count",
    "monarch_to_dense",
    "permutation",
    "random_monarch_blocks",
    "run_verify",
    "surrogate_attention",
    "surrogate_ffn",
]
