"""Particle MOL^T solver for the rescaled Maxwell equations (w-potential form)."""

from ._molt import (
    ConfigError,
    FormulationError,
    DomainError,
    ConvergenceError,
    RunConfig,
    green,
    green_gradient,
    self_term,
    scheme_lambda,
    treecode_sum,
    direct_sum,
    exact_fields,
    simulate,
    run,
    convergence,
    convergence_order,
    error_norm,
    ap_check,
    treecode_bench,
    parse_config,
    load_config,
)

__all__ = [
    "ConfigError",
    "FormulationError",
    "DomainError",
    "ConvergenceError",
    "RunConfig",
    "green",
    "green_gradient",
    "self_term",
    "scheme_lambda",
    "treecode_sum",
    "direct_sum",
    "exact_fields",
    "simulate",
    "run",
    "convergence",
    "convergence_order",
    "error_norm",
    "ap_check",
    "treecode_bench",
    "parse_config",
    "load_config",
]
