"""Python bindings for the crowdmech C++ core."""

from ._core import (
    ConfigError,
    ExperimentSpec,
    InvalidPriorError,
    ParseError,
    Priors,
    default_spec,
    evaluate_schedule,
    exact_posterior,
    infer,
    load_spec,
    majority_vote,
    mwu_update,
    payment,
    qr_response,
    train,
)

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "InvalidPriorError",
    "ParseError",
    "Priors",
    "default_spec",
    "evaluate_schedule",
    "exact_posterior",
    "infer",
    "load_spec",
    "majority_vote",
    "mwu_update",
    "payment",
    "qr_response",
    "train",
]
