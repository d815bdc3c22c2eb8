"""Byzantine-robust federated aggregation under label skewness."""

from ._core import (
    BobaError,
    aggregate,
    aggregator_names,
    attack,
    config_to_string,
    error_bound,
    read_gradients,
    run_experiment,
    variance_concentration,
    verify,
    write_gradients,
)

__all__ = [
    "BobaError",
    "aggregate",
    "aggregator_names",
    "attack",
    "config_to_string",
    "error_bound",
    "read_gradients",
    "run_experiment",
    "variance_concentration",
    "verify",
    "write_gradients",
]
