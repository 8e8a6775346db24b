from .base import MODES, MipInstance, OracleOutcome
from .bnb import DEFAULT_NODE_BUDGET, bnb_linear, bnb_normalized, bnb_solve, bnb_weighted
from .exhaustive import (
    ObjectiveTable,
    exhaustive_linear,
    exhaustive_normalized,
    exhaustive_weighted,
)
from .mps import export_mps, instances_equal, read_mps, read_mps_model, write_mps

__all__ = [
    "MODES",
    "MipInstance",
    "OracleOutcome",
    "DEFAULT_NODE_BUDGET",
    "bnb_solve",
    "bnb_normalized",
    "bnb_linear",
    "bnb_weighted",
    "ObjectiveTable",
    "exhaustive_normalized",
    "exhaustive_linear",
    "exhaustive_weighted",
    "export_mps",
    "write_mps",
    "read_mps",
    "read_mps_model",
    "instances_equal",
]
