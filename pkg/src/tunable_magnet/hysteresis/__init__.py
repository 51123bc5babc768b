"""
Scalar rate-independent hysteresis with return-point memory (classical Preisach model, Everett evaluation).
"""

from .everett import EverettSurface, EverettTable, GaussianPreisach, HysteresisModel, MaterialParams
from .memory import (
    MagnetState,
    MemoryStack,
    advance,
    apply_field,
    apply_sequence,
    evaluate,
    remanence,
    stack_from_history,
    sweep_trace,
)
from .forc import ForcTable, Identification, identify_from_forc, read_forc_csv, sample_forc, write_forc_csv
from .modelio import load_model, model_from_dict, model_to_dict, save_model

__all__ = [
    "EverettSurface",
    "EverettTable",
    "ForcTable",
    "GaussianPreisach",
    "HysteresisModel",
    "Identification",
    "MagnetState",
    "MaterialParams",
    "MemoryStack",
    "advance",
    "apply_field",
    "apply_sequence",
    "evaluate",
    "identify_from_forc",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "read_forc_csv",
    "remanence",
    "sample_forc",
    "save_model",
    "stack_from_history",
    "sweep_trace",
    "write_forc_csv",
]
