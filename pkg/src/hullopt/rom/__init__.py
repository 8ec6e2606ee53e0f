"""Reduced-order models: POD bases, GPRs and the assembled stress surrogate."""
from .crossval import cross_validate, fold_indices, summarize, write_cv_csv
from .database import FIELDS, DbEntry, SnapshotDatabase, thickness_key
from .gpr import GprModel, condition, gpr_fit, log_likelihood, se_ard_kernel
from .pod import DegenerateBasisError, PodBasis, energy_rank, pod_fit, reconstruction_error
from .surrogate import (
    FieldSurrogate,
    RankPolicy,
    SurrogateModel,
    field_name,
    refit_condition_only,
    singular_value_table,
    surrogate_fit,
)

__all__ = [
    "FIELDS",
    "DbEntry",
    "DegenerateBasisError",
    "FieldSurrogate",
    "GprModel",
    "PodBasis",
    "RankPolicy",
    "SnapshotDatabase",
    "SurrogateModel",
    "condition",
    "cross_validate",
    "energy_rank",
    "field_name",
    "fold_indices",
    "gpr_fit",
    "log_likelihood",
    "pod_fit",
    "reconstruction_error",
    "refit_condition_only",
    "se_ard_kernel",
    "singular_value_table",
    "summarize",
    "surrogate_fit",
    "thickness_key",
    "write_cv_csv",
]
