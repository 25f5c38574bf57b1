"""Black-box adversarial attacks via attention-masked sparse multiobjective
evolutionary search."""

from .core import (
    EvoAttackError,
    ImageTensor,
    Individual,
    MetricReport,
    ObjectiveVector,
    RngStreams,
    SparseSolution,
    effective_perturbation,
)
from .mask import AttentionMask, UnusableMaskError, binarize_map, full_mask, gather, load_mask, scatter
from .optimize import RunConfig, RunResult, run_attack, run_moea_psl, run_nsga2
from .oracle import (
    Oracle,
    OracleError,
    ReplayOracle,
    RecordingOracle,
    SubprocessOracle,
    ToyConvOracle,
    ToyLinearOracle,
    load_toy_oracle,
)
from .problem import AttackInstance, apply_perturbation, evaluate, repair, select_final_ae

__version__ = "0.1.0"

__all__ = [
    "AttackInstance",
    "AttentionMask",
    "EvoAttackError",
    "ImageTensor",
    "Individual",
    "MetricReport",
    "ObjectiveVector",
    "Oracle",
    "OracleError",
    "RecordingOracle",
    "ReplayOracle",
    "RngStreams",
    "RunConfig",
    "RunResult",
    "SparseSolution",
    "SubprocessOracle",
    "ToyConvOracle",
    "ToyLinearOracle",
    "UnusableMaskError",
    "apply_perturbation",
    "binarize_map",
    "effective_perturbation",
    "evaluate",
    "full_mask",
    "gather",
    "load_mask",
    "load_toy_oracle",
    "repair",
    "run_attack",
    "run_moea_psl",
    "run_nsga2",
    "scatter",
    "select_final_ae",
]
