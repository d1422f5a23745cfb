"""Compound random measures: well-posedness checks, marginal tails and simulation."""

from .core import (
    BaseMeasure,
    CormSpec,
    DirectingMeasure,
    MarginalScore,
    ScoreModel,
    build_directing_measure,
    build_marginal,
    build_score_model,
    custom_marginal,
    fractional_moment,
)
from .errors import CormError
from .expcorm import ExpCormIntensity, f_exp, intensity_direct, intensity_via_derivative, verify_theorem4
from .integrability import Posedness, check_corm, check_marginal
from .quad import QuadConfig, Verdict, integrate
from .sim import Truncation, sample_corm, validate_tails
from .specfile import load_spec, parse_spec
from .tails import MarginalIntensity, estimate_rv_index, marginal_tail, verify_theorem3

__version__ = "0.1.0"

__all__ = [
    "BaseMeasure",
    "CormError",
    "CormSpec",
    "DirectingMeasure",
    "ExpCormIntensity",
    "MarginalIntensity",
    "MarginalScore",
    "Posedness",
    "QuadConfig",
    "ScoreModel",
    "Truncation",
    "Verdict",
    "build_directing_measure",
    "build_marginal",
    "build_score_model",
    "check_corm",
    "check_marginal",
    "custom_marginal",
    "estimate_rv_index",
    "f_exp",
    "fractional_moment",
    "integrate",
    "intensity_direct",
    "intensity_via_derivative",
    "load_spec",
    "marginal_tail",
    "parse_spec",
    "sample_corm",
    "validate_tails",
    "verify_theorem3",
    "verify_theorem4",
]
