"""Rank missing-value imputations without the complete data."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    CONTINUOUS,
    ColumnKind,
    CompleteDataset,
    MaskedDataset,
    PatternIndex,
    apply_mask,
    compute_pattern_index,
    read_csv,
    write_csv,
)
from .energy import (  # noqa: E402
    discrete,
    empirical_energy_score,
    energy_distance,
    expected_energy_score,
    full_information_score,
)
from .imputers import REGISTRY, ImputationError, Imputer, make_imputer, parse_imputer  # noqa: E402
from .score import NothingScorable, ScoreReport, VariableScore, energy_i_score, standardize_scores  # noqa: E402
from .score_star import StarConfig, energy_i_score_star  # noqa: E402
from .synth import GENERATORS, generate, mcar_amputate  # noqa: E402

__all__ = [
    "CONTINUOUS", "ColumnKind", "CompleteDataset", "MaskedDataset", "PatternIndex",
    "apply_mask", "compute_pattern_index", "read_csv", "write_csv",
    "discrete", "empirical_energy_score", "energy_distance", "expected_energy_score",
    "full_information_score",
    "REGISTRY", "ImputationError", "Imputer", "make_imputer", "parse_imputer",
    "NothingScorable", "ScoreReport", "VariableScore", "energy_i_score", "standardize_scores",
    "StarConfig", "energy_i_score_star",
    "GENERATORS", "generate", "mcar_amputate",
]
