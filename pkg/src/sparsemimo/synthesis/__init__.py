"""Sparse array synthesis against an apodized block reference pattern."""

from .reference import (ReferencePattern, apodize, lemma1_check, reference_pattern,
                        residual_sq)
from .sampling import ResolutionSpec, SamplingGrid, resolution, sampling_grid
from .sequential import HalfRound, ReferenceSpec, synthesize_sequential, synthesize_side
from .solver import (SynthesisConfig, SynthesisResult, reweighted_l1, select_elements,
                     select_indices, soft_threshold, solve_l1, weighted_l1)

__all__ = [
    "ReferencePattern", "apodize", "lemma1_check", "reference_pattern", "residual_sq",
    "ResolutionSpec", "SamplingGrid", "resolution", "sampling_grid",
    "HalfRound", "ReferenceSpec", "synthesize_sequential", "synthesize_side",
    "SynthesisConfig", "SynthesisResult", "reweighted_l1", "select_elements",
    "select_indices", "soft_threshold", "solve_l1", "weighted_l1",
]
