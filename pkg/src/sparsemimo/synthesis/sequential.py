"""Alternating transmit/receive synthesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

from ..model import ArrayTopology, FrequencyGrid
from .reference import ReferencePattern, reference_pattern
from .sampling import SamplingGrid
from .solver import SynthesisConfig, SynthesisResult, reweighted_l1, select_elements, solve_l1

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceSpec:
    """Where and how the reference pattern is generated."""

    freqs: FrequencyGrid
    grid: SamplingGrid
    apodization: str = "hamming"


@dataclass
class HalfRound:
    round: int
    side: str
    n_candidates: int
    n_selected: int
    residual: float
    epsilon: float
    l1_norm: float
    converged: bool
    result: SynthesisResult = None
    pattern: ReferencePattern = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("round", "side", "n_candidates", "n_selected", "residual",
                 "epsilon", "l1_norm", "converged")}


def synthesize_side(fixed: ArrayTopology, full: ArrayTopology, side: str,
                    spec: ReferenceSpec, cfg: SynthesisConfig,
                    apodize_fixed: bool = True):
    """One half-round: candidates for ``side`` come from ``full``, the other
    side is taken from ``fixed`` as it stands.

    Returns ``(topology, result, pattern)``.
    """
    referenced = fixed.with_side(side, full.positions(side), full.weights(side))
    pattern = reference_pattern(referenced, spec.apodization, spec.grid, spec.freqs,
                                optimize=side, apodize_fixed=apodize_fixed)
    B = pattern.sensing_matrix()
    solve = reweighted_l1 if cfg.reweight_iterations > 1 else solve_l1
    result = solve(B, pattern, cfg)
    # the fixed side keeps the weights it was imaged with
    return select_elements(result, cfg, pattern.referenced), result, pattern


def synthesize_sequential(full: ArrayTopology, spec: ReferenceSpec,
                          configs: Dict[str, SynthesisConfig],
                          order: str = "rx_first", rounds: int = 1):
    """Alternately synthesize the sides listed in ``configs``.

    Each half-round regenerates the reference pattern against the current
    fixed side.  Sides absent from ``configs`` stay as in ``full``.

    Returns ``(topology, diagnostics)`` where diagnostics is a list of
    :class:`HalfRound`.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if order not in ("rx_first", "tx_first"):
        raise ValueError(f"order must be 'rx_first' or 'tx_first', got {order!r}")
    sides = ["rx", "tx"] if order == "rx_first" else ["tx", "rx"]
    sides = [s for s in sides if s in configs]
    current = full
    touched = set()
    diagnostics: List[HalfRound] = []
    for r in range(rounds):
        for side in sides:
            other = "tx" if side == "rx" else "rx"
            # an untouched fixed side is still the full referenced aperture
            current, result, pattern = synthesize_side(
                current, full, side, spec, configs[side],
                apodize_fixed=other not in touched)
            touched.add(side)
            diagnostics.append(HalfRound(
                r, side, full.positions(side).shape[0],
                current.positions(side).shape[0], result.residual, result.epsilon,
                result.l1_norm, result.converged, result, pattern))
            log.info("round %d %s: %d of %d elements, residual %.4g (eps %.4g)",
                     r, side, diagnostics[-1].n_selected, diagnostics[-1].n_candidates,
                     result.residual, result.epsilon)
    return current, diagnostics
