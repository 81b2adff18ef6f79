"""Complex basis-pursuit denoising for array synthesis.

Solves::

    minimize    sum_n u_n |w_n|
    subject to  ||E - B w||_2^2 <= eps

through its penalized form ``0.5 ||B w - E||^2 + mu * sum_n u_n |w_n|``.
Each penalized problem is solved by accelerated proximal gradient on the
cached Gram matrix ``B^H B``; ``mu`` is bracketed in log-space until the
residual of the (exactly sparse) iterate lands just inside the bound.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from ..errors import EmptySelection, Infeasible, SynthError
from ..model import ArrayTopology
from .reference import ReferencePattern, residual_sq

log = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-6


@dataclass(frozen=True)
class SynthesisConfig:
    """Settings for one synthesis program.

    ``epsilon`` overrides the relative rule ``relative_epsilon * ||E_ref||^2``.
    ``reweight_iterations`` counts weighted solves including the first,
    unweighted one; 0 or 1 means plain l1.  ``reweight_delta`` defaults to
    1e-3 times the largest first-solve magnitude.  Selection keeps the
    ``top_n`` largest weights when set, else everything above
    ``threshold * max|w|``.
    """

    epsilon: Optional[float] = None
    relative_epsilon: float = 1e-2
    reweight_iterations: int = 3
    reweight_delta: Optional[float] = None
    threshold: float = 0.01
    top_n: Optional[int] = None
    uniform_weights: bool = False
    solver_tol: float = 1e-10
    max_iter: int = 20000
    residual_rtol: float = 1e-4
    max_bisections: int = 80

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise SynthError(f"epsilon must be positive, got {self.epsilon}")
        if not self.relative_epsilon > 0:
            raise SynthError("relative_epsilon must be positive")
        if not 0 < self.threshold <= 1:
            raise SynthError(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.top_n is not None and self.top_n < 1:
            raise SynthError("top_n must be >= 1")
        if self.reweight_iterations < 0:
            raise SynthError("reweight_iterations must be >= 0")
        if self.reweight_delta is not None and not self.reweight_delta > 0:
            raise SynthError("reweight_delta must be positive")

    def resolve_epsilon(self, E: np.ndarray) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return float(self.relative_epsilon * np.vdot(E, E).real)


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    w: np.ndarray
    selected: np.ndarray
    residual: float
    l1_norm: float
    epsilon: float
    iterations: int
    converged: bool
    side: str = "rx"
    candidates: Optional[np.ndarray] = None
    history: List[dict] = field(default_factory=list)
    reweight_history: List[dict] = field(default_factory=list)

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.w))

    def support(self, rel: float = 1e-6) -> np.ndarray:
        a = np.abs(self.w)
        top = a.max() if a.size else 0.0
        return np.flatnonzero(a > rel * top) if top > 0 else np.zeros(0, int)


def soft_threshold(x: np.ndarray, t) -> np.ndarray:
    """Complex soft-thresholding: shrink moduli by ``t``, keep phases."""
    mag = np.abs(x)
    scale = np.maximum(mag - t, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(mag > 0, x * (scale / np.where(mag > 0, mag, 1.0)), 0.0)
    return out


class _Lasso:
    """Accelerated proximal gradient (FISTA with adaptive restart) for
    ``0.5||Bw - E||^2 + sum_n t_n |w_n|``, warm-started across calls."""

    def __init__(self, B: np.ndarray, E: np.ndarray, tol: float, max_iter: int):
        self.G = B.conj().T @ B
        self.c = B.conj().T @ E
        self.L = float(sla.eigvalsh(self.G).max())
        self.tol = tol
        self.max_iter = max_iter
        self.w = np.zeros(B.shape[1], complex)

    def run(self, thresholds: np.ndarray):
        G, c, L = self.G, self.c, self.L
        stop = self.tol * max(np.linalg.norm(c), np.finfo(float).tiny)
        w = self.w
        y = w.copy()
        t = 1.0
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            w_new = soft_threshold(y - (G @ y - c) / L, thresholds / L)
            step = y - w_new
            if L * np.linalg.norm(step) <= stop:
                converged = True
                w = w_new
                break
            t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            if np.vdot(step, w_new - w).real > 0:
                # momentum points uphill: restart
                t_new = 1.0
                y = w_new.copy()
            else:
                y = w_new + ((t - 1) / t_new) * (w_new - w)
            w, t = w_new, t_new
        self.w = w
        return w.copy(), it, converged


def _matrix(B) -> np.ndarray:
    return np.asarray(getattr(B, "entries", B), complex)


def _target(pattern) -> np.ndarray:
    return np.asarray(getattr(pattern, "E_ref", pattern), complex).reshape(-1)


def _weighted_bpdn(Bm: np.ndarray, E: np.ndarray, eps: float, u: np.ndarray,
                   cfg: SynthesisConfig):
    """Returns ``(w, iterations, converged, history)``."""
    n = Bm.shape[1]
    e2 = float(np.vdot(E, E).real)
    if eps >= e2:
        return np.zeros(n, complex), 0, True, [{"mu": None, "residual": e2, "l1": 0.0}]

    w_ls, *_ = np.linalg.lstsq(Bm, E, rcond=None)
    r_ls = residual_sq(Bm, E, w_ls)
    if r_ls > eps:
        raise Infeasible(
            f"epsilon {eps:.6g} is below the least-squares residual floor {r_ls:.6g}")

    lasso = _Lasso(Bm, E, cfg.solver_tol, cfg.max_iter)
    c_over_u = np.abs(lasso.c) / u
    mu_hi = float(c_over_u.max())          # w = 0 is optimal at and above this
    log_hi = np.log(mu_hi)
    log_lo = None
    best = None                            # (l1, w, residual)
    history = []
    total_iter = 0
    target_lo = eps * (1 - cfg.residual_rtol)

    def evaluate(log_mu):
        nonlocal total_iter, best
        w, its, conv = lasso.run(np.exp(log_mu) * u)
        total_iter += its
        res = residual_sq(Bm, E, w)
        l1 = float(np.sum(u * np.abs(w)))
        feasible = res <= eps
        if feasible and (best is None or l1 <= best[0]):
            best = (l1, w, res, conv)
        history.append({"mu": float(np.exp(log_mu)), "residual": res, "l1": l1,
                        "feasible": feasible, "inner_iterations": its,
                        "inner_converged": conv,
                        "best_l1": None if best is None else best[0]})
        return res, feasible

    # descend from mu_hi until a feasible penalty is found
    f_hi = np.log(e2 / eps)
    probe = log_hi
    for _ in range(40):
        probe -= np.log(10.0)
        res, feasible = evaluate(probe)
        if feasible:
            log_lo, f_lo = probe, np.log(max(res, 1e-300) / eps)
            break
        log_hi, f_hi = probe, np.log(res / eps)
    if log_lo is None:
        log.warning("no feasible penalty found; returning least-squares weights")
        return w_ls, total_iter, False, history

    # Illinois false position on log(residual / eps) against log(mu)
    bracket_ok = best[2] >= target_lo
    side = 0
    for _ in range(cfg.max_bisections):
        if bracket_ok or log_hi - log_lo < 1e-13:
            break
        mid = (log_lo * f_hi - log_hi * f_lo) / (f_hi - f_lo)
        if not log_lo < mid < log_hi:
            mid = 0.5 * (log_lo + log_hi)
        res, feasible = evaluate(mid)
        f_mid = np.log(max(res, 1e-300) / eps)
        if feasible:
            log_lo, f_lo = mid, f_mid
            bracket_ok = res >= target_lo
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            log_hi, f_hi = mid, f_mid
            if side == 1:
                f_lo *= 0.5
            side = 1
    l1, w, res, conv = best
    converged = bool(conv and (bracket_ok or log_hi - log_lo < 1e-13))
    return w, total_iter, converged, history


def _result(w, Bm, E, eps, its, conv, B, cfg, history, u=None, rw_hist=None):
    sel = select_indices(w, cfg) if np.any(w) else np.zeros(0, int)
    return SynthesisResult(
        w=w, selected=sel, residual=residual_sq(Bm, E, w),
        l1_norm=float(np.sum(np.abs(w))), epsilon=eps, iterations=its,
        converged=conv, side=getattr(B, "side", "rx"),
        candidates=getattr(B, "candidates", None), history=history,
        reweight_history=rw_hist or [])


def solve_l1(B, pattern, cfg: SynthesisConfig = SynthesisConfig()) -> SynthesisResult:
    """Minimum-l1 complex weights keeping ``||E_ref - B w||^2 <= eps``.

    ``B`` may be a :class:`SensingMatrix` or an array, ``pattern`` a
    :class:`ReferencePattern` or a target vector.

    Raises
    ------
    Infeasible
        If ``eps`` is below the least-squares residual of ``B``.
    """
    return weighted_l1(B, pattern, cfg, None)


def weighted_l1(B, pattern, cfg: SynthesisConfig, u=None) -> SynthesisResult:
    Bm, E = _matrix(B), _target(pattern)
    if Bm.shape[0] != E.size:
        raise SynthError(f"B has {Bm.shape[0]} rows but the pattern has {E.size} samples")
    eps = cfg.resolve_epsilon(E)
    u = np.ones(Bm.shape[1]) if u is None else np.asarray(u, float)
    w, its, conv, hist = _weighted_bpdn(Bm, E, eps, u, cfg)
    return _result(w, Bm, E, eps, its, conv, B, cfg, hist)


def reweighted_l1(B, pattern, cfg: SynthesisConfig = SynthesisConfig()) -> SynthesisResult:
    """Iteratively reweighted l1 (weights ``1 / (|w_n| + delta)``).

    The first pass is plain l1; every pass is feasible.  The returned result
    is the final pass, with per-pass diagnostics in ``reweight_history``.
    """
    Bm, E = _matrix(B), _target(pattern)
    eps = cfg.resolve_epsilon(E)
    passes = max(1, cfg.reweight_iterations)
    u = np.ones(Bm.shape[1])
    delta = cfg.reweight_delta
    total = 0
    rw_hist = []
    res = None
    for i in range(passes):
        res = weighted_l1(B, pattern, cfg, u)
        total += res.iterations
        a = np.abs(res.w)
        top = a.max() if a.size else 0.0
        rw_hist.append({
            "pass": i, "l1": res.l1_norm, "residual": res.residual,
            "converged": res.converged,
            "support": int(np.count_nonzero(a > 1e-6 * top)) if top > 0 else 0,
        })
        if top == 0:
            break
        if delta is None:
            delta = 1e-3 * top
        u = 1.0 / (a + delta)
    return replace(res, iterations=total, reweight_history=rw_hist)


def select_indices(w: np.ndarray, cfg: SynthesisConfig) -> np.ndarray:
    """Indices kept by the selection rule, sorted ascending.

    ``top_n`` keeps the largest magnitudes, ties going to the lower index;
    otherwise indices with ``|w_n| >= threshold * max|w|`` survive.
    """
    a = np.abs(np.asarray(w))
    if a.size == 0 or not a.max() > 0:
        raise EmptySelection("all weights are zero")
    if cfg.top_n is not None:
        if cfg.top_n > np.count_nonzero(a):
            log.warning("top_n = %d exceeds the %d nonzero weights; zero-weight "
                        "elements fill the selection", cfg.top_n, np.count_nonzero(a))
        order = np.lexsort((np.arange(a.size), -a))
        keep = order[:min(cfg.top_n, a.size)]
    else:
        keep = np.flatnonzero(a >= cfg.threshold * a.max())
    if keep.size == 0:
        raise EmptySelection("no weight survives the selection rule")
    return np.sort(keep)


def select_elements(result: SynthesisResult, cfg: SynthesisConfig,
                    base: ArrayTopology) -> ArrayTopology:
    """Replace the optimized side of ``base`` by the selected candidates.

    Retained elements carry their synthesized weights, or unit weights when
    ``cfg.uniform_weights`` is set.
    """
    idx = select_indices(result.w, cfg)
    side = result.side
    cand = result.candidates if result.candidates is not None else base.positions(side)
    weights = np.ones(idx.size, complex) if cfg.uniform_weights else result.w[idx]
    return base.with_side(side, cand[idx], weights)
