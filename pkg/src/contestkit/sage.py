"""Sparse additive contrast between a target community and a background corpus.

The model: target term probabilities are softmax(m + eta), where m is the
smoothed background log-probability vector and eta a deviation vector fit by
minimizing the penalized negative multinomial log-likelihood

    f(eta) = -(c . (m + eta)) + N * log(sum_j exp(m_j + eta_j)) + lam * ||eta||_1

with c the target counts and N their total. Large positive eta marks terms
over-represented in the target; those are the insider-term candidates.

The optimizer is coordinate descent with exact one-dimensional minimization:
for coordinate i the stationarity condition pins the fitted probability of
term i at (c_i - lam)/N (positive side) or (c_i + lam)/N (negative side),
which converts to eta through a logit; when neither side is admissible the
coordinate is soft-thresholded to exactly zero. Every accepted step lowers
the objective, so the recorded trace is nonincreasing by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .corpus import CountVector, Vocabulary

# Clamp keeps a zero-count coordinate at lam=0 from running to -inf;
# exp(-30) is ~1e-13, far below any count resolution.
ETA_BOUND = 30.0

DEFAULT_ALPHA = 0.5
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500
DEFAULT_LAMBDA_GRID = (0.1, 0.5, 1.0, 5.0)
DEFAULT_MIN_TERMS = 30


class SageError(ValueError):
    pass


@dataclass
class BackgroundModel:
    m: np.ndarray  # log-probabilities, one per vocab term
    alpha: float

    def __post_init__(self) -> None:
        self.m = np.asarray(self.m, dtype=float)
        if not np.all(np.isfinite(self.m)):
            raise SageError("background log-probabilities must be finite")
        total = float(np.exp(self.m).sum())
        if abs(total - 1.0) > 1e-9:
            raise SageError(f"background probabilities sum to {total}, not 1")


@dataclass
class SageFit:
    eta: np.ndarray
    lam: float
    iterations: int
    converged: bool
    objective_trace: list[float]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.eta))


@dataclass
class InsiderTerm:
    term: str
    eta_score: float
    target_count: int
    background_count: int
    recent_count: int
    annotation: Optional[str] = None


def background_log_probs(background: CountVector, alpha: float) -> BackgroundModel:
    """Additive-smoothed log-probabilities of the background counts."""
    if alpha <= 0:
        raise SageError("alpha must be positive")
    counts = np.asarray(background.counts, dtype=float)
    v = background.vocab_size
    m = np.log(counts + alpha) - math.log(background.total + alpha * v)
    return BackgroundModel(m=m, alpha=alpha)


def plain_log_odds(
    target: CountVector, background: CountVector, alpha: float
) -> np.ndarray:
    """Unregularized smoothed log-odds contrast; the testing oracle for fit_sage."""
    if alpha <= 0:
        raise SageError("alpha must be positive")
    if target.vocab_size != background.vocab_size:
        raise SageError(
            f"vocab size mismatch: {target.vocab_size} vs {background.vocab_size}"
        )
    ct = np.asarray(target.counts, dtype=float)
    cb = np.asarray(background.counts, dtype=float)
    v = target.vocab_size
    log_pt = np.log(ct + alpha) - math.log(target.total + alpha * v)
    log_pb = np.log(cb + alpha) - math.log(background.total + alpha * v)
    return log_pt - log_pb


def penalized_objective(
    eta: np.ndarray, target: CountVector, background: BackgroundModel, lam: float
) -> float:
    c = np.asarray(target.counts, dtype=float)
    s = background.m + eta
    value = -float(c @ s) + target.total * float(logsumexp(s))
    return value + lam * float(np.abs(eta).sum())


def objective_gradient(
    eta: np.ndarray, target: CountVector, background: BackgroundModel, lam: float
) -> np.ndarray:
    """Gradient of the penalized objective where it is differentiable.

    At coordinates with eta_i == 0 the L1 term contributes the subgradient
    element of least magnitude instead of lam * sign(0).
    """
    c = np.asarray(target.counts, dtype=float)
    s = background.m + eta
    p = np.exp(s - logsumexp(s))
    smooth = target.total * p - c
    grad = smooth + lam * np.sign(eta)
    zero = eta == 0.0
    grad[zero] = np.sign(smooth[zero]) * np.maximum(np.abs(smooth[zero]) - lam, 0.0)
    return grad


def _coordinate_minimizer(
    ci: float, n_total: float, m_i: float, log_zrest: float, lam: float
) -> float:
    """Exact minimizer of the 1-d coordinate subproblem, clamped to +-ETA_BOUND."""

    def eta_at(t: float) -> float:
        # fitted probability t converts to eta through the conditional logit
        return log_zrest + math.log(t) - math.log1p(-t) - m_i

    t_plus = (ci - lam) / n_total
    if 0.0 < t_plus < 1.0:
        cand = eta_at(t_plus)
        if cand > 0.0:
            return min(cand, ETA_BOUND)
    t_minus = (ci + lam) / n_total
    if 0.0 < t_minus < 1.0:
        cand = eta_at(t_minus)
        if cand < 0.0:
            return max(cand, -ETA_BOUND)
    elif t_minus == 0.0 and lam == 0.0:
        # zero count, no penalty: optimum is -inf, settle at the clamp
        return -ETA_BOUND
    return 0.0


def fit_sage(
    target: CountVector,
    background: BackgroundModel,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SageFit:
    """Fit the deviation vector by coordinate descent. See module docstring."""
    if lam < 0:
        raise SageError("lambda must be nonnegative")
    if tol <= 0:
        raise SageError("tol must be positive")
    if max_iter < 1:
        raise SageError("max_iter must be >= 1")
    if target.vocab_size != background.m.shape[0]:
        raise SageError("target counts and background model have different sizes")

    c = np.asarray(target.counts, dtype=float)
    n_total = float(target.total)
    m = background.m
    v = target.vocab_size
    eta = np.zeros(v)

    def exact_objective() -> float:
        val = penalized_objective(eta, target, background, lam)
        if not math.isfinite(val):
            raise SageError("non-finite objective; inputs need smoothing")
        return val

    trace = [exact_objective()]
    if n_total == 0.0:
        # nothing to fit: zero deviations are optimal for an empty target
        return SageFit(eta=eta, lam=lam, iterations=0, converged=True, objective_trace=trace)

    log_z = float(logsumexp(m))
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        for i in range(v):
            s_i = m[i] + eta[i]
            q_i = math.exp(s_i - log_z)
            if q_i >= 1.0 - 1e-12:
                continue  # coordinate holds all mass; leave it in place
            log_zrest = log_z + math.log1p(-q_i)
            new_eta = _coordinate_minimizer(c[i], n_total, m[i], log_zrest, lam)
            d = new_eta - eta[i]
            if d == 0.0:
                continue
            eta[i] = new_eta
            # Z' = Z_rest + exp(s_i + d)
            log_z = float(np.logaddexp(log_zrest, s_i + d))
        log_z = float(logsumexp(m + eta))  # re-anchor against incremental drift
        if lam > 0.0 and v > 0:
            # The likelihood is invariant under constant shifts of eta, and the
            # median minimizes the L1 term over shifts. Recentering is free and
            # removes the flat direction coordinate steps crawl along when
            # lambda is small.
            shift = float(np.median(eta))
            if shift != 0.0:
                eta -= shift
                np.clip(eta, -ETA_BOUND, ETA_BOUND, out=eta)
                log_z = float(logsumexp(m + eta))
        obj = exact_objective()
        improvement = trace[-1] - obj
        if improvement < 0:
            converged = True  # numerical floor; do not record an uptick
            break
        trace.append(obj)
        if improvement < tol:
            converged = True
            break

    if lam == 0.0 and v > 0:
        # The unpenalized objective is shift-invariant in eta; pin the
        # representative with minimal L1 norm (median-centered).
        eta = eta - float(np.median(eta))
    if v > 0:
        eta[np.abs(eta) < 1e-12] = 0.0  # shift residue, not signal
        np.clip(eta, -ETA_BOUND, ETA_BOUND, out=eta)  # shifts must not leak past the clamp
    return SageFit(
        eta=eta, lam=lam, iterations=iterations, converged=converged, objective_trace=trace
    )


@dataclass
class LambdaSweep:
    chosen: SageFit
    fits: dict[float, SageFit] = field(default_factory=dict)
    fallback: bool = False


def sweep_lambda(
    target: CountVector,
    background: BackgroundModel,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    min_terms: int = DEFAULT_MIN_TERMS,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> LambdaSweep:
    """Fit every lambda on the grid; keep the largest retaining >= min_terms
    positive-eta terms, falling back to the most-retaining (smallest) lambda
    when the floor is unreachable."""
    if not grid:
        raise SageError("lambda grid must be non-empty")
    fits: dict[float, SageFit] = {}
    for lam in sorted(grid):
        fits[lam] = fit_sage(target, background, lam, tol=tol, max_iter=max_iter)

    def retained(fit: SageFit) -> int:
        return int(np.count_nonzero(fit.eta > 0))

    eligible = [lam for lam in sorted(grid) if retained(fits[lam]) >= min_terms]
    if eligible:
        return LambdaSweep(chosen=fits[max(eligible)], fits=fits, fallback=False)
    best = max(sorted(grid), key=lambda lam: (retained(fits[lam]), -lam))
    return LambdaSweep(chosen=fits[best], fits=fits, fallback=True)


def rank_insider_terms(
    fit: SageFit,
    vocab: Vocabulary,
    target: CountVector,
    background: CountVector,
    recent: CountVector,
    min_recent: int,
    annotations: Optional[dict[str, str]] = None,
) -> list[InsiderTerm]:
    """Positive-deviation terms still in recent use, ranked for the report.

    Order: eta descending, then target count descending, then term.
    """
    sizes = {len(vocab), target.vocab_size, background.vocab_size, recent.vocab_size}
    if len(sizes) != 1:
        raise SageError("vocab, counts and fit must be aligned")
    if fit.eta.shape[0] != len(vocab):
        raise SageError("fit does not match vocabulary size")
    annotations = annotations or {}
    terms = [
        InsiderTerm(
            term=vocab.terms[i],
            eta_score=float(fit.eta[i]),
            target_count=int(target.counts[i]),
            background_count=int(background.counts[i]),
            recent_count=int(recent.counts[i]),
            annotation=annotations.get(vocab.terms[i]),
        )
        for i in range(len(vocab))
        if fit.eta[i] > 0 and recent.counts[i] >= min_recent
    ]
    terms.sort(key=lambda t: (-t.eta_score, -t.target_count, t.term))
    return terms


def write_term_report(
    path: str | Path,
    terms: Sequence[InsiderTerm],
    header: Optional[dict[str, object]] = None,
) -> None:
    """Tabular term report; '#'-prefixed header lines record the run choices."""
    lines = []
    for key, value in (header or {}).items():
        lines.append(f"# {key}: {value}")
    lines.append("term\teta\ttarget_count\tbackground_count\trecent_count\tannotation")
    for t in terms:
        lines.append(
            f"{t.term}\t{t.eta_score:.6f}\t{t.target_count}\t{t.background_count}"
            f"\t{t.recent_count}\t{t.annotation or ''}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_term_report(path: str | Path) -> list[InsiderTerm]:
    terms: list[InsiderTerm] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#") or line.startswith("term\t"):
            continue
        term, eta, tc, bc, rc, annotation = line.split("\t")
        terms.append(
            InsiderTerm(
                term=term,
                eta_score=float(eta),
                target_count=int(tc),
                background_count=int(bc),
                recent_count=int(rc),
                annotation=annotation or None,
            )
        )
    return terms
