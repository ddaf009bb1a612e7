"""Acquisition functions and locally penalized batch selection (minimization)."""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Union

import numpy as np
from scipy.stats import norm

from src.core.sampling import lhs_sample
from src.core.surrogate import GpModel
from src.utils.errors import InsufficientCandidatesError
from src.utils.logger import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

PERTURBATION_SIGMA = 0.02
PERTURBATIONS_PER_POINT = 2


class AcquisitionKind(str, Enum):
    EI = "ei"
    MPI = "mpi"
    LCB = "lcb"


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def acq_ei(mu: ArrayLike, s: ArrayLike, best: ArrayLike) -> ArrayLike:
    """Expected improvement below `best`; max(best - mu, 0) where s == 0."""
    mu, s, best = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, s, best)))
    improvement = best - mu
    safe_s = np.where(s > 0, s, 1.0)
    z = improvement / safe_s
    ei = improvement * norm.cdf(z) + safe_s * norm.pdf(z)
    ei = np.where(s > 0, ei, np.maximum(improvement, 0.0))
    return _scalar_or_array(np.maximum(ei, 0.0))


def acq_mpi(mu: ArrayLike, s: ArrayLike, best: ArrayLike) -> ArrayLike:
    """Probability of improving on `best`; a step function where s == 0."""
    mu, s, best = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, s, best)))
    safe_s = np.where(s > 0, s, 1.0)
    pi = norm.cdf((best - mu) / safe_s)
    pi = np.where(s > 0, pi, (mu < best).astype(float))
    return _scalar_or_array(pi)


def acq_lcb(mu: ArrayLike, s: ArrayLike, beta: float) -> ArrayLike:
    """Lower confidence bound; lower is better."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return _scalar_or_array(np.asarray(mu, dtype=float) - beta * np.asarray(s, dtype=float))


def acquisition_values(model: GpModel, kind: AcquisitionKind, candidates: np.ndarray,
                       best: Optional[float] = None, beta: float = 2.0) -> np.ndarray:
    """Raw acquisition value of every candidate row."""
    mean, var = model.predict(candidates)
    s = np.sqrt(var)
    if best is None:
        best = float(np.min(model.train_y))

    kind = AcquisitionKind(kind)
    if kind is AcquisitionKind.EI:
        return np.atleast_1d(acq_ei(mean, s, best))
    if kind is AcquisitionKind.MPI:
        return np.atleast_1d(acq_mpi(mean, s, best))
    return np.atleast_1d(acq_lcb(mean, s, beta))


def desirability(kind: AcquisitionKind, values: np.ndarray) -> np.ndarray:
    """Non-negative, higher-is-better score used by the greedy selector."""
    if AcquisitionKind(kind) is AcquisitionKind.LCB:
        return np.max(values) - values
    return np.asarray(values, dtype=float).copy()


@dataclass(frozen=True)
class BatchProposal:
    """Selected points in selection order with their raw acquisition values."""

    points: np.ndarray
    acq_values: np.ndarray
    kind: AcquisitionKind

    def __len__(self) -> int:
        return len(self.points)

    def tolist(self) -> List[List[float]]:
        return self.points.tolist()


def candidate_set(model: GpModel, pool: int, rng: np.random.Generator) -> np.ndarray:
    """LHS pool plus Gaussian perturbations of the training inputs, inside the unit cube."""
    n = model.train_x.shape[1]
    lhs = lhs_sample(n, pool, rng)
    local = np.repeat(model.train_x, PERTURBATIONS_PER_POINT, axis=0)
    local = np.clip(local + rng.normal(0.0, PERTURBATION_SIGMA, size=local.shape), 0.0, 1.0)
    return np.vstack([lhs, local])


def select_penalized(scores: np.ndarray, candidates: np.ndarray, b: int, radius: float) -> List[int]:
    """Greedy argmax, shrinking scores near each pick by min(1, distance / radius)."""
    scores = np.asarray(scores, dtype=float).copy()
    excluded = np.zeros(len(scores), dtype=bool)
    chosen: List[int] = []

    for _ in range(b):
        live = np.where(excluded, -np.inf, scores)
        idx = int(np.argmax(live))
        if excluded[idx]:
            raise InsufficientCandidatesError(int(np.count_nonzero(~excluded)) + len(chosen), b)
        chosen.append(idx)

        dist = np.linalg.norm(candidates - candidates[idx], axis=1)
        scores = scores * np.minimum(1.0, dist / radius)
        excluded |= dist == 0.0

    return chosen


def propose_batch(model: GpModel, kind: AcquisitionKind, b: int, radius: float, pool: int,
                  rng: np.random.Generator, best: Optional[float] = None, beta: float = 2.0) -> BatchProposal:
    """Pick b distinct points from a dense candidate set under local penalization."""
    if b < 1:
        raise ValueError("batch size must be >= 1")
    if pool < b:
        raise InsufficientCandidatesError(pool, b)
    if radius <= 0:
        raise ValueError("penalization radius must be positive")

    kind = AcquisitionKind(kind)
    candidates = candidate_set(model, pool, rng)
    values = acquisition_values(model, kind, candidates, best=best, beta=beta)
    chosen = select_penalized(desirability(kind, values), candidates, b, radius)

    logger.debug(f"Proposed {b} points ({kind.value}) from {len(candidates)} candidates")
    return BatchProposal(points=candidates[chosen].copy(), acq_values=values[chosen].copy(), kind=kind)
