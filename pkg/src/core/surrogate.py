"""Gaussian-process surrogate of the loss surface.

Matern 5/2 kernel with one lengthscale per dimension (ARD), a constant mean and
Gaussian observation noise. Hyperparameters are fitted by maximizing the log
marginal likelihood with L-BFGS-B in log space.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy import linalg, optimize

from src.utils.errors import EmptyExperimentError, SingularKernelError
from src.utils.logger import get_logger

if TYPE_CHECKING:
    from src.core.state import Sample

logger = get_logger(__name__)

SQRT5 = np.sqrt(5.0)
LOG_2PI = np.log(2.0 * np.pi)

LENGTHSCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_BOUNDS = (1e-4, 1e2)
NOISE_BOUNDS = (1e-10, 1.0)
JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

# Box the random restarts are drawn from (log-uniform), inside the hard bounds.
RESTART_LENGTHSCALES = (1e-2, 1e1)
RESTART_SIGNAL = (1e-3, 1.0)
RESTART_NOISE = (1e-8, 1e-1)

DEFAULT_LENGTHSCALE = 0.3
DEFAULT_NOISE = 1e-4
PENALTY = 1e10


class GpHyperparams(BaseModel):
    """Kernel and likelihood hyperparameters."""

    lengthscales: List[float] = Field(..., min_length=1)
    signal_variance: float = Field(..., ge=SIGNAL_BOUNDS[0], le=SIGNAL_BOUNDS[1])
    noise_variance: float = Field(..., ge=NOISE_BOUNDS[0], le=NOISE_BOUNDS[1])
    mean_const: float = 0.0

    @field_validator("lengthscales")
    @classmethod
    def validate_lengthscales(cls, v: List[float]) -> List[float]:
        lo, hi = LENGTHSCALE_BOUNDS
        if any(not (lo <= l <= hi) for l in v):
            raise ValueError(f"lengthscales must lie in [{lo:g}, {hi:g}]")
        return v

    @property
    def n(self) -> int:
        return len(self.lengthscales)

    def to_theta(self) -> np.ndarray:
        """[log l_1..l_N, log signal, log noise, mean]"""
        return np.concatenate([
            np.log(self.lengthscales),
            [np.log(self.signal_variance), np.log(self.noise_variance), self.mean_const],
        ])

    @classmethod
    def from_theta(cls, theta: Sequence[float], n: int) -> "GpHyperparams":
        theta = np.asarray(theta, dtype=float)
        return cls(
            lengthscales=np.clip(np.exp(theta[:n]), *LENGTHSCALE_BOUNDS).tolist(),
            signal_variance=float(np.clip(np.exp(theta[n]), *SIGNAL_BOUNDS)),
            noise_variance=float(np.clip(np.exp(theta[n + 1]), *NOISE_BOUNDS)),
            mean_const=float(theta[n + 2]),
        )

    @classmethod
    def default_for(cls, y: np.ndarray, n: int) -> "GpHyperparams":
        """Untuned starting point derived from the observations."""
        y = np.asarray(y, dtype=float)
        return cls(
            lengthscales=[DEFAULT_LENGTHSCALE] * n,
            signal_variance=float(np.clip(np.var(y), *SIGNAL_BOUNDS)),
            noise_variance=DEFAULT_NOISE,
            mean_const=float(np.mean(y)),
        )


class FitOptions(BaseModel):
    restarts: int = Field(5, description="Seeded log-uniform restarts besides the default start", ge=0)
    fixed_noise: Optional[float] = Field(None, ge=NOISE_BOUNDS[0], le=NOISE_BOUNDS[1])
    max_iter: int = Field(200, ge=1)


# Kernel

def matern52(xa: np.ndarray, xb: np.ndarray, lengthscales: np.ndarray, signal: float) -> np.ndarray:
    scaled = (xa[:, None, :] - xb[None, :, :]) / lengthscales
    r = np.sqrt(np.sum(scaled * scaled, axis=-1))
    sr = SQRT5 * r
    return signal * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


def _kernel_with_grads(x: np.ndarray, lengthscales: np.ndarray, signal: float) -> Tuple[np.ndarray, List[np.ndarray]]:
    """K_f(x, x) and dK_f / d log l_d for every dimension."""
    diff = x[:, None, :] - x[None, :, :]
    scaled_sq = (diff / lengthscales) ** 2
    r = np.sqrt(np.sum(scaled_sq, axis=-1))
    sr = SQRT5 * r
    decay = np.exp(-sr)
    k = signal * (1.0 + sr + sr * sr / 3.0) * decay
    common = signal * (5.0 / 3.0) * (1.0 + sr) * decay
    grads = [common * scaled_sq[..., d] for d in range(x.shape[1])]
    return k, grads


def cholesky_with_jitter(k: np.ndarray) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter up to 1e-4."""
    eye = np.eye(len(k))
    for jitter in JITTER_LEVELS:
        try:
            return linalg.cholesky(k + jitter * eye, lower=True), jitter
        except linalg.LinAlgError:
            continue
    with np.errstate(all="ignore"):
        condition = float(np.linalg.cond(k))
    raise SingularKernelError(condition)


def log_marginal_likelihood(theta: Sequence[float], x: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient in log-parameter space.

    theta = [log l_1..l_N, log signal_variance, log noise_variance, mean_const]
    """
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_obs, n = x.shape

    lengthscales = np.exp(theta[:n])
    signal = np.exp(theta[n])
    noise = np.exp(theta[n + 1])
    mean = theta[n + 2]

    k_f, dk_dlog_l = _kernel_with_grads(x, lengthscales, signal)
    k = k_f + noise * np.eye(n_obs)
    chol, _ = cholesky_with_jitter(k)

    resid = y - mean
    alpha = linalg.cho_solve((chol, True), resid)
    value = -0.5 * resid @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n_obs * LOG_2PI

    k_inv = linalg.cho_solve((chol, True), np.eye(n_obs))
    inner = np.outer(alpha, alpha) - k_inv
    grad = np.empty(n + 3)
    for d in range(n):
        grad[d] = 0.5 * np.sum(inner * dk_dlog_l[d])
    grad[n] = 0.5 * np.sum(inner * k_f)
    grad[n + 1] = 0.5 * noise * np.trace(inner)
    grad[n + 2] = np.sum(alpha)
    return float(value), grad


# Model

@dataclass(frozen=True)
class GpModel:
    """A GP conditioned on training data; immutable, safe to query from many threads."""

    train_x: np.ndarray
    train_y: np.ndarray
    hyper: GpHyperparams
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0
    log_marginal_likelihood: float = float("nan")

    @classmethod
    def from_hyperparams(cls, x: np.ndarray, y: np.ndarray, hyper: GpHyperparams) -> "GpModel":
        """Condition on (x, y) with fixed hyperparameters."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if len(x) != len(y):
            raise ValueError("x and y must have the same number of rows")
        if x.shape[1] != hyper.n:
            raise ValueError(f"hyperparameters cover {hyper.n} dims, data has {x.shape[1]}")

        lengthscales = np.asarray(hyper.lengthscales)
        k = matern52(x, x, lengthscales, hyper.signal_variance) + hyper.noise_variance * np.eye(len(x))
        chol, jitter = cholesky_with_jitter(k)
        if jitter > 0:
            logger.warning(f"Kernel matrix needed jitter {jitter:g} to factorize")

        resid = y - hyper.mean_const
        alpha = linalg.cho_solve((chol, True), resid)
        lml = -0.5 * resid @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * len(y) * LOG_2PI
        return cls(train_x=x, train_y=y, hyper=hyper, chol=chol, alpha=alpha,
                   jitter=jitter, log_marginal_likelihood=float(lml))

    @property
    def n_train(self) -> int:
        return len(self.train_y)

    def predict(self, xq: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance (clamped at 0) for an (m, N) query batch."""
        xq = np.atleast_2d(np.asarray(xq, dtype=float))
        lengthscales = np.asarray(self.hyper.lengthscales)
        k_star = matern52(xq, self.train_x, lengthscales, self.hyper.signal_variance)
        mean = self.hyper.mean_const + k_star @ self.alpha
        v = linalg.solve_triangular(self.chol, k_star.T, lower=True)
        var = self.hyper.signal_variance - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)


def posterior(model: GpModel, x: np.ndarray) -> Tuple[float, float]:
    """(mean, variance) at a single control vector."""
    mean, var = model.predict(np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(var[0])


# Fitting

def _bounds(y: np.ndarray, n: int, fixed_noise: Optional[float]) -> List[Tuple[float, float]]:
    log_l = (np.log(LENGTHSCALE_BOUNDS[0]), np.log(LENGTHSCALE_BOUNDS[1]))
    if fixed_noise is None:
        log_noise = (np.log(NOISE_BOUNDS[0]), np.log(NOISE_BOUNDS[1]))
    else:
        log_noise = (np.log(fixed_noise), np.log(fixed_noise))
    return (
        [log_l] * n
        + [(np.log(SIGNAL_BOUNDS[0]), np.log(SIGNAL_BOUNDS[1])), log_noise]
        + [(float(np.min(y)) - 1.0, float(np.max(y)) + 1.0)]
    )


def _random_start(rng: np.random.Generator, y: np.ndarray, n: int, fixed_noise: Optional[float]) -> np.ndarray:
    def log_uniform(lo, hi, size=None):
        return rng.uniform(np.log(lo), np.log(hi), size)

    noise = np.log(fixed_noise) if fixed_noise is not None else log_uniform(*RESTART_NOISE)
    return np.concatenate([
        log_uniform(*RESTART_LENGTHSCALES, n),
        [log_uniform(*RESTART_SIGNAL), noise, rng.uniform(np.min(y), np.max(y))],
    ])


def fit_arrays(x: np.ndarray, y: np.ndarray, opts: Optional[FitOptions] = None,
               rng: Optional[np.random.Generator] = None) -> GpModel:
    """Fit hyperparameters to (x, y) and return the conditioned model."""
    opts = opts or FitOptions()
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 2:
        raise EmptyExperimentError(f"surrogate needs at least 2 scored samples, got {len(y)}")
    n = x.shape[1]

    default = GpHyperparams.default_for(y, n)
    if opts.fixed_noise is not None:
        default = default.model_copy(update={"noise_variance": opts.fixed_noise})
    bounds = _bounds(y, n, opts.fixed_noise)

    def objective(theta):
        try:
            value, grad = log_marginal_likelihood(theta, x, y)
        except SingularKernelError:
            return PENALTY, np.zeros_like(theta)
        if not np.isfinite(value):
            return PENALTY, np.zeros_like(theta)
        return -value, -grad

    starts = [default.to_theta()] + [_random_start(rng, y, n, opts.fixed_noise) for _ in range(opts.restarts)]

    best_theta = starts[0]
    best_value, _ = objective(best_theta)
    for start in starts:
        result = optimize.minimize(objective, start, jac=True, method="L-BFGS-B",
                                   bounds=bounds, options={"maxiter": opts.max_iter})
        if result.fun < best_value:
            best_value, best_theta = float(result.fun), result.x

    hyper = GpHyperparams.from_theta(best_theta, n)
    if opts.fixed_noise is not None:
        hyper = hyper.model_copy(update={"noise_variance": opts.fixed_noise})
    model = GpModel.from_hyperparams(x, y, hyper)
    logger.debug(
        f"GP fit on {len(y)} points: lml={model.log_marginal_likelihood:.4f} "
        f"lengthscales={np.round(hyper.lengthscales, 4).tolist()} noise={hyper.noise_variance:.3g}"
    )
    return model


def fit(samples: Sequence["Sample"], opts: Optional[FitOptions] = None,
        rng: Optional[np.random.Generator] = None) -> GpModel:
    """Fit a GP to scored samples (skipped samples are ignored)."""
    scored = [s for s in samples if not getattr(s, "skipped", False)]
    if len(scored) < 2:
        raise EmptyExperimentError(f"surrogate needs at least 2 scored samples, got {len(scored)}")
    x = np.array([s.x for s in scored], dtype=float)
    y = np.array([s.loss for s in scored], dtype=float)
    return fit_arrays(x, y, opts, rng)
