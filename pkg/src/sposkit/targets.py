"""Built-in sampling targets with exact per-term gradients.

A target is a potential energy U(theta) = sum_q U_q(theta) over
``num_terms`` additive components, with gradient
F(theta) = sum_q F_q(theta). Minibatch gradient estimates rescale a
random subset of the terms: (N / B) * sum_{q in batch} F_q(theta),
which is unbiased for F.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .exceptions import ConfigurationError
from . import rng as _rng


@dataclass(frozen=True)
class ReferenceInfo:
    """Closed-form facts about a target used by diagnostics.

    Any field may be None when the quantity is unknown for the target.
    ``quantile`` maps u in (0, 1) to the distribution quantile and must
    accept numpy arrays. ``mode_centers`` is an (n_modes, dim) array.
    """

    mean: Optional[float] = None
    variance: Optional[float] = None
    second_moment: Optional[float] = None
    quantile: Optional[Callable] = None
    mode_centers: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TargetModel:
    """Additive potential with per-term gradients and optional references.

    ``grad_term(q, theta)`` returns F_q(theta) as a (dim,) array and
    ``energy_term(q, theta)`` returns U_q(theta) as a float. When
    ``batch_gradient`` is present it computes the rescaled minibatch
    gradient for a whole (M, dim) position block at once; it must agree
    with the per-term definition.
    """

    dim: int
    num_terms: int
    grad_term: Callable[[int, np.ndarray], np.ndarray]
    energy_term: Optional[Callable[[int, np.ndarray], float]] = None
    batch_gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    reference: Optional[ReferenceInfo] = None
    name: str = ""

    def grad(self, theta) -> np.ndarray:
        """Full gradient F(theta) = sum_q F_q(theta)."""
        theta = np.asarray(theta, dtype=float).ravel()
        total = np.zeros(self.dim)
        for q in range(self.num_terms):
            total += np.asarray(self.grad_term(q, theta), dtype=float).ravel()
        return total

    def energy(self, theta) -> float:
        """Full potential U(theta) = sum_q U_q(theta)."""
        if self.energy_term is None:
            raise ValueError(f"target {self.name!r} does not expose energies")
        theta = np.asarray(theta, dtype=float).ravel()
        return float(sum(self.energy_term(q, theta) for q in range(self.num_terms)))


def _as_batch(batch, num_terms):
    idx = np.asarray(batch, dtype=int).ravel()
    if idx.size == 0:
        raise ValueError("batch must contain at least one index")
    if idx.min() < 0 or idx.max() >= num_terms:
        raise ValueError(
            f"batch indices must lie in [0, {num_terms - 1}], got range "
            f"[{idx.min()}, {idx.max()}]"
        )
    return idx


def stochastic_gradient(target: TargetModel, position, batch) -> np.ndarray:
    """Rescaled minibatch gradient (N / B) * sum_{q in batch} F_q(position)."""
    idx = _as_batch(batch, target.num_terms)
    position = np.asarray(position, dtype=float).ravel()
    if position.size != target.dim:
        raise ValueError(f"position has size {position.size}, expected {target.dim}")
    total = np.zeros(target.dim)
    for q in idx:
        total += np.asarray(target.grad_term(int(q), position), dtype=float).ravel()
    return (target.num_terms / idx.size) * total


def ensemble_stochastic_gradient(target: TargetModel, positions: np.ndarray, batch) -> np.ndarray:
    """Rescaled minibatch gradient for every row of an (M, dim) block."""
    idx = _as_batch(batch, target.num_terms)
    positions = np.asarray(positions, dtype=float)
    if target.batch_gradient is not None:
        return target.batch_gradient(positions, idx)
    return np.stack([stochastic_gradient(target, row, idx) for row in positions])


def sample_batch(num_terms: int, batch_size: int, generator) -> np.ndarray:
    """Uniform random subset of ``batch_size`` term indices, without replacement."""
    if batch_size < 1 or batch_size > num_terms:
        raise ValueError(
            f"batch size must lie in [1, {num_terms}], got {batch_size}"
        )
    return generator.choice(num_terms, size=batch_size, replace=False)


def gaussian1d_target(mean: float, variance: float) -> TargetModel:
    """1-D Gaussian potential U(theta) = (theta - mean)^2 / (2 variance)."""
    if not (variance > 0) or not math.isfinite(variance):
        raise ConfigurationError(f"variance must be positive, got {variance}")
    mean = float(mean)
    inv_var = 1.0 / float(variance)
    sd = math.sqrt(variance)

    def grad_term(q, theta):
        return (theta - mean) * inv_var

    def energy_term(q, theta):
        return float(0.5 * (theta[0] - mean) ** 2 * inv_var)

    def batch_gradient(positions, batch):
        return (positions - mean) * inv_var

    reference = ReferenceInfo(
        mean=mean,
        variance=float(variance),
        second_moment=float(variance) + mean * mean,
        quantile=lambda u: mean + sd * ndtri(u),
    )
    return TargetModel(
        dim=1,
        num_terms=1,
        grad_term=grad_term,
        energy_term=energy_term,
        batch_gradient=batch_gradient,
        reference=reference,
        name=f"gaussian1d(mean={mean}, var={variance})",
    )


def conjugate_posterior_target(data) -> TargetModel:
    """Posterior for x_q ~ N(theta, 1) observations under a N(0, 1) prior.

    Each term carries one likelihood factor plus a 1/N share of the
    prior: U_q(theta) = (theta - x_q)^2 / 2 + theta^2 / (2N), so the
    minibatch gradient stays unbiased for the full posterior gradient.
    The exact posterior is N(sum(x) / (N + 1), 1 / (N + 1)).
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise ConfigurationError("conjugate posterior target needs at least one datum")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("data must be finite")
    n = x.size
    post_mean = float(x.sum() / (n + 1))
    post_var = 1.0 / (n + 1)
    post_sd = math.sqrt(post_var)

    def grad_term(q, theta):
        return (theta - x[q]) + theta / n

    def energy_term(q, theta):
        t = theta[0]
        return float(0.5 * (t - x[q]) ** 2 + t * t / (2.0 * n))

    def batch_gradient(positions, batch):
        # (N/B) sum_{q in batch} [(theta - x_q) + theta/N]
        #   = (N+1) theta - (N/B) sum_{q in batch} x_q
        return (n + 1.0) * positions - (n / batch.size) * x[batch].sum()

    reference = ReferenceInfo(
        mean=post_mean,
        variance=post_var,
        second_moment=post_var + post_mean * post_mean,
        quantile=lambda u: post_mean + post_sd * ndtri(u),
    )
    return TargetModel(
        dim=1,
        num_terms=n,
        grad_term=grad_term,
        energy_term=energy_term,
        batch_gradient=batch_gradient,
        reference=reference,
        name=f"conjugate_posterior(n={n})",
    )


def synthetic_normal_data(size: int, mean: float = 2.0, sd: float = 1.0, seed: int = 0) -> np.ndarray:
    """Reproducible N(mean, sd^2) draws used by the posterior experiment."""
    g = _rng.data_generator(seed)
    return mean + sd * g.standard_normal(size)


_MULTIMODE_COEFFS = np.array(
    [-0.47, -0.83, -0.71, -0.02, 0.24, 0.01, 0.27, -0.37, 0.87, -0.37]
)
_MULTIMODE_FREQS = np.arange(1, 11) * (math.pi / 4.0)

_MODE_GRID_POINTS = 20001
_MODE_GRID_LO = -5.0
_MODE_GRID_HI = 5.0
_MODE_ENERGY_CUTOFF = 10.0


def _multimode_exponent(t):
    t = np.asarray(t, dtype=float)
    phases = _MULTIMODE_FREQS * (t[..., None] + 4.0)
    return 0.75 * t * t - 1.5 * np.sin(phases) @ _MULTIMODE_COEFFS


def _multimode_energy(t):
    return np.exp(_multimode_exponent(t))


def _multimode_grad(t):
    t = np.asarray(t, dtype=float)
    phases = _MULTIMODE_FREQS * (t[..., None] + 4.0)
    inner = 1.5 * t - 1.5 * (np.cos(phases) * _MULTIMODE_FREQS) @ _MULTIMODE_COEFFS
    return np.exp(_multimode_exponent(t)) * inner


def _find_mode_centers():
    grid = np.linspace(_MODE_GRID_LO, _MODE_GRID_HI, _MODE_GRID_POINTS)
    u = _multimode_energy(grid)
    interior = (u[1:-1] < u[:-2]) & (u[1:-1] < u[2:])
    keep = interior & (u[1:-1] < _MODE_ENERGY_CUTOFF)
    return grid[1:-1][keep]


def multimode1d_target() -> TargetModel:
    """Rough 1-D multi-mode potential built from a sinusoid mixture.

    U(theta) = exp(0.75 theta^2 - 1.5 sum_i c_i sin(pi i (theta + 4) / 4))
    over ten fixed coefficients c_i. The potential rises doubly
    exponentially away from the origin, so the density is effectively
    supported on [-5, 5]; mode centers are located once at construction
    by a dense grid search over that interval.
    """
    centers = _find_mode_centers()

    def grad_term(q, theta):
        return np.atleast_1d(_multimode_grad(theta[0]))

    def energy_term(q, theta):
        return float(_multimode_energy(theta[0]))

    def batch_gradient(positions, batch):
        return _multimode_grad(positions[:, 0])[:, None]

    reference = ReferenceInfo(mode_centers=centers[:, None])
    return TargetModel(
        dim=1,
        num_terms=1,
        grad_term=grad_term,
        energy_term=energy_term,
        batch_gradient=batch_gradient,
        reference=reference,
        name="multimode1d",
    )
