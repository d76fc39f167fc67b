"""Evaluation quantities computed on particle ensembles.

All functions are pure and read a snapshot of the particle positions;
they are invariant under particle permutation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class DiagnosticRecord:
    """One row of a run trace. Optional fields are None when the target
    lacks the reference information needed to compute them."""

    iteration: int
    epd: float
    test_fn_error: Optional[float] = None
    w1: Optional[float] = None
    modes_covered: Optional[int] = None


def _positions(particles):
    pos = np.asarray(getattr(particles, "positions", particles), dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    return pos


def epd(particles) -> float:
    """Ensemble spread: sqrt of the double sum of squared pairwise distances.

    Computed as sqrt(2 M sum_i ||x_i - mean||^2), which equals the
    ordered-pair double sum without forming the pairwise matrix.
    """
    pos = _positions(particles)
    m = pos.shape[0]
    centered = pos - pos.mean(axis=0)
    return float(np.sqrt(2.0 * m * np.einsum("ij,ij->", centered, centered)))


def squared_norm(theta):
    """Default test function ||theta||^2; accepts one vector or an (M, d) block."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim <= 1:
        return float(np.dot(theta.ravel(), theta.ravel()))
    return np.einsum("ij,ij->i", theta, theta)


def test_fn_error(particles, f, reference_expectation: float) -> float:
    """|ensemble average of f - reference expectation|."""
    pos = _positions(particles)
    values = f(pos)
    values = np.asarray(values, dtype=float)
    if values.shape != (pos.shape[0],):
        values = np.asarray([float(f(row)) for row in pos])
    return float(abs(values.mean() - float(reference_expectation)))


def w1_empirical_1d(samples, reference_quantile) -> float:
    """1-D 1-Wasserstein distance between an empirical sample and a reference.

    Approximates the integral of |Q_emp(u) - Q_ref(u)| over (0, 1) by
    sorting the samples and evaluating the reference quantile at the
    midpoints (i - 1/2) / M, which avoids the diverging endpoints.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("need at least one sample")
    grid = (np.arange(s.size) + 0.5) / s.size
    q = np.asarray(reference_quantile(grid), dtype=float)
    if q.shape != grid.shape:
        q = np.asarray([float(reference_quantile(u)) for u in grid])
    if np.any(np.diff(q) < 0):
        raise ValueError("reference quantile is not monotone on the evaluation grid")
    return float(np.abs(s - q).mean())


def mode_coverage(particles, mode_centers, radius: float) -> int:
    """Number of mode centers with at least one particle within ``radius``."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    pos = _positions(particles)
    centers = _positions(mode_centers)
    if centers.shape[0] == 0:
        raise ValueError("mode center list is empty")
    diff = pos[:, None, :] - centers[None, :, :]
    dist_sq = np.einsum("ijk,ijk->ij", diff, diff)
    return int(np.count_nonzero(dist_sq.min(axis=0) <= radius * radius))
