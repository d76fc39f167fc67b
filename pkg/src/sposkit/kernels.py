"""Unary RBF interaction kernel, its gradient, and bandwidth selection.

The kernel is K(z) = exp(-||z||^2 / bandwidth_sq), an even function with
K(0) = 1, and its gradient grad K(z) = -(2 / bandwidth_sq) * K(z) * z is
odd. The squared bandwidth is either fixed or re-estimated from the
current particle set with the median heuristic
``median(pairwise distance)^2 / max(ln M, 1)``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ConfigurationError

FIXED = "fixed"
MEDIAN = "median"

#: bandwidth_sq used when every pairwise distance is zero
DEGENERATE_BANDWIDTH_FLOOR = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    """Parameterization of the RBF kernel.

    In ``fixed`` mode ``bandwidth_sq`` is used as-is at every evaluation.
    In ``median`` mode the squared bandwidth is re-estimated from the
    particle set each time the spec is resolved, and ``bandwidth_sq`` is
    ignored. ``floor`` replaces a degenerate (zero) median estimate.
    """

    bandwidth_sq: float | None = None
    mode: str = FIXED
    floor: float = DEGENERATE_BANDWIDTH_FLOOR

    def __post_init__(self):
        if self.mode not in (FIXED, MEDIAN):
            raise ConfigurationError(f"unknown kernel mode {self.mode!r}")
        if self.mode == FIXED:
            if self.bandwidth_sq is None:
                raise ConfigurationError("fixed kernel mode requires bandwidth_sq")
            bw = float(self.bandwidth_sq)
            if not math.isfinite(bw) or bw <= 0.0:
                raise ConfigurationError(f"bandwidth_sq must be positive, got {bw}")
        if not (float(self.floor) > 0.0):
            raise ConfigurationError("bandwidth floor must be positive")

    def resolve(self, particles) -> "KernelSpec":
        """Return a fixed-mode spec with a concrete bandwidth for ``particles``.

        A single particle has no pairwise distances; the floor is used
        (the kernel value between a particle and itself is 1 regardless).
        """
        if self.mode == FIXED:
            return self
        pos = _positions(particles)
        if pos.shape[0] < 2:
            return KernelSpec(bandwidth_sq=self.floor)
        return KernelSpec(bandwidth_sq=median_bandwidth(pos, floor=self.floor))


def _positions(particles):
    pos = np.asarray(getattr(particles, "positions", particles), dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    if pos.ndim != 2:
        raise ValueError(f"particle array must be 1-D or 2-D, got shape {pos.shape}")
    return pos


def _required_bandwidth(spec: KernelSpec) -> float:
    if spec.mode != FIXED or spec.bandwidth_sq is None:
        raise ConfigurationError(
            "kernel spec must be resolved to a concrete bandwidth before evaluation"
        )
    return float(spec.bandwidth_sq)


def kernel_eval(z, spec: KernelSpec) -> float:
    """Evaluate K(z) = exp(-||z||^2 / bandwidth_sq). Returns a value in (0, 1]."""
    bw = _required_bandwidth(spec)
    z = np.asarray(z, dtype=float).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("kernel input must be finite")
    return float(np.exp(-np.dot(z, z) / bw))


def kernel_grad(z, spec: KernelSpec) -> np.ndarray:
    """Gradient of ``kernel_eval``: -(2 / bandwidth_sq) * K(z) * z."""
    bw = _required_bandwidth(spec)
    z = np.asarray(z, dtype=float).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("kernel input must be finite")
    k = np.exp(-np.dot(z, z) / bw)
    return (-2.0 / bw) * k * z


@lru_cache(maxsize=32)
def _triu_indices(m):
    return np.triu_indices(m, k=1)


def squared_distance_matrix(positions: np.ndarray) -> np.ndarray:
    """All pairwise squared Euclidean distances of the rows, as an (M, M) matrix."""
    pos = _positions(positions)
    if pos.shape[1] == 1:
        d = pos[:, 0, None] - pos[None, :, 0]
        return d * d
    sq = np.einsum("ij,ij->i", pos, pos)
    gram = pos @ pos.T
    out = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(out, 0.0, out=out)
    return out


def median_bandwidth_sq(sqdist: np.ndarray, floor: float = DEGENERATE_BANDWIDTH_FLOOR) -> float:
    """Median-heuristic squared bandwidth from a squared-distance matrix.

    med^2 / max(ln M, 1) with med the median of the M(M-1)/2 pairwise
    distances; ``floor`` when the median distance is zero.
    """
    m = sqdist.shape[0]
    if m < 2:
        raise ValueError(f"median heuristic needs at least 2 particles, got {m}")
    iu = _triu_indices(m)
    med = float(np.median(np.sqrt(sqdist[iu])))
    if med <= 0.0:
        return float(floor)
    return med * med / max(math.log(m), 1.0)


def median_bandwidth(particles, floor: float = DEGENERATE_BANDWIDTH_FLOOR) -> float:
    """Median-heuristic squared bandwidth for a particle set (rows are particles)."""
    pos = _positions(particles)
    return median_bandwidth_sq(squared_distance_matrix(pos), floor=floor)


def kernel_matrix(positions: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Matrix of K(x_i - x_j) for all particle pairs, using a resolved spec."""
    bw = _required_bandwidth(spec)
    return np.exp(squared_distance_matrix(positions) / -bw)


def kernel_grad_sums(positions: np.ndarray, kmat: np.ndarray, bandwidth_sq: float) -> np.ndarray:
    """Row i holds sum_j grad K(x_i - x_j), computed from a kernel matrix.

    Uses sum_j K_ij (x_i - x_j) = rowsum_i * x_i - (K @ x), which avoids
    materializing the (M, M, d) difference tensor.
    """
    pos = _positions(positions)
    rowsum = kmat.sum(axis=1)
    return (-2.0 / float(bandwidth_sq)) * (rowsum[:, None] * pos - kmat @ pos)
