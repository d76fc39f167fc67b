"""Particle update rules and the run loop.

Four samplers share one drift structure. With G the (stochastic)
gradient of the potential, K the RBF kernel and M particles:

* ``sgld``: non-interacting Langevin step,
  theta <- theta - h/beta G + sqrt(2h/beta) xi.
* ``svgd``: deterministic interacting step,
  theta_i <- theta_i + h/M sum_j [-K(theta_i - theta_j) G_j
  + grad K(theta_i - theta_j)].
* ``pos``: svgd plus the extra drift -h/beta G_i (no noise).
* ``spos``: pos plus Gaussian noise sqrt(2h/beta) xi_i.

Every interacting term reads the pre-step snapshot, so updates are
order-independent. Stochastic steps accept a ``noise`` array in place
of a generator, which pins the Gaussian draws for tests.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels, rng, targets
from .diagnostics import DiagnosticRecord, epd, mode_coverage, squared_norm, test_fn_error, w1_empirical_1d
from .exceptions import ConfigurationError, DivergenceError
from .kernels import KernelSpec
from .targets import TargetModel, ensemble_stochastic_gradient, sample_batch

ALGORITHMS = ("sgld", "svgd", "pos", "spos")

FIXED = "fixed"
DECREASING = "decreasing"
GROWING = "growing"

_BATCH_GROWTH_EXPONENT = 100.0 / 99.0


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """M x d block of particle positions at some iteration."""

    positions: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] < 1:
            raise ValueError(f"positions must be an (M, d) array, got shape {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.iteration < 0:
            raise ValueError("iteration must be >= 0")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def num_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class GaussianInit:
    """Draw M starting particles i.i.d. N(mean, std^2) per coordinate.

    ``std`` may be zero, which places every particle exactly at ``mean``.
    """

    num_particles: int
    dim: int = 1
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.num_particles < 1 or self.dim < 1:
            raise ConfigurationError("num_particles and dim must be >= 1")
        if self.std < 0:
            raise ConfigurationError("std must be >= 0")


@dataclass(frozen=True)
class StepSchedule:
    """Step size h_k: ``fixed`` keeps h0, ``decreasing`` uses h0 / (k + 1)."""

    h0: float
    mode: str = FIXED

    def __post_init__(self):
        if not (self.h0 > 0) or not math.isfinite(self.h0):
            raise ConfigurationError(f"h0 must be positive, got {self.h0}")
        if self.mode not in (FIXED, DECREASING):
            raise ConfigurationError(f"unknown step schedule mode {self.mode!r}")


@dataclass(frozen=True)
class BatchSchedule:
    """Batch size B_k: ``fixed`` keeps b0, ``growing`` adds floor(ln(k+1)^(100/99))."""

    b0: int
    mode: str = FIXED

    def __post_init__(self):
        if self.b0 < 1:
            raise ConfigurationError(f"b0 must be >= 1, got {self.b0}")
        if self.mode not in (FIXED, GROWING):
            raise ConfigurationError(f"unknown batch schedule mode {self.mode!r}")


def step_size(k: int, schedule: StepSchedule) -> float:
    if k < 0:
        raise ValueError("iteration must be >= 0")
    if schedule.mode == DECREASING:
        return schedule.h0 / (k + 1)
    return schedule.h0


def batch_size(k: int, schedule: BatchSchedule, num_terms: int) -> int:
    if k < 0:
        raise ValueError("iteration must be >= 0")
    if schedule.b0 > num_terms:
        raise ConfigurationError(
            f"b0 = {schedule.b0} exceeds the number of terms {num_terms}"
        )
    if schedule.mode == GROWING:
        grown = schedule.b0 + math.floor(math.log(k + 1) ** _BATCH_GROWTH_EXPONENT)
        return min(num_terms, grown)
    return schedule.b0


@dataclass(frozen=True)
class SamplerConfig:
    """Everything needed to reproduce a run, apart from the target."""

    algorithm: str
    iterations: int
    seed: int = 0
    beta: float = 1.0
    step: StepSchedule = field(default_factory=lambda: StepSchedule(0.03))
    batch: BatchSchedule = field(default_factory=lambda: BatchSchedule(1))
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(mode=kernels.MEDIAN))
    diagnostics_every: int = 10
    mode_radius: float = 0.35

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}"
            )
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be >= 1, got {self.iterations}")
        if not (self.beta > 0) or not math.isfinite(self.beta):
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.diagnostics_every < 1:
            raise ConfigurationError("diagnostics_every must be >= 1")


@dataclass(frozen=True, eq=False)
class RunTrace:
    """Diagnostics, final state and the resolved config of one run.

    ``diverged_at`` is the iteration whose update produced a non-finite
    position; None for a clean run.
    """

    records: tuple
    final_ensemble: ParticleEnsemble
    config_echo: SamplerConfig
    diverged_at: Optional[int] = None


def _resolve_noise(shape, generator, noise):
    if noise is not None:
        arr = np.asarray(noise, dtype=float)
        if arr.shape != shape:
            raise ValueError(f"noise shape {arr.shape} does not match particles {shape}")
        return arr
    if generator is None:
        raise ValueError("either a generator or explicit noise is required")
    return generator.standard_normal(shape)


def _gradients(target, positions, batch):
    batch = np.asarray(batch, dtype=int)
    if batch.ndim == 1:
        return ensemble_stochastic_gradient(target, positions, batch)
    if batch.ndim == 2 and batch.shape[0] == positions.shape[0]:
        rows = [
            ensemble_stochastic_gradient(target, positions[i : i + 1], batch[i])[0]
            for i in range(positions.shape[0])
        ]
        return np.stack(rows)
    raise ValueError(
        f"batch must be a (B,) shared index set or an (M, B) per-particle block, "
        f"got shape {batch.shape}"
    )


def _step_core(ensemble, target, h, inv_beta, kernel, batch, noise_scaled):
    """Shared Euler update; ``kernel`` None drops the interaction terms."""
    if not (h > 0) or not math.isfinite(h):
        raise ValueError(f"step size must be positive, got {h}")
    x = ensemble.positions
    g = _gradients(target, x, batch)
    drift = -inv_beta * g
    if kernel is not None:
        spec = kernel.resolve(x)
        kmat = kernels.kernel_matrix(x, spec)
        interaction = kernels.kernel_grad_sums(x, kmat, spec.bandwidth_sq) - kmat @ g
        drift = drift + interaction / x.shape[0]
    new = x + h * drift
    if noise_scaled is not None:
        new = new + noise_scaled
    if not np.all(np.isfinite(new)):
        raise DivergenceError(
            f"non-finite particle position at iteration {ensemble.iteration}",
            iteration=ensemble.iteration,
        )
    return ParticleEnsemble(new, ensemble.iteration + 1)


def sgld_step(ensemble, target, h, beta, batch, generator=None, *, noise=None):
    """Langevin step; ``batch`` may be one shared (B,) index set or an
    (M, B) block giving each particle its own batch."""
    xi = _resolve_noise(ensemble.positions.shape, generator, noise)
    scaled = math.sqrt(2.0 * h / beta) * xi
    return _step_core(ensemble, target, h, 1.0 / beta, None, batch, scaled)


def svgd_step(ensemble, target, h, kernel, batch):
    """Deterministic interacting step (the infinite-temperature limit of spos)."""
    return _step_core(ensemble, target, h, 0.0, kernel, batch, None)


def pos_step_deterministic(ensemble, target, h, beta, kernel, batch):
    """Interacting step with the Langevin drift but the noise removed."""
    return _step_core(ensemble, target, h, 1.0 / beta, kernel, batch, None)


def spos_step(ensemble, target, h, beta, kernel, batch, generator=None, *, noise=None):
    """Interacting step with Langevin drift and injected Gaussian noise."""
    xi = _resolve_noise(ensemble.positions.shape, generator, noise)
    scaled = math.sqrt(2.0 * h / beta) * xi
    return _step_core(ensemble, target, h, 1.0 / beta, kernel, batch, scaled)


InitLike = Union[ParticleEnsemble, GaussianInit, np.ndarray, Sequence]


def materialize_init(init: InitLike, seed: int, dim: int) -> ParticleEnsemble:
    """Build the starting ensemble from an explicit array or a draw spec."""
    if isinstance(init, ParticleEnsemble):
        ens = init
    elif isinstance(init, GaussianInit):
        g = rng.init_generator(seed)
        draws = g.standard_normal((init.num_particles, init.dim))
        ens = ParticleEnsemble(init.mean + init.std * draws, 0)
    else:
        ens = ParticleEnsemble(np.asarray(init, dtype=float), 0)
    if ens.dim != dim:
        raise ConfigurationError(
            f"init dimension {ens.dim} does not match target dimension {dim}"
        )
    return ens


def _record(ensemble, target, mode_radius):
    ref = target.reference
    err = w1 = modes = None
    if ref is not None:
        if ref.second_moment is not None:
            err = test_fn_error(ensemble, squared_norm, ref.second_moment)
        if ref.quantile is not None and ensemble.dim == 1:
            w1 = w1_empirical_1d(ensemble.positions[:, 0], ref.quantile)
        if ref.mode_centers is not None:
            modes = mode_coverage(ensemble, ref.mode_centers, mode_radius)
    return DiagnosticRecord(
        iteration=ensemble.iteration,
        epd=epd(ensemble),
        test_fn_error=err,
        w1=w1,
        modes_covered=modes,
    )


def run_sampler(config: SamplerConfig, target: TargetModel, init: InitLike) -> RunTrace:
    """Run ``config.iterations`` steps and collect diagnostics.

    Diagnostics are recorded for the initial state, every
    ``diagnostics_every``-th iteration and the final state. Each
    iteration draws its batch indices before its noise from a stream
    derived from (seed, iteration); interacting samplers share one
    batch across particles while sgld gives each particle its own.
    A divergence stops the run, keeping the last valid state.
    """
    ensemble = materialize_init(init, config.seed, target.dim)
    if ensemble.iteration != 0:
        ensemble = ParticleEnsemble(ensemble.positions, 0)
    n = target.num_terms
    batch_size(0, config.batch, n)  # validate b0 <= n up front
    records = [_record(ensemble, target, config.mode_radius)]
    diverged_at = None
    for k in range(config.iterations):
        g = rng.step_generator(config.seed, k)
        h = step_size(k, config.step)
        b = batch_size(k, config.batch, n)
        full = np.arange(n)
        if config.algorithm == "sgld":
            if b == n:
                batch = full
            else:
                batch = np.stack(
                    [sample_batch(n, b, g) for _ in range(ensemble.num_particles)]
                )
        else:
            batch = full if b == n else sample_batch(n, b, g)
        try:
            if config.algorithm == "sgld":
                ensemble = sgld_step(ensemble, target, h, config.beta, batch, g)
            elif config.algorithm == "svgd":
                ensemble = svgd_step(ensemble, target, h, config.kernel, batch)
            elif config.algorithm == "pos":
                ensemble = pos_step_deterministic(
                    ensemble, target, h, config.beta, config.kernel, batch
                )
            else:
                ensemble = spos_step(
                    ensemble, target, h, config.beta, config.kernel, batch, g
                )
        except DivergenceError:
            diverged_at = k
            break
        done = ensemble.iteration == config.iterations
        if done or ensemble.iteration % config.diagnostics_every == 0:
            records.append(_record(ensemble, target, config.mode_radius))
    return RunTrace(
        records=tuple(records),
        final_ensemble=ensemble,
        config_echo=config,
        diverged_at=diverged_at,
    )
