"""Importance-weighted expected improvement and the placement loop.

Instead of refitting hyperparameters at every iteration, the loop keeps
a fixed set of prior theta samples and reweights them by their marginal
likelihood on the observations collected so far. The acquisition at a
candidate is then the weighted average of per-sample expected
improvements. Observed locations are removed from the candidate set:
readings are noise-free ground truth, so resampling is information-free
(and their EI is 0 anyway).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .data import Snapshot
from .errors import InputError, NumericalError
from .gp import GpSolve, Posterior
from .kernels import NOISE_VARIANCE, KernelSpec
from .mcmc import PriorSampleSet
from .rng import stream
from .traces import BoTrace

_SQRT_2PI = math.sqrt(2.0 * math.pi)

#: Posterior variance at or below the observation-noise clamp carries no
#: epistemic mass: readings are ground truth, so what remains at an
#: observed point is the stability clamp, not real uncertainty. The
#: small headroom absorbs round-off.
_VARIANCE_FLOOR = NOISE_VARIANCE * (1.0 + 1e-6)


@dataclass(frozen=True)
class BoConfig:
    """Settings for one placement run."""

    n_init: int
    n_iter: int
    prior: PriorSampleSet
    seed: int = 13
    tie_break: str = "first-index"

    def __post_init__(self) -> None:
        if self.n_init < 1:
            raise InputError(f"n_init must be >= 1, got {self.n_init}")
        if self.n_iter < self.n_init:
            raise InputError(f"n_iter={self.n_iter} must be >= n_init={self.n_init}")
        if self.tie_break != "first-index":
            raise InputError(f"unsupported tie_break {self.tie_break!r}")
        if len(self.prior) < 1:
            raise InputError("prior sample set is empty")


def expected_improvement(post: Posterior, f_best: float) -> float:
    """Closed-form Gaussian expected improvement over ``f_best``.

    Variances at or below the observation-noise clamp are treated as
    zero, so the acquisition vanishes at already-observed points.
    """
    if post.variance < 0:
        raise InputError(f"variance must be >= 0, got {post.variance}")
    delta = post.mean - f_best
    if post.variance <= _VARIANCE_FLOOR:
        return max(0.0, delta)
    sigma = math.sqrt(post.variance)
    z = delta / sigma
    phi = math.exp(-0.5 * z * z) / _SQRT_2PI
    return max(0.0, delta * float(ndtr(z)) + sigma * phi)


def _ei_batch(means: np.ndarray, variances: np.ndarray, f_best: float) -> np.ndarray:
    delta = means - f_best
    live = variances > _VARIANCE_FLOOR
    sigma = np.sqrt(np.where(live, variances, 1.0))
    z = delta / sigma
    out = np.where(
        live,
        delta * ndtr(z) + sigma * np.exp(-0.5 * z * z) / _SQRT_2PI,
        delta,
    )
    return np.maximum(out, 0.0)


@dataclass
class ImportanceWeights:
    """Normalised weights over prior samples plus degeneracy diagnostics."""

    weights: np.ndarray
    ess: float
    failed: np.ndarray  # per-sample numerical-failure flags
    fallback_uniform: bool = False


def _normalise_weights(logs: np.ndarray, failed: np.ndarray) -> ImportanceWeights:
    """Max-subtraction normalisation; uniform fallback if all failed."""
    M = len(logs)
    if failed.all():
        return ImportanceWeights(
            np.full(M, 1.0 / M), ess=float(M), failed=failed, fallback_uniform=True
        )
    shifted = logs - logs[~failed].max()
    weights = np.where(failed, 0.0, np.exp(shifted))
    weights /= weights.sum()
    return ImportanceWeights(weights, ess=float(1.0 / np.sum(weights**2)), failed=failed)


def log_importance_weights(
    spec: KernelSpec, prior: PriorSampleSet, observed_locations, observed_values
) -> ImportanceWeights:
    """Weights proportional to each sample's marginal likelihood.

    Normalisation happens in log space by max-subtraction. Samples whose
    likelihood evaluation fails get weight zero; if every sample fails
    the weights fall back to uniform and the result is flagged.
    """
    observed_locations = np.asarray(observed_locations, dtype=float)
    observed_values = np.asarray(observed_values, dtype=float)
    if len(observed_values) < 1:
        raise InputError("importance weights need at least one observation")
    logs = np.full(len(prior), -math.inf)
    failed = np.zeros(len(prior), dtype=bool)
    for i, theta in enumerate(prior.samples):
        try:
            logs[i] = GpSolve(spec, theta, observed_locations, observed_values).loglik
        except NumericalError:
            failed[i] = True
    return _normalise_weights(logs, failed)


def weighted_acquisition(
    spec: KernelSpec, prior: PriorSampleSet, observed_locations, observed_values, x_star
) -> float:
    """Importance-weighted EI at a single candidate point."""
    acq = _weighted_acquisition_batch(
        spec, prior, observed_locations, observed_values,
        np.asarray(x_star, dtype=float).reshape(1, 2),
    )[0]
    return float(acq[0])


def _weighted_acquisition_batch(
    spec: KernelSpec,
    prior: PriorSampleSet,
    observed_locations,
    observed_values,
    X_star: np.ndarray,
):
    """Weighted EI over a batch of candidates, sharing one GP solve per
    prior sample between the weight and the posterior."""
    observed_locations = np.asarray(observed_locations, dtype=float)
    observed_values = np.asarray(observed_values, dtype=float)
    f_best = float(observed_values.max())
    M = len(prior)
    logs = np.full(M, -math.inf)
    failed = np.zeros(M, dtype=bool)
    ei = np.zeros((M, len(X_star)))
    for i, theta in enumerate(prior.samples):
        try:
            solve = GpSolve(spec, theta, observed_locations, observed_values)
            logs[i] = solve.loglik
            means, variances = solve.posterior(X_star)
        except NumericalError:
            failed[i] = True
            continue
        ei[i] = _ei_batch(means, variances, f_best)
    iw = _normalise_weights(logs, failed)
    acq = iw.weights @ np.where(failed[:, None], 0.0, ei)
    return acq, iw


def run_bo(snapshot: Snapshot, spec: KernelSpec, config: BoConfig) -> BoTrace:
    """Sequentially place ``n_iter`` sensors on one snapshot.

    The first ``n_init`` locations are distinct uniform draws over the
    available candidates; each later iteration evaluates the weighted
    acquisition at every unvisited candidate and takes the argmax
    (first index on ties). Observations are the snapshot's pre-processed
    values, treated as noise-free ground truth.
    """
    if snapshot.values_pre is None:
        raise InputError(f"snapshot {snapshot.id} is not preprocessed")
    candidates = snapshot.candidate_indices
    if len(candidates) < config.n_iter:
        raise InputError(
            f"snapshot {snapshot.id} has {len(candidates)} candidates, "
            f"fewer than n_iter={config.n_iter}"
        )
    rng = stream(config.seed, "bo-init", snapshot.id)
    trace = BoTrace(snapshot_id=snapshot.id)
    visited: list[int] = []

    def observe(idx: int, iteration: int, ess: float = math.nan) -> None:
        visited.append(idx)
        x, y = snapshot.locations[idx]
        trace.append_observation(
            iteration, float(x), float(y),
            float(snapshot.values_raw[idx]), float(snapshot.values_pre[idx]), ess,
        )

    for i, idx in enumerate(rng.choice(candidates, size=config.n_init, replace=False)):
        observe(int(idx), i + 1)

    for iteration in range(config.n_init + 1, config.n_iter + 1):
        seen = set(visited)
        open_idx = np.array([c for c in candidates if c not in seen])
        X_star = snapshot.locations[open_idx]
        X_obs = snapshot.locations[visited]
        y_obs = snapshot.values_pre[visited]
        acq, iw = _weighted_acquisition_batch(spec, config.prior, X_obs, y_obs, X_star)
        if iw.fallback_uniform:
            trace.flagged_iterations.append(iteration)
        observe(int(open_idx[int(np.argmax(acq))]), iteration, ess=iw.ess)
    return trace
