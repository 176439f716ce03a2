"""Population Monte Carlo ABC for market-implied risk model inference.

Each generation draws candidate parameter vectors (from the prior at first,
then from a weighted Gaussian-mixture smoothing of the previous cloud),
simulates pure premiums, refits the monotone loading link, and keeps the
candidates whose distance to the observed premiums beats the previous
threshold. The new threshold is then chosen from the observed distances so
that the effective sample size of the reweighted cloud lands as close as
possible to half the cloud size.

All randomness flows through per-attempt substreams keyed by
(seed, tag, generation, slot, attempt), so results are bit-identical
regardless of how many worker processes share the slots.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discrepancy import Corridor, DistanceWeights, total_distance
from .errors import ConfigError, DegenerateWeightsError, DomainError, StallError
from .isotonic import pava_fit
from .risk_models import (
    CoverageArrays,
    RiskModel,
    coverage_arrays,
    pure_premiums,
    sample_aggregate_losses,
)

__all__ = [
    "PriorSpec",
    "AbcConfig",
    "KdeProposal",
    "ParticleCloud",
    "EpsilonSelection",
    "RunResult",
    "ess",
    "select_epsilon",
    "build_kde",
    "simulate_distance",
    "run_pmc_abc",
    "map_estimate",
    "mode_estimate",
    "predictive_summaries",
    "posterior_loss_ratio",
]

# Substream tags keep independent random domains from colliding.
_TAG_SAMPLE = 7
_TAG_PREDICT = 11

# Relative (and absolute, for all-zero spreads) diagonal floor applied to the
# mixture bandwidth so degenerate clouds still yield a usable proposal.
_BANDWIDTH_FLOOR = 1e-12


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform prior box over the model's free parameters.

    ``bounds[i]`` is the (low, high) interval for free parameter i, in the
    order declared by the risk model.
    """

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not bounds:
            raise ConfigError("prior needs at least one parameter")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigError(f"prior interval must satisfy -inf < low < high < inf, got ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lows(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def highs(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def volume(self) -> float:
        return float(np.prod(self.highs - self.lows))

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lows, self.highs)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lows, self.highs, size=(n, self.dim))

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lows) and np.all(theta <= self.highs))

    def density(self, theta) -> float:
        return 1.0 / self.volume if self.contains(theta) else 0.0


@dataclass(frozen=True)
class AbcConfig:
    """Tuning knobs for one inference run.

    ``max_attempts`` bounds the proposal attempts for a single particle slot
    within one generation; exhausting it raises :class:`StallError`.
    """

    n_particles: int
    n_replications: int
    max_generations: int
    delta_eps: float
    eps_min: float = 0.0
    corridor: Corridor | None = None
    bandwidth_factor: float = 2.0
    max_attempts: int = 1_000_000

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigError("n_particles must be >= 2")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be >= 1")
        if not (self.delta_eps >= 0.0):
            raise ConfigError("delta_eps must be >= 0")
        if not (self.eps_min >= 0.0):
            raise ConfigError("eps_min must be >= 0")
        if not (self.bandwidth_factor > 0.0):
            raise ConfigError("bandwidth_factor must be > 0")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")


# --------------------------------------------------------------------------
# Effective sample size and threshold selection
# --------------------------------------------------------------------------


def ess(weights) -> float:
    """Effective sample size 1 / sum(w^2) of the normalized weights."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-d array")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DegenerateWeightsError("weights must be finite and nonnegative")
    s = w.sum()
    if s <= 0.0:
        raise DegenerateWeightsError("weights sum to zero")
    w = w / s
    return float(1.0 / np.dot(w, w))


@dataclass(frozen=True)
class EpsilonSelection:
    """Chosen threshold plus the candidate table it was selected from."""

    epsilon: float
    ess: float
    weights: np.ndarray
    candidates: np.ndarray
    ess_values: np.ndarray


def select_epsilon(distances, ratios, eps_prev: float, target: float) -> EpsilonSelection:
    """Pick the next threshold from the observed distances.

    Candidates are the distinct observed distances plus the previous
    threshold. Each candidate keeps the particles strictly below it, with
    weights proportional to their prior-over-proposal ratios; the candidate
    whose effective sample size is closest to ``target`` wins, ties going to
    the larger threshold. Candidates keeping no particles count as zero.
    """
    d = np.asarray(distances, dtype=float)
    r = np.asarray(ratios, dtype=float)
    if d.shape != r.shape or d.ndim != 1 or d.size == 0:
        raise ValueError("distances and ratios must be nonempty 1-d arrays of equal length")
    if np.any(np.isnan(d)):
        raise ValueError("distances must not be nan")
    if not np.all(np.isfinite(r)) or np.any(r < 0) or r.sum() <= 0:
        raise DegenerateWeightsError("prior/proposal ratios are degenerate")

    candidates = np.unique(np.append(d, eps_prev))
    order = np.argsort(d, kind="stable")
    d_sorted = d[order]
    r_sorted = r[order]
    s1 = np.concatenate(([0.0], np.cumsum(r_sorted)))
    s2 = np.concatenate(([0.0], np.cumsum(r_sorted**2)))

    # survivors of candidate c are the particles with d < c (strict)
    counts = np.searchsorted(d_sorted, candidates, side="left")
    with np.errstate(invalid="ignore", divide="ignore"):
        ess_values = np.where(s2[counts] > 0, s1[counts] ** 2 / s2[counts], 0.0)

    best = 0
    for i in range(1, candidates.size):
        # ascending candidates: <= prefers the larger epsilon on exact ties
        if abs(ess_values[i] - target) <= abs(ess_values[best] - target):
            best = i
    eps_new = float(candidates[best])

    w = np.where(d < eps_new, r, 0.0)
    total = w.sum()
    if total <= 0:
        raise DegenerateWeightsError(f"selected threshold {eps_new} keeps no particles")
    w = w / total
    return EpsilonSelection(
        epsilon=eps_new,
        ess=float(ess(w)),
        weights=w,
        candidates=candidates,
        ess_values=ess_values,
    )


# --------------------------------------------------------------------------
# Gaussian-mixture proposal over a weighted cloud
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KdeProposal:
    """Weighted Gaussian mixture centered on particles with shared bandwidth.

    The bandwidth is ``bandwidth_factor`` times the weighted empirical
    covariance of the cloud, with a tiny diagonal floor so collapsed clouds
    remain proposable. Sampling can be restricted to a prior box by
    rejection; the density is left untruncated, which cancels in the
    normalized importance weights because every particle shares the mixture.
    """

    particles: np.ndarray
    weights: np.ndarray
    bandwidth: np.ndarray

    def __post_init__(self):
        particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        bandwidth = np.asarray(self.bandwidth, dtype=float)
        object.__setattr__(self, "particles", particles)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bandwidth", bandwidth)
        object.__setattr__(self, "_chol", np.linalg.cholesky(bandwidth))
        object.__setattr__(self, "_inv", np.linalg.inv(bandwidth))
        sign, logdet = np.linalg.slogdet(bandwidth)
        if sign <= 0:
            raise DegenerateWeightsError("bandwidth matrix is not positive definite")
        dim = particles.shape[1]
        object.__setattr__(self, "_log_norm", -0.5 * (dim * math.log(2.0 * math.pi) + logdet))
        object.__setattr__(self, "_cum_weights", np.cumsum(weights))

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def sample_one(self, rng: np.random.Generator, prior: PriorSpec | None = None,
                   max_tries: int = 1000) -> np.ndarray:
        for _ in range(max_tries):
            u = rng.random()
            j = int(np.searchsorted(self._cum_weights, u, side="right"))
            j = min(j, self.particles.shape[0] - 1)
            theta = self.particles[j] + self._chol @ rng.standard_normal(self.dim)
            if prior is None or prior.contains(theta):
                return theta
        raise StallError("mixture proposal cannot reach the prior box", epsilon=math.nan)

    def density(self, thetas) -> np.ndarray:
        """Mixture density at one point (shape (dim,)) or many (shape (n, dim))."""
        thetas = np.asarray(thetas, dtype=float)
        single = thetas.ndim == 1
        pts = np.atleast_2d(thetas)
        diff = pts[:, None, :] - self.particles[None, :, :]
        quad = np.einsum("njd,de,nje->nj", diff, self._inv, diff)
        dens = np.exp(-0.5 * quad + self._log_norm) @ self.weights
        return float(dens[0]) if single else dens


def build_kde(particles, weights, bandwidth_factor: float = 2.0) -> KdeProposal:
    """Mixture proposal from a weighted cloud; bandwidth = factor x covariance."""
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    w = np.asarray(weights, dtype=float)
    s = w.sum()
    if s <= 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DegenerateWeightsError("cloud weights are degenerate")
    w = w / s
    mean = w @ particles
    centered = particles - mean
    cov = (centered * w[:, None]).T @ centered
    h = bandwidth_factor * cov
    scale = float(np.max(np.diag(h)))
    floor = _BANDWIDTH_FLOOR * scale if scale > 0 else _BANDWIDTH_FLOOR
    h = h + floor * np.eye(particles.shape[1])
    return KdeProposal(particles=particles, weights=w, bandwidth=h)


# --------------------------------------------------------------------------
# Per-particle simulation
# --------------------------------------------------------------------------


def simulate_distance(
    model: RiskModel,
    theta,
    observed,
    covs,
    n_replications: int,
    rng: np.random.Generator,
    corridor: Corridor | None = None,
    weights: DistanceWeights | None = None,
):
    """Distance of one candidate: simulate premiums, refit the link, score.

    Returns (distance, pure_premiums, loaded_fit).
    """
    observed = np.asarray(observed, dtype=float)
    ca = coverage_arrays(covs)
    losses = sample_aggregate_losses(model, theta, n_replications, rng)
    pure = pure_premiums(losses, ca)
    w_arr = weights.values if weights is not None else None
    fit = pava_fit(pure, observed, w_arr)
    dist = total_distance(observed, pure, fit.fitted, corridor, weights)
    return dist, pure, fit.fitted


def _attempt_rng(seed: int, generation: int, slot: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([seed, _TAG_SAMPLE, generation, slot, attempt])


def _fill_slot(model, observed, ca, prior, kde, cfg, seed, generation, slot, eps_prev, weights):
    """Accept-reject one particle slot; deterministic in (seed, generation, slot)."""
    for attempt in range(cfg.max_attempts):
        rng = _attempt_rng(seed, generation, slot, attempt)
        if kde is None:
            theta = prior.sample_one(rng)
        else:
            theta = kde.sample_one(rng, prior)
        try:
            dist, _, _ = simulate_distance(
                model, theta, observed, ca, cfg.n_replications, rng, cfg.corridor, weights
            )
        except DomainError:
            # prior box wider than the family domain: treat as zero density
            continue
        if dist < eps_prev:
            return theta, dist, attempt + 1
    raise StallError(
        f"slot {slot} exhausted {cfg.max_attempts} attempts in generation {generation}",
        epsilon=eps_prev,
    )


def _fill_slot_batch(args):
    (model, observed, ca, prior, kde, cfg, seed, generation, slots, eps_prev, weights) = args
    return [
        _fill_slot(model, observed, ca, prior, kde, cfg, seed, generation, s, eps_prev, weights)
        for s in slots
    ]


# --------------------------------------------------------------------------
# The generation loop
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParticleCloud:
    """One generation's accepted particles and their reweighting."""

    generation: int
    epsilon: float
    theta: np.ndarray
    distances: np.ndarray
    ratios: np.ndarray
    weights: np.ndarray
    ess: float
    n_proposals: int

    def __post_init__(self):
        for name in ("theta", "distances", "ratios", "weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def n_particles(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class RunResult:
    """Full trace of a finished inference run."""

    clouds: tuple[ParticleCloud, ...]
    stop_reason: str
    seed: int
    n_simulations: int
    free_params: tuple[str, ...]

    @property
    def final(self) -> ParticleCloud:
        return self.clouds[-1]

    @property
    def eps_trace(self) -> np.ndarray:
        return np.array([c.epsilon for c in self.clouds])


def run_pmc_abc(
    model: RiskModel,
    observed,
    covs,
    prior: PriorSpec,
    config: AbcConfig,
    seed: int,
    weights: DistanceWeights | None = None,
    workers: int = 1,
    progress=None,
) -> RunResult:
    """Run the full threshold-tightening loop until a stop rule fires.

    A run ends when the threshold drop falls below ``delta_eps``, when the
    threshold reaches ``eps_min``, or at ``max_generations``. A generation
    that keeps the previous threshold while the whole population sits below
    the target ESS does not trigger the first two rules: it only rebuilds
    the proposal from the reweighted cloud (a resampling step) and the
    threshold can resume falling afterwards.

    ``workers`` only distributes particle slots across processes; results
    are bit-identical for any worker count because each (generation, slot,
    attempt) triple owns its own random substream. ``progress`` is an
    optional callable receiving (generation, epsilon, ess, n_proposals).
    """
    observed = np.asarray(observed, dtype=float)
    ca = coverage_arrays(covs)
    if observed.ndim != 1 or observed.size != len(ca):
        raise ConfigError("observed premiums and coverages must align")
    if prior.dim != model.dim:
        raise ConfigError(
            f"prior has {prior.dim} intervals but the model frees {model.dim} parameters"
        )
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if weights is None:
        weights = DistanceWeights.uniform(observed.size)
    elif weights.values.size != observed.size:
        raise ConfigError("distance weights must match the number of observations")

    j = config.n_particles
    target = j / 2.0
    eps_prev = math.inf
    kde = None
    clouds: list[ParticleCloud] = []
    n_simulations = 0
    stop_reason = "max_generations"

    for generation in range(1, config.max_generations + 1):
        results = _collect_generation(
            model, observed, ca, prior, kde, config, seed, generation, eps_prev, weights, workers
        )
        theta = np.array([r[0] for r in results])
        distances = np.array([r[1] for r in results])
        n_proposals = int(sum(r[2] for r in results))
        n_simulations += n_proposals

        if kde is None:
            ratios = np.ones(j)
        else:
            # accepted particles always sit inside the box, so the prior
            # density is the constant 1 / volume
            ratios = (1.0 / prior.volume) / kde.density(theta)

        selection = select_epsilon(distances, ratios, eps_prev, target)
        cloud = ParticleCloud(
            generation=generation,
            epsilon=selection.epsilon,
            theta=theta,
            distances=distances,
            ratios=ratios,
            weights=selection.weights,
            ess=selection.ess,
            n_proposals=n_proposals,
        )
        clouds.append(cloud)
        if progress is not None:
            progress(generation, selection.epsilon, selection.ess, n_proposals)

        # inf thresholds compare equal rather than produce nan decreases
        if selection.epsilon == eps_prev:
            decrease = 0.0
        else:
            decrease = eps_prev - selection.epsilon
        # A generation that keeps the old threshold because even the full
        # population falls short of the target ESS has degenerate weights,
        # not a converged threshold. Rebuilding the proposal on the
        # reweighted cloud and re-proposing at the same threshold is a pure
        # resampling step that restores the ESS, so the stop rules only
        # apply when the target was met.
        degenerate_stall = selection.epsilon == eps_prev and selection.ess < target
        if not degenerate_stall:
            if decrease < config.delta_eps:
                stop_reason = "delta_eps"
                break
            if selection.epsilon <= config.eps_min:
                stop_reason = "eps_min"
                break
        eps_prev = selection.epsilon
        kde = build_kde(theta, selection.weights, config.bandwidth_factor)

    return RunResult(
        clouds=tuple(clouds),
        stop_reason=stop_reason,
        seed=seed,
        n_simulations=n_simulations,
        free_params=model.free_params,
    )


def _collect_generation(model, observed, ca, prior, kde, cfg, seed, generation, eps_prev,
                        weights, workers):
    slots = list(range(cfg.n_particles))
    if workers == 1:
        return _fill_slot_batch(
            (model, observed, ca, prior, kde, cfg, seed, generation, slots, eps_prev, weights)
        )
    chunks = [slots[i::workers] for i in range(workers)]
    chunks = [c for c in chunks if c]
    payloads = [
        (model, observed, ca, prior, kde, cfg, seed, generation, c, eps_prev, weights)
        for c in chunks
    ]
    results_by_slot: dict[int, tuple] = {}
    with ProcessPoolExecutor(max_workers=len(payloads)) as pool:
        for chunk, chunk_results in zip(chunks, pool.map(_fill_slot_batch, payloads)):
            for slot, res in zip(chunk, chunk_results):
                results_by_slot[slot] = res
    # reduce in slot order so the cloud layout never depends on scheduling
    return [results_by_slot[s] for s in slots]


# --------------------------------------------------------------------------
# Posterior summaries
# --------------------------------------------------------------------------


def map_estimate(cloud: ParticleCloud) -> np.ndarray:
    """Weighted average of the particles."""
    return cloud.weights @ cloud.theta


def mode_estimate(cloud: ParticleCloud, bandwidth_factor: float = 2.0) -> np.ndarray:
    """Particle at which the cloud's own mixture density is highest."""
    kde = build_kde(cloud.theta, cloud.weights, bandwidth_factor)
    dens = kde.density(cloud.theta)
    return cloud.theta[int(np.argmax(dens))].copy()


def predictive_summaries(model: RiskModel, cloud: ParticleCloud) -> dict[str, float]:
    """Posterior-weighted closed-form summaries of the fitted loss process.

    Uses exact family moments per particle (no simulation): expected claim
    count, probability of a claim-free year, expected claim size, and
    expected annual aggregate loss.
    """
    count = zero = size = agg = 0.0
    for w, theta in zip(cloud.weights, cloud.theta):
        if w == 0.0:
            continue
        freq, sev = model.bind(theta)
        count += w * freq.mean
        zero += w * freq.prob_zero
        size += w * sev.mean
        agg += w * freq.mean * sev.mean
    return {
        "expected_claim_count": count,
        "prob_no_claims": zero,
        "expected_claim_size": size,
        "expected_annual_loss": agg,
    }


def posterior_loss_ratio(
    model: RiskModel,
    cloud: ParticleCloud,
    covs,
    commercial,
    n_replications: int,
    seed: int,
) -> float:
    """Posterior-weighted mean of the implied loss ratio across observations.

    For each particle, pure premiums are simulated on a dedicated substream
    and divided by the observed commercial premiums; the per-observation
    ratios are averaged, then averaged over the cloud.
    """
    commercial = np.asarray(commercial, dtype=float)
    if np.any(commercial <= 0):
        raise ValueError("commercial premiums must be positive")
    ca = coverage_arrays(covs)
    out = 0.0
    for idx, (w, theta) in enumerate(zip(cloud.weights, cloud.theta)):
        if w == 0.0:
            continue
        rng = np.random.default_rng([seed, _TAG_PREDICT, idx])
        losses = sample_aggregate_losses(model, theta, n_replications, rng)
        pure = pure_premiums(losses, ca)
        out += w * float(np.mean(pure / commercial))
    return out
