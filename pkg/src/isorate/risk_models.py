"""Compound loss models, coverage payouts, and Monte Carlo pure premiums.

The aggregate annual loss is a random sum: a claim count drawn from a
frequency family, plus i.i.d. claim amounts drawn from a severity family.
A coverage transforms the aggregate loss into the insurer's payout through
a rate, a deductible, and a limit; the pure premium is the expected payout,
estimated here by crude Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DomainError

__all__ = [
    "Poisson",
    "Binomial",
    "NegBinomial",
    "LogNormal",
    "Gamma",
    "FREQUENCY_FAMILIES",
    "SEVERITY_FAMILIES",
    "RiskModel",
    "CoverageSpec",
    "CoverageArrays",
    "LossSample",
    "sample_aggregate_losses",
    "coverage_payout",
    "coverage_arrays",
    "pure_premiums",
]


# --------------------------------------------------------------------------
# Frequency families (claim counts)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Poisson:
    """Poisson claim count with rate ``lam >= 0``."""

    lam: float

    def __post_init__(self):
        if not (self.lam >= 0.0) or not math.isfinite(self.lam):
            raise DomainError(f"Poisson rate must be finite and >= 0, got {self.lam}")

    @property
    def mean(self) -> float:
        return self.lam

    @property
    def prob_zero(self) -> float:
        return math.exp(-self.lam)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.poisson(self.lam, size)


@dataclass(frozen=True)
class Binomial:
    """Binomial claim count: ``m`` trials (non-negative integer), success prob ``q``."""

    m: float
    q: float

    def __post_init__(self):
        if not (self.m >= 0 and float(self.m).is_integer()):
            raise DomainError(f"Binomial trial count must be a non-negative integer, got {self.m}")
        if not (0.0 <= self.q <= 1.0):
            raise DomainError(f"Binomial success probability must lie in [0, 1], got {self.q}")

    @property
    def mean(self) -> float:
        return self.m * self.q

    @property
    def prob_zero(self) -> float:
        return (1.0 - self.q) ** self.m

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.binomial(int(self.m), self.q, size)


@dataclass(frozen=True)
class NegBinomial:
    """Negative binomial claim count with mean ``size * (1 - prob) / prob``.

    ``size`` may be any positive real; ``prob`` lies in (0, 1].
    """

    size: float
    prob: float

    def __post_init__(self):
        if not (self.size > 0.0) or not math.isfinite(self.size):
            raise DomainError(f"NegBinomial size must be finite and > 0, got {self.size}")
        if not (0.0 < self.prob <= 1.0):
            raise DomainError(f"NegBinomial prob must lie in (0, 1], got {self.prob}")

    @property
    def mean(self) -> float:
        return self.size * (1.0 - self.prob) / self.prob

    @property
    def prob_zero(self) -> float:
        return self.prob**self.size

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.negative_binomial(self.size, self.prob, size)


# --------------------------------------------------------------------------
# Severity families (claim amounts)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LogNormal:
    """Lognormal claim amount with log-scale ``mu`` and log-sd ``sigma > 0``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"LogNormal mu must be finite, got {self.mu}")
        if not (self.sigma > 0.0) or not math.isfinite(self.sigma):
            raise DomainError(f"LogNormal sigma must be finite and > 0, got {self.sigma}")

    @property
    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.lognormal(self.mu, self.sigma, size)


@dataclass(frozen=True)
class Gamma:
    """Gamma claim amount with shape ``alpha > 0`` and rate ``beta > 0``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0.0) or not math.isfinite(self.alpha):
            raise DomainError(f"Gamma shape must be finite and > 0, got {self.alpha}")
        if not (self.beta > 0.0) or not math.isfinite(self.beta):
            raise DomainError(f"Gamma rate must be finite and > 0, got {self.beta}")

    @property
    def mean(self) -> float:
        return self.alpha / self.beta

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.gamma(self.alpha, 1.0 / self.beta, size)


FREQUENCY_FAMILIES = {"poisson": Poisson, "binomial": Binomial, "negbinomial": NegBinomial}
SEVERITY_FAMILIES = {"lognormal": LogNormal, "gamma": Gamma}


def _param_names(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls))


# --------------------------------------------------------------------------
# Risk model: family pair with a free/fixed parameter split
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskModel:
    """A frequency-severity pair with named parameters split into free and fixed.

    ``free_params`` lists, in order, the parameter names bound from a
    candidate vector; ``fixed_params`` pins the rest. Every parameter of
    both families must appear exactly once across the two.
    """

    frequency: str
    severity: str
    free_params: tuple[str, ...]
    fixed_params: dict[str, float]

    def __post_init__(self):
        if self.frequency not in FREQUENCY_FAMILIES:
            raise ValueError(f"unknown frequency family {self.frequency!r}")
        if self.severity not in SEVERITY_FAMILIES:
            raise ValueError(f"unknown severity family {self.severity!r}")
        object.__setattr__(self, "free_params", tuple(self.free_params))
        declared = set(self.free_params) | set(self.fixed_params)
        overlap = set(self.free_params) & set(self.fixed_params)
        if overlap:
            raise ValueError(f"parameters both free and fixed: {sorted(overlap)}")
        expected = set(self._freq_names()) | set(self._sev_names())
        if declared != expected:
            raise ValueError(
                f"parameter split {sorted(declared)} does not cover the families' "
                f"parameters {sorted(expected)}"
            )
        if len(set(self.free_params)) != len(self.free_params):
            raise ValueError("duplicate names in free_params")

    def _freq_names(self) -> tuple[str, ...]:
        return _param_names(FREQUENCY_FAMILIES[self.frequency])

    def _sev_names(self) -> tuple[str, ...]:
        return _param_names(SEVERITY_FAMILIES[self.severity])

    @property
    def dim(self) -> int:
        return len(self.free_params)

    def bind(self, theta) -> tuple[object, object]:
        """Bind a free-parameter vector, returning validated family instances.

        Raises :class:`DomainError` if any bound parameter falls outside its
        family's domain.
        """
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.dim:
            raise ValueError(f"theta has length {theta.size}, expected {self.dim}")
        values = dict(self.fixed_params)
        values.update(zip(self.free_params, theta.tolist()))
        freq_cls = FREQUENCY_FAMILIES[self.frequency]
        sev_cls = SEVERITY_FAMILIES[self.severity]
        freq = freq_cls(**{k: values[k] for k in self._freq_names()})
        sev = sev_cls(**{k: values[k] for k in self._sev_names()})
        return freq, sev

    def theta_dict(self, theta) -> dict[str, float]:
        """Free-parameter values keyed by name, in declaration order."""
        theta = np.asarray(theta, dtype=float).ravel()
        return dict(zip(self.free_params, theta.tolist()))


# --------------------------------------------------------------------------
# Coverage
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageSpec:
    """One policy's payout shape: rate ``r``, deductible ``d``, limit ``l``.

    The payout for an aggregate loss x is ``min(max(r*x - d, 0), l)``.
    An unlimited policy uses ``l = math.inf``.
    """

    r: float
    d: float
    l: float = math.inf

    def __post_init__(self):
        if not (0.0 < self.r <= 1.0):
            raise ValueError(f"coverage rate must lie in (0, 1], got {self.r}")
        if not (self.d >= 0.0):
            raise ValueError(f"deductible must be >= 0, got {self.d}")
        if not (self.l > 0.0):
            raise ValueError(f"limit must be > 0 (inf allowed), got {self.l}")

    @property
    def is_unlimited(self) -> bool:
        return math.isinf(self.l)


@dataclass(frozen=True)
class CoverageArrays:
    """Vectorized view of a coverage list, for repeated premium evaluation."""

    r: np.ndarray
    d: np.ndarray
    l: np.ndarray

    def __len__(self) -> int:
        return self.r.size


def coverage_arrays(covs) -> CoverageArrays:
    """Pack a sequence of :class:`CoverageSpec` into parallel arrays."""
    if isinstance(covs, CoverageArrays):
        return covs
    covs = list(covs)
    return CoverageArrays(
        r=np.array([c.r for c in covs], dtype=float),
        d=np.array([c.d for c in covs], dtype=float),
        l=np.array([c.l for c in covs], dtype=float),
    )


@dataclass(frozen=True)
class LossSample:
    """Monte Carlo draws of the aggregate loss, tagged for reproducibility."""

    draws: np.ndarray
    seed_tag: str = ""

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        if draws.ndim != 1 or draws.size < 1:
            raise ValueError("draws must be a nonempty 1-d array")
        if np.any(draws < 0):
            raise ValueError("aggregate losses must be nonnegative")

    @property
    def n_replications(self) -> int:
        return self.draws.size


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def sample_aggregate_losses(
    model: RiskModel,
    theta,
    n_replications: int,
    rng: np.random.Generator,
    seed_tag: str = "",
) -> LossSample:
    """Draw independent replications of the compound loss under ``theta``.

    Each replication draws a claim count from the frequency family, then
    sums that many i.i.d. severity draws. Deterministic for a fixed ``rng``
    stream; raises :class:`DomainError` for out-of-domain ``theta``.
    """
    if n_replications < 1:
        raise ValueError("n_replications must be >= 1")
    freq, sev = model.bind(theta)
    counts = freq.sample(n_replications, rng)
    total = int(counts.sum())
    if total == 0:
        return LossSample(np.zeros(n_replications), seed_tag)
    amounts = sev.sample(total, rng)
    csum = np.concatenate(([0.0], np.cumsum(amounts)))
    ends = np.cumsum(counts)
    draws = csum[ends] - csum[ends - counts]
    return LossSample(draws, seed_tag)


def coverage_payout(x, cov: CoverageSpec):
    """Payout ``min(max(r*x - d, 0), l)`` for aggregate loss ``x`` (scalar or array)."""
    paid = np.minimum(np.maximum(cov.r * np.asarray(x, dtype=float) - cov.d, 0.0), cov.l)
    if np.ndim(x) == 0:
        return float(paid)
    return paid


def pure_premiums(losses: LossSample, covs) -> np.ndarray:
    """Monte Carlo pure premium of each coverage, reusing one set of draws.

    Equals the mean of ``coverage_payout`` over the draws for every
    coverage. Sharing the draws across coverages keeps the premium ordering
    coherent, which the isotonic link relies on.
    """
    ca = coverage_arrays(covs)
    if len(ca) == 0:
        raise ValueError("covs must be nonempty")
    x = np.sort(losses.draws)
    n_rep = x.size
    csum = np.concatenate(([0.0], np.cumsum(x)))
    # The payout is piecewise linear in x with breakpoints d/r and (d+l)/r;
    # prefix sums over the sorted draws give each segment's mean in O(log R).
    lo = ca.d / ca.r
    hi = (ca.d + ca.l) / ca.r
    a = np.searchsorted(x, lo, side="right")
    b = np.searchsorted(x, hi, side="right")
    mid = ca.r * (csum[b] - csum[a]) - ca.d * (b - a)
    n_above = n_rep - b
    # Masked assignment: inf * 0 would be nan, and np.where evaluates eagerly.
    top = np.zeros(len(ca))
    above = n_above > 0
    top[above] = ca.l[above] * n_above[above]
    return (mid + top) / n_rep
