"""Quote ingestion, risk-class grouping, and synthetic market generation.

Quotes carry the policyholder descriptors used for grouping plus the
coverage terms and the observed commercial premium. Synthetic markets are
built by pricing sampled coverages under a known risk model with a
high-precision Monte Carlo run, then applying a stochastic loading link
(proportional multipliers, or a saturating growth curve); the generating
truth is returned alongside so recovery can be scored exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, QuoteParseError
from .risk_models import CoverageSpec, RiskModel, pure_premiums, sample_aggregate_losses

__all__ = [
    "CSV_COLUMNS",
    "Quote",
    "RiskClass",
    "CoverageSampler",
    "LinearLoading",
    "GompertzLoading",
    "SyntheticSpec",
    "LinearFit",
    "load_quotes",
    "save_quotes",
    "group_risk_classes",
    "generate_synthetic",
    "linear_baseline_fit",
    "preset_market_study",
    "preset_grid_example",
    "preset_link_comparison",
]

CSV_COLUMNS = ("specie", "breed", "gender", "insurance_carrier", "r", "l", "d", "age", "x")

_TAG_SYNTHETIC = 23


@dataclass(frozen=True)
class Quote:
    """One observed offer: who it covers, the coverage terms, the price."""

    specie: str
    breed: str
    gender: str
    insurance_carrier: str
    age: str
    coverage: CoverageSpec
    commercial_premium: float

    def __post_init__(self):
        if not (self.commercial_premium > 0) or not math.isfinite(self.commercial_premium):
            raise ValueError(
                f"commercial premium must be finite and > 0, got {self.commercial_premium}"
            )

    @property
    def class_key(self) -> tuple[str, str, str, str]:
        return (self.specie, self.breed, self.gender, self.age)


@dataclass(frozen=True)
class RiskClass:
    """All quotes sharing one (specie, breed, gender, age) key."""

    specie: str
    breed: str
    gender: str
    age: str
    quotes: tuple[Quote, ...]

    def __post_init__(self):
        object.__setattr__(self, "quotes", tuple(self.quotes))
        if not self.quotes:
            raise ValueError("a risk class needs at least one quote")
        key = (self.specie, self.breed, self.gender, self.age)
        for q in self.quotes:
            if q.class_key != key:
                raise ValueError(f"quote key {q.class_key} does not match class key {key}")

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.specie, self.breed, self.gender, self.age)

    @property
    def label(self) -> str:
        """Filesystem-friendly identifier for per-class outputs."""
        raw = "-".join(self.key)
        return "".join(ch if ch.isalnum() or ch in "-._" else "_" for ch in raw)

    @property
    def coverages(self) -> list[CoverageSpec]:
        return [q.coverage for q in self.quotes]

    @property
    def premiums(self) -> np.ndarray:
        return np.array([q.commercial_premium for q in self.quotes])


# --------------------------------------------------------------------------
# CSV plumbing
# --------------------------------------------------------------------------


def _parse_limit(token: str, row: int) -> float:
    token = token.strip()
    if token == "" or token.lower() == "inf":
        return math.inf
    try:
        return float(token)
    except ValueError:
        raise QuoteParseError(f"limit {token!r} is not numeric", row=row) from None


def _parse_float(token: str, name: str, row: int) -> float:
    try:
        return float(token)
    except (TypeError, ValueError):
        raise QuoteParseError(f"column {name!r} value {token!r} is not numeric", row=row) from None


def load_quotes(path) -> list[Quote]:
    """Read quotes from a CSV file with the canonical column set.

    The limit column accepts the token \"inf\" (any case) or an empty field
    for unlimited coverage. Malformed rows raise :class:`QuoteParseError`
    carrying the 1-based data row number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise QuoteParseError("file is empty, expected a header row")
        missing = set(CSV_COLUMNS) - set(header)
        extra = set(header) - set(CSV_COLUMNS)
        if missing or extra:
            raise QuoteParseError(
                f"header mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        quotes = []
        for row_no, record in enumerate(reader, start=1):
            if any(v is None for v in record.values()) or None in record:
                raise QuoteParseError("wrong number of fields", row=row_no)
            r = _parse_float(record["r"], "r", row_no)
            limit = _parse_limit(record["l"], row_no)
            d = _parse_float(record["d"], "d", row_no)
            x = _parse_float(record["x"], "x", row_no)
            try:
                coverage = CoverageSpec(r=r, d=d, l=limit)
                quote = Quote(
                    specie=record["specie"],
                    breed=record["breed"],
                    gender=record["gender"],
                    insurance_carrier=record["insurance_carrier"],
                    age=record["age"],
                    coverage=coverage,
                    commercial_premium=x,
                )
            except ValueError as exc:
                raise QuoteParseError(str(exc), row=row_no) from None
            quotes.append(quote)
    return quotes


def save_quotes(path, quotes) -> None:
    """Write quotes as CSV, inverse of :func:`load_quotes`.

    Floats are written with full repr precision so a round trip preserves
    values bit for bit; unlimited coverage becomes the token \"inf\".
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for q in quotes:
            limit = "inf" if math.isinf(q.coverage.l) else repr(float(q.coverage.l))
            writer.writerow(
                [
                    q.specie,
                    q.breed,
                    q.gender,
                    q.insurance_carrier,
                    repr(float(q.coverage.r)),
                    limit,
                    repr(float(q.coverage.d)),
                    q.age,
                    repr(float(q.commercial_premium)),
                ]
            )


def group_risk_classes(quotes) -> list[RiskClass]:
    """Partition quotes by (specie, breed, gender, age), lexicographic order.

    The carrier is deliberately not part of the key: competing offers for
    the same risk profile belong to one class.
    """
    buckets: dict[tuple[str, str, str, str], list[Quote]] = {}
    for q in quotes:
        buckets.setdefault(q.class_key, []).append(q)
    return [
        RiskClass(specie=k[0], breed=k[1], gender=k[2], age=k[3], quotes=tuple(v))
        for k, v in sorted(buckets.items())
    ]


# --------------------------------------------------------------------------
# Synthetic market generation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageSampler:
    """Independent uniform draws of coverage terms; limit range None = unlimited."""

    r_range: tuple[float, float] = (0.5, 1.0)
    d_range: tuple[float, float] = (0.5, 6.0)
    l_range: tuple[float, float] | None = None

    def sample(self, n: int, rng: np.random.Generator) -> list[CoverageSpec]:
        r = rng.uniform(*self.r_range, n)
        d = rng.uniform(*self.d_range, n)
        if self.l_range is None:
            l = np.full(n, math.inf)
        else:
            l = rng.uniform(*self.l_range, n)
        return [CoverageSpec(r=ri, d=di, l=li) for ri, di, li in zip(r, d, l)]


@dataclass(frozen=True)
class LinearLoading:
    """Commercial premium = multiplier x pure premium, multiplier per quote.

    The default range [1/0.7, 1/0.4] makes every implied loss ratio land in
    [0.4, 0.7]. ``additive_form=True`` switches to (1 + multiplier) x pure,
    for markets quoted as a surcharge on top of the pure premium.
    """

    multiplier_range: tuple[float, float] = (1.0 / 0.7, 1.0 / 0.4)
    additive_form: bool = False

    def apply(self, pure: np.ndarray, rng: np.random.Generator):
        m = rng.uniform(*self.multiplier_range, pure.size)
        if self.additive_form:
            m = 1.0 + m
        return m * pure, {"kind": "linear", "multipliers": m.tolist()}


@dataclass(frozen=True)
class GompertzLoading:
    """Saturating growth-curve link a * exp(-b * exp(-c * p)), a and b per quote.

    Premiums rise steeply through the curve's transition zone and flatten
    toward the ceiling a; per-quote (a, b) draws scatter the observations
    around the trend without breaking positivity.
    """

    a_range: tuple[float, float] = (5.0, 10.0)
    b_range: tuple[float, float] = (2.0, 6.0)
    c: float = 2.0

    def apply(self, pure: np.ndarray, rng: np.random.Generator):
        a = rng.uniform(*self.a_range, pure.size)
        b = rng.uniform(*self.b_range, pure.size)
        loaded = a * np.exp(-b * np.exp(-self.c * pure))
        return loaded, {"kind": "gompertz", "a": a.tolist(), "b": b.tolist(), "c": self.c}


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic market: model truth, coverages, loading, size."""

    model: RiskModel
    theta: tuple[float, ...]
    n_quotes: int
    loading: LinearLoading | GompertzLoading
    coverages: object = field(default_factory=CoverageSampler)
    seed: int = 0
    n_oracle_replications: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if self.n_quotes < 1:
            raise ConfigError("n_quotes must be >= 1")
        if self.n_oracle_replications < 100_000:
            raise ConfigError("the pricing oracle needs at least 1e5 replications")
        if len(self.theta) != self.model.dim:
            raise ConfigError("theta length must match the model's free parameters")
        if not isinstance(self.coverages, CoverageSampler):
            covs = tuple(self.coverages)
            if len(covs) != self.n_quotes:
                raise ConfigError("explicit coverage list must have n_quotes entries")
            object.__setattr__(self, "coverages", covs)


def generate_synthetic(spec: SyntheticSpec, rng: np.random.Generator | None = None):
    """Build a synthetic market and its generating truth.

    Returns (quotes, truth) where truth is a JSON-ready dict holding the
    true parameters, oracle pure premiums, and per-quote loading draws.
    When ``rng`` is omitted, three substreams are derived from ``spec.seed``
    (coverages, pricing oracle, loading) so output is reproducible even if
    ``n_quotes`` or the carrier count changes independently.
    """
    if rng is None:
        rng_cov = np.random.default_rng([spec.seed, _TAG_SYNTHETIC, 0])
        rng_oracle = np.random.default_rng([spec.seed, _TAG_SYNTHETIC, 1])
        rng_load = np.random.default_rng([spec.seed, _TAG_SYNTHETIC, 2])
    else:
        rng_cov = rng_oracle = rng_load = rng

    if isinstance(spec.coverages, CoverageSampler):
        covs = spec.coverages.sample(spec.n_quotes, rng_cov)
    else:
        covs = list(spec.coverages)

    losses = sample_aggregate_losses(
        spec.model, spec.theta, spec.n_oracle_replications, rng_oracle
    )
    pure = pure_premiums(losses, covs)
    commercial, loading_record = spec.loading.apply(pure, rng_load)

    if np.any(commercial <= 0) or not np.all(np.isfinite(commercial)):
        raise ConfigError(
            "degenerate synthetic market: loading produced nonpositive premiums "
            "(a zero-frequency model prices every coverage at zero)"
        )

    quotes = [
        Quote(
            specie="synthetic",
            breed="preset",
            gender="any",
            insurance_carrier="sim",
            age="1 year",
            coverage=cov,
            commercial_premium=float(x),
        )
        for cov, x in zip(covs, commercial)
    ]
    truth = {
        "schema": "isorate.synthetic.v1",
        "seed": spec.seed,
        "model": {
            "frequency": spec.model.frequency,
            "severity": spec.model.severity,
            "free_params": list(spec.model.free_params),
            "fixed_params": dict(spec.model.fixed_params),
        },
        "true_theta": spec.model.theta_dict(spec.theta),
        "n_oracle_replications": spec.n_oracle_replications,
        "pure_premiums": [float(p) for p in pure],
        "loading": loading_record,
        "commercial_premiums": [float(x) for x in commercial],
    }
    return quotes, truth


# --------------------------------------------------------------------------
# Presets used by the bundled studies
# --------------------------------------------------------------------------


def preset_market_study(n: int, seed: int, additive_form: bool = False) -> SyntheticSpec:
    """Pet-insurance-scale market: rare claims, four-figure limits.

    Truth is a Poisson(0.3) count with lognormal(6, 1) claim sizes;
    multipliers keep every implied loss ratio inside [0.4, 0.7].
    """
    model = RiskModel("poisson", "lognormal", ("lam", "mu"), {"sigma": 1.0})
    return SyntheticSpec(
        model=model,
        theta=(0.3, 6.0),
        n_quotes=n,
        loading=LinearLoading(additive_form=additive_form),
        coverages=CoverageSampler(r_range=(0.5, 1.0), d_range=(0.0, 75.0), l_range=(1000.0, 2500.0)),
        seed=seed,
    )


def preset_grid_example(n: int, seed: int) -> SyntheticSpec:
    """Small-scale market for identifiability grids over (rate, dispersion).

    Truth is a Poisson(3) count with lognormal(0, 1) claim sizes; the free
    parameters are the claim rate and the log-sd, with the log-mean pinned.
    """
    model = RiskModel("poisson", "lognormal", ("lam", "sigma"), {"mu": 0.0})
    return SyntheticSpec(
        model=model,
        theta=(3.0, 1.0),
        n_quotes=n,
        loading=LinearLoading(),
        coverages=CoverageSampler(r_range=(0.5, 1.0), d_range=(0.5, 6.0), l_range=None),
        seed=seed,
    )


def preset_link_comparison(kind: str, n: int, seed: int) -> SyntheticSpec:
    """Markets for the monotone-link vs straight-line baseline comparison."""
    if kind == "linear":
        loading = LinearLoading()
    elif kind == "gompertz":
        loading = GompertzLoading()
    else:
        raise ConfigError(f"unknown loading kind {kind!r}, expected 'linear' or 'gompertz'")
    model = RiskModel("poisson", "lognormal", ("lam", "sigma"), {"mu": 0.0})
    return SyntheticSpec(
        model=model,
        theta=(3.0, 1.0),
        n_quotes=n,
        loading=loading,
        coverages=CoverageSampler(r_range=(0.5, 1.0), d_range=(0.5, 6.0), l_range=None),
        seed=seed,
    )


# --------------------------------------------------------------------------
# Straight-line baseline
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearFit:
    """Ordinary least squares of commercial premium on pure premium."""

    slope: float
    intercept: float
    fitted: np.ndarray
    residuals: np.ndarray


def linear_baseline_fit(pure, commercial) -> LinearFit:
    """Least-squares line, the non-monotone baseline for link comparisons."""
    p = np.asarray(pure, dtype=float)
    t = np.asarray(commercial, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ValueError("pure and commercial must be nonempty 1-d arrays of equal length")
    design = np.column_stack([np.ones_like(p), p])
    beta, *_ = np.linalg.lstsq(design, t, rcond=None)
    fitted = design @ beta
    return LinearFit(
        slope=float(beta[1]),
        intercept=float(beta[0]),
        fitted=fitted,
        residuals=t - fitted,
    )
