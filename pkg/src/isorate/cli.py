"""Command-line surface: simulate, fit, distance-grid, isotonic-link, compare-links.

Configuration lives in a single JSON document; command-line flags override
individual entries. Every command is deterministic given (config, seed) and
writes delimited output plus rendered figures into the output directory.

Exit codes: 0 success, 2 configuration or parse error, 3 stalled sampler,
4 degenerate weights.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .abc_engine import (
    AbcConfig,
    PriorSpec,
    posterior_loss_ratio,
    run_pmc_abc,
)
from .artifacts import build_fit_artifact, load_json, save_json
from .discrepancy import Corridor, DistanceWeights, rmse, total_distance
from .errors import (
    ConfigError,
    DegenerateWeightsError,
    DomainError,
    QuoteParseError,
    StallError,
)
from .isotonic import pava_fit
from .market_data import (
    generate_synthetic,
    group_risk_classes,
    linear_baseline_fit,
    load_quotes,
    preset_grid_example,
    preset_link_comparison,
    preset_market_study,
    save_quotes,
)
from .risk_models import (
    RiskModel,
    coverage_arrays,
    pure_premiums,
    sample_aggregate_losses,
)
from . import plots

__all__ = ["main"]

_TAG_GRID = 31
_TAG_LINK = 37

_DEFAULT_MODEL = {
    "frequency": "poisson",
    "severity": "lognormal",
    "free_params": ["lam", "mu"],
    "fixed_params": {"sigma": 1.0},
}
_DEFAULT_PRIOR = {"lam": [0.0, 10.0], "mu": [-10.0, 10.0]}
_DEFAULT_ABC = {
    "n_particles": 1000,
    "n_replications": 2000,
    "max_generations": 40,
    "delta_eps": 1.0,
    "eps_min": 0.0,
    "bandwidth_factor": 2.0,
    "max_attempts": 1_000_000,
}
_DEFAULT_CORRIDOR = [0.4, 0.7]

_PRESETS = {
    "market-study": lambda n, seed: preset_market_study(n, seed),
    "grid-example": lambda n, seed: preset_grid_example(n, seed),
    "link-linear": lambda n, seed: preset_link_comparison("linear", n, seed),
    "link-gompertz": lambda n, seed: preset_link_comparison("gompertz", n, seed),
}


# --------------------------------------------------------------------------
# Configuration plumbing
# --------------------------------------------------------------------------


def _load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    return cfg


def _pick(args, cfg: dict, key: str, default=None):
    """Flag value if given, else config entry, else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    return cfg.get(key, default)


def _model_from_config(cfg: dict) -> RiskModel:
    spec = {**_DEFAULT_MODEL, **cfg.get("model", {})}
    try:
        return RiskModel(
            frequency=spec["frequency"],
            severity=spec["severity"],
            free_params=tuple(spec["free_params"]),
            fixed_params={k: float(v) for k, v in spec["fixed_params"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model section: {exc}") from None


def _prior_from_config(cfg: dict, model: RiskModel) -> PriorSpec:
    table = cfg.get("prior", _DEFAULT_PRIOR if cfg.get("model") is None else None)
    if table is None:
        raise ConfigError("config must provide a prior interval per free parameter")
    bounds = []
    for name in model.free_params:
        if name not in table:
            raise ConfigError(f"prior is missing an interval for {name!r}")
        lo, hi = table[name]
        bounds.append((float(lo), float(hi)))
    return PriorSpec(tuple(bounds))


def _corridor_from_config(cfg: dict, args) -> Corridor | None:
    if getattr(args, "corridor_off", False):
        return None
    raw = cfg.get("corridor", _DEFAULT_CORRIDOR)
    if raw is None:
        return None
    try:
        low, high = raw
        return Corridor(float(low), float(high))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid corridor {raw!r}: {exc}") from None


def _abc_from_config(cfg: dict, corridor: Corridor | None) -> AbcConfig:
    spec = {**_DEFAULT_ABC, **cfg.get("abc", {})}
    try:
        return AbcConfig(
            n_particles=int(spec["n_particles"]),
            n_replications=int(spec["n_replications"]),
            max_generations=int(spec["max_generations"]),
            delta_eps=float(spec["delta_eps"]),
            eps_min=float(spec["eps_min"]),
            corridor=corridor,
            bandwidth_factor=float(spec["bandwidth_factor"]),
            max_attempts=int(spec["max_attempts"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid abc section: {exc}") from None


def _weights_from_config(cfg: dict, n: int) -> DistanceWeights | None:
    raw = cfg.get("weights")
    if raw is None:
        return None
    try:
        w = DistanceWeights(np.asarray(raw, dtype=float))
    except ValueError as exc:
        raise ConfigError(f"invalid weights: {exc}") from None
    if w.values.size != n:
        raise ConfigError(f"weights have length {w.values.size}, data has {n} quotes")
    return w


def _out_dir(args, cfg: dict) -> Path:
    out = Path(_pick(args, cfg, "out", "isorate_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, cfg: dict) -> int:
    return int(_pick(args, cfg, "seed", 0))


def _quotes_path(args, cfg: dict) -> Path:
    path = _pick(args, cfg, "quotes")
    if path is None:
        raise ConfigError("no quotes file given (flag --quotes or config key 'quotes')")
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"quotes file not found: {path}")
    return path


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    preset_name = _pick(args, cfg, "preset", "market-study")
    if preset_name not in _PRESETS:
        raise ConfigError(f"unknown preset {preset_name!r}, choose from {sorted(_PRESETS)}")
    n = int(_pick(args, cfg, "n", 200))
    batch = _pick(args, cfg, "batch")

    if batch is None:
        _simulate_one(preset_name, n, seed, out, "quotes.csv", "truth.json",
                      render=not args.no_plot)
        print(f"wrote {out / 'quotes.csv'} ({n} quotes, seed {seed})")
    else:
        batch = int(batch)
        if batch < 1:
            raise ConfigError("batch must be >= 1")
        for k in range(batch):
            _simulate_one(preset_name, n, seed + k, out,
                          f"quotes_{k:03d}.csv", f"truth_{k:03d}.json", render=False)
        print(f"wrote {batch} quote files under {out} (seeds {seed}..{seed + batch - 1})")
    return 0


def _simulate_one(preset_name, n, seed, out: Path, quotes_name, truth_name, render):
    spec = _PRESETS[preset_name](n, seed)
    quotes, truth = generate_synthetic(spec)
    save_quotes(out / quotes_name, quotes)
    save_json(out / truth_name, truth)
    if render:
        plots.plot_market(
            truth["pure_premiums"], truth["commercial_premiums"],
            out / "market.png", title=f"{preset_name} market (seed {seed})",
        )


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    workers = int(_pick(args, cfg, "workers", 1))
    model = _model_from_config(cfg)
    prior = _prior_from_config(cfg, model)
    corridor = _corridor_from_config(cfg, args)
    abc_cfg = _abc_from_config(cfg, corridor)

    quotes = load_quotes(_quotes_path(args, cfg))
    classes = group_risk_classes(quotes)
    if args.class_key is not None:
        wanted = tuple(args.class_key.split("|"))
        if len(wanted) != 4:
            raise ConfigError("--class-key must be 'specie|breed|gender|age'")
        classes = [rc for rc in classes if rc.key == wanted]
        if not classes:
            raise ConfigError(f"no risk class matches key {args.class_key!r}")

    estimate_rows = []
    for rc in classes:
        observed = rc.premiums
        covs = rc.coverages
        weights = _weights_from_config(cfg, observed.size)
        result = run_pmc_abc(
            model, observed, covs, prior, abc_cfg, seed,
            weights=weights, workers=workers,
        )
        lr = posterior_loss_ratio(
            model, result.final, covs, observed, abc_cfg.n_replications, seed
        )
        artifact = build_fit_artifact(
            result, model, prior, abc_cfg, observed, covs,
            carriers=[q.insurance_carrier for q in rc.quotes],
            class_info={
                "specie": rc.specie, "breed": rc.breed,
                "gender": rc.gender, "age": rc.age, "label": rc.label,
            },
            posterior_lr=lr,
        )
        save_json(out / f"fit_{rc.label}.json", artifact)

        map_named = artifact["estimates"]["map"]
        link_rows, pure, link_fit = _loading_rows(
            model, map_named, rc, abc_cfg.n_replications, seed
        )
        _write_csv(
            out / f"loading_{rc.label}.csv",
            ["pure_premium", "commercial_premium", "fitted", "insurance_carrier"],
            link_rows,
        )
        if not args.no_plot:
            plots.plot_loading_link(
                pure, observed, link_fit, out / f"loading_{rc.label}.png",
                title=f"Loading link at MAP ({rc.label})",
            )
            plots.plot_posterior(
                result, list(model.free_params), out / f"posterior_{rc.label}.png",
                title=f"Posterior ({rc.label})",
            )
        final = result.final
        estimate_rows.append(
            [rc.label]
            + [map_named[p] for p in model.free_params]
            + [artifact["estimates"]["mode"][p] for p in model.free_params]
            + [final.epsilon, final.ess, len(result.clouds), result.stop_reason,
               result.n_simulations, lr]
        )
        print(
            f"class {rc.label}: MAP "
            + " ".join(f"{p}={map_named[p]:.4g}" for p in model.free_params)
            + f" | eps {final.epsilon:.4g} after {len(result.clouds)} generations"
            + f" ({result.stop_reason})"
        )

    header = (
        ["class"]
        + [f"map_{p}" for p in model.free_params]
        + [f"mode_{p}" for p in model.free_params]
        + ["final_epsilon", "final_ess", "generations", "stop_reason",
           "n_simulations", "posterior_loss_ratio"]
    )
    _write_csv(out / "estimates.csv", header, estimate_rows)
    return 0


def _loading_rows(model, map_named, rc, n_replications, seed):
    theta = [map_named[p] for p in model.free_params]
    ca = coverage_arrays(rc.coverages)
    rng = np.random.default_rng([seed, _TAG_LINK])
    losses = sample_aggregate_losses(model, theta, n_replications, rng)
    pure = pure_premiums(losses, ca)
    fit = pava_fit(pure, rc.premiums)
    rows = [
        [float(p), q.commercial_premium, float(f), q.insurance_carrier]
        for p, q, f in zip(pure, rc.quotes, fit.fitted)
    ]
    return rows, pure, fit


# --------------------------------------------------------------------------
# distance-grid
# --------------------------------------------------------------------------


def _parse_grid_spec(raw, model: RiskModel):
    """Grid axes like 'lam=0:5:21,sigma=0:2:21', one per free parameter."""
    if raw is None:
        raise ConfigError("no grid given (flag --grid or config key 'grid')")
    axes = {}
    if isinstance(raw, str):
        for part in raw.split(","):
            try:
                name, rng = part.split("=")
                lo, hi, count = rng.split(":")
                axes[name.strip()] = (float(lo), float(hi), int(count))
            except ValueError:
                raise ConfigError(f"cannot parse grid axis {part!r}") from None
    elif isinstance(raw, dict):
        for name, spec in raw.items():
            lo, hi, count = spec
            axes[name] = (float(lo), float(hi), int(count))
    else:
        raise ConfigError("grid must be a string spec or a config mapping")
    if set(axes) != set(model.free_params):
        raise ConfigError(
            f"grid axes {sorted(axes)} must match the free parameters {sorted(model.free_params)}"
        )
    if any(count < 1 for _, _, count in axes.values()):
        raise ConfigError("grid axes need at least one point")
    return [(name, *axes[name]) for name in model.free_params]


def cmd_distance_grid(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    model = _model_from_config(cfg)
    corridor = _corridor_from_config(cfg, args)
    abc_cfg = _abc_from_config(cfg, corridor)
    metric = _pick(args, cfg, "metric", "commercial")
    axes = _parse_grid_spec(_pick(args, cfg, "grid"), model)

    if metric == "pure":
        truth_path = _pick(args, cfg, "truth")
        if truth_path is None:
            raise ConfigError("metric 'pure' needs a ground-truth sidecar (--truth)")
        truth = load_json(truth_path)
        target = np.asarray(truth["pure_premiums"], dtype=float)
        quotes = load_quotes(_quotes_path(args, cfg))
        covs = coverage_arrays([q.coverage for q in quotes])
        observed = None
        if target.size != len(covs):
            raise ConfigError("truth sidecar and quotes file disagree on size")
    elif metric == "commercial":
        quotes = load_quotes(_quotes_path(args, cfg))
        covs = coverage_arrays([q.coverage for q in quotes])
        observed = np.array([q.commercial_premium for q in quotes])
        target = None
    else:
        raise ConfigError(f"unknown metric {metric!r}, expected 'pure' or 'commercial'")

    weights = _weights_from_config(cfg, len(covs))
    grids = [np.linspace(lo, hi, count) for _, lo, hi, count in axes]
    mesh_shape = tuple(g.size for g in grids)
    values = np.full(mesh_shape, np.nan)

    rows = []
    for idx in np.ndindex(mesh_shape):
        theta = [grids[k][idx[k]] for k in range(len(grids))]
        rng = np.random.default_rng([seed, _TAG_GRID, *idx])
        try:
            losses = sample_aggregate_losses(model, theta, abc_cfg.n_replications, rng)
        except DomainError:
            rows.append([*theta, "nan"])
            continue
        pure = pure_premiums(losses, covs)
        if metric == "pure":
            dist = rmse(target, pure, weights)
        else:
            fit = pava_fit(pure, observed, weights.values if weights else None)
            dist = total_distance(observed, pure, fit.fitted, corridor, weights)
        values[idx] = dist
        rows.append([*theta, dist])

    names = [name for name, *_ in axes]
    _write_csv(out / "grid.csv", [*names, "distance"], rows)
    if not args.no_plot and len(grids) == 2:
        plots.plot_grid(
            grids[0], grids[1], values, names[0], names[1], out / "grid.png",
            title=f"{metric} distance" + ("" if corridor or metric == "pure" else " (unregularized)"),
        )
    finite = values[np.isfinite(values)]
    if finite.size:
        best = np.unravel_index(np.nanargmin(values), values.shape)
        best_theta = {names[k]: float(grids[k][best[k]]) for k in range(len(grids))}
        print(f"grid minimum {np.nanmin(values):.6g} at {best_theta}")
    return 0


# --------------------------------------------------------------------------
# isotonic-link
# --------------------------------------------------------------------------


def cmd_isotonic_link(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    model = _model_from_config(cfg)
    abc_cfg = _abc_from_config(cfg, None)

    if args.theta is not None:
        try:
            theta = [float(v) for v in args.theta.split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse --theta {args.theta!r}") from None
        if len(theta) != model.dim:
            raise ConfigError(f"--theta needs {model.dim} values for {model.free_params}")
    elif args.from_artifact is not None:
        artifact = load_json(args.from_artifact)
        try:
            map_named = artifact["estimates"]["map"]
            theta = [float(map_named[p]) for p in model.free_params]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"artifact lacks usable estimates: {exc}") from None
    else:
        raise ConfigError("isotonic-link needs --theta or --from-artifact")

    quotes = load_quotes(_quotes_path(args, cfg))
    observed = np.array([q.commercial_premium for q in quotes])
    ca = coverage_arrays([q.coverage for q in quotes])
    weights = _weights_from_config(cfg, observed.size)
    rng = np.random.default_rng([seed, _TAG_LINK])
    losses = sample_aggregate_losses(model, theta, abc_cfg.n_replications, rng)
    pure = pure_premiums(losses, ca)
    fit = pava_fit(pure, observed, weights.values if weights else None)

    rows = [
        [float(p), q.commercial_premium, float(f), q.insurance_carrier]
        for p, q, f in zip(pure, quotes, fit.fitted)
    ]
    _write_csv(
        out / "link.csv",
        ["pure_premium", "commercial_premium", "fitted", "insurance_carrier"],
        rows,
    )
    if not args.no_plot:
        plots.plot_loading_link(pure, observed, fit, out / "link.png")
    theta_named = ", ".join(f"{p}={v:.4g}" for p, v in zip(model.free_params, theta))
    print(f"wrote {out / 'link.csv'} ({len(rows)} rows) at {theta_named}")
    return 0


# --------------------------------------------------------------------------
# compare-links
# --------------------------------------------------------------------------


def cmd_compare_links(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    seed = _seed(args, cfg)
    n_seeds = int(_pick(args, cfg, "seeds", 50))
    n = int(_pick(args, cfg, "n", 2000))

    rows = []
    for kind in ("gompertz", "linear"):
        for k in range(n_seeds):
            spec = preset_link_comparison(kind, n, seed + k)
            _, truth = generate_synthetic(spec)
            pure = np.asarray(truth["pure_premiums"])
            commercial = np.asarray(truth["commercial_premiums"])
            iso = pava_fit(pure, commercial)
            lin = linear_baseline_fit(pure, commercial)
            rows.append(
                {
                    "kind": kind,
                    "seed": seed + k,
                    "median_abs_isotonic": float(np.median(np.abs(commercial - iso.fitted))),
                    "median_abs_linear": float(np.median(np.abs(lin.residuals))),
                }
            )

    _write_csv(
        out / "residuals.csv",
        ["kind", "seed", "median_abs_isotonic", "median_abs_linear"],
        [[r["kind"], r["seed"], r["median_abs_isotonic"], r["median_abs_linear"]] for r in rows],
    )
    if not args.no_plot:
        plots.plot_residual_comparison(rows, out / "residuals.png")

    for kind in ("gompertz", "linear"):
        sub = [r for r in rows if r["kind"] == kind]
        wins = sum(r["median_abs_isotonic"] < r["median_abs_linear"] for r in sub)
        gaps = [
            abs(r["median_abs_isotonic"] - r["median_abs_linear"]) / r["median_abs_linear"]
            for r in sub
        ]
        print(
            f"{kind}: isotonic beats linear in {wins}/{len(sub)} seeds, "
            f"max median gap {max(gaps):.1%}"
        )
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isorate",
        description="Infer compound risk models from observed competitor premiums.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default isorate_out)")
        p.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    p = sub.add_parser("simulate", help="generate a synthetic quote market")
    common(p)
    p.add_argument("--preset", choices=sorted(_PRESETS), help="synthetic preset")
    p.add_argument("--n", type=int, help="number of quotes")
    p.add_argument("--batch", type=int, help="write this many numbered datasets")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the risk model to each risk class")
    common(p)
    p.add_argument("--quotes", help="quote CSV file")
    p.add_argument("--class-key", help="fit only 'specie|breed|gender|age'")
    p.add_argument("--workers", type=int, help="worker processes for the sampler")
    p.add_argument("--corridor-off", action="store_true", help="disable the loss-ratio corridor")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("distance-grid", help="evaluate the distance over a parameter grid")
    common(p)
    p.add_argument("--quotes", help="quote CSV file")
    p.add_argument("--grid", help="axes like 'lam=0:5:21,sigma=0:2:21'")
    p.add_argument("--metric", choices=["pure", "commercial"], help="distance flavor")
    p.add_argument("--truth", help="ground-truth sidecar (pure metric)")
    p.add_argument("--corridor-off", action="store_true", help="drop the corridor penalties")
    p.set_defaults(func=cmd_distance_grid)

    p = sub.add_parser("isotonic-link", help="fit the loading link at a fixed parameter")
    common(p)
    p.add_argument("--quotes", help="quote CSV file")
    p.add_argument("--theta", help="comma-separated free parameter values")
    p.add_argument("--from-artifact", help="take the MAP estimate from a fit artifact")
    p.set_defaults(func=cmd_isotonic_link)

    p = sub.add_parser("compare-links", help="isotonic vs straight-line residual study")
    common(p)
    p.add_argument("--seeds", type=int, help="number of synthetic markets per preset")
    p.add_argument("--n", type=int, help="quotes per synthetic market")
    p.set_defaults(func=cmd_compare_links)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, QuoteParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StallError as exc:
        print(f"sampler stalled: {exc}", file=sys.stderr)
        return 3
    except DegenerateWeightsError as exc:
        print(f"degenerate weights: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
