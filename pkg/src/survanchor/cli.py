"""Config-driven command-line pipeline.

Stages compose through files in the output directory, so each is re-runnable
on its own:

    simulate           synthetic survival fixtures from a declared truth
    km                 Kaplan-Meier CSV per configured dataset
    reconstruct-ipd    individual records from a digitized curve
    project-mortality  Lee-Carter fit + projection (+ synthetic cohort)
    synthesize         cohort synthesis from saved projected rates
    fit                joint posterior sampling -> draws CSV + report JSON
    extrapolate        per-method curve CSVs + pointwise summaries
    estimands          mean survival / RMS / LYG report + per-draw CSV
    compare            criteria table across fit reports
    report             figures (survival, hazard, densities) + summary CSV

Exit codes: 0 success, 2 config/validation error, 3 data error, 4 sampler
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    build_model_spec,
    build_priors,
    build_sampler_config,
    config_hash,
    data_paths,
    load_config,
)
from .data import (
    kaplan_meier,
    load_digitized_csv,
    load_km_csv,
    load_survival_csv,
    reconstruct_ipd,
    write_km_csv,
    write_survival_csv,
)
from .estimands import (
    life_years_gained,
    mean_survival,
    restricted_mean_survival,
    write_estimand_draws_csv,
    write_estimand_report,
)
from .extrapolate import (
    EXTRAPOLATION_METHODS,
    derive_hr_arm,
    extrapolate_baseline,
    extrapolate_constant_difference,
    extrapolate_constant_ratio,
    extrapolate_pseudo_cause_specific,
    load_curve_csv,
    make_grid,
    write_curve_csv,
    write_curve_summary_csv,
)
from .inference import fit as run_fit
from .inference import load_draws_csv
from .model import JointModel
from .mortality import (
    cohort_survival,
    fit_lee_carter,
    load_mortality_csv,
    load_rates_csv,
    project_rates,
    project_rates_sequence,
    synthesize_cohort,
    write_rates_csv,
)
from .simulate import simulate_dataset


class DataError(Exception):
    """Input files missing, malformed, or inconsistent."""


class SamplerError(Exception):
    """Posterior sampling failed."""


def _fail_data(exc: Exception) -> "DataError":
    return DataError(str(exc))


def _header(cfg: dict) -> str:
    return f"survanchor v{__version__} config={config_hash(cfg)}"


def _meta(cfg: dict) -> dict:
    return {"artifact_version": __version__, "config_hash": config_hash(cfg)}


def _say(quiet: bool, *parts) -> None:
    if not quiet:
        print(*parts)


def _load_datasets(cfg: dict, base: Path, time_unit: str) -> dict:
    out = {}
    for group, path in data_paths(cfg, base).items():
        try:
            out[group] = load_survival_csv(path, time_unit=time_unit)
        except (OSError, ValueError) as exc:
            raise _fail_data(exc) from None
    return out


def _time_unit(cfg: dict) -> str:
    return cfg.get("time_unit", "months")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("simulate")
    if not isinstance(block, dict):
        raise ConfigError("missing required block: simulate")
    truth = block.get("truth")
    if not isinstance(truth, dict):
        raise ConfigError("simulate.truth must map parameter names to values")
    spec = build_model_spec(cfg)
    model = JointModel(spec)
    missing = [n for n in model.param_names if n not in truth]
    if missing:
        raise ConfigError(f"simulate.truth missing parameters {missing}")
    theta = np.array([float(truth[n]) for n in model.param_names])

    groups = block.get("groups")
    if not isinstance(groups, dict) or not groups:
        raise ConfigError("simulate.groups must map group names to {n, censor_time}")
    rng = np.random.default_rng(seed)
    unit = _time_unit(cfg)
    for group, opts in groups.items():
        if group not in spec.group_names():
            raise ConfigError(f"simulate.groups.{group}: unknown group (model declares {spec.group_names()})")
        n = int(opts.get("n", 0))
        if n < 1:
            raise ConfigError(f"simulate.groups.{group}.n must be >= 1")
        censor = opts.get("censor_time")
        poly = model.polyhazard_at(group, theta)
        ds = simulate_dataset(
            poly, n, rng,
            censor_time=None if censor is None else float(censor),
            group=group, time_unit=unit,
        )
        path = out / f"{group}.csv"
        write_survival_csv(path, ds, header_comment=_header(cfg))
        _say(quiet, f"wrote {path} ({len(ds)} records, {ds.n_events} events)")


def cmd_km(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    datasets = _load_datasets(cfg, base, _time_unit(cfg))
    if not datasets:
        raise ConfigError("data block names no survival CSVs")
    for group, ds in datasets.items():
        curve = kaplan_meier(ds)
        path = out / f"km_{group}.csv"
        write_km_csv(path, curve, header_comment=_header(cfg))
        _say(quiet, f"wrote {path} ({curve.times.size} steps)")


def cmd_reconstruct_ipd(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("data", {})
    curve_path = block.get("digitized_curve")
    if curve_path is None:
        raise ConfigError("data.digitized_curve is required for reconstruct-ipd")
    risk_path = block.get("risk_table")
    total_n = block.get("total_n")
    try:
        curve = load_digitized_csv(
            base / curve_path if not Path(curve_path).is_absolute() else curve_path,
            risk_table_path=None if risk_path is None else (
                base / risk_path if not Path(risk_path).is_absolute() else risk_path
            ),
            total_n=None if total_n is None else int(total_n),
        )
        ds = reconstruct_ipd(
            curve, group=block.get("group", ""), time_unit=_time_unit(cfg)
        )
    except (OSError, ValueError) as exc:
        raise _fail_data(exc) from None
    path = out / "ipd.csv"
    write_survival_csv(path, ds, header_comment=_header(cfg))
    _say(quiet, f"wrote {path} ({len(ds)} records, {ds.n_events} events)")


def cmd_project_mortality(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("mortality")
    if not isinstance(block, dict):
        raise ConfigError("missing required block: mortality")
    csv_path = block.get("csv")
    if csv_path is None:
        raise ConfigError("mortality.csv is required")
    sex = block.get("sex", "female")
    try:
        surface = load_mortality_csv(
            base / csv_path if not Path(csv_path).is_absolute() else csv_path, sex
        )
    except (OSError, ValueError) as exc:
        raise _fail_data(exc) from None
    target_year = int(block.get("target_year", 0))
    if target_year <= int(surface.years[-1]):
        raise ConfigError(
            f"mortality.target_year must exceed the last observed year {surface.years[-1]}"
        )
    post = fit_lee_carter(
        surface,
        iterations=int(block.get("iterations", 1000)),
        warmup=int(block.get("warmup", 1000)),
        seed=seed,
    )
    rates = project_rates(post, target_year, rng=np.random.default_rng(seed + 1))
    rates_path = out / "projected_rates.csv"
    write_rates_csv(rates_path, rates, header_comment=_header(cfg))
    _say(quiet, f"wrote {rates_path} ({rates.n_draws} draws x {rates.ages.size} ages)")

    profile = [(int(a), str(s), int(n)) for a, s, n in block.get("profile", [])]
    start_ages = sorted({a for a, _, _ in profile}) or [int(rates.ages[0])]
    surv_path = out / "cohort_survival.csv"
    with open(surv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {_header(cfg)}\n")
        writer = csv.writer(fh)
        writer.writerow(["start_age", "age", "survival_mean", "survival_q2.5", "survival_q97.5"])
        for a in start_ages:
            max_j = int(rates.ages[-1]) - a + 1
            for j in range(max_j + 1):
                pi = cohort_survival(rates, a, j)
                q = np.percentile(pi, [2.5, 97.5])
                writer.writerow(
                    [a, a + j, repr(float(pi.mean())), repr(float(q[0])), repr(float(q[1]))]
                )
    _say(quiet, f"wrote {surv_path}")

    if profile:
        diagonal = None
        if block.get("diagonal"):
            span = int(rates.ages[-1]) - min(a for a, _, _ in profile)
            diagonal = project_rates_sequence(
                post, target_year, target_year + span, rng=np.random.default_rng(seed + 1)
            )
        _write_cohort(cfg, block, rates, profile, out, seed + 2, quiet, diagonal=diagonal)


def _write_cohort(cfg, block, rates, profile, out: Path, seed: int, quiet: bool, diagonal=None) -> None:
    props = block.get("cause_proportions")
    if props is not None:
        props = {int(a): float(p) for a, p in props.items()}
    unit = block.get("time_unit", "years")
    result = synthesize_cohort(
        rates, profile, cause_proportions=props, seed=seed, time_unit=unit,
        diagonal=diagonal,
    )
    if props is None:
        path = out / "cohort.csv"
        write_survival_csv(path, result, header_comment=_header(cfg))
        _say(quiet, f"wrote {path} ({len(result)} records)")
    else:
        for name, ds in zip(("cohort_cause.csv", "cohort_other.csv"), result):
            path = out / name
            write_survival_csv(path, ds, header_comment=_header(cfg))
            _say(quiet, f"wrote {path} ({len(ds)} records, {ds.n_events} events)")


def cmd_synthesize(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("mortality")
    if not isinstance(block, dict):
        raise ConfigError("missing required block: mortality")
    rates_path = block.get("rates_csv", out / "projected_rates.csv")
    try:
        rates = load_rates_csv(rates_path)
    except (OSError, ValueError) as exc:
        raise _fail_data(exc) from None
    profile = [(int(a), str(s), int(n)) for a, s, n in block.get("profile", [])]
    if not profile:
        raise ConfigError("mortality.profile is required for synthesize")
    _write_cohort(cfg, block, rates, profile, out, seed, quiet)


def cmd_fit(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    spec = build_model_spec(cfg)
    priors = build_priors(cfg)
    datasets = _load_datasets(cfg, base, _time_unit(cfg))
    if not datasets:
        raise ConfigError("data block names no survival CSVs to fit")
    try:
        model = JointModel(spec, datasets, priors)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None
    sampler_cfg = build_sampler_config(cfg, seed_override=seed)
    try:
        samples, report = run_fit(model, sampler_cfg)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise SamplerError(str(exc)) from None
    draws_path = out / "draws.csv"
    samples.to_csv(draws_path, header_comment=_header(cfg))
    report_path = out / "report.json"
    report.to_json(report_path, meta=_meta(cfg))
    _say(quiet, f"wrote {draws_path} ({samples.n_chains} chains x {samples.n_iterations} draws)")
    _say(quiet, f"wrote {report_path} (divergences: {report.divergences})")


def _build_model_with_data(cfg: dict, base: Path) -> JointModel:
    spec = build_model_spec(cfg)
    datasets = _load_datasets(cfg, base, _time_unit(cfg))
    return JointModel(spec, datasets, build_priors(cfg))


def _slug(method: str) -> str:
    return method.replace("+", "-")


def cmd_extrapolate(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("extrapolation")
    if not isinstance(block, dict):
        raise ConfigError("missing required block: extrapolation")
    methods = block.get("methods", ["baseline"])
    bad = [m for m in methods if m not in EXTRAPOLATION_METHODS]
    if bad:
        raise ConfigError(f"extrapolation.methods: unknown {bad}; choose from {EXTRAPOLATION_METHODS}")
    horizon = block.get("horizon")
    if horizon is None:
        raise ConfigError("extrapolation.horizon is required")
    grid = make_grid(float(horizon), float(block.get("grid_step", 1.0)))

    model = _build_model_with_data(cfg, base)
    draws_path = block.get("draws_csv", out / "draws.csv")
    try:
        samples = load_draws_csv(draws_path)
    except (OSError, ValueError) as exc:
        raise _fail_data(exc) from None
    if samples.param_names != model.param_names:
        raise DataError(
            f"draws file parameters {samples.param_names} do not match the "
            f"model ({model.param_names})"
        )
    draws = samples.flat()
    t_star = block.get("t_star")
    unit = _time_unit(cfg)
    k = int(block.get("k", 5))
    mask = block.get("mask", [0])

    curves = {}
    curves["population"] = extrapolate_baseline(
        model, draws, grid, group="population", t_star=t_star, time_unit=unit
    )
    for method in methods:
        if method == "baseline":
            curve = extrapolate_baseline(model, draws, grid, t_star=t_star, time_unit=unit)
        elif method == "constant-difference":
            curve = extrapolate_constant_difference(model, draws, grid, k, t_star=t_star, time_unit=unit)
        elif method == "constant-ratio":
            curve = extrapolate_constant_ratio(model, draws, grid, k, t_star=t_star, time_unit=unit)
        else:
            variant = method.rsplit("-", 1)[1]
            curve = extrapolate_pseudo_cause_specific(
                model, draws, grid, k, variant, mask, t_star=t_star, time_unit=unit
            )
        curves[f"disease_{_slug(method)}"] = curve

    hr_block = block.get("hr_arm")
    if hr_block is not None:
        source = f"disease_{_slug(hr_block.get('source_method', methods[0]))}"
        if source not in curves:
            raise ConfigError(f"extrapolation.hr_arm.source_method: no curve {source}")
        ci = hr_block.get("ci")
        hr = (
            (float(hr_block["hr"]), float(ci[0]), float(ci[1]))
            if ci is not None
            else float(hr_block["hr"])
        )
        hr_mask = hr_block.get("mask", "all")
        name = hr_block.get("name", "derived")
        curves[name] = derive_hr_arm(
            curves[source], hr, mask=hr_mask, group=name,
            rng=np.random.default_rng(seed + 17),
        )

    for label, curve in curves.items():
        cpath = out / f"curve_{label}.csv"
        spath = out / f"summary_{label}.csv"
        write_curve_csv(cpath, curve, header_comment=_header(cfg))
        write_curve_summary_csv(spath, curve, header_comment=_header(cfg))
        _say(quiet, f"wrote {cpath} and {spath} [{curve.method}]")


def cmd_estimands(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("estimands")
    if not isinstance(block, dict):
        raise ConfigError("missing required block: estimands")
    curve_files = block.get("curves")
    if not isinstance(curve_files, dict) or not curve_files:
        raise ConfigError("estimands.curves must map labels to curve CSV paths")
    threshold = float(block.get("threshold", 1e-4))
    curves = {}
    for label, path in curve_files.items():
        p = Path(path)
        if not p.is_absolute():
            p = out / p if (out / p).exists() else base / p
        if not p.exists():
            raise DataError(f"curve file not found: {p}")
        try:
            curves[label] = load_curve_csv(p)
        except (OSError, ValueError) as exc:
            raise _fail_data(exc) from None

    results = []
    for label, curve in curves.items():
        results.append(mean_survival(curve, threshold=threshold, name=f"mean_survival[{label}]"))
    tau = block.get("restriction_time")
    if tau is not None:
        for label, curve in curves.items():
            try:
                results.append(
                    restricted_mean_survival(curve, float(tau), name=f"rms[{label},{tau}]")
                )
            except ValueError as exc:
                raise ConfigError(f"estimands.restriction_time: {exc}") from None
    for pair in block.get("pairs", []):
        if len(pair) != 2 or pair[0] not in curves or pair[1] not in curves:
            raise ConfigError(f"estimands.pairs entry {pair} must name two loaded curves")
        try:
            results.append(
                life_years_gained(
                    curves[pair[0]], curves[pair[1]], threshold=threshold,
                    name=f"lyg[{pair[0]}-{pair[1]}]",
                )
            )
        except ValueError as exc:
            raise DataError(str(exc)) from None

    report_path = out / "estimands.json"
    write_estimand_report(report_path, results, meta=_meta(cfg))
    draws_path = out / "estimand_draws.csv"
    write_estimand_draws_csv(draws_path, results, header_comment=_header(cfg))
    _say(quiet, f"wrote {report_path} and {draws_path}")
    for r in results:
        _say(quiet, f"  {r.name}: mean {r.mean:.4g} {r.units} "
                    f"[{r.percentile(2.5):.4g}, {r.percentile(97.5):.4g}]")


_TABLE_COLUMNS = ["AIC", "BIC", "DIC", "DIC2", "WAIC", "wall_time_s", "p_d", "p_v", "p_w", "p"]


def cmd_compare(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    block = cfg.get("compare")
    if not isinstance(block, dict) or not isinstance(block.get("reports"), dict):
        raise ConfigError("compare.reports must map labels to fit-report JSON paths")
    rows = []
    for label, path in block["reports"].items():
        p = Path(path)
        if not p.is_absolute():
            p = out / p if (out / p).exists() else base / p
        try:
            with open(p, encoding="utf-8") as fh:
                report = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _fail_data(exc) from None
        criteria = report.get("criteria", {})
        rows.append([label] + [criteria.get(c) for c in _TABLE_COLUMNS])
    table_path = out / "compare.csv"
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {_header(cfg)}\n")
        writer = csv.writer(fh)
        writer.writerow(["model"] + _TABLE_COLUMNS)
        writer.writerows(rows)
    _say(quiet, f"wrote {table_path}")
    if not quiet:
        widths = [max(len(str(r[i])) for r in [["model"] + _TABLE_COLUMNS] + rows) for i in range(len(_TABLE_COLUMNS) + 1)]
        for r in [["model"] + _TABLE_COLUMNS] + rows:
            print("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))


def cmd_report(cfg: dict, base: Path, out: Path, seed: int, quiet: bool) -> None:
    from . import plots

    block = cfg.get("report")
    if not isinstance(block, dict):
        raise ConfigError("missing required block: report")
    curve_files = block.get("curves")
    if not isinstance(curve_files, dict) or not curve_files:
        raise ConfigError("report.curves must map labels to curve CSV paths")
    curves = {}
    for label, path in curve_files.items():
        p = Path(path)
        if not p.is_absolute():
            p = out / p if (out / p).exists() else base / p
        try:
            curves[label] = load_curve_csv(p)
        except (OSError, ValueError) as exc:
            raise _fail_data(exc) from None

    km = None
    if block.get("km") is not None:
        p = Path(block["km"])
        if not p.is_absolute():
            p = out / p if (out / p).exists() else base / p
        try:
            km = load_km_csv(p)
        except (OSError, ValueError) as exc:
            raise _fail_data(exc) from None

    surv_path = out / "fig_survival.png"
    plots.plot_survival(curves, surv_path, km=km)
    haz_path = out / "fig_hazard.png"
    plots.plot_hazard(curves, haz_path)
    _say(quiet, f"wrote {surv_path} and {haz_path}")

    density_src = block.get("estimand_draws")
    if density_src is not None:
        p = Path(density_src)
        if not p.is_absolute():
            p = out / p if (out / p).exists() else base / p
        per_estimand: dict[str, list[float]] = {}
        try:
            with open(p, newline="", encoding="utf-8") as fh:
                reader = csv.reader(row for row in fh if not row.startswith("#"))
                header = next(reader)
                for row in reader:
                    if row:
                        per_estimand.setdefault(row[0], []).append(float(row[2]))
        except (OSError, ValueError) as exc:
            raise _fail_data(exc) from None
        for i, (name, values) in enumerate(sorted(per_estimand.items())):
            fig_path = out / f"fig_density_{i}.png"
            plots.plot_estimand_density(np.asarray(values), fig_path, label=name)
            _say(quiet, f"wrote {fig_path} ({name})")

    summary_path = out / "report_summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {_header(cfg)}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["curve", "time", "survival_mean", "survival_q2.5", "survival_q97.5",
             "hazard_mean", "hazard_q2.5", "hazard_q97.5"]
        )
        for label, curve in curves.items():
            with np.errstate(invalid="ignore"):  # hazards may be +inf at t = 0
                s_q = np.percentile(curve.survival, [2.5, 97.5], axis=0)
                h_q = np.percentile(curve.hazard, [2.5, 97.5], axis=0)
                s_mean = curve.survival.mean(axis=0)
                h_mean = curve.hazard.mean(axis=0)
            for j, t in enumerate(curve.grid):
                writer.writerow(
                    [label, repr(float(t)),
                     repr(float(s_mean[j])), repr(float(s_q[0, j])), repr(float(s_q[1, j])),
                     repr(float(h_mean[j])), repr(float(h_q[0, j])), repr(float(h_q[1, j]))]
                )
    _say(quiet, f"wrote {summary_path}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "simulate": cmd_simulate,
    "km": cmd_km,
    "reconstruct-ipd": cmd_reconstruct_ipd,
    "project-mortality": cmd_project_mortality,
    "synthesize": cmd_synthesize,
    "fit": cmd_fit,
    "extrapolate": cmd_extrapolate,
    "estimands": cmd_estimands,
    "compare": cmd_compare,
    "report": cmd_report,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survanchor",
        description="survival extrapolation anchored on projected population mortality",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run-config JSON path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        base = Path(args.config).resolve().parent
        out = Path(args.out) if args.out else Path(cfg.get("output_dir", "out"))
        out.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        _COMMANDS[args.command](cfg, base, out, seed, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except SamplerError as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
