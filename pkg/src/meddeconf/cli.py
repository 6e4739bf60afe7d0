"""Command-line interface.

Subcommands
-----------
simulate    write a simulated cohort as CSV files
fit-factor  fit a factor model under a holdout mask and save it with its substitute confounder
check       run the predictive check on a saved fit
estimate    fit the outcome model and write an effect table and forest plot
report      merge finished ``run`` directories into one comparison table
run         the whole pipeline over several seeds

Exit status is 0 on success, 2 when a predictive check fails and 1 on any
other error. Settings may come from a ``key = value`` config file (``--config``);
flags given on the command line override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import SubstituteConfounder
from .exceptions import CheckFailedError, ConfigurationError, DeconfounderError
from .experiment import (
    Experiment,
    ExperimentConfig,
    FactorChoice,
    comparison_table,
    derive_seed,
    effects_tsv,
    emit_report,
    load_run,
    run_experiment,
    _STAGE_CHECK,
    _STAGE_FIT,
    _STAGE_FULL,
    _STAGE_MASK,
    _fit,
    _load_cohort,
    _standardize,
)
from .factor_models import load_fit, save_fit, substitute_confounder
from .holdout import HoldoutMask, make_holdout_mask
from .ingest import CohortFiles, load_cohort, save_cohort
from .outcome import RegressionPrior, effect_report, fit_outcome
from .plotting import write_forest_plot
from .predictive_check import predictive_score

log = logging.getLogger("meddeconf")

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2

# Config-file keys whose values are comma-separated lists.
_LIST_KEYS = {"seeds", "k", "layers", "check_band"}
_BOOL_KEYS = {"override_check", "standardize_confounder", "include_upper_layer"}


def _parse_value(key, text):
    text = text.strip()
    if key in _LIST_KEYS:
        return tuple(float(v) if key == "check_band" else int(v) for v in text.split(",") if v.strip())
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"{key}: expected a boolean, got {text!r}")
    if text.lower() in ("none", ""):
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Dashes in keys become underscores."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}, line {n}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        out[key] = _parse_value(key, value)
    return out


def _csv_ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _csv_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _seeds(text):
    """``0,1,2`` or a range ``0-19``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return tuple(seeds)


def _add_model_flags(p, with_seeds=True):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--factor-model", dest="factor_model", choices=[c.value for c in FactorChoice])
    p.add_argument("--k", type=_csv_ints, help="latent dimension, or a comma-separated ladder")
    p.add_argument("--layers", type=_csv_ints, help="DEF layer sizes K1,K2")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--def-steps", dest="def_steps", type=int)
    p.add_argument("--def-link", dest="def_link", choices=["softplus", "identity"])
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float)
    p.add_argument("--check-band", dest="check_band", type=_csv_floats, help="lo,hi")
    p.add_argument("--n-rep", dest="n_rep", type=int)
    p.add_argument("--n-post", dest="n_post", type=int)
    p.add_argument("--confounder-source", dest="confounder_source", choices=["full", "masked"])
    p.add_argument("--coef-precision", dest="coef_precision", type=float)
    if with_seeds:
        p.add_argument("--seeds", type=_seeds, help="e.g. 0,1,2 or 0-19")


def _add_data_flags(p):
    p.add_argument("--experiment", choices=[e.value for e in Experiment])
    p.add_argument("--cohort", dest="cohort_dir", help="cohort directory (implies CustomCohort)")
    p.add_argument("--n-patients", dest="n_patients", type=int)
    p.add_argument("--n-causes", dest="n_causes", type=int)
    p.add_argument("--filter-quantile", dest="filter_quantile", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meddeconf", description="Deconfounded multi-cause effect estimation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated cohort as CSV")
    p.add_argument("--config")
    p.add_argument("--experiment", choices=[e.value for e in Experiment if e is not Experiment.CUSTOM_COHORT])
    p.add_argument("--seeds", type=_seeds, help="a single seed")
    p.add_argument("--n-patients", dest="n_patients", type=int)
    p.add_argument("--n-causes", dest="n_causes", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-factor", help="fit a factor model and save it")
    _add_model_flags(p)
    _add_data_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("check", help="predictive check of a saved fit")
    p.add_argument("--config")
    p.add_argument("--cohort", dest="cohort_dir", required=True)
    p.add_argument("--fit-dir", required=True, help="output directory of fit-factor")
    p.add_argument("--check-band", dest="check_band", type=_csv_floats)
    p.add_argument("--n-rep", dest="n_rep", type=int)
    p.add_argument("--n-post", dest="n_post", type=int)
    p.add_argument("--seeds", type=_seeds, help="a single seed")
    p.add_argument("--out", help="report file (default: <fit-dir>/check.json)")

    p = sub.add_parser("estimate", help="fit the outcome model and write effects")
    p.add_argument("--cohort", dest="cohort_dir", required=True)
    p.add_argument("--fit-dir", help="output directory of fit-factor; omit for an unadjusted fit")
    p.add_argument("--override-check", dest="override_check", action="store_true", default=None)
    p.add_argument("--standardize", dest="standardize_confounder", action="store_true", default=None,
                   help="scale confounder columns to unit variance (default: as saved by fit-factor)")
    p.add_argument("--coef-precision", dest="coef_precision", type=float)
    p.add_argument("--title", default="")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="tabulate finished run directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", help="write table.tsv and table.txt here (default: print)")

    p = sub.add_parser("run", help="end-to-end pipeline over seeds")
    _add_model_flags(p)
    _add_data_flags(p)
    p.add_argument("--override-check", dest="override_check", action="store_true", default=None)
    p.add_argument("--jobs", type=int, default=1, help="seeds run in this many processes")
    p.add_argument("--out", required=True)
    return parser


_NOT_CONFIG = {"command", "verbose", "config", "out", "fit_dir", "runs", "jobs", "title"}


def make_config(args, **fixed) -> ExperimentConfig:
    settings = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in _NOT_CONFIG or value is None:
            continue
        settings[key] = value
    settings.update(fixed)
    if settings.get("cohort_dir") and "experiment" not in settings:
        settings["experiment"] = Experiment.CUSTOM_COHORT.value
    if "output_dir" not in settings and getattr(args, "out", None):
        settings["output_dir"] = str(args.out)
    return ExperimentConfig.from_dict(settings)


def _single_seed(config):
    if len(config.seeds) != 1:
        raise ConfigurationError("this subcommand takes exactly one seed")
    return config.seeds[0]


def cmd_simulate(args):
    config = make_config(args)
    seed = _single_seed(config)
    cohort = _load_cohort(config, seed)
    files = save_cohort(cohort, args.out)
    print(f"wrote {cohort.n_patients} patients x {cohort.n_causes} causes to {files.exposures_path.parent}")
    return EXIT_OK


def cmd_fit_factor(args):
    config = make_config(args)
    if not config.factor_model.is_factor_model:
        raise ConfigurationError("fit-factor needs --factor-model PPCA, PMF or DEF")
    seed = _single_seed(config)
    if len(config.k_ladder) != 1:
        raise ConfigurationError("fit-factor takes a single --k; use `run` for a ladder")
    k = config.k_ladder[0]
    cohort = _load_cohort(config, seed)
    a = cohort.exposures.values
    mask = make_holdout_mask(*a.shape, config.holdout_fraction, seed=derive_seed(seed, _STAGE_MASK))
    fit = _fit(config, a, k, derive_seed(seed, _STAGE_FIT), mask)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_fit(fit, out / "fit.npz")
    np.savez(out / "holdout.npz", columns=mask.columns, n_causes=mask.n_causes, holdout_fraction=mask.holdout_fraction)
    source = fit
    if config.confounder_source == "full":
        source = _fit(config, a, k, derive_seed(seed, _STAGE_FULL), None)
    if config.factor_model is FactorChoice.DEF:
        z = substitute_confounder(source, include_upper=config.include_upper_layer)
    else:
        z = substitute_confounder(source)
    np.savez(out / "confounder.npz", values=z.values, source_model=z.source_model)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"saved {config.factor_model.value} fit (k={k}) to {out}")
    return EXIT_OK


def _load_mask(path):
    with np.load(path) as f:
        return HoldoutMask(f["columns"], int(f["n_causes"]), float(f["holdout_fraction"]))


def _fit_config(fit_dir):
    return json.loads((Path(fit_dir) / "config.json").read_text(encoding="utf-8"))


def cmd_check(args):
    fit_dir = Path(args.fit_dir)
    settings = _fit_config(fit_dir)
    if args.config:
        settings.update(read_config_file(args.config))
    for key in ("check_band", "n_rep", "n_post", "seeds"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    config = ExperimentConfig.from_dict(settings)
    seed = _single_seed(config)
    cohort = load_cohort(CohortFiles.in_directory(args.cohort_dir))
    fit = load_fit(fit_dir / "fit.npz")
    mask = _load_mask(fit_dir / "holdout.npz")
    result = predictive_score(
        fit, cohort.exposures.values, mask, n_rep=config.n_rep, n_post=config.n_post,
        seed=derive_seed(seed, _STAGE_CHECK), band=config.check_band, statistic=config.check_statistic,
    )
    out = Path(args.out) if args.out else fit_dir / "check.json"
    out.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"score {result.score:.3f}  verdict {result.verdict.value}")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def cmd_estimate(args):
    cohort = load_cohort(CohortFiles.in_directory(args.cohort_dir))
    z = None
    standardize = args.standardize_confounder
    if args.fit_dir:
        fit_dir = Path(args.fit_dir)
        check_path = fit_dir / "check.json"
        check = json.loads(check_path.read_text(encoding="utf-8")) if check_path.exists() else None
        if not args.override_check:
            if check is None:
                raise ConfigurationError(f"no predictive check for {fit_dir}; run `check` first or pass --override-check")
            if check["verdict"] != "Pass":
                raise CheckFailedError(check["score"], tuple(check["band"]))
        with np.load(fit_dir / "confounder.npz") as f:
            z = SubstituteConfounder(f["values"], str(f["source_model"])).values
        if standardize is None:
            standardize = _fit_config(fit_dir).get("standardize_confounder", False)
        if standardize:
            z = _standardize(z)
    prior = RegressionPrior(coef_precision=args.coef_precision)
    report = effect_report(fit_outcome(cohort.outcomes, cohort.exposures.values, z, prior=prior, cause_labels=cohort.cause_labels))
    if len(report) == 0:
        raise ValueError("no effects to report")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effects.tsv").write_text(effects_tsv(report), encoding="utf-8")
    write_forest_plot(report, out / "forest.svg", title=args.title)
    print(f"wrote effects for {len(report)} causes ({int(report.causal.sum())} flagged causal) to {out}")
    return EXIT_OK


def cmd_report(args):
    tsv, text = comparison_table([load_run(d) for d in args.runs])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.tsv").write_text(tsv, encoding="utf-8")
        (out / "table.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args):
    config = make_config(args)
    report = run_experiment(config, n_jobs=args.jobs)
    emit_report(report, args.out)
    sys.stdout.write(comparison_table([report])[1])
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-factor": cmd_fit_factor,
    "check": cmd_check,
    "estimate": cmd_estimate,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except CheckFailedError as exc:
        print(f"meddeconf: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (DeconfounderError, ValueError, OSError, KeyError) as exc:
        print(f"meddeconf: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
