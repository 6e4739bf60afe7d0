"""End-to-end experiments: data, factor model, predictive check, outcome model, metrics.

``run_experiment`` executes one configuration over a list of seeds and
returns an ``ExperimentReport``; ``emit_report`` writes its TSV tables, SVG
forest plots and a manifest from which the run can be repeated exactly.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from .data import Cohort, validate_cohort
from .exceptions import CheckFailedError, ConfigurationError
from .factor_models import fit_factor_model, substitute_confounder
from .holdout import make_holdout_mask
from .ingest import CohortFiles, filter_rare_causes, load_cohort
from .metrics import EvalSummary, coverage
from .outcome import EffectReport, RegressionPrior, effect_report, fit_outcome
from .plotting import forest_plot_svg
from .predictive_check import CheckResult, predictive_score
from .simulation import MultiMedConfig, Setup, TwoMedConfig, simulate_multi_med, simulate_two_med

__all__ = [
    "Experiment",
    "FactorChoice",
    "ExperimentConfig",
    "SeedResult",
    "ExperimentReport",
    "run_experiment",
    "emit_report",
    "comparison_table",
    "derive_seed",
    "load_run",
    "effects_from_tsv",
]

log = logging.getLogger(__name__)


class Experiment(str, enum.Enum):
    TWO_MED_NO_CAUSE = "TwoMedNoCause"
    TWO_MED_ONE_CAUSE = "TwoMedOneCause"
    MULTI_MED = "MultiMed"
    CUSTOM_COHORT = "CustomCohort"


class FactorChoice(str, enum.Enum):
    PPCA = "PPCA"
    PMF = "PMF"
    DEF = "DEF"
    NONE = "None"
    ORACLE = "Oracle"

    @property
    def is_factor_model(self):
        return self in (FactorChoice.PPCA, FactorChoice.PMF, FactorChoice.DEF)


DEFAULT_K = {FactorChoice.PPCA: (1,), FactorChoice.PMF: (30,)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``k`` is a ladder of latent dimensions: the smallest passing the
    predictive check is used. ``confounder_source`` chooses whether the
    substitute confounder comes from the checked fit trained under the
    holdout mask ("masked", the default) or from a refit on the complete data
    ("full"). ``standardize_confounder`` rescales its columns to unit
    variance before the outcome regression.
    """

    experiment: Experiment = Experiment.TWO_MED_NO_CAUSE
    factor_model: FactorChoice = FactorChoice.PPCA
    seeds: tuple = (0,)
    k: Optional[tuple] = None
    layers: tuple = (30, 4)
    alpha: float = 0.3
    beta: float = 0.3
    def_steps: int = 10_000
    def_link: str = "softplus"
    holdout_fraction: float = 0.2
    check_band: tuple = (0.05, 0.95)
    check_statistic: str = "patient"
    n_rep: int = 100
    n_post: int = 100
    override_check: bool = False
    confounder_source: str = "masked"
    standardize_confounder: bool = False
    include_upper_layer: bool = False
    coef_precision: Optional[float] = None
    n_patients: Optional[int] = None
    n_causes: Optional[int] = None
    cohort_dir: Optional[str] = None
    filter_quantile: float = 0.0
    output_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "factor_model", FactorChoice(self.factor_model))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.k is not None:
            ks = (self.k,) if np.isscalar(self.k) else self.k
            object.__setattr__(self, "k", tuple(int(v) for v in ks))
        object.__setattr__(self, "layers", tuple(int(v) for v in self.layers))
        object.__setattr__(self, "check_band", tuple(float(v) for v in self.check_band))
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.confounder_source not in ("full", "masked"):
            raise ConfigurationError("confounder_source must be 'full' or 'masked'")
        if self.experiment is Experiment.CUSTOM_COHORT and not self.cohort_dir:
            raise ConfigurationError("CustomCohort requires cohort_dir")
        lo, hi = self.check_band
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigurationError("check band must satisfy 0 <= lo <= hi <= 1")

    @property
    def k_ladder(self):
        if self.k is not None:
            return tuple(sorted(self.k))
        return DEFAULT_K.get(self.factor_model, (None,))

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else (list(v) if isinstance(v, tuple) else v)
        return out

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SeedResult:
    seed: int
    report: EffectReport
    k: Optional[int] = None
    check: Optional[CheckResult] = None
    checks_tried: list = field(default_factory=list)
    summary: Optional[EvalSummary] = None
    true_effects: Optional[np.ndarray] = None
    check_overridden: bool = False
    fit: Optional[object] = field(default=None, repr=False)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    results: list

    @property
    def labels(self):
        return self.results[0].report.labels

    def mean_effects(self):
        return np.mean([r.report.mean for r in self.results], axis=0)

    def mean_summary(self) -> Optional[EvalSummary]:
        sums = [r.summary for r in self.results if r.summary is not None]
        if not sums:
            return None

        def avg(name):
            vals = [getattr(s, name) for s in sums if getattr(s, name) is not None]
            return float(np.mean(vals)) if vals else None

        return EvalSummary(avg("rmse"), avg("coverage_all"), avg("coverage_causal"), avg("coverage_noncausal"))


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic 32-bit child seed of ``seed`` for a stage tag."""
    return int(np.random.SeedSequence([int(seed), *tags]).generate_state(1)[0])


_STAGE_MASK, _STAGE_FIT, _STAGE_CHECK, _STAGE_FULL = 1, 2, 3, 4


def _load_cohort(config: ExperimentConfig, seed: int) -> Cohort:
    exp = config.experiment
    if exp in (Experiment.TWO_MED_NO_CAUSE, Experiment.TWO_MED_ONE_CAUSE):
        setup = Setup.NO_CAUSE if exp is Experiment.TWO_MED_NO_CAUSE else Setup.ONE_CAUSE
        return simulate_two_med(TwoMedConfig(config.n_patients or 1000, setup, seed))
    if exp is Experiment.MULTI_MED:
        return simulate_multi_med(
            MultiMedConfig(n_patients=config.n_patients or 5000, n_causes=config.n_causes or 50, seed=seed)
        )
    cohort = load_cohort(CohortFiles.in_directory(config.cohort_dir))
    if config.filter_quantile > 0:
        cohort = filter_rare_causes(cohort, config.filter_quantile)
    return cohort


def _fit(config, a, k, seed, mask):
    opts = {}
    if config.factor_model is FactorChoice.DEF:
        opts = {"n_steps": config.def_steps, "link": config.def_link}
    return fit_factor_model(
        config.factor_model.value, a, k=k, layer_sizes=config.layers, alpha=config.alpha,
        beta=config.beta, seed=seed, mask=mask, **opts,
    )


def _standardize(z):
    sd = z.std(axis=0)
    sd[sd == 0] = 1.0
    return (z - z.mean(axis=0)) / sd


def run_seed(config: ExperimentConfig, seed: int, cohort: Optional[Cohort] = None) -> SeedResult:
    """One seed of the pipeline.

    Raises
    ------
    CheckFailedError
        No rung of the K ladder passes the predictive check and
        ``override_check`` is off.
    """
    if cohort is None:
        cohort = _load_cohort(config, seed)
    validate_cohort(cohort)
    a, y = cohort.exposures.values, cohort.outcomes
    choice = config.factor_model
    z, k, check, tried, overridden, fit = None, None, None, [], False, None

    if choice is FactorChoice.ORACLE:
        if cohort.true_confounders is None:
            raise ConfigurationError("the Oracle model needs true confounders, which this cohort lacks")
        z = cohort.true_confounders
    elif choice.is_factor_model:
        mask = make_holdout_mask(*a.shape, config.holdout_fraction, seed=derive_seed(seed, _STAGE_MASK))
        chosen = None
        for rung in config.k_ladder:
            fit = _fit(config, a, rung, derive_seed(seed, _STAGE_FIT), mask)
            result = predictive_score(
                fit, a, mask, n_rep=config.n_rep, n_post=config.n_post,
                seed=derive_seed(seed, _STAGE_CHECK), band=config.check_band,
                statistic=config.check_statistic,
            )
            tried.append((rung, result))
            log.info("seed %d %s k=%s predictive score %.3f (%s)", seed, choice.value, rung, result.score, result.verdict.value)
            if result.passed:
                chosen = (rung, fit, result)
                break
        if chosen is None:
            if not config.override_check:
                rung, result = tried[-1]
                raise CheckFailedError(result.score, config.check_band)
            overridden = True
            best = min(range(len(tried)), key=lambda i: abs(tried[i][1].score - 0.5))
            rung, result = tried[best]
            fit = _fit(config, a, rung, derive_seed(seed, _STAGE_FIT), mask)
            chosen = (rung, fit, result)
        k, fit, check = chosen
        if config.confounder_source == "full":
            fit = _fit(config, a, k, derive_seed(seed, _STAGE_FULL), None)
        if choice is FactorChoice.DEF:
            z = substitute_confounder(fit, include_upper=config.include_upper_layer).values
        else:
            z = substitute_confounder(fit).values
        if config.standardize_confounder:
            z = _standardize(z)

    prior = RegressionPrior(coef_precision=config.coef_precision)
    post = fit_outcome(y, a, z, prior=prior, cause_labels=cohort.cause_labels)
    report = effect_report(post)
    summary = None
    if cohort.true_effects is not None:
        summary = coverage(report, cohort.true_effects)
    return SeedResult(
        seed=seed, report=report, k=k, check=check, checks_tried=tried, summary=summary,
        true_effects=cohort.true_effects, check_overridden=overridden, fit=fit,
    )


def run_experiment(config: ExperimentConfig, n_jobs: int = 1) -> ExperimentReport:
    """Run every seed of ``config``.

    Seeds are independent, so with ``n_jobs > 1`` they run in worker
    processes; results are identical to a serial run and kept in seed order.
    """
    cohort = None
    if config.experiment is Experiment.CUSTOM_COHORT:
        cohort = _load_cohort(config, config.seeds[0])
        if config.factor_model is FactorChoice.ORACLE and cohort.true_confounders is None:
            raise ConfigurationError("the Oracle model needs true confounders, which this cohort lacks")
    if n_jobs > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, len(config.seeds))) as pool:
            futures = [pool.submit(run_seed, config, s, cohort) for s in config.seeds]
            results = [f.result() for f in futures]
    else:
        results = [run_seed(config, s, cohort) for s in config.seeds]
    return ExperimentReport(config, results)


# ---------------------------------------------------------------- reporting

EFFECT_COLUMNS = ["label", "mean", "std_err", "ci80_lo", "ci80_hi", "ci95_lo", "ci95_hi", "tail_prob", "causal"]


def _f(x):
    if x is None:
        return "NA"
    return f"{x:.6f}"


def effects_tsv(report: EffectReport) -> str:
    lines = ["\t".join(EFFECT_COLUMNS)]
    for row in report.rows():
        cells = [row["label"]] + [_f(row[c]) for c in EFFECT_COLUMNS[1:-1]] + [str(int(row["causal"]))]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _method_name(config):
    return {
        FactorChoice.NONE: "Unadjusted",
        FactorChoice.ORACLE: "Oracle",
    }.get(config.factor_model, f"Med. Dcf. ({config.factor_model.value})")


def comparison_table(reports) -> tuple:
    """Aggregate several runs into one table, returned as ``(tsv, text)``.

    Runs on two-cause data give a coefficient table (mean over seeds of the
    estimate, its standard error and tail probability per cause); runs on
    more causes give RMSE and coverage columns.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no runs to tabulate")
    labels = reports[0].labels
    if len(labels) <= 2:
        header = ["method"]
        for lab in labels:
            header += [f"{lab}_coef", f"{lab}_std_err", f"{lab}_tail_prob"]
        rows = []
        truth = reports[0].results[0].true_effects
        if truth is not None:
            rows.append(["Truth"] + sum(([_f(t), "NA", _f(1.0 if t == 0 else 0.0)] for t in truth), []))
        for rep in reports:
            means = np.mean([r.report.mean for r in rep.results], axis=0)
            ses = np.mean([r.report.std_err for r in rep.results], axis=0)
            tails = np.mean([r.report.tail_prob for r in rep.results], axis=0)
            rows.append([_method_name(rep.config)] + sum(([_f(m), _f(s), _f(t)] for m, s, t in zip(means, ses, tails)), []))
        text_rows = [[r[0]] + [f"{r[i]} ({r[i + 1]}) p={r[i + 2]}" for i in range(1, len(r), 3)] for r in rows]
        text_header = ["method"] + [f"{lab}: coef (std err) tail" for lab in labels]
    else:
        header = ["method", "rmse", "coverage_all", "coverage_causal", "coverage_noncausal"]
        rows = []
        for rep in reports:
            s = rep.mean_summary()
            if s is None:
                rows.append([_method_name(rep.config), "NA", "NA", "NA", "NA"])
            else:
                rows.append([_method_name(rep.config), _f(s.rmse), _f(s.coverage_all), _f(s.coverage_causal), _f(s.coverage_noncausal)])
        text_rows, text_header = rows, header
    tsv = "\n".join("\t".join(r) for r in [header] + rows) + "\n"
    widths = [max(len(str(r[i])) for r in [text_header] + text_rows) for i in range(len(text_header))]
    text = "\n".join("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [text_header] + text_rows) + "\n"
    return tsv, text


def manifest(report: ExperimentReport) -> dict:
    from . import __version__

    # the output location does not affect any result, so it is left out to keep
    # manifests of identical runs byte-identical wherever they are written
    config = dataclasses.replace(report.config, output_dir=None)
    return {
        "config": config.to_dict(),
        "seeds": list(report.config.seeds),
        "versions": {
            "meddeconf": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def emit_report(report: ExperimentReport, out_dir=None) -> list:
    """Write per-seed effect tables and forest plots, summaries and a manifest.

    Files under ``out_dir``:

    * ``effects_seed<S>.tsv`` and ``forest_seed<S>.svg`` for each seed
    * ``checks.tsv`` with the predictive score of every K tried, when a factor model is used
    * ``metrics.tsv`` with per-seed RMSE and coverage, and ``truth.tsv``, when truth is known
    * ``table.tsv`` / ``table.txt`` aggregated over seeds
    * ``manifest.json``
    """
    out_dir = Path(out_dir or report.config.output_dir or ".")
    if not report.results or any(len(r.report) == 0 for r in report.results):
        raise ValueError("report has no effects; nothing written")
    contents = {}
    method = _method_name(report.config)
    for r in report.results:
        contents[f"effects_seed{r.seed}.tsv"] = effects_tsv(r.report)
        contents[f"forest_seed{r.seed}.svg"] = forest_plot_svg(r.report, title=f"{method}, seed {r.seed}")
    if report.config.factor_model.is_factor_model:
        lines = ["seed\tk\tscore\tverdict\tused\toverridden"]
        for r in report.results:
            for rung, res in r.checks_tried:
                used = int(rung == r.k and res is r.check)
                lines.append(f"{r.seed}\t{rung}\t{_f(res.score)}\t{res.verdict.value}\t{used}\t{int(r.check_overridden and used)}")
        contents["checks.tsv"] = "\n".join(lines) + "\n"
    if any(r.summary is not None for r in report.results):
        lines = ["seed\trmse\tcoverage_all\tcoverage_causal\tcoverage_noncausal"]
        for r in report.results:
            s = r.summary
            lines.append(f"{r.seed}\t{_f(s.rmse)}\t{_f(s.coverage_all)}\t{_f(s.coverage_causal)}\t{_f(s.coverage_noncausal)}")
        contents["metrics.tsv"] = "\n".join(lines) + "\n"
    truth = report.results[0].true_effects
    if truth is not None:
        lines = ["label\ttrue_effect"] + [f"{lab}\t{_f(t)}" for lab, t in zip(report.labels, truth)]
        contents["truth.tsv"] = "\n".join(lines) + "\n"
    tsv, text = comparison_table([report])
    contents["table.tsv"] = tsv
    contents["table.txt"] = text
    contents["manifest.json"] = json.dumps(manifest(report), indent=2, sort_keys=True) + "\n"

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in contents.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def _read_tsv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:] if line]


def _num(cell):
    return None if cell == "NA" else float(cell)


def effects_from_tsv(path) -> EffectReport:
    rows = _read_tsv(path)
    col = lambda name: np.array([float(r[name]) for r in rows])  # noqa: E731
    return EffectReport(
        labels=tuple(r["label"] for r in rows),
        mean=col("mean"),
        std_err=col("std_err"),
        levels=(0.8, 0.95),
        lower=np.vstack([col("ci80_lo"), col("ci95_lo")]),
        upper=np.vstack([col("ci80_hi"), col("ci95_hi")]),
        tail_prob=col("tail_prob"),
    )


def load_run(directory) -> ExperimentReport:
    """Rebuild an ``ExperimentReport`` from the files ``emit_report`` wrote.

    Only what the tables need comes back: effect summaries, metrics and
    truth. Check results and fits are not stored in the run directory.
    """
    d = Path(directory)
    meta = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    config = ExperimentConfig.from_dict(meta["config"])
    metrics = {}
    if (d / "metrics.tsv").exists():
        for row in _read_tsv(d / "metrics.tsv"):
            metrics[int(row["seed"])] = EvalSummary(
                _num(row["rmse"]), _num(row["coverage_all"]), _num(row["coverage_causal"]), _num(row["coverage_noncausal"])
            )
    truth = None
    if (d / "truth.tsv").exists():
        truth = np.array([float(r["true_effect"]) for r in _read_tsv(d / "truth.tsv")])
    results = [
        SeedResult(seed=s, report=effects_from_tsv(d / f"effects_seed{s}.tsv"), summary=metrics.get(s), true_effects=truth)
        for s in meta["seeds"]
    ]
    return ExperimentReport(config, results)
