"""Experiment orchestration: configuration, the with/without-exogenous
ablation, and report emission.

A run is a pure function of (input files, config, seed): ingest the raw
sources, build the daily feature frame, optionally select features, fit
the normalizer on the training split, window each split, train the LSTM,
and evaluate on the test split. The ablation runs the pipeline twice with
identical seed/split/window/training config, differing only in whether
exogenous (epidemiological) features are available.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, EmptyDataset, ExocastError
from .features import (
    FeatureFrame,
    Normalizer,
    SplitSpec,
    apply_normalizer,
    engineer_features,
    fit_normalizer,
    market_column_names,
    resample_daily,
    save_frame,
    split_chronological,
)
from .forest import ForestConfig
from .ingest import align_date_range, parse_epi_daily, parse_minute_bars
from .lstm import (
    LstmModel,
    TrainConfig,
    TrainReport,
    WindowSpec,
    evaluate_forecaster,
    lstm_forward,
    make_windows,
    model_to_json,
    train_lstm,
)
from .report import atomic_write_text, line_chart_svg
from .select import SelectConfig, SelectionReport, select_features

log = logging.getLogger(__name__)

FEATURE_MODES = ("price_only", "full")


@dataclass(frozen=True)
class RunConfig:
    minute_csv: Path
    epi_csv: Path
    start_date: date
    end_date: date
    epi_window: int = 7
    epi_scope: str = "global_sum"
    feature_mode: str = "full"
    select_in_baseline: bool = False
    select: SelectConfig = field(default_factory=SelectConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    window: WindowSpec = field(default_factory=WindowSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: Path = Path("out")
    seed: int = 0

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}")

    def seeded_train(self) -> TrainConfig:
        return replace(self.train, seed=self.seed)

    def seeded_forest(self) -> ForestConfig:
        return replace(self.forest, master_seed=self.seed)


_TOML_SECTIONS = {
    "data": {"minute_csv", "epi_csv", "start_date", "end_date", "epi_scope"},
    "features": {"epi_window"},
    "select": {"rf_top_k", "r_min", "p_max", "signed_r"},
    "forest": {"n_trees", "max_depth", "min_samples_leaf", "max_features", "bootstrap"},
    "split": {"train_fraction", "validation_fraction", "test_fraction"},
    "window": {"width", "horizon"},
    "train": {"hidden_size", "learning_rate", "beta1", "beta2", "eps",
              "max_epochs", "patience"},
    "run": {"feature_mode", "select_in_baseline", "out_dir", "seed"},
}


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse a TOML run configuration. Unknown sections or keys are errors."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib

    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    for section, keys in doc.items():
        if section not in _TOML_SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(keys, dict):
            raise ConfigError(f"top-level key {section!r} is not a section")
        unknown = set(keys) - _TOML_SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")

    def sec(name: str) -> dict:
        return doc.get(name, {})

    data = sec("data")
    for required in ("minute_csv", "epi_csv", "start_date", "end_date"):
        if required not in data:
            raise ConfigError(f"[data] is missing required key {required!r}")

    def as_date(v):
        return v if isinstance(v, date) else date.fromisoformat(str(v))

    base = path.parent
    try:
        cfg = RunConfig(
            minute_csv=(base / data["minute_csv"]).resolve(),
            epi_csv=(base / data["epi_csv"]).resolve(),
            start_date=as_date(data["start_date"]),
            end_date=as_date(data["end_date"]),
            epi_scope=data.get("epi_scope", "global_sum"),
            epi_window=sec("features").get("epi_window", 7),
            select=SelectConfig(**sec("select")),
            forest=ForestConfig(**sec("forest")),
            split=SplitSpec(**sec("split")),
            window=WindowSpec(**sec("window")),
            train=TrainConfig(**sec("train")),
            feature_mode=sec("run").get("feature_mode", "full"),
            select_in_baseline=sec("run").get("select_in_baseline", False),
            out_dir=Path(sec("run").get("out_dir", "out")),
            seed=sec("run").get("seed", 0),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    if overrides:
        cfg = replace(cfg, **overrides)
    for p in (cfg.minute_csv, cfg.epi_csv):
        if not Path(p).exists():
            raise ConfigError(f"referenced data file does not exist: {p}")
    return cfg


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except ExocastError as exc:
        exc.args = (f"[{name}] {exc}",)
        raise


@dataclass
class ExperimentResult:
    feature_mode: str
    selection: Optional[SelectionReport]
    metrics: dict
    dates: list[date]
    actual_price: np.ndarray
    predicted_price: np.ndarray
    actual_norm: np.ndarray
    predicted_norm: np.ndarray
    train_report: TrainReport
    model: LstmModel
    normalizer: Normalizer


@dataclass
class AblationReport:
    baseline: ExperimentResult  # price_only
    treatment: ExperimentResult  # full
    delta_mae: float  # baseline - treatment, normalized units
    treatment_improved: bool


def build_frame(config: RunConfig) -> FeatureFrame:
    """Ingest both sources and produce the supervised daily feature frame."""
    with _stage("ingest"):
        with open(config.minute_csv, "rb") as fh:
            bars = parse_minute_bars(fh)
        with open(config.epi_csv, "rb") as fh:
            epi = parse_epi_daily(fh, scope=config.epi_scope)
        aligned = align_date_range(bars, epi, config.start_date, config.end_date)
    with _stage("features"):
        daily = resample_daily(aligned)
        return engineer_features(daily, aligned.epi, epi_window=config.epi_window)


def run_experiment_on_frame(frame: FeatureFrame, config: RunConfig,
                            feature_mode: str | None = None) -> ExperimentResult:
    """Select / normalize / window / train / evaluate on a prepared frame."""
    mode = feature_mode or config.feature_mode
    if mode not in FEATURE_MODES:
        raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}")

    selection: Optional[SelectionReport] = None
    with _stage("select"):
        if mode == "price_only":
            market = [c for c in market_column_names() if c in frame.column_names]
            work = frame.restrict_columns(market)
            if config.select_in_baseline:
                selection = select_features(work, config.select, config.seeded_forest())
                work = work.restrict_columns(selection.final_set)
        else:
            selection = select_features(frame, config.select, config.seeded_forest())
            if not selection.final_set:
                raise EmptyDataset("feature selection produced an empty set")
            work = frame.restrict_columns(selection.final_set)

    with _stage("normalize"):
        train_frame, val_frame, test_frame = split_chronological(work, config.split)
        normalizer = fit_normalizer(work, range(train_frame.n_rows))
        train_n = apply_normalizer(normalizer, train_frame)
        val_n = apply_normalizer(normalizer, val_frame)
        test_n = apply_normalizer(normalizer, test_frame)

    with _stage("window"):
        train_ds = make_windows(train_n, config.window)
        val_ds = make_windows(val_n, config.window)
        test_ds = make_windows(test_n, config.window)

    with _stage("train"):
        model, train_report = train_lstm(train_ds, val_ds, config.seeded_train())

    with _stage("evaluate"):
        ev = evaluate_forecaster(model, test_ds, normalizer, work.target_name)
        t_mean, t_std = normalizer.params_for(work.target_name)
        pred_norm = ev.pop("predictions_normalized")
        actual_norm = test_ds.targets
        target_dates = [test_n.dates[k + config.window.width - 1]
                        for k in range(test_ds.n_windows)]
        return ExperimentResult(
            feature_mode=mode,
            selection=selection,
            metrics=ev,
            dates=target_dates,
            actual_price=actual_norm * t_std + t_mean,
            predicted_price=pred_norm * t_std + t_mean,
            actual_norm=actual_norm,
            predicted_norm=pred_norm,
            train_report=train_report,
            model=model,
            normalizer=normalizer,
        )


def run_experiment(config: RunConfig, feature_mode: str | None = None) -> ExperimentResult:
    frame = build_frame(config)
    return run_experiment_on_frame(frame, config, feature_mode)


def run_ablation(config: RunConfig) -> AblationReport:
    """Paired runs differing only in the presence of exogenous features."""
    frame = build_frame(config)
    baseline = run_experiment_on_frame(frame, config, "price_only")
    treatment = run_experiment_on_frame(frame, config, "full")
    delta = baseline.metrics["mae_normalized"] - treatment.metrics["mae_normalized"]
    return AblationReport(baseline, treatment, delta, treatment_improved=delta > 0)


# --- report emission ------------------------------------------------------

def _experiment_doc(result: ExperimentResult, config: RunConfig) -> dict:
    return {
        "feature_mode": result.feature_mode,
        "selected_features": result.selection.final_set if result.selection else None,
        "metrics": result.metrics,
        "train": {
            "epochs_run": result.train_report.stopped_epoch,
            "best_epoch": result.train_report.best_epoch,
            "final_train_loss": result.train_report.train_losses[-1],
            "best_val_loss": min(result.train_report.val_losses),
        },
        "n_test_predictions": len(result.dates),
    }


def _config_echo(config: RunConfig) -> dict:
    return {
        "minute_csv": str(config.minute_csv),
        "epi_csv": str(config.epi_csv),
        "start_date": config.start_date.isoformat(),
        "end_date": config.end_date.isoformat(),
        "epi_window": config.epi_window,
        "epi_scope": config.epi_scope,
        "feature_mode": config.feature_mode,
        "select_in_baseline": config.select_in_baseline,
        "select": vars(config.select).copy(),
        "forest": vars(config.forest).copy(),
        "split": vars(config.split).copy(),
        "window": {"width": config.window.width, "horizon": config.window.horizon},
        "train": vars(config.seeded_train()).copy(),
        "seed": config.seed,
    }


def _predictions_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "actual", "predicted", "actual_norm", "predicted_norm"])
    for d, a, p, an, pn in zip(result.dates, result.actual_price, result.predicted_price,
                               result.actual_norm, result.predicted_norm):
        w.writerow([d.isoformat(), repr(float(a)), repr(float(p)),
                    repr(float(an)), repr(float(pn))])
    return buf.getvalue()


def _emit_experiment(result: ExperimentResult, config: RunConfig, out_dir: Path) -> list[Path]:
    if len(result.dates) == 0:
        raise EmptyDataset("no test predictions to report")
    out_dir = Path(out_dir)
    written = []

    doc = {
        "tool_version": __version__,
        "seed": config.seed,
        "config": _config_echo(config),
        **_experiment_doc(result, config),
    }
    p = out_dir / "metrics.json"
    atomic_write_text(p, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(p)

    p = out_dir / "predictions.csv"
    atomic_write_text(p, _predictions_csv(result))
    written.append(p)

    svg = line_chart_svg(
        result.dates,
        [("actual", result.actual_price.tolist()),
         ("predicted", result.predicted_price.tolist())],
        title=f"Next-day close, test range ({result.feature_mode})",
        y_label="price (USD)",
    )
    p = out_dir / "predictions.svg"
    atomic_write_text(p, svg)
    written.append(p)

    p = out_dir / "train_report.csv"
    atomic_write_text(p, result.train_report.to_csv())
    written.append(p)

    p = out_dir / "model.json"
    atomic_write_text(p, model_to_json(result.model) + "\n")
    written.append(p)

    if result.selection is not None:
        p = out_dir / "selection.json"
        atomic_write_text(p, result.selection.to_json() + "\n")
        written.append(p)
    return written


def emit_report(report: "AblationReport | ExperimentResult", config: RunConfig,
                out_dir=None) -> list[Path]:
    """Write metrics.json, predictions.csv, predictions.svg (and per-arm
    subdirectories for an ablation). Returns the written paths."""
    out_dir = Path(out_dir if out_dir is not None else config.out_dir)
    if isinstance(report, ExperimentResult):
        return _emit_experiment(report, config, out_dir)

    written = []
    written += _emit_experiment(report.baseline, config, out_dir / "baseline")
    written += _emit_experiment(report.treatment, config, out_dir / "treatment")
    doc = {
        "tool_version": __version__,
        "seed": config.seed,
        "config": _config_echo(config),
        "baseline": _experiment_doc(report.baseline, config),
        "treatment": _experiment_doc(report.treatment, config),
        "delta_mae_normalized": report.delta_mae,
        "treatment_improved": report.treatment_improved,
    }
    p = out_dir / "metrics.json"
    atomic_write_text(p, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(p)
    svg = line_chart_svg(
        report.treatment.dates,
        [("actual", report.treatment.actual_price.tolist()),
         ("predicted", report.treatment.predicted_price.tolist())],
        title="Next-day close, test range (with exogenous features)",
        y_label="price (USD)",
    )
    p = out_dir / "predictions.svg"
    atomic_write_text(p, svg)
    written.append(p)
    buf = _predictions_csv(report.treatment)
    p = out_dir / "predictions.csv"
    atomic_write_text(p, buf)
    written.append(p)
    return written
