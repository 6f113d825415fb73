"""Two-stage feature selection: forest-importance top-k plus Pearson screen.

The final set is the union of both stages, kept in original column order,
with per-feature provenance recorded.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from . import stats
from .errors import UnknownFeatureName, ZeroVariance
from .features import FeatureFrame
from .forest import ForestConfig, feature_importance, fit_forest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectConfig:
    rf_top_k: int = 7
    r_min: float = 0.6
    p_max: float = 0.05
    signed_r: bool = False  # True: literal r > r_min; False: |r| > r_min

    def __post_init__(self):
        if self.rf_top_k < 0:
            raise ValueError("rf_top_k must be >= 0")
        if not 0 < self.r_min < 1:
            raise ValueError("r_min must lie in (0, 1)")
        if not 0 < self.p_max < 1:
            raise ValueError("p_max must lie in (0, 1)")


@dataclass
class SelectionReport:
    rf_selected: list[tuple[str, float]]  # (name, importance), descending
    pearson_selected: list[tuple[str, float, float]]  # (name, r, p)
    final_set: list[str]  # original column order
    provenance: dict[str, str]  # name -> rf | pearson | both

    def to_json(self) -> str:
        return json.dumps({
            "rf_selected": [{"name": n, "importance": v} for n, v in self.rf_selected],
            "pearson_selected": [{"name": n, "r": r, "p": p} for n, r, p in self.pearson_selected],
            "final_set": self.final_set,
            "provenance": self.provenance,
        }, indent=2, sort_keys=True)

    def render_table(self) -> str:
        lines = [f"{'feature':<28} {'source':<8} {'importance':>10} {'r':>8} {'p':>10}"]
        imp = dict(self.rf_selected)
        rp = {n: (r, p) for n, r, p in self.pearson_selected}
        for name in self.final_set:
            i = f"{imp[name]:.4f}" if name in imp else "-"
            r = f"{rp[name][0]:.3f}" if name in rp else "-"
            p = f"{rp[name][1]:.2e}" if name in rp else "-"
            lines.append(f"{name:<28} {self.provenance[name]:<8} {i:>10} {r:>8} {p:>10}")
        return "\n".join(lines)


def rf_select(frame: FeatureFrame, config: SelectConfig,
              forest_config: ForestConfig = ForestConfig()) -> list[tuple[str, float]]:
    """Top-k predictors by normalized forest importance."""
    if config.rf_top_k == 0:
        return []
    names = frame.predictor_names
    model = fit_forest(frame.predictors(), frame.target, forest_config)
    report = feature_importance(model)
    top = report.ranking[:config.rf_top_k]
    return [(names[i], float(report.importances[i])) for i in top]


def pearson_select(frame: FeatureFrame, config: SelectConfig) -> list[tuple[str, float, float]]:
    """Predictors whose correlation with the target passes both thresholds."""
    target = frame.target
    n = frame.n_rows
    out = []
    for name in frame.predictor_names:
        try:
            r = stats.pearson_r(frame.column(name), target)
        except ZeroVariance:
            log.warning("skipping constant column %r in Pearson screening", name)
            continue
        p = stats.pearson_p_two_sided(r, n)
        passes = (r > config.r_min) if config.signed_r else (abs(r) > config.r_min)
        if passes and p < config.p_max:
            out.append((name, r, p))
    return out


def final_feature_set(frame: FeatureFrame,
                      rf_selected: list[tuple[str, float]],
                      pearson_selected: list[tuple[str, float, float]]) -> SelectionReport:
    """Deduplicated union in original column order, with provenance tags."""
    known = set(frame.predictor_names)
    rf_names = {n for n, _ in rf_selected}
    pe_names = {n for n, _, _ in pearson_selected}
    unknown = (rf_names | pe_names) - known
    if unknown:
        raise UnknownFeatureName(f"not predictors of this frame: {sorted(unknown)}")
    final = [c for c in frame.predictor_names if c in rf_names | pe_names]
    provenance = {}
    for name in final:
        if name in rf_names and name in pe_names:
            provenance[name] = "both"
        elif name in rf_names:
            provenance[name] = "rf"
        else:
            provenance[name] = "pearson"
    return SelectionReport(rf_selected, pearson_selected, final, provenance)


def select_features(frame: FeatureFrame, config: SelectConfig = SelectConfig(),
                    forest_config: ForestConfig = ForestConfig()) -> SelectionReport:
    rf = rf_select(frame, config, forest_config)
    pe = pearson_select(frame, config)
    return final_feature_set(frame, rf, pe)
