"""Model comparison harness: accuracy bands, overfitting scans, reports.

The accuracy band is the (min, max) of predicted/actual ratios on a held-out
half, after dropping near-zero actuals (a currency floor) and trimming a
small quantile from both tails.  Overfitting is probed along a
family-specific capacity ladder (epoch checkpoints for the network, a
decreasing smoothing penalty for the additive model, a single point for the
linear one) on an internal 80/20 split: the reported threshold is the
training relative error at the first step where validation error rises for
``patience`` consecutive steps while training error still falls.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import ann as ann_mod
from . import gam as gam_mod
from . import glm as glm_mod
from .dataset import (
    DEFAULT_ENCODING,
    FEATURE_NAMES,
    Dataset,
    EncodingConfig,
    GeneratorParams,
    encode,
    encode_dataset,
    generate_synthetic,
)
from .errors import ConvergenceError, ValidationError
from .glm import LinkKind

DEFAULT_TRIM_FRACTION = 0.05
DEFAULT_RATIO_FLOOR = 500.0
DEFAULT_ANN_STEPS: tuple[int, ...] = tuple(range(100, 4001, 100))
DEFAULT_GAM_STEPS: tuple[float, ...] = tuple(
    float(v) for v in np.geomspace(30.0, 1e-6, 16)
)


@dataclass(frozen=True)
class AccuracyBand:
    ratio_min: float
    ratio_max: float
    n_evaluated: int
    n_excluded: int
    trim_fraction: float

    def __post_init__(self) -> None:
        if self.ratio_min > self.ratio_max:
            raise ValidationError("ratio_min must not exceed ratio_max")


def format_band(band: AccuracyBand) -> str:
    """Render like '94%~107%' (percentages rounded to integers)."""
    return f"{round(band.ratio_min * 100)}%~{round(band.ratio_max * 100)}%"


def accuracy_band(
    predict: Callable[[np.ndarray], float],
    test: Dataset,
    config: EncodingConfig = DEFAULT_ENCODING,
    trim_fraction: float = DEFAULT_TRIM_FRACTION,
    floor: float = DEFAULT_RATIO_FLOOR,
) -> AccuracyBand:
    """Trimmed band of per-record predicted/actual ratios on a test half."""
    if not (0.0 <= trim_fraction < 0.5):
        raise ValidationError(f"trim_fraction must lie in [0, 0.5), got {trim_fraction}")
    if floor < 0:
        raise ValidationError(f"floor must be >= 0, got {floor}")
    ratios = []
    excluded = 0
    for record in test.records:
        if record.expenditure is None:
            raise ValidationError("accuracy_band needs actual expenditures")
        if record.expenditure < floor or record.expenditure == 0:
            excluded += 1
            continue
        prediction = float(predict(encode(record, config)))
        ratios.append(prediction / record.expenditure)
    if not ratios:
        raise ValidationError("no evaluable records above the currency floor")
    ratios.sort()
    drop = int(math.floor(len(ratios) * trim_fraction))
    kept = ratios[drop : len(ratios) - drop]
    if not kept:
        raise ValidationError("trimming removed every evaluable record")
    return AccuracyBand(
        ratio_min=float(kept[0]),
        ratio_max=float(kept[-1]),
        n_evaluated=len(ratios),
        n_excluded=excluded,
        trim_fraction=trim_fraction,
    )


# -- model families -----------------------------------------------------------


@dataclass(frozen=True)
class GlmFamily:
    link: LinkKind = LinkKind.IDENTITY
    name: str = "glm"

    def fit(self, train: Dataset, config: EncodingConfig):
        return glm_mod.fit_glm(train, config, self.link)


@dataclass(frozen=True)
class GamFamily:
    link: LinkKind = LinkKind.IDENTITY
    smooth: gam_mod.SmoothConfig = field(default_factory=gam_mod.SmoothConfig)
    name: str = "gam"

    def fit(self, train: Dataset, config: EncodingConfig):
        return gam_mod.fit_gam(train, config, self.link, self.smooth)


@dataclass(frozen=True)
class AnnFamily:
    topology: ann_mod.NetworkTopology = field(default_factory=ann_mod.NetworkTopology)
    training: ann_mod.TrainingConfig = field(default_factory=ann_mod.TrainingConfig)
    name: str = "ann"

    def fit(self, train: Dataset, config: EncodingConfig):
        return ann_mod.train(train, config, self.topology, self.training)


Family = GlmFamily | GamFamily | AnnFamily


def family_for_model(model) -> Family:
    if isinstance(model, glm_mod.GlmModel):
        return GlmFamily(link=model.link)
    if isinstance(model, gam_mod.GamModel):
        return GamFamily(link=model.link, smooth=model.smooth_config)
    if isinstance(model, ann_mod.AnnModel):
        return AnnFamily(topology=model.topology)
    raise ValidationError(f"unrecognized model type {type(model).__name__}")


def predictor_for(model) -> Callable[[np.ndarray], float]:
    if isinstance(model, glm_mod.GlmModel):
        return lambda x: glm_mod.predict_glm(model, x)
    if isinstance(model, gam_mod.GamModel):
        return lambda x: gam_mod.predict_gam(model, x)
    if isinstance(model, ann_mod.AnnModel):
        return lambda x: ann_mod.predict_ann(model, x)
    raise ValidationError(f"unrecognized model type {type(model).__name__}")


# -- overfitting scan ---------------------------------------------------------


@dataclass(frozen=True)
class OverfitReport:
    family: str
    steps: tuple[float, ...]
    train_error: tuple[float, ...]
    val_error: tuple[float, ...]
    threshold: float | None
    threshold_found: bool
    threshold_step: int | None
    patience: int


def _relative_rmse(predictions: np.ndarray, actual: np.ndarray) -> float:
    rmse = math.sqrt(float(np.mean((predictions - actual) ** 2)))
    denom = float(np.mean(actual))
    if denom <= 0:
        raise ValidationError("relative error undefined: mean actual is not positive")
    return rmse / denom


def _detect_threshold(
    train_err: Sequence[float], val_err: Sequence[float], patience: int
) -> int | None:
    """First index t where val rises for ``patience`` straight steps while
    train falls at the upturn."""
    for t in range(1, len(val_err) - patience + 1):
        rising = all(val_err[t + k] > val_err[t + k - 1] for k in range(patience))
        if rising and train_err[t] < train_err[t - 1]:
            return t
    return None


def _split_for_scan(train: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    if train.n < 10:
        raise ValidationError("overfit_scan needs at least 10 rows")
    perm = np.random.default_rng(seed).permutation(train.n)
    n_val = max(1, int(round(train.n * 0.2)))
    val = tuple(train.records[i] for i in perm[:n_val])
    fit = tuple(train.records[i] for i in perm[n_val:])
    return Dataset(fit, provenance=train.provenance), Dataset(val, provenance=train.provenance)


def overfit_scan(
    family: Family,
    train: Dataset,
    config: EncodingConfig = DEFAULT_ENCODING,
    steps: Sequence[float] | None = None,
    *,
    seed: int = 0,
    patience: int = 3,
) -> OverfitReport:
    """Walk the family's capacity ladder and look for a validation upturn."""
    fit_half, val_half = _split_for_scan(train, seed)
    X_fit, y_fit = encode_dataset(fit_half, config)
    X_val, y_val = encode_dataset(val_half, config)
    if y_fit is None or y_val is None:
        raise ValidationError("cannot scan records without expenditure")

    if isinstance(family, GlmFamily):
        model = family.fit(fit_half, config)
        predict = predictor_for(model)
        tr = _relative_rmse(np.array([predict(x) for x in X_fit]), y_fit)
        va = _relative_rmse(np.array([predict(x) for x in X_val]), y_val)
        return OverfitReport(
            family=family.name, steps=(0.0,), train_error=(tr,), val_error=(va,),
            threshold=None, threshold_found=False, threshold_step=None,
            patience=patience,
        )

    if isinstance(family, GamFamily):
        ladder = tuple(float(s) for s in (steps if steps is not None else DEFAULT_GAM_STEPS))
        if len(ladder) < 2 or any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValidationError("GAM scan steps must be strictly decreasing penalties")
        used_steps: list[float] = []
        train_err: list[float] = []
        val_err: list[float] = []
        for lam in ladder:
            smooth = replace(family.smooth, penalty=lam)
            try:
                model = gam_mod.fit_gam(fit_half, config, family.link, smooth)
            except ConvergenceError:
                continue
            predict = predictor_for(model)
            used_steps.append(lam)
            train_err.append(_relative_rmse(np.array([predict(x) for x in X_fit]), y_fit))
            val_err.append(_relative_rmse(np.array([predict(x) for x in X_val]), y_val))
    elif isinstance(family, AnnFamily):
        ladder_int = [int(s) for s in (steps if steps is not None else DEFAULT_ANN_STEPS)]
        if len(ladder_int) < 2 or any(b <= a for a, b in zip(ladder_int, ladder_int[1:])):
            raise ValidationError("ANN scan steps must be strictly increasing epochs")
        scaler, snapshots = ann_mod.train_trajectory(
            fit_half, config, family.topology, family.training, ladder_int
        )
        used_steps = [float(e) for e, _ in snapshots]
        train_err = []
        val_err = []
        for _, weights in snapshots:
            fit_pred = scaler.inverse(ann_mod._forward_batch(weights, X_fit)[0])
            val_pred = scaler.inverse(ann_mod._forward_batch(weights, X_val)[0])
            train_err.append(_relative_rmse(fit_pred, y_fit))
            val_err.append(_relative_rmse(val_pred, y_val))
    else:
        raise ValidationError(f"unrecognized family {family!r}")

    t = _detect_threshold(train_err, val_err, patience)
    return OverfitReport(
        family=family.name,
        steps=tuple(used_steps),
        train_error=tuple(train_err),
        val_error=tuple(val_err),
        threshold=train_err[t] if t is not None else None,
        threshold_found=t is not None,
        threshold_step=t,
        patience=patience,
    )


# -- learning curve -----------------------------------------------------------


@dataclass(frozen=True)
class LearningCurve:
    cells: tuple[tuple[int, int, float | None], ...]  # (n, seed, threshold)
    sizes: tuple[int, ...]

    def mean_thresholds(self) -> tuple[tuple[int, float | None, float | None, int], ...]:
        """(n, mean, standard error, found-count) per sample size."""
        rows = []
        for n in self.sizes:
            found = [t for size, _, t in self.cells if size == n and t is not None]
            if not found:
                rows.append((n, None, None, 0))
                continue
            mean = float(np.mean(found))
            se = float(np.std(found, ddof=1) / math.sqrt(len(found))) if len(found) > 1 else 0.0
            rows.append((n, mean, se, len(found)))
        return tuple(rows)


def learning_curve(
    family: Family,
    params: GeneratorParams,
    sizes: Sequence[int],
    seeds: Sequence[int],
    config: EncodingConfig = DEFAULT_ENCODING,
    *,
    steps: Sequence[float] | None = None,
    patience: int = 3,
) -> LearningCurve:
    """Detected overfitting threshold per (sample size, seed) cell.

    Missing detections are recorded as None, never as zero.
    """
    sizes = [int(n) for n in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or not sizes:
        raise ValidationError("sizes must be strictly increasing")
    if not seeds:
        raise ValidationError("need at least one seed")
    cells = []
    for n in sizes:
        for seed in seeds:
            data = generate_synthetic(replace(params, n=n, seed=int(seed)), config)
            report = overfit_scan(family, data, config, steps, seed=int(seed), patience=patience)
            cells.append((n, int(seed), report.threshold))
    return LearningCurve(cells=tuple(cells), sizes=tuple(sizes))


def learning_curve_csv(curve: LearningCurve) -> str:
    lines = ["n,seed,threshold"]
    for n, seed, threshold in curve.cells:
        lines.append(f"{n},{seed}," + ("" if threshold is None else repr(threshold)))
    return "\n".join(lines) + "\n"


# -- comparison ---------------------------------------------------------------


@dataclass(frozen=True)
class FamilyResult:
    name: str
    band: AccuracyBand
    overfit: OverfitReport | None
    interaction_finding: str
    collinearity_finding: str
    wall_time: float = field(compare=False, default=0.0)


@dataclass(frozen=True)
class ComparisonReport:
    results: tuple[FamilyResult, ...]
    trim_fraction: float
    floor: float


_DISTRIBUTION_ASSUMPTION = {"ann": "none", "gam": "normal", "glm": "normal"}


def compare(
    models: Sequence,
    test: Dataset,
    config: EncodingConfig | None = None,
    *,
    train: Dataset | None = None,
    trim_fraction: float = DEFAULT_TRIM_FRACTION,
    floor: float = DEFAULT_RATIO_FLOOR,
    seed: int = 0,
    scan_steps: dict[str, Sequence[float]] | None = None,
) -> ComparisonReport:
    """Bands for every model plus, when the train half is provided,
    overfitting scans and (for the additive model) interaction and
    collinearity findings.  Train/test sharing a record id is refused.
    """
    if not models:
        raise ValidationError("compare needs at least one fitted model")
    encodings = [m.encoding for m in models]
    if config is None:
        config = encodings[0]
    if any(e != config for e in encodings):
        raise ValidationError("models were fit with different encoding configs")
    if train is not None:
        overlap = train.ids() & test.ids()
        if overlap:
            raise ValidationError(
                f"leakage: {len(overlap)} record id(s) appear in both train and test"
            )

    results = []
    for model in models:
        start = time.perf_counter()
        family = family_for_model(model)
        band = accuracy_band(predictor_for(model), test, config, trim_fraction, floor)
        overfit = None
        interaction_finding = "none"
        collinearity_finding = "none"
        if train is not None:
            steps = (scan_steps or {}).get(family.name)
            overfit = overfit_scan(family, train, config, steps, seed=seed)
            if isinstance(model, gam_mod.GamModel):
                candidates = gam_mod.interaction_scan(train, model, seed=seed)
                hits = [
                    f"{FEATURE_NAMES[c.i]}*{FEATURE_NAMES[c.j]}"
                    for c in candidates
                    if c.significant
                ]
                interaction_finding = ", ".join(hits) if hits else "none"
                coll = gam_mod.collinearity_report(train, config)
                pairs = [
                    f"{FEATURE_NAMES[i]}&{FEATURE_NAMES[j]}" for i, j, _ in coll.flagged
                ]
                collinearity_finding = ", ".join(pairs) if pairs else "none"
        results.append(
            FamilyResult(
                name=family.name,
                band=band,
                overfit=overfit,
                interaction_finding=interaction_finding,
                collinearity_finding=collinearity_finding,
                wall_time=time.perf_counter() - start,
            )
        )
    return ComparisonReport(
        results=tuple(results), trim_fraction=trim_fraction, floor=floor
    )


def _threshold_text(result: FamilyResult) -> str:
    if result.overfit is None:
        return "not scanned"
    if not result.overfit.threshold_found:
        return "not detected"
    return f"{result.overfit.threshold * 100:.1f}%"


def render_markdown(report: ComparisonReport) -> str:
    """Two tables: accuracy with findings, then overfitting thresholds.

    Wall times are kept on the in-memory report only so that rendering is a
    pure function of the fitted models and data.
    """
    lines = [
        "# Model comparison",
        "",
        "## Prediction accuracy",
        "",
        "| model | accuracy | interaction analysis | collinearity analysis |",
        "| --- | --- | --- | --- |",
    ]
    for r in report.results:
        lines.append(
            f"| {r.name} | {format_band(r.band)} | {r.interaction_finding} "
            f"| {r.collinearity_finding} |"
        )
    lines += [
        "",
        "## Overfitting",
        "",
        "| model | distribution assumption | overfitting threshold |",
        "| --- | --- | --- |",
    ]
    for r in report.results:
        assumption = _DISTRIBUTION_ASSUMPTION.get(r.name, "none")
        lines.append(f"| {r.name} | {assumption} | {_threshold_text(r)} |")
    lines.append("")
    return "\n".join(lines)


def report_csv(report: ComparisonReport) -> str:
    lines = [
        "model,ratio_min,ratio_max,n_evaluated,n_excluded,"
        "threshold_found,threshold,interaction,collinearity"
    ]
    for r in report.results:
        found = "" if r.overfit is None else ("yes" if r.overfit.threshold_found else "no")
        threshold = (
            repr(r.overfit.threshold)
            if r.overfit is not None and r.overfit.threshold is not None
            else ""
        )
        lines.append(
            f"{r.name},{r.band.ratio_min!r},{r.band.ratio_max!r},"
            f"{r.band.n_evaluated},{r.band.n_excluded},{found},{threshold},"
            f"\"{r.interaction_finding}\",\"{r.collinearity_finding}\""
        )
    return "\n".join(lines) + "\n"
