"""Customer records, feature encoding, CSV files and the synthetic generator.

Every model in the package consumes the same six-component feature vector,
all components scaled into [0, 1]:

    (gender, age_scaled, income_scaled, smoker, claim_present, claim_severity)

The single categorical predictor (previous claim) is split into a presence
flag and a severity score so that downstream models see purely numeric
inputs.  Synthetic datasets keep their generating parameters attached, which
lets tests evaluate the exact ground-truth function behind each record.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

CSV_COLUMNS = ("id", "gender", "age", "income", "smoke", "previous_claim", "expenditure")
FEATURE_NAMES = ("gender", "age", "income", "smoker", "claim_present", "claim_severity")
N_FEATURES = len(FEATURE_NAMES)

# Design constants of the generator population.  Smoking and claim rates are
# equal on purpose: copying the smoker flag into the claim flag with
# probability phi then leaves both marginals untouched while the correlation
# between the two flags is exactly phi.
_SMOKE_RATE = 0.35
_CLAIM_RATE = 0.35
_CLAIM_CATEGORIES = ("diabetes", "copd", "lung_cancer", "other")
_CLAIM_CATEGORY_PROBS = (0.35, 0.25, 0.15, 0.25)

class Gender(enum.Enum):
    FEMALE = "female"
    MALE = "male"


class PriorClaim(enum.Enum):
    NONE = "none"
    DIABETES = "diabetes"
    COPD = "copd"
    LUNG_CANCER = "lung_cancer"
    OTHER = "other"


_DEFAULT_SEVERITY: dict[PriorClaim, float] = {
    PriorClaim.NONE: 0.0,
    PriorClaim.DIABETES: 0.4,
    PriorClaim.COPD: 0.6,
    PriorClaim.LUNG_CANCER: 1.0,
    PriorClaim.OTHER: 0.5,
}


@dataclass(frozen=True)
class CustomerRecord:
    """One row of the customer table.

    ``expenditure`` may be None for prediction-only inputs (a CSV without the
    response column); such records are rejected by every fitting routine.
    """

    id: int
    gender: Gender
    age: int
    income: float
    smoker: bool
    prior_claim: PriorClaim
    expenditure: float | None

    def __post_init__(self) -> None:
        if not (18 <= self.age <= 100):
            raise ValidationError(
                f"record id={self.id}: age {self.age} outside [18, 100]"
            )
        if not math.isfinite(self.income) or self.income < 0:
            raise ValidationError(
                f"record id={self.id}: income {self.income} must be finite and >= 0"
            )
        if self.expenditure is not None:
            if not math.isfinite(self.expenditure) or self.expenditure < 0:
                raise ValidationError(
                    f"record id={self.id}: expenditure {self.expenditure} "
                    "must be finite and >= 0"
                )


@dataclass(frozen=True)
class EncodingConfig:
    """Scaling ranges and the claim-severity lookup used by ``encode``."""

    age_range: tuple[float, float] = (18.0, 80.0)
    income_range: tuple[float, float] = (0.0, 150000.0)
    claim_severity: Mapping[PriorClaim, float] = field(
        default_factory=lambda: dict(_DEFAULT_SEVERITY)
    )

    def __post_init__(self) -> None:
        for name, (lo, hi) in (("age", self.age_range), ("income", self.income_range)):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValidationError(f"{name}_range must satisfy lo < hi, got ({lo}, {hi})")
        for claim in PriorClaim:
            if claim not in self.claim_severity:
                raise ValidationError(f"claim_severity map is missing {claim.value}")
            sev = self.claim_severity[claim]
            if not (0.0 <= sev <= 1.0):
                raise ValidationError(
                    f"claim_severity[{claim.value}] = {sev} outside [0, 1]"
                )
        if self.claim_severity[PriorClaim.NONE] != 0.0:
            raise ValidationError("claim_severity[none] must be 0")


DEFAULT_ENCODING = EncodingConfig()


@dataclass(frozen=True)
class GeneratorParams:
    """Knobs of the synthetic population.

    Expenditure ground truth, evaluated on the encoded feature vector x:

        eta = base_cost + sum_j coef_j * x_j
              + age_curvature * x_age^2
              + interaction * x_smoker * x_claim_severity
        expenditure = softplus(eta + noise)

    The noise is a zero-mean gaussian scale mixture: spread ``noise_scale``
    for most records, inflated by ``noise_outlier_factor`` for a random
    ``noise_outlier_rate`` fraction.  Medical expenditure residuals are
    heavy-tailed, and the occasional large shock is what makes overfitting
    visible on validation curves at realistic sample sizes; set the rate to 0
    for plain gaussian noise.  softplus keeps expenditures positive; for any
    eta above ~40 it is the identity to double precision, so noiseless
    configurations reproduce the linear ground truth exactly.
    ``collinearity_rho`` is the target sample correlation between the smoker
    flag and the claim-severity feature.
    """

    n: int = 200
    seed: int = 0
    base_cost: float = 2000.0
    coef_gender: float = 500.0
    coef_age: float = 4000.0
    coef_income: float = -1000.0
    coef_smoker: float = 1500.0
    coef_claim_present: float = 2000.0
    coef_claim_severity: float = 6000.0
    age_curvature: float = 0.0
    interaction: float = 5000.0
    collinearity_rho: float = 0.3
    noise_scale: float = 600.0
    noise_outlier_rate: float = 0.1
    noise_outlier_factor: float = 8.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if not (0.0 <= self.collinearity_rho < 1.0):
            raise ValidationError(
                f"collinearity_rho must lie in [0, 1), got {self.collinearity_rho}"
            )
        if not (math.isfinite(self.noise_scale) and self.noise_scale >= 0):
            raise ValidationError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if not (0.0 <= self.noise_outlier_rate <= 1.0):
            raise ValidationError(
                f"noise_outlier_rate must lie in [0, 1], got {self.noise_outlier_rate}"
            )
        if not (math.isfinite(self.noise_outlier_factor) and self.noise_outlier_factor >= 0):
            raise ValidationError(
                f"noise_outlier_factor must be >= 0, got {self.noise_outlier_factor}"
            )
        for name in ("base_cost", "coef_gender", "coef_age", "coef_income",
                     "coef_smoker", "coef_claim_present", "coef_claim_severity",
                     "age_curvature", "interaction"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    def coefficients(self) -> np.ndarray:
        return np.array(
            [self.coef_gender, self.coef_age, self.coef_income,
             self.coef_smoker, self.coef_claim_present, self.coef_claim_severity]
        )

    def mean_expenditure(self, features: np.ndarray) -> float:
        """Noise-free ground-truth expenditure at an encoded feature vector."""
        x = np.asarray(features, dtype=float)
        eta = (
            self.base_cost
            + float(self.coefficients() @ x)
            + self.age_curvature * x[1] ** 2
            + self.interaction * x[3] * x[5]
        )
        return float(np.logaddexp(0.0, eta))


@dataclass(frozen=True)
class Dataset:
    records: tuple[CustomerRecord, ...]
    provenance: str = "loaded"
    generator_params: GeneratorParams | None = None

    def __post_init__(self) -> None:
        if not self.records:
            raise ValidationError("empty dataset")
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate record ids in dataset")

    @property
    def n(self) -> int:
        return len(self.records)

    def ids(self) -> frozenset[int]:
        return frozenset(r.id for r in self.records)


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def encode(record: CustomerRecord, config: EncodingConfig = DEFAULT_ENCODING) -> np.ndarray:
    """Map a record to the six-component feature vector, clamped into [0, 1]."""
    age_lo, age_hi = config.age_range
    inc_lo, inc_hi = config.income_range
    return np.array(
        [
            1.0 if record.gender is Gender.MALE else 0.0,
            _clamp01((record.age - age_lo) / (age_hi - age_lo)),
            _clamp01((record.income - inc_lo) / (inc_hi - inc_lo)),
            1.0 if record.smoker else 0.0,
            0.0 if record.prior_claim is PriorClaim.NONE else 1.0,
            config.claim_severity[record.prior_claim],
        ]
    )


def encode_dataset(
    dataset: Dataset, config: EncodingConfig = DEFAULT_ENCODING
) -> tuple[np.ndarray, np.ndarray | None]:
    """Encode every record; returns (X, y) with y=None if any response is absent."""
    X = np.vstack([encode(r, config) for r in dataset.records])
    if any(r.expenditure is None for r in dataset.records):
        return X, None
    y = np.array([r.expenditure for r in dataset.records], dtype=float)
    return X, y


def _severity_attenuation(config: EncodingConfig) -> float:
    """Correlation carried from the claim flag into the severity feature.

    With severity = claim_present * S and S independent of the smoker flag,
    corr(smoker, severity) = phi * kappa where phi = corr(smoker, claim flag)
    and kappa depends only on the claim rate and the severity distribution.
    """
    p = _CLAIM_RATE
    sev = np.array([config.claim_severity[PriorClaim(c)] for c in _CLAIM_CATEGORIES])
    probs = np.array(_CLAIM_CATEGORY_PROBS)
    mean_s = float(probs @ sev)
    mean_s2 = float(probs @ sev**2)
    var_v = p * mean_s2 - p**2 * mean_s**2
    if var_v <= 0:
        return 0.0
    return mean_s * math.sqrt(p * (1 - p)) / math.sqrt(var_v)


def generate_synthetic(
    params: GeneratorParams, config: EncodingConfig = DEFAULT_ENCODING
) -> Dataset:
    """Draw a synthetic customer population with known ground truth.

    Deterministic for a fixed seed.  The returned dataset keeps ``params``
    attached so the exact generating function stays available for tests.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n

    age_lo, age_hi = (int(round(v)) for v in config.age_range)
    inc_lo, inc_hi = (int(round(v)) for v in config.income_range)

    genders = rng.integers(0, 2, size=n)
    ages = rng.integers(age_lo, age_hi + 1, size=n)
    incomes = rng.integers(inc_lo, inc_hi + 1, size=n).astype(float)
    smokers = rng.random(n) < _SMOKE_RATE

    kappa = _severity_attenuation(config)
    phi = 0.0 if kappa <= 0 else min(1.0, params.collinearity_rho / kappa)
    copy_smoker = rng.random(n) < phi
    fresh_claims = rng.random(n) < _CLAIM_RATE
    claim_present = np.where(copy_smoker, smokers, fresh_claims)
    categories = rng.choice(len(_CLAIM_CATEGORIES), size=n, p=_CLAIM_CATEGORY_PROBS)
    if params.noise_scale > 0:
        noise = rng.normal(0.0, params.noise_scale, size=n)
        heavy = rng.random(n) < params.noise_outlier_rate
        noise[heavy] *= params.noise_outlier_factor
    else:
        noise = np.zeros(n)

    coef = params.coefficients()
    records = []
    for i in range(n):
        claim = PriorClaim(_CLAIM_CATEGORIES[categories[i]]) if claim_present[i] else PriorClaim.NONE
        partial = CustomerRecord(
            id=i + 1,
            gender=Gender.MALE if genders[i] else Gender.FEMALE,
            age=int(ages[i]),
            income=float(incomes[i]),
            smoker=bool(smokers[i]),
            prior_claim=claim,
            expenditure=0.0,
        )
        x = encode(partial, config)
        eta = (
            params.base_cost
            + float(coef @ x)
            + params.age_curvature * x[1] ** 2
            + params.interaction * x[3] * x[5]
            + noise[i]
        )
        expenditure = float(np.logaddexp(0.0, eta))
        records.append(
            CustomerRecord(
                id=partial.id,
                gender=partial.gender,
                age=partial.age,
                income=partial.income,
                smoker=partial.smoker,
                prior_claim=partial.prior_claim,
                expenditure=expenditure,
            )
        )
    return Dataset(tuple(records), provenance="synthetic", generator_params=params)


def split_half(dataset: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle deterministically and split; the train half gets ceil(n/2) rows."""
    if dataset.n < 2:
        raise ValidationError("split_half needs at least 2 records")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    k = math.ceil(dataset.n / 2)
    train = tuple(dataset.records[i] for i in perm[:k])
    test = tuple(dataset.records[i] for i in perm[k:])
    common = dict(provenance=dataset.provenance, generator_params=dataset.generator_params)
    return Dataset(train, **common), Dataset(test, **common)


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write records in the canonical column order (UTF-8, no currency symbols)."""
    has_expenditure = all(r.expenditure is not None for r in dataset.records)
    columns = CSV_COLUMNS if has_expenditure else CSV_COLUMNS[:-1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in dataset.records:
            row = [
                str(r.id),
                r.gender.value,
                str(r.age),
                _format_number(r.income),
                "yes" if r.smoker else "no",
                r.prior_claim.value,
            ]
            if has_expenditure:
                row.append(_format_number(r.expenditure))
            writer.writerow(row)


def _parse_enum(cls, text: str, column: str, row: int):
    try:
        return cls(text)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ParseError(
            f"row {row}: invalid {column} {text!r} (expected one of: {allowed})", row=row
        ) from None


def load_csv(path: str | Path) -> Dataset:
    """Load and validate a customer CSV.

    The header must match the canonical contract exactly; the expenditure
    column may be absent (prediction-only input).  Parse failures name the
    offending row, invariant failures name the record id.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = tuple(h.strip() for h in header)
        if header not in (CSV_COLUMNS, CSV_COLUMNS[:-1]):
            missing = [c for c in CSV_COLUMNS[:-1] if c not in header]
            extra = [c for c in header if c not in CSV_COLUMNS]
            detail = []
            if missing:
                detail.append(f"missing column(s): {', '.join(missing)}")
            if extra:
                detail.append(f"unexpected column(s): {', '.join(extra)}")
            if not detail:
                detail.append(f"column order must be {','.join(CSV_COLUMNS)}")
            raise SchemaError(f"{path}: bad header; " + "; ".join(detail))
        has_expenditure = header == CSV_COLUMNS

        records = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {row_no}: expected {len(header)} cells, got {len(row)}",
                    row=row_no,
                )
            cells = [c.strip() for c in row]
            try:
                rec_id = int(cells[0])
                age = int(cells[2])
                income = float(cells[3])
            except ValueError as exc:
                raise ParseError(f"row {row_no}: {exc}", row=row_no) from None
            gender = _parse_enum(Gender, cells[1], "gender", row_no)
            smoke = cells[4].lower()
            if smoke not in ("yes", "no"):
                raise ParseError(
                    f"row {row_no}: invalid smoke {cells[4]!r} (expected yes or no)",
                    row=row_no,
                )
            claim = _parse_enum(PriorClaim, cells[5], "previous_claim", row_no)
            expenditure: float | None = None
            if has_expenditure:
                try:
                    expenditure = float(cells[6])
                except ValueError as exc:
                    raise ParseError(f"row {row_no}: {exc}", row=row_no) from None
            records.append(
                CustomerRecord(
                    id=rec_id,
                    gender=gender,
                    age=age,
                    income=income,
                    smoker=smoke == "yes",
                    prior_claim=claim,
                    expenditure=expenditure,
                )
            )
    if not records:
        raise ValidationError(f"{path}: empty dataset")
    return Dataset(tuple(records), provenance="loaded")
