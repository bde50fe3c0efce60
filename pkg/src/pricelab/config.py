"""Plain-text key-value files: run configs and model artifact sections.

Config files are flat ``key = value`` lines (``#`` comments allowed).
Artifacts reuse the same line syntax grouped under ``[section]`` headers.
Floats are serialized with ``repr`` so artifacts round-trip bit-exactly.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .dataset import DEFAULT_ENCODING, EncodingConfig, GeneratorParams, PriorClaim
from .errors import ValidationError

Pairs = list[tuple[str, str]]
Sections = list[tuple[str, Pairs]]


def format_float(value: float) -> str:
    return repr(float(value))


def parse_sections(text: str) -> Sections:
    """Split artifact text into ordered (section, pairs) groups.

    Lines before the first header belong to the unnamed section ``""``.
    """
    sections: Sections = [("", [])]
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            sections.append((line[1:-1].strip(), []))
            continue
        if "=" not in line:
            raise ValidationError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        sections[-1][1].append((key.strip(), value.strip()))
    return sections


def dump_sections(sections: Sections) -> str:
    chunks = []
    for name, pairs in sections:
        if name:
            chunks.append(f"[{name}]")
        chunks.extend(f"{key} = {value}" for key, value in pairs)
    return "\n".join(chunks) + "\n"


def read_config(path: str | Path) -> dict[str, str]:
    """Read a flat config file; section headers are not allowed here."""
    text = Path(path).read_text(encoding="utf-8")
    sections = parse_sections(text)
    if len(sections) > 1:
        raise ValidationError(f"{path}: config files must not contain [section] headers")
    pairs = sections[0][1]
    out: dict[str, str] = {}
    for key, value in pairs:
        if key in out:
            raise ValidationError(f"{path}: duplicate key {key!r}")
        out[key] = value
    unknown = set(out) - KNOWN_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown key(s): {', '.join(sorted(unknown))}")
    return out


def _float_of(mapping: dict[str, str], key: str) -> float:
    try:
        return float(mapping[key])
    except ValueError:
        raise ValidationError(f"config key {key!r}: not a number: {mapping[key]!r}") from None


def _int_of(mapping: dict[str, str], key: str) -> int:
    try:
        return int(mapping[key])
    except ValueError:
        raise ValidationError(f"config key {key!r}: not an integer: {mapping[key]!r}") from None


def _bool_of(mapping: dict[str, str], key: str) -> bool:
    value = mapping[key].lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ValidationError(f"config key {key!r}: not a boolean: {mapping[key]!r}")


_SEVERITY_KEYS = {
    "severity_none": PriorClaim.NONE,
    "severity_diabetes": PriorClaim.DIABETES,
    "severity_copd": PriorClaim.COPD,
    "severity_lung_cancer": PriorClaim.LUNG_CANCER,
    "severity_other": PriorClaim.OTHER,
}

ENCODING_KEYS = frozenset(
    {"age_min", "age_max", "income_min", "income_max", *_SEVERITY_KEYS}
)
GENERATOR_KEYS = frozenset(
    {
        "n", "seed", "base_cost", "coef_gender", "coef_age", "coef_income",
        "coef_smoker", "coef_claim_present", "coef_claim_severity",
        "age_curvature", "interaction", "collinearity_rho", "noise_scale",
        "noise_outlier_rate", "noise_outlier_factor",
    }
)
MODEL_KEYS = frozenset(
    {
        "link", "knots", "penalty", "force_linear",
        "hidden", "learning_rate", "max_epochs", "patience",
        "validation_fraction", "train_seed",
    }
)
BAND_KEYS = frozenset({"trim_fraction", "floor"})
KNOWN_KEYS = ENCODING_KEYS | GENERATOR_KEYS | MODEL_KEYS | BAND_KEYS


def encoding_from_mapping(mapping: dict[str, str]) -> EncodingConfig:
    base = DEFAULT_ENCODING
    age = (
        _float_of(mapping, "age_min") if "age_min" in mapping else base.age_range[0],
        _float_of(mapping, "age_max") if "age_max" in mapping else base.age_range[1],
    )
    income = (
        _float_of(mapping, "income_min") if "income_min" in mapping else base.income_range[0],
        _float_of(mapping, "income_max") if "income_max" in mapping else base.income_range[1],
    )
    severity = dict(base.claim_severity)
    for key, claim in _SEVERITY_KEYS.items():
        if key in mapping:
            severity[claim] = _float_of(mapping, key)
    return EncodingConfig(age_range=age, income_range=income, claim_severity=severity)


def generator_from_mapping(mapping: dict[str, str]) -> GeneratorParams:
    params = GeneratorParams()
    updates: dict[str, object] = {}
    for key in GENERATOR_KEYS & set(mapping):
        if key in ("n", "seed"):
            updates[key] = _int_of(mapping, key)
        else:
            updates[key] = _float_of(mapping, key)
    return replace(params, **updates)


def encoding_to_pairs(config: EncodingConfig) -> Pairs:
    pairs: Pairs = [
        ("age_min", format_float(config.age_range[0])),
        ("age_max", format_float(config.age_range[1])),
        ("income_min", format_float(config.income_range[0])),
        ("income_max", format_float(config.income_range[1])),
    ]
    for key, claim in _SEVERITY_KEYS.items():
        pairs.append((key, format_float(config.claim_severity[claim])))
    return pairs


def encoding_from_pairs(pairs: Pairs) -> EncodingConfig:
    return encoding_from_mapping(dict(pairs))
