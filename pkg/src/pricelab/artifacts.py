"""Plain-text model artifacts.

Every fitted model serializes to a sectioned key-value file that starts with
``family = <glm|gam|ann>`` and embeds the encoding configuration it was fit
with, so prediction needs nothing beyond the artifact.  Floats are written
with ``repr`` and therefore reload bit-exactly: a reloaded model predicts
byte-identically to the one that was saved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ann import AnnModel, NetworkTopology, TargetScaler, Weights
from .config import (
    Pairs,
    Sections,
    dump_sections,
    encoding_from_pairs,
    encoding_to_pairs,
    format_float,
    parse_sections,
)
from .dataset import FEATURE_NAMES
from .errors import ValidationError
from .gam import GamModel, InteractionTerm, SmoothConfig, SmoothFunction
from .glm import GlmModel, LinkKind


def _floats(values) -> str:
    return " ".join(format_float(v) for v in np.asarray(values, dtype=float).ravel())


def _parse_floats(text: str) -> np.ndarray:
    if not text:
        return np.empty(0)
    return np.array([float(tok) for tok in text.split()])


def _feature_index(name: str) -> int:
    try:
        return FEATURE_NAMES.index(name)
    except ValueError:
        raise ValidationError(f"unknown feature name {name!r} in artifact") from None


# -- GLM ---------------------------------------------------------------------


def _glm_sections(model: GlmModel) -> Sections:
    head: Pairs = [
        ("family", "glm"),
        ("link", model.link.value),
        ("intercept", format_float(model.intercept)),
    ]
    head += [
        (f"coef_{name}", format_float(value))
        for name, value in zip(FEATURE_NAMES, model.coef)
    ]
    head += [
        ("rss", format_float(model.rss)),
        ("iterations", str(model.iterations)),
    ]
    return [("", head), ("encoding", encoding_to_pairs(model.encoding))]


def _glm_from_sections(sections: Sections) -> GlmModel:
    head = dict(sections[0][1])
    encoding = encoding_from_pairs(_section(sections, "encoding"))
    return GlmModel(
        intercept=float(head["intercept"]),
        coef=np.array([float(head[f"coef_{name}"]) for name in FEATURE_NAMES]),
        link=LinkKind(head["link"]),
        rss=float(head["rss"]),
        iterations=int(head["iterations"]),
        encoding=encoding,
    )


# -- GAM ---------------------------------------------------------------------


def _gam_sections(model: GamModel) -> Sections:
    head: Pairs = [
        ("family", "gam"),
        ("link", model.link.value),
        ("intercept", format_float(model.intercept)),
        ("cycles", str(model.cycles)),
        ("rss", format_float(model.rss)),
        ("knots", str(model.smooth_config.knots)),
        ("penalty", format_float(model.smooth_config.penalty)),
        ("force_linear", "yes" if model.smooth_config.force_linear else "no"),
    ]
    sections: Sections = [("", head), ("encoding", encoding_to_pairs(model.encoding))]
    for smooth in model.smooths:
        pairs: Pairs = [("kind", smooth.kind), ("center", format_float(smooth.center))]
        if smooth.kind == "linear":
            pairs.append(("slope", format_float(smooth.slope)))
        else:
            pairs.append(("knot_positions", _floats(smooth.knots)))
            pairs.append(("knot_values", _floats(smooth.values)))
        sections.append((f"smooth {FEATURE_NAMES[smooth.feature]}", pairs))
    for term in model.interactions:
        sections.append(
            (
                "interaction",
                [
                    ("pair", f"{FEATURE_NAMES[term.i]} {FEATURE_NAMES[term.j]}"),
                    ("gamma", format_float(term.gamma)),
                ],
            )
        )
    return sections


def _gam_from_sections(sections: Sections) -> GamModel:
    head = dict(sections[0][1])
    encoding = encoding_from_pairs(_section(sections, "encoding"))
    smooths: dict[int, SmoothFunction] = {}
    interactions: list[InteractionTerm] = []
    for name, pairs in sections[1:]:
        data = dict(pairs)
        if name.startswith("smooth "):
            feature = _feature_index(name.split(" ", 1)[1])
            kind = data["kind"]
            if kind == "linear":
                smooths[feature] = SmoothFunction(
                    feature=feature, kind="linear", knots=np.empty(0),
                    values=np.empty(0), slope=float(data["slope"]),
                    center=float(data["center"]),
                )
            else:
                smooths[feature] = SmoothFunction(
                    feature=feature, kind="spline",
                    knots=_parse_floats(data["knot_positions"]),
                    values=_parse_floats(data["knot_values"]),
                    slope=0.0, center=float(data["center"]),
                )
        elif name == "interaction":
            a, b = data["pair"].split()
            interactions.append(
                InteractionTerm(_feature_index(a), _feature_index(b), float(data["gamma"]))
            )
    if sorted(smooths) != list(range(len(FEATURE_NAMES))):
        raise ValidationError("artifact is missing smooth sections")
    return GamModel(
        intercept=float(head["intercept"]),
        link=LinkKind(head["link"]),
        smooths=tuple(smooths[j] for j in range(len(FEATURE_NAMES))),
        interactions=tuple(interactions),
        cycles=int(head["cycles"]),
        rss=float(head["rss"]),
        smooth_config=SmoothConfig(
            knots=int(head["knots"]),
            penalty=float(head["penalty"]),
            force_linear=head["force_linear"] == "yes",
        ),
        encoding=encoding,
    )


# -- ANN ---------------------------------------------------------------------


def _ann_sections(model: AnnModel) -> Sections:
    head: Pairs = [
        ("family", "ann"),
        ("inputs", str(model.topology.inputs)),
        ("hidden", ",".join(str(h) for h in model.topology.hidden)),
        ("outputs", str(model.topology.outputs)),
        ("scaler_lo", format_float(model.scaler.lo)),
        ("scaler_hi", format_float(model.scaler.hi)),
        ("stopped_epoch", str(model.stopped_epoch)),
    ]
    sections: Sections = [("", head), ("encoding", encoding_to_pairs(model.encoding))]
    for index, (w, b) in enumerate(zip(model.weights.matrices, model.weights.biases)):
        pairs: Pairs = [("rows", str(w.shape[0])), ("cols", str(w.shape[1]))]
        pairs += [(f"row_{r}", _floats(w[r])) for r in range(w.shape[0])]
        pairs.append(("bias", _floats(b)))
        sections.append((f"layer {index}", pairs))
    sections.append(
        (
            "loss_history",
            [
                ("train", _floats(model.train_loss)),
                ("val", _floats(model.val_loss)),
            ],
        )
    )
    return sections


def _ann_from_sections(sections: Sections) -> AnnModel:
    head = dict(sections[0][1])
    encoding = encoding_from_pairs(_section(sections, "encoding"))
    topology = NetworkTopology(
        inputs=int(head["inputs"]),
        hidden=tuple(int(h) for h in head["hidden"].split(",")),
        outputs=int(head["outputs"]),
    )
    layers: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    losses: dict[str, np.ndarray] = {"train": np.empty(0), "val": np.empty(0)}
    for name, pairs in sections[1:]:
        data = dict(pairs)
        if name.startswith("layer "):
            index = int(name.split(" ", 1)[1])
            rows, cols = int(data["rows"]), int(data["cols"])
            matrix = np.vstack([_parse_floats(data[f"row_{r}"]) for r in range(rows)])
            if matrix.shape != (rows, cols):
                raise ValidationError(f"layer {index}: matrix shape mismatch")
            layers[index] = (matrix, _parse_floats(data["bias"]))
        elif name == "loss_history":
            losses["train"] = _parse_floats(data["train"])
            losses["val"] = _parse_floats(data["val"])
    expected = len(topology.layer_sizes()) - 1
    if sorted(layers) != list(range(expected)):
        raise ValidationError("artifact is missing layer sections")
    return AnnModel(
        topology=topology,
        weights=Weights(
            matrices=tuple(layers[i][0] for i in range(expected)),
            biases=tuple(layers[i][1] for i in range(expected)),
        ),
        scaler=TargetScaler(lo=float(head["scaler_lo"]), hi=float(head["scaler_hi"])),
        train_loss=tuple(losses["train"]),
        val_loss=tuple(losses["val"]),
        stopped_epoch=int(head["stopped_epoch"]),
        encoding=encoding,
    )


# -- public API ---------------------------------------------------------------


def _section(sections: Sections, name: str) -> Pairs:
    for sec_name, pairs in sections:
        if sec_name == name:
            return pairs
    raise ValidationError(f"artifact is missing [{name}] section")


def save_model(model, path: str | Path) -> None:
    if isinstance(model, GlmModel):
        sections = _glm_sections(model)
    elif isinstance(model, GamModel):
        sections = _gam_sections(model)
    elif isinstance(model, AnnModel):
        sections = _ann_sections(model)
    else:
        raise ValidationError(f"cannot serialize {type(model).__name__}")
    Path(path).write_text(dump_sections(sections), encoding="utf-8")


def load_model(path: str | Path):
    text = Path(path).read_text(encoding="utf-8")
    sections = parse_sections(text)
    head = dict(sections[0][1])
    family = head.get("family")
    if family == "glm":
        return _glm_from_sections(sections)
    if family == "gam":
        return _gam_from_sections(sections)
    if family == "ann":
        return _ann_from_sections(sections)
    raise ValidationError(f"{path}: unknown or missing model family {family!r}")
