"""Command-line pipeline: gen, fit, predict, compare.

Every command writes a ``<output>.manifest`` next to its primary output
recording the exact argv, config path, seed and tool version; replaying the
manifest reproduces the artifact byte for byte (timestamps aside).

Exit codes: 0 success, 2 usage, 3 data or validation problem, 4 fit failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import shlex
import sys
from pathlib import Path

from . import __version__
from .ann import NetworkTopology, TrainingConfig
from .artifacts import load_model, save_model
from .config import (
    encoding_from_mapping,
    generator_from_mapping,
    read_config,
)
from .dataset import Dataset, encode, load_csv, split_half, write_csv, generate_synthetic
from .errors import (
    ConvergenceError,
    DivergenceError,
    NumericError,
    ParseError,
    PricelabError,
    SchemaError,
    SingularityError,
    ValidationError,
)
from .evaluation import (
    AnnFamily,
    DEFAULT_RATIO_FLOOR,
    DEFAULT_TRIM_FRACTION,
    GamFamily,
    GlmFamily,
    compare,
    predictor_for,
    render_markdown,
    report_csv,
)
from .gam import SmoothConfig
from .glm import LinkKind

_DATA_ERRORS = (SchemaError, ParseError, ValidationError, SingularityError)
_FIT_ERRORS = (ConvergenceError, DivergenceError, NumericError)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_manifest(
    primary_output: Path,
    command: str,
    argv: list[str],
    *,
    seed: int | None,
    config_path: str | None,
    inputs: list[str],
    outputs: list[str],
) -> None:
    lines = [
        f"command = {command}",
        f"argv = {shlex.join(argv)}",
        f"config = {config_path or 'none'}",
        f"seed = {seed if seed is not None else 'none'}",
        f"inputs = {','.join(inputs) or 'none'}",
        f"outputs = {','.join(outputs)}",
        f"version = {__version__}",
        f"timestamp = {_timestamp()}",
    ]
    Path(str(primary_output) + ".manifest").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )


def replay_manifest(path: str | Path) -> int:
    """Re-run the command recorded in a manifest; returns its exit code."""
    if not Path(path).is_file():
        raise ValidationError(f"{path}: no such manifest")
    argv: list[str] | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        if key.strip() == "argv":
            argv = shlex.split(value.strip())
    if argv is None:
        raise ValidationError(f"{path}: manifest has no argv line")
    return main(argv)


def _load_mapping(config_path: str | None) -> dict[str, str]:
    return read_config(config_path) if config_path else {}


def _model_settings(mapping: dict[str, str]):
    link = LinkKind(mapping.get("link", "identity"))
    smooth = SmoothConfig(
        knots=int(mapping.get("knots", 6)),
        penalty=float(mapping.get("penalty", 1e-3)),
        force_linear=mapping.get("force_linear", "no").lower() in ("yes", "true", "1"),
    )
    hidden = tuple(int(h) for h in mapping.get("hidden", "8").split(","))
    training = TrainingConfig(
        learning_rate=float(mapping.get("learning_rate", 0.05)),
        max_epochs=int(mapping.get("max_epochs", 2000)),
        seed=int(mapping.get("train_seed", 0)),
        validation_fraction=float(mapping.get("validation_fraction", 0.2)),
        early_stop_patience=int(mapping.get("patience", 100)),
    )
    return link, smooth, NetworkTopology(hidden=hidden), training


def _cmd_gen(args: argparse.Namespace, argv: list[str]) -> int:
    mapping = _load_mapping(args.config)
    encoding = encoding_from_mapping(mapping)
    try:
        params = generator_from_mapping(mapping)
        if args.n is not None:
            params = dataclasses.replace(params, n=args.n)
        if args.seed is not None:
            params = dataclasses.replace(params, seed=args.seed)
    except ValidationError as exc:
        args.parser.error(str(exc))
    data = generate_synthetic(params, encoding)
    out = Path(args.out)
    write_csv(data, out)
    _write_manifest(
        out, "gen", argv, seed=params.seed, config_path=args.config,
        inputs=[], outputs=[str(out)],
    )
    print(f"wrote {data.n} records to {out}")
    return 0


def _cmd_fit(args: argparse.Namespace, argv: list[str]) -> int:
    mapping = _load_mapping(args.config)
    encoding = encoding_from_mapping(mapping)
    link, smooth, topology, training = _model_settings(mapping)
    data = load_csv(args.input)
    if any(r.expenditure is None for r in data.records):
        raise ValidationError("fit needs the expenditure column")
    train_half, test_half = split_half(data, args.seed)

    if args.family == "glm":
        model = GlmFamily(link=link).fit(train_half, encoding)
    elif args.family == "gam":
        model = GamFamily(link=link, smooth=smooth).fit(train_half, encoding)
    else:
        model = AnnFamily(topology=topology, training=training).fit(train_half, encoding)

    out = Path(args.out)
    save_model(model, out)
    index_path = Path(str(out) + ".test-index")
    index_path.write_text(
        "\n".join(str(r.id) for r in test_half.records) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out, "fit", argv, seed=args.seed, config_path=args.config,
        inputs=[str(args.input)], outputs=[str(out), str(index_path)],
    )
    print(f"fit {args.family} on {train_half.n} rows; artifact at {out}")
    return 0


def _cmd_predict(args: argparse.Namespace, argv: list[str]) -> int:
    model = load_model(args.model)
    data = load_csv(args.input)
    predict = predictor_for(model)
    has_actuals = all(r.expenditure is not None for r in data.records)
    lines = ["id,predicted_expenditure,ratio" if has_actuals else "id,predicted_expenditure"]
    for record in data.records:
        prediction = predict(encode(record, model.encoding))
        if has_actuals:
            ratio = "" if record.expenditure == 0 else repr(prediction / record.expenditure)
            lines.append(f"{record.id},{prediction!r},{ratio}")
        else:
            lines.append(f"{record.id},{prediction!r}")
    out = Path(args.out)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(
        out, "predict", argv, seed=None, config_path=None,
        inputs=[str(args.model), str(args.input)], outputs=[str(out)],
    )
    print(f"wrote {data.n} predictions to {out}")
    return 0


def _cmd_compare(args: argparse.Namespace, argv: list[str]) -> int:
    if len(args.models) < 2:
        args.parser.error("compare needs at least two --model artifacts")
    mapping = _load_mapping(args.config)
    trim = float(mapping.get("trim_fraction", DEFAULT_TRIM_FRACTION))
    floor = float(mapping.get("floor", DEFAULT_RATIO_FLOOR))

    models = [load_model(p) for p in args.models]
    index_sets = []
    for path in args.models:
        index_path = Path(str(path) + ".test-index")
        if not index_path.exists():
            raise ValidationError(f"missing test index file {index_path}")
        ids = [int(line) for line in index_path.read_text().split()]
        index_sets.append(ids)
    if any(set(ids) != set(index_sets[0]) for ids in index_sets[1:]):
        raise ValidationError(
            "leakage: model artifacts disagree about the held-out test records"
        )
    test_ids = set(index_sets[0])

    data = load_csv(args.input)
    test_records = tuple(r for r in data.records if r.id in test_ids)
    train_records = tuple(r for r in data.records if r.id not in test_ids)
    if len(test_records) != len(test_ids):
        raise ValidationError("test index references ids missing from the input file")
    test = Dataset(test_records)
    train = Dataset(train_records)

    report = compare(
        models, test, train=train, trim_fraction=trim, floor=floor, seed=args.seed
    )
    out_md = Path(args.out + ".md")
    out_csv = Path(args.out + ".csv")
    out_md.write_text(render_markdown(report), encoding="utf-8")
    out_csv.write_text(report_csv(report), encoding="utf-8")
    _write_manifest(
        out_md, "compare", argv, seed=args.seed, config_path=args.config,
        inputs=[str(args.input), *map(str, args.models)],
        outputs=[str(out_md), str(out_csv)],
    )
    print(render_markdown(report))
    return 0


def _cmd_replay(args: argparse.Namespace, argv: list[str]) -> int:
    return replay_manifest(args.manifest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pricelab",
        description="Generate, fit and compare expenditure pricing models.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic customer CSV")
    p_gen.add_argument("--n", type=int, default=None, help="number of records")
    p_gen.add_argument("--seed", type=int, default=None, help="generator seed")
    p_gen.add_argument("--config", default=None, help="key-value config file")
    p_gen.add_argument("-o", "--out", required=True, help="output CSV path")
    p_gen.set_defaults(func=_cmd_gen, parser=p_gen)

    p_fit = sub.add_parser("fit", help="split a CSV in half and fit one family")
    p_fit.add_argument("--family", required=True, choices=("glm", "gam", "ann"))
    p_fit.add_argument("--in", dest="input", required=True, help="input CSV")
    p_fit.add_argument("--seed", type=int, default=0, help="split seed")
    p_fit.add_argument("--config", default=None, help="key-value config file")
    p_fit.add_argument("-o", "--out", required=True, help="model artifact path")
    p_fit.set_defaults(func=_cmd_fit, parser=p_fit)

    p_pred = sub.add_parser("predict", help="apply a model artifact to a CSV")
    p_pred.add_argument("--model", required=True, help="model artifact path")
    p_pred.add_argument("--in", dest="input", required=True, help="input CSV")
    p_pred.add_argument("-o", "--out", required=True, help="output CSV path")
    p_pred.set_defaults(func=_cmd_predict, parser=p_pred)

    p_cmp = sub.add_parser("compare", help="evaluate fitted artifacts on the shared test half")
    p_cmp.add_argument(
        "--model", dest="models", action="append", required=True,
        help="model artifact path (repeat; at least two)",
    )
    p_cmp.add_argument("--in", dest="input", required=True, help="full data CSV")
    p_cmp.add_argument("--seed", type=int, default=0, help="seed for the scans")
    p_cmp.add_argument("--config", default=None, help="key-value config file")
    p_cmp.add_argument("-o", "--out", required=True, help="output prefix (.md/.csv)")
    p_cmp.set_defaults(func=_cmd_compare, parser=p_cmp)

    p_rep = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p_rep.add_argument("manifest", help="path to a .manifest file")
    p_rep.set_defaults(func=_cmd_replay, parser=p_rep)
    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _FIT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except PricelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
