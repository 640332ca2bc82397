"""Command-line pipeline: ingest -> experiment -> classify -> map.

Configuration is plain ``key = value`` lines with ``#`` comments; flags
override config values. Exit codes: 0 success, 2 input error,
3 consistency error (e.g. a checkpoint/featurizer mismatch), 1 internal.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from hijackmap import evaluation, figures, textprep
from hijackmap.corpus import (
    Dataset,
    IngestError,
    SplitSpec,
    generate_synthetic_corpus,
    ingest_records,
    parse_record_line,
    split_dataset,
    write_records,
)
from hijackmap.geomap import (
    DEFAULT_CENTER,
    DEFAULT_RADIUS_KM,
    RemoteGeocoder,
    build_map,
    emit_geojson,
    emit_html_map,
    load_gazetteer_file,
)
from hijackmap.models import (
    FAMILIES,
    MAX_LEN,
    encode_tokens,
    load_model,
    load_token_vocab,
    export_token_vocab,
    save_model,
)
from hijackmap.nnkit.train import TrainConfig

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_CONSISTENCY = 3

TFIDF_MANIFEST = "tfidf_manifest.txt"
TOKEN_VOCAB = "token_vocab.txt"


class InputError(RuntimeError):
    """Bad or missing input; maps to exit code 2."""


class ConsistencyError(RuntimeError):
    """Cross-artifact mismatch; maps to exit code 3."""


@dataclass
class RunConfig:
    store: str = "tweets.jsonl"
    stoplist: str = ""       # empty -> packaged default
    gazetteer: str = ""      # empty -> packaged default
    out: str = "out"
    seed: int = 7
    batch_size: int = 32
    epochs: int = 20
    val_fraction: float = 0.2
    loss: str = "bce"
    train_count: int = 296
    test_count: int = 130
    train_relevant: int = 76
    train_irrelevant: int = 220
    test_relevant: int = 29
    test_irrelevant: int = 101
    center_lat: float = DEFAULT_CENTER[0]
    center_lon: float = DEFAULT_CENTER[1]
    radius_km: float = DEFAULT_RADIUS_KM
    selection_cnn: str = "val_first"
    selection_mlfnn: str = "val_first"
    selection_tinyformer: str = "f1_first"
    geocoder_url: str = ""

    def selection_rule(self, family: str) -> str:
        return getattr(self, f"selection_{family}")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            epochs=self.epochs,
            val_fraction=self.val_fraction,
            seed=self.seed,
            loss=self.loss,
        )

    def stoplist_terms(self) -> set[str]:
        if self.stoplist:
            return textprep.load_stoplist(_require(self.stoplist, "stoplist"))
        return textprep.default_stoplist()

    def gazetteer_path(self) -> Path:
        if self.gazetteer:
            return _require(self.gazetteer, "gazetteer")
        return Path(str(resources.files("hijackmap.data").joinpath("gazetteer_cape_town.csv")))


def load_config(path: str | Path) -> RunConfig:
    """Parse a key = value file into a RunConfig."""
    config = RunConfig()
    known = {f.name: f.type for f in fields(RunConfig)}
    casts = {"int": int, "float": float, "str": str}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise InputError(f"{path}:{line_no}: expected key = value")
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            if key not in known:
                raise InputError(f"{path}:{line_no}: unknown config key {key!r}")
            try:
                setattr(config, key, casts[known[key]](value))
            except ValueError:
                raise InputError(f"{path}:{line_no}: bad value for {key!r}: {value!r}") from None
    return config


def _require(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{what} not found: {p}")
    return p


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_ingest(input_path: str, store_path: str, lenient: bool = False) -> int:
    """Append deduplicated records from input to the store file."""
    source = _require(input_path, "input")
    store = Path(store_path)
    existing_ids: set[str] = set()
    if store.exists():
        with open(store, encoding="utf-8") as fh:
            existing_ids = ingest_records(fh, lenient=True).dataset.ids()
    with open(source, encoding="utf-8") as fh:
        result = ingest_records(fh, provenance=str(source), lenient=lenient)
    fresh = [rec for rec in result.dataset if rec.id not in existing_ids]
    store.parent.mkdir(parents=True, exist_ok=True)
    with open(store, "a", encoding="utf-8", newline="\n") as fh:
        write_records(fresh, fh)
    deduped = result.dedup_events + (len(result.dataset) - len(fresh))
    for message in result.skipped:
        print(f"skipped {message}", file=sys.stderr)
    print(f"read {result.read} added {len(fresh)} deduped {deduped}")
    return EXIT_OK


def cmd_synth(relevant: int, irrelevant: int, output: str, seed: int) -> int:
    """Write a deterministic synthetic labeled corpus."""
    ds = generate_synthetic_corpus(seed, relevant, irrelevant)
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        write_records(ds, fh)
    print(f"wrote {len(ds)} records ({relevant} relevant, {irrelevant} irrelevant) to {out}")
    return EXIT_OK


def _load_store(config: RunConfig) -> Dataset:
    store = _require(config.store, "dataset store")
    with open(store, encoding="utf-8") as fh:
        return ingest_records(fh, provenance=str(store)).dataset


def _split_for_experiment(ds: Dataset, config: RunConfig) -> tuple[Dataset, Dataset]:
    counts = ds.class_counts()
    if set(counts) != {0, 1}:
        raise InputError(
            f"stratified split needs labeled records of both classes, found {counts}"
        )
    spec = SplitSpec(
        train_count=config.train_count,
        test_count=config.test_count,
        seed=config.seed,
        stratified=True,
        train_by_class={1: config.train_relevant, 0: config.train_irrelevant},
        test_by_class={1: config.test_relevant, 0: config.test_irrelevant},
    )
    return split_dataset(ds, spec)


def cmd_experiment(family_arg: str, config: RunConfig) -> int:
    """Run the model comparison for one family or all of them.

    Writes, under the out directory: a rendered table and key=value
    companion per family, a metrics figure per family, a checkpoint for
    each family's preferred model (plus the featurizer manifests it must
    be served with), and a winner summary.
    """
    if family_arg == "all":
        requested = list(FAMILIES)
    elif family_arg in FAMILIES:
        requested = [family_arg]
    else:
        raise InputError(f"unknown family {family_arg!r}; choose from {FAMILIES + ('all',)}")

    ds = _load_store(config)
    train_ds, test_ds = _split_for_experiment(ds, config)
    stoplist = config.stoplist_terms()
    out = Path(config.out)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    (out / "figures").mkdir(parents=True, exist_ok=True)

    preferred_rows = []
    manifests_written = False
    for family in requested:
        result = evaluation.run_family(train_ds, test_ds, family, config.train_config(),
                                       stoplist)
        _write_text(out / f"{family}_report.txt", evaluation.render_table(result.table))
        _write_text(out / f"{family}_report.kv", evaluation.render_key_values(result.table))
        figures.save_comparison_figure(result.table, out / "figures" / f"{family}_metrics.png")

        if not manifests_written:
            tfidf_manifest = textprep.export_manifest(result.features.tfidf)
            vocab_manifest = export_token_vocab(result.features.vocab)
            _write_text(ckpt_dir / TFIDF_MANIFEST, tfidf_manifest)
            _write_text(ckpt_dir / TOKEN_VOCAB, vocab_manifest)
            manifests_written = True

        rule = config.selection_rule(family)
        arch = evaluation.select_preferred(result.table, rule)
        manifest = vocab_manifest if family == "tinyformer" else tfidf_manifest
        save_model(ckpt_dir / f"{arch}.ckpt", result.models[str(arch)],
                   textprep.manifest_hash(manifest))
        preferred_rows.append((family, rule, result.table.row(str(arch))))
        print(f"preferred {family}: {arch} (rule {rule})")

    winner = max(preferred_rows, key=lambda fr: (fr[2].f1, fr[2].precision))[2].arch
    lines = [f"{family}.preferred={row.arch}  (rule {rule})"
             for family, rule, row in preferred_rows]
    lines.append(f"winner={winner}")
    _write_text(out / "winner.txt", "\n".join(lines) + "\n")
    print(f"winner: {winner}")
    return EXIT_OK


def _manifest_for(model_kind: str, checkpoint: Path, explicit: str | None) -> Path:
    if explicit:
        return _require(explicit, "featurizer manifest")
    name = TOKEN_VOCAB if model_kind == "token_ids" else TFIDF_MANIFEST
    return _require(checkpoint.parent / name, "featurizer manifest")


def cmd_classify(checkpoint: str, input_path: str, output_path: str,
                 config: RunConfig, manifest: str | None = None) -> int:
    """Augment input records with probability and predicted_label fields."""
    ckpt_path = _require(checkpoint, "checkpoint")
    source = _require(input_path, "input")
    try:
        model, stored_hash = load_model(ckpt_path)
    except ValueError as exc:
        raise InputError(f"cannot load checkpoint: {exc}") from exc
    manifest_path = _manifest_for(model.input_kind, ckpt_path, manifest)
    manifest_text = manifest_path.read_text("utf-8")
    actual_hash = textprep.manifest_hash(manifest_text)
    if actual_hash != stored_hash:
        raise ConsistencyError(
            f"checkpoint was trained against a different featurizer: "
            f"stored hash {stored_hash[:12]}.., manifest {manifest_path} "
            f"hashes to {actual_hash[:12]}.."
        )
    stoplist = config.stoplist_terms()
    if model.input_kind == "token_ids":
        vocab = load_token_vocab(manifest_text)
        featurize = lambda doc: encode_tokens(doc, vocab, MAX_LEN)
    else:
        tfidf = textprep.load_manifest(manifest_text)
        featurize = lambda doc: textprep.transform_tfidf(tfidf, doc)

    n = relevant = 0
    out = Path(output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(source, encoding="utf-8") as src, \
            open(out, "w", encoding="utf-8", newline="\n") as dst:
        for line_no, line in enumerate(src, start=1):
            if not line.strip():
                continue
            rec = parse_record_line(line, line_no)
            obj = json.loads(line)
            doc = textprep.tokenize(textprep.clean_text(rec.text), stoplist)
            probs = model.predict(featurize(doc)[None])
            prob = float(probs[0])
            obj["probability"] = round(prob, 6)
            obj["predicted_label"] = int(prob >= 0.5)
            relevant += obj["predicted_label"]
            dst.write(json.dumps(obj, ensure_ascii=False) + "\n")
            n += 1
    print(f"classified {n} records, {relevant} predicted relevant")
    return EXIT_OK


def cmd_map(classified_path: str, config: RunConfig, gazetteer: str | None = None) -> int:
    """Build the point map from records classified as relevant."""
    source = _require(classified_path, "classified input")
    gaz_path = _require(gazetteer, "gazetteer") if gazetteer else config.gazetteer_path()
    entries = load_gazetteer_file(gaz_path)

    relevant = []
    with open(source, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(line_no, f"invalid JSON ({exc.msg})") from exc
            if "predicted_label" not in obj:
                raise IngestError(line_no, "record has no predicted_label field")
            if obj["predicted_label"] == 1:
                relevant.append(parse_record_line(json.dumps(obj), line_no))

    remote = RemoteGeocoder(config.geocoder_url) if config.geocoder_url else None
    doc, summary = build_map(
        relevant,
        entries,
        center=(config.center_lat, config.center_lon),
        radius_km=config.radius_km,
        remote=remote,
    )
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "points.geojson").write_bytes(emit_geojson(doc))
    (out / "map.html").write_bytes(emit_html_map(doc))
    (out / "figures").mkdir(exist_ok=True)
    figures.save_map_figure(doc, out / "figures" / "point_map.png")
    if remote:
        for warning in remote.warnings:
            print(f"warning: {warning}", file=sys.stderr)
    print(
        f"relevant {summary.relevant} resolved {summary.resolved_mentions} "
        f"within-radius {summary.within_radius} "
        f"unresolved-dropped {summary.unresolved_dropped} "
        f"outside-radius {summary.outside_radius}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hijackmap",
        description="Classify hijacking-report posts and map incident locations.",
    )
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="append deduplicated records to the store")
    p.add_argument("input", help="line-delimited record file")
    p.add_argument("--store", help="store file (default from config)")
    p.add_argument("--lenient", action="store_true",
                   help="skip malformed lines instead of failing")

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--relevant", type=int, default=105)
    p.add_argument("--irrelevant", type=int, default=321)
    p.add_argument("--output", "-o", help="output file (default: the store)")

    p = sub.add_parser("experiment", help="train and compare model families")
    p.add_argument("family", choices=FAMILIES + ("all",))
    p.add_argument("--store", help="labeled store file (default from config)")

    p = sub.add_parser("classify", help="classify records with a trained checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--manifest", help="featurizer manifest (default: beside checkpoint)")

    p = sub.add_parser("map", help="emit the incident point map")
    p.add_argument("input", help="classified record file")
    p.add_argument("--gazetteer", help="gazetteer CSV (default from config)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(_require(args.config, "config file")) if args.config else RunConfig()
        if args.seed is not None:
            config.seed = args.seed
        if args.out:
            config.out = args.out

        if args.command == "ingest":
            return cmd_ingest(args.input, args.store or config.store, args.lenient)
        if args.command == "synth":
            return cmd_synth(args.relevant, args.irrelevant,
                             args.output or config.store, config.seed)
        if args.command == "experiment":
            if args.store:
                config.store = args.store
            return cmd_experiment(args.family, config)
        if args.command == "classify":
            return cmd_classify(args.checkpoint, args.input, args.output,
                                config, args.manifest)
        if args.command == "map":
            return cmd_map(args.input, config, args.gazetteer)
        raise InputError(f"unknown command {args.command!r}")
    except (InputError, IngestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
