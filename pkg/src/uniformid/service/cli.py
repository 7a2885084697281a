"""Command-line entry point.

Subcommands: generate-data, ingest, label, pretrain-backbone, train,
evaluate (holdout|loso|attributes), predict, search, serve, registry
(list|verify), bench.  Every subcommand honors --seed and --config.
Exit codes: 0 success, 2 usage, then one code per error class (see
errors.py); threshold-gated evaluations exit 1 when below threshold.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .. import nnkern, textio
from ..attributes import AttributeTrainConfig
from ..backbones import backbone_by_name, pretrain_conv_backbone
from ..datafactory import (
    LabelStore,
    LabelSubmission,
    SyntheticConfig,
    generate_dataset,
    generate_school_registry,
    holdout_split,
    ingest_folder,
)
from ..datafactory.manifest import load_dataset, save_dataset, save_figure_boxes
from ..errors import ConfigError, UniformIdError
from ..evaluation import (
    encode_attribute_report,
    encode_loso_report,
    encode_metricset,
    render_metric_table,
    run_attribute_comparison,
    run_holdout_eval,
    run_loso_study,
)
from ..preprocessing import resize_uint8
from ..search import SearchQuery, search as run_search
from ..uniform import TrainConfig, UniformModel, train_uniform
from .config import PipelineConfig
from .modelregistry import ModelRegistry
from .pipeline import PipelineRuntime, run_pipeline, batch as run_batch

import json


class _SubParser(argparse.ArgumentParser):
    """Subcommand parser that also accepts the shared global flags."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.add_argument("--config", default=argparse.SUPPRESS)
        self.add_argument("--seed", type=int, default=argparse.SUPPRESS)


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _load_records(data_dir: str):
    records = load_dataset(data_dir)
    if not records:
        raise ConfigError(f"dataset at {data_dir} is empty")
    return records


def _backbone(args, config: PipelineConfig):
    name = getattr(args, "backbone", None) or config.backbone
    weights = getattr(args, "backbone_weights", None) or config.backbone_weights
    return backbone_by_name(name, weights)


def _next_version(registry: ModelRegistry, kind: str) -> str:
    return f"v{sum(1 for e in registry.entries() if e.kind == kind) + 1}"


def cmd_generate_data(args) -> int:
    config = _load_config(args)
    syn = SyntheticConfig(
        seed=config.seed,
        num_schools=args.schools,
        uniform_images_per_school=args.images_per_school,
        num_nonuniform_images=args.nonuniform,
    )
    registry = generate_school_registry(syn)
    dataset = generate_dataset(syn, registry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "schools.txt").write_text(textio.encode_registry(registry))
    save_dataset(out / "dataset", dataset.records)
    save_figure_boxes(
        out / "dataset", {i: info.figure_box for i, info in dataset.render_infos.items()}
    )
    print(
        f"wrote {len(dataset.records)} records "
        f"({sum(1 for r in dataset.records if r.ground_truth.uniform_flag)} uniform), "
        f"{len(registry.profiles)} schools -> {out}"
    )
    print(f"dataset digest: {dataset.content_digest}")
    return 0


def cmd_ingest(args) -> int:
    result = ingest_folder(args.folder)
    save_dataset(args.out, result.records)
    print(f"ingested {len(result.records)} images -> {args.out}")
    for rej in result.rejections:
        print(f"rejected: {rej.path} ({rej.reason})")
    return 0


def cmd_label(args) -> int:
    records = _load_records(args.data)
    store = LabelStore((r.image_id for r in records), journal_path=args.journal)
    if args.label_cmd == "submit":
        ack = store.submit(
            LabelSubmission(
                image_id=args.image,
                annotator_id=args.annotator,
                label=textio.parse_label_inline(args.label),
            )
        )
        print(
            f"stored ({'replaced' if ack.replaced else 'new'}); "
            f"{ack.submissions_for_image} submission(s) for {args.image}"
        )
    elif args.label_cmd == "status":
        status, label = store.image_status(args.image)
        line = status.value
        if label is not None:
            line += ": " + textio.format_label_inline(label)
        print(line)
    else:  # verified
        verified, conflicts = store.verified_labels()
        for image_id, label in verified.items():
            print(f"{image_id}\t{textio.format_label_inline(label)}")
        for image_id in conflicts:
            print(f"# CONFLICT {image_id}", file=sys.stderr)
    return 0


def cmd_pretrain_backbone(args) -> int:
    config = _load_config(args)
    started = time.time()
    backbone = pretrain_conv_backbone(args.out, seed=config.seed)
    print(
        f"pretrained conv backbone -> {args.out} "
        f"(digest {backbone.digest[:12]}, {time.time() - started:.0f}s)"
    )
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    records = _load_records(args.data)
    registry = ModelRegistry(args.model_root)
    split = holdout_split(records, args.train_fraction, seed=config.seed)
    by_id = {r.image_id: r for r in records}
    train_records = [by_id[i] for i in split.train]

    if args.model == "uniform":
        backbone = _backbone(args, config)
        labels = [r.ground_truth.uniform_flag for r in train_records]
        tc = TrainConfig(seed=config.seed, epochs=args.epochs)
        model = train_uniform(train_records, labels, tc, backbone)
        version = args.version or _next_version(registry, "uniform")
        entry = registry.register("uniform", version, model.to_artifact())
    else:
        from ..attributes import train_attribute_net

        if args.labels_journal:
            store = LabelStore((r.image_id for r in records), journal_path=args.labels_journal)
            verified, conflicts = store.verified_labels()
            train_records = [r for r in train_records if r.image_id in verified]
            if not train_records:
                raise ConfigError("no verified labels cover the training split")
            labels = [verified[r.image_id] for r in train_records]
            if conflicts:
                print(f"skipping {len(conflicts)} conflicted image(s)", file=sys.stderr)
        else:
            if any(r.ground_truth is None for r in train_records):
                raise ConfigError(
                    "dataset has records without ground truth; pass --labels-journal "
                    "with verified annotator labels"
                )
            labels = [r.ground_truth.label for r in train_records]
        blocks = np.stack([resize_uint8(r) for r in train_records])
        ac = AttributeTrainConfig(seed=config.seed, epochs=args.epochs)
        net = train_attribute_net(
            blocks, labels, ac, image_ids=[r.image_id for r in train_records]
        )
        version = args.version or _next_version(registry, "attribute")
        entry = registry.register("attribute", version, net.to_artifact())
    print(f"registered {entry.kind} {entry.version} ({entry.filename})")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    records = _load_records(args.data)

    if args.protocol == "holdout":
        registry = ModelRegistry(args.model_root)
        backbone = _backbone(args, config)
        entry = registry.latest("uniform", args.version)
        model = UniformModel.from_artifact(registry.load_artifact(entry)).bind_backbone(backbone)
        split = holdout_split(records, args.train_fraction, seed=config.seed)
        metrics = run_holdout_eval(model, split, records, threshold=config.uniform_threshold)
        print(render_metric_table([("holdout", metrics)]))
        if args.report:
            Path(args.report).write_text(encode_metricset(metrics))
        if args.min_accuracy is not None and metrics.accuracy < args.min_accuracy:
            print(f"FAIL accuracy {metrics.accuracy:.4f} < {args.min_accuracy}")
            return 1
        return 0

    if args.protocol == "loso":
        school_registry = textio.decode_registry(Path(args.schools).read_text())
        backbone = _backbone(args, config)
        tc = TrainConfig(seed=config.seed, epochs=args.epochs)
        report = run_loso_study(
            records, school_registry, tc, backbone, threshold=config.uniform_threshold
        )
        rows = [(f"fold {f.held_out_school} seen", f.seen) for f in report.folds]
        rows += [(f"fold {f.held_out_school} unseen", f.unseen) for f in report.folds]
        print(render_metric_table(rows))
        gap = report.gap("accuracy")
        print(
            f"mean accuracy: seen {report.mean('accuracy', 'seen'):.4f} "
            f"unseen {report.mean('accuracy', 'unseen'):.4f} gap {gap:+.4f}"
        )
        if args.report:
            Path(args.report).write_text(encode_loso_report(report))
        if args.max_gap is not None and gap > args.max_gap:
            print(f"FAIL accuracy gap {gap:.4f} > {args.max_gap}")
            return 1
        return 0

    # attributes
    labels = {
        r.image_id: r.ground_truth.label for r in records if r.ground_truth is not None
    }
    ac = AttributeTrainConfig(seed=config.seed, epochs=args.epochs)
    report = run_attribute_comparison(records, labels, ac, train_fraction=args.train_fraction)
    print(f"{'item':<12} {'model':>7} {'single':>7} {'rand-exp':>9} {'rand-samp':>10}")
    for row in report.rows:
        print(
            f"{row.item.name:<12} {row.model_accuracy:>7.4f} "
            f"{row.single_label_accuracy:>7.4f} {row.random_expected:>9.4f} "
            f"{row.random_sampled:>10.4f}"
        )
    if args.report:
        Path(args.report).write_text(encode_attribute_report(report))
    if args.require_beats_random and any(
        row.model_accuracy <= row.random_expected for row in report.rows
    ):
        print("FAIL: model does not beat the random baseline on every item")
        return 1
    return 0


def cmd_predict(args) -> int:
    config = _load_config(args)
    runtime = PipelineRuntime.from_config(config)
    if args.batch:
        summary, _cases = run_batch(args.image, runtime)
        print(
            f"processed {summary.processed}/{summary.total_files}: "
            f"{summary.uniform_positive} uniform, {summary.uniform_negative} non-uniform, "
            f"{len(summary.failures)} failed"
        )
        for name, reason in summary.failures:
            print(f"failed: {name} ({reason})")
    else:
        case = run_pipeline(Path(args.image).read_bytes(), runtime, image_ref=Path(args.image).name)
        print(json.dumps(case.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_search(args) -> int:
    registry = textio.decode_registry(Path(args.schools).read_text())
    dist = textio.decode_distribution(Path(args.distribution).read_text())
    query = SearchQuery(
        distribution=dist,
        region_filter=frozenset(args.region.split(",")) if args.region else None,
        max_mismatches=args.max_mismatches,
        top_n=args.top,
    )
    result = run_search(registry, query)
    print(f"registry digest: {result.registry_digest}")
    for rank, entry in enumerate(result.ranking, 1):
        print(
            f"{rank:>3}. {entry.school_id} variant {entry.variant_index} "
            f"score {entry.score:.4f} mismatches {entry.mismatch_count}"
        )
    return 0


def cmd_serve(args) -> int:
    config = _load_config(args)
    runtime = PipelineRuntime.from_config(config)
    from .httpapi import serve

    serve(runtime)
    return 0


def cmd_registry(args) -> int:
    registry = ModelRegistry(args.model_root)
    if args.registry_cmd == "list":
        for e in registry.entries():
            print(
                f"{e.kind:<12} {e.version:<8} {e.filename:<28} "
                f"{e.artifact_sha256[:12]} {e.created} {e.metrics}"
            )
        return 0
    problems = registry.verify()
    for p in problems:
        print(f"PROBLEM: {p}")
    if problems:
        return 9
    print(f"registry OK ({len(registry.entries())} entries)")
    return 0


def cmd_bench(args) -> int:
    from ..nnkern import conv_numpy

    try:
        from ..nnkern import _conv_cy
    except ImportError:
        print("compiled kernel not built; only numpy timings available")
        _conv_cy = None  # type: ignore[assignment]

    shapes = [
        ((args.batch, 3, 224, 224), (8, 3, 3, 3)),
        ((args.batch, 8, 112, 112), (16, 8, 3, 3)),
        ((args.batch, 16, 56, 56), (32, 16, 3, 3)),
        ((args.batch, 32, 28, 28), (32, 32, 3, 3)),
    ]
    rng = np.random.default_rng(0)
    print(f"active backend: {nnkern.backend_name()}")
    print(f"{'shape':<38} {'impl':<8} {'fwd ms':>8} {'bwd ms':>8}")
    for xs, ws in shapes:
        x = rng.normal(size=xs).astype(np.float32)
        w = rng.normal(size=ws).astype(np.float32)
        b = np.zeros(ws[0], dtype=np.float32)
        impls = [("numpy", conv_numpy)] + ([("cython", _conv_cy)] if _conv_cy else [])
        for name, mod in impls:
            t0 = time.time()
            y = mod.conv2d_forward(x, w, b, 2, 1)
            fwd = (time.time() - t0) * 1000
            dy = np.ones_like(y)
            t0 = time.time()
            mod.conv2d_backward(x, w, dy, 2, 1)
            bwd = (time.time() - t0) * 1000
            print(f"{str(xs) + 'x' + str(ws):<38} {name:<8} {fwd:>8.1f} {bwd:>8.1f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    # --config/--seed are accepted both before and after the subcommand;
    # SUPPRESS keeps a pre-subcommand value from being clobbered by the
    # subparser's default.
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=argparse.SUPPRESS, help="pipeline config file")
    shared.add_argument(
        "--seed", type=int, default=argparse.SUPPRESS, help="override the config seed"
    )
    parser = argparse.ArgumentParser(prog="uniformid", parents=[shared])
    parser.set_defaults(config=None, seed=None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_SubParser)

    p = sub.add_parser("generate-data", help="render a synthetic ground-truthed dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--schools", type=int, default=10)
    p.add_argument("--images-per-school", type=int, default=100)
    p.add_argument("--nonuniform", type=int, default=1000)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("ingest", help="ingest a local image folder")
    p.add_argument("--folder", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label", help="submit and inspect annotator labels")
    p.add_argument("--data", required=True)
    p.add_argument("--journal", required=True)
    lsub = p.add_subparsers(dest="label_cmd", required=True)
    ps = lsub.add_parser("submit")
    ps.add_argument("--image", required=True)
    ps.add_argument("--annotator", required=True)
    ps.add_argument("--label", required=True, help='e.g. "SHIRT=WHITE TROUSERS=BLACK_GREY ..."')
    pst = lsub.add_parser("status")
    pst.add_argument("--image", required=True)
    lsub.add_parser("verified")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("pretrain-backbone", help="pretrain the CNN backbone weights file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain_backbone)

    p = sub.add_parser("train", help="train and register a model")
    p.add_argument("model", choices=["uniform", "attributes"])
    p.add_argument("--data", required=True)
    p.add_argument("--model-root", required=True)
    p.add_argument("--backbone")
    p.add_argument("--backbone-weights")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--version")
    p.add_argument(
        "--labels-journal",
        help="train attributes on verified annotator labels instead of ground truth",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    p.add_argument("protocol", choices=["holdout", "loso", "attributes"])
    p.add_argument("--data", required=True)
    p.add_argument("--model-root")
    p.add_argument("--schools")
    p.add_argument("--backbone")
    p.add_argument("--backbone-weights")
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--version")
    p.add_argument("--report")
    p.add_argument("--min-accuracy", type=float)
    p.add_argument("--max-gap", type=float)
    p.add_argument("--require-beats-random", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="run the pipeline on one image or a folder")
    p.add_argument("--image", required=True)
    p.add_argument("--batch", action="store_true", help="treat --image as a folder")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("search", help="rank schools for a stored distribution")
    p.add_argument("--schools", required=True)
    p.add_argument("--distribution", required=True)
    p.add_argument("--region")
    p.add_argument("--max-mismatches", type=int)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("serve", help="run the local triage HTTP service")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("registry", help="inspect the model registry")
    p.add_argument("registry_cmd", choices=["list", "verify"])
    p.add_argument("--model-root", required=True)
    p.set_defaults(func=cmd_registry)

    p = sub.add_parser("bench", help="benchmark the compiled vs numpy conv kernels")
    p.add_argument("--batch", type=int, default=16)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UniformIdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
