"""Command-line surface for the noise auditing toolkit.

Every subcommand is deterministic given its flags and inputs, reads and
writes only explicitly named paths, and exits 0 on success, 2 on usage
errors, 3 on input validation errors, and 4 on I/O failures. Validation
errors are emitted as one JSON object on stderr. NOISEAUDIT_THREADS caps
internal worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import core, detect, metrics, synthbench, transforms, vecstore
from .core import NoiseAuditError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def _load_label_space(args) -> core.LabelSpace:
    return core.LabelSpace.from_file(args.labels)


def _load_splits(args, ls: core.LabelSpace) -> core.Dataset:
    if not (args.train or args.dev or args.test):
        raise NoiseAuditError("give at least one of --train/--dev/--test")
    return core.load_splits(ls, train=args.train, dev=args.dev, test=args.test)


def _add_dataset_args(p: argparse.ArgumentParser, required_labels: bool = True):
    p.add_argument("--labels", required=required_labels, help="label-space file (one label per line)")
    p.add_argument("--train", help="train split JSONL file")
    p.add_argument("--dev", help="dev split JSONL file")
    p.add_argument("--test", help="test split JSONL file")


def _aligned_predictions(dataset: core.Dataset, preds: vecstore.PredictionSet, ls: core.LabelSpace):
    if preds.label_order != ls.labels:
        raise NoiseAuditError("prediction label order does not match the label-space file")
    gold, pred_labels, rows = [], [], []
    for inst in dataset.instances:
        row = preds.row(inst.id)
        gold.append(inst.relation)
        rows.append(row)
        pred_labels.append(preds.label_order[int(row.argmax())])
    import numpy as np

    aligned = vecstore.PredictionSet(dataset.ids, preds.label_order, np.vstack(rows))
    return gold, pred_labels, aligned


def _read_predictions(path) -> vecstore.PredictionSet:
    mset = vecstore.read_matrix(path)
    if not isinstance(mset, vecstore.PredictionSet):
        raise NoiseAuditError(f"{path}: expected a predictions file (kind 1)")
    return mset


def _read_embeddings(path) -> vecstore.EmbeddingSet:
    mset = vecstore.read_matrix(path)
    if not isinstance(mset, vecstore.EmbeddingSet):
        raise NoiseAuditError(f"{path}: expected an embeddings file (kind 0)")
    return mset


def _emit(args, payload: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(payload + ("" if payload.endswith("\n") else "\n"), encoding="utf-8")
    else:
        print(payload)


def _counts_dict(dataset: core.Dataset) -> dict:
    return {
        s: {"positive": c.positive, "negative": c.negative, "total": c.total}
        for s, c in core.split_counts(dataset).items()
    }


def _write_variant(dataset: core.Dataset, out_dir: str, report: dict):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for split in core.SPLITS:
        if any(inst.split == split for inst in dataset.instances):
            path = out / f"{split}.jsonl"
            core.write_dataset(dataset, path, split=split)
            written[split] = str(path)
    report["files"] = written
    report["counts_after"] = _counts_dict(dataset)
    (out / "variant_report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def cmd_analyze_score(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    gold, pred_labels, _ = _aligned_predictions(dataset, _read_predictions(args.pred), ls)
    report = metrics.score(gold, pred_labels, ls)
    _emit(args, report.to_text() if args.format == "text" else report.to_json())
    return EXIT_OK


def cmd_analyze_confusion(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    gold, pred_labels, _ = _aligned_predictions(dataset, _read_predictions(args.pred), ls)
    cm = metrics.confusion(gold, pred_labels, ls)
    if args.csv:
        Path(args.csv).write_text(cm.to_csv(percent=args.percent), encoding="utf-8")
    _emit(args, json.dumps(cm.to_dict(), indent=2))
    return EXIT_OK


def cmd_analyze_topk(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    gold, _, aligned = _aligned_predictions(dataset, _read_predictions(args.pred), ls)
    report = metrics.topk_rescore(aligned, gold, args.k, ls)
    _emit(args, report.to_text() if args.format == "text" else report.to_json())
    return EXIT_OK


def cmd_analyze_seeds(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    gold, pred_labels, _ = _aligned_predictions(dataset, _read_predictions(args.pred), ls)
    seeds = detect.extract_seeds(gold, pred_labels, list(dataset.ids), ls)
    _emit(args, json.dumps(seeds.to_dict(), indent=2))
    return EXIT_OK


def cmd_detect_intrinsic(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    embeddings = _read_embeddings(args.emb)
    gold, pred_labels, _ = _aligned_predictions(dataset, _read_predictions(args.pred), ls)
    manifest = detect.intrinsic_pipeline(dataset, embeddings, gold, pred_labels, args.k, pool=args.pool)
    if args.source_note:
        manifest.provenance["source"] = args.source_note
    core.write_manifest(manifest, args.out)
    print(f"wrote {args.out}: {len(manifest.eliminate)} ids marked")
    return EXIT_OK


def _load_clean(args, ls: core.LabelSpace):
    clean_ls = core.LabelSpace.from_file(args.clean_labels) if args.clean_labels else ls
    clean_ds = core.load_dataset(args.clean_data, clean_ls, split="train")
    clean_emb = _read_embeddings(args.clean_emb)
    if args.mapping:
        mapping = json.loads(Path(args.mapping).read_text(encoding="utf-8"))
        if not isinstance(mapping, dict):
            raise NoiseAuditError(f"{args.mapping}: mapping file must be a JSON object")
    else:
        mapping = {label: label for label in ls.labels}
    subset, report = detect.map_clean_subset(clean_ds, clean_emb, mapping, ls)
    return subset, report


def cmd_detect_es(args, relabel: bool) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    embeddings = _read_embeddings(args.emb)
    clean, map_report = _load_clean(args, ls)
    scope = detect.make_scope(args.scope, ls)
    if relabel:
        manifest = detect.extrinsic_relabel(
            dataset, embeddings, clean, args.k, scope, mode=args.mode, scope_note=args.scope
        )
    else:
        manifest = detect.extrinsic_eliminate(
            dataset, embeddings, clean, args.k, scope, scope_note=args.scope
        )
    manifest.provenance["clean_mapping"] = map_report.to_dict()
    if args.source_note:
        manifest.provenance["source"] = args.source_note
    core.write_manifest(manifest, args.out)
    print(f"wrote {args.out}: {len(manifest.detected_ids)} ids marked")
    return EXIT_OK


def cmd_apply(args, eliminate: bool) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    manifest = core.read_manifest(args.manifest, ls)
    report = {
        "operation": "apply-eliminate" if eliminate else "apply-relabel",
        "manifest": str(args.manifest),
        "manifest_digest": core.manifest_digest(args.manifest),
        "counts_before": _counts_dict(dataset),
    }
    if eliminate:
        variant, removed = transforms.apply_elimination(dataset, manifest)
        report["removed_per_split"] = removed
    else:
        variant, rr = transforms.apply_reannotation(dataset, manifest)
        report["changed_per_split"] = rr.changed
        report["noop_count"] = len(rr.noop_ids)
    _write_variant(variant, args.out_dir, report)
    print(f"wrote variant to {args.out_dir}")
    return EXIT_OK


def cmd_sample_downsample(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    try:
        a, b = (int(x) for x in args.ratio.split(":"))
    except ValueError:
        raise NoiseAuditError(f"--ratio must look like a:b, got {args.ratio!r}") from None
    splits = tuple(s for s in args.splits.split(",") if s)
    variant = transforms.downsample_negatives(dataset, (a, b), splits, seed=args.seed)
    report = {
        "operation": "downsample-negatives",
        "ratio": f"{a}:{b}",
        "splits": list(splits),
        "seed": args.seed,
        "counts_before": _counts_dict(dataset),
    }
    _write_variant(variant, args.out_dir, report)
    print(f"wrote variant to {args.out_dir}")
    return EXIT_OK


def cmd_collapse_binary(args) -> int:
    ls = _load_label_space(args)
    dataset = _load_splits(args, ls)
    variant = transforms.binary_collapse(dataset)
    report = {"operation": "binary-collapse", "counts_before": _counts_dict(dataset)}
    _write_variant(variant, args.out_dir, report)
    variant.label_space.to_file(Path(args.out_dir) / "labels.txt")
    print(f"wrote variant to {args.out_dir}")
    return EXIT_OK


def cmd_synth_generate(args) -> int:
    spec = synthbench.SynthSpec(
        args.classes, args.per_class, args.negatives, args.dim, args.separation, args.seed
    )
    dataset, embeddings = synthbench.generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    core.write_dataset(dataset, out / "data.jsonl")
    vecstore.write_matrix(embeddings, out / "embeddings.nrcm")
    dataset.label_space.to_file(out / "labels.txt")
    print(f"wrote {len(dataset)} instances to {out}")
    return EXIT_OK


def cmd_synth_inject(args) -> int:
    ls = _load_label_space(args)
    dataset = core.load_dataset(args.data, ls, split=args.split)
    flipped, ledger = synthbench.inject_false_negatives(dataset, args.rate, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    core.write_dataset(flipped, out / "data.jsonl")
    (out / "ledger.json").write_text(json.dumps(ledger.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"flipped {len(ledger)} instances; ledger at {out / 'ledger.json'}")
    return EXIT_OK


def cmd_synth_sweep(args) -> int:
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    rows = synthbench.run_sweep(config)
    Path(args.out).write_text(synthbench.sweep_csv(rows), encoding="utf-8")
    print(f"wrote {len(rows)} sweep rows to {args.out}")
    return EXIT_OK


def cmd_robustness_compare(args) -> int:
    manifests = [core.read_manifest(p) for p in args.manifests]
    id_sets = [set(m.detected_ids) for m in manifests]
    n = len(id_sets)
    all_ids = set().union(*id_sets) if id_sets else set()
    by_count: dict[str, list[str]] = {}
    for iid in sorted(all_ids):
        c = sum(1 for s in id_sets if iid in s)
        by_count.setdefault(str(c), []).append(iid)
    at_least = {
        str(j): sum(len(v) for c, v in by_count.items() if int(c) >= j) for j in range(1, n + 1)
    }
    pairwise = [
        {"a": i, "b": j, "common": len(id_sets[i] & id_sets[j])}
        for i in range(n) for j in range(i + 1, n)
    ]
    common_all = set.intersection(*id_sets) if id_sets else set()
    smallest = min(len(s) for s in id_sets) if id_sets else 0
    report = {
        "n_manifests": n,
        "sizes": [len(s) for s in id_sets],
        "pairwise_common": pairwise,
        "exact_count": {c: len(v) for c, v in by_count.items()},
        "at_least": at_least,
        "ids_by_count": by_count,
        "common_all": len(common_all),
        "common_all_fraction_of_smallest": (len(common_all) / smallest) if smallest else 0.0,
    }
    _emit(args, json.dumps(report, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.what == "matrix":
        mset = vecstore.read_matrix(args.path)
        kind = "predictions" if isinstance(mset, vecstore.PredictionSet) else "embeddings"
        print(f"ok: {kind}, {len(mset)} rows, dim {mset.rows.shape[1]}")
    elif args.what == "dataset":
        if not args.labels:
            raise NoiseAuditError("validate dataset requires --labels")
        ls = core.LabelSpace.from_file(args.labels)
        dataset = core.load_dataset(args.path, ls, split=args.split)
        print(f"ok: {len(dataset)} instances")
    else:
        ls = core.LabelSpace.from_file(args.labels) if args.labels else None
        manifest = core.read_manifest(args.path, ls)
        print(f"ok: {manifest.strategy}, {len(manifest.detected_ids)} ids")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noiseaudit",
        description="Label-noise auditing for classification datasets with a dominant negative class.",
        epilog=(
            "file formats: datasets are JSONL with the public TACRED field names "
            "(id, token, subj_start, subj_end, obj_start, obj_end, subj_type, "
            "obj_type, relation), one file per split; label-space files list one "
            "label per line with an optional first line 'negative=<name>'; "
            "matrices use the binary NRCM layout (kind 0 embeddings, kind 1 "
            "predictions); manifests are JSON objects with eliminate/relabel/"
            "provenance. NOISEAUDIT_THREADS caps worker count."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # analyze
    analyze = sub.add_parser("analyze", help="scoring and prediction analysis")
    asub = analyze.add_subparsers(dest="subcommand", required=True)
    for name, fn in (
        ("score", cmd_analyze_score),
        ("confusion", cmd_analyze_confusion),
        ("topk", cmd_analyze_topk),
        ("seeds", cmd_analyze_seeds),
    ):
        p = asub.add_parser(name, help=f"emit the {name} report")
        _add_dataset_args(p)
        p.add_argument("--pred", required=True, help="predictions matrix file (kind 1)")
        p.add_argument("--out", help="write the report here instead of stdout")
        if name in ("score", "topk"):
            p.add_argument("--format", choices=("json", "text"), default="json")
        if name == "topk":
            p.add_argument("--k", type=int, required=True, help="count gold in the top k as correct")
        if name == "confusion":
            p.add_argument("--csv", help="also write the matrix as CSV here")
            p.add_argument("--percent", action="store_true", help="CSV holds row percentages, not counts")
        p.set_defaults(fn=fn)

    # detect
    det = sub.add_parser("detect", help="noise identification strategies")
    dsub = det.add_subparsers(dest="subcommand", required=True)

    p = dsub.add_parser("intrinsic", help="nearest negatives of false-negative seeds")
    _add_dataset_args(p)
    p.add_argument("--emb", required=True, help="embeddings matrix file (kind 0)")
    p.add_argument("--pred", required=True, help="predictions matrix file (kind 1)")
    p.add_argument("--k", type=int, default=5, help="neighbors per seed (default 5)")
    p.add_argument("--pool", choices=("train", "own-split"), default="train",
                   help="negative pool: train negatives, or each split's own")
    p.add_argument("--source-note", help="free-text note on the embedding source")
    p.add_argument("--out", required=True, help="manifest output path")
    p.set_defaults(fn=cmd_detect_intrinsic)

    for name, relabel in (("es-eliminate", False), ("es-relabel", True)):
        p = dsub.add_parser(name, help=f"extrinsic {'reannotation' if relabel else 'elimination'} against a clean subset")
        _add_dataset_args(p)
        p.add_argument("--emb", required=True, help="embeddings matrix file (kind 0)")
        p.add_argument("--clean-data", required=True, help="clean subset JSONL file")
        p.add_argument("--clean-emb", required=True, help="clean subset embeddings (kind 0)")
        p.add_argument("--clean-labels", help="label space of the clean file (default: audited labels)")
        p.add_argument("--mapping", help="JSON object mapping clean labels to audited labels "
                                         "(default: identity over audited labels)")
        p.add_argument("--k", type=int, default=5, help="clean neighbors per instance (default 5)")
        p.add_argument("--scope", choices=("neg", "all"), default="neg",
                       help="audit negative-labeled instances only, or all labels")
        if relabel:
            p.add_argument("--mode", choices=detect.RELABEL_MODES, default="strict",
                           help="strict: all k neighbors unanimous; pseudocode: drop matching labels first")
        p.add_argument("--source-note", help="free-text note on the embedding source")
        p.add_argument("--out", required=True, help="manifest output path")
        p.set_defaults(fn=lambda a, relabel=relabel: cmd_detect_es(a, relabel))

    # apply
    app = sub.add_parser("apply", help="materialize dataset variants from manifests")
    appsub = app.add_subparsers(dest="subcommand", required=True)
    for name, eliminate in (("eliminate", True), ("relabel", False)):
        p = appsub.add_parser(name, help=f"{name} manifest ids in the dataset")
        _add_dataset_args(p)
        p.add_argument("--manifest", required=True, help="manifest JSON file")
        p.add_argument("--out-dir", required=True, help="directory for variant files and report")
        p.set_defaults(fn=lambda a, eliminate=eliminate: cmd_apply(a, eliminate))

    # sample
    samp = sub.add_parser("sample", help="dataset sampling")
    ssub = samp.add_subparsers(dest="subcommand", required=True)
    p = ssub.add_parser("downsample", help="keep a:b of the negatives in selected splits")
    _add_dataset_args(p)
    p.add_argument("--ratio", required=True, help="a:b, e.g. 1:5 keeps 20%% of negatives")
    p.add_argument("--splits", default="train,dev", help="comma-separated splits (test refused)")
    p.add_argument("--seed", type=int, required=True, help="sampling seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_sample_downsample)

    # collapse
    col = sub.add_parser("collapse", help="label-space collapses")
    csub = col.add_subparsers(dest="subcommand", required=True)
    p = csub.add_parser("binary", help="group all positive relations under one label")
    _add_dataset_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_collapse_binary)

    # synth
    syn = sub.add_parser("synth", help="synthetic benchmark")
    synsub = syn.add_subparsers(dest="subcommand", required=True)
    p = synsub.add_parser("generate", help="generate a clustered dataset + embeddings")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--negatives", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--separation", type=float, required=True,
                   help="anchor separation in units of the within-cluster standard deviation")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth_generate)

    p = synsub.add_parser("inject", help="flip positives to the negative label")
    p.add_argument("--labels", required=True)
    p.add_argument("--data", required=True, help="dataset JSONL file")
    p.add_argument("--split", choices=core.SPLITS, default="train")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth_inject)

    p = synsub.add_parser("sweep", help="grid-run detection quality cells from a config")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(fn=cmd_synth_sweep)

    # robustness
    rob = sub.add_parser("robustness", help="manifest stability across runs")
    rsub = rob.add_subparsers(dest="subcommand", required=True)
    p = rsub.add_parser("compare", help="pairwise and at-least-j overlap of manifests")
    p.add_argument("--manifests", nargs="+", required=True, help="two or more manifest files")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(fn=cmd_robustness_compare)

    # validate
    val = sub.add_parser("validate", help="format linting")
    val.add_argument("what", choices=("matrix", "dataset", "manifest"))
    val.add_argument("path")
    val.add_argument("--labels", help="label-space file (required for dataset)")
    val.add_argument("--split", choices=core.SPLITS, default="train")
    val.set_defaults(fn=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NoiseAuditError as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        path = getattr(exc, "filename", None)
        print(json.dumps({"error": "io", "message": str(exc), "path": path}), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
