"""Command-line surface: synthetic data generation, splitting, training,
embedding export, retrieval evaluation, tagging probe, and the gradient
verification suite.

Exit codes: 0 success, 1 verification or runtime failure, 2 format error,
3 configuration error. Log verbosity comes from EMOCLIM_LOG
(error|info|debug, default error).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data as d
from . import gradcheck
from .embedding import JointEmbedding
from .errors import (
    ConfigurationError,
    EmoclimError,
    FormatError,
    IntegrityError,
    TaxonomyError,
)
from .evaluation import ProbeConfig, evaluate_retrieval, probe_logits, tag_metrics, train_tag_probe
from .training import TrainConfig, eval_embed_matrix, heads_from_checkpoint, train

logger = logging.getLogger("emoclim.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_FORMAT = 2
EXIT_CONFIG = 3


def _setup_logging() -> None:
    level_name = os.environ.get("EMOCLIM_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ConfigurationError(f"EMOCLIM_LOG must be error|info|debug, got '{level_name}'")
    logging.basicConfig(level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_synth(args) -> int:
    cfg = d.SyntheticConfig(per_class=args.per_class, image_dim=args.image_dim,
                            audio_dim=args.audio_dim, image_chunks=args.image_chunks,
                            audio_chunks=args.audio_chunks, sigma=args.sigma,
                            seed=args.seed)
    image_records, audio_records = d.generate_synthetic(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d.write_feature_file(str(out / "image.emof"), d.Modality.IMAGE,
                         d.IMAGE_TAXONOMY, image_records)
    d.write_feature_file(str(out / "audio.emof"), d.Modality.AUDIO,
                         d.MUSIC_TAXONOMY, audio_records)
    for name, taxonomy, records in (("image", d.IMAGE_TAXONOMY, image_records),
                                    ("audio", d.MUSIC_TAXONOMY, audio_records)):
        unified = d.unify_records(taxonomy, records)
        split = d.stratified_split(unified, args.seed)
        d.save_split(str(out / f"{name}_split.json"), split)
    print(f"wrote {len(image_records)} image and {len(audio_records)} audio records to {out}")
    return EXIT_OK


def cmd_split(args) -> int:
    _, taxonomy, records = d.read_feature_file(args.features)
    unified = d.unify_records(taxonomy, records)
    if not unified:
        raise ConfigurationError("no records remain after dropping unmapped labels")
    split = d.stratified_split(unified, args.seed)
    d.save_split(args.out, split)
    print(f"split {len(unified)} records into {len(split.train)}/{len(split.val)}"
          f"/{len(split.test)} (train/val/test)")
    return EXIT_OK


_CONFIG_PATH_KEYS = ("image_features", "audio_features", "image_split", "audio_split",
                     "out", "log_out")


def _load_run_config(args) -> tuple[TrainConfig, dict]:
    """Merge the optional JSON config with CLI flags; flags win."""
    doc: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(TrainConfig)} | set(_CONFIG_PATH_KEYS)
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    paths = {key: getattr(args, key, None) or doc.get(key) for key in _CONFIG_PATH_KEYS}

    cfg_fields = {f.name for f in dataclasses.fields(TrainConfig)}
    merged = {k: v for k, v in doc.items() if k in cfg_fields}
    for key in cfg_fields:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if "lambdas" in merged:
        merged["lambdas"] = tuple(merged["lambdas"])
    merged["checkpoint_path"] = paths["out"]
    try:
        return TrainConfig(**merged), paths
    except TypeError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from exc


def cmd_train(args) -> int:
    cfg, paths = _load_run_config(args)
    for key in ("image_features", "audio_features", "image_split", "audio_split", "out"):
        if not paths[key]:
            raise ConfigurationError(f"missing required path: --{key.replace('_', '-')}")
    _, _, image_records = d.load_unified(paths["image_features"])
    _, _, audio_records = d.load_unified(paths["audio_features"])
    image_split = d.load_split(paths["image_split"])
    audio_split = d.load_split(paths["audio_split"])
    log_out = paths["log_out"] or f"{paths['out']}.log.jsonl"
    result = train(image_records, audio_records, image_split, audio_split, cfg,
                   log_path=log_out)
    print(f"best epoch {result.best_epoch} with val_loss {result.best_val_loss:.6f}; "
          f"checkpoint at {paths['out']}")
    return EXIT_OK


def _embed_test_pool(head, records, split, modality) -> list[JointEmbedding]:
    pool = d.select_records(records, split.test)
    if not pool:
        raise ConfigurationError("empty test split")
    vectors = eval_embed_matrix(head, pool)
    return [JointEmbedding(vectors[i], modality, rec.label, rec.item_id)
            for i, rec in enumerate(pool)]


def cmd_eval_retrieval(args) -> int:
    tensors, config = d.load_checkpoint(args.ckpt)
    image_head, audio_head, _ = heads_from_checkpoint(tensors, config)
    _, _, image_records = d.load_unified(args.image_features)
    _, _, audio_records = d.load_unified(args.audio_features)
    image_embs = _embed_test_pool(image_head, image_records,
                                  d.load_split(args.image_split), d.Modality.IMAGE)
    audio_embs = _embed_test_pool(audio_head, audio_records,
                                  d.load_split(args.audio_split), d.Modality.AUDIO)
    report = evaluate_retrieval(image_embs, audio_embs, k=args.k, n_threads=args.threads)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
        fh.write("\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(report.csv_lines()) + "\n")
    for name, res in report.directions.items():
        print(f"{name}: macro P@{args.k}={res.macro_precision:.4f} "
              f"macro MRR={res.macro_mrr:.4f}")
    return EXIT_OK


def _embed_matrix_threaded(head, records, n_threads: int) -> np.ndarray:
    """Eval-mode embedding with optional record-block parallelism; blocks
    are independent in eval mode and concatenated in order, so results are
    identical for any worker count."""
    if n_threads <= 1 or len(records) < 2 * n_threads:
        return eval_embed_matrix(head, records)
    from concurrent.futures import ThreadPoolExecutor

    size = (len(records) + n_threads - 1) // n_threads
    blocks = [records[i:i + size] for i in range(0, len(records), size)]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        parts = list(pool.map(lambda block: eval_embed_matrix(head, block), blocks))
    return np.concatenate(parts, axis=0)


def cmd_embed(args) -> int:
    tensors, config = d.load_checkpoint(args.ckpt)
    image_head, audio_head, _ = heads_from_checkpoint(tensors, config)
    modality, taxonomy, records = d.read_feature_file(args.features)
    head = image_head if modality == d.Modality.IMAGE else audio_head
    out_records = []
    if records:
        vectors = _embed_matrix_threaded(head, records, args.threads)
        out_records = [
            d.FeatureRecord(rec.item_id, rec.source_label, vectors[i][None, :])
            for i, rec in enumerate(records)
        ]
    d.write_feature_file(args.out, modality, taxonomy, out_records,
                         feature_dim=head.embed_dim)
    print(f"embedded {len(out_records)} records into {args.out}")
    return EXIT_OK


def cmd_probe_tagging(args) -> int:
    tensors, config = d.load_checkpoint(args.ckpt)
    _, audio_head, _ = heads_from_checkpoint(tensors, config)
    _, _, records = d.read_feature_file(args.tagged_features)
    tags_path = args.tags or f"{args.tagged_features}.emot"
    tag_ids, tag_rows = d.read_tag_file(tags_path)
    tags_by_id = {i: row for i, row in zip(tag_ids, tag_rows)}
    split = d.load_split(args.split)

    def subset(ids: list[str]):
        by_id = {rec.item_id: rec for rec in records}
        missing = [i for i in ids if i not in by_id or i not in tags_by_id]
        if missing:
            raise IntegrityError(f"{len(missing)} ids missing features or tags, "
                                 f"first: '{missing[0]}'")
        recs = [by_id[i] for i in ids]
        return (eval_embed_matrix(audio_head, recs),
                np.stack([tags_by_id[i] for i in ids]).astype(np.float32))

    train_x, train_y = subset(split.train)
    test_x, test_y = subset(split.test)
    probe_cfg = ProbeConfig(hidden_dim=args.hidden, lr=args.lr, epochs=args.epochs,
                            batch_size=args.batch_size, seed=args.seed)
    probe = train_tag_probe(train_x, train_y, probe_cfg)
    scores = probe_logits(probe, test_x)
    roc, pr, macro_roc, macro_pr = tag_metrics(scores, test_y)
    doc = {
        "n_train": len(split.train),
        "n_test": len(split.test),
        "n_tags": int(test_y.shape[1]),
        "macro_roc_auc": macro_roc,
        "macro_pr_auc": macro_pr,
        "per_tag": [{"roc_auc": r, "pr_auc": p} for r, p in zip(roc, pr)],
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"macro ROC-AUC={macro_roc:.4f} macro PR-AUC={macro_pr:.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite(seed=args.seed, n_seeds=args.n_seeds,
                                  perturb=args.perturb)
    worst = max(results, key=lambda r: r.max_rel_error)
    for res in results:
        status = "ok" if res.max_rel_error < args.tol else "FAIL"
        print(f"{status:4s} {res.name:28s} max rel error {res.max_rel_error:.3e}")
    print(f"worst: {worst.name} with max rel error {worst.max_rel_error:.6e}")
    if worst.max_rel_error >= args.tol:
        print(f"verification FAILED at tolerance {args.tol:g}")
        return EXIT_FAILURE
    print(f"all gradients verified at tolerance {args.tol:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emoclim",
        description=__doc__,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="generate paired synthetic feature files + splits",
                       formatter_class=fmt)
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--per-class", type=int, default=100, help="items per emotion class")
    p.add_argument("--image-dim", type=int, default=64, help="image feature dimension")
    p.add_argument("--audio-dim", type=int, default=64, help="audio feature dimension")
    p.add_argument("--image-chunks", type=int, default=1, help="crops per image record")
    p.add_argument("--audio-chunks", type=int, default=1, help="chunks per audio record")
    p.add_argument("--sigma", type=float, default=0.25, help="within-class feature noise")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("split", help="stratified 80/10/10 split of a feature file",
                       formatter_class=fmt)
    p.add_argument("--features", required=True, help="EMOF feature file")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--out", required=True, help="output split JSON")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("train", help="train both projection heads", formatter_class=fmt)
    p.add_argument("--config", default=None, help="JSON run config (flags override)")
    p.add_argument("--image-features", default=None, help="image EMOF file")
    p.add_argument("--audio-features", default=None, help="audio EMOF file")
    p.add_argument("--image-split", default=None, help="image split JSON")
    p.add_argument("--audio-split", default=None, help="audio split JSON")
    p.add_argument("--out", default=None, help="output checkpoint path")
    p.add_argument("--log-out", default=None,
                   help="training log path (default: <out>.log.jsonl)")
    p.add_argument("--embed-dim", type=int, default=None, dest="embed_dim",
                   help="joint space dimension (default 128)")
    p.add_argument("--hidden-dim", type=int, default=None, dest="hidden_dim",
                   help="head hidden width (default: input width)")
    p.add_argument("--temperature", type=float, default=None, help="softmax temperature")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size",
                   help="items per modality per step (default 64)")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 1e-4)")
    p.add_argument("--weight-decay", type=float, default=None, dest="weight_decay",
                   help="decoupled weight decay (default 0.01)")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default 15)")
    p.add_argument("--dropout", type=float, default=None, help="dropout rate (default 0.5)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval-retrieval", help="four-direction retrieval report",
                       formatter_class=fmt)
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--image-features", required=True, help="image EMOF file")
    p.add_argument("--audio-features", required=True, help="audio EMOF file")
    p.add_argument("--image-split", required=True, help="image split JSON")
    p.add_argument("--audio-split", required=True, help="audio split JSON")
    p.add_argument("--k", type=int, default=5, help="precision cutoff")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--csv", default=None, help="optional CSV summary path")
    p.add_argument("--threads", type=int, default=1, help="query worker cap")
    p.set_defaults(fn=cmd_eval_retrieval)

    p = sub.add_parser("embed", help="write joint embeddings as an EMOF file",
                       formatter_class=fmt)
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--features", required=True, help="input EMOF file")
    p.add_argument("--out", required=True, help="output EMOF file (C=1, D=embed_dim)")
    p.add_argument("--threads", type=int, default=1, help="record-block worker cap")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("probe-tagging", help="train and score the tagging probe",
                       formatter_class=fmt)
    p.add_argument("--ckpt", required=True, help="trained checkpoint (audio head)")
    p.add_argument("--tagged-features", required=True, help="audio EMOF file")
    p.add_argument("--tags", default=None,
                   help="EMOT tag sidecar (default: <tagged-features>.emot)")
    p.add_argument("--split", required=True, help="split JSON for the tagged items")
    p.add_argument("--out", required=True, help="output metrics JSON")
    p.add_argument("--hidden", type=int, default=512, help="probe hidden width")
    p.add_argument("--epochs", type=int, default=100, help="probe training epochs")
    p.add_argument("--lr", type=float, default=1e-3, help="probe learning rate")
    p.add_argument("--batch-size", type=int, default=128, help="probe batch size")
    p.add_argument("--seed", type=int, default=0, help="probe seed")
    p.set_defaults(fn=cmd_probe_tagging)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences",
                       formatter_class=fmt)
    p.add_argument("--seed", type=int, default=0, help="suite seed")
    p.add_argument("--n-seeds", type=int, default=20, help="random instances per case")
    p.add_argument("--tol", type=float, default=1e-4, help="max allowed relative error")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="test hook: corrupt analytic gradients by this amount")
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except (FormatError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigurationError, TaxonomyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmoclimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
