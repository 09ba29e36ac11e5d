"""Command-line entry point: emoclim-extract."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ExtractorError
from .jobs import ExtractorJob, extract, extract_tagged


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emoclim-extract",
        description="Extract frozen-encoder features into EMOF files",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def common(p):
        p.add_argument("--manifest", required=True,
                       help="CSV: item_id, media_path, source_label[, tags[, split]]")
        p.add_argument("--modality", required=True, choices=("image", "audio"))
        p.add_argument("--encoder", required=True,
                       help="histogram | melstats | clip | clap")
        p.add_argument("--out", required=True, help="output EMOF path")
        p.add_argument("--crop-policy", default="center", choices=("center", "random"),
                       help="image crop policy")
        p.add_argument("--crops", type=int, default=4,
                       help="random crops per image (plus the center crop)")
        p.add_argument("--window", type=float, default=None,
                       help="audio window seconds (default: encoder's expectation)")
        p.add_argument("--overlap", type=float, default=0.75,
                       help="audio window overlap ratio")
        p.add_argument("--seed", type=int, default=0, help="crop sampling seed")

    p = sub.add_parser("extract", help="features only", formatter_class=fmt)
    common(p)
    p.set_defaults(tagged=False)

    p = sub.add_parser("extract-tagged", help="features plus tag sidecar",
                       formatter_class=fmt)
    common(p)
    p.add_argument("--tags-out", required=True, help="output EMOT path")
    p.add_argument("--vocab-size", type=int, default=50, help="tag vocabulary size")
    p.add_argument("--vocab-out", default=None, help="optional tag list text file")
    p.add_argument("--split-out", default=None,
                   help="optional engine split JSON from the manifest's split column")
    p.set_defaults(tagged=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    job = ExtractorJob(
        modality=args.modality,
        encoder=args.encoder,
        manifest_path=args.manifest,
        output_path=args.out,
        crop_policy=args.crop_policy,
        n_random_crops=args.crops,
        window_s=args.window,
        overlap=args.overlap,
        seed=args.seed,
    )
    try:
        if args.tagged:
            count, vocab = extract_tagged(job, args.tags_out, args.vocab_size,
                                          args.vocab_out, args.split_out)
            print(f"extracted {count} records with {len(vocab)} tags")
        else:
            count = extract(job)
            print(f"extracted {count} records")
        return 0
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
