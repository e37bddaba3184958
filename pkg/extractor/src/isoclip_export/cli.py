"""isoclip-export <kind> --model <id> --inputs <path> --out <dir>"""

from __future__ import annotations

import argparse
import sys

from .export import KIND_HANDLERS, ExportJob, run_job
from .models import UnsupportedModelError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoclip-export",
        description="Export projector weights, MLP-head parameters or "
                    "pre-projection embeddings from a pretrained checkpoint",
    )
    parser.add_argument("kind", choices=sorted(KIND_HANDLERS))
    parser.add_argument("--model", required=True,
                        help="checkpoint path or hub identifier")
    parser.add_argument("--inputs",
                        help="image directory (class per subdirectory) or caption file; "
                             "required for embedding kinds")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--name", default="export", help="basename for embedding files")
    parser.add_argument("--batch-size", type=int, default=8)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.kind.endswith("_embeddings") and not args.inputs:
        print("error: --inputs is required for embedding export", file=sys.stderr)
        return 2
    job = ExportJob(model_id=args.model, kind=args.kind, out_dir=args.out,
                    inputs=args.inputs, batch_size=args.batch_size, name=args.name)
    try:
        meta = run_job(job)
    except (UnsupportedModelError, ValueError, OSError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    print(f"exported {args.kind} -> {args.out}")
    for key, value in sorted(meta.items()):
        print(f"  {key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
