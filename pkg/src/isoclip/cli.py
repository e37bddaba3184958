"""Command-line pipeline runner.

Every subcommand is a thin composition of library operations and writes a
JSON echo of its resolved configuration next to its outputs, which is
enough to replay the run bit-identically. CSV output is RFC-4180 with a
header row; JSON reports are pretty-printed with sorted keys.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import align, gradcheck, linearize, ncm, retrieval, spectral, synthdata, tensorio
from .errors import IsoclipError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _parse_range(text: str) -> list[int]:
    """start:stop:step with exclusive stop, or a comma list of ints."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (int(p) for p in parts)
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        return list(range(start, stop, step))
    return [int(p) for p in text.split(",") if p]


def _parse_int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _echo_config(out_dir: Path, command: str, args: argparse.Namespace):
    payload = {"command": command}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        payload[key] = str(value) if isinstance(value, Path) else value
    _write_json(out_dir / "run_config.json", payload)


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dtype(args):
    return np.float32 if args.precision == "f32" else np.float64


def _load_pair(args) -> tensorio.ProjectorPair:
    dtype = _dtype(args)
    return tensorio.ProjectorPair(
        w_i=tensorio.read_tensor(args.wi).astype(dtype),
        w_t=tensorio.read_tensor(args.wt).astype(dtype),
    )


def _load_head(path, args, modality: str) -> np.ndarray:
    """A head is either a single tensor file or an aligned-pair directory."""
    path = Path(path)
    if path.is_dir():
        pair, _ = align.load_aligned_pair(path)
        head = pair.w_i if modality == "image" else pair.w_t
    else:
        head = tensorio.read_tensor(path)
    return head.astype(_dtype(args))


def _load_features(args, dataset: tensorio.EmbeddingDataset) -> tensorio.EmbeddingDataset:
    dtype = _dtype(args)
    if dataset.features.dtype == dtype:
        return dataset
    return tensorio.EmbeddingDataset(
        features=dataset.features.astype(dtype),
        labels=dataset.labels,
        query_idx=dataset.query_idx,
        gallery_idx=dataset.gallery_idx,
        exclude_self=dataset.exclude_self,
        name=dataset.name,
    )


def cmd_spectrum(args):
    pair = _load_pair(args)
    op = align.inter_modal_operator(pair)
    out = _out_dir(args)
    rows = [(j, f"{s:.17g}") for j, s in enumerate(op.decomposition.s)]
    _write_csv(out / args.out, ["index", "singular_value"], rows)
    _echo_config(out, "spectrum", args)
    print(f"wrote {len(rows)} singular values (r={op.r}) to {out / args.out}")


def cmd_align(args):
    pair = _load_pair(args)
    op = align.inter_modal_operator(pair)
    band = align.select_band(op, args.kt, args.kb)
    aligned = align.align_projectors(pair, band, op=op)
    out = _out_dir(args)
    align.save_aligned(aligned, out)
    _echo_config(out, "align", args)
    print(f"aligned projectors (band [{band.k_t}, {band.r - band.k_b}) of r={band.r}) -> {out}")


def cmd_whiten(args):
    w = tensorio.read_tensor(args.wi).astype(np.float64)
    out = _out_dir(args)
    tensorio.write_tensor(out / args.out, spectral.whiten(w))
    _echo_config(out, "whiten", args)
    print(f"wrote whitened head to {out / args.out}")


def cmd_retrieve(args):
    dataset = _load_features(args, tensorio.load_dataset(args.manifest))
    head = _load_head(args.projector, args, args.modality)
    ks = _parse_int_list(args.p_at_k) if args.p_at_k else ()
    report = retrieval.evaluate_retrieval(head, dataset, ks=ks)
    out = _out_dir(args)
    _write_json(out / "retrieval_report.json", report.to_dict())
    _echo_config(out, "retrieve", args)
    print(f"mAP = {report.map:.6f} over {report.num_queries_scored} queries")
    for k, v in sorted(report.precision_at_k.items()):
        print(f"P@{k} = {v:.6f}")


def cmd_classify(args):
    train = _load_features(args, tensorio.load_dataset(args.train_manifest))
    test = _load_features(args, tensorio.load_dataset(args.test_manifest))
    head = _load_head(args.projector, args, "image")
    protos = ncm.compute_prototypes(head, train.features, train.labels)
    accuracy, predicted = ncm.classify(protos, head, test.features, test.labels)
    out = _out_dir(args)
    _write_json(out / "classification_report.json", {
        "accuracy": accuracy,
        "num_classes": int(protos.num_classes),
        "num_test": int(test.n),
        "predicted": [int(p) for p in predicted],
    })
    _echo_config(out, "classify", args)
    print(f"NCM accuracy = {accuracy:.6f} ({protos.num_classes} classes)")


def cmd_sweep(args):
    dataset = _load_features(args, tensorio.load_dataset(args.manifest))
    pair = _load_pair(args)
    if args.modality == "text":
        pair = pair.swapped()
    result = retrieval.sweep_band(pair, dataset, args.kt, args.kb)
    out = _out_dir(args)
    rows = []
    for i, k_t in enumerate(result.k_t_grid):
        for j, k_b in enumerate(result.k_b_grid):
            value = result.map_grid[i, j]
            rows.append((int(k_t), int(k_b), "" if np.isnan(value) else f"{value:.17g}"))
    _write_csv(out / "sweep_grid.csv", ["k_t", "k_b", "map"], rows)
    _write_json(out / "sweep_best.json", {
        "k_t": result.best_k_t, "k_b": result.best_k_b, "map": result.best_map,
    })
    _echo_config(out, "sweep", args)
    print(f"best (k_t, k_b) = ({result.best_k_t}, {result.best_k_b}), mAP = {result.best_map:.6f}")


def cmd_overlap(args):
    dataset = _load_features(args, tensorio.load_dataset(args.manifest))
    head = _load_head(args.projector, args, args.modality)
    projected = retrieval.project_and_normalize(head, dataset.features)
    s = retrieval.similarity_matrix(projected[dataset.query_idx], projected[dataset.gallery_idx])
    self_pairs = dataset.self_pairs() if dataset.exclude_self else None
    report = retrieval.overlap_report(
        s, dataset.query_labels, dataset.gallery_labels, bins=args.bins,
        exclude_self=dataset.exclude_self, self_pairs=self_pairs,
    )
    out = _out_dir(args)
    rows = [
        (f"{report.bin_edges[b]:.17g}", f"{report.bin_edges[b + 1]:.17g}",
         f"{report.pos_hist[b]:.17g}", f"{report.neg_hist[b]:.17g}")
        for b in range(args.bins)
    ]
    _write_csv(out / "overlap_hist.csv", ["bin_left", "bin_right", "pos_mass", "neg_mass"], rows)
    _write_json(out / "overlap_report.json", {
        "iou": report.iou, "pos_mean": report.pos_mean, "neg_mean": report.neg_mean,
    })
    _echo_config(out, "overlap", args)
    print(f"IoU = {report.iou:.6f} (pos mean {report.pos_mean:.4f}, neg mean {report.neg_mean:.4f})")


def cmd_bands(args):
    dataset = _load_features(args, tensorio.load_dataset(args.manifest))
    pair = _load_pair(args)
    if args.modality == "text":
        pair = pair.swapped()
    op = align.inter_modal_operator(pair)
    variants = align.band_variants(op, args.width)
    out = _out_dir(args)
    rows = []
    results = {}
    for label, band in zip(("top", "middle", "bottom"), variants):
        aligned = align.align_projectors(pair, band, op=op)
        report = retrieval.evaluate_retrieval(aligned.w_i_hat, dataset)
        rows.append((label, band.retained.start, band.retained.stop, f"{report.map:.17g}"))
        results[label] = report.map
    _write_csv(out / "bands.csv", ["band", "start", "stop", "map"], rows)
    _echo_config(out, "bands", args)
    for label, value in results.items():
        print(f"{label:>7}: mAP = {value:.6f}")


def cmd_gradcheck(args):
    report = gradcheck.run_gradcheck(instances=args.instances, dim=args.dim, seed=args.seed)
    out = _out_dir(args)
    _write_json(out / "gradcheck_report.json", report)
    _echo_config(out, "gradcheck", args)
    sim_max = report["similarity_grad"]["max_relative_error"]
    loss_max = report["loss_grad"]["max_relative_error"]
    print(f"max relative error: similarity {sim_max:.3e}, loss {loss_max:.3e}")


def cmd_linearize(args):
    params = linearize.load_mlp_head(args.params_dir)
    projector = linearize.linearize_head(params)
    out = _out_dir(args)
    tensorio.write_tensor(out / "w_eff.iso", projector.w_eff)
    rng = np.random.default_rng(args.seed)
    errors = [
        linearize.linearization_error(params, 0.1 * rng.standard_normal(params.n))
        for _ in range(args.probes)
    ]
    _write_json(out / "linearize_report.json", {
        "n": params.n,
        "probes": args.probes,
        "relative_error_mean": float(np.mean(errors)),
        "relative_error_max": float(np.max(errors)),
    })
    _echo_config(out, "linearize", args)
    print(f"wrote effective head {projector.w_eff.shape} "
          f"(probe error mean {np.mean(errors):.3e}, max {np.max(errors):.3e})")


def cmd_synth(args):
    spec = synthdata.PlantedSpec(
        d_i=args.di, d_t=args.dt, d=args.d,
        spectrum=synthdata.banded_spectrum(args.d, args.n_top, args.n_bottom),
        n_top=args.n_top, n_bottom=args.n_bottom,
        classes=args.classes, per_class=args.per_class,
        noise_sigma=args.noise_sigma, seed=args.seed,
        nuisance_scale=args.nuisance_scale,
    )
    pair, truth = synthdata.make_projectors(spec)
    image_ds, text_ds = synthdata.make_embeddings(spec, truth)
    out = _out_dir(args)
    tensorio.write_tensor(out / "wi.iso", pair.w_i)
    tensorio.write_tensor(out / "wt.iso", pair.w_t)
    tensorio.write_dataset(out, "image", image_ds.features, image_ds.labels)
    tensorio.write_dataset(out, "text", text_ds.features, text_ds.labels)
    _write_json(out / "planted.json", {
        "d": spec.d, "d_i": spec.d_i, "d_t": spec.d_t,
        "n_top": spec.n_top, "n_bottom": spec.n_bottom,
        "classes": spec.classes, "per_class": spec.per_class,
        "noise_sigma": spec.noise_sigma, "nuisance_scale": spec.nuisance_scale,
        "seed": spec.seed,
    })
    _echo_config(out, "synth", args)
    print(f"wrote planted fixture (d={spec.d}, {spec.classes} classes) to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoclip",
        description="Spectral middle-band alignment of vision-language projector heads",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--precision", choices=("f32", "f64"), default="f64",
                        help="dtype loaded data is cast to (f32 mirrors extractor precision)")
    common.add_argument("--threads", type=int,
                        default=int(os.environ.get("ISOCLIP_THREADS", "0")),
                        help="BLAS thread cap; 1 = fully serial, 0 = library default")
    common.add_argument("--output-dir", default=".", help="where outputs and the config echo go")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="dump singular values of W_i^T W_t")
    p.add_argument("--wi", required=True)
    p.add_argument("--wt", required=True)
    p.add_argument("--out", default="spectrum.csv")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("align", parents=[common], help="write band-aligned projector pair")
    p.add_argument("--wi", required=True)
    p.add_argument("--wt", required=True)
    p.add_argument("--kt", type=int, required=True)
    p.add_argument("--kb", type=int, required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("whiten", parents=[common], help="flatten a head's spectrum (U V^T)")
    p.add_argument("--wi", required=True)
    p.add_argument("--out", default="w_white.iso")
    p.set_defaults(func=cmd_whiten)

    p = sub.add_parser("retrieve", parents=[common], help="mAP / P@K retrieval report")
    p.add_argument("--projector", required=True, help="head tensor file or aligned/ directory")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", choices=("image", "text"), default="image")
    p.add_argument("--p-at-k", default="", help="comma list of K values")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("classify", parents=[common], help="nearest-class-mean classification")
    p.add_argument("--projector", required=True)
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", parents=[common], help="mAP over a (k_t, k_b) grid")
    p.add_argument("--wi", required=True)
    p.add_argument("--wt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", choices=("image", "text"), default="image")
    p.add_argument("--kt", type=_parse_range, required=True, help="start:stop:step or comma list")
    p.add_argument("--kb", type=_parse_range, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("overlap", parents=[common], help="positive/negative similarity overlap")
    p.add_argument("--projector", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", choices=("image", "text"), default="image")
    p.add_argument("--bins", type=int, default=100)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("bands", parents=[common], help="top vs middle vs bottom band retrieval")
    p.add_argument("--wi", required=True)
    p.add_argument("--wt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", choices=("image", "text"), default="image")
    p.add_argument("--width", type=int, default=50)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient audit")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--dim", type=int, default=16)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("linearize", parents=[common], help="linearize an MLP head directory")
    p.add_argument("--params-dir", required=True)
    p.add_argument("--probes", type=int, default=32)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("synth", parents=[common], help="generate a planted verification fixture")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--di", type=int, default=96)
    p.add_argument("--dt", type=int, default=80)
    p.add_argument("--n-top", type=int, default=8)
    p.add_argument("--n-bottom", type=int, default=4)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--nuisance-scale", type=float, default=3.0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    limiter = None
    if args.threads and args.threads > 0:
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=args.threads)
        except ImportError:
            print("threadpoolctl not installed; --threads ignored", file=sys.stderr)
    try:
        args.func(args)
        return EXIT_OK
    except (IsoclipError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
