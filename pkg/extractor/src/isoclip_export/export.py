"""Export jobs: projector weights, MLP-head parameters and pre-projection
embeddings, written as tensor files + JSON manifests.

Everything goes to disk in float32 (inference precision); row order always
equals input order, and re-running a job on the same inputs and model
revision reproduces the files byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from transformers import AutoImageProcessor, AutoTokenizer

from .models import LoadedModel, capture_boundary, forward_features, load_model, \
    mlp_head_modules, projector_modules
from .tensorfile import write_tensor

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


@dataclass
class ExportJob:
    model_id: str
    kind: str  # projectors | mlp_head | image_embeddings | text_embeddings
    out_dir: Path
    inputs: Path | None = None
    batch_size: int = 8
    name: str = "export"
    _loaded: LoadedModel | None = field(default=None, repr=False)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.inputs is not None:
            self.inputs = Path(self.inputs)

    def loaded(self) -> LoadedModel:
        if self._loaded is None:
            self._loaded = load_model(self.model_id)
        return self._loaded


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def export_projectors(job: ExportJob) -> dict:
    """wi.iso / wt.iso oriented d x d_i and d x d_t (shared dim first),
    plus projectors.json metadata."""
    loaded = job.loaded()
    visual, text = projector_modules(loaded)
    # torch Linear stores (out_features, in_features) = (d, d_pre) already
    w_i = visual.weight.detach().numpy().astype(np.float32)
    w_t = text.weight.detach().numpy().astype(np.float32)
    job.out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(job.out_dir / "wi.iso", w_i)
    write_tensor(job.out_dir / "wt.iso", w_t)
    meta = {
        "model": loaded.model_id,
        "family": loaded.family,
        "d": int(w_i.shape[0]),
        "d_i": int(w_i.shape[1]),
        "d_t": int(w_t.shape[1]),
        "orientation": "shared_dim_first (rows = shared space)",
    }
    _write_json(job.out_dir / "projectors.json", meta)
    return meta


def export_mlp_head(job: ExportJob) -> dict:
    """w1/b1/w2/b2/gamma/beta tensor files + head.json (eps, activation)."""
    loaded = job.loaded()
    layernorm, fc1, fc2 = mlp_head_modules(loaded)
    job.out_dir.mkdir(parents=True, exist_ok=True)
    tensors = {
        "w1": fc1.weight, "b1": fc1.bias,
        "w2": fc2.weight, "b2": fc2.bias,
        "gamma": layernorm.weight, "beta": layernorm.bias,
    }
    for stem, tensor in tensors.items():
        write_tensor(job.out_dir / f"{stem}.iso",
                     tensor.detach().numpy().astype(np.float32))
    meta = {
        "model": loaded.model_id,
        "family": loaded.family,
        "eps": float(layernorm.eps),
        "activation": getattr(loaded.model.config, "vision_config",
                              loaded.model.config).hidden_act,
        "n": int(fc2.weight.shape[0]),
        "m": int(fc1.weight.shape[0]),
    }
    _write_json(job.out_dir / "head.json", meta)
    return meta


def _list_images(root: Path):
    """(paths, labels): class-per-subdirectory when subdirectories exist,
    otherwise a flat listing with label 0. Sorted for determinism."""
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    if subdirs:
        paths, labels = [], []
        for label, sub in enumerate(subdirs):
            for p in sorted(sub.iterdir()):
                if p.suffix.lower() in IMAGE_EXTENSIONS:
                    paths.append(p)
                    labels.append(label)
        return paths, labels
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    return paths, [0] * len(paths)


def _batched(seq, size):
    for start in range(0, len(seq), size):
        yield seq[start:start + size]


def export_embeddings(job: ExportJob) -> dict:
    """features.iso (N x d_pre float32) + labels.iso + manifest.json.

    Pre-projection features are captured with a forward hook at the
    family's documented boundary while the model computes its own
    embeddings.
    """
    loaded = job.loaded()
    modality = "image" if job.kind == "image_embeddings" else "text"
    module, boundary, transform = capture_boundary(loaded, modality)

    if modality == "image":
        processor = AutoImageProcessor.from_pretrained(job.model_id)
        paths, labels = _list_images(job.inputs)
        if not paths:
            raise ValueError(f"no images found under {job.inputs}")
        def batches():
            for chunk in _batched(paths, job.batch_size):
                images = [Image.open(p).convert("RGB") for p in chunk]
                yield processor(images=images, return_tensors="pt")
    else:
        tokenizer = AutoTokenizer.from_pretrained(job.model_id)
        captions = [line for line in job.inputs.read_text().splitlines() if line.strip()]
        if not captions:
            raise ValueError(f"no captions found in {job.inputs}")
        labels = list(range(len(captions)))
        def batches():
            for chunk in _batched(captions, job.batch_size):
                yield tokenizer(chunk, padding=True, truncation=True,
                                return_tensors="pt")

    captured = []
    hook = module.register_forward_hook(
        lambda mod, args, out: captured.append(transform(args[0]).detach()))
    post = []
    try:
        with torch.no_grad():
            for batch in batches():
                post.append(forward_features(loaded, modality, batch))
    finally:
        hook.remove()
    features = torch.cat(captured).numpy().astype(np.float32)
    post_projection = torch.cat(post).numpy().astype(np.float32)

    job.out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(job.out_dir / f"{job.name}_features.iso", features)
    write_tensor(job.out_dir / f"{job.name}_labels.iso",
                 np.asarray(labels, dtype=np.int64))
    # kept alongside so export consistency can be audited after the fact
    write_tensor(job.out_dir / f"{job.name}_post_projection.iso", post_projection)
    manifest = {
        "name": job.name,
        "features_path": f"{job.name}_features.iso",
        "labels_path": f"{job.name}_labels.iso",
    }
    _write_json(job.out_dir / f"{job.name}.json", manifest)
    _write_json(job.out_dir / f"{job.name}_meta.json", {
        "model": loaded.model_id,
        "family": loaded.family,
        "modality": modality,
        "capture_boundary": boundary,
        "num_samples": int(features.shape[0]),
        "d_pre": int(features.shape[1]),
    })
    return manifest


KIND_HANDLERS = {
    "projectors": export_projectors,
    "mlp_head": export_mlp_head,
    "image_embeddings": export_embeddings,
    "text_embeddings": export_embeddings,
}


def run_job(job: ExportJob) -> dict:
    try:
        handler = KIND_HANDLERS[job.kind]
    except KeyError:
        raise ValueError(f"unknown export kind {job.kind!r}") from None
    return handler(job)
