"""Model-family adapters: where the projector weights live and where the
pre-projection boundary sits for each supported architecture.

"Pre-projection" is model-internal, so the capture point per family is
pinned here and recorded in the export metadata:

  clip    image:  input of `visual_projection` (pooled, post-layernorm)
          text:   input of `text_projection`
  siglip  image:  input of the pooling head's `layernorm`, probe token 0
                  (the residual entering the final LN -> MLP block)
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import AutoConfig, AutoModel


class UnsupportedModelError(ValueError):
    pass


@dataclass
class LoadedModel:
    model: torch.nn.Module
    family: str  # "clip" or "siglip"
    model_id: str


def load_model(model_id: str) -> LoadedModel:
    config = AutoConfig.from_pretrained(model_id)
    model_type = getattr(config, "model_type", "")
    if model_type == "clip":
        family = "clip"
    elif model_type.startswith("siglip"):
        family = "siglip"
    else:
        raise UnsupportedModelError(
            f"model type {model_type!r} is not supported (expected clip or siglip*)")
    model = AutoModel.from_pretrained(model_id)
    model.eval()
    return LoadedModel(model=model, family=family, model_id=model_id)


def _vision_tower(loaded: LoadedModel):
    model = loaded.model
    return getattr(model, "vision_model", model)


def projector_modules(loaded: LoadedModel):
    """The two linear heads of a clip-family model."""
    if loaded.family != "clip":
        raise UnsupportedModelError(
            f"{loaded.family} has no linear image head; export the MLP head "
            "with kind=mlp_head instead")
    return loaded.model.visual_projection, loaded.model.text_projection


def mlp_head_modules(loaded: LoadedModel):
    """(layernorm, fc1, fc2) of a siglip-style pooling-head MLP block."""
    if loaded.family != "siglip":
        raise UnsupportedModelError(
            f"{loaded.family} has a linear image head; export it with "
            "kind=projectors instead")
    head = _vision_tower(loaded).head
    return head.layernorm, head.mlp.fc1, head.mlp.fc2


def capture_boundary(loaded: LoadedModel, modality: str):
    """(module to hook, description, transform of the hooked input)."""
    if loaded.family == "clip":
        if modality == "image":
            return (loaded.model.visual_projection,
                    "visual_projection input (pooled, post-layernorm)",
                    lambda t: t)
        return (loaded.model.text_projection,
                "text_projection input (pooled)",
                lambda t: t)
    if modality != "image":
        raise UnsupportedModelError("text export is not wired for siglip models")
    head = _vision_tower(loaded).head
    return (head.layernorm,
            "pooling-head layernorm input, probe token 0",
            lambda t: t[:, 0])


@torch.no_grad()
def forward_features(loaded: LoadedModel, modality: str, batch: dict) -> torch.Tensor:
    """Post-projection embeddings as the model itself computes them
    (no L2 normalization)."""
    if loaded.family == "clip":
        if modality == "image":
            out = loaded.model.get_image_features(pixel_values=batch["pixel_values"])
        else:
            out = loaded.model.get_text_features(
                input_ids=batch["input_ids"],
                attention_mask=batch.get("attention_mask"))
        return out.pooler_output if hasattr(out, "pooler_output") else out
    out = _vision_tower(loaded)(pixel_values=batch["pixel_values"])
    return out.pooler_output
