"""Checkpoint-to-tensor-file export for the band-alignment toolkit."""

from .export import ExportJob, export_embeddings, export_mlp_head, export_projectors, run_job
from .models import UnsupportedModelError, load_model

__version__ = "0.1.0"
