"""Training-free alignment of contrastive vision-language projector heads
to the isotropic middle band of the inter-modal operator W_i^T W_t, with
retrieval/classification evaluation and verification tooling."""

from .align import (
    AlignedProjectors,
    BandSelection,
    InterModalOperator,
    align_projectors,
    band_variants,
    inter_modal_operator,
    intra_operator_spectrum,
    load_aligned_pair,
    save_aligned,
    select_band,
)
from .gradcheck import (
    LossContext,
    loss_grad_f,
    loss_i2t,
    run_gradcheck,
    similarity,
    similarity_grad_f,
)
from .linearize import (
    EffectiveProjector,
    MlpHeadParams,
    absorb_layernorm,
    homogenize,
    linearize_head,
    load_mlp_head,
    mlp_forward_reference,
    save_mlp_head,
)
from .ncm import PrototypeSet, classify, compute_prototypes
from .retrieval import (
    OverlapReport,
    RetrievalReport,
    SweepResult,
    evaluate_retrieval,
    mean_average_precision,
    overlap_report,
    precision_at_k,
    project_and_normalize,
    similarity_matrix,
    sweep_band,
)
from .spectral import SpectralDecomposition, numerical_rank, svd, whiten
from .synthdata import PlantedSpec, banded_spectrum, make_embeddings, make_projectors
from .tensorio import (
    EmbeddingDataset,
    ProjectorPair,
    load_dataset,
    read_tensor,
    write_dataset,
    write_tensor,
)

__version__ = "0.1.0"
