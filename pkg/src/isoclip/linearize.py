"""First-order linearization of a residual MLP projection head.

The head is x -> x + W2 * gelu(W1 * LN(x) + b1) + b2. Folding LayerNorm's
affine parameters into the first linear layer is exact:

    W1_tilde = W1 @ diag(gamma)      b1_tilde = W1 @ beta + b1

Replacing GELU by its average slope z/2 (and treating the normalized input
as the input itself) then collapses the head into a single affine map

    x -> (I + W2 @ W1_tilde / 2) x + (W2 @ b1_tilde / 2 + b2)

packed as the n x (n+1) block [linear | bias] acting on [x; 1]. The
homogeneous column lets the bias flow through the inter-modal operator
like any other input direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf

from .tensorio import read_tensor, write_tensor

TENSOR_NAMES = ("w1", "b1", "w2", "b2", "gamma", "beta")
SIDECAR_NAME = "head.json"


@dataclass(frozen=True)
class MlpHeadParams:
    """Weights of a LayerNorm -> Linear -> GELU -> Linear residual head."""

    w1: np.ndarray  # m x n
    b1: np.ndarray  # m
    w2: np.ndarray  # n x m
    b2: np.ndarray  # n
    gamma: np.ndarray  # n
    beta: np.ndarray  # n
    eps: float

    def __post_init__(self):
        m, n = self.w1.shape
        if self.w2.shape != (n, m):
            raise ValueError(f"w2 shape {self.w2.shape} != ({n}, {m})")
        if self.b1.shape != (m,) or self.b2.shape != (n,):
            raise ValueError("bias shapes inconsistent with weights")
        if self.gamma.shape != (n,) or self.beta.shape != (n,):
            raise ValueError("layernorm affine shapes inconsistent")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def n(self) -> int:
        return self.w1.shape[1]


@dataclass(frozen=True)
class EffectiveProjector:
    """[linear | bias] block applied to homogeneous inputs [x; 1]."""

    w_eff: np.ndarray  # n x (n+1)

    @property
    def linear(self) -> np.ndarray:
        return self.w_eff[:, :-1]

    @property
    def bias(self) -> np.ndarray:
        return self.w_eff[:, -1]

    def apply(self, x) -> np.ndarray:
        return self.linear @ np.asarray(x, dtype=np.float64) + self.bias


def homogenize(features) -> np.ndarray:
    """Append the constant-1 column expected by an EffectiveProjector
    when it is used as a d x (n+1) image head."""
    features = np.atleast_2d(np.asarray(features))
    ones = np.ones((features.shape[0], 1), dtype=features.dtype)
    return np.hstack([features, ones])


def absorb_layernorm(params: MlpHeadParams):
    """Fold LN's affine scale/shift into the first linear layer (exact)."""
    w1_tilde = params.w1 * params.gamma[None, :]
    b1_tilde = params.w1 @ params.beta + params.b1
    return w1_tilde, b1_tilde


def linearize_head(params: MlpHeadParams) -> EffectiveProjector:
    """Average-slope linearization of the full residual head."""
    w1_tilde, b1_tilde = absorb_layernorm(params)
    n = params.n
    linear = np.eye(n) + 0.5 * (params.w2 @ w1_tilde)
    bias = 0.5 * (params.w2 @ b1_tilde) + params.b2
    return EffectiveProjector(w_eff=np.hstack([linear, bias[:, None]]))


def gelu(z) -> np.ndarray:
    """Exact (Gaussian-CDF) GELU; the tanh approximation would confound
    the linearization error being measured."""
    z = np.asarray(z, dtype=np.float64)
    return 0.5 * z * (1.0 + erf(z / np.sqrt(2.0)))


def layernorm(x, gamma, beta, eps) -> np.ndarray:
    """LayerNorm with population variance (divide by n), eps inside the root."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    var = np.mean((x - mu) ** 2)
    return gamma * (x - mu) / np.sqrt(var + eps) + beta


def mlp_forward_reference(params: MlpHeadParams, x) -> np.ndarray:
    """The exact non-linear head: x + W2 gelu(W1 LN(x) + b1) + b2."""
    x = np.asarray(x, dtype=np.float64)
    hidden = params.w1 @ layernorm(x, params.gamma, params.beta, params.eps) + params.b1
    return x + params.w2 @ gelu(hidden) + params.b2


def linearization_error(params: MlpHeadParams, x) -> float:
    """Relative error of the linearized head against the true forward.

    Purely diagnostic: the average-slope substitution has no uniform
    bound, so this is reported, not asserted.
    """
    reference = mlp_forward_reference(params, x)
    approx = linearize_head(params).apply(x)
    return float(np.linalg.norm(approx - reference) / max(np.linalg.norm(reference), 1e-12))


def save_mlp_head(params: MlpHeadParams, out_dir) -> None:
    """Directory of tensor files (w1/b1/w2/b2/gamma/beta .iso) + eps sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in TENSOR_NAMES:
        write_tensor(out_dir / f"{name}.iso", getattr(params, name))
    (out_dir / SIDECAR_NAME).write_text(
        json.dumps({"eps": params.eps}, indent=2, sort_keys=True) + "\n"
    )


def load_mlp_head(in_dir) -> MlpHeadParams:
    in_dir = Path(in_dir)
    tensors = {name: read_tensor(in_dir / f"{name}.iso") for name in TENSOR_NAMES}
    eps = float(json.loads((in_dir / SIDECAR_NAME).read_text())["eps"])
    return MlpHeadParams(eps=eps, **{k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()})
