"""Contrastive similarity/loss gradients written in operator form, plus the
finite-difference machinery that verifies them.

The gradient of the image->text similarity splits into an inter-modal pull
through psi = W_i^T W_t and an intra-modal normalization term through
psi_i = W_i^T W_i:

    d s / d f = alpha * psi @ g  -  s * (psi_i @ f) / ||W_i f||^2

with alpha = 1 / (||W_i f|| * ||W_t g||). The full loss gradient is the
(p - y)-weighted sum of these per text, scaled by 1/tau. Everything here
is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEmbeddingError
from .tensorio import ProjectorPair

FD_STEP = 1e-5
REL_ERR_FLOOR = 1e-12


def _as_vec(x):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-D vector")
    return v


def _projected_norm(w, x) -> float:
    norm = float(np.linalg.norm(w @ x))
    if norm < 1e-12:
        raise DegenerateEmbeddingError(0, norm)
    return norm


@dataclass(frozen=True)
class LossContext:
    """One image feature, its positive text, negatives, and the temperature."""

    f_i: np.ndarray
    g_pos: np.ndarray
    g_neg: list
    tau: float
    pair: ProjectorPair

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        for v in (self.f_i, self.g_pos, *self.g_neg):
            if not np.isfinite(v).all():
                raise ValueError("context vectors must be finite")
        _projected_norm(self.pair.w_i, self.f_i)
        for g in (self.g_pos, *self.g_neg):
            _projected_norm(self.pair.w_t, g)

    @property
    def texts(self) -> list:
        return [self.g_pos, *self.g_neg]


@dataclass(frozen=True)
class SimilarityGradient:
    total: np.ndarray
    inter_term: np.ndarray  # alpha * psi @ g
    intra_term: np.ndarray  # s * (psi_i @ f) / ||W_i f||^2


@dataclass(frozen=True)
class TextContribution:
    weight: float  # p - y
    similarity: float
    inter_term: np.ndarray
    intra_term: np.ndarray


@dataclass(frozen=True)
class LossGradient:
    total: np.ndarray
    per_text: list = field(default_factory=list)
    probabilities: np.ndarray = None


def similarity(f, g, pair: ProjectorPair) -> float:
    """Cosine similarity in operator form: alpha * f^T psi g."""
    f = _as_vec(f)
    g = _as_vec(g)
    w_i = np.asarray(pair.w_i, dtype=np.float64)
    w_t = np.asarray(pair.w_t, dtype=np.float64)
    alpha = 1.0 / (_projected_norm(w_i, f) * _projected_norm(w_t, g))
    return alpha * float(f @ (w_i.T @ (w_t @ g)))


def similarity_grad_f(f, g, pair: ProjectorPair) -> SimilarityGradient:
    """Gradient of similarity w.r.t. the pre-projection image feature."""
    f = _as_vec(f)
    g = _as_vec(g)
    w_i = np.asarray(pair.w_i, dtype=np.float64)
    w_t = np.asarray(pair.w_t, dtype=np.float64)
    norm_i = _projected_norm(w_i, f)
    norm_t = _projected_norm(w_t, g)
    alpha = 1.0 / (norm_i * norm_t)
    psi_g = w_i.T @ (w_t @ g)
    psi_i_f = w_i.T @ (w_i @ f)
    s = alpha * float(f @ psi_g)
    inter = alpha * psi_g
    intra = s * psi_i_f / norm_i**2
    return SimilarityGradient(total=inter - intra, inter_term=inter, intra_term=intra)


def _logits_and_probs(ctx: LossContext):
    sims = np.array([similarity(ctx.f_i, g, ctx.pair) for g in ctx.texts])
    logits = sims / ctx.tau
    shifted = logits - logits.max()  # max-logit subtraction for stability
    expd = np.exp(shifted)
    probs = expd / expd.sum()
    return sims, logits, probs


def loss_i2t(ctx: LossContext) -> float:
    """-log softmax probability of the positive text (index 0)."""
    _, logits, _ = _logits_and_probs(ctx)
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[0])


def loss_grad_f(ctx: LossContext) -> LossGradient:
    """Full gradient of the image->text loss w.r.t. f.

    total = (1/tau) * sum_t (p_t - y_t) * (inter_t - intra_t), with y = 1
    only for the positive text; the per-text decomposition is returned
    alongside.
    """
    sims, _, probs = _logits_and_probs(ctx)
    total = np.zeros_like(ctx.f_i, dtype=np.float64)
    per_text = []
    for idx, g in enumerate(ctx.texts):
        grad = similarity_grad_f(ctx.f_i, g, ctx.pair)
        weight = probs[idx] - (1.0 if idx == 0 else 0.0)
        per_text.append(TextContribution(
            weight=float(weight), similarity=float(sims[idx]),
            inter_term=grad.inter_term, intra_term=grad.intra_term,
        ))
        total += weight * (grad.inter_term - grad.intra_term)
    total /= ctx.tau
    return LossGradient(total=total, per_text=per_text, probabilities=probs)


def finite_difference_gradient(fun, x, h: float = FD_STEP) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for j in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[j] += h
        backward[j] -= h
        grad[j] = (fun(forward) - fun(backward)) / (2.0 * h)
    return grad


def relative_error(analytic, numeric) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(float(np.linalg.norm(analytic)), REL_ERR_FLOOR)
    return float(np.linalg.norm(analytic - numeric)) / denom


def random_context(rng, dim: int = 16, n_neg: int = 4) -> LossContext:
    """A generic random instance used by the verification suite."""
    pair = ProjectorPair(
        w_i=rng.standard_normal((dim, dim)),
        w_t=rng.standard_normal((dim, dim)),
    )
    return LossContext(
        f_i=rng.standard_normal(dim),
        g_pos=rng.standard_normal(dim),
        g_neg=[rng.standard_normal(dim) for _ in range(n_neg)],
        tau=float(rng.uniform(0.05, 2.0)),
        pair=pair,
    )


def run_gradcheck(instances: int = 100, dim: int = 16, seed: int = 0,
                  h: float = FD_STEP) -> dict:
    """Verify both analytic gradients against central differences.

    Returns a JSON-ready report with per-instance relative errors and
    their maxima.
    """
    rng = np.random.default_rng(seed)
    sim_errors = []
    loss_errors = []
    for _ in range(instances):
        ctx = random_context(rng, dim=dim)
        g = ctx.g_pos
        analytic = similarity_grad_f(ctx.f_i, g, ctx.pair).total
        fd = finite_difference_gradient(lambda f: similarity(f, g, ctx.pair), ctx.f_i, h)
        sim_errors.append(relative_error(analytic, fd))

        analytic_loss = loss_grad_f(ctx).total

        def loss_at(f, ctx=ctx):
            moved = LossContext(f_i=f, g_pos=ctx.g_pos, g_neg=ctx.g_neg,
                                tau=ctx.tau, pair=ctx.pair)
            return loss_i2t(moved)

        fd_loss = finite_difference_gradient(loss_at, ctx.f_i, h)
        loss_errors.append(relative_error(analytic_loss, fd_loss))
    return {
        "instances": instances,
        "dim": dim,
        "seed": seed,
        "h": h,
        "similarity_grad": {
            "per_instance_relative_error": sim_errors,
            "max_relative_error": max(sim_errors),
        },
        "loss_grad": {
            "per_instance_relative_error": loss_errors,
            "max_relative_error": max(loss_errors),
        },
    }
