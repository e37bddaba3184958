"""Why intra-modal similarity is never trained: the anatomy of the
contrastive gradient.

The gradient of sim(f, g) with respect to the image feature splits into
two named pieces:

    inter term: alpha * psi @ g           (pulls f toward the paired text,
                                           through psi = W_i^T W_t)
    intra term: s * psi_i @ f / ||W_i f||^2   (psi_i = W_i^T W_i; pure
                                               normalization, no attraction
                                               between different images)

Negatives only reweight these two pieces. This script verifies both
gradients against central finite differences and shows the decomposition
numerically.
"""

import numpy as np

from isoclip import LossContext, ProjectorPair, loss_grad_f, loss_i2t, similarity_grad_f
from isoclip.gradcheck import finite_difference_gradient, relative_error, run_gradcheck

rng = np.random.default_rng(2)
d, d_i, d_t = 12, 16, 14
pair = ProjectorPair(w_i=rng.standard_normal((d, d_i)),
                     w_t=rng.standard_normal((d, d_t)))
f = rng.standard_normal(d_i)
g = rng.standard_normal(d_t)

grad = similarity_grad_f(f, g, pair)
print("similarity gradient decomposition:")
print(f"  |inter term| = {np.linalg.norm(grad.inter_term):.4f}")
print(f"  |intra term| = {np.linalg.norm(grad.intra_term):.4f}")
print(f"  f^T grad     = {f @ grad.total:+.2e}  (tangent to the norm sphere)")

# the loss gradient is the (p - y)-weighted sum of per-text terms
ctx = LossContext(
    f_i=f, g_pos=g,
    g_neg=[rng.standard_normal(d_t) for _ in range(6)],
    tau=0.2, pair=pair,
)
loss_grad = loss_grad_f(ctx)
print(f"\ni->t loss = {loss_i2t(ctx):.4f} with 6 negatives, tau = {ctx.tau}")
print("per-text weights p - y (first entry is the positive):")
print("  " + np.array2string(
    np.array([c.weight for c in loss_grad.per_text]), precision=3))

fd = finite_difference_gradient(
    lambda x: loss_i2t(LossContext(f_i=x, g_pos=ctx.g_pos, g_neg=ctx.g_neg,
                                   tau=ctx.tau, pair=pair)), f)
print(f"loss gradient vs central differences: rel. error "
      f"{relative_error(loss_grad.total, fd):.2e}")

# temperature flattens the softmax and shrinks the gradient
print("\ngradient norm vs temperature:")
for tau in (0.1, 1.0, 10.0):
    moved = LossContext(f_i=f, g_pos=ctx.g_pos, g_neg=ctx.g_neg, tau=tau, pair=pair)
    print(f"  tau = {tau:>5}: |grad| = {np.linalg.norm(loss_grad_f(moved).total):.4f}")

report = run_gradcheck(instances=100, dim=16, seed=0)
print(f"\nbatch audit over 100 random instances: max rel. error "
      f"{report['similarity_grad']['max_relative_error']:.2e} (similarity), "
      f"{report['loss_grad']['max_relative_error']:.2e} (loss)")
