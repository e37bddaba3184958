"""The core move: keep only the flat middle band of psi's spectrum and
project both heads onto the corresponding singular subspaces,

    W_i_hat = W_i U_S U_S^T,   W_t_hat = W_t V_S V_S^T.

On planted data whose class signal lives in the middle band this turns a
mediocre retrieval baseline into a near-perfect one, while the top/bottom
bands alone are useless. Everything is training-free: two matrix products
per head.
"""

from isoclip import (
    PlantedSpec,
    align_projectors,
    band_variants,
    banded_spectrum,
    evaluate_retrieval,
    inter_modal_operator,
    make_embeddings,
    make_projectors,
    select_band,
    whiten,
)

spec = PlantedSpec(
    d_i=96, d_t=80, d=64, spectrum=banded_spectrum(64, 8, 4),
    n_top=8, n_bottom=4, classes=10, per_class=20,
    noise_sigma=0.05, seed=3, nuisance_scale=3.0,
)
pair, truth = make_projectors(spec)
image_ds, text_ds = make_embeddings(spec, truth)
op = inter_modal_operator(pair)

print(f"rank r = {op.r}; removing k_t={spec.n_top} top and k_b={spec.n_bottom} "
      f"bottom directions")
band = select_band(op, spec.n_top, spec.n_bottom)
aligned = align_projectors(pair, band, op=op)

print("\nimage-to-image retrieval (mAP, self-matches excluded):")
print(f"  raw projector W_i      : {evaluate_retrieval(pair.w_i, image_ds).map:.4f}")
print(f"  whitened projector     : {evaluate_retrieval(whiten(pair.w_i), image_ds).map:.4f}")
print(f"  aligned projector      : {evaluate_retrieval(aligned.w_i_hat, image_ds).map:.4f}")

print("\ntext-to-text retrieval with the matching text-side band:")
print(f"  raw projector W_t      : {evaluate_retrieval(pair.w_t, text_ds).map:.4f}")
print(f"  aligned projector      : {evaluate_retrieval(aligned.w_t_hat, text_ds).map:.4f}")

# which part of the spectrum carries the shared semantics? restrict the
# head to equal-width top / middle / bottom bands and compare
width = spec.middle_width
top, middle, bottom = band_variants(op, width=min(width, 20))
print(f"\nretrieval from 20-direction bands of the spectrum:")
for label, variant in (("top", top), ("middle", middle), ("bottom", bottom)):
    restricted = align_projectors(pair, variant, op=op)
    report = evaluate_retrieval(restricted.w_i_hat, image_ds)
    span = f"[{variant.retained.start}, {variant.retained.stop})"
    print(f"  {label:>6} {span:>10}: mAP = {report.map:.4f}")
print("-> the middle band alone does the work; the extremes hurt")
