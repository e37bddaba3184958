"""Nearest-class-mean classification with projected prototypes.

Prototypes are per-class means of pre-projection features pushed through
the image head (mean first, then project); test samples take the label of
the most-similar prototype. Swapping the raw head for the band-aligned one
is a drop-in change and lifts accuracy when class structure lives in the
middle band.
"""

import numpy as np

from isoclip import (
    PlantedSpec,
    align_projectors,
    banded_spectrum,
    classify,
    compute_prototypes,
    inter_modal_operator,
    make_embeddings,
    make_projectors,
    project_and_normalize,
    select_band,
)

spec = PlantedSpec(
    d_i=96, d_t=80, d=64, spectrum=banded_spectrum(64, 8, 4),
    n_top=8, n_bottom=4, classes=10, per_class=30,
    noise_sigma=0.4, seed=11, nuisance_scale=3.0,
)
pair, truth = make_projectors(spec)
image_ds, _ = make_embeddings(spec, truth)

# stratified train/test split (labels are grouped by class)
idx = np.arange(image_ds.n)
train = idx % 3 != 0
test = ~train
print(f"{train.sum()} train / {test.sum()} test samples, {spec.classes} classes")

op = inter_modal_operator(pair)
aligned = align_projectors(pair, select_band(op, spec.n_top, spec.n_bottom), op=op)

for label, head in (("raw head", pair.w_i), ("aligned head", aligned.w_i_hat)):
    protos = compute_prototypes(head, image_ds.features[train], image_ds.labels[train])
    accuracy, predicted = classify(protos, head, image_ds.features[test],
                                   image_ds.labels[test])
    errors = int((predicted != image_ds.labels[test]).sum())
    print(f"  {label:<13}: accuracy {accuracy:.4f} ({errors} errors)")

# the gain comes from cleaner sample-to-prototype similarities: the margin
# (similarity to the true prototype minus the best wrong one) widens
for label, head in (("raw", pair.w_i), ("aligned", aligned.w_i_hat)):
    protos = compute_prototypes(head, image_ds.features[train], image_ds.labels[train])
    z = project_and_normalize(head, image_ds.features[test])
    sims = z @ protos.prototypes.T
    true_col = np.searchsorted(protos.class_ids, image_ds.labels[test])
    own = sims[np.arange(len(z)), true_col]
    sims[np.arange(len(z)), true_col] = -np.inf
    margin = own - sims.max(axis=1)
    print(f"  {label:>7} head: mean margin to the true prototype {margin.mean():+.3f}")
