"""Independent reference implementations used to verify library outputs.

Everything here is deliberately written against the definitions, not the
library code paths it checks.
"""

import math

import numpy as np


def gram_eigen_singular_values(m):
    """Singular values as square roots of the Gram matrix eigenvalues."""
    eigvals = np.linalg.eigvalsh(m.T @ m)
    return np.sqrt(np.clip(eigvals, 0.0, None))[::-1]


def brute_force_ap(similarities, relevant, excluded=None):
    """Average precision straight from the definition: sort by similarity
    (gallery index ascending on ties), then average precision-at-rank over
    the positive ranks. Returns None for a query without positives."""
    items = [
        (float(s), idx, bool(r))
        for idx, (s, r) in enumerate(zip(similarities, relevant))
        if excluded is None or idx not in excluded
    ]
    items.sort(key=lambda t: (-t[0], t[1]))
    precisions = []
    hits = 0
    for rank, (_, _, rel) in enumerate(items, start=1):
        if rel:
            hits += 1
            precisions.append(hits / rank)
    if not precisions:
        return None
    return math.fsum(precisions) / len(precisions)
