# %%
"""
Angular support, step by step
=============================

Seven clients send nearly the same parameters, three send sign-flipped copies.
We walk through the detector's pipeline by hand and then call it in one go.
"""

import numpy as np

from asmr_fl.asmr import asmr_detect, gap_boundary, outlier_scores
from asmr_fl.geometry import UpdateVector, normalize, pairwise_distances

rng = np.random.default_rng(0)
base = rng.standard_normal(100)
updates = [UpdateVector(i, base + 0.05 * rng.standard_normal(100)) for i in range(7)]
updates += [UpdateVector(i, -(base + 0.05 * rng.standard_normal(100))) for i in range(7, 10)]

# %%
# Cosine distances between unit-normalized updates. Benign clients sit close
# to each other; flipped clients are ~2 away from them.
D = pairwise_distances([normalize(u) for u in updates])
print(np.round(D, 2))

# %%
# Reachability density is the inverse mean distance to all peers; the outlier
# factor compares a client's density with its peers'.
scores = outlier_scores(D)
for cid in scores.ordering:
    print(f"client {cid}: rd={scores.density[cid]:.3f}  OF={scores.factor[cid]:.3f}")

# %%
# The boundary is the largest gap in the sorted factors.
verdict = gap_boundary(scores)
print("excluded:", sorted(verdict.excluded), "gap:", round(verdict.boundary_gap, 3))

# %%
# Same answer from the one-call API, and it does not care about scale.
print(sorted(asmr_detect(updates).excluded))
print(sorted(asmr_detect([u.with_values(42.0 * u.values) for u in updates]).excluded))
