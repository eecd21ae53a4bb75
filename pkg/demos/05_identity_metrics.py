"""Identity-preservation metrics with the reference embedder.

Composites a disc at increasing corruption levels and reports how the
cosine / Manhattan / Euclidean metrics degrade, printing the same aligned
table the eval command writes.
"""

import numpy as np

from designcompose import ReferenceEmbedder, cosine_similarity, embed, evaluate_pairs

rng = np.random.default_rng(8)
embedder = ReferenceEmbedder()

base = np.zeros((32, 32, 3))
yy, xx = np.mgrid[0:32, 0:32]
inside = (yy - 15.5) ** 2 + (xx - 15.5) ** 2 <= 14**2
base[..., 0] = np.where(inside, 0.9, 0.05)
base[..., 1] = np.where(inside, 0.3, 0.05)

pairs = []
for corruption in (0.0, 0.1, 0.3, 0.6):
    noisy = np.clip(base + rng.normal(0, corruption, base.shape), 0, 1)
    pairs.append((base, noisy))

report = evaluate_pairs(pairs, embedder)
print(report.format_table())
print("means: cosine", round(report.mean_cosine, 4),
      "| manhattan", round(report.mean_manhattan, 4),
      "| euclidean", round(report.mean_euclidean, 4))

v = embed(base, embedder)
print("embedding length:", v.values.shape[0], "| L2 norm:", round(float(np.linalg.norm(v.values)), 6))
print("cosine(base, base):", cosine_similarity(v, v))
