"""Why the auditor scores relay counts with the modified Z-score.

    python demos/outlier_scores.py

Two small illustrations: a toy list with two heavy relays, and the ceiling
that the standard score hits when ten colluders share a population of 58.
"""

import numpy as np

from wormhole_dtn.detector import modified_zscore, zscore

counts = [3, 4, 3, 5, 4, 250, 260]
print("relay counts        ", counts)
print("standard z          ", np.round(zscore(counts).values, 3))
print("modified z          ", np.round(modified_zscore(counts).values, 3))
print("flagged at 2.5 / 3.5:",
      [c for c, z in zip(counts, zscore(counts).values) if z > 2.5],
      [c for c, z in zip(counts, modified_zscore(counts).values) if z > 3.5])

# Standard z-scores always have mean 0 and sum of squares n, so k equal
# outliers among n values can reach at most sqrt((n - k) / k).
print("\nbest possible standard z for 10 equal outliers:")
for n in (58, 64, 70, 76):
    x = np.zeros(n)
    x[-10:] = 1.0
    print(f"  n={n}: {zscore(x).values[-1]:.3f}   bound {np.sqrt((n - 10) / 10):.3f}")
