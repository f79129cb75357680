"""Binned ground-truth statistics over the (sqrt_num_seg, sqrt_num_class) plane.

Mean rating should rise along both axes when ratings track the two counts;
the per-cell std shows where raters disagree most. Empty cells stay empty
rather than being zero-filled.
"""

import math

import numpy as np

from segcomplexity import binned_stats
from segcomplexity.features import FeatureVector

rng = np.random.default_rng(3)

features = []
ratings = []
for i in range(1200):
    num_seg = int(rng.integers(1, 640))
    num_class = int(rng.integers(0, 80))
    fv = FeatureVector(image_id=f"i{i}", num_seg=num_seg, num_class=num_class,
                       sqrt_num_seg=math.sqrt(num_seg), sqrt_num_class=math.sqrt(num_class))
    features.append(fv)
    ratings.append(1.8 * fv.sqrt_num_seg + 2.5 * fv.sqrt_num_class
                   + 6.0 * rng.standard_normal())

grid = binned_stats(features, ratings, bins_per_axis=4)
nx, ny = grid.counts.shape
print(f"{grid.counts.sum()} points in a {nx}x{ny} grid "
      f"(x = {grid.x_label}, y = {grid.y_label})\n")

print("counts:")
print(grid.counts)

print("\nmean rating per cell (rows: x bins low->high):")
with np.printoptions(precision=1, nanstr="  -- "):
    print(grid.means)

print("\nstd of rating per cell:")
with np.printoptions(precision=1, nanstr="  -- "):
    print(grid.stds)

print("\nMean rating climbs with both axes, as a complexity-tracking rating should.")
