"""Patch symmetry on images with varying amounts of spatial structure.

High scores mean local patches look like their own mirror images: spatial
regularity that makes an image look simpler than its raw segment count
suggests. Scores live in [0, 1] by construction.
"""

import numpy as np

from segcomplexity import patch_symmetry

rng = np.random.default_rng(7)
SCALES = (16, 32, 64)

side = 256
images = {}

images["constant"] = np.full((side, side), 0.5)

# Perfectly mirror-symmetric noise: left half random, right half its mirror.
half = rng.random((side, side // 2))
images["mirrored noise"] = np.concatenate([half, half[:, ::-1]], axis=1)

# A regular grid pattern (think bookshelves / windows).
tile = np.zeros((16, 16))
tile[2:14, 2:14] = 1.0
images["regular grid"] = np.tile(tile, (side // 16, side // 16))

# Vertical gradient: smooth but not mirror symmetric across patches.
images["gradient"] = np.tile(np.linspace(0.0, 1.0, side)[:, None], (1, side))

images["uniform noise"] = rng.random((side, side))

print(f"{'image':<16} {'patch_symm':>10}")
for name, img in images.items():
    print(f"{name:<16} {patch_symmetry(img, SCALES):>10.4f}")

score = patch_symmetry(images["uniform noise"], SCALES)
mirrored = patch_symmetry(images["uniform noise"][:, ::-1], SCALES)
inverted = patch_symmetry(1.0 - images["uniform noise"], SCALES)
print(f"\nmirror invariance:    |{score:.12f} - {mirrored:.12f}| = {abs(score - mirrored):.2e}")
print(f"inversion invariance: |{score:.12f} - {inverted:.12f}| = {abs(score - inverted):.2e}")
