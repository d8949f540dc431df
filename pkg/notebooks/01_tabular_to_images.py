# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # From table rows to images
#
# Each feature gets a pixel. Features that behave alike across rows land
# near each other, because the pixel positions come from a t-SNE embedding
# of the feature columns.

# +
import numpy as np

from riga.augment import TransformConfig, fit_transform
from riga.data import normalize, synth_imbalanced
from riga.imgmap import from_images, tile_images, write_pgm

np.set_printoptions(precision=3, suppress=True)
# -

ds = synth_imbalanced(300, 30, 40, 2.5, seed=0)
ds.class_counts()

# Fit the transform on the whole table here. Inside cross-validation it is
# refit on every training partition.

tf = fit_transform(ds, TransformConfig(grid_size=10), seed=0)
tf.embedding.positions[:5]

# Occupied cells. Every feature owns exactly one.

print(tf.mapping.active_mask().astype(int))

# The trip is lossless: normalize, paint, read back, denormalize.

images = tf.images(ds.rows)
back = from_images(images, tf.mapping, denormalize=True)
np.max(np.abs(back - ds.rows))

normalized, _ = normalize(ds)
assert np.array_equal(from_images(images, tf.mapping), normalized.rows)

# A few minority images next to a few majority ones, written as a PGM.

minority = images[ds.labels == 1][:4]
majority = images[ds.labels == 0][:4]
sheet = tile_images(np.concatenate([majority, minority]), ncols=4)
write_pgm("rows_as_images.pgm", sheet)
sheet.shape
