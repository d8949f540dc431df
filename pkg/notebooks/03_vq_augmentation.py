# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Minority images from a VQ autoencoder and a code prior
#
# The autoencoder compresses each image to a small grid of codebook
# indices. A class-conditional autoregressive prior over those grids then
# samples new minority code grids, which the decoder turns back into images
# and the pixel mapping turns back into rows.
#
# Settings are kept small so this runs in seconds on one core.

# +
import numpy as np

from riga.augment import AugmentConfig, TransformConfig, augment, fit_transform
from riga.data import synth_imbalanced
from riga.genmodels import encode_codes, position_entropies, prior_train, vqvae_train
from riga.genmodels.vqvae import VqConfig
# -

ds = synth_imbalanced(270, 30, 16, 2.5, seed=2)
tf = fit_transform(ds, TransformConfig(grid_size=8), seed=0)
images = tf.images(ds.rows)

vq = VqConfig(codebook_size=32, learning_rate=1e-2)
model = vqvae_train(images, 10, 32, seed=0, config=vq, pixel_mask=tf.mapping.active_mask())
[round(entry["recon_loss"], 4) for entry in model.log[-3:]]

codes = encode_codes(model, images)
codes.shape, len(np.unique(codes))

prior = prior_train(model, images, ds.labels, 30, seed=1, channels=16, learning_rate=1e-2, class_balanced=True)
h = position_entropies(prior, codes[ds.labels == 1], ds.labels[ds.labels == 1])
print(h.round(2))

# The same steps packaged: the result holds enough rows to balance the
# classes, in original feature units.

res = augment(ds, AugmentConfig("vqvae", epochs=10, prior_epochs=30, prior_channels=16, codebook_K=32), tf, seed=0)
res.rows.shape

# How far the synthetic rows moved toward the minority class, measured
# along the line joining the two class means.

mu0 = ds.rows[ds.labels == 0].mean(axis=0)
mu1 = ds.rows[ds.labels == 1].mean(axis=0)
axis = (mu1 - mu0) / np.linalg.norm(mu1 - mu0)
shift = ((res.rows - mu0) @ axis).mean() / ((mu1 - mu0) @ axis)
round(float(shift), 3)
