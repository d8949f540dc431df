# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # SMOTE, ADASYN and the boosted-tree baseline

# +
import numpy as np

from riga.augment import AugmentConfig
from riga.baselines import OversampleConfig, adasyn, adasyn_difficulty, smote
from riga.classify import GbdtConfig, PipelineSpec, cross_validate
from riga.data import kfold_split, synth_imbalanced
# -

ds = synth_imbalanced(400, 40, 8, 2.0, seed=1)
ds.class_counts()

# SMOTE interpolates between a minority row and one of its minority
# neighbours, so every new row sits on a segment between two real ones.

new = smote(ds, OversampleConfig(k_neighbors=5, seed=0))
new.shape

# ADASYN spends more of its budget on minority rows surrounded by the
# majority. The difficulty ratio is the majority share of each row's
# neighbourhood.

r = adasyn_difficulty(ds, 5)
np.histogram(r, bins=5, range=(0, 1))[0]

hard = adasyn(ds, OversampleConfig(k_neighbors=5, seed=0))
hard.shape

# Five-fold AUC with no augmentation, then with each oversampler. The
# synthetic rows only ever enter the training partitions.

folds = kfold_split(ds, 5, seed=0)
gbdt = GbdtConfig(n_trees=50)
for kind in ("none", "smote", "adasyn"):
    run = cross_validate(ds, folds, PipelineSpec("gbdt", AugmentConfig(kind), gbdt=gbdt))
    print(kind.ljust(7), run.result.row())
