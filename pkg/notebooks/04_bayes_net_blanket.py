# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Structure before and after augmentation
#
# Discretize, pick the features most informative about the label, learn a
# network by tabu search under BIC, then read off the label's Markov
# blanket. Repeat on the augmented table with the same bins and features.

# +
from riga.baselines import OversampleConfig, smote
from riga.bayesnet import BnOptions, SearchConfig, blanket_report, compare_structures, to_dot
from riga.data import append_synthetic, synth_imbalanced
# -

ds = synth_imbalanced(500, 50, 10, 2.0, seed=3)
augmented = append_synthetic(ds, smote(ds, OversampleConfig(5, seed=0)))
ds.class_counts(), augmented.class_counts()

opts = BnOptions(bins=3, max_features=6, search=SearchConfig(seed=0))
cmp = compare_structures(ds, augmented, opts)
cmp["features"]

for side in ("before", "after"):
    s = cmp[side].summary()
    print(side, "BIC", round(s["bic"], 2), "blanket", s["blanket"])

print(blanket_report(cmp["after"].result.dag, "label"))

print(to_dot(cmp["after"].result.dag))
