"""Cross-validation and grid-search harnesses.

Each fold fits its whole pipeline (normalization, embedding, mapping,
augmenter, classifier) on the training partition only, then scores the
untouched test partition. Folds are independent, so they may run in a
process pool; results are merged by fold index so order never matters.
"""
from __future__ import annotations

import itertools
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..augment import GENERATIVE, AugmentConfig, TransformConfig, augment, fit_transform
from ..data import FoldSplit, TabularDataset, append_synthetic, stratified_assign
from ..seeding import derive_seed
from .cnn import CnnConfig, cnn_train
from .gbdt import GbdtConfig, gbdt_train
from .metrics import auc

CLASSIFIERS = ("gbdt", "cnn")

_DISPLAY = {"gbdt": "GBDT", "cnn": "CNN"}
_AUG_DISPLAY = {"smote": "SMOTE", "adasyn": "ADASYN", "cgan": "cGAN", "vqvae": "VQVAE", "vqgan": "VQGAN"}


class FoldError(RuntimeError):
    def __init__(self, fold: int, phase: str, cause: BaseException):
        super().__init__(f"fold {fold}, phase {phase}: {type(cause).__name__}: {cause}")
        self.fold = fold
        self.phase = phase


@dataclass(frozen=True)
class PipelineSpec:
    classifier: str = "gbdt"
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    cnn: CnnConfig = field(default_factory=CnnConfig)
    seed: int = 0
    cnn_grid: tuple = ()  # non-empty: pick the CNN config per fold by inner CV

    def __post_init__(self):
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")

    @property
    def needs_images(self) -> bool:
        return self.classifier == "cnn" or self.augment.kind in GENERATIVE

    def label(self) -> str:
        clf = _DISPLAY[self.classifier]
        if self.augment.kind == "none":
            return f"{clf} w/o Augmentation"
        return f"{clf} + {_AUG_DISPLAY[self.augment.kind]}"


@dataclass
class EvalResult:
    fold_aucs: list
    method: str
    dataset: str = "dataset"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.fold_aucs = [float(a) for a in self.fold_aucs]
        if not self.fold_aucs:
            raise ValueError("no fold results")
        if any(not 0.0 <= a <= 1.0 for a in self.fold_aucs):
            raise ValueError("AUC values must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_aucs))

    @property
    def std(self) -> float:
        # sample standard deviation across folds; 0 for a single fold
        if len(self.fold_aucs) < 2:
            return 0.0
        return float(np.std(self.fold_aucs, ddof=1))

    def row(self) -> str:
        return f"{self.method}, {self.dataset}: {format_mean_std(self.mean, self.std)}"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "fold_aucs": self.fold_aucs,
            "mean": self.mean,
            "std": self.std,
        }


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.4f} ± {std:.4f}"


@dataclass
class FoldOutcome:
    fold: int
    auc: float
    test_index: np.ndarray
    scores: np.ndarray
    n_synthetic: int
    warnings: list
    timings: dict
    seeds: dict
    clipped_test_values: int = 0
    chosen_cnn: dict | None = None
    mapping: dict | None = None
    synthetic_images: np.ndarray | None = None
    real_images: np.ndarray | None = None


def run_fold(ds: TabularDataset, fold: int, train_idx, test_idx, spec: PipelineSpec) -> FoldOutcome:
    """Fit every stage on ``train_idx`` and score ``test_idx``."""
    train = ds.subset(train_idx)
    test = ds.subset(test_idx)
    seeds = {
        phase: derive_seed(spec.seed, "fold", fold, phase)
        for phase in ("embed", "augment", "classify")
    }
    timings = {}
    phase = "transform"
    try:
        t0 = time.perf_counter()
        transform = fit_transform(train, spec.transform, seeds["embed"]) if spec.needs_images else None
        timings["transform"] = time.perf_counter() - t0

        phase = "augment"
        t0 = time.perf_counter()
        aug = augment(train, spec.augment, transform, seeds["augment"])
        augmented = append_synthetic(train, aug.rows)
        timings["augment"] = time.perf_counter() - t0

        # synthetic rows live only in the training partition
        assert not test.synthetic.any(), "synthetic rows leaked into a test fold"

        phase = "classify"
        t0 = time.perf_counter()
        clipped = 0
        chosen = None
        if spec.classifier == "gbdt":
            model = gbdt_train(augmented, replace(spec.gbdt, seed=seeds["classify"]))
            scores = model.scores(test.rows)
        else:
            train_images = transform.images(augmented.rows)
            cfg = replace(spec.cnn, seed=seeds["classify"])
            if spec.cnn_grid:
                grid = [replace(g, seed=seeds["classify"]) for g in spec.cnn_grid]
                cfg, _ = grid_search_cnn(train_images, augmented.labels, grid, seed=seeds["classify"])
                chosen = asdict(cfg)
            model = cnn_train(train_images, augmented.labels, cfg)
            z = transform.norm.apply(test.rows)
            clipped = int(np.count_nonzero((z < 0.0) | (z > 1.0)))
            scores = model.scores(transform.images(test.rows))
        timings["classify"] = time.perf_counter() - t0
        phase = "score"
        value = auc(scores, test.labels)
    except AssertionError:
        raise
    except Exception as exc:
        raise FoldError(fold, phase, exc) from exc

    out = FoldOutcome(
        fold,
        value,
        np.asarray(test_idx),
        np.asarray(scores, dtype=np.float64),
        int(aug.rows.shape[0]),
        list(aug.warnings),
        timings,
        seeds,
        clipped,
        chosen,
    )
    if transform is not None:
        out.mapping = transform.mapping.to_json()
        if aug.synthetic_images is not None:
            k = min(8, aug.synthetic_images.shape[0])
            minority = train.rows[train.labels == 1][:k]
            out.synthetic_images = aug.synthetic_images[:k]
            out.real_images = transform.images(minority)
    return out


def _run_fold_args(args):
    return run_fold(*args)


@dataclass
class CvRun:
    result: EvalResult
    folds: list

    def oof_scores(self, n: int) -> np.ndarray:
        out = np.full(n, np.nan)
        for f in self.folds:
            out[f.test_index] = f.scores
        return out


def cross_validate(
    ds: TabularDataset,
    folds: FoldSplit,
    spec: PipelineSpec,
    workers: int = 1,
    dataset_name: str = "dataset",
) -> CvRun:
    jobs = [(ds, f, tr, te, spec) for f, (tr, te) in enumerate(folds)]
    if workers > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            outcomes = list(pool.map(_run_fold_args, jobs))
    else:
        outcomes = [run_fold(*job) for job in jobs]
    outcomes.sort(key=lambda o: o.fold)
    result = EvalResult([o.auc for o in outcomes], spec.label(), dataset_name)
    return CvRun(result, outcomes)


def grid_search(lattice, evaluate) -> tuple[object, list]:
    """Argmax of ``evaluate`` over ``lattice``; ties keep the earliest point."""
    lattice = list(lattice)
    if not lattice:
        raise ValueError("grid must not be empty")
    values = [float(evaluate(point)) for point in lattice]
    best = int(np.argmax(values))
    return lattice[best], values


def default_cnn_grid(base: CnnConfig = CnnConfig()) -> list:
    grid = []
    for batch, blocks, width in itertools.product((32, 64), (1, 2), (64, 128)):
        conv = ((16, 3), (32, 3))[:blocks]
        grid.append(replace(base, batch_size=batch, conv_blocks=conv, dense_widths=(width,)))
    return grid


def grid_search_cnn(images, labels, grid, k: int = 3, seed: int = 0) -> tuple[CnnConfig, list]:
    """Choose a CNN config by inner stratified k-fold AUC on training images."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    split = FoldSplit(k, stratified_assign(labels, k, seed))

    def inner_auc(cfg: CnnConfig) -> float:
        aucs = []
        for tr, te in split:
            model = cnn_train(images[tr], labels[tr], cfg)
            aucs.append(auc(model.scores(images[te]), labels[te]))
        return float(np.mean(aucs))

    return grid_search(grid, inner_auc)


def spec_snapshot(spec: PipelineSpec) -> dict:
    return asdict(spec)


__all__ = [
    "CLASSIFIERS",
    "CvRun",
    "EvalResult",
    "FoldError",
    "FoldOutcome",
    "PipelineSpec",
    "cross_validate",
    "default_cnn_grid",
    "format_mean_std",
    "grid_search",
    "grid_search_cnn",
    "run_fold",
    "spec_snapshot",
]
