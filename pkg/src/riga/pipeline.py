"""Orchestration behind the command-line entry points.

Every function takes a validated :class:`~riga.config.PipelineConfig` and an
output directory, writes only inside that directory, and returns the
:class:`~riga.manifest.ExperimentManifest` it saved there.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .augment import GENERATIVE, augment, fit_transform
from .bayesnet import compare_structures, discretize, select_by_label_mi, tabu_search, to_dot, write_bn_outputs
from .bayesnet.graph import blanket_dot, blanket_report, markov_blanket
from .classify import CvRun, EvalResult, cross_validate, default_cnn_grid, format_mean_std, roc_curve, write_roc_svg
from .config import PipelineConfig, config_dict
from .data import (
    TabularDataset,
    append_synthetic,
    dataset_manifest,
    drop_missing,
    induce_imbalance,
    kfold_split,
    load_csv,
    load_madelon,
    remove_minority,
    synth_imbalanced,
)
from .imgmap import read_pgm, tile_images, to_images, write_pgm
from .manifest import ExperimentManifest, jsonable
from .seeding import derive_seed

MANIFEST_NAME = "manifest.json"
SAMPLE_PANELS = 8


def load_dataset(cfg: PipelineConfig) -> TabularDataset:
    dc = cfg.dataset
    seed = derive_seed(cfg.seed, "dataset")
    if dc.source == "synthetic":
        s = dc.synthetic
        ds = synth_imbalanced(s.n_major, s.n_minor, s.d, s.separation, seed)
    elif dc.source == "madelon":
        ds = load_madelon(dc.path)
    else:
        ds = load_csv(dc.path, dc.label_column, dc.missing_token)
    if dc.max_missing_per_feature >= 0:
        ds = drop_missing(ds, dc.max_missing_per_feature)
    elif ds.missing_mask.any():
        ds = drop_missing(ds, ds.n_rows)
    if dc.remove_minority > 0:
        ds = remove_minority(ds, dc.remove_minority, derive_seed(cfg.seed, "imbalance"))
    elif dc.minority_fraction > 0:
        ds = induce_imbalance(ds, dc.minority_fraction, derive_seed(cfg.seed, "imbalance"))
    return ds


def _out(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _new_manifest(command: str, cfg: PipelineConfig, ds: TabularDataset) -> ExperimentManifest:
    return ExperimentManifest(
        command=command,
        config=jsonable(config_dict(cfg)),
        dataset={"name": cfg.dataset.display_name(), **jsonable(dataset_manifest(ds))},
        seeds={"master": cfg.seed, "split": derive_seed(cfg.seed, "split"), "dataset": derive_seed(cfg.seed, "dataset")},
    )


def _finish(m: ExperimentManifest, out: Path, result: EvalResult | None = None) -> ExperimentManifest:
    m.artifacts = {k: str(v) for k, v in sorted(m.artifacts.items())}
    m.save(out / MANIFEST_NAME)
    if result is not None:
        append_results_csv(out / "results.csv", result, m.content_hash())
    return m


def write_sample_grid(path, real, synthetic) -> int:
    """Two rows of panels, real on top and synthetic below, equal counts."""
    k = min(len(real), len(synthetic))
    if k == 0:
        return 0
    panels = np.concatenate([np.asarray(real)[:k], np.asarray(synthetic)[:k]])
    write_pgm(path, tile_images(panels, ncols=k))
    return k


def cmd_transform(cfg: PipelineConfig, out, dump_images: int = 0) -> ExperimentManifest:
    """Fit the feature-to-pixel mapping on the whole dataset and render it."""
    out = _out(out)
    ds = load_dataset(cfg)
    m = _new_manifest("transform", cfg, ds)
    t0 = time.perf_counter()
    seed = derive_seed(cfg.seed, "transform", "embed")
    m.seeds["embed"] = seed
    ft = fit_transform(ds, cfg.transform, seed)
    m.timings["transform"] = time.perf_counter() - t0
    ft.mapping.save(out / "mapping.json")
    m.artifacts["mapping"] = "mapping.json"
    images = to_images(ft.norm.apply(ds.rows), ft.mapping)
    n_dump = ds.n_rows if dump_images < 0 else min(dump_images, ds.n_rows)
    if n_dump:
        img_dir = out / "images"
        img_dir.mkdir(exist_ok=True)
        for i in range(n_dump):
            write_pgm(img_dir / f"row{i:05d}_y{ds.labels[i]}.pgm", images[i])
        m.artifacts["images"] = "images"
    write_pgm(out / "sample_grid.pgm", tile_images(images[: min(64, ds.n_rows)], ncols=8))
    m.artifacts["sample_grid"] = "sample_grid.pgm"
    m.extras = {
        "grid_size": ft.mapping.grid_size,
        "n_cells": ft.mapping.n_features,
        "collisions": ft.mapping.collision_count,
        "embedding_kl": ft.embedding.final_kl,
        "perplexity": ft.embedding.perplexity,
    }
    return _finish(m, out)


def write_augmented_csv(path, ds: TabularDataset) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, "label", "synthetic"])
        for row, y, s in zip(ds.rows, ds.labels, ds.synthetic):
            w.writerow([*(repr(float(v)) for v in row), int(y), int(s)])


def augment_full(cfg: PipelineConfig, ds: TabularDataset):
    """Augment the whole dataset (used for exports and BN comparison)."""
    seeds = {"embed": derive_seed(cfg.seed, "full", "embed"), "augment": derive_seed(cfg.seed, "full", "augment")}
    needs = cfg.augment.kind in GENERATIVE
    ft = fit_transform(ds, cfg.transform, seeds["embed"]) if needs else None
    res = augment(ds, cfg.augment, ft, seeds["augment"])
    return append_synthetic(ds, res.rows), res, ft, seeds


def cmd_augment(cfg: PipelineConfig, out) -> ExperimentManifest:
    out = _out(out)
    ds = load_dataset(cfg)
    m = _new_manifest("augment", cfg, ds)
    t0 = time.perf_counter()
    augmented, res, ft, seeds = augment_full(cfg, ds)
    m.timings["augment"] = time.perf_counter() - t0
    m.seeds.update(seeds)
    write_augmented_csv(out / "augmented.csv", augmented)
    m.artifacts["augmented_csv"] = "augmented.csv"
    if ft is not None and res.synthetic_images is not None:
        real = ft.images(ds.rows[ds.labels == 1][:SAMPLE_PANELS])
        if write_sample_grid(out / "real_vs_synthetic.pgm", real, res.synthetic_images[:SAMPLE_PANELS]):
            m.artifacts["image_grid"] = "real_vs_synthetic.pgm"
        ft.mapping.save(out / "mapping.json")
        m.artifacts["mapping"] = "mapping.json"
    n0, n1 = augmented.class_counts()
    m.extras = {"n_synthetic": int(res.rows.shape[0]), "class_counts_after": {"0": n0, "1": n1}}
    m.warnings = list(res.warnings)
    return _finish(m, out)


def _fold_record(f) -> dict:
    rec = {
        "fold": f.fold,
        "auc": f.auc,
        "n_test": int(f.test_index.size),
        "n_synthetic": f.n_synthetic,
        "seeds": f.seeds,
        "clipped_test_values": f.clipped_test_values,
        "warnings": list(f.warnings),
    }
    if f.chosen_cnn is not None:
        rec["chosen_cnn"] = jsonable(f.chosen_cnn)
    return rec


def append_results_csv(path, result: EvalResult, manifest_hash: str = "") -> None:
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["method", "dataset", "mean_auc", "std_auc", "folds", "fold_aucs", "manifest_hash"])
        w.writerow(
            [
                result.method,
                result.dataset,
                f"{result.mean:.6f}",
                f"{result.std:.6f}",
                len(result.fold_aucs),
                ";".join(f"{a:.6f}" for a in result.fold_aucs),
                manifest_hash,
            ]
        )


def _classify(cfg: PipelineConfig, ds: TabularDataset, m: ExperimentManifest, out: Path) -> CvRun:
    folds = kfold_split(ds, cfg.folds, m.seeds["split"])
    spec = cfg.pipeline_spec()
    if cfg.grid_search:
        spec = replace(spec, cnn_grid=tuple(default_cnn_grid(cfg.cnn)))
    t0 = time.perf_counter()
    run = cross_validate(ds, folds, spec, workers=cfg.workers, dataset_name=cfg.dataset.display_name())
    m.timings["cross_validate"] = time.perf_counter() - t0
    m.timings["folds"] = [f.timings for f in run.folds]
    m.folds = [jsonable(_fold_record(f)) for f in run.folds]
    for f in run.folds:
        m.warnings.extend(f"fold {f.fold}: {w}" for w in f.warnings)
    oof = run.oof_scores(ds.n_rows)
    fpr, tpr = roc_curve(oof, ds.labels)
    m.results = {
        **run.result.to_dict(),
        "row": run.result.row(),
        "roc": {"fpr": fpr.tolist(), "tpr": tpr.tolist()},
    }
    write_roc_svg(out / "roc.svg", {run.result.method: (fpr, tpr)})
    m.artifacts["roc"] = "roc.svg"
    (out / "results.json").write_text(json.dumps(jsonable(run.result.to_dict()), indent=2))
    m.artifacts["results_json"] = "results.json"
    m.artifacts["results_csv"] = "results.csv"
    firsts = [f for f in run.folds if f.synthetic_images is not None]
    if firsts:
        f = firsts[0]
        if write_sample_grid(out / "real_vs_synthetic.pgm", f.real_images, f.synthetic_images):
            m.artifacts["image_grid"] = "real_vs_synthetic.pgm"
    return run


def cmd_classify(cfg: PipelineConfig, out) -> ExperimentManifest:
    out = _out(out)
    ds = load_dataset(cfg)
    m = _new_manifest("classify", cfg, ds)
    run = _classify(cfg, ds, m, out)
    return _finish(m, out, run.result)


def _bn_single(cfg: PipelineConfig, ds: TabularDataset, out: Path) -> dict:
    opts = cfg.bn.options
    data, excluded = discretize(ds, opts.bins, opts.target)
    cols = select_by_label_mi(data, opts.max_features) + [data.n_vars - 1]
    data = data.select(cols)
    res = tabu_search(data, replace(opts.search, seed=derive_seed(cfg.seed, "bn")))
    dag = res.dag
    (out / "bn.dot").write_text(to_dot(dag, highlight=[opts.target]))
    dag.save_json(out / "bn.json")
    (out / "blanket.dot").write_text(blanket_dot(dag, opts.target, "Markov blanket"))
    (out / "blanket.txt").write_text(f"BIC: {res.score:.4f}\n" + blanket_report(dag, opts.target))
    mb = sorted(dag.names[i] for i in markov_blanket(dag, opts.target))
    return {
        "bic": res.score,
        "features": list(data.names[:-1]),
        "excluded_constant": excluded,
        "edges": [[dag.names[u], dag.names[v]] for u, v in dag.edges()],
        "blanket": mb,
        "blanket_size": len(mb),
    }


def _bn_compare(cfg: PipelineConfig, ds: TabularDataset, m: ExperimentManifest, out: Path) -> dict:
    t0 = time.perf_counter()
    augmented, res, _, seeds = augment_full(cfg, ds)
    m.seeds.update({f"bn_{k}": v for k, v in seeds.items()})
    opts = replace(cfg.bn.options, search=replace(cfg.bn.options.search, seed=derive_seed(cfg.seed, "bn")))
    cmp = compare_structures(ds, augmented, opts)
    paths = write_bn_outputs(out, cmp, opts.target)
    m.timings["bn"] = time.perf_counter() - t0
    for side in ("before", "after"):
        for kind, p in paths[side].items():
            m.artifacts[f"bn_{side}_{kind}"] = Path(p).name
    before, after = cmp["before"].summary(), cmp["after"].summary()
    return {
        "features": cmp["features"],
        "excluded_constant": cmp["excluded_constant"],
        "before": before,
        "after": after,
        "blanket_sizes": [before["blanket_size"], after["blanket_size"]],
        "n_synthetic": int(res.rows.shape[0]),
    }


def cmd_bnlearn(cfg: PipelineConfig, out) -> ExperimentManifest:
    """Structure learning on the dataset; with an augmenter, on both the
    original and the augmented data."""
    out = _out(out)
    ds = load_dataset(cfg)
    m = _new_manifest("bnlearn", cfg, ds)
    m.seeds["bn"] = derive_seed(cfg.seed, "bn")
    if cfg.augment.kind == "none":
        t0 = time.perf_counter()
        m.extras["bn"] = jsonable(_bn_single(cfg, ds, out))
        m.timings["bn"] = time.perf_counter() - t0
        for name in ("bn.dot", "bn.json", "blanket.dot", "blanket.txt"):
            m.artifacts[name.replace(".", "_")] = name
    else:
        m.extras["bn"] = jsonable(_bn_compare(cfg, ds, m, out))
    return _finish(m, out)


def cmd_pipeline(cfg: PipelineConfig, out) -> ExperimentManifest:
    out = _out(out)
    ds = load_dataset(cfg)
    m = _new_manifest("pipeline", cfg, ds)
    run = _classify(cfg, ds, m, out)
    if cfg.bn.enabled:
        m.seeds["bn"] = derive_seed(cfg.seed, "bn")
        m.extras["bn"] = jsonable(_bn_compare(cfg, ds, m, out))
    return _finish(m, out, run.result)


class IncompatibleManifests(ValueError):
    pass


def _check_compatible(manifests: list) -> None:
    versions = {m.version for m in manifests}
    if len(versions) > 1:
        raise IncompatibleManifests(f"manifest format versions differ: {sorted(versions)}")
    missing = [i for i, m in enumerate(manifests) if not m.results]
    if missing:
        raise IncompatibleManifests(f"manifest(s) {missing} carry no classification results")
    folds = {len(m.results["fold_aucs"]) for m in manifests}
    if len(folds) > 1:
        raise IncompatibleManifests(f"manifests use different fold counts: {sorted(folds)}")
    per_dataset: dict = {}
    for m in manifests:
        name = m.results["dataset"]
        h = m.dataset.get("content_hash")
        if per_dataset.setdefault(name, h) != h:
            raise IncompatibleManifests(f"dataset {name!r} appears with different contents")


def cmd_report(manifest_paths, out) -> list[str]:
    """Method x dataset table of mean ± std AUC, ROC plots and image grids."""
    if not manifest_paths:
        raise ValueError("report needs at least one manifest")
    out = _out(out)
    paths = [Path(p) for p in manifest_paths]
    paths = [p / MANIFEST_NAME if p.is_dir() else p for p in paths]
    manifests = [ExperimentManifest.load(p) for p in paths]
    _check_compatible(manifests)
    methods = list(dict.fromkeys(m.results["method"] for m in manifests))
    datasets = list(dict.fromkeys(m.results["dataset"] for m in manifests))
    cell = {(m.results["method"], m.results["dataset"]): m for m in manifests}
    rows = []
    with (out / "report.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", *datasets])
        for method in methods:
            vals = []
            for d in datasets:
                m = cell.get((method, d))
                vals.append(format_mean_std(m.results["mean"], m.results["std"]) if m else "")
            w.writerow([method, *vals])
            rows.append(f"{method}: " + " | ".join(f"{d}: {v or '-'}" for d, v in zip(datasets, vals)))
    (out / "report.txt").write_text("\n".join(rows) + "\n")
    for d in datasets:
        curves = {}
        for method in methods:
            m = cell.get((method, d))
            if m and "roc" in m.results:
                curves[method] = (m.results["roc"]["fpr"], m.results["roc"]["tpr"])
        if curves:
            write_roc_svg(out / f"roc_{_slug(d)}.svg", curves)
    for p, m in zip(paths, manifests):
        grid = m.artifacts.get("image_grid")
        if grid and (p.parent / grid).exists():
            img = read_pgm(p.parent / grid)
            write_pgm(out / f"grid_{_slug(m.results['method'])}_{_slug(m.results['dataset'])}.pgm", img)
    return rows


def _slug(s: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in s).strip("_").lower()
