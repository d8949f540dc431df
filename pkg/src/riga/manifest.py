"""Experiment manifests: what ran, with which seeds, producing what."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

FORMAT_VERSION = 1

# wall-clock numbers differ between identical runs, so they stay out of the hash
_UNHASHED = ("timings",)
# where results are written and how many processes computed them do not
# change the results themselves
_UNHASHED_CONFIG = ("out", "workers")


@dataclass
class ExperimentManifest:
    command: str
    config: dict
    dataset: dict
    seeds: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    folds: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        d = dict(d)
        d.pop("content_hash", None)
        return cls(**d)

    def content_hash(self) -> str:
        body = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        body["config"] = {k: v for k, v in body["config"].items() if k not in _UNHASHED_CONFIG}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path) -> None:
        d = self.to_dict()
        d["content_hash"] = self.content_hash()
        Path(path).write_text(json.dumps(d, indent=2, sort_keys=True, allow_nan=False))

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        d = json.loads(Path(path).read_text())
        stored = d.get("content_hash")
        m = cls.from_dict(d)
        if stored is not None and stored != m.content_hash():
            raise ValueError(f"{path}: content hash mismatch, manifest was modified")
        return m


def jsonable(obj):
    """Plain JSON types for numpy scalars/arrays and tuples."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
