"""Data model for seen/unseen classification experiments.

A dataset couples a visual feature matrix with per-sample labels, one
semantic prototype vector per class, and a split manifest.  Class ids are
normalized to a contiguous layout: seen classes occupy [0, S) and unseen
classes occupy [S, S+U).  The on-disk format is a directory holding
``manifest.json``, ``features.csv``, ``labels.csv``, ``attributes.csv`` and
``splits.json``; floats are written with 9 significant digits.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

FLOAT_FMT = "%.9g"


class DatasetError(ValueError):
    """Raised when a dataset file or in-memory dataset violates the format."""


@dataclass(frozen=True)
class SplitManifest:
    """Index lists for train/test splits plus the calibration class split.

    ``calib_subtrain_classes`` and ``calib_pseudo_unseen_classes`` partition
    the seen classes; the pseudo-unseen ones are held out of sub-training
    and stand in for unseen classes while tuning fusion/weighting knobs.
    """

    train: np.ndarray
    test_seen: np.ndarray
    test_unseen: np.ndarray
    calib_subtrain_classes: frozenset[int]
    calib_pseudo_unseen_classes: frozenset[int]


@dataclass(frozen=True)
class GzslDataset:
    """Immutable container: features (N,K), labels (N,), attributes (C,L)."""

    features: np.ndarray
    labels: np.ndarray
    attributes: np.ndarray
    seen_classes: frozenset[int]
    unseen_classes: frozenset[int]
    splits: SplitManifest
    name: str = "dataset"

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_attributes(self) -> int:
        return self.attributes.shape[1]

    @property
    def n_classes(self) -> int:
        return self.attributes.shape[0]

    @property
    def n_seen(self) -> int:
        return len(self.seen_classes)

    @property
    def n_unseen(self) -> int:
        return len(self.unseen_classes)

    def validate(self) -> None:
        validate_dataset(self)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the synthetic generator with known ground truth."""

    seen: int
    unseen: int
    k: int
    l: int
    samples_per_class: int = 50
    sigma_vis: float = 0.01
    sigma_attr: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.seen < 2:
            raise ValueError("seen must be >= 2")
        if self.unseen < 1:
            raise ValueError("unseen must be >= 1")
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.sigma_vis < 0 or self.sigma_attr < 0:
            raise ValueError("noise stds must be nonnegative")


def validate_dataset(ds: GzslDataset) -> None:
    """Check every structural invariant; raise DatasetError on violation."""
    if ds.features.ndim != 2 or ds.attributes.ndim != 2:
        raise DatasetError("features and attributes must be 2-D matrices")
    n, k = ds.features.shape
    c, l = ds.attributes.shape
    if k < 1 or l < 1:
        raise DatasetError("feature and attribute dimensions must be >= 1")
    if ds.labels.shape != (n,):
        raise DatasetError(
            f"row count mismatch: {n} feature rows vs {ds.labels.shape[0]} labels"
        )
    if not np.isfinite(ds.features).all():
        raise DatasetError("non-finite values in features")
    if not np.isfinite(ds.attributes).all():
        raise DatasetError("non-finite values in attributes")

    s, u = len(ds.seen_classes), len(ds.unseen_classes)
    if s < 1 or u < 1:
        raise DatasetError("need at least one seen and one unseen class")
    if s + u != c:
        raise DatasetError(f"class sets cover {s + u} ids but attributes has {c} rows")
    if ds.seen_classes != frozenset(range(s)):
        raise DatasetError("seen classes must occupy the contiguous range [0, S)")
    if ds.unseen_classes != frozenset(range(s, c)):
        raise DatasetError("unseen classes must occupy the contiguous range [S, C)")

    if ds.labels.size and (ds.labels.min() < 0 or ds.labels.max() >= c):
        raise DatasetError(f"label out of range [0, {c})")

    sp = ds.splits
    for fname, idx in (("train", sp.train), ("test_seen", sp.test_seen), ("test_unseen", sp.test_unseen)):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DatasetError(f"splits.{fname}: sample index out of range [0, {n})")
    combined = np.concatenate([sp.train, sp.test_seen, sp.test_unseen])
    if np.unique(combined).size != combined.size:
        raise DatasetError("overlapping splits: train/test_seen/test_unseen must be disjoint")
    if sp.train.size and not all(int(y) in ds.seen_classes for y in ds.labels[sp.train]):
        raise DatasetError("train split contains a sample of an unseen class")
    if sp.test_unseen.size and not all(int(y) in ds.unseen_classes for y in ds.labels[sp.test_unseen]):
        raise DatasetError("test_unseen split contains a sample of a seen class")

    sub, pseudo = sp.calib_subtrain_classes, sp.calib_pseudo_unseen_classes
    if not sub or not pseudo:
        raise DatasetError("calibration class sets must both be nonempty")
    if sub & pseudo:
        raise DatasetError("calibration class sets overlap")
    if sub | pseudo != ds.seen_classes:
        raise DatasetError("calibration class sets must partition the seen classes")


def generate_synthetic(spec: SynthSpec) -> tuple[GzslDataset, np.ndarray]:
    """Build a dataset with a known linear semantic-to-visual ground truth.

    Prototypes sit on scaled axis directions plus ``sigma_attr`` Gaussian
    spread, which keeps every pairwise distance strictly positive even with
    zero spread.  Each sample is its class prototype pushed through the
    returned (L, K) ground-truth map plus ``sigma_vis`` Gaussian noise.
    Returns the dataset and the ground-truth matrix.
    """
    rng = np.random.default_rng(spec.seed)
    c = spec.seen + spec.unseen

    anchors = np.zeros((c, spec.l))
    for cls in range(c):
        anchors[cls, cls % spec.l] = 1.0 + cls // spec.l
    attributes = anchors + spec.sigma_attr * rng.standard_normal((c, spec.l))

    ground_truth = rng.standard_normal((spec.l, spec.k)) / math.sqrt(spec.l)

    n = c * spec.samples_per_class
    labels = np.repeat(np.arange(c), spec.samples_per_class)
    features = attributes[labels] @ ground_truth
    if spec.sigma_vis > 0:
        features = features + spec.sigma_vis * rng.standard_normal((n, spec.k))

    train_idx: list[int] = []
    test_seen_idx: list[int] = []
    test_unseen_idx: list[int] = []
    for cls in range(c):
        cls_idx = np.flatnonzero(labels == cls)
        if cls >= spec.seen:
            test_unseen_idx.extend(cls_idx.tolist())
            continue
        perm = rng.permutation(cls_idx)
        n_cls = perm.size
        n_train = n_cls if n_cls < 2 else min(n_cls - 1, max(1, round(0.8 * n_cls)))
        train_idx.extend(sorted(perm[:n_train].tolist()))
        test_seen_idx.extend(sorted(perm[n_train:].tolist()))

    pseudo_count = math.ceil(spec.seen / 3)
    pseudo = rng.choice(spec.seen, size=pseudo_count, replace=False)
    pseudo_set = frozenset(int(p) for p in pseudo)
    sub_set = frozenset(range(spec.seen)) - pseudo_set

    splits = SplitManifest(
        train=np.array(train_idx, dtype=np.intp),
        test_seen=np.array(test_seen_idx, dtype=np.intp),
        test_unseen=np.array(test_unseen_idx, dtype=np.intp),
        calib_subtrain_classes=sub_set,
        calib_pseudo_unseen_classes=pseudo_set,
    )
    ds = GzslDataset(
        features=features,
        labels=labels.astype(np.intp),
        attributes=attributes,
        seen_classes=frozenset(range(spec.seen)),
        unseen_classes=frozenset(range(spec.seen, c)),
        splits=splits,
        name=f"synth-s{spec.seen}-u{spec.unseen}",
    )
    ds.validate()
    return ds, ground_truth


def make_calibration_split(ds: GzslDataset, pseudo_unseen_count: int, seed: int) -> SplitManifest:
    """Re-draw the calibration class split: hold out ``pseudo_unseen_count``
    seen classes (seeded, uniform) as pseudo-unseen; the rest sub-train."""
    s = ds.n_seen
    if not 1 <= pseudo_unseen_count < s:
        raise ValueError(
            f"pseudo_unseen_count must be in [1, {s}), got {pseudo_unseen_count}"
        )
    rng = np.random.default_rng(seed)
    seen_sorted = np.array(sorted(ds.seen_classes))
    pseudo = rng.choice(seen_sorted, size=pseudo_unseen_count, replace=False)
    pseudo_set = frozenset(int(p) for p in pseudo)
    return replace(
        ds.splits,
        calib_subtrain_classes=ds.seen_classes - pseudo_set,
        calib_pseudo_unseen_classes=pseudo_set,
    )


# ---------------------------------------------------------------------------
# On-disk format
# ---------------------------------------------------------------------------


def save_dataset(ds: GzslDataset, out_dir: str) -> None:
    """Write the dataset directory (manifest + CSVs + splits)."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "name": ds.name,
        "k": ds.n_features,
        "l": ds.n_attributes,
        "classes": [
            {"id": cls, "seen": cls in ds.seen_classes} for cls in range(ds.n_classes)
        ],
        "files": {
            "features": "features.csv",
            "labels": "labels.csv",
            "attributes": "attributes.csv",
            "splits": "splits.json",
        },
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    np.savetxt(os.path.join(out_dir, "features.csv"), ds.features, fmt=FLOAT_FMT, delimiter=",", newline="\n")
    np.savetxt(os.path.join(out_dir, "labels.csv"), ds.labels[:, None], fmt="%d", delimiter=",", newline="\n")
    np.savetxt(os.path.join(out_dir, "attributes.csv"), ds.attributes, fmt=FLOAT_FMT, delimiter=",", newline="\n")
    splits = {
        "train": ds.splits.train.tolist(),
        "test_seen": ds.splits.test_seen.tolist(),
        "test_unseen": ds.splits.test_unseen.tolist(),
        "calib_subtrain_classes": sorted(ds.splits.calib_subtrain_classes),
        "calib_pseudo_unseen_classes": sorted(ds.splits.calib_pseudo_unseen_classes),
    }
    _write_json(os.path.join(out_dir, "splits.json"), splits)


def load_dataset(manifest_path: str) -> GzslDataset:
    """Load and validate a dataset directory.

    ``manifest_path`` may be the directory or the manifest.json inside it.
    External class ids are normalized so seen classes come first, each block
    sorted by original id; labels and calibration sets are remapped.
    """
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise DatasetError(f"missing file: {manifest_path}")
    base = os.path.dirname(manifest_path)
    manifest = _read_json(manifest_path)

    for key in ("k", "l", "classes", "files"):
        if key not in manifest:
            raise DatasetError(f"{manifest_path}: manifest missing field '{key}'")
    files = manifest["files"]
    paths = {}
    for role in ("features", "labels", "attributes", "splits"):
        if role not in files:
            raise DatasetError(f"{manifest_path}: manifest lists no '{role}' file")
        paths[role] = os.path.join(base, files[role])
        if not os.path.isfile(paths[role]):
            raise DatasetError(f"missing file: {paths[role]}")

    class_rows = manifest["classes"]
    seen_orig = sorted(int(r["id"]) for r in class_rows if r["seen"])
    unseen_orig = sorted(int(r["id"]) for r in class_rows if not r["seen"])
    if len(set(seen_orig) | set(unseen_orig)) != len(class_rows):
        raise DatasetError(f"{manifest_path}: duplicate class ids in manifest")
    order = seen_orig + unseen_orig
    id_map = {orig: new for new, orig in enumerate(order)}
    # attributes.csv rows follow the manifest class-table order
    table_order = [int(r["id"]) for r in class_rows]
    row_of_orig = {orig: i for i, orig in enumerate(table_order)}

    k, l = int(manifest["k"]), int(manifest["l"])
    features = _read_float_csv(paths["features"], k)
    attributes_raw = _read_float_csv(paths["attributes"], l)
    labels_orig = _read_int_csv(paths["labels"])

    if len(class_rows) != attributes_raw.shape[0]:
        raise DatasetError(
            f"{paths['attributes']}: row count mismatch: {attributes_raw.shape[0]} rows "
            f"vs {len(class_rows)} classes in manifest"
        )
    if labels_orig.shape[0] != features.shape[0]:
        raise DatasetError(
            f"{paths['labels']}: row count mismatch: {labels_orig.shape[0]} labels "
            f"vs {features.shape[0]} feature rows"
        )

    labels = np.empty_like(labels_orig)
    for i, y in enumerate(labels_orig):
        if int(y) not in id_map:
            raise DatasetError(f"{paths['labels']} line {i + 1}: label {y} not in manifest class table")
        labels[i] = id_map[int(y)]
    attributes = attributes_raw[[row_of_orig[orig] for orig in order]]

    raw_splits = _read_json(paths["splits"])
    for key in ("train", "test_seen", "test_unseen", "calib_subtrain_classes", "calib_pseudo_unseen_classes"):
        if key not in raw_splits:
            raise DatasetError(f"{paths['splits']}: missing field '{key}'")

    def _map_classes(key: str) -> frozenset[int]:
        out = set()
        for y in raw_splits[key]:
            if int(y) not in id_map:
                raise DatasetError(f"{paths['splits']}: {key} lists unknown class id {y}")
            out.add(id_map[int(y)])
        return frozenset(out)

    splits = SplitManifest(
        train=np.array(raw_splits["train"], dtype=np.intp),
        test_seen=np.array(raw_splits["test_seen"], dtype=np.intp),
        test_unseen=np.array(raw_splits["test_unseen"], dtype=np.intp),
        calib_subtrain_classes=_map_classes("calib_subtrain_classes"),
        calib_pseudo_unseen_classes=_map_classes("calib_pseudo_unseen_classes"),
    )
    ds = GzslDataset(
        features=features,
        labels=labels,
        attributes=attributes,
        seen_classes=frozenset(id_map[o] for o in seen_orig),
        unseen_classes=frozenset(id_map[o] for o in unseen_orig),
        splits=splits,
        name=str(manifest.get("name", "dataset")),
    )
    ds.validate()
    return ds


def _read_float_csv(path: str, expected_cols: int) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != expected_cols:
                raise DatasetError(
                    f"{path} line {lineno}: column count mismatch: expected {expected_cols}, got {len(parts)}"
                )
            try:
                row = np.array(parts, dtype=float)
            except ValueError as exc:
                raise DatasetError(f"{path} line {lineno}: {exc}") from exc
            if not np.isfinite(row).all():
                raise DatasetError(f"{path} line {lineno}: non-finite value")
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: empty file")
    return np.vstack(rows)


def _read_int_csv(path: str) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError as exc:
                raise DatasetError(f"{path} line {lineno}: {exc}") from exc
    return np.array(values, dtype=np.intp)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path} line {exc.lineno}: invalid JSON ({exc.msg})") from exc


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def datasets_equal(a: GzslDataset, b: GzslDataset, rtol: float = 1e-8) -> bool:
    """Field-for-field equality up to the on-disk text precision."""
    return (
        a.features.shape == b.features.shape
        and np.allclose(a.features, b.features, rtol=rtol, atol=1e-12)
        and np.array_equal(a.labels, b.labels)
        and np.allclose(a.attributes, b.attributes, rtol=rtol, atol=1e-12)
        and a.seen_classes == b.seen_classes
        and a.unseen_classes == b.unseen_classes
        and np.array_equal(a.splits.train, b.splits.train)
        and np.array_equal(a.splits.test_seen, b.splits.test_seen)
        and np.array_equal(a.splits.test_unseen, b.splits.test_unseen)
        and a.splits.calib_subtrain_classes == b.splits.calib_subtrain_classes
        and a.splits.calib_pseudo_unseen_classes == b.splits.calib_pseudo_unseen_classes
    )
