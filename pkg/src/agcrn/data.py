"""Dataset loading, min-max scaling and the stratified half / 70-30 split."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

MISSING = frozenset({"", "?", "NA", "na", "nan", "NaN"})


class DataError(Exception):
    """Raised for unreadable or unusable data files."""


@dataclass
class Dataset:
    name: str
    features: np.ndarray
    targets: np.ndarray
    class_labels: list[str]
    dropped: int = 0
    checksum: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2 or self.targets.ndim != 2:
            raise DataError("features and targets must be 2-D")
        if self.features.shape[0] != self.targets.shape[0]:
            raise DataError("features and targets differ in row count")
        if self.targets.shape[1] != len(self.class_labels):
            raise DataError("target columns do not match class labels")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.targets.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=1)

    def subset(self, rows: Sequence[int], suffix: str = "") -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return replace(self, name=self.name + suffix, features=self.features[rows],
                       targets=self.targets[rows])


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    half_fraction: float = 0.5
    train_fraction: float = 0.7


def one_hot(labels: Sequence[int], n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), np.asarray(labels, dtype=int)] = 1.0
    return out


def _column_index(header: list[str] | None, ref, width: int) -> int:
    if isinstance(ref, str) and not ref.lstrip("-").isdigit():
        if header is None or ref not in header:
            raise DataError(f"column {ref!r} not found in header")
        return header.index(ref)
    i = int(ref)
    if not -width <= i < width:
        raise DataError(f"column index {i} out of range for {width} columns")
    return i % width


def load_csv(path, label=-1, header: bool = True, delimiter: str = ",",
             ignore: Sequence = (), name: str | None = None) -> Dataset:
    """Read a delimited file with one label column.

    Non-numeric feature columns are integer-coded by sorted distinct value.
    Rows containing a missing value are dropped and counted in ``dropped``.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
        text = raw.decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: cannot read file: {exc}") from exc
    rows = [(n, r) for n, r in enumerate(csv.reader(text.splitlines(), delimiter=delimiter), 1)
            if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: no rows")
    names = None
    if header:
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    width = len(names) if names is not None else len(rows[0][1])
    for n, r in rows:
        if len(r) != width:
            raise DataError(f"{path}:{n}: expected {width} fields, found {len(r)}")
    label_col = _column_index(names, label, width)
    skip = {_column_index(names, c, width) for c in ignore} | {label_col}
    feature_cols = [i for i in range(width) if i not in skip]

    kept, dropped = [], 0
    for n, r in rows:
        cells = [c.strip() for c in r]
        if any(cells[i] in MISSING for i in feature_cols + [label_col]):
            dropped += 1
            continue
        kept.append((n, cells))
    if not kept:
        raise DataError(f"{path}: no usable rows ({dropped} dropped for missing values)")

    columns = []
    for i in feature_cols:
        values = [cells[i] for _, cells in kept]
        try:
            columns.append([float(v) for v in values])
        except ValueError:
            codes = {v: k for k, v in enumerate(sorted(set(values)))}
            columns.append([float(codes[v]) for v in values])
    if not feature_cols:
        raise DataError(f"{path}: no feature columns")
    features = np.array(columns).T
    if not np.all(np.isfinite(features)):
        bad = kept[int(np.where(~np.isfinite(features))[0][0])][0]
        raise DataError(f"{path}:{bad}: non-finite feature value")

    raw_labels = [cells[label_col] for _, cells in kept]
    try:
        classes = sorted(set(raw_labels), key=float)
    except ValueError:
        classes = sorted(set(raw_labels))
    index = {c: k for k, c in enumerate(classes)}
    targets = one_hot([index[v] for v in raw_labels], len(classes))
    return Dataset(name or path.stem, features, targets, classes, dropped,
                   hashlib.sha256(raw).hexdigest())


BUILTIN = {
    "cancer": dict(file="cancer.csv", label="class", ignore=["id"]),
    "diabetes": dict(file="diabetes.csv", label="class", ignore=[]),
    "glass": dict(file="glass.csv", label="type", ignore=[]),
}
ALIASES = {"vidros": "glass", "pima": "diabetes", "breast-cancer": "cancer"}


def builtin_path(name: str) -> Path:
    key = ALIASES.get(name.lower(), name.lower())
    if key not in BUILTIN:
        raise DataError(f"unknown dataset {name!r}; bundled: {', '.join(sorted(BUILTIN))}")
    return Path(str(resources.files("agcrn") / "datasets" / BUILTIN[key]["file"]))


def load_dataset(name_or_path: str, **kwargs) -> Dataset:
    """Load a bundled dataset by name, or any CSV file by path."""
    key = ALIASES.get(name_or_path.lower(), name_or_path.lower())
    if key in BUILTIN:
        spec = BUILTIN[key]
        return load_csv(builtin_path(key), label=spec["label"], ignore=spec["ignore"], name=key)
    path = Path(name_or_path)
    if not path.exists():
        raise DataError(f"unknown dataset {name_or_path!r}; bundled: {', '.join(sorted(BUILTIN))}")
    return load_csv(path, **kwargs)


@dataclass(frozen=True)
class MinMax:
    low: np.ndarray
    span: np.ndarray

    def transform(self, d: Dataset) -> Dataset:
        x = np.where(self.span > 0, (d.features - self.low) / np.where(self.span > 0, self.span, 1.0), 0.5)
        return replace(d, features=x)


def fit_minmax(reference: Dataset) -> MinMax:
    if len(reference) == 0:
        raise DataError("cannot fit scaling on an empty dataset")
    low = reference.features.min(axis=0)
    return MinMax(low, reference.features.max(axis=0) - low)


def normalize(d: Dataset, reference: Dataset | None = None) -> Dataset:
    """Min-max scale ``d`` with statistics from ``reference`` (default: ``d``).

    Constant reference columns map to 0.5. Rows outside the reference
    range are not clamped.
    """
    return fit_minmax(d if reference is None else reference).transform(d)


def _part_sizes(n: int, spec: SplitSpec) -> list[int]:
    """Sizes of (A train, A val, B train, B val); A is the first half."""
    a = int(n * spec.half_fraction)
    b = n - a
    if a == 0 or b == 0:
        raise DataError(f"cannot halve {n} patterns")
    at, bt = int(a * spec.train_fraction), int(b * spec.train_fraction)
    return [at, a - at, bt, b - bt]


def _stratified_counts(counts: np.ndarray, sizes: list[int], rng: np.random.Generator) -> np.ndarray:
    """Integer class-by-part counts, each within one pattern of its proportional share.

    Every cell and both half totals are rounded down or up from
    ``count * size / n``. The constraints are totally unimodular, so such a
    rounding always exists; random objective weights pick among the ties.
    """
    n, k, m = int(counts.sum()), len(counts), len(sizes)
    counts, sizes_a = counts.astype(np.int64), np.asarray(sizes, dtype=np.int64)
    prod = np.outer(counts, sizes_a)
    lo, hi = prod // n, -(-prod // n)
    halves = np.outer(counts, [sizes[0] + sizes[1], sizes[2] + sizes[3]])
    eye = np.eye(k)
    rows = LinearConstraint(np.kron(eye, np.ones(m)), counts, counts)
    cols = LinearConstraint(np.kron(np.ones(k), np.eye(m)), sizes_a, sizes_a)
    groups = LinearConstraint(np.vstack([np.kron(eye, [1, 1, 0, 0]), np.kron(eye, [0, 0, 1, 1])]),
                              np.concatenate([halves[:, 0] // n, halves[:, 1] // n]),
                              np.concatenate([-(-halves[:, 0] // n), -(-halves[:, 1] // n)]))
    res = milp(rng.random(k * m), constraints=[rows, cols, groups], integrality=np.ones(k * m),
               bounds=Bounds(lo.ravel(), hi.ravel()))
    if res.x is None:
        raise DataError(f"no stratified allocation found: {res.message}")
    return np.rint(res.x).astype(int).reshape(k, m)


def _parts(d: Dataset, spec: SplitSpec) -> list[np.ndarray]:
    labels = d.labels
    counts = np.bincount(labels, minlength=d.n_classes)
    if np.any((counts > 0) & (counts < 2)):
        raise DataError(f"every class needs at least 2 patterns, got counts {counts.tolist()}")
    rng = np.random.default_rng(spec.seed)
    alloc = _stratified_counts(counts, _part_sizes(len(d), spec), rng)
    parts = [[] for _ in range(alloc.shape[1])]
    for c in range(d.n_classes):
        idx = rng.permutation(np.flatnonzero(labels == c))
        for p, chunk in enumerate(np.split(idx, np.cumsum(alloc[c])[:-1])):
            parts[p].append(chunk)
    return [np.sort(np.concatenate(p)) for p in parts]


def half_split(d: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of the two stratified halves."""
    at, av, bt, bv = _parts(d, spec)
    return np.sort(np.concatenate([at, av])), np.sort(np.concatenate([bt, bv]))


def split(d: Dataset, spec: SplitSpec, swap: bool = False) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified (train, validation, test) partition.

    The first half is the test set and the second is divided
    ``train_fraction`` / remainder into train and validation; ``swap``
    exchanges the roles of the halves. Each class's count in each part is
    within one pattern of its overall share.
    """
    at, av, bt, bv = _parts(d, spec)
    train, val, test = (at, av, np.concatenate([bt, bv])) if swap else (bt, bv, np.concatenate([at, av]))
    return (d.subset(train, ":train"), d.subset(val, ":val"), d.subset(np.sort(test), ":test"))


def prepare(d: Dataset, spec: SplitSpec, swap: bool = False) -> tuple[Dataset, Dataset, Dataset]:
    """Split, then scale all three parts with training-set statistics."""
    train, val, test = split(d, spec, swap)
    scaler = fit_minmax(train)
    return scaler.transform(train), scaler.transform(val), scaler.transform(test)
