"""Stream data model, the synthetic imbalanced generator and CSV ingestion.

A :class:`Dataset` is stored column-wise (a feature matrix plus a target
vector) because every consumer walks it in order and the learners want numpy
rows; iterating it still yields :class:`Instance` objects.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from histstream.errors import ConfigError, DataError, InputError

__all__ = [
    "Dataset",
    "Instance",
    "PhaseSplit",
    "Region",
    "SyntheticConfig",
    "generate_synthetic",
    "load_csv",
    "region_counts",
    "split_phases",
    "synthetic_layout",
    "write_csv",
]


@dataclass(frozen=True)
class Instance:
    features: tuple[float, ...]
    target: float

    def __post_init__(self):
        if not math.isfinite(self.target) or not all(math.isfinite(v) for v in self.features):
            raise InputError("instance values must be finite")


class Dataset:
    """Immutable, ordered collection of instances (the stream order)."""

    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        name: str = "dataset",
        feature_names: Sequence[str] | None = None,
        target_name: str = "y",
    ):
        X = np.array(X, dtype=float, copy=True)
        y = np.array(y, dtype=float, copy=True).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if len(X) else X.reshape(0, 0)
        if X.shape[0] != y.shape[0]:
            raise InputError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise InputError("dataset contains non-finite values")
        if feature_names is None:
            feature_names = [f"x{i}" for i in range(X.shape[1])]
        if len(feature_names) != X.shape[1]:
            raise InputError("feature_names length does not match feature count")
        X.flags.writeable = False
        y.flags.writeable = False
        self.X = X
        self.y = y
        self.name = name
        self.feature_names = tuple(feature_names)
        self.target_name = target_name

    @classmethod
    def from_instances(cls, instances: Sequence[Instance], name: str = "dataset") -> Dataset:
        if not instances:
            return cls(np.zeros((0, 0)), np.zeros(0), name=name)
        width = len(instances[0].features)
        if any(len(inst.features) != width for inst in instances):
            raise InputError("feature count must be constant within a dataset")
        X = np.array([inst.features for inst in instances], dtype=float).reshape(len(instances), width)
        y = np.array([inst.target for inst in instances], dtype=float)
        return cls(X, y, name=name)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def instances(self) -> list[Instance]:
        return list(self)

    def __len__(self) -> int:
        return self.y.shape[0]

    def __getitem__(self, i: int) -> Instance:
        return Instance(tuple(float(v) for v in self.X[i]), float(self.y[i]))

    def __iter__(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and self.X.tobytes() == other.X.tobytes()
            and self.y.tobytes() == other.y.tobytes()
        )

    def __repr__(self) -> str:
        return f"Dataset(name={self.name!r}, n={len(self)}, n_features={self.n_features})"


# ---------------------------------------------------------------------------
# Phase split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSplit:
    warm_fraction: float = 0.15
    train_fraction: float = 0.20

    def __post_init__(self):
        for label, f in (("warm_fraction", self.warm_fraction), ("train_fraction", self.train_fraction)):
            if not 0.0 < f < 1.0:
                raise ConfigError(f"{label} must lie in (0, 1), got {f}")
        if self.warm_fraction + self.train_fraction >= 1.0:
            raise ConfigError("warm_fraction + train_fraction must be < 1")

    @property
    def test_fraction(self) -> float:
        return 1.0 - self.warm_fraction - self.train_fraction

    def sizes(self, n: int) -> tuple[int, int, int]:
        # the epsilon absorbs binary representation error, e.g. 100 * 0.29
        n_warm = math.floor(n * self.warm_fraction + 1e-9)
        n_train = math.floor(n * self.train_fraction + 1e-9)
        return n_warm, n_train, n - n_warm - n_train


def split_phases(dataset: Dataset, split: PhaseSplit) -> tuple[slice, slice, slice]:
    """Return the warm, train and test slices as contiguous prefixes."""
    n = len(dataset)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    n_warm, n_train, _ = split.sizes(n)
    return slice(0, n_warm), slice(n_warm, n_warm + n_train), slice(n_warm + n_train, n)


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

FREQUENT_SCALE = 0.001
TAIL_SCALE = 0.0001
MIDDLE_SCALE = 0.00001
MIDDLE_SHIFT = 350.0


@dataclass(frozen=True)
class Region:
    """One y-interval of the synthetic layout and the function generating it.

    ``x_lo``/``x_hi`` bound the region-local input x'; ``offset`` maps x' to
    the global coordinate ``x = offset + (x' - x_lo)``.
    """

    kind: str  # "frequent", "tail" or "middle"
    y_lo: float
    y_hi: float
    x_lo: float
    x_hi: float
    offset: float

    @property
    def rare(self) -> bool:
        return self.kind != "frequent"

    def f(self, x_local):
        x_local = np.asarray(x_local, dtype=float)
        if self.kind == "frequent":
            return self.y_lo + FREQUENT_SCALE * x_local**2
        if self.kind == "tail":
            return self.y_lo + TAIL_SCALE * x_local**3
        return self.y_lo + MIDDLE_SCALE * (x_local - MIDDLE_SHIFT) ** 3

    def to_local(self, x_global):
        return np.asarray(x_global, dtype=float) - self.offset + self.x_lo


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 100_000
    rare_fraction: float = 0.05
    seed: int = 0
    frequent: tuple[tuple[float, float], ...] = ((150.0, 350.0), (650.0, 850.0))
    rare: tuple[tuple[float, float], ...] = ((0.0, 150.0), (350.0, 650.0), (850.0, 1000.0))
    name: str = "synthetic"

    def with_seed(self, seed: int) -> SyntheticConfig:
        return SyntheticConfig(self.n, self.rare_fraction, seed, self.frequent, self.rare, self.name)


def _local_domain(kind: str, height: float) -> tuple[float, float]:
    if kind == "frequent":
        return 0.0, math.sqrt(height / FREQUENT_SCALE)
    if kind == "tail":
        return 0.0, (height / TAIL_SCALE) ** (1.0 / 3.0)
    return MIDDLE_SHIFT, MIDDLE_SHIFT + (height / MIDDLE_SCALE) ** (1.0 / 3.0)


def synthetic_layout(config: SyntheticConfig) -> list[Region]:
    """Validate the region layout and return the regions sorted by y.

    Rare regions at either end of the target range use the tail cubic; rare
    regions between frequent ones use the shifted (middle) cubic.
    """
    if not config.frequent or not config.rare:
        raise ConfigError("layout needs at least one frequent and one rare region")
    tagged = [(lo, hi, "frequent") for lo, hi in config.frequent] + [(lo, hi, "rare") for lo, hi in config.rare]
    tagged.sort()
    for lo, hi, _ in tagged:
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            raise ConfigError(f"invalid region [{lo}, {hi}]")
    for (_, hi, _), (lo, _, _) in zip(tagged, tagged[1:]):
        if not math.isclose(hi, lo, rel_tol=0.0, abs_tol=1e-12):
            raise ConfigError(f"regions must tile the target range without gaps or overlaps ({hi} vs {lo})")

    regions = []
    offset = 0.0
    last = len(tagged) - 1
    for i, (lo, hi, role) in enumerate(tagged):
        if role == "frequent":
            kind = "frequent"
        else:
            kind = "tail" if i in (0, last) else "middle"
        x_lo, x_hi = _local_domain(kind, hi - lo)
        regions.append(Region(kind, lo, hi, x_lo, x_hi, offset))
        offset += x_hi - x_lo
    return regions


def _even_split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def region_counts(config: SyntheticConfig) -> list[tuple[Region, int]]:
    """Regions in target order with the number of instances each receives."""
    regions = synthetic_layout(config)
    n_frequent = round(config.n * (1.0 - config.rare_fraction))
    frequent = [r for r in regions if not r.rare]
    rare = [r for r in regions if r.rare]
    counts = dict(zip(map(id, frequent), _even_split(n_frequent, len(frequent))))
    counts.update(zip(map(id, rare), _even_split(config.n - n_frequent, len(rare))))
    return [(r, counts[id(r)]) for r in regions]


def generate_synthetic(config: SyntheticConfig) -> Dataset:
    """Draw the piecewise quadratic/cubic imbalanced dataset.

    Exactly ``round(n * (1 - rare_fraction))`` instances fall in the frequent
    regions. Counts are split evenly between regions of the same role, and
    the result is shuffled with the seeded generator.
    """
    if config.n < 1:
        raise DataError("synthetic dataset size must be at least 1")
    if not 0.0 < config.rare_fraction < 1.0:
        raise ConfigError(f"rare_fraction must lie in (0, 1), got {config.rare_fraction}")
    rng = np.random.default_rng(config.seed)
    xs, ys = [], []
    for region, m in region_counts(config):
        x_local = rng.uniform(region.x_lo, region.x_hi, size=m)
        y = np.clip(region.f(x_local), region.y_lo, region.y_hi)
        xs.append(region.offset + (x_local - region.x_lo))
        ys.append(y)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(config.n)
    return Dataset(x[order].reshape(-1, 1), y[order], name=config.name, feature_names=["x"], target_name="y")


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _parse_cell(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {line}, column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {line}, column {column!r}: non-finite value {text!r}")
    return value


def load_csv(
    path: str | os.PathLike,
    target_column: str | int = -1,
    header: bool = True,
    name: str | None = None,
) -> Dataset:
    """Read a numeric CSV file into a :class:`Dataset`.

    Every non-target column becomes a feature, in file order. Rows are
    reported by their 1-based line number in error messages. No scaling or
    imputation is performed.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if row and any(c.strip() for c in row)]
    if header:
        if not rows:
            raise DataError(f"{path}: missing header row")
        _, names = rows[0]
        names = [c.strip() for c in names]
        rows = rows[1:]
    else:
        width = len(rows[0][1]) if rows else 0
        names = [str(i) for i in range(width)]

    if isinstance(target_column, int):
        idx = target_column if target_column >= 0 else len(names) + target_column
        if not 0 <= idx < len(names):
            raise DataError(f"{path}: target column index {target_column} out of range")
    else:
        if target_column not in names:
            if not header and target_column.lstrip("-").isdigit():
                return load_csv(path, int(target_column), header=header, name=name)
            raise DataError(f"{path}: no target column {target_column!r} (columns: {', '.join(names)})")
        idx = names.index(target_column)

    feature_idx = [j for j in range(len(names)) if j != idx]
    X = np.empty((len(rows), len(feature_idx)))
    y = np.empty(len(rows))
    for r, (line, row) in enumerate(rows):
        if len(row) != len(names):
            raise DataError(f"row {line}: expected {len(names)} columns, found {len(row)}")
        y[r] = _parse_cell(row[idx].strip(), line, names[idx])
        for c, j in enumerate(feature_idx):
            X[r, c] = _parse_cell(row[j].strip(), line, names[j])

    feature_names = [names[j] if header else f"x{j}" for j in feature_idx]
    return Dataset(
        X, y,
        name=name or path.stem,
        feature_names=feature_names,
        target_name=names[idx] if header else "y",
    )


def write_csv(dataset: Dataset, path: str | os.PathLike) -> None:
    """Write features then target, with a header, using round-trip float repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.feature_names, dataset.target_name])
        for row, target in zip(dataset.X.tolist(), dataset.y.tolist()):
            writer.writerow([repr(v) for v in row] + [repr(target)])
