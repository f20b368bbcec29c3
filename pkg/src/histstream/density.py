"""Online target-density estimation and the fixed relevance model.

:class:`PidHistogram` is a single-pass, partition-incremental histogram: bins
extend outwards when values fall outside the covered range and split when they
hold too much of the total mass. :class:`RelevanceModel` is a plain
equal-width histogram over a reference target column; ``phi`` turns its bin
counts into a relevance score in [0, 1].
"""
from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from histstream.errors import ConfigError, DataError, InputError, StateError

__all__ = ["OUT_OF_RANGE", "PidHistogram", "RelevanceModel", "build_relevance", "phi", "relative_density"]

#: Returned by :meth:`PidHistogram.bin_index` for values outside the covered range.
OUT_OF_RANGE = -1


class PidHistogram:
    """Incremental histogram with extend-and-split maintenance.

    Parameters
    ----------
    initial_bins : int
        Number of equal-width bins laid over the first observed range.
    split_threshold : float
        A bin whose count exceeds ``split_threshold * total`` (and holds at
        least two values) is halved at its midpoint.
    max_bins : int
        Hard cap on the number of bins.

    Notes
    -----
    The histogram starts *unprimed*: values are buffered until two distinct
    ones have been seen, then ``initial_bins`` bins are laid over the
    buffer's range and the buffer is replayed. The upper boundary of the last
    bin is inclusive. Bin indices are 0-based.

    Values beyond the covered range append bins of the priming width. When
    those would not fit under ``max_bins``, adjacent bins are merged pairwise
    and the extension width doubles, as often as needed. Splits are
    suppressed while the histogram is at the cap.
    """

    def __init__(self, initial_bins: int = 10, split_threshold: float = 0.15, max_bins: int = 400):
        if not isinstance(initial_bins, int) or initial_bins < 2:
            raise ConfigError(f"initial_bins must be an integer >= 2, got {initial_bins!r}")
        if not 0.0 < split_threshold < 1.0:
            raise ConfigError(f"split_threshold must lie in (0, 1), got {split_threshold!r}")
        if not isinstance(max_bins, int) or max_bins < initial_bins:
            raise ConfigError(f"max_bins must be an integer >= initial_bins, got {max_bins!r}")
        self.initial_bins = initial_bins
        self.split_threshold = split_threshold
        self.max_bins = max_bins
        self.breaks: list[float] = []
        self.counts: list[int] = []
        self.total = 0
        self.step = 0.0  # width of bins created by range extension
        self._buffer: list[float] = []
        self._max = 0

    @classmethod
    def from_bins(
        cls,
        breaks: Sequence[float],
        counts: Sequence[int],
        split_threshold: float = 0.15,
        max_bins: int = 400,
        step: float | None = None,
    ) -> PidHistogram:
        """Build a primed histogram from explicit state (tests, JSON dumps)."""
        breaks = [float(b) for b in breaks]
        counts = [int(c) for c in counts]
        if len(counts) < 1 or len(breaks) != len(counts) + 1:
            raise ConfigError("need len(breaks) == len(counts) + 1 >= 2")
        if any(b >= a for b, a in zip(breaks, breaks[1:])) or any(not math.isfinite(b) for b in breaks):
            raise ConfigError("breaks must be finite and strictly increasing")
        if any(c < 0 for c in counts):
            raise ConfigError("counts must be non-negative")
        hist = cls(max(2, min(len(counts), max_bins)), split_threshold, max(max_bins, len(counts), 2))
        hist.breaks = breaks
        hist.counts = counts
        hist.total = sum(counts)
        hist.step = float(step) if step is not None else (breaks[-1] - breaks[0]) / len(counts)
        if not (hist.step > 0 and math.isfinite(hist.step)):
            raise ConfigError(f"step must be positive and finite, got {step!r}")
        hist._max = max(counts)
        return hist

    # -- state -------------------------------------------------------------

    @property
    def primed(self) -> bool:
        return bool(self.counts)

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def max_count(self) -> int:
        return self._max

    def __repr__(self) -> str:
        if not self.primed:
            return f"PidHistogram(unprimed, total={self.total})"
        return f"PidHistogram(bins={self.n_bins}, range=[{self.breaks[0]:g}, {self.breaks[-1]:g}], total={self.total})"

    # -- queries -----------------------------------------------------------

    def bin_index(self, y: float) -> int:
        """Index ``j`` with ``breaks[j] <= y < breaks[j+1]``, or ``OUT_OF_RANGE``."""
        if not self.primed:
            raise StateError("histogram is not primed yet")
        breaks = self.breaks
        if y < breaks[0] or y > breaks[-1] or y != y:
            return OUT_OF_RANGE
        if y == breaks[-1]:
            return len(self.counts) - 1
        return bisect_right(breaks, y) - 1

    def nearest_bin(self, y: float) -> int:
        """Like :meth:`bin_index` but clamps out-of-range values to an end bin."""
        j = self.bin_index(y)
        if j == OUT_OF_RANGE:
            return 0 if y < self.breaks[0] else len(self.counts) - 1
        return j

    def relative_density(self, j: int) -> float:
        if not self.primed or self._max == 0:
            raise StateError("relative density needs at least one non-empty bin")
        return self.counts[j] / self._max

    # -- updates -----------------------------------------------------------

    def update(self, y: float) -> PidHistogram:
        """Count one value, extending or splitting bins as needed."""
        y = float(y)
        if not math.isfinite(y):
            raise InputError(f"cannot add non-finite value {y!r} to the histogram")
        self.total += 1
        if not self.primed:
            self._buffer.append(y)
            lo, hi = min(self._buffer), max(self._buffer)
            if lo < hi:
                self._prime(lo, hi)
            return self
        self._insert(y)
        return self

    def _prime(self, lo: float, hi: float) -> None:
        k = self.initial_bins
        self.step = (hi - lo) / k
        self.breaks = [lo + (hi - lo) * i / k for i in range(k)] + [hi]
        self.counts = [0] * k
        self._max = 0
        buffered, self._buffer = self._buffer, []
        for value in buffered:
            self._insert(value)

    def _insert(self, y: float) -> None:
        if y < self.breaks[0]:
            self._extend_left(y)
        elif y > self.breaks[-1]:
            self._extend_right(y)
        j = self.bin_index(y)
        c = self.counts[j] + 1
        self.counts[j] = c
        if c > self._max:
            self._max = c
        if c >= 2 and c > self.split_threshold * self.total and len(self.counts) < self.max_bins:
            self._split(j)

    def _split(self, j: int) -> None:
        c = self.counts[j]
        lo, hi = self.breaks[j], self.breaks[j + 1]
        mid = lo + (hi - lo) / 2.0
        if not lo < mid < hi:
            return  # bin already at floating-point resolution
        upper = c // 2
        self.counts[j : j + 1] = [c - upper, upper]
        self.breaks.insert(j + 1, mid)
        if c == self._max:
            self._max = max(self.counts)

    def _coarsen(self) -> None:
        """Merge adjacent bin pairs from the left and double the extension step."""
        breaks, counts = self.breaks, self.counts
        self.counts = [sum(counts[i : i + 2]) for i in range(0, len(counts), 2)]
        self.breaks = breaks[::2] if len(counts) % 2 == 0 else breaks[::2] + [breaks[-1]]
        self.step *= 2.0
        self._max = max(self.counts)

    def _new_bins(self, edge: float, gap: float) -> int:
        """Number of ``step``-wide bins covering ``gap``, coarsening until they fit."""
        while True:
            needed = math.floor(gap / self.step) + 1
            if len(self.counts) + needed <= self.max_bins and edge + self.step != edge:
                return needed
            self._coarsen()

    def _extend_right(self, y: float) -> None:
        needed = self._new_bins(self.breaks[-1], y - self.breaks[-1])
        edge = self.breaks[-1]
        for _ in range(needed):
            edge += self.step
            self.breaks.append(edge)
            self.counts.append(0)
        self.breaks[-1] = max(self.breaks[-1], y)

    def _extend_left(self, y: float) -> None:
        needed = self._new_bins(self.breaks[0], self.breaks[0] - y)
        edge = self.breaks[0]
        new_breaks = []
        for _ in range(needed):
            edge -= self.step
            new_breaks.append(edge)
        new_breaks[-1] = min(new_breaks[-1], y)
        self.breaks[0:0] = new_breaks[::-1]
        self.counts[0:0] = [0] * needed

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "breaks": list(self.breaks),
            "counts": list(self.counts),
            "total": self.total,
            "split_threshold": self.split_threshold,
            "initial_bins": self.initial_bins,
            "max_bins": self.max_bins,
            "step": self.step,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> PidHistogram:
        hist = cls.from_bins(
            data["breaks"], data["counts"],
            split_threshold=data.get("split_threshold", 0.15),
            max_bins=data.get("max_bins", 400),
            step=data.get("step"),
        )
        hist.initial_bins = data.get("initial_bins", hist.initial_bins)
        return hist


@dataclass(frozen=True)
class RelevanceModel:
    """Fixed histogram over a reference target column."""

    breaks: tuple[float, ...]
    counts: tuple[int, ...]
    method: str = "equal-width"

    @property
    def k_bins(self) -> int:
        return len(self.counts)

    @property
    def max_count(self) -> int:
        return max(self.counts)

    def bin_index(self, y: float) -> int:
        """Bin of ``y``; values outside the range are clamped to an end bin."""
        if y <= self.breaks[0]:
            return 0
        if y >= self.breaks[-1]:
            return len(self.counts) - 1
        return bisect_right(self.breaks, y) - 1

    def relative_density(self, j: int) -> float:
        return self.counts[j] / self.max_count

    def phi(self, y: float) -> float:
        return 1.0 - self.relative_density(self.bin_index(y))

    def phi_array(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        breaks = np.asarray(self.breaks)
        idx = np.clip(np.searchsorted(breaks, y, side="right") - 1, 0, len(self.counts) - 1)
        rho = np.asarray(self.counts, dtype=float)[idx] / self.max_count
        return 1.0 - rho

    def to_dict(self) -> dict:
        return {"breaks": list(self.breaks), "counts": list(self.counts), "method": self.method}


def build_relevance(targets, k_bins: int = 20, method: str = "equal-width") -> RelevanceModel:
    """Tally ``targets`` into ``k_bins`` bins spanning ``[min, max]``.

    ``method="equal-frequency"`` places boundaries at quantiles instead; it
    makes every bin hold about the same count, so relevance collapses to
    roughly zero everywhere. It exists only for comparison.
    """
    y = np.asarray(targets, dtype=float).reshape(-1)
    if y.size == 0:
        raise DataError("cannot build a relevance model from no targets")
    if not np.isfinite(y).all():
        raise InputError("targets must be finite")
    if not isinstance(k_bins, (int, np.integer)) or k_bins < 2:
        raise ConfigError(f"k_bins must be an integer >= 2, got {k_bins!r}")
    lo, hi = float(y.min()), float(y.max())
    if not lo < hi:
        raise DataError("degenerate target range: all targets are equal")

    if method == "equal-width":
        breaks = np.linspace(lo, hi, k_bins + 1)
        breaks[-1] = hi
    elif method == "equal-frequency":
        breaks = np.unique(np.quantile(y, np.linspace(0.0, 1.0, k_bins + 1)))
    else:
        raise ConfigError(f"unknown relevance method {method!r}")
    idx = np.clip(np.searchsorted(breaks, y, side="right") - 1, 0, len(breaks) - 2)
    counts = np.bincount(idx, minlength=len(breaks) - 1)
    return RelevanceModel(tuple(float(b) for b in breaks), tuple(int(c) for c in counts), method)


def relative_density(model: PidHistogram | RelevanceModel, j: int) -> float:
    """Count of bin ``j`` divided by the largest bin count."""
    if isinstance(model, PidHistogram):
        return model.relative_density(j)
    if model.max_count == 0:
        raise StateError("relative density needs at least one non-empty bin")
    return model.relative_density(j)


def phi(model: RelevanceModel, y: float) -> float:
    """Relevance of ``y``: one minus the relative density of its bin."""
    return model.phi(y)
