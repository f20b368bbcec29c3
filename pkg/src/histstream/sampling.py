"""Rarity-driven selection and replication rules.

All decision functions are pure: random draws are passed in explicitly so
that a run can be replayed draw-for-draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from histstream.density import PidHistogram
from histstream.errors import ConfigError, InputError, StateError

__all__ = [
    "STRATEGIES",
    "ChebyStats",
    "SamplerConfig",
    "cheby_update",
    "chebyos_replications",
    "chebyus_decide",
    "chebyus_keep_probability",
    "histos_replications",
    "histus_decide",
    "sampling_probability",
]

STRATEGIES = ("baseline", "hist-us", "hist-os", "cheby-us", "cheby-os")


@dataclass(frozen=True)
class SamplerConfig:
    beta: float = 4.0
    alpha: float = 1.02
    second_chance: float = 0.15
    max_replications: int = 1000

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")
        if not self.alpha > 1.0:
            raise ConfigError(f"alpha must be > 1, got {self.alpha}")
        if not 0.0 <= self.second_chance <= 1.0:
            raise ConfigError(f"second_chance must lie in [0, 1], got {self.second_chance}")
        if self.max_replications < 1:
            raise ConfigError("max_replications must be a positive integer")


def sampling_probability(hist: PidHistogram, y: float, beta: float) -> float:
    """``exp(-beta * rho)`` for the bin holding ``y``.

    Values outside the histogram use the nearest end bin.
    """
    if not hist.primed or hist.max_count == 0:
        raise StateError("sampling probability needs a primed, non-empty histogram")
    rho = hist.relative_density(hist.nearest_bin(y))
    return math.exp(-beta * rho)


def histus_decide(p: float, r: float) -> bool:
    """Keep the instance for training when ``r <= p``."""
    return r <= p


def histos_replications(p: float, alpha: float, r: float, cap: int = 1000) -> int:
    """Number of extra training passes for one instance.

    ``r`` is drawn once; while it does not exceed ``p`` the instance is
    trained again and ``p`` is divided by ``alpha``. The count equals
    ``|{k >= 0 : p / alpha**k >= r}|``, truncated at ``cap``.
    """
    if not r > 0.0:
        raise InputError("r must be drawn from the open interval (0, 1)")
    if not alpha > 1.0:
        raise InputError(f"alpha must be > 1, got {alpha}")
    k = 0
    while r <= p and k < cap:
        k += 1
        p /= alpha
    return k


@dataclass
class ChebyStats:
    """Running mean, sample variance and mean absolute deviation.

    The absolute deviation of each value is taken from the mean *before*
    that value was added (the first value contributes zero).
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    mad: float = 0.0

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def update(self, y: float) -> ChebyStats:
        y = float(y)
        if not math.isfinite(y):
            raise InputError(f"non-finite value {y!r}")
        self.count += 1
        if self.count == 1:
            self.mean, self.m2, self.mad = y, 0.0, 0.0
            return self
        delta = y - self.mean
        self.mad += (abs(delta) - self.mad) / self.count
        self.mean += delta / self.count
        self.m2 += delta * (y - self.mean)
        return self


def cheby_update(stats: ChebyStats, y: float) -> ChebyStats:
    return stats.update(y)


def _check_warm(stats: ChebyStats) -> None:
    if stats.count < 2:
        raise StateError("Chebyshev statistics need at least two observations")


def chebyus_keep_probability(stats: ChebyStats, y: float, second_chance: float) -> float:
    """Closed-form probability that :func:`chebyus_decide` keeps ``y``."""
    _check_warm(stats)
    s = stats.std
    t = abs(y - stats.mean) / s if s > 0 else 0.0
    inverse = 1.0 - (min(1.0, 1.0 / (t * t)) if t > 0 else 1.0)
    return inverse + (1.0 - inverse) * second_chance


def chebyus_decide(stats: ChebyStats, y: float, second_chance: float, r1: float, r2: float) -> bool:
    """Keep ``y`` with the inverse Chebyshev bound, or by second chance.

    With ``t = |y - mean| / std`` the bound is ``min(1, 1/t**2)``; the
    instance is kept when ``r1 <= 1 - bound`` and otherwise when
    ``r2 <= second_chance``.
    """
    _check_warm(stats)
    s = stats.std
    t = abs(y - stats.mean) / s if s > 0 else 0.0
    bound = min(1.0, 1.0 / (t * t)) if t > 0 else 1.0
    return r1 <= 1.0 - bound or r2 <= second_chance


def chebyos_replications(stats: ChebyStats, y: float, cap: int = 1000) -> int:
    """Total number of training passes, ``max(1, ceil(|y - mean| / mad))``."""
    _check_warm(stats)
    if stats.mad <= 0.0:
        return 1
    return min(cap, max(1, math.ceil(abs(y - stats.mean) / stats.mad)))
