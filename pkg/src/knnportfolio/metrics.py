"""Runtime outcomes, PAR10 penalties and the two feature-space distances."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .exceptions import MissingOutcome, NegativeCoordinate, SolvedTimeExceedsCutoff

PAR_FACTOR = 10


class Status(enum.Enum):
    SOLVED = "SOLVED"
    TIMEOUT = "TIMEOUT"
    FAILED = "FAILED"


@dataclass(frozen=True)
class RuntimeOutcome:
    status: Status
    time_seconds: Optional[float] = None

    def __post_init__(self):
        if self.status is Status.SOLVED:
            if self.time_seconds is None or not (self.time_seconds >= 0.0):
                raise ValueError(f"SOLVED needs a time >= 0, got {self.time_seconds!r}")
            if not math.isfinite(self.time_seconds):
                raise ValueError("solved time must be finite")
            object.__setattr__(self, "time_seconds", float(self.time_seconds))
        elif self.time_seconds is not None:
            raise ValueError(f"{self.status.value} outcome carries no time")

    @classmethod
    def solved(cls, seconds: float) -> "RuntimeOutcome":
        return cls(Status.SOLVED, seconds)

    @classmethod
    def timeout(cls) -> "RuntimeOutcome":
        return cls(Status.TIMEOUT)

    @classmethod
    def failed(cls) -> "RuntimeOutcome":
        return cls(Status.FAILED)

    @property
    def is_solved(self) -> bool:
        return self.status is Status.SOLVED

    def __str__(self):
        if self.is_solved:
            return f"SOLVED({self.time_seconds!r})"
        return self.status.value


def par10(outcome: RuntimeOutcome, cutoff: float) -> float:
    """Solving time if solved, otherwise ten times the cutoff."""
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff!r}")
    if outcome.is_solved:
        if outcome.time_seconds > cutoff:
            raise SolvedTimeExceedsCutoff(
                f"solved time {outcome.time_seconds} exceeds cutoff {cutoff}"
            )
        return outcome.time_seconds
    return PAR_FACTOR * float(cutoff)


def par10_set(solver: str, instances: Iterable, cutoff: float) -> float:
    """Sum of PAR10 scores of ``solver`` over instance records.

    Each record needs an ``outcomes`` mapping (InstanceRecord) or is itself
    a mapping from solver id to RuntimeOutcome. The sum is exactly rounded
    (``math.fsum``) so it does not depend on record order.
    """
    scores = []
    for rec in instances:
        outcomes = getattr(rec, "outcomes", rec)
        try:
            outcome = outcomes[solver]
        except KeyError:
            name = getattr(rec, "instance_id", "?")
            raise MissingOutcome(f"no outcome for solver {solver!r} on {name!r}") from None
        scores.append(par10(outcome, cutoff))
    return math.fsum(scores)


# -- distances --------------------------------------------------------------

class DistanceVariant(enum.Enum):
    ARGOSMART = "argosmart"
    SCALED_EUCLIDEAN = "euclidean"

    @classmethod
    def parse(cls, value) -> "DistanceVariant":
        if isinstance(value, DistanceKind):
            return value.variant
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"argosmart": cls.ARGOSMART, "euclidean": cls.SCALED_EUCLIDEAN,
                   "scaled_euclidean": cls.SCALED_EUCLIDEAN}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown distance {value!r}; use 'argosmart' or 'euclidean'") from None


@dataclass(frozen=True)
class DistanceKind:
    """A distance variant plus, for the scaled Euclidean one, its bounds.

    ``bounds`` is a (2, n_features) array of per-feature training minima
    and maxima.
    """

    variant: DistanceVariant
    bounds: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.variant is DistanceVariant.SCALED_EUCLIDEAN:
            if self.bounds is None:
                raise ValueError("scaled Euclidean distance needs scaling bounds")
            b = np.array(self.bounds, dtype=np.float64)
            if b.ndim != 2 or b.shape[0] != 2 or (b[0] > b[1]).any():
                raise ValueError("bounds must be a (2, n) array with min <= max")
            b.setflags(write=False)
            object.__setattr__(self, "bounds", b)
        elif self.bounds is not None:
            raise ValueError("ArgoSmArT distance takes no scaling bounds")

    @classmethod
    def argosmart(cls) -> "DistanceKind":
        return cls(DistanceVariant.ARGOSMART)

    @classmethod
    def scaled_euclidean(cls, training_features) -> "DistanceKind":
        return cls(DistanceVariant.SCALED_EUCLIDEAN, scaling_bounds(training_features))

    @classmethod
    def for_features(cls, variant, training_features) -> "DistanceKind":
        variant = DistanceVariant.parse(variant)
        if variant is DistanceVariant.ARGOSMART:
            return cls.argosmart()
        return cls.scaled_euclidean(training_features)

    def to_matrix(self, X, f) -> np.ndarray:
        """Distances from the query ``f`` to every row of ``X``."""
        if self.variant is DistanceVariant.ARGOSMART:
            return argosmart_to_rows(X, f)
        return scaled_euclidean_to_rows(X, f, self.bounds)

    def __call__(self, x, y) -> float:
        if self.variant is DistanceVariant.ARGOSMART:
            return argosmart_distance(x, y)
        return scaled_euclidean_distance(x, y, self.bounds)

    def __eq__(self, other):
        if not isinstance(other, DistanceKind):
            return NotImplemented
        if self.variant is not other.variant:
            return False
        if self.bounds is None or other.bounds is None:
            return self.bounds is None and other.bounds is None
        return np.array_equal(self.bounds, other.bounds)

    def __hash__(self):
        return hash((self.variant, None if self.bounds is None else self.bounds.tobytes()))


def argosmart_to_rows(X, f) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if (X < 0).any() or (f < 0).any():
        raise NegativeCoordinate("ArgoSmArT distance needs non-negative coordinates")
    return (np.abs(X - f) / (np.sqrt(X * f) + 1.0)).sum(axis=-1)


def argosmart_distance(x, y) -> float:
    """Sum over coordinates of ``|x_i - y_i| / (sqrt(x_i * y_i) + 1)``."""
    return float(argosmart_to_rows(np.asarray(x, dtype=np.float64)[None, :], y)[0])


def scaling_bounds(training_features) -> np.ndarray:
    X = np.asarray(training_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("scaling bounds need a non-empty 2-D feature matrix")
    return np.vstack([X.min(axis=0), X.max(axis=0)])


def scale_features(X, bounds) -> np.ndarray:
    """Map each column to [0, 1] with training bounds; clamp; constants go to 0."""
    X = np.asarray(X, dtype=np.float64)
    lo, hi = bounds[0], bounds[1]
    span = hi - lo
    scaled = np.zeros(np.broadcast_shapes(X.shape, lo.shape))
    np.divide(X - lo, span, out=scaled, where=span > 0)
    return np.clip(scaled, 0.0, 1.0)


def scaled_euclidean_to_rows(X, f, bounds) -> np.ndarray:
    diff = scale_features(X, bounds) - scale_features(f, bounds)
    return np.sqrt((diff * diff).sum(axis=-1))


def scaled_euclidean_distance(x, y, bounds) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(scaled_euclidean_to_rows(x[None, :], y, np.asarray(bounds, dtype=np.float64))[0])
