"""Index sets, quad-adic partitions, and discrete measures.

A coefficient sequence (a_n), all positive, induces the point set

    T = {0} union {sum_{n <= m} c * a_n^2 : 1 <= m <= N}

where c = 1 when the raw total sum is below 1 and c = (1 - 2^-32)/total
otherwise, so that T always sits inside [0, 1).  The quad-adic partition
at level k splits [0, 1) into cells [i 4^-k, (i+1) 4^-k) intersected
with T; cells nest four-into-one across levels.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "InvalidCoefficientError",
    "InvalidMeasureError",
    "DomainError",
    "CoefficientSequence",
    "IndexSet",
    "PartitionCell",
    "PartitionTree",
    "DiscreteMeasure",
    "build_index_set",
    "build_partition",
    "ball_mass",
    "make_measure",
]

SCALE_CEILING = 1.0 - 2.0 ** -32


class InvalidCoefficientError(ValueError):
    """Raised for empty, non-positive, or non-finite coefficient input."""


class InvalidMeasureError(ValueError):
    """Raised for weights that cannot form a probability measure on T."""


class DomainError(ValueError):
    """Raised when a query point does not belong to the index set."""


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True, eq=False)
class CoefficientSequence:
    """A finite positive coefficient sequence with optional family metadata.

    ``family`` is one of ``explicit``, ``power`` (a_n = n^-p), or
    ``geometric`` (a_n = q^(n/2), that is a_n^2 = q^n).  Family metadata
    only feeds diagnostics such as the truncated tail mass; the values
    array is always materialized.
    """

    values: np.ndarray
    family: str = "explicit"
    family_params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise InvalidCoefficientError("at least one coefficient required")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise InvalidCoefficientError("coefficients must be finite and positive")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return int(self.values.size)

    @classmethod
    def explicit(cls, values: Iterable[float]) -> "CoefficientSequence":
        return cls(np.asarray(list(values), dtype=float))

    @classmethod
    def power(cls, exponent: float, count: int) -> "CoefficientSequence":
        if count < 1:
            raise InvalidCoefficientError("at least one coefficient required")
        n = np.arange(1, count + 1, dtype=float)
        return cls(n ** -exponent, family="power",
                   family_params={"exponent": float(exponent), "count": int(count)})

    @classmethod
    def geometric(cls, ratio: float, count: int) -> "CoefficientSequence":
        if count < 1:
            raise InvalidCoefficientError("at least one coefficient required")
        if ratio <= 0.0:
            raise InvalidCoefficientError("geometric ratio must be positive")
        n = np.arange(1, count + 1, dtype=float)
        return cls(ratio ** (n / 2.0), family="geometric",
                   family_params={"ratio": float(ratio), "count": int(count)})

    @classmethod
    def from_json(cls, obj: Mapping) -> "CoefficientSequence":
        """Parse ``{"kind": ...}`` coefficient input; unknown keys rejected."""
        if not isinstance(obj, Mapping):
            raise InvalidCoefficientError("coefficient input must be a JSON object")
        kind = obj.get("kind")
        allowed = {
            "explicit": {"kind", "values"},
            "power": {"kind", "exponent", "count"},
            "geometric": {"kind", "ratio", "count"},
        }
        if kind not in allowed:
            raise InvalidCoefficientError(f"unknown coefficient kind: {kind!r}")
        extra = set(obj) - allowed[kind]
        if extra:
            raise InvalidCoefficientError(
                f"unknown keys in coefficient input: {sorted(extra)}")
        if kind == "explicit":
            if "values" not in obj:
                raise InvalidCoefficientError("explicit coefficients need 'values'")
            return cls.explicit(obj["values"])
        if kind == "power":
            return cls.power(float(obj["exponent"]), int(obj["count"]))
        return cls.geometric(float(obj["ratio"]), int(obj["count"]))

    def to_json(self) -> dict:
        if self.family == "explicit":
            return {"kind": "explicit", "values": [float(v) for v in self.values]}
        out = {"kind": self.family}
        out.update({k: v for k, v in self.family_params.items()})
        return out

    def tail_mass(self) -> float | None:
        """Sum of a_n^2 beyond the truncation, when the family admits one.

        Returns None for explicit sequences, +inf when the full series
        diverges (the truncation then changes the object qualitatively
        and callers should warn).
        """
        if self.family == "power":
            p = self.family_params["exponent"]
            n = self.family_params["count"]
            if 2.0 * p <= 1.0:
                return math.inf
            from scipy.special import zeta

            return float(zeta(2.0 * p, n + 1))
        if self.family == "geometric":
            q = self.family_params["ratio"]
            n = self.family_params["count"]
            if q >= 1.0:
                return math.inf
            return q ** (n + 1) / (1.0 - q)
        return None


# ---------------------------------------------------------------------------
# index set


@dataclass(frozen=True, eq=False)
class IndexSet:
    """Strictly increasing points of [0, 1) with the applied scale factor.

    ``merged_duplicates`` counts cumulative sums that collided in float
    arithmetic and were collapsed; mathematically the points are distinct
    (all a_n > 0) but for fast-decaying tails the partial sums fall below
    one ulp of each other.
    """

    points: np.ndarray
    scale: float
    raw_total: float
    merged_duplicates: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0 or pts[0] != 0.0:
            raise InvalidCoefficientError("index set must start at 0")
        if np.any(np.diff(pts) <= 0.0):
            raise InvalidCoefficientError("index set points must strictly increase")
        if pts[-1] >= 1.0:
            raise InvalidCoefficientError("index set points must stay below 1")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def diameter(self) -> float:
        return float(self.points[-1] - self.points[0])

    def position(self, t: float) -> int:
        """Index of t in the point array; DomainError when absent."""
        pos = int(np.searchsorted(self.points, t))
        if pos >= len(self) or self.points[pos] != t:
            raise DomainError(f"point {t!r} is not in the index set")
        return pos

    def to_json(self) -> dict:
        return {
            "points": [float(t) for t in self.points],
            "scale": float(self.scale),
            "raw_total": float(self.raw_total),
            "merged_duplicates": int(self.merged_duplicates),
        }


def build_index_set(coeffs: CoefficientSequence) -> IndexSet:
    """Partial-sum point set of c * a_n^2, scaled to live inside [0, 1)."""
    sq = np.asarray(coeffs.values, dtype=float) ** 2
    raw_total = float(np.cumsum(sq)[-1])
    scale = 1.0 if raw_total < 1.0 else SCALE_CEILING / raw_total
    pts = np.concatenate([[0.0], np.cumsum(scale * sq)])
    distinct = np.unique(pts)
    merged = int(pts.size - distinct.size)
    if merged:
        warnings.warn(
            f"merged {merged} coefficient partial sums that collide in float64; "
            f"effective index set has {distinct.size} points",
            RuntimeWarning,
            stacklevel=2,
        )
    if distinct[-1] >= 1.0:
        raise InvalidCoefficientError("internal consistency error: scaled total >= 1")
    return IndexSet(points=distinct, scale=scale, raw_total=raw_total,
                    merged_duplicates=merged)


# ---------------------------------------------------------------------------
# quad-adic partition

_MAX_LEVEL = 1100  # past subnormal spacing; separation always occurs before this


def _cell_index(t: float, level: int) -> int:
    """Exact floor(t * 4^level) for t >= 0 via integer mantissa shifts.

    Plain float multiplication overflows for level >~ 512 and rounds the
    cell boundary for large levels; decomposing t = m * 2^e keeps the
    computation exact at every level.
    """
    if t == 0.0:
        return 0
    mant, exp = math.frexp(t)
    m = int(math.ldexp(mant, 53))
    shift = exp - 53 + 2 * level
    return m << shift if shift >= 0 else m >> -shift


@dataclass(frozen=True)
class PartitionCell:
    """A nonempty level cell: quad-adic index and point-slice bounds."""

    index: int
    start: int
    stop: int

    @property
    def count(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True, eq=False)
class PartitionTree:
    """Nested quad-adic cells over an index set.

    ``levels[k]`` lists the nonempty cells at level k for 0 <= k <= depth.
    ``separation_depth`` is the smallest level at which every nonempty
    cell is a singleton; it is a property of the point set alone and is
    recorded even when ``depth`` differs.
    """

    index_set: IndexSet
    depth: int
    separation_depth: int
    levels: tuple[tuple[PartitionCell, ...], ...]

    @property
    def points(self) -> np.ndarray:
        return self.index_set.points

    def level_cells(self, k: int) -> tuple[PartitionCell, ...]:
        """Nonempty cells at any level, stored or computed on demand."""
        if k < 0:
            raise ValueError("level must be nonnegative")
        if k <= self.depth:
            return self.levels[k]
        return _level_cells(self.index_set.points, k)

    def cell_masses(self, cells: Sequence[PartitionCell], weights: np.ndarray) -> np.ndarray:
        cums = np.concatenate([[0.0], np.cumsum(weights)])
        return np.array([cums[c.stop] - cums[c.start] for c in cells])

    def children_of(self, cell: PartitionCell, child_level: int) -> list[PartitionCell]:
        """The four child cells of ``cell`` (empty ones with start == stop)."""
        pts = self.index_set.points
        base = 4 * cell.index
        idx = [_cell_index(float(t), child_level) for t in pts[cell.start:cell.stop]]
        out = []
        lo = cell.start
        for j in range(4):
            hi = lo
            while hi < cell.stop and idx[hi - cell.start] == base + j:
                hi += 1
            out.append(PartitionCell(index=base + j, start=lo, stop=hi))
            lo = hi
        if lo != cell.stop:
            raise AssertionError("internal consistency error: child split mismatch")
        return out


def _level_cells(points: np.ndarray, k: int) -> tuple[PartitionCell, ...]:
    idx = [_cell_index(float(t), k) for t in points]
    cells = []
    start = 0
    for pos in range(1, len(idx) + 1):
        if pos == len(idx) or idx[pos] != idx[start]:
            cells.append(PartitionCell(index=idx[start], start=start, stop=pos))
            start = pos
    return tuple(cells)


def _separation_depth(points: np.ndarray) -> int:
    n = len(points)
    if n <= 1:
        return 0

    def separated(k: int) -> bool:
        seen = set()
        for t in points:
            i = _cell_index(float(t), k)
            if i in seen:
                return False
            seen.add(i)
        return True

    hi = 1
    while not separated(hi):
        hi *= 2
        if hi > _MAX_LEVEL:
            raise InvalidCoefficientError(
                "internal consistency error: points never separate")
    lo = hi // 2
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if separated(mid):
            hi = mid
        else:
            lo = mid
    return hi if not separated(lo) else lo


def build_partition(index_set: IndexSet, max_depth: int | str = "auto") -> PartitionTree:
    """Build the cell tree; ``max_depth="auto"`` stores levels up to separation."""
    sep = _separation_depth(index_set.points)
    if max_depth == "auto":
        depth = sep
    else:
        depth = int(max_depth)
        if depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if depth > _MAX_LEVEL:
            raise ValueError(f"max_depth above supported ceiling {_MAX_LEVEL}")
    levels = tuple(_level_cells(index_set.points, k) for k in range(depth + 1))
    return PartitionTree(index_set=index_set, depth=depth,
                         separation_depth=sep, levels=levels)


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A probability measure on the points of an index set."""

    index_set: IndexSet
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.index_set.points.shape:
            raise InvalidMeasureError("weight count must match index set size")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise InvalidMeasureError("weights must be finite and nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise InvalidMeasureError("weights must sum to 1 within 1e-12")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, index_set: IndexSet) -> "DiscreteMeasure":
        n = len(index_set)
        return cls(index_set, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, index_set: IndexSet, at: float) -> "DiscreteMeasure":
        pos = index_set.position(at)
        w = np.zeros(len(index_set))
        w[pos] = 1.0
        return cls(index_set, w)

    @classmethod
    def explicit(cls, index_set: IndexSet, weights: Iterable[float]) -> "DiscreteMeasure":
        w = np.asarray(list(weights), dtype=float)
        if w.shape != index_set.points.shape:
            raise InvalidMeasureError("weight count must match index set size")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise InvalidMeasureError("weights must be finite and nonnegative")
        total = float(w.sum())
        if total <= 0.0:
            raise InvalidMeasureError("weights must have positive total")
        return cls(index_set, w / total)

    @classmethod
    def dirichlet_random(cls, index_set: IndexSet, seed: int) -> "DiscreteMeasure":
        rng = np.random.default_rng(seed)
        w = rng.dirichlet(np.ones(len(index_set)))
        return cls(index_set, w / w.sum())

    def mass_at(self, t: float) -> float:
        return float(self.weights[self.index_set.position(t)])

    def to_json(self) -> dict:
        return {"weights": [float(x) for x in self.weights]}


def make_measure(index_set: IndexSet, spec: Mapping | str) -> DiscreteMeasure:
    """Build a measure from ``"uniform"`` or a ``{"kind": ...}`` object."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, Mapping):
        raise InvalidMeasureError("measure input must be a name or JSON object")
    kind = spec.get("kind")
    allowed = {
        "uniform": {"kind"},
        "point_mass": {"kind", "at"},
        "explicit": {"kind", "weights"},
        "dirichlet_random": {"kind", "seed"},
    }
    if kind not in allowed:
        raise InvalidMeasureError(f"unknown measure kind: {kind!r}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise InvalidMeasureError(f"unknown keys in measure input: {sorted(extra)}")
    if kind == "uniform":
        return DiscreteMeasure.uniform(index_set)
    if kind == "point_mass":
        if "at" not in spec:
            raise InvalidMeasureError("point_mass measure needs 'at'")
        return DiscreteMeasure.point_mass(index_set, float(spec["at"]))
    if kind == "explicit":
        if "weights" not in spec:
            raise InvalidMeasureError("explicit measure needs 'weights'")
        return DiscreteMeasure.explicit(index_set, spec["weights"])
    if "seed" not in spec:
        raise InvalidMeasureError("dirichlet_random measure needs 'seed'")
    return DiscreteMeasure.dirichlet_random(index_set, int(spec["seed"]))


def ball_mass(measure: DiscreteMeasure, t: float, r: float) -> float:
    """Mass of the closed ball {s in T : |s - t| <= r}; t must lie in T."""
    measure.index_set.position(t)
    if r < 0.0:
        raise ValueError("radius must be nonnegative")
    pts = measure.index_set.points
    return float(measure.weights[np.abs(pts - t) <= r].sum())
