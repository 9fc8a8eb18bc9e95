"""Exact evaluation of entropy-type functionals of measures on an index set.

For a probability measure m on T and the closed ball B(t, r) in the
standard metric, the per-point integral

    f(t) = integral_0^sqrt(D) m(B(t, r^2))^(-1/2) dr,      D = diam(T),

is piecewise constant in r between the square roots of the distinct
distances from t, so it evaluates in closed form.  The strong functional
is sup_t f(t), the weak functional averages f against m itself, and two
dyadic-sum upper bounds (full and good-index filtered) come from the
quad-adic partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .series import CoefficientSequence, DiscreteMeasure, PartitionTree

__all__ = [
    "FILTER_WEIGHT",
    "CHAINING_CONSTANT",
    "LOWER_BOUND_FACTOR",
    "COMBINED_BOUND_FORMULA",
    "GoodLevel",
    "GoodIndexTable",
    "RMBound",
    "FunctionalReport",
    "strong_functional_at",
    "strong_functional",
    "weak_functional",
    "dyadic_bound",
    "rademacher_menchov",
    "classify_good_indices",
    "filtered_bound",
    "evaluate_functionals",
]

# Weight of the coarse levels in the filtered upper bound; below 2 so the
# geometric prefactor (1 - L/2)^-1 is finite.
FILTER_WEIGHT = math.sqrt(2.0) * 5.0 / 4.0

# Constant in front of the squared strong functional in the chaining
# upper bound for orthogonal-increment processes.
CHAINING_CONSTANT = 16.0 * 5.0 ** 2.5

# Constant relating the filtered sum to the worst-case supremum of the
# adversarial construction.
LOWER_BOUND_FACTOR = 64.0

# Symbolic form of the combined constant tying both directions together;
# B is the universal supremum over unit-increment orthogonal processes.
COMBINED_BOUND_FORMULA = "K = (1 - L/2)**-1 * (L + 64 * sqrt(B))"


# ---------------------------------------------------------------------------
# distance profile (measure independent, cached per index set)


@dataclass(eq=False)
class _DistanceProfile:
    order: np.ndarray  # (P, P) permutation sorting each row's distances
    seg: np.ndarray    # (P, P) increments of sqrt(distance), capped at sqrt(D)


@lru_cache(maxsize=64)
def _profile(index_set) -> _DistanceProfile:
    pts = index_set.points
    dist = np.abs(pts[None, :] - pts[:, None])
    order = np.argsort(dist, axis=1, kind="stable")
    sq = np.sqrt(np.take_along_axis(dist, order, axis=1))
    root_d = math.sqrt(index_set.diameter)
    seg = np.empty_like(sq)
    seg[:, :-1] = sq[:, 1:] - sq[:, :-1]
    seg[:, -1] = root_d - sq[:, -1]
    return _DistanceProfile(order=order, seg=seg)


def _integral_rows(measure: DiscreteMeasure) -> np.ndarray:
    """f(t) for every t in T; +inf rows where the point carries no mass."""
    prof = _profile(measure.index_set)
    w = measure.weights
    if w.size == 1:
        return np.zeros(1)
    cum = np.cumsum(w[prof.order], axis=1)
    vals = (prof.seg * np.maximum(cum, 1e-300) ** -0.5).sum(axis=1)
    vals[w == 0.0] = math.inf
    return vals


def _subgradient_row(measure: DiscreteMeasure, row: int) -> np.ndarray:
    """d f(t_row) / d w, from the per-segment closed form.

    Each integration segment [sqrt(d_j), sqrt(d_j+1)) contributes
    -(1/2) * mass^(-3/2) * segment_length to every weight inside the
    corresponding ball, which telescopes into a suffix sum over the
    distance-sorted order.
    """
    prof = _profile(measure.index_set)
    order = prof.order[row]
    seg = prof.seg[row]
    # the clip keeps mass**-1.5 inside float range for near-zero weights
    cum = np.maximum(np.cumsum(measure.weights[order]), 1e-150)
    contrib = -0.5 * seg * cum ** -1.5
    suffix = np.cumsum(contrib[::-1])[::-1]
    g = np.empty_like(suffix)
    g[order] = suffix
    return g


# ---------------------------------------------------------------------------
# functionals


def strong_functional_at(measure: DiscreteMeasure, t: float) -> float:
    """The ball-integral f(t); +inf when m({t}) = 0 and T is not a singleton."""
    pos = measure.index_set.position(t)
    return float(_integral_rows(measure)[pos])


def strong_functional(measure: DiscreteMeasure) -> tuple[float, float]:
    """(sup_t f(t), attaining t), smallest index on ties.

    The sup is +inf as soon as any point carries zero mass, since the
    integrand at such a point diverges near r = 0.
    """
    vals = _integral_rows(measure)
    pos = int(np.argmax(vals))
    return float(vals[pos]), float(measure.index_set.points[pos])


def weak_functional(measure: DiscreteMeasure) -> float:
    """integral of f against m itself; zero-mass points contribute nothing."""
    vals = _integral_rows(measure)
    w = measure.weights
    live = w > 0.0
    return float(np.dot(w[live], vals[live]))


def dyadic_bound(measure: DiscreteMeasure, tree: PartitionTree) -> float:
    """Full dyadic upper bound sum_k 2^-k sum_i sqrt(m(cell_i at level k)).

    Levels past the separation depth K contribute 2^-k * sum_t sqrt(w_t)
    each, so the infinite series has the exact tail 2^-K sum_t sqrt(w_t).
    """
    sep = tree.separation_depth
    w = measure.weights
    total = 0.0
    for k in range(1, sep + 1):
        masses = tree.cell_masses(tree.level_cells(k), w)
        total += 2.0 ** -k * float(np.sqrt(masses).sum())
    total += 2.0 ** -sep * float(np.sqrt(w).sum())
    return total


@dataclass(frozen=True)
class RMBound:
    """Classical log-squared coefficient bound sum a_n^2 ln^2(n+1)."""

    value: float
    terms: tuple[tuple[int, float, float], ...]  # (n, a_n^2, term)


def rademacher_menchov(coeffs: CoefficientSequence) -> RMBound:
    sq = np.asarray(coeffs.values, dtype=float) ** 2
    n = np.arange(1, sq.size + 1)
    logs = np.log(n + 1.0) ** 2
    terms = sq * logs
    return RMBound(
        value=float(terms.sum()),
        terms=tuple((int(i), float(s), float(t)) for i, s, t in zip(n, sq, terms)),
    )


# ---------------------------------------------------------------------------
# good-index filter


@dataclass(frozen=True)
class GoodLevel:
    level: int
    good: tuple[int, ...]       # absolute child indices at this level
    full_sum: float             # sum of sqrt(mass) over all nonempty cells
    filtered_sum: float         # sum of sqrt(mass) over good indices


@dataclass(frozen=True)
class GoodIndexTable:
    levels: tuple[GoodLevel, ...]

    def level(self, k: int) -> GoodLevel:
        for lv in self.levels:
            if lv.level == k:
                return lv
        raise KeyError(k)

    def filtered_series(self) -> float:
        return sum(2.0 ** -lv.level * lv.filtered_sum for lv in self.levels)


def good_children(masses: Sequence[float]) -> tuple[bool, bool, bool, bool]:
    """Balance conditions for the four children of one parent cell.

    Child j is good when its mass is at least 1/32 of the parent mass
    and at most half of its same-parity pair mass (pairs {0,2} and
    {1,3}); both inequalities non-strict.  A zero-mass parent classifies
    no children (its subtree carries nothing).
    """
    m = [float(v) for v in masses]
    if len(m) != 4:
        raise ValueError("exactly four child masses expected")
    parent = sum(m)
    if parent <= 0.0:
        return (False, False, False, False)
    pair = {0: m[0] + m[2], 1: m[1] + m[3]}
    return tuple(parent / 32.0 <= m[j] <= 0.5 * pair[j % 2] for j in range(4))


def classify_good_indices(
    measure: DiscreteMeasure,
    tree: PartitionTree,
    max_level: int | None = None,
) -> GoodIndexTable:
    """Good child indices per level, with full and filtered level sums.

    Past separation_depth + 1 every level is empty: the unique nonempty
    child holds its parent's whole mass and fails the pair condition.
    """
    if max_level is None:
        max_level = tree.separation_depth + 1
    w = measure.weights
    out = []
    for k in range(1, max_level + 1):
        full = float(np.sqrt(tree.cell_masses(tree.level_cells(k), w)).sum())
        good: list[int] = []
        filtered = 0.0
        for parent in tree.level_cells(k - 1):
            children = tree.children_of(parent, k)
            masses = tree.cell_masses(children, w)
            flags = good_children(masses)
            for j in range(4):
                if flags[j]:
                    good.append(children[j].index)
                    filtered += math.sqrt(float(masses[j]))
        out.append(GoodLevel(level=k, good=tuple(sorted(good)),
                             full_sum=full, filtered_sum=filtered))
    return GoodIndexTable(levels=tuple(out))


def filtered_bound(measure: DiscreteMeasure, tree: PartitionTree) -> float:
    """(1 - L/2)^-1 * (L + sum_k 2^-k sum_{good i} sqrt(m(cell_i)))."""
    table = classify_good_indices(measure, tree)
    return (FILTER_WEIGHT + table.filtered_series()) / (1.0 - FILTER_WEIGHT / 2.0)


# ---------------------------------------------------------------------------
# combined report


@dataclass(frozen=True)
class FunctionalReport:
    strong_value: float
    strong_argmax: float
    weak_value: float
    dyadic_value: float
    filtered_value: float
    rm_value: float | None
    filter_weight: float
    chaining_constant: float
    constant_formula: str
    per_level: tuple[tuple[int, float, float, int], ...]  # (k, full, filtered, #good)

    @property
    def infinite(self) -> bool:
        return math.isinf(self.strong_value)

    def to_json(self) -> dict:
        return {
            "strong": None if self.infinite else float(self.strong_value),
            "infinite": self.infinite,
            "strong_argmax": float(self.strong_argmax),
            "weak": float(self.weak_value),
            "dyadic": float(self.dyadic_value),
            "filtered": float(self.filtered_value),
            "rademacher_menchov": None if self.rm_value is None else float(self.rm_value),
            "filter_weight": float(self.filter_weight),
            "chaining_constant": float(self.chaining_constant),
            "constant_formula": self.constant_formula,
            "per_level": [
                {"k": k, "full_sum": fs, "filtered_sum": gs, "good_count": n}
                for (k, fs, gs, n) in self.per_level
            ],
        }


def evaluate_functionals(
    measure: DiscreteMeasure,
    tree: PartitionTree,
    coeffs: CoefficientSequence | None = None,
) -> FunctionalReport:
    strong, argmax = strong_functional(measure)
    weak = weak_functional(measure)
    table = classify_good_indices(measure, tree)
    filtered = (FILTER_WEIGHT + table.filtered_series()) / (1.0 - FILTER_WEIGHT / 2.0)
    per_level = tuple(
        (lv.level, lv.full_sum, lv.filtered_sum, len(lv.good)) for lv in table.levels
    )
    report = FunctionalReport(
        strong_value=strong,
        strong_argmax=argmax,
        weak_value=weak,
        dyadic_value=dyadic_bound(measure, tree),
        filtered_value=filtered,
        rm_value=None if coeffs is None else rademacher_menchov(coeffs).value,
        filter_weight=FILTER_WEIGHT,
        chaining_constant=CHAINING_CONSTANT,
        constant_formula=COMBINED_BOUND_FORMULA,
        per_level=per_level,
    )
    if report.weak_value > report.strong_value + 1e-10:
        raise AssertionError("internal consistency error: weak exceeds strong")
    return report
