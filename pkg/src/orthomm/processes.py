"""Stochastic processes on partial-sum index sets.

Two constructions live here.  The forward direction samples the partial
sums of an orthogonal series directly and checks the chaining upper
bound against the strong functional.  The reverse direction assembles an
adversarial process level by level on the quad-adic partition: at each
cell a random child selector and four sign increments build a pinned
skeleton, the walk recurses only into the selected child (rescaled by
the inverse root of its selection probability), and a Brownian bridge
fills in below the base depth.  Adding one independent linear Gaussian
term turns the bridge-type increments |s-t|(1 - |s-t|) into orthogonal
increments |s-t| exactly.

Every sampler draws path i from its own Philox stream keyed by
(seed, i), so Monte Carlo output is byte-identical for any worker count
and any grouping of paths.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .functionals import (
    CHAINING_CONSTANT,
    LOWER_BOUND_FACTOR,
    classify_good_indices,
    good_children,
    strong_functional,
)
from .series import (
    CoefficientSequence,
    DiscreteMeasure,
    DomainError,
    PartitionTree,
    _cell_index,
    build_index_set,
)

_CHUNK = 8192
_JITTER = 1e-14


def _path_generator(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one sample path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


def _draw_path_matrices(
    seed: int,
    paths: int,
    n_uniform: int,
    n_normal: int,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Pre-draw all variates, one row per path.

    Per path the consumption order is fixed (uniforms first, then
    normals), so the same (seed, path) pair always yields the same row
    regardless of how paths are later grouped or parallelized.
    """
    U = np.empty((paths, n_uniform))
    Z = np.empty((paths, n_normal))

    def fill(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            g = _path_generator(seed, i)
            if n_uniform:
                U[i] = g.random(n_uniform)
            if n_normal:
                Z[i] = g.standard_normal(n_normal)

    if workers <= 1 or paths <= _CHUNK:
        fill(0, paths)
    else:
        edges = list(range(0, paths, _CHUNK)) + [paths]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fill, lo, hi)
                       for lo, hi in zip(edges[:-1], edges[1:])]
            for fut in futures:
                fut.result()
    return U, Z


def _draw_tau(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Map uniforms to child selectors by inverse CDF."""
    cum = np.cumsum(probs)
    cum = cum / cum[-1]
    return np.minimum(np.searchsorted(cum, u, side="right"), 3)


def _left_endpoint(cell_index: int, level: int) -> float:
    return math.ldexp(float(cell_index), -2 * level)


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error."""

    mean: float
    stderr: float
    paths: int
    seed: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, seed: int) -> MCEstimate:
        samples = np.asarray(samples, dtype=float)
        n = int(samples.size)
        mean = float(samples.mean())
        stderr = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean=mean, stderr=stderr, paths=n, seed=seed)

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr,
                "paths": self.paths, "seed": self.seed}


def s_skeleton(z: np.ndarray) -> np.ndarray:
    """Pinned partial-sum skeleton of four increments.

    S_0 = 0, S_j = z_0 + ... + z_{j-1} - (j/4)(z_0 + ... + z_3), so
    S_4 = 0 identically.  Accepts any batch shape with final axis 4 and
    returns final axis 5.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 4:
        raise ValueError("last axis must hold exactly four increments")
    zeros = np.zeros(z.shape[:-1] + (1,))
    pre = np.concatenate([zeros, np.cumsum(z, axis=-1)], axis=-1)
    frac = np.arange(5.0) / 4.0
    return pre - frac * pre[..., 4:5]


@dataclass(frozen=True, eq=False)
class SkeletonVariables:
    """Joint law of the child selector and the four sign increments.

    When a good child exists in one parity pair, the increment at slot
    ``n`` is pinned to be selector-measurable: it takes ``x`` on the
    first atom of ``pair``, ``y`` on the second, and 0 elsewhere, chosen
    so the increment stays centered with unit second moment.  ``v`` is
    the guaranteed contribution of this cell to the expected supremum of
    the assembled process.  With no good children all four increments
    stay free symmetric signs and ``v`` is 0.
    """

    probs: np.ndarray
    n: int | None
    x: float
    y: float
    pair: tuple[int, ...]
    v: float
    seed: int | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (4,):
            raise ValueError("selector law must have four atoms")
        if np.any(p < 0) or not math.isclose(float(p.sum()), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("selector law must be a probability vector")
        object.__setattr__(self, "probs", p)

    def increments(self, tau: np.ndarray, free: np.ndarray) -> np.ndarray:
        """Combine free signs with the pinned slot for given selectors."""
        z = np.array(free, dtype=float, copy=True)
        if self.n is None:
            return z
        tau = np.asarray(tau)
        pinned = np.where(tau == self.pair[0], self.x,
                          np.where(tau == self.pair[1], self.y, 0.0))
        z[..., self.n] = pinned
        return z

    def sample(self, size: int, rng: np.random.Generator | None = None
               ) -> tuple[np.ndarray, np.ndarray]:
        if rng is None:
            rng = np.random.default_rng(self.seed)
        tau = _draw_tau(self.probs, rng.random(size))
        free = np.where(rng.random((size, 4)) < 0.5, 1.0, -1.0)
        return tau, self.increments(tau, free)

    def enumerate_outcomes(self) -> list[tuple[float, int, np.ndarray]]:
        """All (probability, selector, increments) atoms of the joint law."""
        free_slots = [j for j in range(4) if j != self.n]
        out = []
        for tau in range(4):
            p = float(self.probs[tau])
            if p <= 0.0:
                continue
            for signs in itertools.product((1.0, -1.0), repeat=len(free_slots)):
                free = np.zeros(4)
                free[free_slots] = signs
                z = self.increments(np.asarray(tau), free)
                out.append((p * 0.5 ** len(free_slots), tau, z))
        return out

    def to_json(self) -> dict:
        return {
            "probs": [float(v) for v in self.probs],
            "n": self.n,
            "x": self.x,
            "y": self.y,
            "pair": list(self.pair),
            "v": self.v,
        }


def build_skeleton_variables(
    child_masses,
    good_set,
    seed: int | None = None,
) -> SkeletonVariables:
    """Skeleton law for one parent cell from its child masses.

    A good child in the even pair {0, 2} pins increment slot 3; failing
    that, a good child in the odd pair {1, 3} pins slot 2; with no good
    children every increment is a free symmetric sign and nothing is
    guaranteed (v = 0).  The pinned values solve the two-point centering
    and unit-variance constraints on the pair's selection probabilities.
    """
    masses = np.asarray(child_masses, dtype=float)
    if masses.shape != (4,):
        raise ValueError("exactly four child masses expected")
    if np.any(masses < 0) or not np.all(np.isfinite(masses)):
        raise ValueError("child masses must be finite and nonnegative")
    total = float(masses.sum())
    if total <= 0.0:
        raise ValueError("child masses must not all vanish")
    good = set(good_set)
    if not good <= {0, 1, 2, 3}:
        raise ValueError("good indices must be child positions 0..3")
    probs = masses / total

    if good & {0, 2}:
        a, b, n = 0, 2, 3
    elif good & {1, 3}:
        a, b, n = 1, 3, 2
    else:
        a = b = n = None

    if n is not None:
        pa, pb = float(probs[a]), float(probs[b])
        if pa <= 0.0 or pb <= 0.0:
            warnings.warn(
                "good pair has a zero-probability atom; using free signs",
                RuntimeWarning,
            )
            n = None

    if n is None:
        return SkeletonVariables(probs=probs, n=None, x=0.0, y=0.0,
                                 pair=(), v=0.0, seed=seed)

    mx = math.sqrt(pb / (pa * (pa + pb)))
    my = math.sqrt(pa / (pb * (pa + pb)))
    if n == 3:
        x, y = mx, -my
    else:
        x, y = -mx, my
    v = 0.25 * math.sqrt(pa * pb / (pa + pb))
    return SkeletonVariables(probs=probs, n=n, x=x, y=y,
                             pair=(a, b), v=v, seed=seed)


@dataclass(frozen=True, eq=False)
class BridgeLeaf:
    """Brownian bridge inside one base-depth cell.

    Points sitting on the cell's left endpoint are pinned to zero; the
    remaining points get a centered Gaussian vector with covariance
    min(s', t') - 4**level * s' * t' in coordinates local to the cell.
    """

    level: int
    cell_index: int
    positions: np.ndarray
    local: np.ndarray
    pinned: np.ndarray
    chol: np.ndarray
    jitter: float

    @property
    def dim(self) -> int:
        return int(self.positions.size)

    def covariance(self) -> np.ndarray:
        scale = 4.0 ** self.level
        return np.minimum.outer(self.local, self.local) - scale * np.outer(self.local, self.local)

    def values(self, z: np.ndarray) -> np.ndarray:
        """Bridge values at the positive-coordinate points from standard normals."""
        return np.asarray(z, dtype=float) @ self.chol.T


def bridge_leaf_sample(level: int, cell, points: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """One path of the leaf bridge over a cell's points.

    Returns one value per point of the cell in point order; points on the
    cell's left endpoint are deterministically 0.
    """
    bridge = _build_bridge(level, cell.index, points, cell.start, cell.stop)
    out = np.zeros(cell.count)
    if bridge.dim:
        out[bridge.positions - cell.start] = bridge.values(
            rng.standard_normal(bridge.dim))
    return out


def _build_bridge(level: int, cell_index: int, points: np.ndarray,
                  start: int, stop: int) -> BridgeLeaf:
    left = _left_endpoint(cell_index, level)
    local_all = np.maximum(points[start:stop] - left, 0.0)
    pos = local_all > 0.0
    cols = np.arange(start, stop)
    positions = cols[pos]
    local = local_all[pos]
    pinned = cols[~pos]
    jitter = 0.0
    if local.size == 0:
        chol = np.zeros((0, 0))
    else:
        scale = 4.0 ** level
        cov = np.minimum.outer(local, local) - scale * np.outer(local, local)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            jitter = _JITTER
            chol = np.linalg.cholesky(cov + jitter * np.eye(local.size))
    return BridgeLeaf(level=level, cell_index=cell_index, positions=positions,
                      local=local, pinned=pinned, chol=chol, jitter=jitter)


class ProcessSampler:
    """Base for Monte Carlo samplers over a fixed set of index points.

    Subclasses declare how many uniform and normal variates one path
    consumes and map pre-drawn rows to process values at every point.
    """

    points: np.ndarray
    n_uniform_slots: int
    n_normal_slots: int
    default_seed: int | None = None

    def second_moment(self, s: float, t: float) -> float:
        """Declared E (X(s) - X(t))**2 for this process."""
        raise NotImplementedError

    def _evaluate(self, U: np.ndarray, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, paths: int, seed: int | None = None,
               workers: int = 1) -> np.ndarray:
        """Matrix of process values, one row per path, one column per point."""
        if paths <= 0:
            raise ValueError("at least one path required")
        if seed is None:
            seed = self.default_seed
        if seed is None or seed < 0:
            raise ValueError("a nonnegative seed is required")
        if workers < 1:
            raise ValueError("workers must be at least 1")
        U, Z = _draw_path_matrices(seed, paths, self.n_uniform_slots,
                                   self.n_normal_slots, workers)
        return self._evaluate(U, Z)


class _Node:
    __slots__ = ("level", "skeleton", "segments", "children", "bridge")

    def __init__(self, level, skeleton, segments, children, bridge):
        self.level = level
        self.skeleton = skeleton
        self.segments = segments
        self.children = children
        self.bridge = bridge


class AdversarialSampler(ProcessSampler):
    """Level-by-level construction with bridge-type increments.

    On the four children of each traversed cell at level k the process
    adds 2**-k * S_j plus the linear interpolation toward S_{j+1}, then
    recurses only into the selected child j with multiplier p_j**-1/2.
    Below ``base_depth`` each cell's remaining points follow an
    independent Brownian bridge.  When the measure is strictly positive
    on all points, E (Y(s) - Y(t))**2 = |s - t| * (1 - |s - t|); cells
    of zero mass are never selected and keep only their skeleton parts.
    """

    def __init__(self, tree: PartitionTree, measure: DiscreteMeasure,
                 base_depth: int, seed: int | None = None):
        if base_depth < 0:
            raise ValueError("base depth must be nonnegative")
        self.tree = tree
        self.measure = measure
        self.base_depth = int(base_depth)
        self.index_set = tree.index_set
        self.points = tree.index_set.points
        self.default_seed = seed
        dims: list[int] = []
        root_cell = tree.level_cells(0)[0]
        self._root = self._build(root_cell, 0, dims)
        self.n_uniform_slots = 5 * self.base_depth
        self.n_normal_slots = max(dims) if dims else 0

    def second_moment(self, s: float, t: float) -> float:
        d = abs(s - t)
        return d * (1.0 - d)

    def _build(self, cell, level: int, dims: list[int]) -> _Node:
        if level == self.base_depth:
            bridge = _build_bridge(level, cell.index, self.points,
                                   cell.start, cell.stop)
            dims.append(bridge.dim)
            return _Node(level, None, (), (), bridge)
        cells = self.tree.children_of(cell, level + 1)
        masses = self.tree.cell_masses(cells, self.measure.weights)
        flags = good_children(masses)
        skeleton = build_skeleton_variables(
            masses, {j for j in range(4) if flags[j]})
        segments = tuple(
            (j, c.start, c.stop, _left_endpoint(c.index, level + 1))
            for j, c in enumerate(cells) if c.count
        )
        children = tuple(
            (j, self._build(cells[j], level + 1, dims))
            for j in range(4) if masses[j] > 0.0
        )
        return _Node(level, skeleton, segments, children, None)

    def _evaluate(self, U: np.ndarray, Z: np.ndarray) -> np.ndarray:
        paths = U.shape[0] if self.n_uniform_slots else Z.shape[0]
        vals = np.zeros((paths, self.points.size))
        idx = np.arange(paths)
        self._accumulate(self._root, idx, np.ones(paths), U, Z, vals)
        return vals

    def _accumulate(self, node, idx, mult, U, Z, vals) -> None:
        if node.bridge is not None:
            b = node.bridge
            if b.dim:
                draws = Z[idx, :b.dim] @ b.chol.T
                vals[idx[:, None], b.positions[None, :]] += mult[:, None] * draws
            return
        k = node.level + 1
        base = 5 * node.level
        sk = node.skeleton
        tau = _draw_tau(sk.probs, U[idx, base])
        free = np.where(U[idx, base + 1:base + 5] < 0.5, 1.0, -1.0)
        S = s_skeleton(sk.increments(tau, free))
        down, up = 2.0 ** -k, 2.0 ** k
        for j, start, stop, left in node.segments:
            offs = (self.points[start:stop] - left)[None, :]
            seg = down * S[:, j, None] + up * offs * (S[:, j + 1, None] - S[:, j, None])
            vals[idx, start:stop] += mult[:, None] * seg
        for j, child in node.children:
            sel = tau == j
            if sel.any():
                self._accumulate(child, idx[sel],
                                 mult[sel] / math.sqrt(float(sk.probs[j])),
                                 U, Z, vals)


def build_adversarial_process(
    tree: PartitionTree,
    measure: DiscreteMeasure,
    base_depth: int,
    seed: int | None = None,
) -> AdversarialSampler:
    """Assemble the adversarial sampler on a partition and measure.

    Requests deeper than the stored partition are clipped to its depth
    with a warning.
    """
    if not np.array_equal(measure.index_set.points, tree.index_set.points):
        raise ValueError("measure and partition must share one index set")
    depth = int(base_depth)
    if depth > tree.depth:
        warnings.warn(
            f"base depth {depth} exceeds partition depth {tree.depth}; clipping",
            RuntimeWarning,
        )
        depth = tree.depth
    return AdversarialSampler(tree, measure, depth, seed=seed)


class OrthogonalLift(ProcessSampler):
    """Adds an independent linear Gaussian term t * Z to another sampler.

    For an inner process with increments |s - t| * (1 - |s - t|) the sum
    has exactly orthogonal increments: E (X(s) - X(t))**2 = |s - t|.
    """

    def __init__(self, inner: ProcessSampler):
        self.inner = inner
        self.points = inner.points
        self.n_uniform_slots = inner.n_uniform_slots
        self.n_normal_slots = inner.n_normal_slots + 1
        self.default_seed = inner.default_seed

    def second_moment(self, s: float, t: float) -> float:
        return abs(s - t)

    def _evaluate(self, U: np.ndarray, Z: np.ndarray) -> np.ndarray:
        inner_vals = self.inner._evaluate(U, Z[:, :-1])
        return inner_vals + Z[:, -1:] * self.points[None, :]


def bridge_to_orthogonal(sampler: ProcessSampler) -> OrthogonalLift:
    return OrthogonalLift(sampler)


def second_moment_oracle(
    skeleton: SkeletonVariables,
    level: int,
    parent_index: int,
    s: float,
    t: float,
) -> float:
    """Exact one-level increment second moment by outcome enumeration.

    The one-level process interpolates the pinned skeleton linearly
    across the four children of the parent cell and follows an
    independent Brownian bridge inside the selected child, scaled by the
    inverse root of its selection probability.  Every (selector, signs)
    outcome is enumerated with the bridge second moments integrated
    analytically, which must reproduce d * (1 - 4**(level-1) * d) at
    d = |s - t|.  Both arguments may lie anywhere in the parent's closed
    interval; its right endpoint folds into the last child, where the
    skeleton pins it to zero.
    """
    if level < 1:
        raise ValueError("children live at level 1 or deeper")
    width = 4.0 ** (-(level - 1))
    left = _left_endpoint(parent_index, level - 1)
    for x in (s, t):
        if not (left <= x <= left + width):
            raise DomainError(f"point {x!r} outside the parent interval")

    def child_of(x: float) -> int:
        c = _cell_index(x, level) - 4 * parent_index
        return 3 if c == 4 else int(c)

    cs, ct = child_of(s), child_of(t)
    lefts = [_left_endpoint(4 * parent_index + j, level) for j in range(4)]
    ls, lt = s - lefts[cs], t - lefts[ct]
    scale = 4.0 ** level
    down, up = 2.0 ** -level, 2.0 ** level

    def cov(a: float, b: float) -> float:
        return min(a, b) - scale * a * b

    total = 0.0
    for p, tau, z in skeleton.enumerate_outcomes():
        S = s_skeleton(z)
        lin_s = down * S[cs] + up * ls * (S[cs + 1] - S[cs])
        lin_t = down * S[ct] + up * lt * (S[ct + 1] - S[ct])
        d = lin_s - lin_t
        var = 0.0
        ptau = float(skeleton.probs[tau])
        if cs == tau:
            var += cov(ls, ls) / ptau
        if ct == tau:
            var += cov(lt, lt) / ptau
        if cs == tau and ct == tau:
            var -= 2.0 * cov(ls, lt) / ptau
        total += p * (d * d + var)
    return float(total)


_GENERATOR_KINDS = ("gaussian", "rademacher", "trigonometric")


@dataclass(frozen=True)
class OrthonormalGenerator:
    """Orthonormal system driving the series: E phi_n phi_m = delta_nm.

    Kinds: iid standard Gaussians, iid symmetric signs, or the cosine
    system sqrt(2) * cos(2 pi n w) evaluated at one uniform w.
    """

    kind: str = "gaussian"

    def __post_init__(self) -> None:
        aliases = {"trig": "trigonometric", "iid_gaussian": "gaussian"}
        kind = aliases.get(self.kind, self.kind)
        if kind not in _GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    def uniform_slots(self, n_terms: int) -> int:
        if self.kind == "rademacher":
            return n_terms
        if self.kind == "trigonometric":
            return 1
        return 0

    def normal_slots(self, n_terms: int) -> int:
        return n_terms if self.kind == "gaussian" else 0

    def rows(self, U: np.ndarray, Z: np.ndarray, n_terms: int) -> np.ndarray:
        if self.kind == "gaussian":
            return Z[:, :n_terms]
        if self.kind == "rademacher":
            return np.where(U[:, :n_terms] < 0.5, 1.0, -1.0)
        freq = np.arange(1, n_terms + 1)
        return math.sqrt(2.0) * np.cos(2.0 * math.pi * U[:, :1] * freq[None, :])

    def sample_matrix(self, n_terms: int, paths: int, seed: int,
                      workers: int = 1) -> np.ndarray:
        U, Z = _draw_path_matrices(seed, paths, self.uniform_slots(n_terms),
                                   self.normal_slots(n_terms), workers)
        return self.rows(U, Z, n_terms)


def _coefficient_sequence(coeffs) -> CoefficientSequence:
    if isinstance(coeffs, CoefficientSequence):
        return coeffs
    return CoefficientSequence.explicit(np.asarray(coeffs, dtype=float))


def simulate_sup_square(
    coeffs,
    generator: OrthonormalGenerator,
    paths: int,
    seed: int,
    workers: int = 1,
) -> MCEstimate:
    """Monte Carlo estimate of E max_m (a_1 phi_1 + ... + a_m phi_m)**2."""
    if paths < 100:
        raise ValueError("at least 100 paths required")
    a = _coefficient_sequence(coeffs).values
    phi = generator.sample_matrix(a.size, paths, seed, workers)
    partial = np.cumsum(phi * a[None, :], axis=1)
    stat = (partial ** 2).max(axis=1)
    return MCEstimate.from_samples(stat, seed)


@dataclass(frozen=True)
class ChainingReport:
    """Simulated supremum against the strong-functional upper bound."""

    estimate: MCEstimate
    strong_value: float
    bound: float
    margin: float
    passed: bool
    skipped: bool

    def to_json(self) -> dict:
        finite = math.isfinite(self.strong_value)
        return {
            "estimate": self.estimate.to_json(),
            "strong": self.strong_value if finite else None,
            "bound": self.bound if math.isfinite(self.bound) else None,
            "margin": self.margin,
            "passed": self.passed,
            "skipped": self.skipped,
        }


def verify_chaining_bound(
    coeffs,
    measure: DiscreteMeasure,
    generator: OrthonormalGenerator,
    paths: int,
    seed: int,
    workers: int = 1,
) -> ChainingReport:
    """Check E (sup - inf)**2 of the scaled partial sums against the bound.

    The statistic is the squared range of the partial-sum path including
    the starting value 0, scaled by the index-set normalization, and the
    bound is CHAINING_CONSTANT times the squared strong functional of
    the given measure.  An infinite strong value makes the bound vacuous
    and the check is reported as skipped.
    """
    seq = _coefficient_sequence(coeffs)
    a = seq.values
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rebuilt = build_index_set(seq)
    if not np.array_equal(measure.index_set.points, rebuilt.points):
        raise ValueError("measure must live on the index set of the coefficients")
    phi = generator.sample_matrix(a.size, paths, seed, workers)
    partial = np.cumsum(phi * a[None, :], axis=1)
    hi = np.maximum(partial.max(axis=1), 0.0)
    lo = np.minimum(partial.min(axis=1), 0.0)
    stat = rebuilt.scale * (hi - lo) ** 2
    est = MCEstimate.from_samples(stat, seed)
    strong_value, _ = strong_functional(measure)
    if not math.isfinite(strong_value):
        return ChainingReport(estimate=est, strong_value=strong_value,
                              bound=math.inf, margin=3.0 * est.stderr,
                              passed=True, skipped=True)
    bound = CHAINING_CONSTANT * strong_value ** 2
    margin = 3.0 * est.stderr
    return ChainingReport(estimate=est, strong_value=strong_value,
                          bound=bound, margin=margin,
                          passed=bool(est.mean <= bound + margin),
                          skipped=False)


@dataclass(frozen=True)
class LowerBoundReport:
    """Filtered level sums against the simulated supremum of the lift."""

    filtered_sum: float
    estimate: MCEstimate
    threshold: float
    passed: bool
    base_depth: int

    def to_json(self) -> dict:
        return {
            "filtered_sum": self.filtered_sum,
            "estimate": self.estimate.to_json(),
            "threshold": self.threshold,
            "passed": self.passed,
            "base_depth": self.base_depth,
        }


def lower_bound_report(
    measure: DiscreteMeasure,
    tree: PartitionTree,
    base_depth: int,
    paths: int,
    seed: int,
    workers: int = 1,
) -> LowerBoundReport:
    """Check the filtered partial sum against the adversarial supremum.

    The left side sums 2**-k times the filtered good-index sums for
    levels 1..base_depth.  The right side is LOWER_BOUND_FACTOR times
    the root of the Monte Carlo estimate of E sup_t X(t)**2 for the
    orthogonal lift of the adversarial process, plus a three-standard-
    error margin.
    """
    if base_depth < 1:
        raise ValueError("base depth must be at least 1")
    sampler = bridge_to_orthogonal(
        build_adversarial_process(tree, measure, base_depth, seed=seed))
    depth = sampler.inner.base_depth
    table = classify_good_indices(measure, tree, max_level=depth)
    filtered = sum(2.0 ** -lvl.level * lvl.filtered_sum for lvl in table.levels)
    vals = sampler.sample(paths, seed, workers)
    stat = (vals ** 2).max(axis=1)
    est = MCEstimate.from_samples(stat, seed)
    threshold = LOWER_BOUND_FACTOR * math.sqrt(est.mean) + 3.0 * est.stderr
    return LowerBoundReport(filtered_sum=float(filtered), estimate=est,
                            threshold=float(threshold),
                            passed=bool(filtered <= threshold + 1e-12),
                            base_depth=depth)
