"""Skeleton laws, bridge leaves, adversarial sampling, and MC verification."""
from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

import orthomm as om
from orthomm.processes import _build_bridge

PATHS = 40_000


def explicit_set(*values: float) -> om.IndexSet:
    return om.build_index_set(om.CoefficientSequence.explicit(values))


def uniform_setup(count: int, depth: int | None = None):
    index = om.build_index_set(om.CoefficientSequence.power(1.0, count))
    tree = om.build_partition(index)
    u = om.make_measure(index, "uniform")
    if depth is None:
        depth = tree.depth
    return index, tree, u, min(depth, tree.depth)


def mc_close(samples: np.ndarray, target: float, sigmas: float = 3.0) -> bool:
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - target) <= sigmas * se + 1e-9


# ---------------------------------------------------------------------------
# pinned skeleton


def test_s_skeleton_examples():
    assert np.array_equal(om.s_skeleton(np.ones(4)), np.zeros(5))
    S = om.s_skeleton(np.array([1.0, -1.0, 1.0, -1.0]))
    assert np.array_equal(S, [0.0, 1.0, 0.0, 1.0, 0.0])


def test_s_skeleton_batches_and_validates():
    z = np.ones((3, 2, 4))
    assert om.s_skeleton(z).shape == (3, 2, 5)
    with pytest.raises(ValueError, match="four increments"):
        om.s_skeleton(np.ones(3))


def test_s_skeleton_pins_both_ends():
    rng = np.random.default_rng(0)
    S = om.s_skeleton(rng.standard_normal((100, 4)))
    assert np.allclose(S[:, 0], 0.0)
    assert np.allclose(S[:, 4], 0.0, atol=1e-12)


def test_s_skeleton_increment_identity_exhaustive():
    outcomes = [om.s_skeleton(np.array(signs, dtype=float))
                for signs in itertools.product((1.0, -1.0), repeat=4)]
    stack = np.stack(outcomes)
    for l in range(5):
        for m in range(5):
            second = float(np.mean((stack[:, l] - stack[:, m]) ** 2))
            gap = abs(l - m)
            assert second == pytest.approx(gap * (1.0 - gap / 4.0), abs=1e-12)


# ---------------------------------------------------------------------------
# skeleton variables


def test_skeleton_variables_even_pair_example():
    sk = om.build_skeleton_variables([0.4, 0.1, 0.4, 0.1], {0})
    assert sk.n == 3
    assert sk.pair == (0, 2)
    assert sk.x == pytest.approx(math.sqrt(1.25), abs=1e-15)
    assert sk.y == pytest.approx(-math.sqrt(1.25), abs=1e-15)
    assert sk.v == pytest.approx(0.25 * math.sqrt(0.2), abs=1e-15)


def test_skeleton_variables_half_half_example():
    sk = om.build_skeleton_variables([0.5, 0.0, 0.5, 0.0], {2})
    assert (sk.n, sk.pair, sk.x, sk.y, sk.v) == (3, (0, 2), 1.0, -1.0, 0.125)


def test_skeleton_variables_odd_pair_flips_signs():
    sk = om.build_skeleton_variables([0.1, 0.4, 0.1, 0.4], {1})
    assert sk.n == 2
    assert sk.pair == (1, 3)
    assert sk.x == pytest.approx(-math.sqrt(1.25), abs=1e-15)
    assert sk.y == pytest.approx(math.sqrt(1.25), abs=1e-15)
    assert sk.v == pytest.approx(0.25 * math.sqrt(0.2), abs=1e-15)


def test_skeleton_variables_even_pair_takes_precedence():
    sk = om.build_skeleton_variables([0.25, 0.25, 0.25, 0.25], {1, 2})
    assert sk.pair == (0, 2)
    assert sk.n == 3


def test_skeleton_variables_no_good_children():
    sk = om.build_skeleton_variables([0.25, 0.25, 0.25, 0.25], set())
    assert sk.n is None
    assert sk.pair == ()
    assert sk.v == 0.0


def test_skeleton_variables_degenerate_pair_falls_back():
    with pytest.warns(RuntimeWarning, match="zero-probability atom"):
        sk = om.build_skeleton_variables([0.5, 0.25, 0.0, 0.25], {0})
    assert sk.n is None
    assert sk.v == 0.0


def test_skeleton_variables_validation():
    with pytest.raises(ValueError, match="four child masses"):
        om.build_skeleton_variables([0.5, 0.5], set())
    with pytest.raises(ValueError, match="nonnegative"):
        om.build_skeleton_variables([0.5, -0.1, 0.3, 0.3], set())
    with pytest.raises(ValueError, match="vanish"):
        om.build_skeleton_variables([0.0, 0.0, 0.0, 0.0], set())
    with pytest.raises(ValueError, match="child positions"):
        om.build_skeleton_variables([0.25] * 4, {4})


def enumeration_moments(sk: om.SkeletonVariables):
    outcomes = sk.enumerate_outcomes()
    total = sum(p for p, _, _ in outcomes)
    mean = sum(p * z for p, _, z in outcomes)
    second = sum(p * z ** 2 for p, _, z in outcomes)
    return total, mean, second


@pytest.mark.parametrize("seed", range(25))
def test_skeleton_increments_centered_unit_variance(seed):
    rng = np.random.default_rng(seed)
    masses = rng.dirichlet(np.ones(4))
    flags = om.good_children(masses)
    good = {j for j in range(4) if flags[j]}
    if seed % 3 == 1:
        good = {0} if masses[2] > 0 else good
    elif seed % 3 == 2:
        good = {1} if masses[3] > 0 else good
    sk = om.build_skeleton_variables(masses, good)
    total, mean, second = enumeration_moments(sk)
    assert total == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(mean, 0.0, atol=1e-12)
    assert np.allclose(second, 1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_skeleton_guarantee_matches_negative_part(seed):
    rng = np.random.default_rng(1000 + seed)
    masses = rng.dirichlet(np.ones(4))
    good = {0} if seed % 2 == 0 else {1}
    sk = om.build_skeleton_variables(masses, good)
    assert sk.n is not None
    neg_part = sum(p * max(-z[sk.n], 0.0) for p, _, z in sk.enumerate_outcomes())
    assert sk.v == pytest.approx(0.25 * neg_part, abs=1e-12)


def test_skeleton_sampling_matches_law():
    sk = om.build_skeleton_variables([0.4, 0.1, 0.4, 0.1], {0}, seed=5)
    tau, z = sk.sample(20_000)
    freq = np.bincount(tau, minlength=4) / tau.size
    err = 5.0 * np.sqrt(sk.probs * (1 - sk.probs) / tau.size)
    assert np.all(np.abs(freq - sk.probs) <= err + 1e-12)
    pinned = z[:, sk.n]
    assert np.all(np.isin(pinned[tau == 0], [sk.x]))
    assert np.all(np.isin(pinned[tau == 2], [sk.y]))
    assert np.all(pinned[(tau == 1) | (tau == 3)] == 0.0)
    free = np.delete(z, sk.n, axis=1)
    assert set(np.unique(free)) == {-1.0, 1.0}


def test_skeleton_increments_returns_a_copy():
    sk = om.build_skeleton_variables([0.25] * 4, set())
    free = np.ones(4)
    z = sk.increments(np.asarray(0), free)
    z[0] = 99.0
    assert free[0] == 1.0


def test_skeleton_to_json():
    sk = om.build_skeleton_variables([0.5, 0.0, 0.5, 0.0], {0})
    doc = sk.to_json()
    assert doc["n"] == 3 and doc["pair"] == [0, 2] and doc["v"] == 0.125


# ---------------------------------------------------------------------------
# one-level second-moment oracle


def oracle_instance(seed: int):
    rng = np.random.default_rng(seed)
    level = int(rng.integers(1, 4))
    parent = int(rng.integers(0, 4 ** (level - 1)))
    masses = rng.dirichlet(np.ones(4))
    flags = om.good_children(masses)
    sk = om.build_skeleton_variables(masses, {j for j in range(4) if flags[j]})
    width = 4.0 ** (-(level - 1))
    left = parent * width
    return sk, level, parent, left, width


@pytest.mark.parametrize("seed", range(20))
def test_oracle_matches_closed_form(seed):
    sk, level, parent, left, width = oracle_instance(seed)
    rng = np.random.default_rng(10_000 + seed)
    for s, t in rng.uniform(left, left + width, size=(8, 2)):
        d = abs(s - t)
        want = d * (1.0 - 4.0 ** (level - 1) * d)
        got = om.second_moment_oracle(sk, level, parent, float(s), float(t))
        assert got == pytest.approx(want, abs=1e-12)


def test_oracle_parent_endpoints_are_identified():
    sk, level, parent, left, width = oracle_instance(3)
    assert om.second_moment_oracle(sk, level, parent, left, left + width) == \
        pytest.approx(0.0, abs=1e-12)
    assert om.second_moment_oracle(sk, level, parent, left, left) == 0.0


def test_oracle_same_child_pairs():
    sk = om.build_skeleton_variables([0.25] * 4, {0, 1, 2, 3})
    s, t = 0.26, 0.30
    d = abs(s - t)
    got = om.second_moment_oracle(sk, 1, 0, s, t)
    assert got == pytest.approx(d * (1.0 - d), abs=1e-12)


def test_oracle_rejects_bad_arguments():
    sk = om.build_skeleton_variables([0.25] * 4, set())
    with pytest.raises(ValueError, match="level 1 or deeper"):
        om.second_moment_oracle(sk, 0, 0, 0.1, 0.2)
    with pytest.raises(om.DomainError, match="outside the parent"):
        om.second_moment_oracle(sk, 2, 0, 0.1, 0.5)


# ---------------------------------------------------------------------------
# bridge leaves


def test_bridge_factorization_and_covariance():
    index, tree, _, _ = uniform_setup(12)
    for cell in tree.level_cells(1):
        if cell.count == 0:
            continue
        b = _build_bridge(1, cell.index, index.points, cell.start, cell.stop)
        cov = b.covariance()
        assert np.allclose(b.chol @ b.chol.T, cov, atol=1e-10)
        assert b.jitter == 0.0
        assert np.all(np.diag(cov) >= -1e-15)


def test_bridge_pins_left_endpoint_points():
    index = explicit_set(0.5)
    tree = om.build_partition(index)
    cell = tree.level_cells(1)[0]
    rng = np.random.default_rng(0)
    draws = np.array([om.bridge_leaf_sample(1, cell, index.points, rng)
                      for _ in range(50)])
    assert np.array_equal(draws, np.zeros_like(draws))


def test_bridge_sample_varies_at_interior_points():
    index = explicit_set(0.1, 0.1, 0.1)
    tree = om.build_partition(index, max_depth=0)
    (cell,) = tree.level_cells(0)
    rng = np.random.default_rng(1)
    draws = np.array([om.bridge_leaf_sample(0, cell, index.points, rng)
                      for _ in range(200)])
    assert np.array_equal(draws[:, 0], np.zeros(200))
    assert draws[:, 1:].std() > 0


def test_bridge_jitter_fallback_on_singular_cells():
    # duplicated coordinates make the covariance exactly singular
    points = np.array([0.0, 0.2, 0.2, 0.3])
    b = _build_bridge(0, 0, points, 0, 4)
    assert b.jitter > 0.0
    assert np.allclose(b.chol @ b.chol.T, b.covariance(), atol=1e-6)


def test_bridge_empirical_covariance():
    points = np.array([0.0, 0.05, 0.11, 0.18])
    b = _build_bridge(0, 0, points, 0, 4)
    rng = np.random.default_rng(7)
    draws = b.values(rng.standard_normal((PATHS, b.dim)))
    emp = draws.T @ draws / PATHS
    assert np.allclose(emp, b.covariance(), atol=4.0 / math.sqrt(PATHS))


# ---------------------------------------------------------------------------
# adversarial sampler


def test_adversarial_value_at_zero_is_zero():
    index, tree, u, depth = uniform_setup(9, depth=2)
    sampler = om.build_adversarial_process(tree, u, depth, seed=3)
    vals = sampler.sample(500)
    assert vals.shape == (500, index.points.size)
    assert np.array_equal(vals[:, 0], np.zeros(500))


@pytest.mark.parametrize("depth", [0, 1, 2])
def test_adversarial_increment_second_moments(depth):
    index, tree, u, depth = uniform_setup(9, depth=depth)
    sampler = om.build_adversarial_process(tree, u, depth, seed=11)
    vals = sampler.sample(PATHS)
    rng = np.random.default_rng(5)
    pts = index.points
    for _ in range(8):
        i, j = rng.choice(pts.size, size=2, replace=False)
        sq = (vals[:, i] - vals[:, j]) ** 2
        assert mc_close(sq, sampler.second_moment(pts[i], pts[j]))


def test_adversarial_determinism_across_workers_and_rebuilds():
    _, tree, u, depth = uniform_setup(9, depth=2)
    a = om.build_adversarial_process(tree, u, depth, seed=9).sample(300, workers=1)
    b = om.build_adversarial_process(tree, u, depth, seed=9).sample(300, workers=4)
    assert np.array_equal(a, b)
    c = om.build_adversarial_process(tree, u, depth, seed=10).sample(300)
    assert not np.array_equal(a, c)


def test_adversarial_seed_and_path_validation():
    _, tree, u, depth = uniform_setup(4, depth=1)
    sampler = om.build_adversarial_process(tree, u, depth)
    with pytest.raises(ValueError, match="seed"):
        sampler.sample(100)
    with pytest.raises(ValueError, match="path"):
        sampler.sample(0, seed=1)
    with pytest.raises(ValueError, match="workers"):
        sampler.sample(100, seed=1, workers=0)


def test_adversarial_depth_clip_warning():
    _, tree, u, _ = uniform_setup(4)
    with pytest.warns(RuntimeWarning, match="exceeds partition depth"):
        sampler = om.build_adversarial_process(tree, u, tree.depth + 2, seed=0)
    assert sampler.base_depth == tree.depth


def test_adversarial_rejects_foreign_measure():
    _, tree, _, _ = uniform_setup(4)
    other = explicit_set(0.5)
    with pytest.raises(ValueError, match="share one index set"):
        om.build_adversarial_process(tree, om.make_measure(other, "uniform"), 1)


def test_adversarial_point_mass_measure():
    index = explicit_set(0.5)
    tree = om.build_partition(index)
    pm = om.make_measure(index, {"kind": "point_mass", "at": 0.0})
    sampler = om.build_adversarial_process(tree, pm, 1, seed=2)
    vals = sampler.sample(PATHS)
    assert np.array_equal(vals[:, 0], np.zeros(PATHS))
    assert mc_close(vals[:, 1] ** 2, 0.25 * (1.0 - 0.25))


# ---------------------------------------------------------------------------
# orthogonal lift


def test_lift_pairs_paths_with_inner_sampler():
    index, tree, u, depth = uniform_setup(9, depth=2)
    inner = om.build_adversarial_process(tree, u, depth, seed=21)
    lift = om.bridge_to_orthogonal(inner)
    assert lift.n_normal_slots == inner.n_normal_slots + 1
    X = lift.sample(1_000)
    Y = inner.sample(1_000)
    diff = X - Y
    pts = index.points
    ratio = diff[:, 1:] / pts[None, 1:]
    assert np.allclose(ratio, ratio[:, :1], atol=1e-10)
    assert np.array_equal(diff[:, 0], np.zeros(1_000))


def test_lift_increment_second_moments():
    index, tree, u, depth = uniform_setup(9, depth=2)
    lift = om.bridge_to_orthogonal(om.build_adversarial_process(tree, u, depth, seed=22))
    vals = lift.sample(PATHS)
    pts = index.points
    rng = np.random.default_rng(6)
    for _ in range(8):
        i, j = rng.choice(pts.size, size=2, replace=False)
        sq = (vals[:, i] - vals[:, j]) ** 2
        assert lift.second_moment(pts[i], pts[j]) == abs(pts[i] - pts[j])
        assert mc_close(sq, abs(pts[i] - pts[j]))


def test_lift_dominates_inner_supremum():
    _, tree, u, depth = uniform_setup(9, depth=2)
    inner = om.build_adversarial_process(tree, u, depth, seed=23)
    lift = om.bridge_to_orthogonal(inner)
    X = lift.sample(PATHS)
    Y = inner.sample(PATHS)
    paired = X.max(axis=1) - Y.max(axis=1)
    se = paired.std(ddof=1) / math.sqrt(paired.size)
    assert paired.mean() >= -3.0 * se


# ---------------------------------------------------------------------------
# orthonormal generators


def test_generator_kinds_and_aliases():
    assert om.OrthonormalGenerator("trig").kind == "trigonometric"
    assert om.OrthonormalGenerator("iid_gaussian").kind == "gaussian"
    with pytest.raises(ValueError, match="unknown generator kind"):
        om.OrthonormalGenerator("fourier")


def test_generator_slot_counts():
    assert om.OrthonormalGenerator("gaussian").normal_slots(6) == 6
    assert om.OrthonormalGenerator("gaussian").uniform_slots(6) == 0
    assert om.OrthonormalGenerator("rademacher").uniform_slots(6) == 6
    assert om.OrthonormalGenerator("trigonometric").uniform_slots(6) == 1


@pytest.mark.parametrize("kind", ["gaussian", "rademacher", "trigonometric"])
def test_generator_rows_are_orthonormal(kind):
    gen = om.OrthonormalGenerator(kind)
    phi = gen.sample_matrix(6, PATHS, seed=11)
    gram = phi.T @ phi / PATHS
    assert np.allclose(gram, np.eye(6), atol=5.0 / math.sqrt(PATHS))


def test_rademacher_rows_are_signs():
    phi = om.OrthonormalGenerator("rademacher").sample_matrix(4, 200, seed=0)
    assert set(np.unique(phi)) == {-1.0, 1.0}


def test_trigonometric_rows_shared_frequency():
    phi = om.OrthonormalGenerator("trigonometric").sample_matrix(3, 500, seed=0)
    w = np.arccos(np.clip(phi[:, 0] / math.sqrt(2.0), -1.0, 1.0)) / (2 * math.pi)
    for n in (2, 3):
        expect = math.sqrt(2.0) * np.cos(2 * math.pi * n * w)
        assert np.allclose(np.abs(phi[:, n - 1]), np.abs(expect), atol=1e-8)


def test_generator_chunked_sampling_is_worker_invariant():
    gen = om.OrthonormalGenerator("gaussian")
    a = gen.sample_matrix(4, 2 * 8192 + 7, seed=13, workers=1)
    b = gen.sample_matrix(4, 2 * 8192 + 7, seed=13, workers=3)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# supremum simulation and bound checks


def test_mc_estimate_from_samples():
    est = om.MCEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]), seed=1)
    assert est.mean == 2.5
    assert est.stderr == pytest.approx(math.sqrt(5.0 / 3.0) / 2.0, abs=1e-15)
    assert est.paths == 4


def test_simulate_sup_square_two_sign_example():
    seq = om.CoefficientSequence.explicit([0.5, 0.5])
    est = om.simulate_sup_square(seq, om.OrthonormalGenerator("rademacher"),
                                 paths=PATHS, seed=4)
    assert abs(est.mean - 0.625) <= 3.0 * est.stderr


def test_simulate_sup_square_single_rademacher_term_is_exact():
    est = om.simulate_sup_square([1.0], om.OrthonormalGenerator("rademacher"),
                                 paths=500, seed=4)
    assert est.mean == 1.0
    assert est.stderr == 0.0


@pytest.mark.parametrize("kind", ["gaussian", "trigonometric"])
def test_simulate_sup_square_single_term_unit_mean(kind):
    est = om.simulate_sup_square([1.0], om.OrthonormalGenerator(kind),
                                 paths=PATHS, seed=8)
    assert abs(est.mean - 1.0) <= 3.0 * est.stderr


def test_simulate_sup_square_needs_paths():
    with pytest.raises(ValueError, match="at least 100 paths"):
        om.simulate_sup_square([1.0], om.OrthonormalGenerator(), paths=50, seed=0)


def test_verify_chaining_bound_two_points():
    index = explicit_set(0.5)
    u = om.make_measure(index, "uniform")
    rep = om.verify_chaining_bound([0.5], u, om.OrthonormalGenerator("gaussian"),
                                   paths=PATHS, seed=6)
    assert not rep.skipped
    assert rep.strong_value == 0.7071067811865476
    assert rep.bound == om.CHAINING_CONSTANT * rep.strong_value ** 2
    assert rep.margin == 3.0 * rep.estimate.stderr
    assert abs(rep.estimate.mean - 0.25) <= 3.0 * rep.estimate.stderr
    assert rep.passed
    doc = rep.to_json()
    assert doc["passed"] is True and doc["skipped"] is False


def test_verify_chaining_bound_point_mass_is_skipped():
    index = explicit_set(0.5)
    pm = om.make_measure(index, {"kind": "point_mass", "at": 0.0})
    rep = om.verify_chaining_bound([0.5], pm, om.OrthonormalGenerator(),
                                   paths=200, seed=1)
    assert rep.skipped and rep.passed
    assert math.isinf(rep.bound)
    assert rep.to_json()["bound"] is None


def test_verify_chaining_bound_rejects_foreign_measure():
    other = om.make_measure(explicit_set(0.5, 0.5), "uniform")
    with pytest.raises(ValueError, match="live on the index set"):
        om.verify_chaining_bound([0.5], other, om.OrthonormalGenerator(),
                                 paths=200, seed=1)


def test_lower_bound_report_uniform_four_grid():
    index = explicit_set(0.5, 0.5, 0.5)
    tree = om.build_partition(index)
    u = om.make_measure(index, "uniform")
    rep = om.lower_bound_report(u, tree, base_depth=1, paths=5_000, seed=3)
    assert rep.filtered_sum == 1.0
    assert rep.threshold == om.LOWER_BOUND_FACTOR * math.sqrt(rep.estimate.mean) \
        + 3.0 * rep.estimate.stderr
    assert rep.passed
    assert rep.base_depth == 1


def test_lower_bound_report_clips_depth_with_warning():
    index = explicit_set(0.5)
    tree = om.build_partition(index)
    u = om.make_measure(index, "uniform")
    with pytest.warns(RuntimeWarning, match="clipping"):
        rep = om.lower_bound_report(u, tree, base_depth=4, paths=2_000, seed=5)
    assert rep.base_depth == tree.depth


def test_lower_bound_report_requires_positive_depth():
    index = explicit_set(0.5)
    tree = om.build_partition(index)
    u = om.make_measure(index, "uniform")
    with pytest.raises(ValueError, match="at least 1"):
        om.lower_bound_report(u, tree, base_depth=0, paths=2_000, seed=5)
