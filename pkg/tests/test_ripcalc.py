import math

import numpy as np
import pytest

import conerip as cr
from conerip import ripcalc


def grouped(n, size):
    return cr.GroupStructure(tuple(tuple(range(size * j, size * j + size))
                                   for j in range(n // size)), n)


def admissible_points(count, seed, allow_negative_rho=True):
    """Random (x, z, sigma) with finite quasi-descent and positive radicand."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x = rng.standard_normal(4)
        x /= np.linalg.norm(x)
        lo = -1.5 if allow_negative_rho else 0.0
        rho = rng.uniform(lo, 0.999)
        alpha = rng.uniform(max(0.0, 2 * rho - 1) + 1e-6,
                            max(0.0, 2 * rho - 1) + 4.0)
        w = rng.standard_normal(4)
        w -= (w @ x) * x
        w /= np.linalg.norm(w)
        z = (rho - 1.0) * x + rng.uniform(0.0, 2.0) * w
        out.append((x, z, math.sqrt(alpha), rho, alpha))
    return out


# ---------------------------------------------------------------------------
# the two constants


def test_quasi_orthogonality_examples():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(5)
    assert ripcalc.quasi_orthogonality(x, -x) == pytest.approx(0.0, abs=1e-14)
    assert ripcalc.quasi_orthogonality(x, np.zeros(5)) == pytest.approx(1.0)
    unit = np.zeros(5)
    unit[0] = 1.0
    perp = np.zeros(5)
    perp[1] = 3.0
    assert ripcalc.quasi_orthogonality(unit, perp) == pytest.approx(1.0)


def test_quasi_orthogonality_rejects_zero():
    with pytest.raises(ValueError):
        ripcalc.quasi_orthogonality(np.zeros(3), np.ones(3))


def test_quasi_descent_examples():
    model = cr.GroupSparse(grouped(8, 2), 2)
    x = cr.sample_model(model, 1)
    assert ripcalc.quasi_descent(model, x, -x) == pytest.approx(0.0, abs=1e-14)
    assert ripcalc.quasi_descent(model, x, np.zeros(8)) == pytest.approx(
        1.0, abs=1e-10)


def test_quasi_descent_infinite_off_span():
    gs = cr.GroupStructure(((0, 1),), 3)
    model = cr.GroupSparse(gs, 1)
    x = np.array([1.0, 0.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])
    assert ripcalc.quasi_descent(model, x, z) == math.inf


# ---------------------------------------------------------------------------
# pointwise formulas


def test_delta_uos_canonical_values():
    x = np.array([1.0, 0.0])
    z_opp = -x  # alpha = 0 with sigma = 0
    assert ripcalc.delta_uos(x, z_opp, 0.0) == pytest.approx(1.0, abs=1e-12)
    # <x, z> = -|x|^2 and |x+z|_S = |x| gives 1/sqrt(2)
    z = np.array([-1.0, 1.0])
    assert ripcalc.delta_uos(x, z, 1.0) == pytest.approx(
        1.0 / math.sqrt(2.0), abs=1e-12)


def test_delta_cone_canonical_values():
    x = np.array([1.0, 0.0])
    z = np.array([-1.0, 1.0])
    assert ripcalc.delta_cone(x, z, 1.0) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert ripcalc.delta_cone(x, -x, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_delta_uos_matches_rewritten_form():
    for x, z, sigma, rho, alpha in admissible_points(200, 1):
        a = ripcalc.delta_uos(x, z, sigma)
        b = ripcalc.delta_uos_from_constants(rho, alpha)
        assert a == pytest.approx(b, abs=1e-12 * max(1.0, abs(b)))


def test_delta_uos_rejects_negative_radicand():
    x = np.array([1.0, 0.0])
    z = np.array([0.5, 0.0])  # <x,z> > 0, tiny sigma
    with pytest.raises(ripcalc.InadmissibleDecompositionError):
        ripcalc.delta_uos(x, z, 0.1)


def test_sharp_branch_region_with_large_inner_product_is_empty():
    # <x,z> >= sigma^2/2 forces a negative radicand, so the first branch of
    # the sharp constant never sees an admissible point through <x,z> alone;
    # the operative condition is <x, x+z> >= sigma^2/2.
    x = np.array([1.0, 0.0])
    z = np.array([1.0, 0.0])
    sigma = 1.0  # <x,z> = 1 >= sigma^2/2
    with pytest.raises(ripcalc.InadmissibleDecompositionError):
        ripcalc.delta_uos(x, z, sigma)


def test_sharp_equals_uos_on_interior_branch():
    for x, z, sigma, rho, alpha in admissible_points(300, 2):
        if rho >= alpha / 2.0 + 1e-9:
            assert ripcalc.delta_cone_sharp(x, z, sigma) == pytest.approx(
                ripcalc.delta_uos(x, z, sigma), abs=1e-14)


def test_sharp_equals_cone_on_boundary_branch():
    for x, z, sigma, rho, alpha in admissible_points(300, 3):
        if rho < alpha / 2.0 - 1e-9:
            assert float(x @ z) < sigma**2 / 2.0  # the loose condition holds too
            assert ripcalc.delta_cone_sharp(x, z, sigma) == pytest.approx(
                ripcalc.delta_cone(x, z, sigma), abs=1e-14)


def test_delta_ordering_cone_sharp_uos():
    for x, z, sigma, _, _ in admissible_points(500, 4):
        d_cone = ripcalc.delta_cone(x, z, sigma)
        d_sharp = ripcalc.delta_cone_sharp(x, z, sigma)
        d_uos = ripcalc.delta_uos(x, z, sigma)
        assert d_cone <= d_sharp + 1e-12
        assert d_sharp <= d_uos + 1e-12


def test_shortcut_orthogonal_decomposition():
    # rho = 0 and alpha <= a_bar give delta >= 1/sqrt(1 + a_bar)
    rng = np.random.default_rng(5)
    for _ in range(200):
        a_bar = rng.uniform(0.1, 3.0)
        alpha = rng.uniform(0.0, a_bar)
        val = ripcalc.delta_uos_from_constants(0.0, alpha)
        assert val >= 1.0 / math.sqrt(1.0 + a_bar) - 1e-12


# ---------------------------------------------------------------------------
# stability constants


def test_d_constant_vanishes_at_pointwise_delta():
    for x, z, sigma, rho, alpha in admissible_points(100, 6):
        d_uos = ripcalc.delta_uos(x, z, sigma)
        if not np.isfinite(d_uos):
            continue
        assert ripcalc.d_constant("uos", x, z, d_uos, sigma) == pytest.approx(
            0.0, abs=1e-10)
        d_sharp = ripcalc.delta_cone_sharp(x, z, sigma)
        assert ripcalc.d_constant("cone_sharp", x, z, d_sharp, sigma) == \
            pytest.approx(0.0, abs=1e-10)


def test_d_constant_plug_in_value():
    # rho = 0, alpha = 1, delta = 0 gives D = 2 / (1 + 1) = 1
    x = np.array([1.0, 0.0])
    z = np.array([-1.0, 1.0])
    assert ripcalc.d_constant("uos", x, z, 0.0, 1.0) == pytest.approx(1.0)


def test_d_constant_decreasing_in_delta():
    x = np.array([1.0, 0.0])
    z = np.array([-1.0, 1.0])
    vals = [ripcalc.d_constant("uos", x, z, d, 1.0) for d in (0.0, 0.3, 0.6)]
    assert vals[0] > vals[1] > vals[2]


def test_d_ordering_uos_dominates_cone_sharp():
    rng = np.random.default_rng(7)
    for x, z, sigma, _, _ in admissible_points(300, 8):
        delta = rng.uniform(0.0, 1.0)
        assert ripcalc.d_constant("uos", x, z, delta, sigma) >= \
            ripcalc.d_constant("cone_sharp", x, z, delta, sigma) - 1e-12


def test_stability_spec_bundles_the_triple():
    x = np.array([1.0, 0.0])
    z = np.array([-1.0, 1.0])
    spec = ripcalc.stability_spec("uos", x, z, 0.3, 1.0)
    assert spec.delta == 0.3
    assert spec.d_value == pytest.approx(1.0 - 0.3 * math.sqrt(2.0))
    assert spec.c_value == pytest.approx(
        2.0 * math.sqrt(1.3) / (1.0 - 0.3 * math.sqrt(2.0)))
    with pytest.raises(ValueError):  # past the pointwise constant, D <= 0
        ripcalc.stability_spec("uos", x, z, 0.9, 1.0)


def test_stability_constant_values():
    assert ripcalc.stability_constant(0.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ripcalc.stability_constant(0.5, 0.0)
    assert ripcalc.stability_constant_blocks(2, 0.0) == pytest.approx(
        1.0 + math.sqrt(3.0))
    assert ripcalc.stability_constant_blocks(1, 0.5) == pytest.approx(
        2.0 * math.sqrt(1.5) / (1.0 - 0.5 * math.sqrt(2.0)))
    # the single-block constant blows up at the admissibility edge
    grow = [ripcalc.stability_constant_blocks(1, d)
            for d in (0.70, 0.707, 0.7071)]
    assert grow[0] < grow[1] < grow[2]
    with pytest.raises(ValueError):
        ripcalc.stability_constant_blocks(1, 1.0 / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# analytic dispatch


def test_analytic_bounds_table():
    gs = grouped(12, 2)
    assert ripcalc.analytic_delta_bound(
        cr.GroupSparse(gs, 2), cr.GroupNorm(gs)).value == pytest.approx(
        1.0 / math.sqrt(2.0))
    blocks = cr.BlockStructure((
        cr.Block(cr.GroupStructure(((0, 1),), 4), 1, 1.0),
        cr.Block(cr.GroupStructure(((2, 3),), 4), 1, 1.0),
    ))
    model = cr.BlockSparse(blocks)
    bound = ripcalc.analytic_delta_bound(model, cr.WeightedBlockNorm(blocks))
    assert bound.value == pytest.approx(0.5)  # J=2, w_j = 1/sqrt(K_j) = 1
    atoms = np.eye(3)
    half = cr.HalfLines(atoms)
    cone_bound = ripcalc.analytic_delta_bound(half, cr.ModelAtomicNorm(half))
    assert cone_bound.value == pytest.approx(2.0 / 3.0)  # mu = 0, cone case
    sym = cr.HalfLines(np.vstack([np.eye(3), -np.eye(3)]))
    uos_bound = ripcalc.analytic_delta_bound(sym, cr.ModelAtomicNorm(sym))
    assert uos_bound.value == pytest.approx(1.0 / math.sqrt(2.0))  # mu = 0, lines
    perm = cr.PermutationCone(4)
    assert ripcalc.analytic_delta_bound(perm, cr.BirkhoffGauge(4)).value == \
        pytest.approx(2.0 / 3.0)
    sub = cr.Subspace(np.eye(4)[:2])
    assert ripcalc.analytic_delta_bound(
        sub, cr.SubspaceIndicator(np.eye(4)[:2])).value == 1.0
    assert ripcalc.analytic_delta_bound(
        cr.LowRank(4, 4, 2), cr.NuclearNorm(4, 4)).value == pytest.approx(
        1.0 / math.sqrt(2.0))


def test_analytic_bound_unknown_pair():
    with pytest.raises(ripcalc.NoAnalyticBoundError):
        ripcalc.analytic_delta_bound(cr.LowRank(3, 3, 1), cr.L1(9))


def test_single_weighted_block_reduces_to_group_constant():
    blocks = cr.BlockStructure((
        cr.Block(cr.GroupStructure(((0, 1), (2, 3)), 4), 1, 3.0),))
    model = cr.BlockSparse(blocks)
    bound = ripcalc.analytic_delta_bound(model, cr.WeightedBlockNorm(blocks))
    assert bound.value == pytest.approx(1.0 / math.sqrt(2.0))


def test_weighted_block_kappa_dependence():
    blocks = cr.BlockStructure((
        cr.Block(cr.GroupStructure(((0,), (1,)), 6), 1, 1.0),
        cr.Block(cr.GroupStructure(((2,), (3,), (4,), (5,)), 6), 4, 1.0),
    ))
    model = cr.BlockSparse(blocks)
    kappa = ripcalc.kappa_weights(blocks)
    assert kappa == pytest.approx(2.0)  # sqrt(4)/sqrt(1)
    bound = ripcalc.analytic_delta_bound(model, cr.WeightedBlockNorm(blocks))
    assert bound.value == pytest.approx(1.0 / math.sqrt(2.0 + 2 * 4.0))


def test_figure_ordering_against_baselines():
    # weighted constant beats the sparsity-in-levels baseline at kappa = 1
    for j in range(1, 21):
        ours = 1.0 / math.sqrt(2.0) if j == 1 else 1.0 / math.sqrt(2.0 + j)
        assert ours > ripcalc.bastounis_delta(j, 1.0)
    assert 1.0 / math.sqrt(2.0) > ripcalc.ayaz_delta()


# ---------------------------------------------------------------------------
# coherence


def test_coherence_values():
    assert ripcalc.coherence(np.eye(3)) == pytest.approx(0.0)
    atoms = np.array([[1.0, 0.0], [math.sqrt(0.5), math.sqrt(0.5)]])
    assert ripcalc.coherence(atoms) == pytest.approx(1.0 / math.sqrt(2.0))
    with pytest.raises(ValueError):
        ripcalc.coherence(np.array([[1.0, 0.0], [-1.0, 0.0]]))


@pytest.mark.parametrize("n", [3, 4])
def test_coherence_of_permutation_atoms(n):
    cone = cr.PermutationCone(n)
    atoms = np.array([p.reshape(-1) for p in cone.permutation_matrices()])
    atoms = atoms / math.sqrt(n)
    assert ripcalc.coherence(atoms) == pytest.approx(1.0 - 2.0 / n, abs=1e-12)


# ---------------------------------------------------------------------------
# optimal decompositions


def test_optimal_group_single_group_input():
    gs = grouped(8, 2)
    model = cr.GroupSparse(gs, 2)
    z = np.zeros(8)
    z[0:2] = [1.0, -1.0]
    point = ripcalc.optimal_group_decomposition(z, model)
    assert np.allclose(point.x, -z)
    assert point.alpha == pytest.approx(0.0, abs=1e-14)


def test_optimal_group_properties_on_descent_vectors():
    gs = grouped(24, 3)
    model = cr.GroupSparse(gs, 2)
    f = cr.GroupNorm(gs)
    for seed in range(50):
        _, z = cr.sample_descent(model, f, seed)
        point = ripcalc.optimal_group_decomposition(z, model)
        assert point.rho == pytest.approx(0.0, abs=1e-12)
        assert point.alpha <= 1.0 + 1e-9


def test_optimal_rank_examples():
    z = np.diag([3.0, 1.0])
    point = ripcalc.optimal_rank_decomposition(z, 1)
    assert np.allclose(point.x, -np.diag([3.0, 0.0]))
    full = np.diag([2.0, 1.0])
    point = ripcalc.optimal_rank_decomposition(full, 2)
    assert np.allclose(point.x, -full)
    assert point.alpha == pytest.approx(0.0, abs=1e-14)


def test_optimal_rank_delta_matches_residual_form():
    rng = np.random.default_rng(20)
    for _ in range(20):
        z = rng.standard_normal((5, 5))
        r = int(rng.integers(1, 3))
        point = ripcalc.optimal_rank_decomposition(z, r)
        sv = np.linalg.svd(z, compute_uv=False)
        zr_norm2 = float((sv[:r] ** 2).sum())
        from conerip.norms import ksupport_from_magnitudes
        resid = ksupport_from_magnitudes(sv[r:], r)
        expected = 1.0 / math.sqrt(resid**2 / zr_norm2 + 1.0)
        got = ripcalc.delta_uos_from_constants(point.rho, point.alpha)
        assert got == pytest.approx(expected, abs=1e-10)


def test_scale_invariance_of_pointwise_delta():
    gs = grouped(12, 2)
    model = cr.GroupSparse(gs, 2)
    f = cr.GroupNorm(gs)
    for seed in range(20):
        _, z = cr.sample_descent(model, f, seed)
        p1 = ripcalc.optimal_group_decomposition(z, model)
        p2 = ripcalc.optimal_group_decomposition(3.7 * z, model)
        d1 = ripcalc.delta_uos_from_constants(p1.rho, p1.alpha)
        d2 = ripcalc.delta_uos_from_constants(p2.rho, p2.alpha)
        assert d1 == pytest.approx(d2, rel=1e-10)
    z = np.diag([3.0, 1.0, 0.5])
    q1 = ripcalc.optimal_rank_decomposition(z, 1)
    q2 = ripcalc.optimal_rank_decomposition(0.25 * z, 1)
    assert ripcalc.delta_uos_from_constants(q1.rho, q1.alpha) == pytest.approx(
        ripcalc.delta_uos_from_constants(q2.rho, q2.alpha), rel=1e-10)


# ---------------------------------------------------------------------------
# Monte-Carlo diagnostics


def test_empirical_delta_group_bound():
    gs = grouped(24, 3)
    model = cr.GroupSparse(gs, 2)
    f = cr.GroupNorm(gs)
    for rho, alpha, delta in ripcalc.empirical_delta_samples(
            model, f, 50, "optimal_group", seed=0):
        assert delta >= 1.0 / math.sqrt(2.0) - 1e-9
    bound = ripcalc.empirical_delta(model, f, 50, "optimal_group", seed=0)
    assert bound.kind == "empirical"
    assert bound.value >= 1.0 / math.sqrt(2.0) - 1e-9


def test_empirical_delta_rank_bound():
    model = cr.LowRank(5, 5, 1)
    f = cr.NuclearNorm(5, 5)
    bound = ripcalc.empirical_delta(model, f, 50, "optimal_rank", seed=0)
    assert bound.value >= 1.0 / math.sqrt(2.0) - 1e-9


def test_empirical_delta_rejects_zero_samples():
    model = cr.LowRank(3, 3, 1)
    with pytest.raises(ValueError):
        ripcalc.empirical_delta(model, cr.NuclearNorm(3, 3), 0, "optimal_rank")


def test_search_strategy_does_not_degrade_warm_start():
    gs = grouped(8, 2)
    model = cr.GroupSparse(gs, 2)
    f = cr.GroupNorm(gs)
    for seed in range(3):
        x0, z = cr.sample_descent(model, f, seed)
        warm = ripcalc.optimal_group_decomposition(z, model)
        warm_delta = ripcalc.delta_uos_from_constants(warm.rho, warm.alpha)
        point = ripcalc._search_decomposition(model, f, x0, z, iterations=30)
        found = ripcalc.delta_uos_from_constants(point.rho, point.alpha)
        assert found >= warm_delta - 1e-9


# ---------------------------------------------------------------------------
# the convex-combination measurement identity


def test_measurement_mixing_identity():
    rng = np.random.default_rng(21)
    for _ in range(300):
        m, n, p = 5, 7, 4
        mat = rng.standard_normal((m, n))
        h = rng.standard_normal((p, n))
        lam = rng.uniform(0.0, 1.0, size=p)
        lam /= lam.sum()
        mh = h @ mat.T
        left = float(np.sum(lam * np.sum(mh**2, axis=1)))
        center = lam @ mh
        right = 4.0 * float(
            np.sum(lam * np.sum((center[None, :] - 0.5 * mh) ** 2, axis=1)))
        assert left == pytest.approx(right, rel=1e-10)


# ---------------------------------------------------------------------------
# instance optimality


def test_instance_optimality_on_model_reduces_to_noise_term():
    gs = grouped(8, 2)
    model = cr.GroupSparse(gs, 2)
    x0 = cr.sample_model(model, 2)
    op = cr.generate(6, 8, "gaussian", 3)
    bound = ripcalc.instance_optimality_bound(5.0, op, x0, model, 0.1, 0.2)
    assert bound == pytest.approx(5.0 * 0.3)


def test_instance_optimality_zero_operator():
    gs = grouped(8, 2)
    model = cr.GroupSparse(gs, 1)
    rng = np.random.default_rng(4)
    x0 = rng.standard_normal(8)
    z = np.zeros((3, 8))
    resid = np.linalg.norm(x0 - cr.project(model, x0))
    bound = ripcalc.instance_optimality_bound(2.0, z, x0, model, 0.1, 0.1)
    assert bound == pytest.approx(2.0 * 0.2 + resid)


def test_instance_optimality_dominates_decoder_error():
    gs = grouped(12, 2)
    model = cr.GroupSparse(gs, 1)
    f = cr.GroupNorm(gs)
    op = cr.generate(10, 12, "orthonormal", 42)
    est = cr.exact_rip_group(op, gs, 2)
    assert est.delta < 1.0 / math.sqrt(2.0)
    c = ripcalc.stability_constant_blocks(1, est.delta)
    rng = np.random.default_rng(9)
    for trial in range(5):
        x0 = rng.standard_normal(12)  # generic, off-model input
        eta = 0.01
        e = rng.standard_normal(10)
        e = eta * e / np.linalg.norm(e)
        rep = cr.solve_ball(op, op.matrix @ x0 + e, f, 0.01)
        assert rep.converged
        err = np.linalg.norm(rep.solution - x0)
        bound = ripcalc.instance_optimality_bound(c, op, x0, model, eta, 0.01)
        assert err <= bound + 1e-9
