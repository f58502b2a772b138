import math

import numpy as np
import pytest

import conerip as cr
from conerip import norms
from conerip.oracles import decomposition_oracle


def grouped(n, size):
    return cr.GroupStructure(tuple(tuple(range(size * j, size * j + size))
                                   for j in range(n // size)), n)


PAIRS = grouped(4, 2)


# ---------------------------------------------------------------------------
# evaluation examples


def test_group_norm_value():
    f = cr.GroupNorm(PAIRS)
    assert cr.eval(f, np.array([3.0, 4.0, 0.0, 1.0])) == pytest.approx(6.0)


def test_group_norm_off_domain_is_infinite():
    gs = cr.GroupStructure(((0, 1),), 3)
    assert cr.eval(cr.GroupNorm(gs), np.array([1.0, 0.0, 1.0])) == math.inf


def test_atomic_norm_equals_l2_on_model():
    model = cr.GroupSparse(grouped(12, 3), 2)
    f = cr.ModelAtomicNorm(model)
    for seed in range(20):
        x = cr.sample_model(model, seed)
        assert cr.eval(f, x) == pytest.approx(np.linalg.norm(x), abs=1e-10)


def test_atomic_norm_off_span_is_infinite():
    gs = cr.GroupStructure(((0, 1),), 3)
    f = cr.ModelAtomicNorm(cr.GroupSparse(gs, 1))
    assert cr.eval(f, np.array([0.0, 0.0, 1.0])) == math.inf


def test_atomic_norm_k1_trivial_groups_is_l1():
    f = cr.ModelAtomicNorm(cr.GroupSparse(cr.trivial_groups(3), 1))
    assert cr.eval(f, np.array([1.0, -2.0, 3.0])) == pytest.approx(6.0)


def test_atomic_norm_kn_trivial_groups_is_l2():
    rng = np.random.default_rng(0)
    f = cr.ModelAtomicNorm(cr.GroupSparse(cr.trivial_groups(5), 5))
    for _ in range(20):
        x = rng.standard_normal(5)
        assert cr.eval(f, x) == pytest.approx(np.linalg.norm(x), abs=1e-12)


def test_atomic_norm_matches_oracle_all_ones():
    model = cr.GroupSparse(cr.trivial_groups(3), 2)
    value = cr.eval(cr.ModelAtomicNorm(model), np.ones(3))
    dec = decomposition_oracle(model, np.ones(3))
    assert value == pytest.approx(dec.objective, abs=1e-6)
    assert value == pytest.approx(3.0 / math.sqrt(2.0), abs=1e-10)


def test_spectral_atomic_norm_reduces_to_nuclear_and_frobenius():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((4, 4))
    nuclear = cr.eval(cr.NuclearNorm(4, 4), z)
    assert cr.eval(cr.ModelAtomicNorm(cr.LowRank(4, 4, 1)), z.reshape(-1)) == \
        pytest.approx(nuclear, abs=1e-10)
    assert cr.eval(cr.ModelAtomicNorm(cr.LowRank(4, 4, 4)), z.reshape(-1)) == \
        pytest.approx(np.linalg.norm(z), abs=1e-10)


def test_birkhoff_gauge_and_scaled_atomic_norm():
    perm = np.eye(3)[[2, 0, 1]].reshape(-1)
    assert cr.eval(cr.BirkhoffGauge(3), 2.0 * perm) == pytest.approx(2.0)
    assert cr.eval(cr.BirkhoffGauge(3), perm + np.eye(3).reshape(-1) * 0.5) == \
        pytest.approx(1.5)
    f = cr.ModelAtomicNorm(cr.PermutationCone(3))
    assert cr.eval(f, perm) == pytest.approx(math.sqrt(3.0), abs=1e-12)
    off = np.arange(9.0)
    assert cr.eval(cr.BirkhoffGauge(3), off) == math.inf


def test_subspace_indicator_values():
    f = cr.SubspaceIndicator(np.eye(4)[:2])
    assert cr.eval(f, np.array([1.0, 2.0, 0.0, 0.0])) == 0.0
    assert cr.eval(f, np.array([1.0, 2.0, 1e-3, 0.0])) == math.inf


def test_weighted_block_norm_value():
    g1 = cr.GroupStructure(((0, 1),), 4)
    g2 = cr.GroupStructure(((2, 3),), 4)
    f = cr.WeightedBlockNorm(cr.BlockStructure(
        (cr.Block(g1, 1, 2.0), cr.Block(g2, 1, 0.5))))
    x = np.array([3.0, 4.0, 0.0, 1.0])
    assert cr.eval(f, x) == pytest.approx(2.0 * 5.0 + 0.5 * 1.0)


# ---------------------------------------------------------------------------
# duals


def test_group_dual_is_max_group_norm():
    f = cr.GroupNorm(PAIRS)
    assert cr.dual_eval(f, np.array([3.0, 4.0, 0.0, 1.0])) == pytest.approx(5.0)


def test_halfline_dual_max_correlation():
    f = cr.ModelAtomicNorm(cr.HalfLines(np.eye(2)))
    assert cr.dual_eval(f, np.array([0.2, -0.7])) == pytest.approx(0.7)


def test_duality_inequality_random():
    rng = np.random.default_rng(3)
    model = cr.GroupSparse(grouped(12, 2), 2)
    fams = [
        cr.GroupNorm(grouped(12, 2)),
        cr.ModelAtomicNorm(model),
        cr.L1(12),
    ]
    for f in fams:
        for _ in range(1000):
            x = rng.standard_normal(12)
            assert np.linalg.norm(x) ** 2 <= cr.eval(f, x) * cr.dual_eval(f, x) + 1e-8


def test_indicator_has_no_dual():
    with pytest.raises(norms.UnsupportedRegularizerError):
        cr.dual_eval(cr.SubspaceIndicator(np.eye(3)[:1]), np.zeros(3))


# ---------------------------------------------------------------------------
# proximal maps


def test_prox_group_kills_small_groups():
    f = cr.GroupNorm(PAIRS)
    x = np.array([0.3, 0.4, 3.0, 4.0])
    out = cr.prox(f, x, 1.0)
    assert np.allclose(out[:2], 0.0)
    assert np.allclose(out[2:], x[2:] * (1.0 - 1.0 / 5.0))


def test_prox_small_step_is_near_identity():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(4)
    for f in (cr.GroupNorm(PAIRS), cr.L1(4)):
        assert np.linalg.norm(cr.prox(f, x, 1e-8) - x) < 1e-7


def test_prox_nuclear_soft_thresholds_singular_values():
    f = cr.NuclearNorm(2, 2)
    out = cr.prox(f, np.diag([3.0, 1.0]).reshape(-1), 2.0)
    assert np.allclose(out.reshape(2, 2), np.diag([1.0, 0.0]), atol=1e-12)


def test_prox_is_minimizer_among_samples():
    rng = np.random.default_rng(5)
    f = cr.GroupNorm(PAIRS)
    x = rng.standard_normal(4)
    step = 0.7
    p = cr.prox(f, x, step)
    best = cr.eval(f, p) + np.linalg.norm(p - x) ** 2 / (2 * step)
    for _ in range(200):
        q = p + 0.1 * rng.standard_normal(4)
        val = cr.eval(f, q) + np.linalg.norm(q - x) ** 2 / (2 * step)
        assert best <= val + 1e-10


def test_prox_indicator_projects():
    f = cr.SubspaceIndicator(np.eye(4)[:2])
    out = cr.prox(f, np.array([1.0, 2.0, 3.0, 4.0]), 0.5)
    assert np.allclose(out, [1.0, 2.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# linear minimization oracle


def test_lmo_l1_steepest_coordinate():
    out = cr.lmo(cr.L1(3), np.array([2.0, -5.0, 1.0]))
    assert np.allclose(out, [0.0, 1.0, 0.0])


def test_lmo_permutation_is_scaled_vertex():
    rng = np.random.default_rng(6)
    f = cr.ModelAtomicNorm(cr.PermutationCone(3))
    d = rng.standard_normal(9)
    atom = cr.lmo(f, d).reshape(3, 3) * math.sqrt(3.0)
    assert np.all(np.isin(np.round(atom, 9), [0.0, 1.0]))
    assert np.all(atom.sum(axis=0) == 1.0) and np.all(atom.sum(axis=1) == 1.0)


def test_lmo_beats_random_atoms():
    rng = np.random.default_rng(7)
    model = cr.GroupSparse(grouped(12, 2), 2)
    f = cr.ModelAtomicNorm(model)
    d = rng.standard_normal(12)
    best = float(d @ cr.lmo(f, d))
    for i in range(200):
        a = cr.sample_model(model, i)
        nrm = np.linalg.norm(a)
        if nrm == 0:
            continue
        assert best <= float(d @ (a / nrm)) + 1e-10
        assert best <= float(d @ (-a / nrm)) + 1e-10


# ---------------------------------------------------------------------------
# decomposition oracle


def test_oracle_single_atom_on_model():
    model = cr.GroupSparse(grouped(8, 2), 2)
    x = cr.sample_model(model, 11)
    dec = decomposition_oracle(model, x)
    assert dec.objective == pytest.approx(np.linalg.norm(x), abs=1e-6)
    assert np.linalg.norm(dec.reconstruction() - x) < 1e-8


def test_oracle_matches_sorted_formula():
    model = cr.GroupSparse(cr.trivial_groups(3), 2)
    x = np.array([1.0, 1.0, 1.0])
    dec = decomposition_oracle(model, x)
    assert dec.objective == pytest.approx(
        cr.eval(cr.ModelAtomicNorm(model), x), abs=1e-6)
    assert np.linalg.norm(dec.reconstruction() - x) < 1e-8


def test_oracle_random_group_instances():
    rng = np.random.default_rng(8)
    gs = grouped(10, 2)
    for k in (1, 2, 3):
        model = cr.GroupSparse(gs, k)
        f = cr.ModelAtomicNorm(model)
        for _ in range(5):
            x = rng.standard_normal(10)
            dec = decomposition_oracle(model, x)
            assert dec.objective == pytest.approx(cr.eval(f, x), abs=1e-6)
            assert np.linalg.norm(dec.reconstruction() - x) < 1e-8


def test_oracle_finite_atoms():
    atoms = np.array([[1.0, 0.0], [0.0, 1.0], [math.sqrt(0.5), math.sqrt(0.5)]])
    model = cr.HalfLines(atoms)
    x = np.array([0.3, 0.5])
    dec = decomposition_oracle(model, x)
    assert dec.objective == pytest.approx(
        cr.eval(cr.ModelAtomicNorm(model), x), abs=1e-8)
    assert np.linalg.norm(dec.reconstruction() - x) < 1e-8


def test_oracle_block_product_refinement():
    g1 = cr.GroupStructure(((0,), (1,), (2,)), 6)
    g2 = cr.GroupStructure(((3,), (4,), (5,)), 6)
    model = cr.BlockSparse(cr.BlockStructure((cr.Block(g1, 2), cr.Block(g2, 1))))
    rng = np.random.default_rng(9)
    x = rng.standard_normal(6)
    dec = decomposition_oracle(model, x)
    assert dec.objective == pytest.approx(
        cr.eval(cr.ModelAtomicNorm(model), x), abs=1e-6)
    assert np.linalg.norm(dec.reconstruction() - x) < 1e-8


# ---------------------------------------------------------------------------
# gauge properties


def _random_regularizers():
    gs = grouped(12, 2)
    model = cr.GroupSparse(gs, 2)
    return [
        cr.GroupNorm(gs),
        cr.ModelAtomicNorm(model),
        cr.L1(12),
        cr.NuclearNorm(3, 4),
    ]


def test_positive_homogeneity():
    rng = np.random.default_rng(10)
    for f in _random_regularizers():
        for _ in range(100):
            x = rng.standard_normal(12)
            t = rng.uniform(0.0, 5.0)
            a, b = cr.eval(f, t * x), t * cr.eval(f, x)
            assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_sublinearity():
    rng = np.random.default_rng(11)
    for f in _random_regularizers():
        for _ in range(100):
            x = rng.standard_normal(12)
            y = rng.standard_normal(12)
            assert cr.eval(f, x + y) <= cr.eval(f, x) + cr.eval(f, y) + 1e-10


def test_atomic_norm_dominates_euclidean():
    rng = np.random.default_rng(12)
    model = cr.GroupSparse(grouped(12, 2), 2)
    f = cr.ModelAtomicNorm(model)
    for _ in range(300):
        x = rng.standard_normal(12)
        assert cr.eval(f, x) >= np.linalg.norm(x) - 1e-10


def test_cartesian_product_identity():
    g1 = cr.GroupStructure(((0, 1), (2, 3)), 8)
    g2 = cr.GroupStructure(((4,), (5,), (6,), (7,)), 8)
    blocks = cr.BlockStructure((cr.Block(g1, 1), cr.Block(g2, 2)))
    model = cr.BlockSparse(blocks)
    f = cr.ModelAtomicNorm(model)
    sub1 = cr.ModelAtomicNorm(cr.GroupSparse(g1, 1))
    sub2 = cr.ModelAtomicNorm(cr.GroupSparse(g2, 2))
    rng = np.random.default_rng(13)
    for _ in range(200):
        x = rng.standard_normal(8)
        joint = cr.eval(f, x) ** 2
        split = cr.eval(sub1, g1.restrict(x, (0, 1))) ** 2 + \
            cr.eval(sub2, g2.restrict(x, (0, 1, 2, 3))) ** 2
        assert joint == pytest.approx(split, abs=1e-8)


def test_cartesian_identity_against_joint_program():
    # independent check of the product rule: solve the joint decomposition
    # program over product supports with cvxpy and compare
    import cvxpy as cp
    import itertools

    g1 = cr.GroupStructure(((0,), (1,)), 4)
    g2 = cr.GroupStructure(((2,), (3,)), 4)
    blocks = cr.BlockStructure((cr.Block(g1, 1), cr.Block(g2, 1)))
    f = cr.ModelAtomicNorm(cr.BlockSparse(blocks))
    rng = np.random.default_rng(14)
    supports = [
        (s1, s2)
        for s1 in itertools.combinations(range(2), 1)
        for s2 in itertools.combinations(range(2), 1)
    ]
    for _ in range(10):
        x = rng.standard_normal(4)
        mags = np.abs(x)
        lam = cp.Variable(len(supports), nonneg=True)
        cover = []
        for g in range(4):
            block, local = (0, g) if g < 2 else (1, g - 2)
            sel = [t for t, s in enumerate(supports) if local in s[block]]
            cover.append(cp.sum(lam[sel]))
        objective = cp.sum(
            [cp.quad_over_lin(mags[g], cover[g]) for g in range(4) if mags[g] > 0]
        )
        prob = cp.Problem(cp.Minimize(objective), [cp.sum(lam) == 1])
        prob.solve()
        assert math.sqrt(prob.value) == pytest.approx(cr.eval(f, x), abs=1e-6)


def test_orthogonal_polytope_bound_and_corollary():
    rng = np.random.default_rng(15)
    gs = grouped(16, 2)
    fa = cr.GroupNorm(gs)
    for _ in range(100):
        k = int(rng.integers(2, 4))
        ell = int(rng.integers(k, 2 * k + 1))
        model = cr.GroupSparse(gs, k)
        ids = rng.choice(gs.num_groups, size=ell, replace=False)
        coeffs = rng.standard_normal(ell)
        u = np.zeros(16)
        for c, j in zip(coeffs, ids):
            atom = np.zeros(16)
            idx = list(gs.groups[j])
            vec = rng.standard_normal(len(idx))
            atom[idx] = vec / np.linalg.norm(vec)
            u += c * atom
        value = cr.eval(cr.ModelAtomicNorm(model), u)
        bound = max(np.abs(coeffs).sum() / math.sqrt(k),
                    np.abs(coeffs).max() * math.sqrt(k))
        assert value <= bound + 1e-8
        corollary = max(cr.eval(fa, u) / math.sqrt(k),
                        math.sqrt(k) * cr.dual_eval(fa, u))
        assert value <= corollary + 1e-8


def test_regularizer_config_round_trip(tmp_path):
    from conerip import configio

    regs = [
        cr.GroupNorm(PAIRS),
        cr.ModelAtomicNorm(cr.GroupSparse(PAIRS, 1)),
        cr.NuclearNorm(2, 3),
        cr.BirkhoffGauge(3),
        cr.SubspaceIndicator(np.eye(3)[:1]),
        cr.L1(5),
    ]
    for i, f in enumerate(regs):
        path = tmp_path / f"reg{i}.yaml"
        configio.dump_regularizer(f, path)
        back = configio.load_regularizer(path)
        assert type(back) is type(f)
        assert back.ambient_dim == f.ambient_dim
