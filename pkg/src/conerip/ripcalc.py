"""Admissible RIP-constant calculus.

Pointwise constants are computed from a decomposition z = (x + z) - x with
x in the model: the quasi-orthogonality constant rho = <x, x+z> / |x|^2 and
the quasi-descent constant alpha = |x+z|_S^2 / |x|^2, where |.|_S is the
model atomic norm.  The admissible constant of a (model, regularizer) pair
is an inf over descent vectors of a sup over decompositions; this module
never claims to compute that inf-sup exactly.  Analytic values come from a
dispatch table of known sharp bounds, Monte-Carlo values are labeled
diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models, norms
from .models import (
    BlockSparse,
    GroupSparse,
    HalfLines,
    LowRank,
    PermutationCone,
    PointCloudCone,
    Subspace,
    project,
    sample_descent,
    top_groups,
)
from .norms import (
    BirkhoffGauge,
    GroupNorm,
    L1,
    ModelAtomicNorm,
    NuclearNorm,
    SubspaceIndicator,
    WeightedBlockNorm,
    ksupport_from_magnitudes,
)

GUARD_TOL = 1e-12


class InadmissibleDecompositionError(ValueError):
    """The radicand/denominator of a pointwise constant is not positive."""


class NoAnalyticBoundError(ValueError):
    """No analytic admissible constant is known for this (model, f) pair."""


@dataclass(frozen=True, eq=False)
class DecompositionPoint:
    """A decomposition z = (x + z) - x with its two scalar constants."""

    x: np.ndarray
    z: np.ndarray
    rho: float
    alpha: float


@dataclass(frozen=True)
class DeltaBound:
    value: float
    kind: str  # analytic | pointwise | empirical
    model: str
    regularizer: str
    note: str = ""

    def __post_init__(self):
        if self.kind == "analytic" and not 0.0 < self.value <= 1.0:
            raise ValueError("analytic bound must lie in (0, 1]")


@dataclass(frozen=True)
class StabilitySpec:
    delta: float
    d_value: float
    c_value: float


# ---------------------------------------------------------------------------
# the two scalar constants


def quasi_orthogonality(x, z):
    """rho(x, z) = <x, x+z> / |x|^2 (0 means x is orthogonal to x+z)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    nx2 = float(x @ x)
    if nx2 == 0.0:
        raise ValueError("x must be nonzero")
    return float(x @ (x + z)) / nx2


def quasi_descent(model, x, z, domain_tol=norms.DOMAIN_TOL):
    """alpha(x, z) = |x+z|_S^2 / |x|^2 with |.|_S the model atomic norm."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    nx2 = float(x @ x)
    if nx2 == 0.0:
        raise ValueError("x must be nonzero")
    sigma = norms.eval(ModelAtomicNorm(model), x + z, domain_tol)
    if not np.isfinite(sigma):
        return math.inf
    return sigma * sigma / nx2


# ---------------------------------------------------------------------------
# pointwise admissible constants


def delta_uos(x, z, sigma_norm_of_x_plus_z):
    """Union-of-subspaces pointwise constant -<x,z> / (|x| sqrt(radicand))."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ValueError("x must be nonzero")
    if not np.isfinite(sigma_norm_of_x_plus_z):
        return 0.0
    ip = float(x @ z)
    rad = sigma_norm_of_x_plus_z**2 - nx**2 - 2.0 * ip
    if rad < -GUARD_TOL:
        raise InadmissibleDecompositionError(f"radicand {rad} is negative")
    rad = max(rad, 0.0)
    if rad == 0.0:
        return math.inf if -ip > 0 else 0.0
    return -ip / (nx * math.sqrt(rad))


def delta_cone(x, z, sigma_norm_of_x_plus_z):
    """Cone pointwise constant -2<x,z> / (|x+z|_S^2 - 2<x,z>)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if float(x @ x) == 0.0:
        raise ValueError("x must be nonzero")
    if not np.isfinite(sigma_norm_of_x_plus_z):
        return 0.0
    ip = float(x @ z)
    den = sigma_norm_of_x_plus_z**2 - 2.0 * ip
    if den < -GUARD_TOL or den == 0.0:
        raise InadmissibleDecompositionError(f"denominator {den} is not positive")
    return -2.0 * ip / den


def delta_cone_sharp(x, z, sigma_norm_of_x_plus_z):
    """Sharper cone constant: branch on <x, x+z> >= |x+z|_S^2 / 2.

    The branch condition is the one the proof optimizes over (the optimal
    interior step exists exactly when rho >= alpha/2); it subsumes the
    looser condition <x, z> >= |x+z|_S^2 / 2 since <x, x+z> >= <x, z>.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.isfinite(sigma_norm_of_x_plus_z):
        return 0.0
    if float(x @ (x + z)) >= sigma_norm_of_x_plus_z**2 / 2.0:
        return delta_uos(x, z, sigma_norm_of_x_plus_z)
    return delta_cone(x, z, sigma_norm_of_x_plus_z)


def delta_uos_from_constants(rho, alpha):
    """Rewritten form (1 - rho) / sqrt(1 + alpha - 2 rho)."""
    if not np.isfinite(alpha):
        return 0.0
    rad = 1.0 + alpha - 2.0 * rho
    if rad < -GUARD_TOL:
        raise InadmissibleDecompositionError(f"radicand {rad} is negative")
    rad = max(rad, 0.0)
    if rad == 0.0:
        return math.inf if rho < 1.0 else 0.0
    return (1.0 - rho) / math.sqrt(rad)


def delta_cone_from_constants(rho, alpha):
    if not np.isfinite(alpha):
        return 0.0
    den = 2.0 + alpha - 2.0 * rho
    if den <= GUARD_TOL:
        raise InadmissibleDecompositionError(f"denominator {den} is not positive")
    return 2.0 * (1.0 - rho) / den


def delta_cone_sharp_from_constants(rho, alpha):
    if not np.isfinite(alpha):
        return 0.0
    if rho >= alpha / 2.0:
        return delta_uos_from_constants(rho, alpha)
    return delta_cone_from_constants(rho, alpha)


# ---------------------------------------------------------------------------
# stability constants


def d_constant(setting, x, z, delta, sigma_norm_of_x_plus_z):
    """Stability denominator D(x, z, delta); positive iff delta < pointwise delta.

    D = G(rho, alpha, delta) / (1 + sqrt(alpha)) with
    G_uos  = 2(1 - rho) - 2 delta sqrt(1 + alpha - 2 rho)
    G_cone = G_uos when rho >= alpha/2, else 2(1 - rho) - delta (2 + alpha - 2 rho).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    nx2 = float(x @ x)
    if nx2 == 0.0:
        raise ValueError("x must be nonzero")
    rho = float(x @ (x + z)) / nx2
    if not np.isfinite(sigma_norm_of_x_plus_z):
        return 0.0 if delta == 0.0 else -math.inf
    alpha = sigma_norm_of_x_plus_z**2 / nx2
    return d_constant_from_constants(setting, rho, alpha, delta)


def d_constant_from_constants(setting, rho, alpha, delta):
    rad = 1.0 + alpha - 2.0 * rho
    if rad < -GUARD_TOL:
        raise InadmissibleDecompositionError(f"radicand {rad} is negative")
    rad = max(rad, 0.0)
    if setting == "uos":
        g = 2.0 * (1.0 - rho) - 2.0 * delta * math.sqrt(rad)
    elif setting == "cone_sharp":
        if rho >= alpha / 2.0:
            g = 2.0 * (1.0 - rho) - 2.0 * delta * math.sqrt(rad)
        else:
            g = 2.0 * (1.0 - rho) - delta * (2.0 + alpha - 2.0 * rho)
    else:
        raise ValueError("setting must be 'uos' or 'cone_sharp'")
    return g / (1.0 + math.sqrt(max(alpha, 0.0)))


def stability_constant(delta, d_value):
    """Error amplification C = 2 sqrt(1 + delta) / D; requires D > 0."""
    if d_value <= 0:
        raise ValueError("D must be positive for a finite stability constant")
    return 2.0 * math.sqrt(1.0 + delta) / d_value


def stability_spec(setting, x, z, delta, sigma_norm_of_x_plus_z):
    """Bundle (delta, D, C) for one decomposition; C is finite iff D > 0."""
    d_value = d_constant(setting, x, z, delta, sigma_norm_of_x_plus_z)
    return StabilitySpec(
        delta=delta, d_value=d_value, c_value=stability_constant(delta, d_value)
    )


def stability_constant_blocks(j, delta):
    """Closed-form C for block group-sparse recovery with weights 1/sqrt(K_j).

    j = 1: C <= 2 sqrt(1+delta) / (1 - delta sqrt(2)),   delta < 1/sqrt(2);
    j > 1: C <= (1 + sqrt(1+j)) sqrt(1+delta) / (1 - delta sqrt(2+j)),
           delta < 1/sqrt(2+j).
    """
    if j < 1:
        raise ValueError("j must be at least 1")
    if j == 1:
        if delta >= 1.0 / math.sqrt(2.0):
            raise ValueError("bound requires delta < 1/sqrt(2)")
        return 2.0 * math.sqrt(1.0 + delta) / (1.0 - delta * math.sqrt(2.0))
    if delta >= 1.0 / math.sqrt(2.0 + j):
        raise ValueError("bound requires delta < 1/sqrt(2 + j)")
    return (1.0 + math.sqrt(1.0 + j)) * math.sqrt(1.0 + delta) / (
        1.0 - delta * math.sqrt(2.0 + j)
    )


# ---------------------------------------------------------------------------
# analytic bounds


def kappa_weights(block_structure):
    """Weight-sparsity spread max(w_j sqrt(K_j)) / min(w_j sqrt(K_j))."""
    vals = [b.weight * math.sqrt(b.k) for b in block_structure.blocks]
    return max(vals) / min(vals)


def bastounis_delta(j, kappa):
    """Sparsity-in-levels baseline 1 / sqrt(J (kappa + 0.25)^2 + 1)."""
    return 1.0 / math.sqrt(j * (kappa + 0.25) ** 2 + 1.0)


def ayaz_delta():
    """Group-norm baseline sqrt(2) - 1."""
    return math.sqrt(2.0) - 1.0


def _groups_are_trivial(structure):
    return all(len(g) == 1 for g in structure.groups)


def analytic_delta_bound(model, f):
    """Known analytic admissible constant for a recognized (model, f) pair.

    Recognition is by family and dimensions; the caller is responsible for
    passing a regularizer that actually matches the model's structure.
    """
    if isinstance(model, GroupSparse) and isinstance(f, GroupNorm):
        return DeltaBound(
            1.0 / math.sqrt(2.0), "analytic", model.family, "group_norm",
            note="sharp constant for group-sparse models with the group norm",
        )
    if isinstance(model, GroupSparse) and isinstance(f, L1):
        if _groups_are_trivial(model.structure) and f.n == model.ambient_dim:
            return DeltaBound(
                1.0 / math.sqrt(2.0), "analytic", model.family, "l1",
                note="l1 norm equals the group norm for singleton groups",
            )
        raise NoAnalyticBoundError("l1 bound requires singleton groups")
    if isinstance(model, BlockSparse) and isinstance(f, WeightedBlockNorm):
        j = model.structure.num_blocks
        if j == 1:
            # a single weighted block is a scaled group norm: descent sets,
            # hence the admissible constant, are unchanged by the scaling
            return DeltaBound(
                1.0 / math.sqrt(2.0), "analytic", model.family,
                "weighted_block_norm", note="single block reduces to the group norm",
            )
        kw = kappa_weights(f.structure)
        return DeltaBound(
            1.0 / math.sqrt(2.0 + j * kw * kw), "analytic", model.family,
            "weighted_block_norm",
            note=f"J={j}, kappa_w={kw:.6g}; equals 1/sqrt(2+J) for w_j=1/sqrt(K_j)",
        )
    if isinstance(model, LowRank) and isinstance(f, NuclearNorm):
        return DeltaBound(
            1.0 / math.sqrt(2.0), "analytic", model.family, "nuclear",
            note="sharp constant for bounded-rank models with the nuclear norm",
        )
    if isinstance(model, (HalfLines, PointCloudCone)) and isinstance(
        f, ModelAtomicNorm
    ):
        atoms = model.atoms if isinstance(model, HalfLines) else model.unit_atoms()
        reps = _sign_representatives(atoms)
        mu = coherence(reps) if reps.shape[0] >= 2 else 0.0
        if isinstance(model, HalfLines) and model.symmetric():
            return DeltaBound(
                (1.0 - mu) / math.sqrt(2.0 * (1.0 + mu)), "analytic",
                model.family, "model_atomic",
                note=f"union of lines, coherence mu={mu:.6g}",
            )
        return DeltaBound(
            2.0 * (1.0 - mu) / (3.0 + 2.0 * mu), "analytic", model.family,
            "model_atomic", note=f"finite half-line cone, coherence mu={mu:.6g}",
        )
    if isinstance(model, PermutationCone) and isinstance(
        f, (ModelAtomicNorm, BirkhoffGauge)
    ):
        return DeltaBound(
            2.0 / 3.0, "analytic", model.family, type(f).__name__.lower(),
            note=(
                "bi-stochastic gauge over the permutation cone; the constant "
                "is derived in the row-sum normalization of the gauge, where "
                "it is dimension-free (under unit-Frobenius atoms the sup "
                "over decompositions of a transposition difference scales "
                "as 1/sqrt(n))"
            ),
        )
    if isinstance(model, Subspace) and isinstance(
        f, (SubspaceIndicator, ModelAtomicNorm)
    ):
        return DeltaBound(
            1.0, "analytic", model.family, type(f).__name__.lower(),
            note="descent vectors stay in the subspace",
        )
    raise NoAnalyticBoundError(
        f"no analytic bound for ({type(model).__name__}, {type(f).__name__})"
    )


def _sign_representatives(atoms, tol=1e-12):
    """One atom per sign class: drop duplicates and antipodal copies.

    |<a, b>| is sign-invariant, so the coherence over the representatives
    equals the maximum over distinct non-antipodal pairs of the full set.
    """
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    kept = []
    for a in atoms:
        if not any(abs(float(a @ b)) >= 1.0 - tol for b in kept):
            kept.append(a)
    return np.array(kept)


def coherence(atoms):
    """Largest |<a_i, a_j>| over distinct, non-antipodal unit atoms."""
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    if atoms.shape[0] < 2:
        raise ValueError("coherence needs at least two atoms")
    gram = np.abs(atoms @ atoms.T)
    np.fill_diagonal(gram, 0.0)
    if np.max(gram) >= 1.0 - 1e-12:
        raise ValueError("atom family contains duplicate or antipodal atoms")
    return float(np.max(gram))


# ---------------------------------------------------------------------------
# optimal decompositions


def optimal_group_decomposition(z, model, domain_tol=norms.DOMAIN_TOL):
    """Decomposition x = -z_H with H the k groups of largest norm.

    Guarantees rho(x, z) = 0; for descent vectors of the group norm the
    quasi-descent constant of this decomposition is at most 1.
    """
    if not isinstance(model, GroupSparse):
        raise models.UnsupportedModelError("optimal group split needs a group model")
    z = np.asarray(z, dtype=float).reshape(-1)
    if np.linalg.norm(z) == 0.0:
        raise ValueError("z must be nonzero")
    structure = model.structure
    if structure.off_support_mass(z) > domain_tol:
        raise ValueError("z lies outside the span of the groups")
    mags = structure.group_norms(z)
    keep = top_groups(mags, model.k)
    x = -structure.restrict(z, keep)
    rest = x + z
    rho = quasi_orthogonality(x, z)
    sigma = ksupport_from_magnitudes(structure.group_norms(rest), model.k)
    alpha = sigma * sigma / float(x @ x)
    return DecompositionPoint(x=x, z=z, rho=rho, alpha=alpha)


def optimal_rank_decomposition(z, r):
    """Decomposition x = -(rank-r truncation of z) for matrix inputs."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError("z must be a matrix")
    if np.linalg.norm(z) == 0.0:
        raise ValueError("z must be nonzero")
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    s_top = s.copy()
    s_top[r:] = 0.0
    zr = u @ np.diag(s_top) @ vt
    x = -zr
    rest = z - zr
    rho = quasi_orthogonality(x.reshape(-1), z.reshape(-1))
    sigma = ksupport_from_magnitudes(s[r:], r)
    alpha = sigma * sigma / float(np.sum(zr * zr))
    return DecompositionPoint(x=x, z=z, rho=rho, alpha=alpha)


# ---------------------------------------------------------------------------
# Monte-Carlo diagnostics


def pointwise_delta_for_model(model, rho, alpha):
    """Dispatch the pointwise constant on the model's homogeneity."""
    if model.is_uos:
        return delta_uos_from_constants(rho, alpha)
    return delta_cone_sharp_from_constants(rho, alpha)


def empirical_delta_samples(model, f, n_samples, strategy, seed=0):
    """Yield (rho, alpha, delta) for sampled descent vectors of f.

    Each delta lower-bounds the sup over decompositions for its descent
    vector, so a minimum over samples is a certified lower bound only for
    the sampled inf.  The descent sampler is witness-based and need not be
    representative of the whole descent set.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if strategy not in ("optimal_group", "optimal_rank", "search"):
        raise ValueError(f"unknown strategy {strategy!r}")
    for i in range(n_samples):
        x0, z = sample_descent(model, f, seed + i)
        point = _decompose(model, f, x0, z, strategy)
        yield point.rho, point.alpha, pointwise_delta_for_model(
            model, point.rho, point.alpha
        )


def empirical_delta(model, f, n_samples, strategy="optimal_group", seed=0):
    values = [
        d for _, _, d in empirical_delta_samples(model, f, n_samples, strategy, seed)
    ]
    return DeltaBound(
        value=float(min(values)),
        kind="empirical",
        model=model.family,
        regularizer=type(f).__name__.lower(),
        note=(
            f"strategy={strategy}, n_samples={n_samples}; minimum of pointwise "
            "lower bounds over witness-sampled descent vectors"
        ),
    )


def _decompose(model, f, x0, z, strategy):
    if strategy == "optimal_group":
        if isinstance(model, GroupSparse):
            return optimal_group_decomposition(z, model)
        if isinstance(model, BlockSparse):
            return _blockwise_decomposition(z, model)
        raise models.UnsupportedModelError("optimal_group needs a group/block model")
    if strategy == "optimal_rank":
        if not isinstance(model, LowRank):
            raise models.UnsupportedModelError("optimal_rank needs a low-rank model")
        return optimal_rank_decomposition(model.as_matrix(z), model.r)
    return _search_decomposition(model, f, x0, z)


def _blockwise_decomposition(z, model):
    z = np.asarray(z, dtype=float).reshape(-1)
    x = np.zeros_like(z)
    for b in model.structure.blocks:
        keep = top_groups(b.structure.group_norms(z), b.k)
        x -= b.structure.restrict(z, keep)
    if np.linalg.norm(x) == 0.0:
        # z vanished on every block's top groups: fall back to -z itself
        x = -z
    rho = quasi_orthogonality(x, z)
    alpha = quasi_descent(model, x, z)
    return DecompositionPoint(x=x, z=z, rho=rho, alpha=alpha)


def _search_decomposition(model, f, x0, z, iterations=200, step=1e-2):
    """Projected gradient ascent on x -> pointwise delta, warm-started.

    Best-found only; this is a heuristic for the sup over decompositions
    and is labeled as such in reports.
    """
    try:
        if isinstance(model, GroupSparse):
            warm = optimal_group_decomposition(z, model)
        elif isinstance(model, BlockSparse):
            warm = _blockwise_decomposition(z, model)
        elif isinstance(model, LowRank):
            warm = optimal_rank_decomposition(model.as_matrix(z), model.r)
        else:
            raise models.UnsupportedModelError("no analytic warm start")
        x = np.asarray(warm.x, dtype=float).reshape(-1).copy()
    except (models.UnsupportedModelError, ValueError):
        x = np.asarray(x0, dtype=float).reshape(-1).copy()

    def value(v):
        if np.linalg.norm(v) < 1e-12:
            return -math.inf
        try:
            rho = quasi_orthogonality(v, z)
            alpha = quasi_descent(model, v, z)
            return pointwise_delta_for_model(model, rho, alpha)
        except (InadmissibleDecompositionError, ValueError):
            return -math.inf

    best_x, best_val = x.copy(), value(x)
    cur = x
    for _ in range(iterations):
        h = 1e-6 * max(1.0, float(np.linalg.norm(cur)))
        grad = np.zeros_like(cur)
        base = value(cur)
        if not np.isfinite(base):
            break
        for i in range(cur.size):
            probe = cur.copy()
            probe[i] += h
            val = value(probe)
            grad[i] = (val - base) / h if np.isfinite(val) else 0.0
        gn = np.linalg.norm(grad)
        if gn == 0.0:
            break
        try:
            cur = project(model, cur + step * float(np.linalg.norm(cur)) * grad / gn)
        except models.UnsupportedModelError:
            break  # no projection for this family: keep the warm start
        val = value(cur)
        if val > best_val:
            best_val, best_x = val, cur.copy()
    rho = quasi_orthogonality(best_x, z)
    alpha = quasi_descent(model, best_x, z)
    return DecompositionPoint(x=best_x, z=z, rho=rho, alpha=alpha)


# ---------------------------------------------------------------------------
# instance optimality


def instance_optimality_bound(c, M, x0, model, eta=0.0, epsilon=0.0):
    """Upper bound C (eta + eps) + |x0 - P(x0)|_M on the decoder error.

    |u|_M = C |M u| + |u| is evaluated at the Euclidean projection witness,
    an upper bound on the distance-to-model infimum.
    """
    if c <= 0:
        raise ValueError("stability constant must be positive")
    mat = getattr(M, "matrix", M)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    residual = x0 - project(model, x0)
    return (
        c * (eta + epsilon)
        + c * float(np.linalg.norm(mat @ residual))
        + float(np.linalg.norm(residual))
    )
