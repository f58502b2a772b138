"""Regularizer evaluation: gauges, duals, proximal maps and atom oracles.

Every regularizer here is a gauge (positively homogeneous, sublinear).
Evaluation returns ``math.inf`` outside the gauge's domain; the infinity is
a value, not an error.  Domain membership is decided with a tolerance
(default 1e-9) because floating-point membership is never exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import (
    BlockSparse,
    BlockStructure,
    GroupSparse,
    GroupStructure,
    HalfLines,
    LowRank,
    PermutationCone,
    PointCloudCone,
    Subspace,
    top_groups,
)

DOMAIN_TOL = 1e-9


class UnsupportedRegularizerError(ValueError):
    """The requested operation has no implementation for this regularizer."""


# ---------------------------------------------------------------------------
# regularizer families


@dataclass(frozen=True)
class GroupNorm:
    """Sum of per-group Euclidean norms (mixed l1-l2 norm)."""

    structure: GroupStructure

    @property
    def ambient_dim(self):
        return self.structure.ambient_dim


@dataclass(frozen=True)
class WeightedBlockNorm:
    """Per-block weighted sum of group norms: sum_j w_j * sum_{g in G_j} |x_g|."""

    structure: BlockStructure

    @property
    def ambient_dim(self):
        return self.structure.ambient_dim


@dataclass(frozen=True)
class NuclearNorm:
    rows: int
    cols: int

    @property
    def ambient_dim(self):
        return self.rows * self.cols

    def as_matrix(self, x):
        x = np.asarray(x, dtype=float)
        return x if x.ndim == 2 else x.reshape(self.rows, self.cols)


@dataclass(frozen=True)
class ModelAtomicNorm:
    """Gauge of the convex hull of the model's unit-sphere intersection.

    For group-sparse models this is the group-level k-support norm; for
    bounded-rank models its spectral analogue; for finite atom families the
    polytope gauge.  Permutation-cone atoms are internally normalized to
    unit Frobenius norm (P / sqrt(n)) so the gauge dominates the Euclidean
    norm and matches it on the model; the plain row-sum gauge is exposed
    separately as :class:`BirkhoffGauge`.
    """

    model: object

    @property
    def ambient_dim(self):
        return self.model.ambient_dim


@dataclass(frozen=True)
class BirkhoffGauge:
    """Row-sum gauge of the cone of scaled bi-stochastic matrices."""

    n: int

    @property
    def ambient_dim(self):
        return self.n * self.n


@dataclass(frozen=True, eq=False)
class SubspaceIndicator:
    """0 on the subspace, +inf off it."""

    basis: np.ndarray

    def __post_init__(self):
        sub = Subspace(self.basis)  # validates orthonormality
        object.__setattr__(self, "basis", sub.basis)

    @property
    def ambient_dim(self):
        return self.basis.shape[1]

    def project_onto(self, x):
        return self.basis.T @ (self.basis @ np.asarray(x, dtype=float))


@dataclass(frozen=True)
class L1:
    n: int

    @property
    def ambient_dim(self):
        return self.n


@dataclass(frozen=True, eq=False)
class AtomicDecomposition:
    """Convex combination x = sum_i lambda_i * u_i with u_i in the atom cone.

    ``objective`` is sqrt(sum_i lambda_i |u_i|^2), the quantity whose infimum
    over decompositions equals the atomic norm when the hull is closed.
    """

    weights: np.ndarray
    atoms: np.ndarray
    objective: float

    def reconstruction(self):
        return np.asarray(self.weights) @ np.asarray(self.atoms)


# ---------------------------------------------------------------------------
# scalar helpers


def ksupport_from_magnitudes(values, k):
    """k-support norm of a non-negative magnitude vector.

    Uses the sorted-magnitude closed form: with b_1 >= ... >= b_d and r the
    unique integer in {0, ..., k-1} such that
    b_{k-r-1} > (sum_{i=k-r}^d b_i) / (r+1) >= b_{k-r}   (b_0 = +inf),
    the norm is sqrt(sum_{i<k-r} b_i^2 + (sum_{i=k-r}^d b_i)^2 / (r+1)).
    """
    b = np.sort(np.asarray(values, dtype=float))[::-1]
    d = b.size
    if d == 0:
        return 0.0
    if k >= d:
        return float(np.linalg.norm(b))
    total = float(b.sum())
    if total == 0.0:
        return 0.0
    best = None
    for r in range(k):
        head = b[k - r - 2] if k - r - 2 >= 0 else math.inf
        tail = float(b[k - r - 1:].sum())
        mean = tail / (r + 1)
        if head >= mean - 1e-15 * total and mean >= b[k - r - 1] - 1e-15 * total:
            return float(math.sqrt(float((b[: k - r - 1] ** 2).sum()) + tail * mean))
        value = math.sqrt(float((b[: k - r - 1] ** 2).sum()) + tail * mean)
        best = value if best is None else min(best, value)
    return float(best)


def ksupport_dual_from_magnitudes(values, k):
    """Dual of the k-support norm: Euclidean norm of the k largest magnitudes."""
    b = np.sort(np.asarray(values, dtype=float))[::-1]
    return float(np.linalg.norm(b[:k]))


def scaled_bistochastic_gauge(x, n, tol=DOMAIN_TOL):
    """Common row/column sum t when x = t * (bi-stochastic matrix), else +inf."""
    mat = np.asarray(x, dtype=float).reshape(n, n)
    row = mat.sum(axis=1)
    col = mat.sum(axis=0)
    t = float(row.mean())
    scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
    resid = max(
        float(np.max(np.abs(row - t))),
        float(np.max(np.abs(col - t))),
        max(0.0, -float(mat.min(initial=0.0))),
        max(0.0, -t),
    )
    if resid > tol * scale:
        return math.inf
    return max(t, 0.0)


def cone_gauge(atoms, x, tol=DOMAIN_TOL):
    """Gauge of the cone spanned by unit atoms: min sum(c), c >= 0, sum c_i a_i = x.

    Membership within tol is decided by non-negative least squares; the
    gauge itself is the linear program over the (projected) member.
    """
    from scipy.optimize import linprog, nnls

    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.linalg.norm(x) == 0.0:
        return 0.0
    mat = atoms.T
    coef, resid = nnls(mat, x)
    if resid > tol * max(1.0, np.linalg.norm(x)):
        return math.inf
    target = x if resid <= 1e-13 else mat @ coef
    res = linprog(
        np.ones(atoms.shape[0]),
        A_eq=mat,
        b_eq=target,
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        return float(coef.sum())
    return float(res.fun)


def _group_magnitudes_and_offmass(structure, x):
    return structure.group_norms(x), structure.off_support_mass(x)


# ---------------------------------------------------------------------------
# evaluation


def eval(f, x, domain_tol=DOMAIN_TOL):
    """Value of the regularizer at x (math.inf off the domain)."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if flat.size != f.ambient_dim:
        raise ValueError(
            f"vector of size {flat.size} vs regularizer dimension {f.ambient_dim}"
        )
    if isinstance(f, GroupNorm):
        mags, off = _group_magnitudes_and_offmass(f.structure, flat)
        if off > domain_tol:
            return math.inf
        return float(mags.sum())
    if isinstance(f, WeightedBlockNorm):
        total = 0.0
        covered = 0
        for b in f.structure.blocks:
            total += b.weight * float(b.structure.group_norms(flat).sum())
            covered += b.structure.covered_indices().size
        if covered < flat.size:
            mask = np.ones(flat.size, dtype=bool)
            for b in f.structure.blocks:
                mask[b.structure.covered_indices()] = False
            if np.linalg.norm(flat[mask]) > domain_tol:
                return math.inf
        return total
    if isinstance(f, NuclearNorm):
        return float(np.linalg.svd(f.as_matrix(x), compute_uv=False).sum())
    if isinstance(f, BirkhoffGauge):
        return scaled_bistochastic_gauge(flat, f.n, domain_tol)
    if isinstance(f, SubspaceIndicator):
        if np.linalg.norm(flat - f.project_onto(flat)) > domain_tol:
            return math.inf
        return 0.0
    if isinstance(f, L1):
        return float(np.abs(flat).sum())
    if isinstance(f, ModelAtomicNorm):
        return _eval_model_atomic(f.model, flat, domain_tol)
    raise UnsupportedRegularizerError(f"unknown regularizer {f!r}")


def _eval_model_atomic(model, flat, domain_tol):
    if isinstance(model, GroupSparse):
        mags, off = _group_magnitudes_and_offmass(model.structure, flat)
        if off > domain_tol:
            return math.inf
        return ksupport_from_magnitudes(mags, model.k)
    if isinstance(model, BlockSparse):
        total = 0.0
        mask = np.ones(flat.size, dtype=bool)
        for b in model.structure.blocks:
            mags = b.structure.group_norms(flat)
            total += ksupport_from_magnitudes(mags, b.k) ** 2
            mask[b.structure.covered_indices()] = False
        if np.linalg.norm(flat[mask]) > domain_tol:
            return math.inf
        return float(math.sqrt(total))
    if isinstance(model, LowRank):
        sv = np.linalg.svd(model.as_matrix(flat), compute_uv=False)
        return ksupport_from_magnitudes(sv, model.r)
    if isinstance(model, HalfLines):
        return cone_gauge(model.atoms, flat, domain_tol)
    if isinstance(model, PointCloudCone):
        return cone_gauge(model.unit_atoms(), flat, domain_tol)
    if isinstance(model, PermutationCone):
        t = scaled_bistochastic_gauge(flat, model.n, domain_tol)
        return t * math.sqrt(model.n) if np.isfinite(t) else math.inf
    if isinstance(model, Subspace):
        if np.linalg.norm(flat - model.project_onto(flat)) > domain_tol:
            return math.inf
        return float(np.linalg.norm(flat))
    raise UnsupportedRegularizerError(f"no atomic norm for model {model!r}")


# ---------------------------------------------------------------------------
# duals


def dual_eval(f, x):
    """Dual value sup_{atoms a} |<x, a>| (norm-type regularizers only)."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if flat.size != f.ambient_dim:
        raise ValueError("dimension mismatch")
    if isinstance(f, SubspaceIndicator):
        raise UnsupportedRegularizerError("indicator has no dual norm")
    if isinstance(f, GroupNorm):
        return float(f.structure.group_norms(flat).max())
    if isinstance(f, WeightedBlockNorm):
        return max(
            float(b.structure.group_norms(flat).max()) / b.weight
            for b in f.structure.blocks
        )
    if isinstance(f, NuclearNorm):
        return float(np.linalg.svd(f.as_matrix(x), compute_uv=False).max())
    if isinstance(f, L1):
        return float(np.abs(flat).max())
    if isinstance(f, BirkhoffGauge):
        return _max_permutation_correlation(flat, f.n)
    if isinstance(f, ModelAtomicNorm):
        return _dual_model_atomic(f.model, flat)
    raise UnsupportedRegularizerError(f"unknown regularizer {f!r}")


def _dual_model_atomic(model, flat):
    if isinstance(model, GroupSparse):
        return ksupport_dual_from_magnitudes(model.structure.group_norms(flat), model.k)
    if isinstance(model, BlockSparse):
        total = sum(
            ksupport_dual_from_magnitudes(b.structure.group_norms(flat), b.k) ** 2
            for b in model.structure.blocks
        )
        return float(math.sqrt(total))
    if isinstance(model, LowRank):
        sv = np.linalg.svd(model.as_matrix(flat), compute_uv=False)
        return ksupport_dual_from_magnitudes(sv, model.r)
    if isinstance(model, HalfLines):
        return float(np.abs(model.atoms @ flat).max())
    if isinstance(model, PointCloudCone):
        return float(np.abs(model.unit_atoms() @ flat).max())
    if isinstance(model, PermutationCone):
        return _max_permutation_correlation(flat, model.n) / math.sqrt(model.n)
    if isinstance(model, Subspace):
        return float(np.linalg.norm(model.project_onto(flat)))
    raise UnsupportedRegularizerError(f"no atomic dual for model {model!r}")


def _max_permutation_correlation(flat, n):
    """max over permutation matrices P of |<x, P>| via linear assignment."""
    from scipy.optimize import linear_sum_assignment

    mat = flat.reshape(n, n)
    rows, cols = linear_sum_assignment(-mat)  # maximize <x, P>
    hi = float(mat[rows, cols].sum())
    rows, cols = linear_sum_assignment(mat)  # minimize <x, P>
    lo = float(mat[rows, cols].sum())
    return max(abs(hi), abs(lo))


# ---------------------------------------------------------------------------
# proximal maps


def _group_soft_threshold(structure, flat, thresh, out):
    for g in structure.groups:
        idx = list(g)
        nrm = np.linalg.norm(flat[idx])
        if nrm > thresh:
            out[idx] = flat[idx] * (1.0 - thresh / nrm)
    return out


def prox(f, x, step):
    """Minimizer of f(u) + |u - x|^2 / (2 step)."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if isinstance(f, GroupNorm):
        out = np.zeros_like(flat)  # off-domain coordinates must vanish
        out = _group_soft_threshold(f.structure, flat, step, out)
        return out.reshape(x.shape)
    if isinstance(f, WeightedBlockNorm):
        out = np.zeros_like(flat)
        for b in f.structure.blocks:
            _group_soft_threshold(b.structure, flat, step * b.weight, out)
        return out.reshape(x.shape)
    if isinstance(f, NuclearNorm):
        mat = f.as_matrix(x)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        s = np.maximum(s - step, 0.0)
        res = u @ np.diag(s) @ vt
        return res if x.ndim == 2 else res.reshape(-1)
    if isinstance(f, L1):
        out = np.sign(flat) * np.maximum(np.abs(flat) - step, 0.0)
        return out.reshape(x.shape)
    if isinstance(f, SubspaceIndicator):
        return f.project_onto(flat).reshape(x.shape)
    raise UnsupportedRegularizerError(
        f"no proximal map for {type(f).__name__}; use the LP or lifted solver routes"
    )


# ---------------------------------------------------------------------------
# linear minimization oracle


def lmo(f, direction):
    """argmin over unit-ball atoms a of <direction, a>."""
    d = np.asarray(direction, dtype=float)
    flat = d.reshape(-1)
    if flat.size != f.ambient_dim:
        raise ValueError("dimension mismatch")
    if isinstance(f, L1):
        i = int(np.argmax(np.abs(flat)))
        out = np.zeros_like(flat)
        out[i] = -np.sign(flat[i]) if flat[i] != 0 else 1.0
        return out.reshape(d.shape)
    if isinstance(f, GroupNorm):
        mags = f.structure.group_norms(flat)
        j = top_groups(mags, 1)[0]
        out = np.zeros_like(flat)
        idx = list(f.structure.groups[j])
        if mags[j] > 0:
            out[idx] = -flat[idx] / mags[j]
        else:
            out[idx[0]] = 1.0
        return out.reshape(d.shape)
    if isinstance(f, WeightedBlockNorm):
        best, best_val = None, -math.inf
        for b in f.structure.blocks:
            mags = b.structure.group_norms(flat)
            j = top_groups(mags, 1)[0]
            val = mags[j] / b.weight
            if val > best_val:
                best_val, best = val, (b, j, mags[j])
        b, j, nrm = best
        out = np.zeros_like(flat)
        idx = list(b.structure.groups[j])
        if nrm > 0:
            out[idx] = -flat[idx] / (b.weight * nrm)
        else:
            out[idx[0]] = 1.0 / b.weight
        return out.reshape(d.shape)
    if isinstance(f, NuclearNorm):
        mat = f.as_matrix(d)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        atom = -np.outer(u[:, 0], vt[0])
        return atom if d.ndim == 2 else atom.reshape(-1)
    if isinstance(f, BirkhoffGauge):
        atom = _assignment_atom(flat, f.n)
        return atom.reshape(d.shape)
    if isinstance(f, ModelAtomicNorm):
        return _lmo_model_atomic(f.model, flat).reshape(d.shape)
    raise UnsupportedRegularizerError(f"no explicit atom family for {type(f).__name__}")


def _assignment_atom(flat, n):
    from scipy.optimize import linear_sum_assignment

    mat = flat.reshape(n, n)
    rows, cols = linear_sum_assignment(mat)
    atom = np.zeros((n, n))
    atom[rows, cols] = 1.0
    return atom.reshape(-1)


def _lmo_model_atomic(model, flat):
    if isinstance(model, GroupSparse):
        mags = model.structure.group_norms(flat)
        keep = top_groups(mags, model.k)
        restricted = model.structure.restrict(flat, keep)
        nrm = np.linalg.norm(restricted)
        if nrm == 0:
            out = np.zeros_like(flat)
            out[list(model.structure.groups[0])[0]] = 1.0
            return out
        return -restricted / nrm
    if isinstance(model, BlockSparse):
        parts = []
        for b in model.structure.blocks:
            keep = top_groups(b.structure.group_norms(flat), b.k)
            parts.append(b.structure.restrict(flat, keep))
        stacked = np.sum(parts, axis=0)
        nrm = np.linalg.norm(stacked)
        if nrm == 0:
            out = np.zeros_like(flat)
            out[list(model.structure.blocks[0].structure.groups[0])[0]] = 1.0
            return out
        return -stacked / nrm
    if isinstance(model, LowRank):
        mat = model.as_matrix(flat)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        trunc = u[:, : model.r] @ np.diag(s[: model.r]) @ vt[: model.r]
        nrm = np.linalg.norm(trunc)
        if nrm == 0:
            atom = np.zeros_like(mat)
            atom[0, 0] = 1.0
            return atom.reshape(-1)
        return (-trunc / nrm).reshape(-1)
    if isinstance(model, HalfLines):
        scores = model.atoms @ flat
        return model.atoms[int(np.argmin(scores))].copy()
    if isinstance(model, PointCloudCone):
        atoms = model.unit_atoms()
        scores = atoms @ flat
        return atoms[int(np.argmin(scores))].copy()
    if isinstance(model, PermutationCone):
        return _assignment_atom(flat, model.n) / math.sqrt(model.n)
    if isinstance(model, Subspace):
        p = model.project_onto(flat)
        nrm = np.linalg.norm(p)
        if nrm == 0:
            return model.basis[0].copy()
        return -p / nrm
    raise UnsupportedRegularizerError(f"no atom family for model {model!r}")
