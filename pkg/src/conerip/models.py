"""Low-dimensional model sets: membership, projection and sampling.

A model set is a subset of R^n encoding signal structure (group-sparse
supports, bounded rank, finite atom families, ...).  All model objects are
immutable after construction and every sampling routine is a pure function
of an explicit integer seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Union

import numpy as np

DEFAULT_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Vector length does not match the model's ambient dimension."""


class UnsupportedModelError(ValueError):
    """Requested operation is not defined for this model family."""


class DescentSamplingError(RuntimeError):
    """No descent pair could be produced for the given regularizer."""


# ---------------------------------------------------------------------------
# group / block bookkeeping


@dataclass(frozen=True)
class GroupStructure:
    """Pairwise disjoint, non-empty index groups inside an n-dim ambient space."""

    groups: tuple
    ambient_dim: int

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seen = set()
        for g in groups:
            if not g:
                raise ValueError("empty group")
            for i in g:
                if i < 0 or i >= self.ambient_dim:
                    raise ValueError(f"group index {i} outside ambient dimension")
                if i in seen:
                    raise ValueError(f"index {i} appears in two groups")
                seen.add(i)

    @property
    def num_groups(self):
        return len(self.groups)

    def covered_indices(self):
        return np.array(sorted(i for g in self.groups for i in g), dtype=int)

    def group_norms(self, x):
        """Euclidean norm of each group restriction x_g."""
        x = np.asarray(x, dtype=float)
        return np.array([np.linalg.norm(x[list(g)]) for g in self.groups])

    def restrict(self, x, group_ids):
        """x_H: keep the coordinates of the listed groups, zero elsewhere."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j in group_ids:
            idx = list(self.groups[j])
            out[idx] = x[idx]
        return out

    def support(self, x, tol=DEFAULT_TOL):
        """Minimal group support H with x_H = x (up to tol per group norm)."""
        return tuple(j for j, v in enumerate(self.group_norms(x)) if v > tol)

    def off_support_mass(self, x):
        """Euclidean norm of the part of x outside all groups."""
        x = np.asarray(x, dtype=float)
        covered = self.covered_indices()
        if covered.size == x.size:
            return 0.0
        mask = np.ones(x.size, dtype=bool)
        mask[covered] = False
        return float(np.linalg.norm(x[mask]))


def trivial_groups(n):
    """One singleton group per coordinate (plain sparsity)."""
    return GroupStructure(tuple((i,) for i in range(n)), n)


def top_groups(norms, k):
    """Indices of the k largest entries; ties resolved to the lowest index."""
    order = np.argsort(-np.asarray(norms), kind="stable")
    return tuple(sorted(int(j) for j in order[:k]))


@dataclass(frozen=True)
class Block:
    structure: GroupStructure
    k: int
    weight: float = 1.0

    def __post_init__(self):
        if not 1 <= self.k <= self.structure.num_groups:
            raise ValueError("block sparsity k must lie in [1, num_groups]")
        if self.weight <= 0:
            raise ValueError("block weight must be positive")


@dataclass(frozen=True)
class BlockStructure:
    """Blocks with disjoint index ranges, each carrying its own group model."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("need at least one block")
        n = blocks[0].structure.ambient_dim
        seen = set()
        for b in blocks:
            if b.structure.ambient_dim != n:
                raise ValueError("all blocks must share the ambient dimension")
            idx = set(int(i) for i in b.structure.covered_indices())
            if idx & seen:
                raise ValueError("blocks overlap")
            seen |= idx

    @property
    def ambient_dim(self):
        return self.blocks[0].structure.ambient_dim

    @property
    def num_blocks(self):
        return len(self.blocks)


# ---------------------------------------------------------------------------
# model families


@dataclass(frozen=True)
class GroupSparse:
    """Vectors supported on at most k groups."""

    structure: GroupStructure
    k: int
    family = "group_sparse"
    is_uos = True

    def __post_init__(self):
        if not 1 <= self.k <= self.structure.num_groups:
            raise ValueError("k must lie in [1, num_groups]")

    @property
    def ambient_dim(self):
        return self.structure.ambient_dim


@dataclass(frozen=True)
class BlockSparse:
    """Cartesian product of per-block group-sparse models."""

    structure: BlockStructure
    family = "block_sparse"
    is_uos = True

    @property
    def ambient_dim(self):
        return self.structure.ambient_dim


@dataclass(frozen=True)
class LowRank:
    """rows x cols matrices of rank at most r, stored as flat vectors."""

    rows: int
    cols: int
    r: int
    family = "low_rank"
    is_uos = True

    def __post_init__(self):
        if not 1 <= self.r <= min(self.rows, self.cols):
            raise ValueError("rank bound must lie in [1, min(rows, cols)]")

    @property
    def ambient_dim(self):
        return self.rows * self.cols

    def as_matrix(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if x.shape != (self.rows, self.cols):
                raise DimensionMismatchError("matrix shape mismatch")
            return x
        if x.size != self.ambient_dim:
            raise DimensionMismatchError("flat vector length mismatch")
        return x.reshape(self.rows, self.cols)


@dataclass(frozen=True, eq=False)
class HalfLines:
    """Finite union of half-lines R+ * a_i spanned by unit atoms."""

    atoms: np.ndarray
    family = "half_lines"
    is_uos = False

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        object.__setattr__(self, "atoms", atoms)
        norms = np.linalg.norm(atoms, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("half-line atoms must be unit norm (tol 1e-12)")

    @property
    def ambient_dim(self):
        return self.atoms.shape[1]

    def symmetric(self, tol=1e-12):
        """True when the atom set is closed under sign flip (union of lines)."""
        for a in self.atoms:
            dots = self.atoms @ a
            if not np.any(np.abs(dots + 1.0) <= tol):
                return False
        return True


@dataclass(frozen=True, eq=False)
class PointCloudCone:
    """Cone R+ * {p_1, ..., p_r} generated by a finite point cloud."""

    points: np.ndarray
    family = "point_cloud_cone"
    is_uos = False

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", points)
        if np.any(np.linalg.norm(points, axis=1) == 0.0):
            raise ValueError("zero point does not span a half-line")

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    def unit_atoms(self):
        return self.points / np.linalg.norm(self.points, axis=1, keepdims=True)


@dataclass(frozen=True)
class PermutationCone:
    """Non-negative multiples of n x n permutation matrices (flat vectors)."""

    n: int
    family = "permutation_cone"
    is_uos = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def ambient_dim(self):
        return self.n * self.n

    def permutation_matrices(self):
        """All n! permutation matrices, in lexicographic order of the permutation."""
        eye = np.eye(self.n)
        return [eye[list(p)] for p in itertools.permutations(range(self.n))]


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace given by an orthonormal basis (rows)."""

    basis: np.ndarray
    family = "subspace"
    is_uos = True

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        object.__setattr__(self, "basis", basis)
        gram = basis @ basis.T
        if np.max(np.abs(gram - np.eye(basis.shape[0]))) > 1e-12:
            raise ValueError("basis rows must be orthonormal (tol 1e-12)")

    @property
    def ambient_dim(self):
        return self.basis.shape[1]

    def project_onto(self, x):
        return self.basis.T @ (self.basis @ np.asarray(x, dtype=float))


ModelSet = Union[
    GroupSparse, BlockSparse, LowRank, HalfLines, PointCloudCone, PermutationCone, Subspace
]


@dataclass(frozen=True, eq=False)
class SecantSample:
    """A difference x - x' of two model points, optionally unit-normalized."""

    difference: np.ndarray
    normalized: bool

    def __post_init__(self):
        diff = np.asarray(self.difference, dtype=float)
        object.__setattr__(self, "difference", diff)
        if self.normalized and abs(np.linalg.norm(diff) - 1.0) > 1e-10:
            raise ValueError("normalized secant must have unit norm (tol 1e-10)")


# ---------------------------------------------------------------------------
# membership


def _check_dim(model, x):
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if flat.size != model.ambient_dim:
        raise DimensionMismatchError(
            f"vector of size {flat.size} vs ambient dimension {model.ambient_dim}"
        )
    return flat


def contains(model, x, tol=DEFAULT_TOL):
    """Structural membership test: is x within tol of the model set?"""
    x = _check_dim(model, x)
    if isinstance(model, GroupSparse):
        if model.structure.off_support_mass(x) > tol:
            return False
        return len(model.structure.support(x, tol)) <= model.k
    if isinstance(model, BlockSparse):
        covered = np.concatenate(
            [b.structure.covered_indices() for b in model.structure.blocks]
        )
        mask = np.ones(x.size, dtype=bool)
        mask[covered] = False
        if np.linalg.norm(x[mask]) > tol:
            return False
        return all(
            len(b.structure.support(x, tol)) <= b.k for b in model.structure.blocks
        )
    if isinstance(model, LowRank):
        sv = np.linalg.svd(model.as_matrix(x), compute_uv=False)
        return bool(np.all(sv[model.r:] <= tol)) if sv.size > model.r else True
    if isinstance(model, HalfLines):
        dots = model.atoms @ x
        dists = [
            np.linalg.norm(x - max(t, 0.0) * a) for t, a in zip(dots, model.atoms)
        ]
        return min(dists) <= tol
    if isinstance(model, PointCloudCone):
        atoms = model.unit_atoms()
        dots = atoms @ x
        dists = [np.linalg.norm(x - max(t, 0.0) * a) for t, a in zip(dots, atoms)]
        return min(dists) <= tol
    if isinstance(model, PermutationCone):
        mat = x.reshape(model.n, model.n)
        scale = float(np.max(np.abs(mat)))
        if scale <= tol:
            return True
        pattern = np.abs(mat) > tol
        if not (
            np.all(pattern.sum(axis=0) == 1) and np.all(pattern.sum(axis=1) == 1)
        ):
            return False
        vals = mat[pattern]
        return bool(np.all(vals > -tol) and np.max(np.abs(vals - scale)) <= tol)
    if isinstance(model, Subspace):
        return np.linalg.norm(x - model.project_onto(x)) <= tol
    raise UnsupportedModelError(f"unknown model {model!r}")


# ---------------------------------------------------------------------------
# projection


def project(model, x):
    """Euclidean-nearest model point (group/block/low-rank/subspace only).

    Ties between groups of equal norm are broken toward the lowest group
    index so repeated runs are reproducible.
    """
    x = _check_dim(model, x)
    if isinstance(model, GroupSparse):
        keep = top_groups(model.structure.group_norms(x), model.k)
        return model.structure.restrict(x, keep)
    if isinstance(model, BlockSparse):
        out = np.zeros_like(x)
        for b in model.structure.blocks:
            keep = top_groups(b.structure.group_norms(x), b.k)
            out += b.structure.restrict(x, keep)
        return out
    if isinstance(model, LowRank):
        mat = model.as_matrix(x)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        s[model.r:] = 0.0
        return (u @ np.diag(s) @ vt).reshape(-1)
    if isinstance(model, Subspace):
        return model.project_onto(x)
    raise UnsupportedModelError(f"projection not defined for {model.family}")


# ---------------------------------------------------------------------------
# sampling


def sample_model(model, rng_seed):
    """Draw a random element of the model set (deterministic in the seed)."""
    rng = np.random.default_rng(rng_seed)
    return _sample_model(model, rng)


def _sample_model(model, rng):
    if isinstance(model, GroupSparse):
        ids = rng.choice(model.structure.num_groups, size=model.k, replace=False)
        x = np.zeros(model.ambient_dim)
        for j in ids:
            idx = list(model.structure.groups[j])
            x[idx] = rng.standard_normal(len(idx))
        return x
    if isinstance(model, BlockSparse):
        x = np.zeros(model.ambient_dim)
        for b in model.structure.blocks:
            ids = rng.choice(b.structure.num_groups, size=b.k, replace=False)
            for j in ids:
                idx = list(b.structure.groups[j])
                x[idx] = rng.standard_normal(len(idx))
        return x
    if isinstance(model, LowRank):
        left = rng.standard_normal((model.rows, model.r))
        right = rng.standard_normal((model.cols, model.r))
        return (left @ right.T).reshape(-1)
    if isinstance(model, HalfLines):
        a = model.atoms[rng.integers(model.atoms.shape[0])]
        return abs(rng.standard_normal()) * a
    if isinstance(model, PointCloudCone):
        p = model.points[rng.integers(model.points.shape[0])]
        return abs(rng.standard_normal()) * p
    if isinstance(model, PermutationCone):
        perm = rng.permutation(model.n)
        mat = np.eye(model.n)[perm]
        return abs(rng.standard_normal()) * mat.reshape(-1)
    if isinstance(model, Subspace):
        coef = rng.standard_normal(model.basis.shape[0])
        return model.basis.T @ coef
    raise UnsupportedModelError(f"unknown model {model!r}")


def sample_secant(model, rng_seed, normalized=True):
    """Draw x - x' for independent model points; re-draw if the difference is 0."""
    rng = np.random.default_rng(rng_seed)
    for _ in range(100):
        diff = _sample_model(model, rng) - _sample_model(model, rng)
        nrm = np.linalg.norm(diff)
        if nrm > 1e-14:
            if normalized:
                diff = diff / nrm
            return SecantSample(difference=diff, normalized=normalized)
    raise RuntimeError("secant sampling kept producing zero differences")


def sample_descent(model, f, rng_seed, max_tries=50):
    """Produce (x0, z) with x0 in the model and f(x0 + z) <= f(x0).

    The witness is constructive: draw a second model point x', shrink it so
    that f(x') <= f(x0) (gauges are positively homogeneous), and set
    z = x' - x0.  A common random rescaling of the pair is applied so the
    sampled descent vectors cover several magnitudes.
    """
    from . import norms  # runtime import; norms depends on this module

    rng = np.random.default_rng(rng_seed)
    for _ in range(max_tries):
        x0 = _sample_model(model, rng)
        f0 = norms.eval(f, x0)
        if np.linalg.norm(x0) < 1e-12 or not np.isfinite(f0) or f0 <= 0:
            continue
        xp = _sample_model(model, rng)
        f1 = norms.eval(f, xp)
        if not np.isfinite(f1):
            continue
        if f1 > 0:
            xp = xp * (f0 / f1) * rng.uniform()
        scale = float(np.exp(rng.normal()))
        x0, xp = scale * x0, scale * xp
        z = xp - x0
        if norms.eval(f, x0 + z) <= norms.eval(f, x0) + 1e-12:
            return x0, z
    raise DescentSamplingError(
        f"no descent pair for {type(f).__name__} after {max_tries} tries"
    )
