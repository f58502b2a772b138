"""Brute-force atomic decomposition oracle.

Solves the convex decomposition program behind the atomic norm directly
(enumerating supports where needed) so the closed-form evaluators in
:mod:`conerip.norms` have an independent cross-check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .models import (
    BlockSparse,
    GroupSparse,
    HalfLines,
    PointCloudCone,
    UnsupportedModelError,
)
from .norms import DOMAIN_TOL, AtomicDecomposition


class EnumerationCapError(RuntimeError):
    """The support enumeration would exceed the configured cap."""


def decomposition_oracle(model, x, support_cap=10000, domain_tol=DOMAIN_TOL):
    """Optimal convex decomposition of x over the model's scaled atoms.

    For group-sparse models the program

        minimize sqrt(sum_i lambda_i |u_i|^2)
        s.t.     sum_i lambda_i u_i = x,  lambda in the simplex,
                 u_i supported on at most k groups

    reduces, after eliminating the u_i, to a convex problem over the
    support weights; that problem is solved with cvxpy.  Finite atom
    families reduce to a linear program.  The returned objective equals
    the atomic-norm value whenever the atom hull is closed.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.ambient_dim:
        raise ValueError("dimension mismatch")
    if isinstance(model, GroupSparse):
        return _group_oracle(model, x, support_cap, domain_tol)
    if isinstance(model, BlockSparse):
        return _block_oracle(model, x, support_cap, domain_tol)
    if isinstance(model, HalfLines):
        return _finite_atom_oracle(model.atoms, x, domain_tol)
    if isinstance(model, PointCloudCone):
        return _finite_atom_oracle(model.unit_atoms(), x, domain_tol)
    raise UnsupportedModelError(
        f"decomposition oracle not available for {model.family}"
    )


def _trivial_zero(n):
    return AtomicDecomposition(
        weights=np.array([1.0]), atoms=np.zeros((1, n)), objective=0.0
    )


def _group_oracle(model, x, support_cap, domain_tol):
    import cvxpy as cp

    structure = model.structure
    if structure.off_support_mass(x) > domain_tol:
        raise ValueError("x lies outside the span of the groups (norm is +inf)")
    if np.linalg.norm(x) == 0.0:
        return _trivial_zero(x.size)

    num = structure.num_groups
    if math.comb(num, model.k) > support_cap:
        raise EnumerationCapError(
            f"{math.comb(num, model.k)} supports exceed cap {support_cap}"
        )
    supports = list(itertools.combinations(range(num), model.k))
    mags = structure.group_norms(x)
    active = [g for g in range(num) if mags[g] > 0]

    lam = cp.Variable(len(supports), nonneg=True)
    incidence = np.zeros((num, len(supports)))
    for t, supp in enumerate(supports):
        for g in supp:
            incidence[g, t] = 1.0
    s = incidence @ lam
    objective = cp.sum([cp.quad_over_lin(mags[g], s[g]) for g in active])
    prob = cp.Problem(cp.Minimize(objective), [cp.sum(lam) == 1])
    prob.solve()
    if lam.value is None:
        raise RuntimeError(f"oracle subproblem failed: status {prob.status}")

    lam_val = np.maximum(np.asarray(lam.value, dtype=float), 0.0)
    keep = lam_val > 1e-12
    covered = set(g for t in np.nonzero(keep)[0] for g in supports[t])
    if any(g not in covered for g in active):
        keep = lam_val > 0.0  # keep near-zero weights that still carry mass
    lam_val = lam_val[keep] / lam_val[keep].sum()
    kept_supports = [supports[t] for t in range(len(supports)) if keep[t]]
    s_val = np.zeros(num)
    for w, supp in zip(lam_val, kept_supports):
        for g in supp:
            s_val[g] += w

    atoms = np.zeros((len(kept_supports), x.size))
    for row, supp in enumerate(kept_supports):
        for g in supp:
            if mags[g] > 0:
                idx = list(structure.groups[g])
                atoms[row, idx] = x[idx] / s_val[g]
    obj = math.sqrt(sum(float(lam_val[i]) * float(atoms[i] @ atoms[i])
                        for i in range(len(kept_supports))))
    return AtomicDecomposition(weights=lam_val, atoms=atoms, objective=obj)


def _block_oracle(model, x, support_cap, domain_tol):
    # Solve each block separately, then merge with the product refinement:
    # weights multiply, atoms concatenate (supports are disjoint).
    parts = []
    for b in model.structure.blocks:
        sub = GroupSparse(b.structure, b.k)
        xb = b.structure.restrict(x, range(b.structure.num_groups))
        parts.append(_group_oracle(sub, xb, support_cap, domain_tol))
    rest = np.asarray(x, dtype=float).copy()
    for b in model.structure.blocks:
        rest[b.structure.covered_indices()] = 0.0
    if np.linalg.norm(rest) > domain_tol:
        raise ValueError("x lies outside the block spans (norm is +inf)")

    combos = 1
    for p in parts:
        combos *= len(p.weights)
    if combos > support_cap:
        raise EnumerationCapError(f"{combos} combined atoms exceed cap {support_cap}")

    weights = np.array([1.0])
    atoms = np.zeros((1, x.size))
    for p in parts:
        new_w = np.outer(weights, p.weights).reshape(-1)
        new_atoms = (atoms[:, None, :] + p.atoms[None, :, :]).reshape(-1, x.size)
        weights, atoms = new_w, new_atoms
    obj = math.sqrt(sum(float(w) * float(a @ a) for w, a in zip(weights, atoms)))
    return AtomicDecomposition(weights=weights, atoms=atoms, objective=obj)


def _finite_atom_oracle(unit_atoms, x, domain_tol):
    from scipy.optimize import linprog, nnls

    unit_atoms = np.atleast_2d(np.asarray(unit_atoms, dtype=float))
    if np.linalg.norm(x) == 0.0:
        return _trivial_zero(x.size)
    mat = unit_atoms.T
    coef, resid = nnls(mat, x)
    if resid > domain_tol * max(1.0, np.linalg.norm(x)):
        raise ValueError("x lies outside the atom cone (norm is +inf)")
    target = x if resid <= 1e-13 else mat @ coef
    res = linprog(
        np.ones(unit_atoms.shape[0]),
        A_eq=mat,
        b_eq=target,
        bounds=(0, None),
        method="highs",
    )
    c = np.asarray(res.x if res.success else coef, dtype=float)
    c = np.maximum(c, 0.0)
    total = float(c.sum())
    keep = c > 1e-14 * max(total, 1.0)
    if not np.any(keep):
        return _trivial_zero(x.size)
    lam = c[keep] / total
    atoms = total * unit_atoms[keep]
    obj = math.sqrt(sum(float(w) * float(a @ a) for w, a in zip(lam, atoms)))
    return AtomicDecomposition(weights=lam, atoms=atoms, objective=obj)
