"""Decoders: gauge minimization under exact or noise-ball data constraints.

Two geometries are supported for every regularizer with a solver route:

* equality:  argmin f(x)  s.t.  M x = y
* ball:      argmin f(x)  s.t.  |M x - y| <= eps

Routing: prox-capable regularizers go through primal-dual proximal
splitting; the bi-stochastic gauge goes through an exact linear program
(equality) or a splitting over atom coefficients (ball); model atomic
norms of group/block models go through an exact lifted reformulation
(one latent vector per feasible support, sum of row norms), and finite
atom families through coefficient space.  Non-convergence is an explicit
report state, never a silent wrong answer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from . import norms
from .measure import MeasurementOperator
from .models import (
    BlockSparse,
    GroupSparse,
    HalfLines,
    PermutationCone,
    PointCloudCone,
    Subspace,
)
from .norms import (
    BirkhoffGauge,
    GroupNorm,
    L1,
    ModelAtomicNorm,
    NuclearNorm,
    SubspaceIndicator,
    UnsupportedRegularizerError,
    WeightedBlockNorm,
)


class InfeasibleMeasurementsError(ValueError):
    """The data vector is not reachable by the constraint set."""


class TrivialKernelError(ValueError):
    """The operator has no nonzero null vector."""


@dataclass(frozen=True)
class SolveConfig:
    max_iterations: int = 20000
    tolerance: float = 1e-9  # primal-dual residual tolerance
    step_scale: float = 0.99  # tau * sigma * |M|^2 = step_scale^2
    power_iterations: int = 100
    support_cap: int = 2000
    algorithm: str = "auto"

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance must be positive, max_iterations >= 1")


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    solution: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    algorithm: str


def _as_matrix(M):
    return M.matrix if isinstance(M, MeasurementOperator) else np.atleast_2d(
        np.asarray(M, dtype=float)
    )


def operator_norm(apply_a, apply_at, shape, iterations=100, seed=0):
    """Largest singular value by power iteration on A^T A."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= max(np.linalg.norm(v), 1e-30)
    lam = 1.0
    for _ in range(iterations):
        w = apply_at(apply_a(v))
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 1e-15
        v = w / lam
    return math.sqrt(lam)


def _chambolle_pock(apply_a, apply_at, x_shape, m, prox_f, dual_update, config,
                    violation=None):
    """Primal-dual hybrid-gradient iteration.

    Stops once the primal-dual residuals fall below the tolerance and the
    constraint violation (when given) does too, so a converged report
    always satisfies its feasibility contract.
    """
    lip = operator_norm(
        apply_a, apply_at, x_shape, iterations=config.power_iterations
    )
    tau = sigma = config.step_scale / max(lip, 1e-15)
    x = np.zeros(x_shape)
    u = np.zeros(m)
    it = 0
    converged = False
    for it in range(1, config.max_iterations + 1):
        x_new = prox_f(x - tau * apply_at(u), tau)
        u_new = dual_update(u + sigma * apply_a(2.0 * x_new - x), sigma)
        p_res = np.linalg.norm((x - x_new) / tau - apply_at(u - u_new))
        d_res = np.linalg.norm((u - u_new) / sigma - apply_a(x - x_new))
        x, u = x_new, u_new
        scale = max(1.0, float(np.linalg.norm(x)), float(np.linalg.norm(u)))
        if max(p_res, d_res) <= config.tolerance * scale:
            if violation is None or violation(x) <= 0.0:
                converged = True
                break
    return x, it, converged


def _equality_dual(y):
    def update(v, sigma):
        return v - sigma * y

    return update


def _ball_dual(y, eps):
    def update(v, sigma):
        w = v / sigma
        diff = w - y
        nrm = np.linalg.norm(diff)
        proj = y + diff * min(1.0, eps / nrm) if nrm > 0 else y.copy()
        return v - sigma * proj

    return update


# ---------------------------------------------------------------------------
# routes


_PROX_CAPABLE = (GroupNorm, WeightedBlockNorm, NuclearNorm, L1, SubspaceIndicator)


def _route(f, mode):
    if isinstance(f, _PROX_CAPABLE):
        return "proximal_splitting"
    if isinstance(f, BirkhoffGauge):
        return "linear_program" if mode == "equality" else "coefficient_splitting"
    if isinstance(f, ModelAtomicNorm):
        model = f.model
        if isinstance(model, (GroupSparse, BlockSparse)):
            return "lifted_splitting"
        if isinstance(model, (HalfLines, PointCloudCone, PermutationCone)):
            return "linear_program" if mode == "equality" else "coefficient_splitting"
        if isinstance(model, Subspace):
            return "proximal_splitting"
    raise UnsupportedRegularizerError(
        f"no solver route for {type(f).__name__}"
        + (
            f" over {type(f.model).__name__}"
            if isinstance(f, ModelAtomicNorm)
            else ""
        )
    )


def _prox_callable(f):
    if isinstance(f, ModelAtomicNorm) and isinstance(f.model, Subspace):
        sub = f.model

        def prox_fn(v, tau):
            p = sub.project_onto(v)
            nrm = np.linalg.norm(p)
            if nrm <= tau:
                return np.zeros_like(v)
            return (1.0 - tau / nrm) * p

        return prox_fn
    return lambda v, tau: norms.prox(f, v, tau)


def _atom_family(f):
    """Rows are the atoms; objective of a coefficient vector c is sum(c)."""
    if isinstance(f, BirkhoffGauge):
        n = f.n
        atoms = [p.reshape(-1) for p in PermutationCone(n).permutation_matrices()]
        return np.array(atoms)
    model = f.model
    if isinstance(model, HalfLines):
        return model.atoms.copy()
    if isinstance(model, PointCloudCone):
        return model.unit_atoms()
    if isinstance(model, PermutationCone):
        mats = model.permutation_matrices()
        return np.array([p.reshape(-1) for p in mats]) / math.sqrt(model.n)
    raise UnsupportedRegularizerError("no finite atom family")


def _lifted_supports(f, cap):
    """Feasible supports and their coordinate masks for the lifted route."""
    model = f.model
    if isinstance(model, GroupSparse):
        per_block = [
            (model.structure, list(itertools.combinations(
                range(model.structure.num_groups), model.k)))
        ]
    else:
        per_block = [
            (b.structure, list(itertools.combinations(
                range(b.structure.num_groups), b.k)))
            for b in model.structure.blocks
        ]
    count = 1
    for _, combos in per_block:
        count *= len(combos)
    if count > cap:
        raise UnsupportedRegularizerError(
            f"{count} lifted supports exceed cap {cap}; raise support_cap"
        )
    n = model.ambient_dim
    masks = np.zeros((count, n), dtype=bool)
    for row, choice in enumerate(
        itertools.product(*[combos for _, combos in per_block])
    ):
        for (structure, _), supp in zip(per_block, choice):
            for g in supp:
                masks[row, list(structure.groups[g])] = True
    return masks


def _report_from_lp(res, x, objective, mat, y, algorithm):
    residual = float(np.linalg.norm(mat @ x - y))
    return RecoveryReport(
        solution=x,
        objective=float(objective),
        residual=residual,
        iterations=int(getattr(res, "nit", 0) or 0),
        converged=bool(res.success),
        algorithm=algorithm,
    )


def _birkhoff_lp(mat, y, n):
    from scipy.optimize import linprog

    nn = n * n
    rows = []
    rhs = []
    for i in range(n):
        r = np.zeros(nn + 1)
        r[i * n:(i + 1) * n] = 1.0
        r[-1] = -1.0
        rows.append(r)
        rhs.append(0.0)
    for j in range(n):
        r = np.zeros(nn + 1)
        for i in range(n):
            r[i * n + j] = 1.0
        r[-1] = -1.0
        rows.append(r)
        rhs.append(0.0)
    for k in range(mat.shape[0]):
        r = np.zeros(nn + 1)
        r[:nn] = mat[k]
        rows.append(r)
        rhs.append(y[k])
    cost = np.zeros(nn + 1)
    cost[-1] = 1.0
    res = linprog(
        cost,
        A_eq=np.array(rows),
        b_eq=np.array(rhs),
        bounds=(0, None),
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleMeasurementsError("no scaled bi-stochastic matrix fits y")
    x = res.x[:nn] if res.x is not None else np.zeros(nn)
    objective = res.fun if res.success else math.inf
    return _report_from_lp(res, x, objective, mat, y, "linear_program")


def _coefficient_lp(f, mat, y):
    from scipy.optimize import linprog

    atoms = _atom_family(f)
    design = mat @ atoms.T
    res = linprog(
        np.ones(atoms.shape[0]),
        A_eq=design,
        b_eq=y,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleMeasurementsError("y is not reachable from the atom cone")
    coef = res.x if res.x is not None else np.zeros(atoms.shape[0])
    x = atoms.T @ coef
    objective = res.fun if res.success else math.inf
    return _report_from_lp(res, x, objective, mat, y, "linear_program")


def _coefficient_splitting(f, mat, y, eps, config):
    atoms = _atom_family(f)
    design = mat @ atoms.T
    slack = config.tolerance * max(1.0, np.linalg.norm(y))

    def prox_fn(v, tau):
        return np.maximum(v - tau, 0.0)

    def violation(c):
        return float(np.linalg.norm(design @ c - y)) - eps - slack

    coef, iters, ok = _chambolle_pock(
        lambda c: design @ c,
        lambda u: design.T @ u,
        (atoms.shape[0],),
        mat.shape[0],
        prox_fn,
        _ball_dual(y, eps),
        config,
        violation=violation,
    )
    x = atoms.T @ coef
    residual = float(np.linalg.norm(mat @ x - y))
    return RecoveryReport(
        solution=x,
        objective=float(np.sum(coef)),
        residual=residual,
        iterations=iters,
        converged=bool(ok),
        algorithm="coefficient_splitting",
    )


def _lifted_splitting(f, mat, y, eps, mode, config):
    masks = _lifted_supports(f, config.support_cap)
    back = mat.T

    def apply_a(w):
        return mat @ w.sum(axis=0)

    def apply_at(u):
        return np.where(masks, (back @ u)[None, :], 0.0)

    def prox_fn(v, tau):
        nrm = np.linalg.norm(v, axis=1, keepdims=True)
        factor = np.maximum(1.0 - tau / np.maximum(nrm, 1e-300), 0.0)
        return v * factor

    dual = _equality_dual(y) if mode == "equality" else _ball_dual(y, eps)
    slack = config.tolerance * max(1.0, np.linalg.norm(y))
    allowed = slack if mode == "equality" else eps + slack

    def violation(w):
        return float(np.linalg.norm(mat @ w.sum(axis=0) - y)) - allowed

    w, iters, ok = _chambolle_pock(
        apply_a, apply_at, masks.shape, mat.shape[0], prox_fn, dual, config,
        violation=violation,
    )
    x = w.sum(axis=0)
    residual = float(np.linalg.norm(mat @ x - y))
    return RecoveryReport(
        solution=x,
        objective=float(norms.eval(f, x)),
        residual=residual,
        iterations=iters,
        converged=bool(ok),
        algorithm="lifted_splitting",
    )


def _proximal_splitting(f, mat, y, eps, mode, config):
    prox_fn = _prox_callable(f)
    dual = _equality_dual(y) if mode == "equality" else _ball_dual(y, eps)
    slack = config.tolerance * max(1.0, np.linalg.norm(y))
    allowed = slack if mode == "equality" else eps + slack

    def violation(v):
        return float(np.linalg.norm(mat @ v - y)) - allowed

    x, iters, ok = _chambolle_pock(
        lambda v: mat @ v,
        lambda u: mat.T @ u,
        (mat.shape[1],),
        mat.shape[0],
        prox_fn,
        dual,
        config,
        violation=violation,
    )
    residual = float(np.linalg.norm(mat @ x - y))
    return RecoveryReport(
        solution=x,
        objective=float(norms.eval(f, x)),
        residual=residual,
        iterations=iters,
        converged=bool(ok),
        algorithm="proximal_splitting",
    )


# ---------------------------------------------------------------------------
# public entry points


def solve_equality(M, y, f, config=None):
    """argmin f(x) subject to M x = y."""
    config = config or SolveConfig()
    mat = _as_matrix(M)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != mat.shape[0]:
        raise ValueError("y length must match the number of measurements")
    ls, *_ = np.linalg.lstsq(mat, y, rcond=None)
    if np.linalg.norm(mat @ ls - y) > 1e-8 * max(1.0, np.linalg.norm(y)):
        raise InfeasibleMeasurementsError("y is outside the range of M")
    route = _route(f, "equality") if config.algorithm == "auto" else config.algorithm
    if route == "proximal_splitting":
        return _proximal_splitting(f, mat, y, 0.0, "equality", config)
    if route == "linear_program":
        if isinstance(f, BirkhoffGauge):
            return _birkhoff_lp(mat, y, f.n)
        return _coefficient_lp(f, mat, y)
    if route == "lifted_splitting":
        return _lifted_splitting(f, mat, y, 0.0, "equality", config)
    if route == "coefficient_splitting":
        return _coefficient_splitting(f, mat, y, 0.0, config)
    raise ValueError(f"unknown algorithm {route!r}")


def solve_ball(M, y, f, epsilon, config=None):
    """argmin f(x) subject to |M x - y| <= epsilon."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    config = config or SolveConfig()
    mat = _as_matrix(M)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != mat.shape[0]:
        raise ValueError("y length must match the number of measurements")
    route = _route(f, "ball") if config.algorithm == "auto" else config.algorithm
    if route == "proximal_splitting":
        return _proximal_splitting(f, mat, y, epsilon, "ball", config)
    if route == "lifted_splitting":
        return _lifted_splitting(f, mat, y, epsilon, "ball", config)
    if route == "coefficient_splitting":
        return _coefficient_splitting(f, mat, y, epsilon, config)
    if route == "linear_program":
        # exact LP geometry only exists for the equality constraint
        if epsilon == 0.0:
            return solve_equality(M, y, f, replace(config, algorithm="auto"))
        return _coefficient_splitting(f, mat, y, epsilon, config)
    raise ValueError(f"unknown algorithm {route!r}")


def kernel_vector(M, seed=0):
    """A unit vector in the null space of M (error when the kernel is trivial)."""
    from scipy.linalg import null_space

    mat = _as_matrix(M)
    basis = null_space(mat)
    if basis.shape[1] == 0:
        raise TrivialKernelError("operator has full column rank")
    rng = np.random.default_rng(seed)
    v = basis @ rng.standard_normal(basis.shape[1])
    nrm = np.linalg.norm(v)
    if nrm == 0.0:  # measure-zero draw; fall back to the first basis vector
        v = basis[:, 0]
        nrm = np.linalg.norm(v)
    v = v / nrm
    if np.linalg.norm(mat @ v) > 1e-10:
        raise RuntimeError("null-space computation lost precision")
    return v
