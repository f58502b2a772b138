"""Desk-scale experiment drivers emitting deterministic CSV tables.

Every driver returns (meta, header, rows); the CSV renderer prepends a
single comment line holding the full configuration and seed, so re-running
with identical arguments reproduces the output byte for byte.  CSV is the
only output format; plotting is out of scope.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import configio, measure, models, norms, ripcalc, solve
from .models import (
    Block,
    BlockSparse,
    BlockStructure,
    GroupSparse,
    GroupStructure,
    LowRank,
    PermutationCone,
    sample_model,
    trivial_groups,
)
from .norms import BirkhoffGauge, GroupNorm, ModelAtomicNorm, WeightedBlockNorm
from .ripcalc import analytic_delta_bound, ayaz_delta, bastounis_delta


class WitnessSearchError(RuntimeError):
    """A required counterexample witness could not be constructed."""


@dataclass(frozen=True)
class ExperimentConfig:
    """File-based description of a recovery experiment grid."""

    model_config: str
    regularizer_config: str
    m_grid: tuple
    trials: int = 50
    eta: float = 0.0
    epsilon: float = 0.0
    seed: int = 0
    distribution: str = "gaussian"
    out_path: str = None

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if not self.m_grid:
            raise ValueError("m grid must be non-empty")
        if self.trials < 1:
            raise ValueError("need at least one trial per cell")

    def load(self):
        from . import configio

        return (configio.load_model(self.model_config),
                configio.load_regularizer(self.regularizer_config))


def run_phase_transition(config: ExperimentConfig, solve_config=None):
    model, f = config.load()
    meta, header, rows = phase_transition(
        model, f, config.m_grid, config.trials, config.seed,
        eta=config.eta, epsilon=config.epsilon,
        distribution=config.distribution, config=solve_config,
    )
    write_csv(config.out_path, meta, header, rows)
    return meta, header, rows


def run_stability_check(config: ExperimentConfig, solve_config=None):
    model, f = config.load()
    meta, header, rows = stability_check(
        model, f, config.m_grid, config.trials, config.eta, config.epsilon,
        config.seed, distribution=config.distribution, config=solve_config,
    )
    write_csv(config.out_path, meta, header, rows)
    return meta, header, rows


# ---------------------------------------------------------------------------
# CSV plumbing


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render_csv(meta, header, rows):
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, default=str) + "\r\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def write_csv(path, meta, header, rows):
    text = render_csv(meta, header, rows)
    if path is None:
        return text
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text


def _derived_seed(base, *indices):
    s = int(base)
    for i in indices:
        s = s * 1000003 + int(i) + 1
    return s % (2**63)


def _noise(m, eta, rng):
    if eta == 0.0:
        return np.zeros(m)
    g = rng.standard_normal(m)
    return eta * g / np.linalg.norm(g)


# ---------------------------------------------------------------------------
# admissible-constant comparison table


def _reference_block_model(j):
    blocks = tuple(
        Block(structure=GroupStructure(((i,),), j), k=1, weight=1.0) for i in range(j)
    )
    return BlockSparse(BlockStructure(blocks))


def bounds_figure(j_values, kappa_values):
    """Rows (J, kappa, ours, bastounis, ayaz).

    ``ours`` is the analytic constant of the block group-sparse model with
    weights w_j = 1/sqrt(K_j) (single source of truth: the dispatch table);
    it does not depend on kappa.  The baselines do.
    """
    rows = []
    for j in j_values:
        model = _reference_block_model(int(j))
        ours = analytic_delta_bound(
            model, WeightedBlockNorm(model.structure)
        ).value
        for kappa in kappa_values:
            rows.append((int(j), float(kappa), ours, bastounis_delta(int(j), kappa), ayaz_delta()))
    meta = {
        "command": "bounds-figure",
        "j_values": [int(j) for j in j_values],
        "kappa_values": [float(k) for k in kappa_values],
    }
    return meta, ["J", "kappa", "ours", "bastounis", "ayaz"], rows


# ---------------------------------------------------------------------------
# recovery experiments


def recovery_trials(model, f, m, trials, seed, eta=0.0, epsilon=0.0,
                    distribution="gaussian", config=None):
    """Per-trial decoder errors, with the closed-form bound when available.

    Emits (trial, error_l2, error_sigma_norm, bound, satisfied, converged).
    The bound column is C(f, delta_hat) * (eta + eps) computed from the
    exact enumerated RIP constant when the model is group-sparse and the
    constant is admissible; otherwise it is blank.
    """
    n = model.ambient_dim
    op = measure.generate(m, n, distribution, seed)
    bound = None
    delta_hat = None
    if isinstance(model, GroupSparse):
        s = min(2 * model.k, model.structure.num_groups)
        est = measure.exact_rip_group(op, model.structure, s)
        delta_hat = est.delta
        if delta_hat < 1.0 / math.sqrt(2.0):
            bound = ripcalc.stability_constant_blocks(1, delta_hat) * (eta + epsilon)
    rows = []
    sigma_norm = ModelAtomicNorm(model)
    for t in range(trials):
        rng = np.random.default_rng(_derived_seed(seed, t))
        x0 = sample_model(model, _derived_seed(seed, t, 1))
        y = op.matrix @ x0 + _noise(m, eta, rng)
        if epsilon == 0.0 and eta == 0.0:
            rep = solve.solve_equality(op, y, f, config)
        else:
            rep = solve.solve_ball(op, y, f, epsilon, config)
        err = float(np.linalg.norm(rep.solution - x0))
        err_sigma = norms.eval(sigma_norm, rep.solution - x0)
        satisfied = "" if bound is None else int(err <= bound)
        rows.append((t, err, err_sigma, "" if bound is None else bound,
                     satisfied, rep.converged))
    meta = {
        "command": "recover",
        "m": m,
        "trials": trials,
        "seed": seed,
        "eta": eta,
        "epsilon": epsilon,
        "distribution": distribution,
        "delta_hat": delta_hat,
        "model": configio.model_to_dict(model),
        "regularizer": configio.regularizer_to_dict(f),
    }
    header = ["trial", "error_l2", "error_sigma_norm",
              "bound_C_times_eta_plus_eps", "satisfied", "converged"]
    return meta, header, rows


def phase_transition(model, f, m_grid, trials, seed, eta=0.0, epsilon=0.0,
                     distribution="gaussian", config=None, success_tol=1e-5):
    """Success rate of exact recovery as m grows.

    success = converged decoder with relative error <= success_tol;
    non-convergence counts as failure and is reported in its own column.
    """
    n = model.ambient_dim
    rows = []
    for m in m_grid:
        ok = 0
        nonconverged = 0
        for t in range(trials):
            op = measure.generate(int(m), n, distribution, _derived_seed(seed, m, t))
            x0 = sample_model(model, _derived_seed(seed, m, t, 7))
            rng = np.random.default_rng(_derived_seed(seed, m, t, 13))
            y = op.matrix @ x0 + _noise(int(m), eta, rng)
            if epsilon == 0.0 and eta == 0.0:
                rep = solve.solve_equality(op, y, f, config)
            else:
                rep = solve.solve_ball(op, y, f, epsilon, config)
            if not rep.converged:
                nonconverged += 1
                continue
            rel = np.linalg.norm(rep.solution - x0) / max(np.linalg.norm(x0), 1e-300)
            ok += rel <= success_tol
        rows.append((int(m), ok / trials, trials, nonconverged))
    meta = {
        "command": "phase-transition",
        "m_grid": [int(m) for m in m_grid],
        "trials": trials,
        "seed": seed,
        "eta": eta,
        "epsilon": epsilon,
        "distribution": distribution,
        "success_tol": success_tol,
        "model": configio.model_to_dict(model),
        "regularizer": configio.regularizer_to_dict(f),
    }
    return meta, ["m", "success_rate", "trials", "nonconverged"], rows


def stability_check(model, f, m_grid, trials, eta, epsilon, seed,
                    distribution="orthonormal", config=None):
    """Verify the closed-form stability bound against decoder errors.

    Scans the m grid for the smallest m whose exact enumerated RIP constant
    is below 1/sqrt(2); at that m it runs noisy recovery trials and emits
    (trial, error, bound, margin, converged).  When no grid point is
    admissible the rows say so instead of asserting anything.
    """
    if not isinstance(model, GroupSparse) or not isinstance(f, GroupNorm):
        raise models.UnsupportedModelError(
            "stability check is implemented for single-block group-sparse models"
        )
    n = model.ambient_dim
    s = min(2 * model.k, model.structure.num_groups)
    chosen = None
    for m in sorted(int(m) for m in m_grid):
        op = measure.generate(m, n, distribution, _derived_seed(seed, m))
        est = measure.exact_rip_group(op, model.structure, s)
        if est.delta < 1.0 / math.sqrt(2.0):
            chosen = (m, op, est.delta)
            break
    meta = {
        "command": "stability-check",
        "m_grid": [int(m) for m in m_grid],
        "trials": trials,
        "eta": eta,
        "epsilon": epsilon,
        "seed": seed,
        "distribution": distribution,
        "model": configio.model_to_dict(model),
        "regularizer": configio.regularizer_to_dict(f),
    }
    header = ["trial", "error", "bound", "margin", "converged"]
    if chosen is None:
        meta["status"] = "not_applicable"
        return meta, header, [(0, "", "", "not applicable", "")]
    m, op, delta_hat = chosen
    c_value = ripcalc.stability_constant_blocks(1, delta_hat)
    bound = c_value * (eta + epsilon)
    meta.update({"m": m, "delta_hat": delta_hat, "c_value": c_value, "status": "ok"})
    rows = []
    for t in range(trials):
        x0 = sample_model(model, _derived_seed(seed, m, t, 3))
        rng = np.random.default_rng(_derived_seed(seed, m, t, 5))
        y = op.matrix @ x0 + _noise(m, eta, rng)
        rep = solve.solve_ball(op, y, f, epsilon, config)
        err = float(np.linalg.norm(rep.solution - x0))
        rows.append((t, err, bound, bound - err, rep.converged))
    return meta, header, rows


# ---------------------------------------------------------------------------
# permutation recovery


def permutation_demo(n, c_budget, trials=1, seed=0, config=None, tol=1e-6):
    """Uniform recovery of every n x n permutation under a single operator.

    The budget is m = ceil(c_budget * log(n!) * (3/2)^2); every permutation
    is encoded with the same M and decoded with the bi-stochastic gauge LP.
    """
    if n > 7:
        raise ValueError("permutation demo enumerates n! matrices; use n <= 7")
    cone = PermutationCone(n)
    r = math.factorial(n)
    m = measure.pointcloud_budget(r, 2.0 / 3.0, c_budget)
    gauge = BirkhoffGauge(n)
    perms = cone.permutation_matrices()
    rows = []
    for t in range(trials):
        op = measure.generate(m, n * n, "gaussian", _derived_seed(seed, t))
        for idx, perm in enumerate(perms):
            y = op.matrix @ perm.reshape(-1)
            rep = solve.solve_equality(op, y, gauge, config)
            err = float(np.linalg.norm(rep.solution - perm.reshape(-1)))
            rows.append((t, idx, err, err <= tol, rep.converged))
    meta = {
        "command": "permutation-demo",
        "n": n,
        "c_budget": c_budget,
        "m": m,
        "num_permutations": r,
        "trials": trials,
        "seed": seed,
        "tol": tol,
    }
    return meta, ["trial", "perm_index", "error", "recovered", "converged"], rows


def calibrate_permutation_budget(n, seed=0, c0=0.5, max_doublings=6, config=None):
    """Doubling search on the budget constant until all permutations recover."""
    c = c0
    for _ in range(max_doublings + 1):
        meta, header, rows = permutation_demo(n, c, trials=1, seed=seed, config=config)
        if all(bool(r[3]) for r in rows):
            meta["calibrated_c"] = c
            return meta, header, rows
        c *= 2.0
    raise RuntimeError(f"no budget constant up to {c / 2} recovered all permutations")


# ---------------------------------------------------------------------------
# impossibility witnesses


def ksupport_counterexample(k, n, seed, m=None, config=None):
    """Witness that the model atomic norm fails uniform sparse recovery (k >= 2).

    Draws a kernel vector z of a random M, builds x in the k-sparse model
    with |x + z|_S <= |x|_S by aligning a unit coordinate atom against the
    largest entry of z and rescaling, then verifies that the decoder
    returns a feasible point with objective <= |x|_S away from x.
    Returns (meta, header, rows, witness) where witness maps seed -> (x, z).
    """
    if k < 2:
        raise ValueError("the construction needs k >= 2 (k = 1 recovery succeeds)")
    m = n - 1 if m is None else m
    model = GroupSparse(trivial_groups(n), k)
    f = ModelAtomicNorm(model)
    op = measure.generate(m, n, "gaussian", seed)
    z = solve.kernel_vector(op, seed)
    h = int(np.argmax(np.abs(z)))
    x_h = np.zeros(n)
    x_h[h] = -np.sign(z[h])
    lam = 1.0
    for _ in range(80):
        if norms.eval(f, x_h + lam * z) < 1.0 - 1e-12:
            break
        lam /= 2.0
    else:
        raise WitnessSearchError("no descent scale found (is z zero?)")
    x = x_h / lam
    norm_x = norms.eval(f, x)
    norm_xz = norms.eval(f, x + z)
    if not (models.contains(model, x) and norm_xz <= norm_x + 1e-9):
        raise WitnessSearchError("witness violates the descent inequality")
    rep = solve.solve_equality(op, op.matrix @ x, f, config)
    distance = float(np.linalg.norm(rep.solution - x))
    rows = [(
        seed, m, h, lam, norm_x, norm_xz, rep.objective, distance,
        rep.objective <= norm_x + 1e-6 and distance > 1e-3,
    )]
    meta = {"command": "ksupport-counterexample", "k": k, "n": n, "m": m, "seed": seed}
    header = ["seed", "m", "pivot", "lambda", "norm_x", "norm_x_plus_z",
              "decoder_objective", "distance_to_x", "recovery_fails"]
    return meta, header, rows, {"x": x, "z": z, "M": op}


def lowrank_counterexample(r, rows_dim, cols_dim, seed, m=None):
    """Heuristic matrix analogue of the sparse witness (descent check only).

    Mirrors the coordinate construction with the top singular direction of
    a kernel matrix; verifies the descent inequality of the spectral
    atomic norm.  No decoder run: the atomic norm of bounded-rank models
    has no solver route.
    """
    if r < 2:
        raise ValueError("the construction needs r >= 2")
    n = rows_dim * cols_dim
    m = n - 1 if m is None else m
    model = LowRank(rows_dim, cols_dim, r)
    f = ModelAtomicNorm(model)
    op = measure.generate(m, n, "gaussian", seed)
    z = solve.kernel_vector(op, seed).reshape(rows_dim, cols_dim)
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    x1 = -np.outer(u[:, 0], vt[0])
    lam = 1.0
    for _ in range(80):
        if norms.eval(f, (x1 + lam * z).reshape(-1)) < 1.0 - 1e-12:
            break
        lam /= 2.0
    else:
        raise WitnessSearchError("no descent scale found for the matrix witness")
    x = x1 / lam
    norm_x = norms.eval(f, x.reshape(-1))
    norm_xz = norms.eval(f, (x + z).reshape(-1))
    ok = norm_xz <= norm_x + 1e-9
    meta = {"command": "lowrank-counterexample", "r": r, "rows": rows_dim,
            "cols": cols_dim, "m": m, "seed": seed, "heuristic": True}
    header = ["seed", "m", "lambda", "norm_x", "norm_x_plus_z", "descent_holds"]
    return meta, header, [(seed, m, lam, norm_x, norm_xz, ok)]


# ---------------------------------------------------------------------------
# unit-ball sampling


def ball_sample(k, resolution=33, n=3):
    """Radial samples of the k-sparse atomic-norm unit ball in R^3.

    Emits (theta, phi, radius) with radius = 1 / |u(theta, phi)|_S for unit
    directions u on a regular sphere grid; intended for external plotting.
    """
    if n != 3:
        raise ValueError("ball sampling is defined for n = 3")
    f = ModelAtomicNorm(GroupSparse(trivial_groups(n), k))
    thetas = np.linspace(0.0, math.pi, resolution)
    phis = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
    rows = []
    for theta in thetas:
        for phi in phis:
            u = np.array([
                math.sin(theta) * math.cos(phi),
                math.sin(theta) * math.sin(phi),
                math.cos(theta),
            ])
            rows.append((theta, phi, 1.0 / norms.eval(f, u)))
    meta = {"command": "ball-sample", "k": k, "n": n, "resolution": resolution}
    return meta, ["theta", "phi", "radius"], rows
