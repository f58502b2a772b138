"""Measurement operators, exact and sampled RIP estimation, budgets.

Exact estimation enumerates group supports and takes extreme singular
values of column submatrices; it is only available for group/block models
(no finite enumeration exists for low-rank or cone secant sets, which get
sampled lower bounds instead).  Budget formulas expose the usually hidden
multiplicative constant explicitly and default it to 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .models import GroupStructure, sample_secant


class EnumerationCapError(RuntimeError):
    """Support enumeration would exceed the configured cap."""


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """Dense linear map R^n -> R^m with generation provenance."""

    matrix: np.ndarray
    distribution: str
    seed: object = None

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if not np.all(np.isfinite(mat)):
            raise ValueError("measurement matrix must be finite")
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(frozen=True, eq=False)
class RipEstimate:
    delta: float
    method: str  # exact_enumeration | sampled
    n_evaluated: int
    witness: object


def generate(m, n, distribution="gaussian", seed=0):
    """Random operator with i.i.d. entries scaled by 1/sqrt(m).

    distributions: 'gaussian' (standard normal), 'rademacher' (+-1), and
    the custom family 'orthonormal' (Gaussian rows orthonormalized by QR,
    m <= n), whose exact isometry on its row space makes small exact-RIP
    constants reachable at desk scale.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = np.random.default_rng(seed)
    if distribution == "gaussian":
        mat = rng.standard_normal((m, n)) / math.sqrt(m)
    elif distribution == "rademacher":
        mat = rng.choice([-1.0, 1.0], size=(m, n)) / math.sqrt(m)
    elif distribution == "orthonormal":
        if m > n:
            raise ValueError("orthonormal rows require m <= n")
        q, _ = np.linalg.qr(rng.standard_normal((n, m)))
        mat = q[:, :m].T
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return MeasurementOperator(matrix=mat, distribution=distribution, seed=seed)


def exact_rip_group(M, structure: GroupStructure, s, cap=10**6):
    """Exact RIP constant over s-group-sparse vectors by support enumeration.

    For every support of s groups the extreme squared singular values of
    the corresponding column submatrix give the local deviation
    max(1 - sigma_min^2, sigma_max^2 - 1); the estimate is the maximum over
    supports and the witness is the attaining support.
    """
    s = int(s)
    if s < 1 or s > structure.num_groups:
        raise ValueError("s must lie in [1, num_groups]")
    count = math.comb(structure.num_groups, s)
    if count > cap:
        raise EnumerationCapError(f"{count} supports exceed cap {cap}")
    mat = M.matrix if isinstance(M, MeasurementOperator) else np.asarray(M, float)
    best = -math.inf
    witness = None
    for supp in itertools.combinations(range(structure.num_groups), s):
        cols = [i for g in supp for i in structure.groups[g]]
        sub = mat[:, cols]
        sv = np.linalg.svd(sub, compute_uv=False)
        smin2 = 0.0 if sub.shape[1] > sub.shape[0] else float(sv[-1] ** 2)
        smax2 = float(sv[0] ** 2)
        local = max(1.0 - smin2, smax2 - 1.0)
        if local > best:
            best, witness = local, supp
    return RipEstimate(
        delta=max(best, 0.0),
        method="exact_enumeration",
        n_evaluated=count,
        witness=witness,
    )


def support_deviation(M, structure, supp):
    """Recompute the deviation of one group support (witness verification)."""
    mat = M.matrix if isinstance(M, MeasurementOperator) else np.asarray(M, float)
    cols = [i for g in supp for i in structure.groups[g]]
    sub = mat[:, cols]
    sv = np.linalg.svd(sub, compute_uv=False)
    smin2 = 0.0 if sub.shape[1] > sub.shape[0] else float(sv[-1] ** 2)
    return max(1.0 - smin2, float(sv[0] ** 2) - 1.0)


def sampled_rip(M, model, n_samples, seed=0):
    """Monte-Carlo lower bound max_i | |M s_i|^2 - 1 | over unit secants."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    mat = M.matrix if isinstance(M, MeasurementOperator) else np.asarray(M, float)
    best = -math.inf
    witness = None
    for i in range(n_samples):
        sec = sample_secant(model, seed + i, normalized=True)
        dev = abs(float(np.linalg.norm(mat @ sec.difference) ** 2) - 1.0)
        if dev > best:
            best, witness = dev, sec
    return RipEstimate(
        delta=best, method="sampled", n_evaluated=n_samples, witness=witness
    )


# ---------------------------------------------------------------------------
# measurement budgets


def group_budget(k, r_max, n_groups, delta, c=1.0):
    """ceil(c delta^-2 (k r_max + k log(3 e n_groups / k))).

    The multiplicative constant is unspecified in the underlying covering
    argument; c=1 is a placeholder to be calibrated empirically.
    """
    if min(k, r_max, n_groups) < 1 or not 0.0 < delta < 1.0 or c <= 0:
        raise ValueError("arguments must be positive with delta in (0, 1)")
    value = c / delta**2 * (k * r_max + k * math.log(3.0 * math.e * n_groups / k))
    return int(math.ceil(value))


def block_budget(block_structure, delta, c=1.0):
    """Sum of per-block budget terms, same scaling and caveats as group_budget."""
    if not 0.0 < delta < 1.0 or c <= 0:
        raise ValueError("delta must lie in (0, 1) and c must be positive")
    total = 0.0
    for b in block_structure.blocks:
        r_max = max(len(g) for g in b.structure.groups)
        n_groups = b.structure.num_groups
        total += b.k * r_max + b.k * math.log(3.0 * math.e * n_groups / b.k)
    return int(math.ceil(c / delta**2 * total))


def pointcloud_budget(r_points, delta, c=1.0):
    """ceil(c log(r_points) / delta^2) for a cone over r_points half-lines."""
    if r_points < 2:
        raise ValueError("need at least two points")
    if not 0.0 < delta < 1.0 or c <= 0:
        raise ValueError("delta must lie in (0, 1) and c must be positive")
    return int(math.ceil(c * math.log(r_points) / delta**2))
