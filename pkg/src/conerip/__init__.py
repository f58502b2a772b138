"""conerip: restricted-isometry calculus and recovery over low-dimensional cones."""

from .models import (
    Block,
    BlockSparse,
    BlockStructure,
    GroupSparse,
    GroupStructure,
    HalfLines,
    LowRank,
    PermutationCone,
    PointCloudCone,
    SecantSample,
    Subspace,
    contains,
    project,
    sample_descent,
    sample_model,
    sample_secant,
    trivial_groups,
)
from .norms import (
    AtomicDecomposition,
    BirkhoffGauge,
    GroupNorm,
    L1,
    ModelAtomicNorm,
    NuclearNorm,
    SubspaceIndicator,
    WeightedBlockNorm,
    dual_eval,
    eval,
    lmo,
    prox,
)
from .oracles import decomposition_oracle
from .ripcalc import (
    DecompositionPoint,
    DeltaBound,
    StabilitySpec,
    analytic_delta_bound,
    ayaz_delta,
    bastounis_delta,
    coherence,
    d_constant,
    delta_cone,
    delta_cone_sharp,
    delta_uos,
    empirical_delta,
    instance_optimality_bound,
    optimal_group_decomposition,
    optimal_rank_decomposition,
    quasi_descent,
    quasi_orthogonality,
    stability_constant,
    stability_constant_blocks,
    stability_spec,
)
from .measure import (
    MeasurementOperator,
    RipEstimate,
    block_budget,
    exact_rip_group,
    generate,
    group_budget,
    pointcloud_budget,
    sampled_rip,
)
from .solve import (
    RecoveryReport,
    SolveConfig,
    kernel_vector,
    solve_ball,
    solve_equality,
)

__version__ = "0.1.0"
