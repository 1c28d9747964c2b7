"""Protocol-tree compression for LOCC implementations of quantum channels."""

from .analysis import BoundsReport, MeasurementAnalysis, analyze_measurement, bounds, chi, q_basis
from .channels import (
    Channel,
    MinimalRep,
    apply,
    channel_distance,
    choi_matrix,
    expand_in_minimal,
    minimal_rep,
)
from .compress import PruneReport, prune, prune_siblings, prune_tree, prune_tree_deterministic
from .estimators import ChannelAnalyzer, TreePruner
from .harness import (
    GenSpec,
    generate_tree,
    inject_redundancy,
    random_instrument,
    tomographic_channel_oracle,
)
from .numerics import (
    Tolerances,
    factor_across_cut,
    is_psd,
    kernel_basis,
    kron,
    numerical_rank,
)
from .trees import (
    LoccTree,
    TreeNode,
    ValidationReport,
    implemented_kraus,
    leaf_vectors,
    node_operator,
    round_count,
    validate,
)

__version__ = "0.1.0"
