"""Broadcasting and majority root-color estimation on growing random
recursive trees: simulators (tree, walk, urn), an exact DP oracle, and a
Monte Carlo harness for the phase transition in the flip probability."""

from .broadcast import (
    BroadcastResult,
    assign_color,
    majority_estimator,
    simulate_broadcast,
)
from .experiments import (
    EscapeStats,
    EventAStats,
    ExperimentConfig,
    RmajEstimate,
    SupermartingaleReport,
    derive_seed,
    escape_event_frequency,
    estimate_rmaj,
    event_a_frequency,
    supermartingale_diagnostic,
    sweep,
    wilson_interval,
)
from .models import (
    Family,
    InvariantError,
    ModelParams,
    ParamError,
    TreeState,
    attach,
    attachment_distribution,
    grow,
    new_tree,
    sample_parent,
    tree_from_parent_text,
    tree_to_parent_text,
    validate_params,
)
from .oracle import (
    ExactDistribution,
    enumerate_trees,
    exact_delta_distribution,
    exact_rmaj,
    tree_shape_distribution,
)
from .urn import (
    Regime,
    UrnState,
    classify_regime,
    critical_q,
    critical_q_reachable,
    initial_urn,
    leading_eigenvalues,
    replacement_matrix,
    simulate_urn,
    spectrum_report,
)
from .walk import (
    INITIAL_STATE,
    DeltaState,
    StoppingConfig,
    WalkResult,
    detect_stopping_times,
    increment_distribution,
    red_attach_prob,
    run_walk,
    stopping_bounds,
    walk_step,
    y_value,
    z_alpha,
)

__version__ = "0.1.0"
