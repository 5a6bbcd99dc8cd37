"""Continuous-variable cluster shaping toolkit.

Builds finitely squeezed Gaussian cluster states, removes nodes and
shortens wires by homodyne measurement with feedforward, and verifies
nullifier-based entanglement criteria, analytically and by Monte Carlo.
"""

from .gaussian import (
    CONVENTION,
    GaussianState,
    LossModel,
    ORDERING,
    PHYSICALITY_TOL,
    QuadratureConvention,
    SYMPLECTIC_TOL,
    SymplecticTransform,
    VACUUM_VARIANCE,
    apply,
    apply_loss,
    beam_splitter,
    displacement,
    form_vector,
    identity_transform,
    phase_shift,
    qnd_gate,
    quadrature_mean,
    quadrature_selector,
    quadrature_variance,
    squeeze_gate,
    squeezed_vacuum,
    squeezed_variance,
    symplectic_form,
    tensor,
    vacuum,
)
from .decompositions import bloch_messiah, is_orthogonal, is_symplectic
from .graphs import (
    BeamSplitterElement,
    ClusterGraph,
    NetworkPlan,
    Nullifier,
    PhaseShiftElement,
    build_canonical,
    canonical_transform,
    compile_network,
    format_graph_text,
    nullifiers_of,
    parse_graph_text,
    preset_wire_network,
    wire_to_ring_phases,
)
from .shaping import (
    FeedforwardRule,
    FeedforwardTarget,
    FormStats,
    HomodyneOutcome,
    MeasurementStep,
    ShapingResult,
    TrajectoryPlan,
    TrajectoryStats,
    execute_conditional,
    execute_ensemble,
    feedforward,
    homodyne,
    remove_node,
    removal_steps,
    run_trajectory,
    shorten_steps,
    shorten_wire,
)
from .criteria import (
    CriteriaReport,
    NullifierCheck,
    PairwiseCheck,
    ResidualSqueezing,
    check_cluster_criteria,
    nullifier_db,
    residual_squeezing_db,
)
from .experiments import (
    ConfigError,
    DETECTOR_EFFICIENCY,
    ExperimentConfig,
    ExperimentReport,
    HOMODYNE_VISIBILITY,
    REPORT_SCHEMA,
    calibrate_loss,
    emit,
    run,
)

__version__ = "0.1.0"
