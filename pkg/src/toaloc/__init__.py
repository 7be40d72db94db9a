"""Joint target localization and clock-bias estimation from biased TOA ranges
at two dual-antenna receivers."""

from .crlb import CrlbValues, FimBlocks, SingularFim, crlb_at_step, crlb_trajectory, fim_blocks, fim_step_blocks
from .estimator import (
    EstimatorState,
    GeometryIllConditioned,
    InvalidRange,
    NotAvailable,
    ParallelBearings,
    SolverConfig,
    StepResult,
    aoa_from_frame,
    initialize_first_step,
    intersect_bearings,
    jacobian,
    smooth_all,
    step_ingest,
    track,
)
from .measurement import (
    DEFAULT_ANCHORS,
    AnchorArray,
    MeasurementFrame,
    NoiseSpec,
    bias_matrix,
    range_vector,
    synthesize,
    synthesize_run,
)
from .simulation import McReport, McSpec, TrajectorySpec, generate_trajectory, run_monte_carlo, run_trial

__version__ = "0.1.0"
