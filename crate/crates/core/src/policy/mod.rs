//! Goal-conditioned navigation policy over a frontier action space.

mod features;
mod mlm;
mod params;
mod sampling;
mod scorer;
mod state;
mod train;

pub use features::{DISTANCE_SCALE_M, F_DISTANCE, F_OVERLAP, F_RECENCY, F_SIM, F_STEP, F_STOP, N_FEATURES};
pub(crate) use features::{build_candidates, GoalContext};
pub use mlm::{mlm_loss, mlm_mask, trajectory_context, MaskedCaption};
pub use params::{
    checkpoint_json, init_parameters, parse_checkpoint, read_checkpoint, write_checkpoint, Hyperparameters,
    PolicyDims, PolicyParameters, Weights, CHECKPOINT_VERSION,
};
pub use sampling::{
    decision_points, hard_negative_weights, oracle_action, sample_sap_step, SamplingStrategy, SapStep, StepKind,
    HARD_NEGATIVE_ERROR_COUNTS,
};
pub(crate) use scorer::{argmax as argmax_index, forward};
pub use scorer::{sap_loss, score_candidates, score_features, ActionCandidate, CandidateKind, Distribution};
pub use state::AgentState;
pub use train::{
    train, train_with_goals, write_train_log, ForcingSchedule, Phase, TrainLogRow, TrainOutcome, TrainStats, TrainingConfig, TrainingTask,
};

/// One decision of the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Stop,
    /// Move to a frontier viewpoint (by index), routing through visited ones.
    Goto(usize),
}
