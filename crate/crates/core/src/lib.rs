//! Simulation of a tutor teaching goals to a learner by demonstration in a
//! two-pick ball-drawing game.
//!
//! The tutor is either naive (it only learns to reach goals) or pedagogical
//! (it also prefers demonstrations that give its goal away). The learner is
//! either literal or pragmatic (it reads meaning into the tutor avoiding the
//! most common ball). [`experiment::grid_experiment`] runs all four pairings.

pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod optimize;
pub mod policy;
pub mod report;
pub mod tutor;

pub use config::{load_config, AppConfig};
pub use env::{goal_satisfied, outcome, BallColor, BucketPrior, Goal, OutcomeSet, Trajectory};
pub use error::{Error, Result};
pub use experiment::{
    grid_experiment, run_condition, Condition, ExperimentConfig, GridResults, MetricsPoint,
    MetricsSeries, RunConfig, Settings,
};
pub use learner::{EpisodeRecord, LearnerConfig, LearnerMode, LearnerState};
pub use optimize::{BackendKind, EsConfig, SgConfig};
pub use policy::{GoalConditionedPolicy, PolicyTable};
pub use tutor::{train_tutor, DemoSelection, Demonstration, TutorConfig, TutorMode};
