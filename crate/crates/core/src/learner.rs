//! The learner: predicts the tutor's goal from a demonstration, then tries
//! to reach that goal itself.
//!
//! Two learned components are updated from two independent signals: the
//! prediction table from "did I guess the tutor's goal" and the action
//! policy of the guessed goal from "did my trajectory reach the goal I
//! guessed". A pragmatic learner also watches the demonstrations for a
//! sampling bias against purple, the bucket's most common color. Once the
//! tutor has avoided purple [`BiasDetector::threshold`] times in a row, the
//! learner concludes that purple is irrelevant to the goals being taught and
//! shifts its no-goal policy towards purple.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{goal_satisfied, outcome, BallColor, BucketPrior, Goal, OutcomeSet, Trajectory};
use crate::error::{Error, Result};
use crate::optimize::{score_function_update, update_baseline, SgConfig};
use crate::policy::{argmax, sample_index, softmax_probs, GoalConditionedPolicy};
use crate::tutor::Demonstration;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum LearnerMode {
    #[default]
    Literal,
    Pragmatic,
}

impl LearnerMode {
    pub const ALL: [LearnerMode; 2] = [LearnerMode::Literal, LearnerMode::Pragmatic];

    pub const fn name(self) -> &'static str {
        match self {
            LearnerMode::Literal => "literal",
            LearnerMode::Pragmatic => "pragmatic",
        }
    }
}

impl std::fmt::Display for LearnerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LearnerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown learner mode `{s}`")))
    }
}

/// Softmax over goals for each of the nine demonstration trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionTable {
    pub logits: [[f64; 3]; 9],
    temperature: f64,
}

impl Default for PredictionTable {
    fn default() -> Self {
        PredictionTable {
            logits: [[0.0; 3]; 9],
            temperature: 1.0,
        }
    }
}

impl PredictionTable {
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn row_probs(&self, traj: Trajectory) -> [f64; 3] {
        softmax_probs(&self.logits[traj.index()], self.temperature)
    }

    /// Argmax of the row, lowest goal index on ties.
    pub fn predict_greedy(&self, traj: Trajectory) -> Goal {
        Goal::ALL[argmax(&self.logits[traj.index()])]
    }

    pub fn predict_sample<R: Rng + ?Sized>(&self, traj: Trajectory, rng: &mut R) -> Goal {
        sample_index(&self.row_probs(traj), rng)
            .and_then(Goal::from_index)
            .unwrap_or(Goal::Goal2)
    }
}

/// Counts consecutive demonstrations with fewer purple balls than a naive
/// draw from the bucket would give on average.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasDetector {
    pub expected_purple_per_demo: f64,
    pub consecutive_below: usize,
    pub threshold: usize,
    pub triggered: bool,
    pub boost_delta: f64,
    boost_applied: bool,
}

impl BiasDetector {
    pub fn new(prior: &BucketPrior, threshold: usize, boost_delta: f64) -> Self {
        BiasDetector {
            expected_purple_per_demo: 2.0 * prior.prob(BallColor::Purple),
            consecutive_below: 0,
            threshold,
            triggered: false,
            boost_delta,
            boost_applied: false,
        }
    }

    /// Feeds one demonstration. Returns `true` on the single call that first
    /// trips the detector.
    pub fn observe_demo(&mut self, traj: Trajectory) -> bool {
        if (traj.purple_count() as f64) < self.expected_purple_per_demo {
            self.consecutive_below = (self.consecutive_below + 1).min(self.threshold);
        } else {
            self.consecutive_below = 0;
        }
        if !self.triggered && self.consecutive_below >= self.threshold {
            self.triggered = true;
            return true;
        }
        false
    }

    pub fn boost_applied(&self) -> bool {
        self.boost_applied
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    /// Goal-prediction table updates.
    pub prediction: SgConfig,
    /// Action-policy updates.
    pub action: SgConfig,
    pub bias_threshold: usize,
    pub boost_delta: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            prediction: SgConfig::default(),
            action: SgConfig::default(),
            bias_threshold: 5,
            boost_delta: 2.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        self.prediction.validate("learner.prediction")?;
        self.action.validate("learner.action")?;
        if self.bias_threshold == 0 {
            return Err(Error::config("learner.bias_threshold", "must be positive"));
        }
        if !(self.boost_delta.is_finite() && self.boost_delta > 0.0) {
            return Err(Error::config("learner.boost_delta", "must be positive"));
        }
        Ok(())
    }
}

/// Everything the metrics need about one learner episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub desired: Goal,
    pub demo: Trajectory,
    pub predicted: Goal,
    pub played: Trajectory,
    pub outcome: OutcomeSet,
    pub prediction_reward: f64,
    pub action_reward: f64,
    /// The bias detector tripped on this episode's demonstration.
    pub detector_event: bool,
}

impl EpisodeRecord {
    pub fn predicted_correctly(&self) -> bool {
        self.predicted == self.desired
    }

    /// Whether the learner's own trajectory reached the tutor's goal.
    pub fn reached_desired(&self) -> bool {
        goal_satisfied(self.desired, self.outcome)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    pub prediction: PredictionTable,
    pub policy: GoalConditionedPolicy,
    detector: Option<BiasDetector>,
    mode: LearnerMode,
    prediction_baselines: [f64; 9],
    action_baselines: [f64; 3],
    cfg: LearnerConfig,
}

impl LearnerState {
    /// Fresh learner with uniform tables. The bucket prior is only read for a
    /// pragmatic learner.
    pub fn new(mode: LearnerMode, cfg: LearnerConfig, bucket: &BucketPrior) -> Result<Self> {
        cfg.validate()?;
        let detector = match mode {
            LearnerMode::Literal => None,
            LearnerMode::Pragmatic => Some(BiasDetector::new(
                bucket,
                cfg.bias_threshold,
                cfg.boost_delta,
            )),
        };
        Ok(LearnerState {
            prediction: PredictionTable::default(),
            policy: GoalConditionedPolicy::uniform(),
            detector,
            mode,
            prediction_baselines: [0.0; 9],
            action_baselines: [0.0; 3],
            cfg,
        })
    }

    pub fn mode(&self) -> LearnerMode {
        self.mode
    }

    pub fn detector(&self) -> Option<&BiasDetector> {
        self.detector.as_ref()
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    /// Training mode samples from the row; evaluation takes its argmax.
    pub fn predict_goal<R: Rng + ?Sized>(
        &self,
        demo: &Demonstration,
        eval_mode: bool,
        rng: &mut R,
    ) -> Goal {
        if eval_mode {
            self.prediction.predict_greedy(demo.trajectory)
        } else {
            self.prediction.predict_sample(demo.trajectory, rng)
        }
    }

    /// Score-function step on the demonstration's row of the prediction
    /// table, against that row's running baseline.
    pub fn update_prediction(
        &mut self,
        demo: &Demonstration,
        predicted: Goal,
        correct: bool,
        lr: f64,
    ) {
        let row = demo.trajectory.index();
        let reward = f64::from(correct);
        let baseline = self.prediction_baselines[row];
        let advantage = reward - baseline;
        if advantage != 0.0 {
            let p = self.prediction.row_probs(demo.trajectory);
            let scale = lr * advantage / self.prediction.temperature;
            for (j, logit) in self.prediction.logits[row].iter_mut().enumerate() {
                *logit += scale * (f64::from(j == predicted.index()) - p[j]);
            }
        }
        self.prediction_baselines[row] =
            update_baseline(baseline, reward, self.cfg.prediction.baseline_decay);
    }

    /// Pushes the no-goal table towards purple on both picks. Allowed once,
    /// and only after the detector has tripped.
    pub fn apply_pragmatic_boost(&mut self) -> Result<()> {
        let det = self
            .detector
            .as_mut()
            .ok_or_else(|| Error::Precondition("literal learners have no bias detector".into()))?;
        if !det.triggered {
            return Err(Error::Precondition(
                "bias detector has not triggered".into(),
            ));
        }
        if det.boost_applied {
            return Err(Error::Precondition(
                "pragmatic boost already applied".into(),
            ));
        }
        det.boost_applied = true;
        let delta = det.boost_delta;
        let purple = BallColor::Purple.index();
        let table = self.policy.table_mut(Goal::NoGoal);
        table.first_logits[purple] += delta;
        for row in &mut table.second_logits {
            row[purple] += delta;
        }
        Ok(())
    }

    /// Feeds the demonstration to the bias detector, if any, and applies the
    /// boost when it trips. Returns whether it tripped.
    pub fn observe_demo(&mut self, traj: Trajectory) -> bool {
        let tripped = self
            .detector
            .as_mut()
            .is_some_and(|det| det.observe_demo(traj));
        if tripped {
            self.apply_pragmatic_boost()
                .expect("detector just triggered for the first time");
        }
        tripped
    }

    /// One training interaction with a demonstration.
    pub fn learner_episode<R: Rng + ?Sized>(
        &mut self,
        episode: usize,
        demo: &Demonstration,
        rng: &mut R,
    ) -> EpisodeRecord {
        let detector_event = self.observe_demo(demo.trajectory);
        if detector_event {
            log::info!("bias detector triggered at episode {episode}");
        }

        let predicted = self.predict_goal(demo, false, rng);
        let played = self.policy.sample_trajectory(predicted, rng);
        let out = outcome(played);

        let correct = predicted == demo.intended_goal;
        self.update_prediction(demo, predicted, correct, self.cfg.prediction.learning_rate);

        let action_reward = f64::from(goal_satisfied(predicted, out));
        let b = &mut self.action_baselines[predicted.index()];
        let table = score_function_update(
            self.policy.table(predicted),
            played,
            action_reward,
            *b,
            &self.cfg.action,
        );
        *b = update_baseline(*b, action_reward, self.cfg.action.baseline_decay);
        self.policy.set_table(predicted, table);

        EpisodeRecord {
            episode,
            desired: demo.intended_goal,
            demo: demo.trajectory,
            predicted,
            played,
            outcome: out,
            prediction_reward: f64::from(correct),
            action_reward,
            detector_event,
        }
    }

    /// Frozen probe: greedy prediction, greedy action, no updates.
    pub fn probe(&self, episode: usize, demo: &Demonstration) -> EpisodeRecord {
        let predicted = self.prediction.predict_greedy(demo.trajectory);
        let played = self.policy.greedy_trajectory(predicted);
        let out = outcome(played);
        EpisodeRecord {
            episode,
            desired: demo.intended_goal,
            demo: demo.trajectory,
            predicted,
            played,
            outcome: out,
            prediction_reward: f64::from(predicted == demo.intended_goal),
            action_reward: f64::from(goal_satisfied(predicted, out)),
            detector_event: false,
        }
    }
}
