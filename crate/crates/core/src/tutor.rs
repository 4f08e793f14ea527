//! The tutor: a goal-conditioned policy trained either to reach goals
//! (naive) or to reach them with trajectories from which the goal can be
//! read back (pedagogical).
//!
//! A pedagogical tutor is paid a bonus on successful episodes whose goal it
//! can predict back from its own demonstration. With the default
//! [`PredictionRule::Sequential`] the prediction is made twice, after the
//! first pick and after the whole trajectory, and both must single out the
//! pursued goal. Each prediction inverts a product of two likelihoods: the
//! tutor's current policy for each goal and a literal observer that models a
//! naive bucket drawer who happened to reach that goal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    goal_satisfied, outcome, prior_trajectory_prob, BallColor, BucketPrior, Goal, OutcomeSet,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::optimize::{
    es_step, score_function_update, update_baseline, BackendKind, EsConfig, SgConfig,
};
use crate::policy::{argmax, enumerate_trajectories, sample_index, GoalConditionedPolicy};

/// Posterior values closer than this are treated as a tie.
pub const AMBIGUITY_EPS: f64 = 1e-9;

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum TutorMode {
    Naive,
    #[default]
    Pedagogical,
}

impl TutorMode {
    pub const ALL: [TutorMode; 2] = [TutorMode::Naive, TutorMode::Pedagogical];

    pub const fn name(self) -> &'static str {
        match self {
            TutorMode::Naive => "naive",
            TutorMode::Pedagogical => "pedagogical",
        }
    }
}

impl std::fmt::Display for TutorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TutorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(TutorMode::Naive),
            "pedagogical" => Ok(TutorMode::Pedagogical),
            _ => Err(Error::InvalidArgument(format!("unknown tutor mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoSelection {
    #[default]
    Greedy,
    Sample,
}

/// A probability per goal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GoalPriorRepr", into = "GoalPriorRepr")]
pub struct GoalPrior {
    p: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalPriorRepr {
    none: f64,
    g1: f64,
    g2: f64,
}

impl TryFrom<GoalPriorRepr> for GoalPrior {
    type Error = Error;

    fn try_from(r: GoalPriorRepr) -> Result<Self> {
        GoalPrior::new([r.none, r.g1, r.g2])
    }
}

impl From<GoalPrior> for GoalPriorRepr {
    fn from(g: GoalPrior) -> Self {
        GoalPriorRepr {
            none: g.p[0],
            g1: g.p[1],
            g2: g.p[2],
        }
    }
}

impl Default for GoalPrior {
    fn default() -> Self {
        GoalPrior { p: [1.0 / 3.0; 3] }
    }
}

impl GoalPrior {
    pub fn new(p: [f64; 3]) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::config(
                "tutor.goal_prior",
                "entries must be non-negative",
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "tutor.goal_prior",
                format!("must sum to 1, got {total}"),
            ));
        }
        Ok(GoalPrior { p })
    }

    pub fn prob(&self, g: Goal) -> f64 {
        self.p[g.index()]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Goal {
        sample_index(&self.p, rng)
            .and_then(Goal::from_index)
            .unwrap_or(Goal::Goal2)
    }
}

/// How a pedagogical tutor decides whether its demonstration gives its goal
/// away.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRule {
    /// First-pick and full-trajectory predictions under the combined
    /// self/literal likelihood must both name the goal.
    #[default]
    Sequential,
    /// Argmax of [`self_predict_goal`] on the full trajectory only.
    Final,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TutorConfig {
    pub mode: TutorMode,
    /// Weight of the goal-prediction term in the pedagogical reward.
    pub lambda_ped: f64,
    pub prediction_rule: PredictionRule,
    pub episodes: usize,
    pub goal_prior: GoalPrior,
    pub backend: BackendKind,
    /// Selection for the demonstrations `train-tutor` prints. The grid uses
    /// `experiment.training_demos` instead.
    pub demo_selection: DemoSelection,
    pub sg: SgConfig,
    pub es: EsConfig,
}

impl Default for TutorConfig {
    fn default() -> Self {
        TutorConfig {
            mode: TutorMode::default(),
            lambda_ped: 1.0,
            prediction_rule: PredictionRule::default(),
            episodes: 20_000,
            goal_prior: GoalPrior::default(),
            backend: BackendKind::default(),
            demo_selection: DemoSelection::default(),
            sg: SgConfig::default(),
            es: EsConfig::default(),
        }
    }
}

impl TutorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ped.is_finite() && self.lambda_ped >= 0.0) {
            return Err(Error::config("tutor.lambda_ped", "must be non-negative"));
        }
        if self.episodes == 0 {
            return Err(Error::config("tutor.episodes", "must be positive"));
        }
        self.sg.validate("tutor.sg")?;
        self.es.validate("tutor.es")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    /// Known to the harness; the learner must not read it when predicting.
    pub intended_goal: Goal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    Unique(Goal),
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalPosterior {
    pub p: [f64; 3],
}

impl GoalPosterior {
    pub fn prob(&self, g: Goal) -> f64 {
        self.p[g.index()]
    }

    /// The most probable goal, or `Ambiguous` when the runner-up is within
    /// [`AMBIGUITY_EPS`] of it.
    pub fn prediction(&self) -> Prediction {
        let best = argmax(&self.p);
        let runner_up = (0..3)
            .filter(|&i| i != best)
            .map(|i| self.p[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if self.p[best] - runner_up < AMBIGUITY_EPS {
            Prediction::Ambiguous
        } else {
            Prediction::Unique(Goal::ALL[best])
        }
    }
}

/// Bayes' rule over goals with the policy's own tables as likelihoods.
pub fn self_predict_goal(
    pol: &GoalConditionedPolicy,
    traj: Trajectory,
    goal_prior: &GoalPrior,
) -> GoalPosterior {
    posterior_from_likelihoods(Goal::ALL.map(|g| pol.trajectory_prob(g, traj)), goal_prior)
}

pub fn posterior_from_likelihoods(likelihood: [f64; 3], goal_prior: &GoalPrior) -> GoalPosterior {
    let mut p: [f64; 3] = std::array::from_fn(|i| likelihood[i] * goal_prior.p[i]);
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return GoalPosterior { p: goal_prior.p };
    }
    for x in &mut p {
        *x /= total;
    }
    GoalPosterior { p }
}

/// Likelihoods of a naive bucket drawer conditioned on having reached each
/// goal: `P(t | g) = prior(t) [t reaches g] / Z_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiteralObserver {
    traj: [[f64; 9]; 3],
}

impl LiteralObserver {
    pub fn new(bucket: &BucketPrior) -> Self {
        let mut traj = [[0.0; 9]; 3];
        for g in Goal::ALL {
            let row = &mut traj[g.index()];
            for t in enumerate_trajectories() {
                if goal_satisfied(g, outcome(t)) {
                    row[t.index()] = prior_trajectory_prob(bucket, t);
                }
            }
            let z: f64 = row.iter().sum();
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        LiteralObserver { traj }
    }

    pub fn trajectory_likelihood(&self, g: Goal, t: Trajectory) -> f64 {
        self.traj[g.index()][t.index()]
    }

    /// Probability that the drawer's first pick is `c`, given it reached `g`.
    pub fn first_pick_likelihood(&self, g: Goal, c: BallColor) -> f64 {
        BallColor::ALL
            .iter()
            .map(|&b| self.trajectory_likelihood(g, Trajectory::new(c, b)))
            .sum()
    }
}

/// Posteriors after the first pick and after the full demonstration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequentialPosterior {
    pub first_pick: GoalPosterior,
    pub full: GoalPosterior,
}

impl SequentialPosterior {
    /// `Unique(g)` only if both stages single out the same goal `g`.
    pub fn prediction(&self) -> Prediction {
        match (self.first_pick.prediction(), self.full.prediction()) {
            (Prediction::Unique(a), Prediction::Unique(b)) if a == b => Prediction::Unique(a),
            _ => Prediction::Ambiguous,
        }
    }
}

pub fn sequential_predict_goal(
    pol: &GoalConditionedPolicy,
    observer: &LiteralObserver,
    traj: Trajectory,
    goal_prior: &GoalPrior,
) -> SequentialPosterior {
    let first_pick = Goal::ALL.map(|g| {
        pol.table(g).first_dist().prob(traj.first) * observer.first_pick_likelihood(g, traj.first)
    });
    let full =
        Goal::ALL.map(|g| pol.trajectory_prob(g, traj) * observer.trajectory_likelihood(g, traj));
    SequentialPosterior {
        first_pick: posterior_from_likelihoods(first_pick, goal_prior),
        full: posterior_from_likelihoods(full, goal_prior),
    }
}

/// Naive: 1 when the goal is reached. Pedagogical: additionally
/// `lambda_ped` when the goal is reached and `prediction` names it.
pub fn tutor_reward(
    mode: TutorMode,
    goal: Goal,
    o: OutcomeSet,
    prediction: Prediction,
    lambda_ped: f64,
) -> f64 {
    let achieved = f64::from(goal_satisfied(goal, o));
    match mode {
        TutorMode::Naive => achieved,
        TutorMode::Pedagogical => {
            achieved * (1.0 + lambda_ped * f64::from(prediction == Prediction::Unique(goal)))
        }
    }
}

fn episode_reward(
    cfg: &TutorConfig,
    observer: &LiteralObserver,
    pol: &GoalConditionedPolicy,
    goal: Goal,
    traj: Trajectory,
) -> f64 {
    let prediction = match (cfg.mode, cfg.prediction_rule) {
        (TutorMode::Naive, _) => Prediction::Ambiguous,
        (TutorMode::Pedagogical, PredictionRule::Final) => {
            self_predict_goal(pol, traj, &cfg.goal_prior).prediction()
        }
        (TutorMode::Pedagogical, PredictionRule::Sequential) => {
            sequential_predict_goal(pol, observer, traj, &cfg.goal_prior).prediction()
        }
    };
    tutor_reward(cfg.mode, goal, outcome(traj), prediction, cfg.lambda_ped)
}

/// Trains all three goal tables from uniform logits. `bucket` is only used
/// by the pedagogical literal observer.
pub fn train_tutor<R: Rng + ?Sized>(
    cfg: &TutorConfig,
    bucket: &BucketPrior,
    rng: &mut R,
) -> Result<GoalConditionedPolicy> {
    cfg.validate()?;
    let observer = LiteralObserver::new(bucket);
    let mut pol = GoalConditionedPolicy::uniform();
    let mut baselines = [0.0; 3];
    for _ in 0..cfg.episodes {
        let goal = cfg.goal_prior.sample(rng);
        match cfg.backend {
            BackendKind::ScoreFunction => {
                let traj = pol.sample_trajectory(goal, rng);
                let reward = episode_reward(cfg, &observer, &pol, goal, traj);
                let b = &mut baselines[goal.index()];
                let table = score_function_update(pol.table(goal), traj, reward, *b, &cfg.sg);
                pol.set_table(goal, table);
                *b = update_baseline(*b, reward, cfg.sg.baseline_decay);
            }
            BackendKind::Es => {
                pol = es_step(
                    &pol,
                    goal,
                    |cand, traj| episode_reward(cfg, &observer, cand, goal, traj),
                    &cfg.es,
                    rng,
                )?;
            }
        }
    }
    Ok(pol)
}

pub fn demonstrate<R: Rng + ?Sized>(
    pol: &GoalConditionedPolicy,
    goal: Goal,
    selection: DemoSelection,
    rng: &mut R,
) -> Demonstration {
    let trajectory = match selection {
        DemoSelection::Greedy => pol.greedy_trajectory(goal),
        DemoSelection::Sample => pol.sample_trajectory(goal, rng),
    };
    Demonstration {
        trajectory,
        intended_goal: goal,
    }
}
