//! The 2×2 grid of tutor and learner modes, run over several seeds, with
//! predictability and reachability measured by frozen evaluation passes.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{BucketPrior, Goal};
use crate::error::{Error, Result};
use crate::learner::{EpisodeRecord, LearnerConfig, LearnerMode, LearnerState};
use crate::policy::GoalConditionedPolicy;
use crate::tutor::{
    demonstrate, train_tutor, DemoSelection, Demonstration, TutorConfig, TutorMode,
};

// Stream ids for the per-seed generators. Demonstrations have their own
// stream so that both learner modes see the same demonstrations.
const TUTOR_STREAM: u64 = 0;
const DEMO_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;

pub(crate) fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The demonstration stream for `seed`, as used by the grid.
pub fn demo_rng(seed: u64) -> ChaCha8Rng {
    seeded_stream(seed, DEMO_STREAM)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    pub tutor: TutorMode,
    pub learner: LearnerMode,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::new(TutorMode::Naive, LearnerMode::Literal),
        Condition::new(TutorMode::Naive, LearnerMode::Pragmatic),
        Condition::new(TutorMode::Pedagogical, LearnerMode::Literal),
        Condition::new(TutorMode::Pedagogical, LearnerMode::Pragmatic),
    ];

    pub const fn new(tutor: TutorMode, learner: LearnerMode) -> Self {
        Condition { tutor, learner }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+{}", self.tutor, self.learner)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Learner training episodes per run.
    pub episodes: usize,
    /// Episodes between evaluation passes.
    pub eval_period: usize,
    /// Probe episodes per evaluation pass.
    pub eval_window: usize,
    /// Number of seeds; runs use seeds `0..seeds`.
    pub seeds: usize,
    /// Worker threads for the grid. 0 picks the number of cores.
    pub parallel: usize,
    /// How the tutor picks training demonstrations. Probes are always greedy.
    pub training_demos: DemoSelection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            episodes: 30_000,
            eval_period: 500,
            eval_window: 60,
            seeds: 10,
            parallel: 0,
            training_demos: DemoSelection::Sample,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("experiment.episodes", "must be positive"));
        }
        if self.eval_period == 0 {
            return Err(Error::config("experiment.eval_period", "must be positive"));
        }
        if self.eval_period > self.episodes {
            return Err(Error::config(
                "experiment.eval_period",
                format!("must not exceed episodes ({})", self.episodes),
            ));
        }
        if self.eval_window == 0 {
            return Err(Error::config("experiment.eval_window", "must be positive"));
        }
        if self.seeds == 0 {
            return Err(Error::config("experiment.seeds", "must be positive"));
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).collect()
    }
}

/// Everything a run needs apart from its condition and seed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Settings {
    pub bucket_prior: BucketPrior,
    pub tutor: TutorConfig,
    pub learner: LearnerConfig,
    pub experiment: ExperimentConfig,
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        self.tutor.validate()?;
        self.learner.validate()?;
        self.experiment.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub condition: Condition,
    pub seed: u64,
    pub settings: Settings,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsPoint {
    pub episode: usize,
    pub predictability: f64,
    pub reachability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries {
    pub condition: Condition,
    pub seed: u64,
    pub points: Vec<MetricsPoint>,
}

impl MetricsSeries {
    pub fn last(&self) -> Option<&MetricsPoint> {
        self.points.last()
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub series: MetricsSeries,
    /// Training episodes in order.
    pub records: Vec<EpisodeRecord>,
    pub learner: LearnerState,
}

/// Fraction of probes whose predicted goal is the tutor's goal.
pub fn compute_predictability(records: &[EpisodeRecord]) -> Result<f64> {
    rate(records, EpisodeRecord::predicted_correctly)
}

/// Fraction of probes whose played trajectory satisfies the tutor's goal.
pub fn compute_reachability(records: &[EpisodeRecord]) -> Result<f64> {
    rate(records, EpisodeRecord::reached_desired)
}

fn rate(records: &[EpisodeRecord], hit: impl Fn(&EpisodeRecord) -> bool) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation window".into()));
    }
    let n = records.iter().filter(|r| hit(r)).count();
    Ok(n as f64 / records.len() as f64)
}

/// Trains the tutor a run with this seed and tutor mode would use.
pub fn train_run_tutor(
    settings: &Settings,
    mode: TutorMode,
    seed: u64,
) -> Result<GoalConditionedPolicy> {
    let cfg = TutorConfig {
        mode,
        ..settings.tutor
    };
    let mut rng = seeded_stream(seed, TUTOR_STREAM);
    train_tutor(&cfg, &settings.bucket_prior, &mut rng)
}

/// Greedy probes, goals in round-robin order, learner left untouched.
pub fn evaluate(
    learner: &LearnerState,
    tutor: &GoalConditionedPolicy,
    episode: usize,
    window: usize,
) -> Vec<EpisodeRecord> {
    (0..window)
        .map(|i| {
            let goal = Goal::ALL[i % Goal::ALL.len()];
            let demo = Demonstration {
                trajectory: tutor.greedy_trajectory(goal),
                intended_goal: goal,
            };
            learner.probe(episode, &demo)
        })
        .collect()
}

fn metrics_point(
    learner: &LearnerState,
    tutor: &GoalConditionedPolicy,
    episode: usize,
    window: usize,
) -> Result<MetricsPoint> {
    let probes = evaluate(learner, tutor, episode, window);
    Ok(MetricsPoint {
        episode,
        predictability: compute_predictability(&probes)?,
        reachability: compute_reachability(&probes)?,
    })
}

/// The demonstrations a run's learner is trained on. Depends only on the
/// tutor, the seed and the settings.
pub fn demo_stream<'a>(
    tutor: &'a GoalConditionedPolicy,
    settings: &'a Settings,
    seed: u64,
) -> impl Iterator<Item = Demonstration> + 'a {
    let mut rng = seeded_stream(seed, DEMO_STREAM);
    let selection = settings.experiment.training_demos;
    (0..settings.experiment.episodes).map(move |_| {
        let goal = settings.tutor.goal_prior.sample(&mut rng);
        demonstrate(tutor, goal, selection, &mut rng)
    })
}

/// Trains one learner against `tutor`, evaluating before the first episode
/// and after every `eval_period` episodes.
pub fn run_condition(cfg: &RunConfig, tutor: &GoalConditionedPolicy) -> Result<RunResult> {
    let settings = &cfg.settings;
    settings.validate()?;
    let exp = &settings.experiment;
    let mut learner = LearnerState::new(
        cfg.condition.learner,
        settings.learner,
        &settings.bucket_prior,
    )?;
    let mut rng = seeded_stream(cfg.seed, LEARNER_STREAM);
    let mut records = Vec::with_capacity(exp.episodes);
    let mut points = vec![metrics_point(&learner, tutor, 0, exp.eval_window)?];

    for (episode, demo) in demo_stream(tutor, settings, cfg.seed).enumerate() {
        records.push(learner.learner_episode(episode, &demo, &mut rng));
        let done = episode + 1;
        if done.is_multiple_of(exp.eval_period) {
            points.push(metrics_point(&learner, tutor, done, exp.eval_window)?);
        }
    }

    Ok(RunResult {
        series: MetricsSeries {
            condition: cfg.condition,
            seed: cfg.seed,
            points,
        },
        records,
        learner,
    })
}

#[derive(Clone, Debug, Default)]
pub struct GridResults {
    pub tutors: BTreeMap<(TutorMode, u64), GoalConditionedPolicy>,
    pub runs: BTreeMap<(Condition, u64), RunResult>,
}

impl GridResults {
    pub fn series_by_condition(&self) -> BTreeMap<Condition, Vec<&MetricsSeries>> {
        let mut out: BTreeMap<Condition, Vec<&MetricsSeries>> = BTreeMap::new();
        for ((cond, _), run) in &self.runs {
            out.entry(*cond).or_default().push(&run.series);
        }
        out
    }

    pub fn all_series(&self) -> impl Iterator<Item = &MetricsSeries> {
        self.runs.values().map(|r| &r.series)
    }

    /// Mean final (predictability, reachability) per condition.
    pub fn final_means(&self) -> BTreeMap<Condition, (f64, f64)> {
        self.series_by_condition()
            .into_iter()
            .map(|(cond, series)| {
                let n = series.len() as f64;
                let finals = series.iter().filter_map(|s| s.last());
                let (p, r) = finals.fold((0.0, 0.0), |(p, r), pt| {
                    (p + pt.predictability, r + pt.reachability)
                });
                (cond, (p / n, r / n))
            })
            .collect()
    }
}

/// Runs every condition for every seed. Each (tutor mode, seed) tutor is
/// trained once and shared by both learner modes.
pub fn grid_experiment(settings: &Settings, seeds: &[u64], workers: usize) -> Result<GridResults> {
    settings.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    pool.install(|| {
        let tutor_keys: Vec<(TutorMode, u64)> = TutorMode::ALL
            .iter()
            .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
            .collect();
        let tutors = tutor_keys
            .par_iter()
            .map(|&(mode, seed)| {
                let pol = train_run_tutor(settings, mode, seed)?;
                log::debug!("trained {mode} tutor for seed {seed}");
                Ok(((mode, seed), pol))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;

        let run_keys: Vec<(Condition, u64)> = Condition::ALL
            .iter()
            .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
            .collect();
        let runs = run_keys
            .par_iter()
            .map(|&(condition, seed)| {
                let cfg = RunConfig {
                    condition,
                    seed,
                    settings: *settings,
                };
                let result = run_condition(&cfg, &tutors[&(condition.tutor, seed)])?;
                log::debug!("finished {condition} seed {seed}");
                Ok(((condition, seed), result))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;

        Ok(GridResults { tutors, runs })
    })
}
