//! Policy improvement over [`PolicyTable`] logits.
//!
//! Two backends: a score-function (REINFORCE) update driven by single
//! episodes, and evolution strategies with mirrored Gaussian perturbations.
//! [`exact_gradient`] is the closed-form gradient of the expected reward and
//! exists as a reference for both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{BallColor, Goal, Trajectory};
use crate::error::{Error, Result};
use crate::policy::{enumerate_trajectories, GoalConditionedPolicy, PolicyTable};

/// A quantity shaped like the logits of a [`PolicyTable`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Gradient {
    pub first: [f64; 3],
    pub second: [[f64; 3]; 3],
}

impl Gradient {
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.first
            .iter()
            .chain(self.second.iter().flatten())
            .copied()
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Gradient) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Gradient) -> Gradient {
        let mut out = *self;
        out.add_scaled(other, -1.0);
        out
    }

    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (a, b) in self.first.iter_mut().zip(other.first) {
            *a += scale * b;
        }
        for (ra, rb) in self.second.iter_mut().zip(other.second) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += scale * b;
            }
        }
    }

    /// Logit difference `after - before`.
    pub fn between(before: &PolicyTable, after: &PolicyTable) -> Gradient {
        let mut g = Gradient {
            first: after.first_logits,
            second: after.second_logits,
        };
        g.add_scaled(
            &Gradient {
                first: before.first_logits,
                second: before.second_logits,
            },
            -1.0,
        );
        g
    }

    fn apply(&self, table: &mut PolicyTable, scale: f64) {
        for (l, d) in table.first_logits.iter_mut().zip(self.first) {
            *l += scale * d;
        }
        for (row, drow) in table.second_logits.iter_mut().zip(self.second) {
            for (l, d) in row.iter_mut().zip(drow) {
                *l += scale * d;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgConfig {
    pub learning_rate: f64,
    pub baseline_decay: f64,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig {
            learning_rate: 0.1,
            baseline_decay: 0.9,
        }
    }
}

impl SgConfig {
    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(
                format!("{field}.learning_rate"),
                "must be positive",
            ));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::config(
                format!("{field}.baseline_decay"),
                "must lie in [0, 1)",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// Expected reward by enumerating all nine trajectories.
    Exact,
    /// Mean reward over this many sampled episodes.
    MonteCarlo(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsConfig {
    pub population: usize,
    pub sigma: f64,
    pub learning_rate: f64,
    pub fitness_mode: FitnessMode,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            population: 16,
            sigma: 0.5,
            learning_rate: 0.2,
            fitness_mode: FitnessMode::Exact,
        }
    }
}

impl EsConfig {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(Error::config(
                format!("{field}.population"),
                "must be an even number >= 2 (mirrored pairs)",
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config(format!("{field}.sigma"), "must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(
                format!("{field}.learning_rate"),
                "must be positive",
            ));
        }
        if self.fitness_mode == FitnessMode::MonteCarlo(0) {
            return Err(Error::config(
                format!("{field}.fitness_mode"),
                "monte_carlo needs at least one sample",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    ScoreFunction,
    Es,
}

/// Gradient of `log P(traj)` with respect to the table's logits.
pub fn score_direction(table: &PolicyTable, traj: Trajectory) -> Gradient {
    let inv_t = 1.0 / table.temperature();
    let p1 = table.first_dist().probs();
    let p2 = table.second_dist(traj.first).probs();
    let mut g = Gradient::default();
    for c in BallColor::ALL {
        let i = c.index();
        g.first[i] = inv_t * (f64::from(c == traj.first) - p1[i]);
        g.second[traj.first.index()][i] = inv_t * (f64::from(c == traj.second) - p2[i]);
    }
    g
}

/// One REINFORCE step on the first-pick row and the second-pick row that
/// was actually visited. Other rows are left untouched.
pub fn score_function_update(
    table: &PolicyTable,
    traj: Trajectory,
    reward: f64,
    baseline: f64,
    cfg: &SgConfig,
) -> PolicyTable {
    let mut out = table.clone();
    let advantage = reward - baseline;
    if advantage == 0.0 {
        return out;
    }
    score_direction(table, traj).apply(&mut out, cfg.learning_rate * advantage);
    out
}

/// Exponential moving average used as the reward baseline.
pub fn update_baseline(baseline: f64, reward: f64, decay: f64) -> f64 {
    decay * baseline + (1.0 - decay) * reward
}

/// Closed-form gradient of `sum_t P(t) r(t)` for the table of goal `g`.
pub fn exact_gradient(
    pol: &GoalConditionedPolicy,
    g: Goal,
    reward_fn: impl Fn(Trajectory) -> f64,
) -> Gradient {
    exact_table_gradient(pol.table(g), reward_fn)
}

pub fn exact_table_gradient(
    table: &PolicyTable,
    reward_fn: impl Fn(Trajectory) -> f64,
) -> Gradient {
    let inv_t = 1.0 / table.temperature();
    let p1 = table.first_dist().probs();
    let rewards: [f64; 9] = enumerate_trajectories().map(&reward_fn);

    // value of each first pick, then overall expectation
    let mut value = [0.0; 3];
    let mut second_probs = [[0.0; 3]; 3];
    for a in BallColor::ALL {
        second_probs[a.index()] = table.second_dist(a).probs();
        value[a.index()] = (0..3)
            .map(|b| second_probs[a.index()][b] * rewards[a.index() * 3 + b])
            .sum();
    }
    let total: f64 = (0..3).map(|a| p1[a] * value[a]).sum();

    let mut g = Gradient::default();
    for a in 0..3 {
        g.first[a] = inv_t * p1[a] * (value[a] - total);
        for b in 0..3 {
            g.second[a][b] = inv_t * p1[a] * second_probs[a][b] * (rewards[a * 3 + b] - value[a]);
        }
    }
    g
}

/// One evolution-strategies step on the table of goal `g`.
///
/// `population / 2` Gaussian directions are drawn and each is evaluated at
/// `+sigma` and `-sigma`. Fitness values are standardized across the
/// population and the logits move by
/// `lr / (population * sigma) * sum_i z_i * eps_i`. `reward_fn` receives the
/// perturbed full policy, so rewards that depend on the other goals' tables
/// see a consistent snapshot.
pub fn es_step<R: Rng + ?Sized>(
    pol: &GoalConditionedPolicy,
    g: Goal,
    reward_fn: impl Fn(&GoalConditionedPolicy, Trajectory) -> f64,
    cfg: &EsConfig,
    rng: &mut R,
) -> Result<GoalConditionedPolicy> {
    cfg.validate("es")?;
    let pairs = cfg.population / 2;

    let mut directions = Vec::with_capacity(pairs);
    let mut fitness = Vec::with_capacity(cfg.population);
    for pair in 0..pairs {
        // each pair gets its own stream so evaluation order does not matter
        let mut stream = ChaCha8Rng::seed_from_u64(rng.random());
        let mut eps = Gradient::default();
        for x in eps.first.iter_mut().chain(eps.second.iter_mut().flatten()) {
            *x = stream.sample(StandardNormal);
        }
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut candidate = pol.clone();
            eps.apply(candidate.table_mut(g), sign * cfg.sigma);
            let f = evaluate(&candidate, g, &reward_fn, cfg.fitness_mode, &mut stream);
            if !f.is_finite() {
                return Err(Error::NonFiniteFitness {
                    member: 2 * pair + k,
                    value: f,
                });
            }
            fitness.push(f);
        }
        directions.push(eps);
    }

    let n = fitness.len() as f64;
    let mean = fitness.iter().sum::<f64>() / n;
    let std = (fitness.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut out = pol.clone();
    if std < 1e-12 {
        return Ok(out);
    }

    let mut step = Gradient::default();
    for (eps, pair) in directions.iter().zip(fitness.chunks_exact(2)) {
        // z(+) eps + z(-) (-eps)
        step.add_scaled(eps, (pair[0] - pair[1]) / std);
    }
    step.apply(
        out.table_mut(g),
        cfg.learning_rate / (cfg.population as f64 * cfg.sigma),
    );
    Ok(out)
}

fn evaluate<R: Rng + ?Sized>(
    candidate: &GoalConditionedPolicy,
    g: Goal,
    reward_fn: &impl Fn(&GoalConditionedPolicy, Trajectory) -> f64,
    mode: FitnessMode,
    rng: &mut R,
) -> f64 {
    match mode {
        FitnessMode::Exact => candidate.expected_reward(g, |t| reward_fn(candidate, t)),
        FitnessMode::MonteCarlo(n) => {
            let total: f64 = (0..n)
                .map(|_| reward_fn(candidate, candidate.sample_trajectory(g, rng)))
                .sum();
            total / n as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{outcome, BallColor::*};

    fn goal2(t: Trajectory) -> f64 {
        f64::from(outcome(t).contains(Goal::Goal2))
    }

    #[test]
    fn zero_advantage_leaves_table_unchanged() {
        let mut t = PolicyTable::uniform();
        t.first_logits = [0.4, -0.2, 1.0];
        let out = score_function_update(
            &t,
            Trajectory::new(Pink, Orange),
            0.7,
            0.7,
            &SgConfig::default(),
        );
        assert_eq!(out, t);
    }

    #[test]
    fn hand_evaluated_update() {
        let t = PolicyTable::uniform();
        let out = score_function_update(
            &t,
            Trajectory::new(Pink, Orange),
            1.0,
            0.0,
            &SgConfig::default(),
        );
        let up = 0.1 * (1.0 - 1.0 / 3.0);
        let down = -0.1 / 3.0;
        assert!((out.first_logits[Pink.index()] - up).abs() < 1e-15);
        assert!((out.first_logits[Purple.index()] - down).abs() < 1e-15);
        assert!((out.first_logits[Orange.index()] - down).abs() < 1e-15);
        assert!((out.second_logits[Pink.index()][Orange.index()] - up).abs() < 1e-15);
    }

    #[test]
    fn update_only_touches_visited_second_row() {
        let mut t = PolicyTable::uniform();
        t.second_logits = [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9]];
        let out = score_function_update(
            &t,
            Trajectory::new(Orange, Pink),
            1.0,
            0.2,
            &SgConfig::default(),
        );
        assert_eq!(out.second_logits[0], t.second_logits[0]);
        assert_eq!(out.second_logits[2], t.second_logits[2]);
        assert_ne!(out.second_logits[1], t.second_logits[1]);
    }

    #[test]
    fn baseline_ema() {
        assert!((update_baseline(0.0, 1.0, 0.9) - 0.1).abs() < 1e-15);
        assert_eq!(update_baseline(0.37, 0.37, 0.5), 0.37);
        let mut b = 0.0;
        for _ in 0..100 {
            b = update_baseline(b, 1.0, 0.9);
        }
        // 1 - 0.9^100
        assert!((b - 1.0).abs() < 1e-4);
    }

    #[test]
    fn constant_reward_has_zero_gradient() {
        let mut pol = GoalConditionedPolicy::uniform();
        pol.table_mut(Goal::Goal1).first_logits = [1.0, -2.0, 0.5];
        pol.table_mut(Goal::Goal1).second_logits[2] = [3.0, 0.0, -1.0];
        let g = exact_gradient(&pol, Goal::Goal1, |_| 4.2);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn goal2_gradient_signs_at_uniform() {
        let g = exact_gradient(&GoalConditionedPolicy::uniform(), Goal::Goal2, goal2);
        assert!(g.first[Orange.index()] > 0.0);
        assert!(g.second[Orange.index()][Pink.index()] > 0.0);
        assert!(g.first[Purple.index()] < 0.0);
        assert!(g.second[Orange.index()][Purple.index()] < 0.0);
    }

    #[test]
    fn es_constant_fitness_is_a_fixed_point() {
        let mut pol = GoalConditionedPolicy::uniform();
        pol.table_mut(Goal::NoGoal).first_logits = [0.3, 0.1, -0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = es_step(
            &pol,
            Goal::NoGoal,
            |_, _| 1.0,
            &EsConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out, pol);
    }

    #[test]
    fn es_rejects_non_finite_fitness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = es_step(
            &GoalConditionedPolicy::uniform(),
            Goal::Goal1,
            |_, _| f64::NAN,
            &EsConfig::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteFitness { member: 0, .. }));
    }

    #[test]
    fn es_config_validation() {
        let bad = EsConfig {
            population: 3,
            ..Default::default()
        };
        assert!(bad.validate("es").is_err());
        let bad = EsConfig {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(bad.validate("es").is_err());
        let bad = EsConfig {
            fitness_mode: FitnessMode::MonteCarlo(0),
            ..Default::default()
        };
        assert!(bad.validate("es").is_err());
        assert!(EsConfig::default().validate("es").is_ok());
    }

    #[test]
    fn es_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut pol = GoalConditionedPolicy::uniform();
            for _ in 0..20 {
                pol = es_step(
                    &pol,
                    Goal::Goal2,
                    |_, t| goal2(t),
                    &EsConfig::default(),
                    &mut rng,
                )
                .unwrap();
            }
            pol
        };
        assert_eq!(run(), run());
    }
}
