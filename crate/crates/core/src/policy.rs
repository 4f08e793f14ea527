//! Tabular goal-conditioned softmax policies.
//!
//! Each goal owns a [`PolicyTable`]: one row of logits for the first pick and
//! one row per possible first pick for the second. The trajectory space is
//! tiny (nine pairs), so exact likelihoods and expectations are computed by
//! enumeration rather than estimated.

use rand::Rng;

use crate::env::{BallColor, Goal, Trajectory};
use crate::error::{Error, Result};

/// A probability per ball color.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionDistribution {
    p: [f64; 3],
}

impl ActionDistribution {
    pub const UNIFORM: ActionDistribution = ActionDistribution { p: [1.0 / 3.0; 3] };

    pub fn prob(&self, c: BallColor) -> f64 {
        self.p[c.index()]
    }

    pub fn probs(&self) -> [f64; 3] {
        self.p
    }

    /// Inverse-CDF draw over the three colors.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BallColor {
        sample_index(&self.p, rng)
            .and_then(BallColor::from_index)
            .unwrap_or(BallColor::Pink)
    }

    /// Most likely color; ties go to the lowest index.
    pub fn argmax(&self) -> BallColor {
        BallColor::from_index(argmax(&self.p)).unwrap_or(BallColor::Purple)
    }
}

/// First index holding the maximum value.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Option<usize> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return Some(i);
        }
    }
    // Rounding left `acc` a hair under 1.
    p.iter().rposition(|&pi| pi > 0.0)
}

/// Temperature softmax with max-subtraction.
pub fn softmax(logits: &[f64; 3], temperature: f64) -> Result<ActionDistribution> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "logits must be finite, got {logits:?}"
        )));
    }
    Ok(softmax_unchecked(logits, temperature))
}

pub(crate) fn softmax_probs(logits: &[f64; 3], temperature: f64) -> [f64; 3] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|l| ((l - max) / temperature).exp());
    let total: f64 = e.iter().sum();
    e.map(|x| x / total)
}

fn softmax_unchecked(logits: &[f64; 3], temperature: f64) -> ActionDistribution {
    ActionDistribution {
        p: softmax_probs(logits, temperature),
    }
}

/// The lexicographic list of the nine trajectories, `(purple, purple)` first.
pub fn enumerate_trajectories() -> [Trajectory; 9] {
    std::array::from_fn(|i| Trajectory::from_index(i).expect("index < 9"))
}

/// Softmax policy over two consecutive picks.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    pub first_logits: [f64; 3],
    /// Row = observed first pick, column = second pick.
    pub second_logits: [[f64; 3]; 3],
    temperature: f64,
}

impl Default for PolicyTable {
    fn default() -> Self {
        PolicyTable {
            first_logits: [0.0; 3],
            second_logits: [[0.0; 3]; 3],
            temperature: 1.0,
        }
    }
}

impl PolicyTable {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    /// A table that puts (nearly) all of its mass on `traj`.
    pub fn one_hot(traj: Trajectory, strength: f64) -> Self {
        let mut t = Self::default();
        t.first_logits[traj.first.index()] = strength;
        for row in &mut t.second_logits {
            row[traj.second.index()] = strength;
        }
        t
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .first_logits
            .iter()
            .chain(self.second_logits.iter().flatten())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "policy logits must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn first_dist(&self) -> ActionDistribution {
        softmax_unchecked(&self.first_logits, self.temperature)
    }

    pub fn second_dist(&self, first: BallColor) -> ActionDistribution {
        softmax_unchecked(&self.second_logits[first.index()], self.temperature)
    }

    pub fn trajectory_prob(&self, traj: Trajectory) -> f64 {
        self.first_dist().prob(traj.first) * self.second_dist(traj.first).prob(traj.second)
    }

    /// Probabilities of all nine trajectories in enumeration order.
    pub fn trajectory_probs(&self) -> [f64; 9] {
        let first = self.first_dist();
        let seconds = BallColor::ALL.map(|c| self.second_dist(c));
        std::array::from_fn(|i| {
            let t = Trajectory::from_index(i).expect("index < 9");
            first.prob(t.first) * seconds[t.first.index()].prob(t.second)
        })
    }

    pub fn sample_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let first = self.first_dist().sample(rng);
        let second = self.second_dist(first).sample(rng);
        Trajectory::new(first, second)
    }

    /// Most probable trajectory. Ties go to the lexicographically first.
    pub fn greedy_trajectory(&self) -> Trajectory {
        let probs = self.trajectory_probs();
        Trajectory::from_index(argmax(&probs)).expect("index < 9")
    }

    pub fn expected_reward(&self, reward_fn: impl Fn(Trajectory) -> f64) -> f64 {
        self.trajectory_probs()
            .iter()
            .zip(enumerate_trajectories())
            .map(|(p, t)| p * reward_fn(t))
            .sum()
    }
}

/// One [`PolicyTable`] per goal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoalConditionedPolicy {
    tables: [PolicyTable; 3],
}

impl GoalConditionedPolicy {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn from_tables(tables: [PolicyTable; 3]) -> Result<Self> {
        for t in &tables {
            t.validate()?;
        }
        Ok(GoalConditionedPolicy { tables })
    }

    pub fn table(&self, g: Goal) -> &PolicyTable {
        &self.tables[g.index()]
    }

    pub fn table_mut(&mut self, g: Goal) -> &mut PolicyTable {
        &mut self.tables[g.index()]
    }

    pub fn set_table(&mut self, g: Goal, table: PolicyTable) {
        self.tables[g.index()] = table;
    }

    pub fn sample_trajectory<R: Rng + ?Sized>(&self, g: Goal, rng: &mut R) -> Trajectory {
        self.table(g).sample_trajectory(rng)
    }

    pub fn trajectory_prob(&self, g: Goal, traj: Trajectory) -> f64 {
        self.table(g).trajectory_prob(traj)
    }

    pub fn expected_reward(&self, g: Goal, reward_fn: impl Fn(Trajectory) -> f64) -> f64 {
        self.table(g).expected_reward(reward_fn)
    }

    pub fn greedy_trajectory(&self, g: Goal) -> Trajectory {
        self.table(g).greedy_trajectory()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{outcome, BallColor::*};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[0.0; 3], 1.0).unwrap();
        assert!(u.probs().iter().all(|&p| close(p, 1.0 / 3.0, 1e-15)));
        let c = softmax(&[7.5; 3], 1.0).unwrap();
        assert!(c.probs().iter().all(|&p| close(p, 1.0 / 3.0, 1e-15)));
        // exp(ln 2) = 2 against 1 and 1.
        let h = softmax(&[2f64.ln(), 0.0, 0.0], 1.0).unwrap();
        assert!(close(h.prob(Purple), 0.5, 1e-12));
        assert!(close(h.prob(Orange), 0.25, 1e-12));
        assert!(close(h.prob(Pink), 0.25, 1e-12));
    }

    #[test]
    fn softmax_rejects_bad_inputs() {
        assert!(softmax(&[f64::NAN, 0.0, 0.0], 1.0).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0, 0.0], 1.0).is_err());
        assert!(softmax(&[0.0; 3], 0.0).is_err());
        assert!(softmax(&[0.0; 3], -1.0).is_err());
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let d = softmax(&[1000.0, 999.0, -1000.0], 1.0).unwrap();
        assert!(d.probs().iter().all(|p| p.is_finite()));
        assert!(close(
            d.prob(Purple) + d.prob(Orange) + d.prob(Pink),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn enumeration_order() {
        let all = enumerate_trajectories();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], Trajectory::new(Purple, Purple));
        assert_eq!(all[5], Trajectory::new(Orange, Pink));
        assert_eq!(all[8], Trajectory::new(Pink, Pink));
    }

    #[test]
    fn trajectory_prob_examples() {
        let pol = GoalConditionedPolicy::uniform();
        for t in enumerate_trajectories() {
            assert!(close(pol.trajectory_prob(Goal::Goal1, t), 1.0 / 9.0, 1e-15));
        }

        let hot = PolicyTable::one_hot(Trajectory::new(Pink, Orange), 50.0);
        assert!(close(
            hot.trajectory_prob(Trajectory::new(Pink, Orange)),
            1.0,
            1e-6
        ));

        // First pick from (ln 2, 0, 0) and second from the same row shape:
        // 0.5 for purple-then-purple times 0.5 = 0.25; orange-then-pink 0.25 * 0.25.
        let mut t = PolicyTable::uniform();
        t.first_logits = [2f64.ln(), 0.0, 0.0];
        t.second_logits = [[2f64.ln(), 0.0, 0.0]; 3];
        assert!(close(
            t.trajectory_prob(Trajectory::new(Purple, Purple)),
            0.25,
            1e-12
        ));
        assert!(close(
            t.trajectory_prob(Trajectory::new(Orange, Pink)),
            0.0625,
            1e-12
        ));
    }

    #[test]
    fn expected_reward_by_enumeration() {
        let pol = GoalConditionedPolicy::uniform();
        let g1 = pol.expected_reward(Goal::Goal1, |t| {
            outcome(t).contains(Goal::Goal1) as u8 as f64
        });
        let g2 = pol.expected_reward(Goal::Goal1, |t| {
            outcome(t).contains(Goal::Goal2) as u8 as f64
        });
        assert!(close(g1, 3.0 / 9.0, 1e-15));
        assert!(close(g2, 1.0 / 9.0, 1e-15));
        let mut t = PolicyTable::uniform();
        t.first_logits = [0.3, -1.2, 2.0];
        assert!(close(t.expected_reward(|_| 1.0), 1.0, 1e-12));
    }

    #[test]
    fn greedy_examples() {
        let hot = PolicyTable::one_hot(Trajectory::new(Orange, Pink), 50.0);
        assert_eq!(hot.greedy_trajectory(), Trajectory::new(Orange, Pink));
        assert_eq!(
            PolicyTable::uniform().greedy_trajectory(),
            Trajectory::new(Purple, Purple)
        );

        // 0.6 on (pink, orange): first-pick pink 0.6, then orange for sure.
        let mut t = PolicyTable::uniform();
        t.first_logits = [0.0, 0.0, (0.6f64 / 0.2).ln()];
        t.second_logits[Pink.index()] = [-60.0, 0.0, -60.0];
        assert!(close(
            t.trajectory_prob(Trajectory::new(Pink, Orange)),
            0.6,
            1e-9
        ));
        assert_eq!(t.greedy_trajectory(), Trajectory::new(Pink, Orange));
    }

    #[test]
    fn one_hot_sampling_is_degenerate() {
        let hot = PolicyTable::one_hot(Trajectory::new(Purple, Purple), 50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(
                hot.sample_trajectory(&mut rng),
                Trajectory::new(Purple, Purple)
            );
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let pol = GoalConditionedPolicy::uniform();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 9];
        let n = 90_000;
        for _ in 0..n {
            counts[pol.sample_trajectory(Goal::NoGoal, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!(close(c as f64 / n as f64, 1.0 / 9.0, 0.01));
        }
    }

    #[test]
    fn sampling_matches_exact_probabilities() {
        let mut t = PolicyTable::uniform();
        t.first_logits = [0.5, -0.3, 1.1];
        t.second_logits = [[0.2, 0.0, -1.0], [1.5, 0.4, 0.0], [-0.7, 0.9, 0.1]];
        let exact = t.trajectory_probs();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 9];
        let n = 100_000;
        for _ in 0..n {
            counts[t.sample_trajectory(&mut rng).index()] += 1;
        }
        for (c, p) in counts.iter().zip(exact) {
            assert!(close(*c as f64 / n as f64, p, 0.01));
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let pol = GoalConditionedPolicy::uniform();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| pol.sample_trajectory(Goal::Goal2, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn temperature_validation() {
        assert!(PolicyTable::uniform().with_temperature(0.0).is_err());
        let t = PolicyTable::uniform().with_temperature(2.0).unwrap();
        assert_eq!(t.temperature(), 2.0);
        let mut bad = PolicyTable::uniform();
        bad.first_logits[0] = f64::NAN;
        assert!(GoalConditionedPolicy::from_tables([
            bad,
            PolicyTable::uniform(),
            PolicyTable::uniform()
        ])
        .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn table() -> impl Strategy<Value = PolicyTable> {
            (
                prop::array::uniform3(-20.0f64..20.0),
                prop::array::uniform3(prop::array::uniform3(-20.0f64..20.0)),
                0.1f64..5.0,
            )
                .prop_map(|(first, second, temp)| {
                    let mut t = PolicyTable::uniform().with_temperature(temp).unwrap();
                    t.first_logits = first;
                    t.second_logits = second;
                    t
                })
        }

        proptest! {
            #[test]
            fn trajectory_probs_sum_to_one(t in table()) {
                let total: f64 = t.trajectory_probs().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }

            #[test]
            fn softmax_shift_invariant(l in prop::array::uniform3(-50.0f64..50.0), c in -100.0f64..100.0) {
                let a = softmax(&l, 1.0).unwrap();
                let b = softmax(&l.map(|x| x + c), 1.0).unwrap();
                for (x, y) in a.probs().iter().zip(b.probs()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }

            #[test]
            fn greedy_shift_invariant(t in table(), c in -10.0f64..10.0) {
                let mut shifted = t.clone();
                shifted.first_logits = shifted.first_logits.map(|x| x + c);
                for row in &mut shifted.second_logits {
                    *row = row.map(|x| x + c);
                }
                prop_assert_eq!(t.greedy_trajectory(), shifted.greedy_trajectory());
            }
        }
    }
}
