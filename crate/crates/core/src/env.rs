//! The "draw two balls" environment.
//!
//! An episode is two consecutive picks from a bucket of purple, orange and
//! pink balls. Goal 1 is reached by (orange, orange), (pink, orange) and
//! (orange, pink); the last of these also reaches goal 2. Every other pair
//! reaches nothing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BallColor {
    Purple,
    Orange,
    Pink,
}

impl BallColor {
    pub const ALL: [BallColor; 3] = [BallColor::Purple, BallColor::Orange, BallColor::Pink];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<BallColor> {
        Self::ALL.get(i).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            BallColor::Purple => "purple",
            BallColor::Orange => "orange",
            BallColor::Pink => "pink",
        }
    }
}

impl fmt::Display for BallColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BallColor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ball color `{s}`")))
    }
}

/// One episode's actions: the first and second ball drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    pub first: BallColor,
    pub second: BallColor,
}

impl Trajectory {
    pub const fn new(first: BallColor, second: BallColor) -> Self {
        Trajectory { first, second }
    }

    /// Position in the lexicographic enumeration of all nine trajectories.
    pub const fn index(self) -> usize {
        self.first.index() * 3 + self.second.index()
    }

    pub fn from_index(i: usize) -> Option<Trajectory> {
        if i >= 9 {
            return None;
        }
        Some(Trajectory::new(
            BallColor::ALL[i / 3],
            BallColor::ALL[i % 3],
        ))
    }

    pub fn purple_count(self) -> usize {
        [self.first, self.second]
            .iter()
            .filter(|&&c| c == BallColor::Purple)
            .count()
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Goal {
    NoGoal,
    Goal1,
    Goal2,
}

impl Goal {
    pub const ALL: [Goal; 3] = [Goal::NoGoal, Goal::Goal1, Goal::Goal2];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Goal> {
        Self::ALL.get(i).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Goal::NoGoal => "none",
            Goal::Goal1 => "g1",
            Goal::Goal2 => "g2",
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown goal `{s}`")))
    }
}

/// The set of goals a trajectory achieves. Only `Goal1` and `Goal2` can be
/// members; "no goal" is the empty set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OutcomeSet {
    goal1: bool,
    goal2: bool,
}

impl OutcomeSet {
    pub const EMPTY: OutcomeSet = OutcomeSet {
        goal1: false,
        goal2: false,
    };

    pub fn contains(self, g: Goal) -> bool {
        match g {
            Goal::NoGoal => false,
            Goal::Goal1 => self.goal1,
            Goal::Goal2 => self.goal2,
        }
    }

    pub fn is_empty(self) -> bool {
        !self.goal1 && !self.goal2
    }

    pub fn len(self) -> usize {
        self.goal1 as usize + self.goal2 as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Goal> {
        [Goal::Goal1, Goal::Goal2]
            .into_iter()
            .filter(move |&g| self.contains(g))
    }
}

impl fmt::Display for OutcomeSet {
    /// `none`, `g1`, `g2` or `g1+g2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.goal1, self.goal2) {
            (false, false) => f.write_str("none"),
            (true, false) => f.write_str("g1"),
            (false, true) => f.write_str("g2"),
            (true, true) => f.write_str("g1+g2"),
        }
    }
}

pub fn outcome(traj: Trajectory) -> OutcomeSet {
    use BallColor::*;
    match (traj.first, traj.second) {
        (Orange, Orange) | (Pink, Orange) => OutcomeSet {
            goal1: true,
            goal2: false,
        },
        (Orange, Pink) => OutcomeSet {
            goal1: true,
            goal2: true,
        },
        _ => OutcomeSet::EMPTY,
    }
}

/// Whether `o` counts as achieving `g`: membership for the real goals,
/// emptiness for `NoGoal`.
pub fn goal_satisfied(g: Goal, o: OutcomeSet) -> bool {
    match g {
        Goal::NoGoal => o.is_empty(),
        _ => o.contains(g),
    }
}

/// Proportions of each color in the bucket. Purple must be the most common.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BucketPriorRepr", into = "BucketPriorRepr")]
pub struct BucketPrior {
    p: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BucketPriorRepr {
    purple: f64,
    orange: f64,
    pink: f64,
}

impl TryFrom<BucketPriorRepr> for BucketPrior {
    type Error = Error;

    fn try_from(r: BucketPriorRepr) -> Result<Self> {
        BucketPrior::new(r.purple, r.orange, r.pink)
    }
}

impl From<BucketPrior> for BucketPriorRepr {
    fn from(b: BucketPrior) -> Self {
        BucketPriorRepr {
            purple: b.p[0],
            orange: b.p[1],
            pink: b.p[2],
        }
    }
}

impl BucketPrior {
    pub fn new(purple: f64, orange: f64, pink: f64) -> Result<Self> {
        let p = [purple, orange, pink];
        if p.iter().any(|x| !x.is_finite() || !(0.0..=1.0).contains(x)) {
            return Err(Error::config(
                "bucket_prior",
                format!("probabilities must lie in [0, 1], got {p:?}"),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "bucket_prior",
                format!("probabilities must sum to 1, got {total}"),
            ));
        }
        if purple <= orange || purple <= pink {
            return Err(Error::config(
                "bucket_prior",
                "purple must be strictly more likely than orange and pink",
            ));
        }
        Ok(BucketPrior { p })
    }

    pub fn prob(&self, c: BallColor) -> f64 {
        self.p[c.index()]
    }
}

impl Default for BucketPrior {
    fn default() -> Self {
        BucketPrior {
            p: [0.5, 0.25, 0.25],
        }
    }
}

/// Probability of `traj` under two independent draws from the bucket.
pub fn prior_trajectory_prob(prior: &BucketPrior, traj: Trajectory) -> f64 {
    prior.prob(traj.first) * prior.prob(traj.second)
}
