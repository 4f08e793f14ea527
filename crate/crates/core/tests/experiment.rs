use pedagogy::env::{BallColor::*, Goal, Trajectory};
use pedagogy::experiment::{
    demo_stream, evaluate, grid_experiment, run_condition, train_run_tutor, Condition, RunConfig,
    Settings,
};
use pedagogy::learner::{LearnerMode, LearnerState};
use pedagogy::policy::{GoalConditionedPolicy, PolicyTable};
use pedagogy::tutor::TutorMode;

fn small() -> Settings {
    let mut s = Settings::default();
    s.tutor.episodes = 3_000;
    s.experiment.episodes = 1_000;
    s.experiment.eval_period = 100;
    s.experiment.eval_window = 30;
    s
}

/// A tutor whose greedy demonstrations are unambiguous.
fn oracle_tutor() -> GoalConditionedPolicy {
    GoalConditionedPolicy::from_tables([
        PolicyTable::one_hot(Trajectory::new(Purple, Purple), 30.0),
        PolicyTable::one_hot(Trajectory::new(Pink, Orange), 30.0),
        PolicyTable::one_hot(Trajectory::new(Orange, Pink), 30.0),
    ])
    .unwrap()
}

#[test]
fn evaluation_schedule_is_arithmetic() {
    let s = small();
    let cfg = RunConfig {
        condition: Condition::ALL[2],
        seed: 0,
        settings: s,
    };
    let run = run_condition(&cfg, &oracle_tutor()).unwrap();
    let eps: Vec<usize> = run.series.points.iter().map(|p| p.episode).collect();
    assert_eq!(eps, (0..=10).map(|k| k * 100).collect::<Vec<_>>());
    assert_eq!(run.records.len(), 1_000);
    for p in &run.series.points {
        assert!((0.0..=1.0).contains(&p.predictability) && (0.0..=1.0).contains(&p.reachability));
    }
}

#[test]
fn oracle_learner_scores_one() {
    let tutor = oracle_tutor();
    let s = Settings::default();
    let mut learner = LearnerState::new(LearnerMode::Literal, s.learner, &s.bucket_prior).unwrap();
    for g in Goal::ALL {
        let demo = tutor.greedy_trajectory(g);
        learner.prediction.logits[demo.index()] = [0.0; 3];
        learner.prediction.logits[demo.index()][g.index()] = 10.0;
    }
    learner.policy = tutor.clone();
    let probes = evaluate(&learner, &tutor, 0, 61);
    assert!(probes
        .iter()
        .all(|r| r.predicted_correctly() && r.reached_desired()));
}

#[test]
fn probe_goals_are_balanced() {
    let learner = LearnerState::new(
        LearnerMode::Literal,
        Default::default(),
        &Default::default(),
    )
    .unwrap();
    for window in [1, 2, 3, 4, 59, 60, 61] {
        let probes = evaluate(&learner, &oracle_tutor(), 0, window);
        let counts = Goal::ALL.map(|g| probes.iter().filter(|r| r.desired == g).count());
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "window {window}: {counts:?}");
    }
}

#[test]
fn evaluation_leaves_learner_untouched() {
    let s = small();
    let tutor = train_run_tutor(&s, TutorMode::Pedagogical, 4).unwrap();
    let mut learner =
        LearnerState::new(LearnerMode::Pragmatic, s.learner, &s.bucket_prior).unwrap();
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let rng: &mut rand_chacha::ChaCha8Rng = &mut rng;
    for (i, demo) in demo_stream(&tutor, &s, 4).take(300).enumerate() {
        learner.learner_episode(i, &demo, rng);
        if i % 50 == 0 {
            let before = learner.clone();
            evaluate(&learner, &tutor, i, 60);
            assert_eq!(learner, before);
        }
    }
}

#[test]
fn learner_modes_see_the_same_demonstrations() {
    let s = small();
    let tutor = train_run_tutor(&s, TutorMode::Naive, 2).unwrap();
    let run = |learner| {
        let cfg = RunConfig {
            condition: Condition::new(TutorMode::Naive, learner),
            seed: 2,
            settings: s,
        };
        run_condition(&cfg, &tutor).unwrap()
    };
    let lit = run(LearnerMode::Literal);
    let prag = run(LearnerMode::Pragmatic);
    let demos = |r: &pedagogy::experiment::RunResult| {
        r.records
            .iter()
            .map(|x| (x.desired, x.demo))
            .collect::<Vec<_>>()
    };
    assert_eq!(demos(&lit), demos(&prag));
    assert!(lit.records.iter().all(|r| !r.detector_event));
}

#[test]
fn grid_has_every_condition_and_seed_and_is_repeatable() {
    let s = small();
    let seeds = [0, 1, 2];
    let a = grid_experiment(&s, &seeds, 3).unwrap();
    assert_eq!(a.runs.len(), 12);
    assert_eq!(a.tutors.len(), 6);
    let by = a.series_by_condition();
    assert_eq!(by.len(), 4);
    assert!(by.values().all(|v| v.len() == 3));

    let b = grid_experiment(&s, &seeds, 1).unwrap();
    let series = |g: &pedagogy::GridResults| g.all_series().cloned().collect::<Vec<_>>();
    assert_eq!(series(&a), series(&b));
    for (k, run) in &a.runs {
        assert_eq!(run.records, b.runs[k].records);
    }
    assert!(grid_experiment(&s, &[], 1).is_err());
}

#[test]
fn runs_with_the_same_seed_repeat() {
    let s = small();
    let tutor = train_run_tutor(&s, TutorMode::Pedagogical, 7).unwrap();
    let cfg = RunConfig {
        condition: Condition::ALL[3],
        seed: 7,
        settings: s,
    };
    let a = run_condition(&cfg, &tutor).unwrap();
    let b = run_condition(&cfg, &tutor).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.series, b.series);
    assert_eq!(a.learner, b.learner);
}
