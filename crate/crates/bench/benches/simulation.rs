use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pedagogy::env::{goal_satisfied, outcome, BucketPrior, Goal};
use pedagogy::experiment::{demo_stream, grid_experiment, train_run_tutor, Settings};
use pedagogy::optimize::{es_step, exact_gradient, EsConfig};
use pedagogy::tutor::{sequential_predict_goal, train_tutor, GoalPrior, LiteralObserver};
use pedagogy::{GoalConditionedPolicy, LearnerMode, LearnerState, TutorConfig, TutorMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn goal2(t: pedagogy::Trajectory) -> f64 {
    f64::from(goal_satisfied(Goal::Goal2, outcome(t)))
}

fn gradients(c: &mut Criterion) {
    let pol = GoalConditionedPolicy::uniform();
    c.bench_function("exact_gradient", |b| {
        b.iter(|| exact_gradient(black_box(&pol), Goal::Goal2, goal2))
    });
    let cfg = EsConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    c.bench_function("es_step_exact_fitness", |b| {
        b.iter(|| {
            es_step(
                black_box(&pol),
                Goal::Goal2,
                |_, t| goal2(t),
                &cfg,
                &mut rng,
            )
            .unwrap()
        })
    });
}

fn tutor(c: &mut Criterion) {
    let observer = LiteralObserver::new(&BucketPrior::default());
    let pol = GoalConditionedPolicy::uniform();
    let prior = GoalPrior::default();
    let t = pedagogy::Trajectory::from_index(7).unwrap();
    c.bench_function("sequential_predict_goal", |b| {
        b.iter(|| sequential_predict_goal(black_box(&pol), &observer, t, &prior))
    });

    let mut group = c.benchmark_group("train_tutor_2000_episodes");
    for mode in TutorMode::ALL {
        let cfg = TutorConfig {
            mode,
            episodes: 2_000,
            ..Default::default()
        };
        group.bench_function(mode.name(), |b| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(1);
                train_tutor(&cfg, &BucketPrior::default(), &mut rng).unwrap()
            })
        });
    }
    group.finish();
}

fn learner(c: &mut Criterion) {
    let settings = Settings::default();
    let tutor = train_run_tutor(&settings, TutorMode::Pedagogical, 0).unwrap();
    let demos: Vec<_> = demo_stream(&tutor, &settings, 0).take(1_000).collect();
    c.bench_function("learner_1000_episodes", |b| {
        b.iter(|| {
            let mut l = LearnerState::new(
                LearnerMode::Pragmatic,
                settings.learner,
                &settings.bucket_prior,
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for (i, d) in demos.iter().enumerate() {
                black_box(l.learner_episode(i, d, &mut rng));
            }
            l
        })
    });
}

fn grid(c: &mut Criterion) {
    let mut settings = Settings::default();
    settings.experiment.episodes = 2_000;
    settings.tutor.episodes = 5_000;
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    group.bench_function("one_seed_small", |b| {
        b.iter(|| grid_experiment(&settings, &[0], 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, gradients, tutor, learner, grid);
criterion_main!(benches);
