use tadam::harness::{regret_problem, run_regret_suite, Experiment, ExperimentConfig};
use tadam::verify::regret::grid_best_fixed;

fn config(outlier_prob: f64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: Experiment::Regret,
        seeds: (0..5).collect(),
        regret_horizon: 4000,
        regret_outlier_prob: outlier_prob,
        ..ExperimentConfig::default()
    }
}

#[test]
fn tadam_clean_regret_beats_adam_under_outliers() {
    let traces = run_regret_suite(&config(0.05)).unwrap();
    for pair in traces.chunks(2) {
        let (t, a) = (&pair[0], &pair[1]);
        assert_eq!(t.optimizer, "tamsgrad");
        assert_eq!(a.optimizer, "amsgrad");
        assert_eq!(t.seed, a.seed);
        assert!(
            t.final_clean_regret() < a.final_clean_regret(),
            "seed {}: {} vs {}",
            t.seed,
            t.final_clean_regret(),
            a.final_clean_regret()
        );
    }
}

#[test]
fn without_outliers_clean_and_observed_regret_agree() {
    for tr in run_regret_suite(&config(0.0)).unwrap() {
        assert_eq!(tr.cumulative_regret, tr.clean_regret);
    }
}

#[test]
fn iterates_stay_in_box_and_grid_agrees_with_clamped_mean() {
    let cfg = config(0.05);
    let problem = regret_problem(&cfg);
    for tr in run_regret_suite(&cfg).unwrap() {
        assert!(tr.theta_final.iter().all(|&x| (problem.lower..=problem.upper).contains(&x)));
        let (observed, _) = problem.centers(tr.seed);
        let mean = observed.iter().map(|c| c[0]).sum::<f64>() / observed.len() as f64;
        let best = mean.clamp(problem.lower, problem.upper);
        let exact: f64 = observed.iter().map(|c| problem.curvature * (best - c[0]).powi(2)).sum();
        let (theta, grid) = grid_best_fixed(&problem, &observed, 4001);
        let step = problem.diameter() / 4000.0;
        assert!(grid >= exact - 1e-9 * exact);
        assert!(grid - exact <= problem.curvature * step * step * observed.len() as f64);
        assert!((theta[0] - best).abs() <= step);
    }
}
