//! Experiment-harness behavior over realistic grids: the n x MSE plateau
//! of consistent estimators, runtime monotonicity in n, and failure
//! accounting.

use std::sync::Mutex;

use rbcml::eval::{run_experiment, EstimatorSpec, ExperimentConfig, FamilySpec};

// Both tests drive the shared rayon pool; run them one at a time so the
// per-trial wallclock measurements are not contaminated by each other.
static POOL: Mutex<()> = Mutex::new(());

fn uniform_rbcml(name: &str) -> EstimatorSpec {
    EstimatorSpec::Rbcml {
        iterations: 1,
        breaking: "uniform".into(),
        weights: "uniform".into(),
        name: Some(name.into()),
    }
}

#[test]
fn n_mse_plateaus_for_consistent_estimators() {
    let _guard = POOL.lock().unwrap();
    for (family, label) in
        [(FamilySpec::Pl, "pl"), (FamilySpec::Gaussian { scales: None }, "gaussian")]
    {
        let cfg = ExperimentConfig {
            family,
            m: 5,
            n_grid: vec![200, 1000, 5000],
            trials: 200,
            seed: 31300,
            estimator: uniform_rbcml(label),
            theta0: None,
            fit_options: None,
            output: None,
            jsonl: None,
        };
        let outcome = run_experiment(&cfg).unwrap();
        let rows = &outcome.rows;
        assert!(rows.iter().all(|r| r.failures == 0));
        let (mid, big) = (rows[1].n_mse_mean, rows[2].n_mse_mean);
        println!(
            "{label}: n*MSE at n=200/1000/5000 = {:.3}/{:.3}/{:.3}",
            rows[0].n_mse_mean, mid, big
        );
        assert!(big < 2.0 * mid && big > mid / 2.0, "{label}: {big} vs {mid}");

        // Runtime (kappa accumulation plus the fit) grows with n. Compare
        // across the widest span with slack: concurrent tests share the
        // thread pool, which makes adjacent-n timings noisy.
        assert!(rows[2].runtime_mean_s > rows[0].runtime_mean_s);
        assert!(rows[2].runtime_mean_s >= 0.5 * rows[1].runtime_mean_s);
    }
}

#[test]
fn failed_trials_are_counted_and_excluded() {
    let _guard = POOL.lock().unwrap();
    // m = 2 with only a few rankings per trial: some profiles are
    // one-sided, where the maximizer is unbounded. A tight parameter bound
    // turns those into divergence failures.
    let cfg = ExperimentConfig {
        family: FamilySpec::Pl,
        m: 2,
        n_grid: vec![3],
        trials: 60,
        seed: 12,
        estimator: uniform_rbcml("tiny"),
        theta0: Some(vec![0.4, 0.0]),
        fit_options: Some(rbcml::cml::FitOptions { bound: 8.0, ..Default::default() }),
        output: None,
        jsonl: None,
    };
    let outcome = run_experiment(&cfg).unwrap();
    let row = &outcome.rows[0];
    assert!(row.failures > 0, "expected some one-sided profiles to diverge");
    assert!(row.failures < 60, "expected some profiles to fit");
    assert_eq!(outcome.trials.len() + row.failures, 60);
    assert!(row.n_mse_mean.is_finite());
}
