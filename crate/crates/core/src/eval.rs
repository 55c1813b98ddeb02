//! Experiment harness: n x MSE curves over synthetic data, the full
//! Plackett-Luce maximum-likelihood baseline, and the Cramer-Rao reference
//! computed from the exact Fisher information.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::adaptive::{adaptive_rbcml, AdaptiveConfig, BreakingHeuristic, WeightHeuristic};
use crate::breaking::{BreakingGraph, EXACT_KAPPA_MAX_M};
use crate::cml::{CmlWeights, FitOptions, FitResult};
use crate::consistency::mse;
use crate::error::{Error, Result};
use crate::model::{all_rankings, log_ranking_prob_pl, Profile, Ranking, Theta, UtilityFamily};
use crate::newton::{self, Objective};
use crate::sampling::{derive_stream, sample_ground_truth, sample_profile, sample_ranking, SeededRng};

/// n times the mean squared error over gauge-fixed coordinates.
pub fn n_mse(estimate: &Theta, truth: &Theta, n: usize) -> Result<f64> {
    Ok(n as f64 * mse(estimate, truth)?)
}

/// Per-alternative Plackett-Luce score: gradient of ln Pr(R | theta) over
/// all m coordinates.
fn pl_score(theta: &Theta, r: &Ranking) -> Vec<f64> {
    let m = r.m();
    let order = r.order();
    // Suffix sums of e^theta, shifted by the max for stability.
    let max_t = theta.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = order.iter().map(|&a| (theta.get(a) - max_t).exp()).collect();
    let mut suffix = vec![0.0; m];
    let mut acc = 0.0;
    for t in (0..m).rev() {
        acc += e[t];
        suffix[t] = acc;
    }
    let mut score = vec![0.0; m];
    for (pos, &alt) in order.iter().enumerate() {
        if pos < m - 1 {
            score[alt] += 1.0;
        }
        let stages = pos.min(m - 2);
        for t in 0..=stages {
            score[alt] -= e[pos] / suffix[t];
        }
    }
    score
}

/// Exact single-observation Fisher information of the gauge-fixed PL model,
/// by enumeration of all m! rankings (m <= 8).
pub fn fisher_information_pl(theta0: &Theta) -> Result<DMatrix<f64>> {
    let m = theta0.m();
    if m > EXACT_KAPPA_MAX_M {
        return Err(Error::ExactModeTooLarge { m, max: EXACT_KAPPA_MAX_M });
    }
    let d = m - 1;
    let mut info = DMatrix::zeros(d, d);
    for r in all_rankings(m) {
        let p = log_ranking_prob_pl(theta0, &r).exp();
        let s = pl_score(theta0, &r);
        let sv = DVector::from_iterator(d, s[..d].iter().cloned());
        info += p * &sv * sv.transpose();
    }
    Ok(info)
}

/// Monte-Carlo estimate of the same information matrix from sampled
/// rankings (the score has mean zero, so this is the raw second moment).
pub fn fisher_information_pl_mc(
    theta0: &Theta,
    samples: usize,
    rng: &mut SeededRng,
) -> DMatrix<f64> {
    let m = theta0.m();
    let d = m - 1;
    let family = UtilityFamily::plackett_luce();
    let mut info = DMatrix::zeros(d, d);
    for _ in 0..samples {
        let r = sample_ranking(&family, theta0, rng);
        let s = pl_score(theta0, &r);
        let sv = DVector::from_iterator(d, s[..d].iter().cloned());
        info += &sv * sv.transpose();
    }
    info / samples as f64
}

/// The Cramer-Rao reference: trace of the inverse single-observation Fisher
/// information. With `normalize`, divided by m-1 to match the coordinate
/// averaging in [`n_mse`]. Flat in n by construction.
pub fn cramer_rao_trace_pl(theta0: &Theta, normalize: bool) -> Result<f64> {
    let info = fisher_information_pl(theta0)?;
    let inv = info.try_inverse().ok_or(Error::SingularInformation)?;
    let trace = inv.trace();
    if normalize {
        Ok(trace / (theta0.m() - 1) as f64)
    } else {
        Ok(trace)
    }
}

/// Full Plackett-Luce log-likelihood objective over grouped rankings.
///
/// Works with the mean log-likelihood so the optimizer sees the same scale
/// regardless of n (group weights sum to 1); the reported objective is
/// rescaled back to the total.
struct PlMleObjective {
    m: usize,
    groups: Vec<(Ranking, f64)>,
}

impl PlMleObjective {
    fn from_profile(profile: &Profile) -> Self {
        // Collapsing duplicate rankings makes each Newton pass O(min(n, m!)).
        let mut counts: std::collections::HashMap<&Ranking, f64> = std::collections::HashMap::new();
        for r in profile.rankings() {
            *counts.entry(r).or_default() += 1.0;
        }
        let n = profile.n() as f64;
        let mut groups: Vec<(Ranking, f64)> =
            counts.into_iter().map(|(r, c)| (r.clone(), c / n)).collect();
        groups.sort_by(|a, b| a.0.order().cmp(b.0.order()));
        Self { m: profile.m(), groups }
    }
}

impl Objective for PlMleObjective {
    fn dim(&self) -> usize {
        self.m - 1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let theta = Theta::from_free(x).expect("finite");
        self.groups
            .iter()
            .map(|(r, c)| c * log_ranking_prob_pl(&theta, r))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let theta = Theta::from_free(x).expect("finite");
        let mut grad = vec![0.0; self.m];
        for (r, c) in &self.groups {
            for (g, s) in grad.iter_mut().zip(pl_score(&theta, r)) {
                *g += c * s;
            }
        }
        grad.pop();
        grad
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let theta = Theta::from_free(x).expect("finite");
        let m = self.m;
        let mut hess = DMatrix::zeros(m, m);
        for (r, c) in &self.groups {
            let order = r.order();
            let max_t = theta.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = order.iter().map(|&a| (theta.get(a) - max_t).exp()).collect();
            let mut suffix = vec![0.0; m];
            let mut acc = 0.0;
            for t in (0..m).rev() {
                acc += e[t];
                suffix[t] = acc;
            }
            // Each stage contributes -(diag(q) - q q^T) over its suffix set.
            for t in 0..m - 1 {
                for a_pos in t..m {
                    let qa = e[a_pos] / suffix[t];
                    let ia = order[a_pos];
                    hess[(ia, ia)] -= c * qa * (1.0 - qa);
                    for b_pos in t..m {
                        if a_pos != b_pos {
                            let qb = e[b_pos] / suffix[t];
                            hess[(ia, order[b_pos])] += c * qa * qb;
                        }
                    }
                }
            }
        }
        hess.view((0, 0), (m - 1, m - 1)).into()
    }
}

/// Maximize the exact Plackett-Luce log-likelihood: the statistical
/// efficiency reference the CML estimators are compared against.
pub fn pl_full_mle(profile: &Profile, opts: &FitOptions) -> Result<FitResult> {
    let obj = PlMleObjective::from_profile(profile);
    let start = Instant::now();
    let out = newton::maximize(&obj, Theta::zeros(profile.m()).free(), opts)?;
    Ok(FitResult {
        theta: Theta::from_free(&out.x)?,
        // Total log-likelihood; the optimizer works with the mean.
        objective: out.value * profile.n() as f64,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        converged: out.converged,
        wallclock_s: start.elapsed().as_secs_f64(),
    })
}

/// Family selection in experiment configs.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    Pl,
    Gaussian {
        #[serde(default)]
        scales: Option<Vec<f64>>,
    },
}

impl FamilySpec {
    pub fn build(&self, m: usize) -> Result<UtilityFamily> {
        match self {
            Self::Pl => Ok(UtilityFamily::plackett_luce()),
            Self::Gaussian { scales: None } => Ok(UtilityFamily::gaussian_unit(m)),
            Self::Gaussian { scales: Some(s) } => {
                if s.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, actual: s.len() });
                }
                UtilityFamily::gaussian(s.clone())
            }
        }
    }
}

/// Parse a breaking spec: `uniform`, `position:<k>`,
/// `position-union:<a1,...>`, or a path to a breaking-graph file.
pub fn parse_breaking_spec(spec: &str) -> Result<BreakingHeuristic> {
    if spec == "uniform" {
        return Ok(BreakingHeuristic::Uniform);
    }
    if let Some(rest) = spec.strip_prefix("position-union:") {
        let alphas: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad position-union coefficients `{rest}`")))?;
        return Ok(BreakingHeuristic::PositionUnion(alphas));
    }
    if let Some(rest) = spec.strip_prefix("position:") {
        let k: usize = rest
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad position `{rest}`")))?;
        if k == 0 {
            return Err(Error::Parse("positions are 1-based".into()));
        }
        return Ok(BreakingHeuristic::Custom(std::sync::Arc::new(move |t: &Theta| {
            crate::breaking::position_k_breaking(t.m(), k)
        })));
    }
    if std::path::Path::new(spec).exists() {
        let text = std::fs::read_to_string(spec)?;
        return Ok(BreakingHeuristic::Fixed(BreakingGraph::from_text(&text)?));
    }
    Err(Error::Parse(format!(
        "unknown breaking spec `{spec}` (expected uniform, position:<k>, \
         position-union:<list>, or an existing file)"
    )))
}

/// Parse a weights spec: `uniform`/`uniform-w`, `pl-heuristic-w`, or a path
/// to a weights file.
pub fn parse_weights_spec(spec: &str) -> Result<WeightHeuristic> {
    match spec {
        "uniform" | "uniform-w" => return Ok(WeightHeuristic::Uniform),
        "pl-heuristic-w" => return Ok(WeightHeuristic::PlHeuristicW),
        _ => {}
    }
    if std::path::Path::new(spec).exists() {
        let text = std::fs::read_to_string(spec)?;
        return Ok(WeightHeuristic::Fixed(CmlWeights::from_text(&text)?));
    }
    Err(Error::Parse(format!(
        "unknown weights spec `{spec}` (expected uniform, uniform-w, \
         pl-heuristic-w, or an existing file)"
    )))
}

/// Estimator selection in experiment configs.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Rbcml {
        #[serde(default = "default_iterations")]
        iterations: usize,
        breaking: String,
        weights: String,
        #[serde(default)]
        name: Option<String>,
    },
    PlFullMle {
        #[serde(default)]
        name: Option<String>,
    },
}

fn default_iterations() -> usize {
    1
}

impl EstimatorSpec {
    /// Display name used in result rows (commas sanitized for CSV).
    pub fn name(&self) -> String {
        match self {
            Self::Rbcml { iterations, breaking, weights, name } => name.clone().unwrap_or_else(|| {
                format!("rbcml-t{iterations}-g:{breaking}-w:{weights}").replace(',', ";")
            }),
            Self::PlFullMle { name } => name.clone().unwrap_or_else(|| "pl-full-mle".into()),
        }
    }

    fn build(&self, family: &UtilityFamily, opts: FitOptions) -> Result<Estimator> {
        match self {
            Self::Rbcml { iterations, breaking, weights, .. } => {
                if *iterations == 0 {
                    return Err(Error::InvalidConfig("estimator iterations must be >= 1".into()));
                }
                Ok(Estimator::Rbcml(AdaptiveConfig {
                    iterations: *iterations,
                    breaking: parse_breaking_spec(breaking)?,
                    weights: parse_weights_spec(weights)?,
                    options: opts,
                }))
            }
            Self::PlFullMle { .. } => {
                if !family.is_plackett_luce() {
                    return Err(Error::InvalidConfig(
                        "pl-full-mle requires the Plackett-Luce family".into(),
                    ));
                }
                Ok(Estimator::PlFullMle(opts))
            }
        }
    }
}

enum Estimator {
    Rbcml(AdaptiveConfig),
    PlFullMle(FitOptions),
}

impl Estimator {
    /// Run the estimator, timing only the fit. Unconverged fits count as
    /// trial failures rather than polluting the aggregates.
    fn fit(&self, family: &UtilityFamily, profile: &Profile) -> Result<(Theta, f64)> {
        let (fit, runtime) = match self {
            Self::Rbcml(cfg) => {
                let start = Instant::now();
                let run = adaptive_rbcml(family, profile, cfg);
                let runtime = start.elapsed().as_secs_f64();
                (run.into_final()?, runtime)
            }
            Self::PlFullMle(opts) => {
                let start = Instant::now();
                let fit = pl_full_mle(profile, opts)?;
                (fit, start.elapsed().as_secs_f64())
            }
        };
        if !fit.converged {
            return Err(Error::NotConverged {
                iterations: fit.iterations,
                gradient_norm: fit.gradient_norm,
            });
        }
        Ok((fit.theta, runtime))
    }
}

/// Desk-scale reproduction of the synthetic-data methodology: per trial,
/// draw a ground truth, sample a profile, fit, and aggregate n x MSE.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub m: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub estimator: EstimatorSpec,
    /// Fixed ground truth; when absent each trial draws Uniform(0,5)^m
    /// shifted to the gauge.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// Optimizer settings; defaults apply when absent.
    #[serde(default)]
    pub fit_options: Option<FitOptions>,
    /// CSV output path (used by the sweep front end).
    #[serde(default)]
    pub output: Option<String>,
    /// Optional JSON-lines per-trial dump path.
    #[serde(default)]
    pub jsonl: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::TooFewAlternatives { m: self.m, min: 2 });
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidConfig("n_grid must be nonempty and increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if let Some(t) = &self.theta0 {
            if t.len() != self.m {
                return Err(Error::DimensionMismatch { expected: self.m, actual: t.len() });
            }
        }
        Ok(())
    }
}

/// Aggregated results at one sample size.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ResultRow {
    pub estimator: String,
    pub n: usize,
    pub n_mse_mean: f64,
    pub n_mse_stderr: f64,
    pub runtime_mean_s: f64,
    pub failures: usize,
}

/// One record per successful trial, for the JSON-lines dump.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TrialRecord {
    pub estimator: String,
    pub n: usize,
    /// Stream index of the trial's derived RNG.
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub mse: f64,
    pub n_mse: f64,
    pub runtime_s: f64,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub trials: Vec<TrialRecord>,
}

/// Run the experiment described by `cfg`. Trials are independent and run in
/// parallel on derived streams; aggregation order is fixed by trial index,
/// so results are deterministic for a given seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let family = cfg.family.build(cfg.m)?;
    let estimator = cfg.estimator.build(&family, cfg.fit_options.unwrap_or_default())?;
    let name = cfg.estimator.name();
    let fixed_theta0 = match &cfg.theta0 {
        Some(v) => Some(Theta::new(v.clone())?),
        None => None,
    };

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    let mut all_trials = Vec::new();
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let outcomes: Vec<Result<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let stream = (ni * cfg.trials + t) as u64;
                let mut rng = derive_stream(cfg.seed, stream);
                let theta0 = match &fixed_theta0 {
                    Some(t0) => t0.clone(),
                    None => sample_ground_truth(cfg.m, &mut rng),
                };
                let profile = sample_profile(&family, &theta0, n, &mut rng)?;
                let (theta_star, runtime_s) = estimator.fit(&family, &profile)?;
                let mse_v = mse(&theta_star, &theta0)?;
                Ok(TrialRecord {
                    estimator: name.clone(),
                    n,
                    seed: stream,
                    theta0: theta0.values().to_vec(),
                    theta_star: theta_star.values().to_vec(),
                    mse: mse_v,
                    n_mse: n as f64 * mse_v,
                    runtime_s,
                })
            })
            .collect();

        let mut values = Vec::with_capacity(cfg.trials);
        let mut runtime_total = 0.0;
        let mut failures = 0usize;
        for outcome in outcomes {
            match outcome {
                Ok(rec) => {
                    values.push(rec.n_mse);
                    runtime_total += rec.runtime_s;
                    all_trials.push(rec);
                }
                Err(_) => failures += 1,
            }
        }
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("all trials failed at n = {n}")));
        }
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        rows.push(ResultRow {
            estimator: name.clone(),
            n,
            n_mse_mean: mean,
            n_mse_stderr: (var / count).sqrt(),
            runtime_mean_s: runtime_total / count,
            failures,
        });
    }
    Ok(ExperimentOutcome { rows, trials: all_trials })
}

/// Render rows as CSV with the fixed column set. Without `include_timing`
/// the runtime column is left empty, keeping the bytes deterministic.
pub fn rows_to_csv(rows: &[ResultRow], include_timing: bool) -> String {
    let mut out = String::from("estimator,n,n_mse_mean,n_mse_stderr,runtime_mean_s,failures\n");
    for r in rows {
        let runtime = if include_timing { format!("{:.6}", r.runtime_mean_s) } else { String::new() };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.estimator, r.n, r.n_mse_mean, r.n_mse_stderr, runtime, r.failures
        ));
    }
    out
}

/// Render per-trial records as JSON lines. Without `include_timing` the
/// runtime field is null, keeping the bytes deterministic.
pub fn trials_to_jsonl(trials: &[TrialRecord], include_timing: bool) -> String {
    #[derive(serde::Serialize)]
    struct View<'a> {
        estimator: &'a str,
        n: usize,
        seed: u64,
        theta0: &'a [f64],
        theta_star: &'a [f64],
        mse: f64,
        n_mse: f64,
        runtime_s: Option<f64>,
    }
    let mut out = String::new();
    for t in trials {
        let view = View {
            estimator: &t.estimator,
            n: t.n,
            seed: t.seed,
            theta0: &t.theta0,
            theta_star: &t.theta_star,
            mse: t.mse,
            n_mse: t.n_mse,
            runtime_s: include_timing.then_some(t.runtime_s),
        };
        out.push_str(&serde_json::to_string(&view).expect("serializable record"));
        out.push('\n');
    }
    out
}
