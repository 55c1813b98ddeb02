//! Executable consistency theory: structural validators for breaking/weight
//! configurations and the expected-gradient criterion that characterizes
//! consistent estimators.

use rayon::prelude::*;

use crate::breaking::{
    expected_kappa, is_uniform, is_weighted_union_of_position_k, kappa_stats, BreakingGraph,
    GRAPH_SHAPE_TOL,
};
use crate::cml::{cll_grad, maximize_cll, CmlWeights, FitOptions};
use crate::error::{Error, Result};
use crate::model::{Theta, UtilityFamily};
use crate::sampling::{derive_stream, sample_profile};

/// A violated consistency condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InconsistencyReason {
    NonPositionKUnion,
    NonUniformG,
    WNotConnected,
    WNotSymmetric,
    ExpectedGradientNonzero,
}

impl std::fmt::Display for InconsistencyReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::NonPositionKUnion => "non-position-k-union",
            Self::NonUniformG => "non-uniform-G",
            Self::WNotConnected => "W-not-connected",
            Self::WNotSymmetric => "W-not-symmetric",
            Self::ExpectedGradientNonzero => "expected-gradient-nonzero",
        };
        f.write_str(s)
    }
}

/// Verdict of a consistency check; consistent iff no reasons.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyVerdict {
    pub reasons: Vec<InconsistencyReason>,
}

impl ConsistencyVerdict {
    fn from_reasons(reasons: Vec<InconsistencyReason>) -> Self {
        Self { reasons }
    }

    pub fn consistent(&self) -> bool {
        self.reasons.is_empty()
    }
}

impl std::fmt::Display for ConsistencyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.consistent() {
            f.write_str("consistent")
        } else {
            let reasons: Vec<String> = self.reasons.iter().map(|r| r.to_string()).collect();
            write!(f, "inconsistent: {}", reasons.join(", "))
        }
    }
}

/// Gradient of the expected composite log-likelihood at theta0: the
/// gauge-fixed CML gradient with kappa replaced by its expectation under
/// the model at theta0. Zero at every theta0 characterizes consistency.
pub fn expected_gradient(
    family: &UtilityFamily,
    g: &BreakingGraph,
    w: &CmlWeights,
    theta0: &Theta,
) -> Result<Vec<f64>> {
    let kappa = expected_kappa(g, family, theta0)?;
    cll_grad(family, &kappa, w, theta0)
}

/// Weight tolerance for the symmetry predicate on W.
const W_SYMMETRY_TOL: f64 = 1e-9;

fn weight_reasons(w: &CmlWeights) -> Vec<InconsistencyReason> {
    let mut reasons = Vec::new();
    if !w.is_connected() {
        reasons.push(InconsistencyReason::WNotConnected);
    }
    if !w.is_symmetric(W_SYMMETRY_TOL) {
        reasons.push(InconsistencyReason::WNotSymmetric);
    }
    reasons
}

/// Plackett-Luce structural test: G must be a weighted union of position-k
/// breakings and W connected and symmetric.
pub fn check_consistency_pl(g: &BreakingGraph, w: &CmlWeights) -> Result<ConsistencyVerdict> {
    if g.m() != w.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), actual: w.m() });
    }
    let mut reasons = Vec::new();
    if is_weighted_union_of_position_k(g, GRAPH_SHAPE_TOL).is_none() {
        reasons.push(InconsistencyReason::NonPositionKUnion);
    }
    reasons.extend(weight_reasons(w));
    Ok(ConsistencyVerdict::from_reasons(reasons))
}

/// Symmetric-RUM structural test: G must be uniform and W connected and
/// symmetric. The caller asserts the family premise (Gaussian satisfies it:
/// (ln pi)' decreasing and unbounded on the left).
pub fn check_consistency_symmetric_rum(
    g: &BreakingGraph,
    w: &CmlWeights,
) -> Result<ConsistencyVerdict> {
    if g.m() != w.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), actual: w.m() });
    }
    let mut reasons = Vec::new();
    if !is_uniform(g, GRAPH_SHAPE_TOL) {
        reasons.push(InconsistencyReason::NonUniformG);
    }
    reasons.extend(weight_reasons(w));
    Ok(ConsistencyVerdict::from_reasons(reasons))
}

/// Behavioral test: classify by the expected-gradient norm over probe
/// points. Below `zero_tol` everywhere is consistent; any probe above
/// `nonzero_tol` is inconsistent; anything between is left undecided and
/// reported as inconsistent with the gradient reason.
pub fn behavioral_verdict(
    family: &UtilityFamily,
    g: &BreakingGraph,
    w: &CmlWeights,
    probes: &[Theta],
    zero_tol: f64,
) -> Result<(ConsistencyVerdict, f64)> {
    let mut worst: f64 = 0.0;
    for theta0 in probes {
        let grad = expected_gradient(family, g, w, theta0)?;
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    let reasons = if worst <= zero_tol {
        Vec::new()
    } else {
        vec![InconsistencyReason::ExpectedGradientNonzero]
    };
    Ok((ConsistencyVerdict::from_reasons(reasons), worst))
}

/// Mean squared error over the gauge-fixed coordinates:
/// (1/(m-1)) * sum_i (a_i - b_i)^2.
pub fn mse(estimate: &Theta, truth: &Theta) -> Result<f64> {
    if estimate.m() != truth.m() {
        return Err(Error::DimensionMismatch { expected: truth.m(), actual: estimate.m() });
    }
    let m = estimate.m();
    let sum: f64 = estimate
        .free()
        .iter()
        .zip(truth.free())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / (m - 1) as f64)
}

/// Mean MSE at one sample size of the trend experiment.
#[derive(Clone, Debug)]
pub struct TrendPoint {
    pub n: usize,
    pub mean_mse: f64,
    pub failures: usize,
}

/// Fit RBCML(G, W) on synthetic profiles of growing size and average the
/// MSE per size. Consistent configurations decay like 1/n; inconsistent
/// ones flatten at a positive floor. Trials run in parallel on derived
/// streams, so results are reproducible for a given seed.
pub fn empirical_consistency_trend(
    family: &UtilityFamily,
    g: &BreakingGraph,
    w: &CmlWeights,
    theta0: &Theta,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<TrendPoint>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidConfig("n_grid must be nonempty and increasing".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let opts = FitOptions::default();
    let mut out = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let results: Vec<Result<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = derive_stream(seed, (ni * trials + t) as u64);
                let profile = sample_profile(family, theta0, n, &mut rng)?;
                let kappa = kappa_stats(g, &profile)?;
                let fit = maximize_cll(family, &kappa, w, &Theta::zeros(theta0.m()), &opts)?;
                if !fit.converged {
                    return Err(Error::NotConverged {
                        iterations: fit.iterations,
                        gradient_norm: fit.gradient_norm,
                    });
                }
                mse(&fit.theta, theta0)
            })
            .collect();
        let mut total = 0.0;
        let mut ok = 0usize;
        let mut failures = 0usize;
        for r in results {
            match r {
                Ok(v) => {
                    total += v;
                    ok += 1;
                }
                Err(_) => failures += 1,
            }
        }
        if ok == 0 {
            return Err(Error::InvalidConfig(format!("all {trials} trials failed at n = {n}")));
        }
        out.push(TrendPoint { n, mean_mse: total / ok as f64, failures });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breaking::{position_k_breaking, uniform_breaking, weighted_union};

    fn pl() -> UtilityFamily {
        UtilityFamily::plackett_luce()
    }

    fn posunion3() -> BreakingGraph {
        let p1 = position_k_breaking(3, 1).unwrap();
        let p2 = position_k_breaking(3, 2).unwrap();
        weighted_union(&[(1.0 / 3.0, &p1), (0.5, &p2)]).unwrap()
    }

    #[test]
    fn expected_gradient_zero_for_consistent_pl_config() {
        let g = uniform_breaking(3).unwrap();
        let w = CmlWeights::uniform(3);
        let theta0 = Theta::new(vec![1.0, 0.5, 0.0]).unwrap();
        let grad = expected_gradient(&pl(), &g, &w, &theta0).unwrap();
        assert!(grad.iter().all(|v| v.abs() < 1e-10), "{grad:?}");
    }

    #[test]
    fn expected_gradient_single_edge_enumeration_values() {
        // G = {g13 = 1}, theta0 = (ln 2, 0, 0). Enumerating all six
        // rankings gives gradient components exactly (1/18, -1/36).
        let g = BreakingGraph::from_edges(3, &[(1, 3, 1.0)]).unwrap();
        let w = CmlWeights::uniform(3);
        let theta0 = Theta::new(vec![2.0f64.ln(), 0.0, 0.0]).unwrap();
        let grad = expected_gradient(&pl(), &g, &w, &theta0).unwrap();
        assert!((grad[0] - 1.0 / 18.0).abs() < 1e-12, "{grad:?}");
        assert!((grad[1] + 1.0 / 36.0).abs() < 1e-12, "{grad:?}");
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 0.05, "norm {norm}");
    }

    #[test]
    fn expected_gradient_gaussian_uniform_breaking_vanishes() {
        let g = uniform_breaking(4).unwrap();
        let w = CmlWeights::uniform(4);
        let theta0 = Theta::new(vec![1.3, -0.7, 0.4, 0.0]).unwrap();
        let grad =
            expected_gradient(&UtilityFamily::gaussian_unit(4), &g, &w, &theta0).unwrap();
        assert!(grad.iter().all(|v| v.abs() < 1e-6), "{grad:?}");
    }

    #[test]
    fn pl_structural_verdicts() {
        let wu = CmlWeights::uniform(3);
        assert!(check_consistency_pl(&posunion3(), &wu).unwrap().consistent());

        let w_ex3 =
            CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)])
                .unwrap();
        assert!(check_consistency_pl(&uniform_breaking(3).unwrap(), &w_ex3)
            .unwrap()
            .consistent());

        let single = BreakingGraph::from_edges(3, &[(1, 3, 1.0)]).unwrap();
        let verdict = check_consistency_pl(&single, &wu).unwrap();
        assert_eq!(verdict.reasons, vec![InconsistencyReason::NonPositionKUnion]);
    }

    #[test]
    fn symmetric_rum_structural_verdicts() {
        let wu = CmlWeights::uniform(3);
        assert!(check_consistency_symmetric_rum(&uniform_breaking(3).unwrap(), &wu)
            .unwrap()
            .consistent());

        let verdict =
            check_consistency_symmetric_rum(&position_k_breaking(3, 1).unwrap(), &wu).unwrap();
        assert_eq!(verdict.reasons, vec![InconsistencyReason::NonUniformG]);

        let mut pairs = vec![(0, 1, 1.0), (1, 0, 2.0)];
        for (i, j) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            pairs.push((i, j, 1.0));
        }
        let w_asym = CmlWeights::from_pairs(3, &pairs).unwrap();
        let verdict =
            check_consistency_symmetric_rum(&uniform_breaking(3).unwrap(), &w_asym).unwrap();
        assert_eq!(verdict.reasons, vec![InconsistencyReason::WNotSymmetric]);
    }

    #[test]
    fn chain_weights_are_connected_but_sparse_w_is_not() {
        // {1,2} and {2,3} edges connect all three alternatives.
        let w_ex3 =
            CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)])
                .unwrap();
        assert!(w_ex3.is_connected());
        let w_gap = CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let verdict = check_consistency_pl(&uniform_breaking(3).unwrap(), &w_gap).unwrap();
        assert_eq!(verdict.reasons, vec![InconsistencyReason::WNotConnected]);
    }

    #[test]
    fn behavioral_verdict_thresholds() {
        let probes: Vec<Theta> = vec![
            Theta::new(vec![0.8, -0.5, 0.0]).unwrap(),
            Theta::new(vec![2.0f64.ln(), 0.0, 0.0]).unwrap(),
        ];
        let wu = CmlWeights::uniform(3);
        let (verdict, worst) =
            behavioral_verdict(&pl(), &uniform_breaking(3).unwrap(), &wu, &probes, 1e-8).unwrap();
        assert!(verdict.consistent());
        assert!(worst < 1e-8);

        let single = BreakingGraph::from_edges(3, &[(1, 3, 1.0)]).unwrap();
        let (verdict, worst) = behavioral_verdict(&pl(), &single, &wu, &probes, 1e-8).unwrap();
        assert_eq!(verdict.reasons, vec![InconsistencyReason::ExpectedGradientNonzero]);
        assert!(worst > 1e-3);
    }

    #[test]
    fn mse_definition() {
        let a = Theta::new(vec![1.0, 2.0, 0.0]).unwrap();
        let b = Theta::new(vec![1.5, 1.0, 0.0]).unwrap();
        assert!((mse(&a, &b).unwrap() - (0.25 + 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn trend_decreases_for_consistent_config_smoke() {
        let g = uniform_breaking(3).unwrap();
        let w = CmlWeights::uniform(3);
        let theta0 = Theta::new(vec![1.0, 0.4, 0.0]).unwrap();
        let points =
            empirical_consistency_trend(&pl(), &g, &w, &theta0, &[50, 2000], 12, 99).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points.iter().all(|p| p.failures == 0));
        assert!(points[1].mean_mse < points[0].mean_mse);
    }

    #[test]
    fn trend_symmetric_truth_centers_on_zero() {
        let g = uniform_breaking(3).unwrap();
        let w = CmlWeights::uniform(3);
        let theta0 = Theta::zeros(3);
        let points =
            empirical_consistency_trend(&pl(), &g, &w, &theta0, &[4000], 16, 5).unwrap();
        // MSE itself is the squared deviation from zero here.
        assert!(points[0].mean_mse < 5e-3, "{}", points[0].mean_mse);
    }

    #[test]
    fn trend_floor_for_inconsistent_config() {
        // Single-edge breaking is biased; more data does not wash it out.
        let g = BreakingGraph::from_edges(3, &[(1, 3, 1.0)]).unwrap();
        let w = CmlWeights::uniform(3);
        let theta0 = Theta::new(vec![2.0f64.ln(), 0.0, 0.0]).unwrap();
        let points =
            empirical_consistency_trend(&pl(), &g, &w, &theta0, &[10_000], 10, 77).unwrap();
        assert!(points[0].mean_mse > 1e-3, "floor {}", points[0].mean_mse);
    }

    #[test]
    fn trend_rejects_bad_grid() {
        let g = uniform_breaking(3).unwrap();
        let w = CmlWeights::uniform(3);
        let t0 = Theta::zeros(3);
        assert!(empirical_consistency_trend(&pl(), &g, &w, &t0, &[100, 50], 2, 1).is_err());
        assert!(empirical_consistency_trend(&pl(), &g, &w, &t0, &[], 2, 1).is_err());
    }
}
