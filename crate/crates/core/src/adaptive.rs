//! Adaptive RBCML: iterate breaking/weight heuristics against successive
//! estimates, warm-starting each fit from the previous one.

use std::sync::Arc;

use crate::breaking::{kappa_stats, position_k_breaking, uniform_breaking, weighted_union, BreakingGraph};
use crate::cml::{maximize_cll, CmlWeights, FitOptions, FitResult};
use crate::error::{Error, Result};
use crate::model::{Profile, Theta, UtilityFamily};

/// Theta-dependent breaking constructor used by [`BreakingHeuristic::Custom`].
pub type BreakingFn = Arc<dyn Fn(&Theta) -> Result<BreakingGraph> + Send + Sync>;
/// Theta-dependent weights constructor used by [`WeightHeuristic::Custom`].
pub type WeightsFn = Arc<dyn Fn(&Theta) -> Result<CmlWeights> + Send + Sync>;

/// Breaking graph as a function of the current estimate.
#[derive(Clone)]
pub enum BreakingHeuristic {
    /// The constant uniform breaking G_u (consistent for both model classes).
    Uniform,
    /// Constant weighted union of position-k breakings with the given
    /// coefficients alpha_1..alpha_{m-1}.
    PositionUnion(Vec<f64>),
    /// A constant user-supplied graph (e.g. loaded from a file).
    Fixed(BreakingGraph),
    Custom(BreakingFn),
}

impl std::fmt::Debug for BreakingHeuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform => f.write_str("Uniform"),
            Self::PositionUnion(a) => write!(f, "PositionUnion({a:?})"),
            Self::Fixed(g) => write!(f, "Fixed(m={})", g.m()),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl BreakingHeuristic {
    pub fn build(&self, theta: &Theta) -> Result<BreakingGraph> {
        let m = theta.m();
        match self {
            Self::Uniform => uniform_breaking(m),
            Self::PositionUnion(alphas) => {
                if alphas.len() != m - 1 {
                    return Err(Error::DimensionMismatch { expected: m - 1, actual: alphas.len() });
                }
                let parts: Vec<BreakingGraph> = (1..m)
                    .map(|k| position_k_breaking(m, k))
                    .collect::<Result<_>>()?;
                let terms: Vec<(f64, &BreakingGraph)> =
                    alphas.iter().cloned().zip(parts.iter()).collect();
                weighted_union(&terms)
            }
            Self::Fixed(g) => {
                if g.m() != m {
                    return Err(Error::DimensionMismatch { expected: m, actual: g.m() });
                }
                Ok(g.clone())
            }
            Self::Custom(f) => f(theta),
        }
    }
}

/// CML weights as a function of the current estimate.
#[derive(Clone)]
pub enum WeightHeuristic {
    /// The uniform weights W_u.
    Uniform,
    /// The Plackett-Luce heuristic w_ij = w_ji = 1 / (|theta_i - theta_j| + 4).
    PlHeuristicW,
    /// Constant user-supplied weights (e.g. loaded from a file).
    Fixed(CmlWeights),
    Custom(WeightsFn),
}

impl std::fmt::Debug for WeightHeuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform => f.write_str("Uniform"),
            Self::PlHeuristicW => f.write_str("PlHeuristicW"),
            Self::Fixed(w) => write!(f, "Fixed(m={})", w.m()),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl WeightHeuristic {
    pub fn build(&self, theta: &Theta) -> Result<CmlWeights> {
        match self {
            Self::Uniform => Ok(CmlWeights::uniform(theta.m())),
            Self::PlHeuristicW => Ok(heuristic_w_pl(theta)),
            Self::Fixed(w) => {
                if w.m() != theta.m() {
                    return Err(Error::DimensionMismatch { expected: theta.m(), actual: w.m() });
                }
                Ok(w.clone())
            }
            Self::Custom(f) => f(theta),
        }
    }
}

/// Symmetric weights that emphasize close pairs:
/// w_ij = w_ji = 1 / (|theta_i - theta_j| + 4), always in (0, 0.25].
///
/// All weights are positive, so the result is connected and symmetric and
/// keeps the estimator consistent whenever the breaking does.
pub fn heuristic_w_pl(theta: &Theta) -> CmlWeights {
    let m = theta.m();
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                entries[i * m + j] = 1.0 / ((theta.get(i) - theta.get(j)).abs() + 4.0);
            }
        }
    }
    CmlWeights::from_entries(m, entries).expect("positive symmetric weights")
}

/// Configuration of the adaptive loop.
#[derive(Clone, Debug)]
pub struct AdaptiveConfig {
    /// Number of iterations T >= 1.
    pub iterations: usize,
    pub breaking: BreakingHeuristic,
    pub weights: WeightHeuristic,
    pub options: FitOptions,
}

impl AdaptiveConfig {
    /// One-step RBCML(G_u, W_u), the default for Gaussian RUMs.
    pub fn one_step_uniform() -> Self {
        Self {
            iterations: 1,
            breaking: BreakingHeuristic::Uniform,
            weights: WeightHeuristic::Uniform,
            options: FitOptions::default(),
        }
    }
}

/// All iterates of an adaptive run. `failure` carries the error that
/// aborted the loop, if any; completed iterates are always returned.
#[derive(Debug)]
pub struct AdaptiveRun {
    pub iterates: Vec<FitResult>,
    pub failure: Option<Error>,
}

impl AdaptiveRun {
    /// The final estimate, or the error that stopped the run.
    pub fn into_final(mut self) -> Result<FitResult> {
        match self.failure {
            Some(e) => Err(e),
            None => self
                .iterates
                .pop()
                .ok_or_else(|| Error::InvalidConfig("no iterations were run".into())),
        }
    }
}

/// Kappa is recomputed only when the breaking heuristic's output moved by
/// more than this edgewise tolerance.
const GRAPH_CHANGE_TOL: f64 = 1e-12;

/// Algorithm: start at theta = 0; at each step build G and W from the
/// previous estimate, refresh kappa if the graph changed, and maximize the
/// composite likelihood warm-started at the previous estimate.
pub fn adaptive_rbcml(
    family: &UtilityFamily,
    profile: &Profile,
    cfg: &AdaptiveConfig,
) -> AdaptiveRun {
    let mut iterates = Vec::with_capacity(cfg.iterations);
    let mut failure = None;
    let mut theta = Theta::zeros(profile.m());
    let mut cached: Option<(BreakingGraph, crate::breaking::KappaMatrix)> = None;

    if cfg.iterations == 0 {
        return AdaptiveRun {
            iterates,
            failure: Some(Error::InvalidConfig("iterations must be >= 1".into())),
        };
    }

    for _ in 0..cfg.iterations {
        let step = (|| -> Result<FitResult> {
            let g = cfg.breaking.build(&theta)?;
            let w = cfg.weights.build(&theta)?;
            let stale = match &cached {
                Some((prev, _)) => !prev.approx_eq(&g, GRAPH_CHANGE_TOL),
                None => true,
            };
            if stale {
                let kappa = kappa_stats(&g, profile)?;
                cached = Some((g, kappa));
            }
            let (_, kappa) = cached.as_ref().unwrap();
            maximize_cll(family, kappa, &w, &theta, &cfg.options)
        })();
        match step {
            Ok(fit) => {
                theta = fit.theta.clone();
                iterates.push(fit);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    AdaptiveRun { iterates, failure }
}
