//! The composite log-marginal likelihood: evaluation, derivatives, the
//! connectivity conditions that govern strict concavity and boundedness,
//! and its maximization.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::breaking::KappaMatrix;
use crate::dist;
use crate::error::{Error, Result};
use crate::model::{pairwise_prob, pairwise_prob_grad, Theta, UtilityFamily};
use crate::newton::{self, Objective};

pub use crate::newton::FitOptions;

/// Nonnegative CML weights over ordered alternative pairs, zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CmlWeights {
    m: usize,
    entries: Vec<f64>,
}

impl CmlWeights {
    pub fn from_entries(m: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, actual: entries.len() });
        }
        for (idx, v) in entries.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::NegativeWeight { what: "CML weight", value: *v });
            }
            if idx / m == idx % m && *v != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "weight diagonal entry {} must be zero",
                    idx / m
                )));
            }
        }
        Ok(Self { m, entries })
    }

    /// The uniform weights W_u: every ordered pair gets weight 1.
    pub fn uniform(m: usize) -> Self {
        let mut entries = vec![1.0; m * m];
        for i in 0..m {
            entries[i * m + i] = 0.0;
        }
        Self { m, entries }
    }

    /// Build from `(i, j, w)` triples over 0-based ordered pairs.
    pub fn from_pairs(m: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries = vec![0.0; m * m];
        for &(i, j, w) in pairs {
            if i >= m || j >= m {
                return Err(Error::IndexOutOfBounds { index: i.max(j), m });
            }
            if i == j {
                return Err(Error::InvalidPair(i));
            }
            entries[i * m + j] += w;
        }
        Self::from_entries(m, entries)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_entries(self.m, self.entries.iter().map(|v| c * v).collect())
    }

    /// w_ij = w_ji for every pair, within tol.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.m {
            for j in i + 1..self.m {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Connectivity as an undirected graph where an edge is present only
    /// when both directed weights are strictly positive.
    pub fn is_connected(&self) -> bool {
        let m = self.m;
        undirected_connected(m, |i, j| self.get(i, j) > 0.0 && self.get(j, i) > 0.0)
    }

    /// Text form mirroring the breaking format, but over ordered pairs
    /// (written 1-based).
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                let w = self.get(i, j);
                if w > 0.0 {
                    s.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let m: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::Parse("weights file must start with m".into()))?;
        if m < 2 {
            return Err(Error::Parse("weights file needs m >= 2".into()));
        }
        let mut pairs = Vec::new();
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::Parse(format!("expected `i j weight`, got `{line}`")));
            }
            let i: usize =
                toks[0].parse().map_err(|_| Error::Parse(format!("bad index `{}`", toks[0])))?;
            let j: usize =
                toks[1].parse().map_err(|_| Error::Parse(format!("bad index `{}`", toks[1])))?;
            let w: f64 =
                toks[2].parse().map_err(|_| Error::Parse(format!("bad weight `{}`", toks[2])))?;
            if i == 0 || j == 0 || i > m || j > m || i == j {
                return Err(Error::Parse(format!("bad pair {i} {j} for m = {m}")));
            }
            pairs.push((i - 1, j - 1, w));
        }
        Self::from_pairs(m, &pairs).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Connectivity of the directed graph W (x) G(P): edge i -> j present when
/// w_ij * kappa_ij > 0.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConnectivityReport {
    pub weakly_connected: bool,
    pub strongly_connected: bool,
    /// Weakly connected components, each sorted, ordered by least member.
    pub components: Vec<Vec<usize>>,
}

/// Build W (x) G(P) and report weak/strong connectivity.
pub fn wg_product(w: &CmlWeights, kappa: &KappaMatrix) -> Result<ConnectivityReport> {
    if w.m() != kappa.m() {
        return Err(Error::DimensionMismatch { expected: w.m(), actual: kappa.m() });
    }
    let m = w.m();
    let edge = |i: usize, j: usize| w.get(i, j) * kappa.get(i, j) > 0.0;

    let components = undirected_components(m, |i, j| edge(i, j) || edge(j, i));
    let weakly_connected = components.len() == 1;
    let strongly_connected = weakly_connected
        && reaches_all(m, &edge, false)
        && reaches_all(m, &edge, true);
    Ok(ConnectivityReport { weakly_connected, strongly_connected, components })
}

fn undirected_connected(m: usize, adjacent: impl Fn(usize, usize) -> bool) -> bool {
    undirected_components(m, adjacent).len() == 1
}

fn undirected_components(m: usize, adjacent: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; m];
    let mut components = Vec::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut queue = vec![start];
        while let Some(v) = queue.pop() {
            for u in 0..m {
                if !seen[u] && (adjacent(v, u) || adjacent(u, v)) {
                    seen[u] = true;
                    comp.push(u);
                    queue.push(u);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

fn reaches_all(m: usize, edge: &impl Fn(usize, usize) -> bool, reverse: bool) -> bool {
    let mut seen = vec![false; m];
    seen[0] = true;
    let mut queue = vec![0usize];
    while let Some(v) = queue.pop() {
        for u in 0..m {
            let connected = if reverse { edge(u, v) } else { edge(v, u) };
            if !seen[u] && connected {
                seen[u] = true;
                queue.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn check_dims(family: &UtilityFamily, kappa: &KappaMatrix, w: &CmlWeights, theta: &Theta) -> Result<()> {
    let m = theta.m();
    family.check_m(m)?;
    if kappa.m() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: kappa.m() });
    }
    if w.m() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: w.m() });
    }
    Ok(())
}

/// Composite log-marginal likelihood at theta.
///
/// Dispatches to an algebraically expanded Plackett-Luce form and a
/// log-space Gaussian form; both agree with [`cll_generic`] to 1e-10.
pub fn cll(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    theta: &Theta,
) -> Result<f64> {
    check_dims(family, kappa, w, theta)?;
    let m = theta.m();
    match family {
        UtilityFamily::PlackettLuce => {
            let mut total = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    let cij = kappa.get(i, j) * w.get(i, j);
                    let cji = kappa.get(j, i) * w.get(j, i);
                    if cij == 0.0 && cji == 0.0 {
                        continue;
                    }
                    let (ti, tj) = (theta.get(i), theta.get(j));
                    total += cij * ti + cji * tj - (cij + cji) * dist::log_sum_exp2(ti, tj);
                }
            }
            Ok(total)
        }
        UtilityFamily::Gaussian { scales } => {
            let mut total = 0.0;
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let c = kappa.get(i, j) * w.get(i, j);
                    if c == 0.0 {
                        continue;
                    }
                    let s = scales[i].hypot(scales[j]);
                    total += c * dist::normal_log_cdf((theta.get(i) - theta.get(j)) / s);
                }
            }
            Ok(total)
        }
        _ => cll_generic(family, kappa, w, theta),
    }
}

/// Reference evaluation straight from the definition:
/// sum over ordered pairs of kappa * w * ln p.
pub fn cll_generic(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    theta: &Theta,
) -> Result<f64> {
    check_dims(family, kappa, w, theta)?;
    let m = theta.m();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let c = kappa.get(i, j) * w.get(i, j);
            if c == 0.0 {
                continue;
            }
            let p = pairwise_prob(family, theta, i, j)?;
            if p <= 0.0 || p >= 1.0 {
                return Err(Error::LogDomain { value: p });
            }
            total += c * p.ln();
        }
    }
    Ok(total)
}

fn cll_grad_full(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    theta: &Theta,
) -> Result<Vec<f64>> {
    let m = theta.m();
    let mut grad = vec![0.0; m];
    match family {
        UtilityFamily::PlackettLuce => {
            for i in 0..m {
                let mut gi = 0.0;
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let cij = kappa.get(i, j) * w.get(i, j);
                    let cji = kappa.get(j, i) * w.get(j, i);
                    if cij == 0.0 && cji == 0.0 {
                        continue;
                    }
                    gi += cij - (cij + cji) * dist::sigmoid(theta.get(i) - theta.get(j));
                }
                grad[i] = gi;
            }
        }
        UtilityFamily::Gaussian { scales } => {
            for i in 0..m {
                let mut gi = 0.0;
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let cij = kappa.get(i, j) * w.get(i, j);
                    let cji = kappa.get(j, i) * w.get(j, i);
                    if cij == 0.0 && cji == 0.0 {
                        continue;
                    }
                    let s = scales[i].hypot(scales[j]);
                    let x = (theta.get(i) - theta.get(j)) / s;
                    // d ln Phi(x) = hazard(x); d ln Phi(-x) = -hazard(-x).
                    gi += (cij * dist::normal_hazard(x) - cji * dist::normal_hazard(-x)) / s;
                }
                grad[i] = gi;
            }
        }
        _ => {
            for i in 0..m {
                let mut gi = 0.0;
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let cij = kappa.get(i, j) * w.get(i, j);
                    if cij > 0.0 {
                        let p = pairwise_prob(family, theta, i, j)?;
                        if p <= 0.0 {
                            return Err(Error::LogDomain { value: p });
                        }
                        gi += cij * pairwise_prob_grad(family, theta, i, j, i)? / p;
                    }
                    let cji = kappa.get(j, i) * w.get(j, i);
                    if cji > 0.0 {
                        let p = pairwise_prob(family, theta, j, i)?;
                        if p <= 0.0 {
                            return Err(Error::LogDomain { value: p });
                        }
                        gi += cji * pairwise_prob_grad(family, theta, j, i, i)? / p;
                    }
                }
                grad[i] = gi;
            }
        }
    }
    Ok(grad)
}

/// Gauge-fixed gradient: partial derivatives for the m-1 free coordinates.
pub fn cll_grad(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    theta: &Theta,
) -> Result<Vec<f64>> {
    check_dims(family, kappa, w, theta)?;
    let mut g = cll_grad_full(family, kappa, w, theta)?;
    g.pop();
    Ok(g)
}

const HESSIAN_FD_STEP: f64 = 1e-5;

/// Full m x m Hessian; analytic for Plackett-Luce, central finite
/// differences of the gradient otherwise. Its rows sum to zero by gauge
/// invariance.
pub fn cll_hessian_full(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    theta: &Theta,
) -> Result<DMatrix<f64>> {
    check_dims(family, kappa, w, theta)?;
    let m = theta.m();
    if family.is_plackett_luce() {
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let c = kappa.get(i, j) * w.get(i, j) + kappa.get(j, i) * w.get(j, i);
                if c == 0.0 {
                    continue;
                }
                let s = dist::sigmoid(theta.get(i) - theta.get(j));
                let curv = c * s * (1.0 - s);
                h[(i, j)] += curv;
                h[(i, i)] -= curv;
            }
        }
        Ok(h)
    } else {
        let mut h = DMatrix::zeros(m, m);
        for l in 0..m {
            let mut up = theta.values().to_vec();
            up[l] += HESSIAN_FD_STEP;
            let mut dn = theta.values().to_vec();
            dn[l] -= HESSIAN_FD_STEP;
            // Shift invariance makes the re-gauged evaluations equivalent.
            let gu = cll_grad_full(family, kappa, w, &Theta::new(up)?)?;
            let gd = cll_grad_full(family, kappa, w, &Theta::new(dn)?)?;
            for i in 0..m {
                h[(i, l)] = (gu[i] - gd[i]) / (2.0 * HESSIAN_FD_STEP);
            }
        }
        // Symmetrize finite-difference noise away.
        let ht = h.transpose();
        Ok((h + ht) * 0.5)
    }
}

/// Gauge-fixed (m-1) x (m-1) Hessian: the leading block of the full one.
pub fn cll_hessian(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    theta: &Theta,
) -> Result<DMatrix<f64>> {
    let full = cll_hessian_full(family, kappa, w, theta)?;
    let m = theta.m();
    Ok(full.view((0, 0), (m - 1, m - 1)).into())
}

/// Outcome of an optimization run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FitResult {
    pub theta: Theta,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Wallclock seconds spent in the optimizer.
    pub wallclock_s: f64,
}

struct CllObjective<'a> {
    family: &'a UtilityFamily,
    kappa: &'a KappaMatrix,
    w: &'a CmlWeights,
}

impl CllObjective<'_> {
    fn theta(&self, x: &[f64]) -> Theta {
        Theta::from_free(x).expect("optimizer keeps parameters finite")
    }
}

impl Objective for CllObjective<'_> {
    fn dim(&self) -> usize {
        self.kappa.m() - 1
    }

    fn value(&self, x: &[f64]) -> f64 {
        cll(self.family, self.kappa, self.w, &self.theta(x)).unwrap_or(f64::NEG_INFINITY)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        cll_grad(self.family, self.kappa, self.w, &self.theta(x))
            .unwrap_or_else(|_| vec![f64::NAN; self.dim()])
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        cll_hessian(self.family, self.kappa, self.w, &self.theta(x))
            .unwrap_or_else(|_| DMatrix::from_element(d, d, f64::NAN))
    }
}

/// Maximize the composite log-marginal likelihood by damped Newton with
/// backtracking. Non-convergence within the iteration budget is reported in
/// the result, not as an error; parameters escaping `opts.bound` raise
/// [`Error::Diverged`] (the unbounded case of a non-strongly-connected
/// W (x) G(P)).
pub fn maximize_cll(
    family: &UtilityFamily,
    kappa: &KappaMatrix,
    w: &CmlWeights,
    init: &Theta,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_dims(family, kappa, w, init)?;
    let report = wg_product(w, kappa)?;
    if !report.strongly_connected {
        log::warn!(
            "W(x)G(P) is not strongly connected (weak: {}); maximizer may be unbounded",
            report.weakly_connected
        );
    }
    let obj = CllObjective { family, kappa, w };
    let start = Instant::now();
    let out = newton::maximize(&obj, init.free(), opts)?;
    let wallclock_s = start.elapsed().as_secs_f64();
    Ok(FitResult {
        theta: Theta::from_free(&out.x)?,
        objective: out.value,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        converged: out.converged,
        wallclock_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breaking::{expected_kappa, kappa_stats, uniform_breaking, BreakingGraph};
    use crate::model::{Profile, Ranking};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pl() -> UtilityFamily {
        UtilityFamily::plackett_luce()
    }

    /// kappa of the worked m = 3 example.
    fn example_kappa() -> KappaMatrix {
        let g = BreakingGraph::from_edges(
            3,
            &[(1, 2, 1.0 / 3.0), (1, 3, 1.0 / 3.0), (2, 3, 0.5)],
        )
        .unwrap();
        let p = Profile::new(
            3,
            vec![Ranking::new(vec![0, 1, 2]).unwrap(), Ranking::new(vec![2, 1, 0]).unwrap()],
        )
        .unwrap();
        kappa_stats(&g, &p).unwrap()
    }

    /// W with w12 = w21 = 1, w23 = w32 = 2 and nothing on {1,3}.
    fn example_weights() -> CmlWeights {
        CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)]).unwrap()
    }

    #[test]
    fn cll_matches_hand_evaluated_example() {
        // At theta = 0 every ln p is -ln 2, so the objective is
        // -(1/6 + 1/4) ln 2 - (1/2 + 1/3) ln 2 = -(5/4) ln 2.
        let v = cll(&pl(), &example_kappa(), &example_weights(), &Theta::zeros(3)).unwrap();
        let want = -1.25 * std::f64::consts::LN_2;
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
        assert!((v - (-0.866434)).abs() < 1e-6);

        let generic =
            cll_generic(&pl(), &example_kappa(), &example_weights(), &Theta::zeros(3)).unwrap();
        assert!((v - generic).abs() < 1e-10);
    }

    #[test]
    fn cll_empty_overlap_is_zero() {
        // kappa mass only on {1,3}, weights only elsewhere.
        let kappa = KappaMatrix::from_entries(
            3,
            vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0],
        )
        .unwrap();
        let w = CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(cll(&pl(), &kappa, &w, &Theta::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn cll_gauge_shift_invariance() {
        let kappa = example_kappa();
        let w = example_weights();
        let a = cll(&pl(), &kappa, &w, &Theta::new(vec![0.4, -0.2, 0.0]).unwrap()).unwrap();
        let b = cll(&pl(), &kappa, &w, &Theta::new(vec![3.4, 2.8, 3.0]).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn gradient_vanishes_at_worked_example_optimum() {
        let theta = Theta::new(vec![0.0, 1.5f64.ln(), 0.0]).unwrap();
        let g = cll_grad(&pl(), &example_kappa(), &example_weights(), &theta).unwrap();
        for v in &g {
            assert!(v.abs() < 1e-10, "gradient {g:?}");
        }
    }

    #[test]
    fn gradient_vanishes_in_symmetric_situations() {
        let m = 3;
        let mut entries = vec![0.5; m * m];
        for i in 0..m {
            entries[i * m + i] = 0.0;
        }
        let kappa = KappaMatrix::from_entries(m, entries).unwrap();
        let g = cll_grad(&pl(), &kappa, &CmlWeights::uniform(m), &Theta::zeros(m)).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn gradient_matches_finite_differences_all_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = 4;
        let g = uniform_breaking(m).unwrap();
        for family in [pl(), UtilityFamily::gaussian_unit(m)] {
            for _ in 0..10 {
                let vals: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let theta = Theta::new(vals.clone()).unwrap();
                let truth = Theta::new((0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
                let kappa = expected_kappa(&g, &family, &truth).unwrap();
                let w = CmlWeights::uniform(m);
                let grad = cll_grad(&family, &kappa, &w, &theta).unwrap();
                for l in 0..m - 1 {
                    let h = 1e-5;
                    let mut up = vals.clone();
                    up[l] += h;
                    let mut dn = vals.clone();
                    dn[l] -= h;
                    let fd = (cll(&family, &kappa, &w, &Theta::new(up).unwrap()).unwrap()
                        - cll(&family, &kappa, &w, &Theta::new(dn).unwrap()).unwrap())
                        / (2.0 * h);
                    let rel = (grad[l] - fd).abs() / grad[l].abs().max(fd.abs()).max(1.0);
                    assert!(rel < 1e-6, "family {family:?} coord {l}: {rel:e}");
                }
            }
        }
    }

    #[test]
    fn wg_product_worked_example_is_strongly_connected() {
        let report = wg_product(&example_weights(), &example_kappa()).unwrap();
        assert!(report.weakly_connected);
        assert!(report.strongly_connected);
        assert_eq!(report.components, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn wg_product_isolated_alternative() {
        let w = CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let report = wg_product(&w, &example_kappa()).unwrap();
        assert!(!report.weakly_connected);
        assert_eq!(report.components, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn wg_product_one_sided_profile_weak_not_strong() {
        // Single ranking a1 > a2 > a3 with uniform breaking: a1 never loses.
        let g = uniform_breaking(3).unwrap();
        let p = Profile::new(3, vec![Ranking::new(vec![0, 1, 2]).unwrap()]).unwrap();
        let kappa = kappa_stats(&g, &p).unwrap();
        let report = wg_product(&CmlWeights::uniform(3), &kappa).unwrap();
        assert!(report.weakly_connected);
        assert!(!report.strongly_connected);
    }

    #[test]
    fn maximize_recovers_worked_example() {
        let fit = maximize_cll(
            &pl(),
            &example_kappa(),
            &example_weights(),
            &Theta::zeros(3),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.theta.get(0).abs() < 1e-8);
        assert!((fit.theta.get(1) - 1.5f64.ln()).abs() < 1e-8);
        assert_eq!(fit.theta.get(2), 0.0);
    }

    #[test]
    fn maximize_balanced_two_alternatives_is_zero() {
        let g = uniform_breaking(2).unwrap();
        let p = Profile::new(
            2,
            vec![Ranking::new(vec![0, 1]).unwrap(), Ranking::new(vec![1, 0]).unwrap()],
        )
        .unwrap();
        let kappa = kappa_stats(&g, &p).unwrap();
        let fit = maximize_cll(
            &pl(),
            &kappa,
            &CmlWeights::uniform(2),
            &Theta::zeros(2),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.theta.get(0).abs() < 1e-9);
    }

    #[test]
    fn maximize_recovers_truth_from_population_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 4;
        let truth =
            Theta::new((0..m).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>()).unwrap();
        let g = uniform_breaking(m).unwrap();
        let kappa = expected_kappa(&g, &pl(), &truth).unwrap();
        let fit = maximize_cll(
            &pl(),
            &kappa,
            &CmlWeights::uniform(m),
            &Theta::zeros(m),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        for i in 0..m {
            assert!((fit.theta.get(i) - truth.get(i)).abs() < 1e-6);
        }
    }

    #[test]
    fn scale_equivariance_of_the_argmax() {
        let kappa = example_kappa();
        let w = example_weights();
        let base = maximize_cll(&pl(), &kappa, &w, &Theta::zeros(3), &FitOptions::default())
            .unwrap();
        let scaled_kappa = KappaMatrix::from_entries(
            3,
            (0..9).map(|idx| 3.0 * kappa.get(idx / 3, idx % 3)).collect(),
        )
        .unwrap();
        let scaled_w = w.scaled(0.25).unwrap();
        let scaled = maximize_cll(
            &pl(),
            &scaled_kappa,
            &scaled_w,
            &Theta::zeros(3),
            &FitOptions::default(),
        )
        .unwrap();
        for i in 0..3 {
            assert!((base.theta.get(i) - scaled.theta.get(i)).abs() < 1e-8);
        }
        // Objective scales by c1 * c2.
        assert!((scaled.objective - 0.75 * base.objective).abs() < 1e-9);
    }

    #[test]
    fn hessian_two_alternative_reference() {
        let kappa =
            KappaMatrix::from_entries(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let h = cll_hessian(&pl(), &kappa, &CmlWeights::uniform(2), &Theta::zeros(2)).unwrap();
        assert_eq!(h.nrows(), 1);
        assert!((h[(0, 0)] + 0.25).abs() < 1e-14);
    }

    #[test]
    fn full_hessian_rows_sum_to_zero() {
        let theta = Theta::new(vec![0.7, -0.3, 0.2, 0.0]).unwrap();
        let g = uniform_breaking(4).unwrap();
        for family in [pl(), UtilityFamily::gaussian_unit(4)] {
            let kappa = expected_kappa(&g, &family, &theta).unwrap();
            let h = cll_hessian_full(&family, &kappa, &CmlWeights::uniform(4), &theta).unwrap();
            for i in 0..4 {
                let row: f64 = (0..4).map(|j| h[(i, j)]).sum();
                assert!(row.abs() < 1e-7, "row {i} sums to {row:e}");
            }
        }
    }

    #[test]
    fn hessian_negative_definite_on_connected_instance() {
        let h = cll_hessian(
            &pl(),
            &example_kappa(),
            &example_weights(),
            &Theta::new(vec![0.2, -0.4, 0.0]).unwrap(),
        )
        .unwrap();
        let eig = h.symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e < 0.0), "{eig:?}");
    }

    #[test]
    fn disconnected_objective_invariant_under_component_shift() {
        // Components {0,1} and {2,3}: no cross weights.
        let m = 4;
        let w = CmlWeights::from_pairs(
            m,
            &[(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)],
        )
        .unwrap();
        let g = uniform_breaking(m).unwrap();
        let truth = Theta::new(vec![0.5, -0.1, 0.9, 0.0]).unwrap();
        let kappa = expected_kappa(&g, &pl(), &truth).unwrap();
        let report = wg_product(&w, &kappa).unwrap();
        assert!(!report.weakly_connected);

        let base = vec![0.3, -0.6, 0.2, 0.0];
        let v0 = cll(&pl(), &kappa, &w, &Theta::new(base.clone()).unwrap()).unwrap();
        for c in [0.5, -2.0, 17.0] {
            let shifted = vec![base[0] + c, base[1] + c, base[2], base[3]];
            let v1 = cll(&pl(), &kappa, &w, &Theta::new(shifted).unwrap()).unwrap();
            assert!((v0 - v1).abs() < 1e-10, "shift {c}: {v0} vs {v1}");
        }
    }

    #[test]
    fn concavity_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let kappa = example_kappa();
        let w = example_weights();
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let lambda: f64 = rng.gen_range(0.01..0.99);
            let mix: Vec<f64> =
                a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let va = cll(&pl(), &kappa, &w, &Theta::new(a.clone()).unwrap()).unwrap();
            let vb = cll(&pl(), &kappa, &w, &Theta::new(b.clone()).unwrap()).unwrap();
            let vm = cll(&pl(), &kappa, &w, &Theta::new(mix).unwrap()).unwrap();
            assert!(vm >= lambda * va + (1.0 - lambda) * vb - 1e-12);
        }
    }

    #[test]
    fn weights_text_roundtrip() {
        let w = example_weights();
        let parsed = CmlWeights::from_text(&w.to_text()).unwrap();
        assert_eq!(parsed, w);
        assert!(CmlWeights::from_text("3\n1 1 2.0\n").is_err());
        assert!(CmlWeights::from_text("3\n0 2 1.0\n").is_err());
    }

    #[test]
    fn weight_predicates() {
        assert!(CmlWeights::uniform(4).is_symmetric(0.0));
        assert!(CmlWeights::uniform(4).is_connected());
        let asym = CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0), (2, 1, 1.0), (0, 2, 1.0), (2, 0, 1.0)])
            .unwrap();
        assert!(!asym.is_symmetric(1e-12));
        assert!(asym.is_connected());
        // One-directional weight does not create a connectivity edge.
        let oneway = CmlWeights::from_pairs(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(!oneway.is_connected());
    }
}
