//! Random utility model (RUM) location families and their probability
//! computations: pairwise comparison probabilities, full-ranking
//! probabilities, derivatives, and log-concavity probes.
//!
//! Alternatives are indexed 0..m in the API. The location parameter vector
//! is gauge-fixed: the last entry is always 0, and constructors re-gauge by
//! subtracting the last entry (all quantities are shift-invariant).

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::quad;

/// Gauss-Legendre node count for pairwise integrals of custom families.
const PAIRWISE_GL_NODES: usize = 256;
/// Half-width, in units of the family scale, of pairwise integration windows.
const PAIRWISE_MARGIN: f64 = 10.0;
/// Largest m for which non-PL ranking probabilities use exact quadrature.
pub const RANKING_QUAD_MAX_M: usize = 6;
/// Sample count for the Monte-Carlo ranking-probability fallback.
const RANKING_MC_SAMPLES: usize = 1_000_000;

/// Location parameter vector with the gauge theta_m = 0.
///
/// Construction subtracts the last entry, so the invariant holds for every
/// value of this type. Serializes as a plain array.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct Theta {
    values: Vec<f64>,
}

impl Theta {
    /// Build from raw location values; re-gauges so the last entry is 0.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewAlternatives { m: values.len(), min: 2 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter);
        }
        let last = values[values.len() - 1];
        let values = values.iter().map(|v| v - last).collect();
        Ok(Self { values })
    }

    /// The zero vector on m alternatives.
    pub fn zeros(m: usize) -> Self {
        assert!(m >= 2);
        Self { values: vec![0.0; m] }
    }

    /// Build from the m-1 free coordinates, appending the gauge zero.
    pub fn from_free(free: &[f64]) -> Result<Self> {
        let mut values = free.to_vec();
        values.push(0.0);
        Self::new(values)
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// The m-1 free (gauge-fixed) coordinates.
    pub fn free(&self) -> &[f64] {
        &self.values[..self.values.len() - 1]
    }
}

/// User-supplied symmetric utility shape, given by density and CDF.
#[derive(Clone)]
pub struct CustomSymmetric {
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomSymmetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomSymmetric")
    }
}

impl CustomSymmetric {
    /// Validate symmetry about 0 (tolerance 1e-12 on a probe grid) and
    /// strict positivity on |x| <= 10. Densities with compact support are
    /// rejected rather than guessed at.
    pub fn new(
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut max_dev: f64 = 0.0;
        for k in 0..=40 {
            let x = 0.25 * k as f64;
            let d = density(x);
            let dm = density(-x);
            if !(d.is_finite() && dm.is_finite()) || d <= 0.0 || dm <= 0.0 {
                return Err(Error::NonPositiveDensity { x });
            }
            max_dev = max_dev.max((d - dm).abs());
        }
        if max_dev > 1e-12 {
            return Err(Error::AsymmetricDensity { max_dev });
        }
        Ok(Self { density: Arc::new(density), cdf: Arc::new(cdf) })
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }
}

/// A RUM location family: the fixed shapes of the utility distributions.
#[derive(Clone, Debug)]
pub enum UtilityFamily {
    /// Gumbel utilities; rankings follow the Plackett-Luce model.
    PlackettLuce,
    /// Gaussian utilities with per-alternative standard deviations.
    Gaussian { scales: Vec<f64> },
    /// A common symmetric shape shared by all alternatives.
    CustomSymmetric(CustomSymmetric),
}

impl UtilityFamily {
    pub fn plackett_luce() -> Self {
        Self::PlackettLuce
    }

    /// Gaussian family with unit variances, the default in experiments.
    pub fn gaussian_unit(m: usize) -> Self {
        Self::Gaussian { scales: vec![1.0; m] }
    }

    pub fn gaussian(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidScales);
        }
        Ok(Self::Gaussian { scales })
    }

    pub fn custom(shape: CustomSymmetric) -> Self {
        Self::CustomSymmetric(shape)
    }

    pub fn is_plackett_luce(&self) -> bool {
        matches!(self, Self::PlackettLuce)
    }

    /// Whether every utility shape is symmetric about its mean.
    pub fn is_symmetric(&self) -> bool {
        !self.is_plackett_luce()
    }

    /// A length scale for integration windows (max Gaussian scale, else 1).
    pub fn scale_hint(&self) -> f64 {
        match self {
            Self::Gaussian { scales } => scales.iter().cloned().fold(1.0, f64::max),
            _ => 1.0,
        }
    }

    /// Check that the family is usable with m alternatives.
    pub fn check_m(&self, m: usize) -> Result<()> {
        if let Self::Gaussian { scales } = self {
            if scales.len() != m {
                return Err(Error::DimensionMismatch { expected: m, actual: scales.len() });
            }
        }
        Ok(())
    }

    /// Mean-zero density of alternative i's utility shape.
    pub fn shape_density(&self, i: usize, x: f64) -> f64 {
        match self {
            Self::PlackettLuce => dist::gumbel_pdf(x),
            Self::Gaussian { scales } => dist::normal_pdf(x / scales[i]) / scales[i],
            Self::CustomSymmetric(c) => c.density(x),
        }
    }

    /// Mean-zero CDF of alternative i's utility shape.
    pub fn shape_cdf(&self, i: usize, x: f64) -> f64 {
        match self {
            Self::PlackettLuce => dist::gumbel_cdf(x),
            Self::Gaussian { scales } => dist::normal_cdf(x / scales[i]),
            Self::CustomSymmetric(c) => c.cdf(x),
        }
    }
}

/// A full ranking: alternative indices from top choice to last.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    /// Validates that `order` is a permutation of 0..m.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        if m < 2 {
            return Err(Error::InvalidRanking(format!("need at least 2 alternatives, got {m}")));
        }
        let mut seen = vec![false; m];
        for &a in &order {
            if a >= m {
                return Err(Error::InvalidRanking(format!("index {a} out of range for m = {m}")));
            }
            if seen[a] {
                return Err(Error::InvalidRanking(format!("alternative {a} repeated")));
            }
            seen[a] = true;
        }
        Ok(Self { order })
    }

    pub fn m(&self) -> usize {
        self.order.len()
    }

    /// Alternatives from top (position 1) to bottom (position m).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 0-based position at which alternative `alt` is ranked.
    pub fn position_of(&self, alt: usize) -> usize {
        self.order.iter().position(|&a| a == alt).expect("alternative present")
    }

    pub fn reversed(&self) -> Ranking {
        let mut order = self.order.clone();
        order.reverse();
        Ranking { order }
    }
}

/// A preference profile: n rankings over the same m alternatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    m: usize,
    rankings: Vec<Ranking>,
}

impl Profile {
    pub fn new(m: usize, rankings: Vec<Ranking>) -> Result<Self> {
        if rankings.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for r in &rankings {
            if r.m() != m {
                return Err(Error::DimensionMismatch { expected: m, actual: r.m() });
            }
        }
        Ok(Self { m, rankings })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.rankings.len()
    }

    pub fn rankings(&self) -> &[Ranking] {
        &self.rankings
    }

    /// Text form: header `m n`, then one ranking per line, alternatives
    /// written 1-based from top to bottom.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.m, self.rankings.len());
        for r in &self.rankings {
            let row: Vec<String> = r.order().iter().map(|a| (a + 1).to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parse the text form; rejects rows that are not permutations of 1..m.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty profile file".into()))?;
        let mut it = header.split_whitespace();
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad profile header".into()))?;
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad profile header".into()))?;
        if it.next().is_some() {
            return Err(Error::Parse("profile header must be `m n`".into()));
        }
        let mut rankings = Vec::with_capacity(n);
        for line in lines {
            let mut order = Vec::with_capacity(m);
            for tok in line.split_whitespace() {
                let v: usize =
                    tok.parse().map_err(|_| Error::Parse(format!("bad index `{tok}`")))?;
                if v == 0 || v > m {
                    return Err(Error::Parse(format!("index {v} outside 1..={m}")));
                }
                order.push(v - 1);
            }
            if order.len() != m {
                return Err(Error::Parse(format!(
                    "ranking has {} entries, expected {m}",
                    order.len()
                )));
            }
            rankings.push(Ranking::new(order).map_err(|e| Error::Parse(e.to_string()))?);
        }
        if rankings.len() != n {
            return Err(Error::Parse(format!(
                "header promised {n} rankings, found {}",
                rankings.len()
            )));
        }
        Profile::new(m, rankings)
    }
}

fn check_pair(theta: &Theta, family: &UtilityFamily, i: usize, j: usize) -> Result<()> {
    let m = theta.m();
    family.check_m(m)?;
    if i >= m {
        return Err(Error::IndexOutOfBounds { index: i, m });
    }
    if j >= m {
        return Err(Error::IndexOutOfBounds { index: j, m });
    }
    if i == j {
        return Err(Error::InvalidPair(i));
    }
    Ok(())
}

/// Pr(a_i beats a_j) under the family at `theta`.
///
/// Plackett-Luce and Gaussian use closed forms; custom shapes integrate
/// density_j(u - theta_j) * (1 - CDF_i(u - theta_i)) by Gauss-Legendre.
pub fn pairwise_prob(family: &UtilityFamily, theta: &Theta, i: usize, j: usize) -> Result<f64> {
    check_pair(theta, family, i, j)?;
    let d = theta.get(i) - theta.get(j);
    Ok(match family {
        UtilityFamily::PlackettLuce => dist::sigmoid(d),
        UtilityFamily::Gaussian { scales } => {
            let s = scales[i].hypot(scales[j]);
            dist::normal_cdf(d / s)
        }
        UtilityFamily::CustomSymmetric(c) => {
            let (ti, tj) = (theta.get(i), theta.get(j));
            let half = PAIRWISE_MARGIN * family.scale_hint();
            let (lo, hi) = (ti.min(tj) - half, ti.max(tj) + half);
            quad::gl_integrate(
                |u| c.density(u - tj) * (1.0 - c.cdf(u - ti)),
                lo,
                hi,
                PAIRWISE_GL_NODES,
            )
        }
    })
}

/// Partial derivative of `pairwise_prob(i, j)` with respect to theta_l.
///
/// Zero when l is neither i nor j; satisfies d p_ij + d p_ji = 0.
pub fn pairwise_prob_grad(
    family: &UtilityFamily,
    theta: &Theta,
    i: usize,
    j: usize,
    l: usize,
) -> Result<f64> {
    check_pair(theta, family, i, j)?;
    if l >= theta.m() {
        return Err(Error::IndexOutOfBounds { index: l, m: theta.m() });
    }
    if l != i && l != j {
        return Ok(0.0);
    }
    let sign = if l == i { 1.0 } else { -1.0 };
    let d = theta.get(i) - theta.get(j);
    Ok(match family {
        UtilityFamily::PlackettLuce => {
            let p = dist::sigmoid(d);
            sign * p * (1.0 - p)
        }
        UtilityFamily::Gaussian { scales } => {
            let s = scales[i].hypot(scales[j]);
            sign * dist::normal_pdf(d / s) / s
        }
        UtilityFamily::CustomSymmetric(c) => {
            let (ti, tj) = (theta.get(i), theta.get(j));
            let half = PAIRWISE_MARGIN * family.scale_hint();
            let (lo, hi) = (ti.min(tj) - half, ti.max(tj) + half);
            sign * quad::gl_integrate(
                |u| c.density(u - tj) * c.density(u - ti),
                lo,
                hi,
                PAIRWISE_GL_NODES,
            )
        }
    })
}

/// Grid parameters for exact non-PL ranking probabilities.
#[derive(Clone, Copy, Debug)]
pub struct RankingQuadrature {
    /// Target grid spacing.
    pub step: f64,
    /// Window margin beyond the theta range, in units of the family scale.
    pub margin: f64,
}

impl Default for RankingQuadrature {
    fn default() -> Self {
        Self { step: 1e-3, margin: 12.0 }
    }
}

/// Probability of observing the full ranking `r`.
///
/// Plackett-Luce uses the exact product formula for any m. Other families
/// use sequential-conditioning quadrature up to m = 6 and fall back to
/// Monte-Carlo (1e6 samples, fixed internal seed) beyond that; use
/// [`ranking_prob_mc`] directly for control over samples and seed.
pub fn ranking_prob(family: &UtilityFamily, theta: &Theta, r: &Ranking) -> Result<f64> {
    if r.m() != theta.m() {
        return Err(Error::DimensionMismatch { expected: theta.m(), actual: r.m() });
    }
    family.check_m(theta.m())?;
    match family {
        UtilityFamily::PlackettLuce => Ok(ranking_prob_pl(theta, r)),
        _ if theta.m() <= RANKING_QUAD_MAX_M => {
            ranking_prob_quadrature(family, theta, r, RankingQuadrature::default())
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_4a9c_1b2d_37e1);
            Ok(ranking_prob_mc(family, theta, r, RANKING_MC_SAMPLES, &mut rng)?.0)
        }
    }
}

/// Exact Plackett-Luce ranking probability via the product of choice terms.
pub fn ranking_prob_pl(theta: &Theta, r: &Ranking) -> f64 {
    log_ranking_prob_pl(theta, r).exp()
}

pub(crate) fn log_ranking_prob_pl(theta: &Theta, r: &Ranking) -> f64 {
    let m = r.m();
    // Backward pass builds log of the suffix sums of e^theta.
    let mut log_suffix = vec![0.0; m];
    let mut acc = theta.get(r.order()[m - 1]);
    log_suffix[m - 1] = acc;
    for t in (0..m - 1).rev() {
        acc = dist::log_sum_exp2(theta.get(r.order()[t]), acc);
        log_suffix[t] = acc;
    }
    let mut logp = 0.0;
    for t in 0..m - 1 {
        logp += theta.get(r.order()[t]) - log_suffix[t];
    }
    logp
}

/// Exact ranking probability for any family by sequential conditioning:
/// cumulative integrals from the bottom of the ranking upward.
pub fn ranking_prob_quadrature(
    family: &UtilityFamily,
    theta: &Theta,
    r: &Ranking,
    params: RankingQuadrature,
) -> Result<f64> {
    let m = r.m();
    if m != theta.m() {
        return Err(Error::DimensionMismatch { expected: theta.m(), actual: m });
    }
    family.check_m(m)?;
    let vals = theta.values();
    let half = params.margin * family.scale_hint();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min) - half;
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + half;
    let (grid, h) = quad::uniform_grid(lo, hi, params.step)?;

    // g(u) = Pr(everything below position `level` is < u and in order).
    let bottom = r.order()[m - 1];
    let mut g: Vec<f64> =
        grid.iter().map(|&u| family.shape_cdf(bottom, u - theta.get(bottom))).collect();
    for level in (1..m - 1).rev() {
        let alt = r.order()[level];
        let integrand: Vec<f64> = grid
            .iter()
            .zip(&g)
            .map(|(&u, &gv)| family.shape_density(alt, u - theta.get(alt)) * gv)
            .collect();
        g = quad::cumulative_integral(&integrand, h);
    }
    let top = r.order()[0];
    let integrand: Vec<f64> = grid
        .iter()
        .zip(&g)
        .map(|(&u, &gv)| family.shape_density(top, u - theta.get(top)) * gv)
        .collect();
    Ok(*quad::cumulative_integral(&integrand, h).last().unwrap())
}

/// Monte-Carlo estimate of a ranking probability with its standard error.
pub fn ranking_prob_mc(
    family: &UtilityFamily,
    theta: &Theta,
    r: &Ranking,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let m = r.m();
    if m != theta.m() {
        return Err(Error::DimensionMismatch { expected: theta.m(), actual: m });
    }
    family.check_m(m)?;
    let mut hits = 0usize;
    let mut utils = vec![0.0f64; m];
    for _ in 0..samples {
        for (i, u) in utils.iter_mut().enumerate() {
            *u = crate::sampling::draw_utility(family, theta.get(i), i, rng);
        }
        let ordered = r.order().windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            utils[a] > utils[b] || (utils[a] == utils[b] && a < b)
        });
        if ordered {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    Ok((p, se))
}

/// Worst second difference of ln f over the interior of a uniform grid.
///
/// A strictly negative return certifies strict log-concavity of f on the
/// grid; zero is the log-linear boundary case.
pub fn log_concavity_probe(f: impl Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    let logs = grid
        .iter()
        .map(|&x| {
            let v = f(x);
            if !v.is_finite() || v <= 0.0 {
                Err(Error::NonPositiveDensity { x })
            } else {
                Ok(v.ln())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    probe_logs(&logs, grid)
}

/// Same probe, but takes ln f directly so callers can preserve precision
/// where f itself would round to 1 (CDF tails).
pub fn log_concavity_probe_log(log_f: impl Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    let logs = grid
        .iter()
        .map(|&x| {
            let v = log_f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonPositiveDensity { x })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    probe_logs(&logs, grid)
}

fn probe_logs(logs: &[f64], grid: &[f64]) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::InvalidGrid);
    }
    let h = grid[1] - grid[0];
    if h <= 0.0 {
        return Err(Error::InvalidGrid);
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::InvalidGrid);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for k in 1..logs.len() - 1 {
        let second = logs[k - 1] - 2.0 * logs[k] + logs[k + 1];
        if second > worst {
            worst = second;
        }
    }
    Ok(worst)
}

/// Uniform grid of `points` values spanning [lo, hi], for probe inputs.
pub fn probe_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 3 && hi > lo);
    let h = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| lo + h * k as f64).collect()
}

/// All m! rankings in lexicographic order of their top-first index lists.
///
/// The enumeration backbone for expectation oracles; keep m small.
pub fn all_rankings(m: usize) -> Vec<Ranking> {
    assert!((2..=10).contains(&m), "enumeration over m! requires 2 <= m <= 10");
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(Ranking { order: cur.clone() });
        let Some(i) = (0..m - 1).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..m).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}
