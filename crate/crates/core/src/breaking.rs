//! Rank-breaking graphs over ranking positions and the pairwise-comparison
//! statistics (kappa) they extract from profiles.
//!
//! Positions are 1-based ordinals (position 1 is the top of a ranking),
//! matching the usual naming of position-k breakings. Alternatives stay
//! 0-indexed as everywhere else in the crate.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{all_rankings, ranking_prob, Profile, Ranking, Theta, UtilityFamily};

/// Largest m for which expected kappa may be computed by enumerating all
/// m! rankings (Plackett-Luce; quadrature-based families cap earlier).
pub const EXACT_KAPPA_MAX_M: usize = 8;

/// A weighted undirected graph over ranking positions {1..m}.
///
/// Edge {k, l} with weight g extracts g pairwise comparisons between the
/// alternatives ranked at positions k and l. A zero weight and an absent
/// edge are the same thing.
#[derive(Clone, Debug, PartialEq)]
pub struct BreakingGraph {
    m: usize,
    // Upper triangle, pair (k, l) with 1 <= k < l <= m.
    weights: Vec<f64>,
}

impl BreakingGraph {
    /// Build from explicit edges `(k, l, weight)` with 1-based positions.
    pub fn from_edges(m: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if m < 2 {
            return Err(Error::TooFewAlternatives { m, min: 2 });
        }
        let mut weights = vec![0.0; m * (m - 1) / 2];
        for &(k, l, w) in edges {
            if k == 0 || k >= l || l > m {
                return Err(Error::InvalidPosition { k: l.max(k), m });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::NegativeWeight { what: "breaking edge", value: w });
            }
            weights[tri_index(m, k, l)] += w;
        }
        let g = Self { m, weights };
        g.ensure_nonzero()?;
        Ok(g)
    }

    fn ensure_nonzero(&self) -> Result<()> {
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::EmptyBreaking);
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Weight on the unordered position pair {k, l}, 1-based, k != l.
    pub fn weight(&self, k: usize, l: usize) -> f64 {
        let (a, b) = if k < l { (k, l) } else { (l, k) };
        self.weights[tri_index(self.m, a, b)]
    }

    /// Total breaking weight each ranking deposits.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Edges with positive weight, as (k, l, weight) with k < l.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for k in 1..self.m {
            for l in k + 1..=self.m {
                let w = self.weight(k, l);
                if w > 0.0 {
                    out.push((k, l, w));
                }
            }
        }
        out
    }

    /// Edgewise equality within `tol`.
    pub fn approx_eq(&self, other: &BreakingGraph, tol: f64) -> bool {
        self.m == other.m
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Text form: `m` on the first line, then `k l weight` per positive edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.m);
        for (k, l, w) in self.edges() {
            s.push_str(&format!("{k} {l} {w}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let m: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::Parse("breaking file must start with m".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::Parse(format!("expected `k l weight`, got `{line}`")));
            }
            let k: usize =
                toks[0].parse().map_err(|_| Error::Parse(format!("bad position `{}`", toks[0])))?;
            let l: usize =
                toks[1].parse().map_err(|_| Error::Parse(format!("bad position `{}`", toks[1])))?;
            let w: f64 =
                toks[2].parse().map_err(|_| Error::Parse(format!("bad weight `{}`", toks[2])))?;
            if k >= l {
                return Err(Error::Parse(format!("positions must satisfy k < l, got {k} {l}")));
            }
            edges.push((k, l, w));
        }
        Self::from_edges(m, &edges)
    }
}

fn tri_index(m: usize, k: usize, l: usize) -> usize {
    debug_assert!(1 <= k && k < l && l <= m);
    (k - 1) * m - k * (k - 1) / 2 + (l - k - 1)
}

/// Position-k breaking: unit edges from position k to every later position.
pub fn position_k_breaking(m: usize, k: usize) -> Result<BreakingGraph> {
    if k == 0 || k >= m {
        return Err(Error::InvalidPosition { k, m });
    }
    let edges: Vec<(usize, usize, f64)> = (k + 1..=m).map(|l| (k, l, 1.0)).collect();
    BreakingGraph::from_edges(m, &edges)
}

/// Uniform breaking: weight 1 on every position pair.
pub fn uniform_breaking(m: usize) -> Result<BreakingGraph> {
    if m < 2 {
        return Err(Error::TooFewAlternatives { m, min: 2 });
    }
    let mut edges = Vec::new();
    for k in 1..m {
        for l in k + 1..=m {
            edges.push((k, l, 1.0));
        }
    }
    BreakingGraph::from_edges(m, &edges)
}

/// Edgewise nonnegative linear combination of breakings.
pub fn weighted_union(terms: &[(f64, &BreakingGraph)]) -> Result<BreakingGraph> {
    let m = terms.first().map(|(_, g)| g.m()).ok_or(Error::EmptyBreaking)?;
    let mut weights = vec![0.0; m * (m - 1) / 2];
    for (coeff, g) in terms {
        if !coeff.is_finite() || *coeff < 0.0 {
            return Err(Error::NegativeWeight { what: "union coefficient", value: *coeff });
        }
        if g.m() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: g.m() });
        }
        for (w, gw) in weights.iter_mut().zip(&g.weights) {
            *w += coeff * gw;
        }
    }
    let g = BreakingGraph { m, weights };
    g.ensure_nonzero()?;
    Ok(g)
}

/// Directed pairwise-comparison mass: empirical kappa or expected kappa.
///
/// Entry (i, j) is the average breaking weight deposited on comparisons
/// a_i beats a_j. Also serves as the directed graph G(P).
#[derive(Clone, Debug, PartialEq)]
pub struct KappaMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl KappaMatrix {
    pub fn from_entries(m: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, actual: entries.len() });
        }
        for i in 0..m {
            let v = entries[i * m + i];
            if v != 0.0 {
                return Err(Error::InvalidConfig(format!("kappa diagonal entry {i} is {v}")));
            }
        }
        if entries.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NegativeWeight { what: "kappa entry", value: f64::NAN });
        }
        Ok(Self { m, entries })
    }

    pub fn zeros(m: usize) -> Self {
        Self { m, entries: vec![0.0; m * m] }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    fn add(&mut self, i: usize, j: usize, w: f64) {
        self.entries[i * self.m + j] += w;
    }

    fn scale(&mut self, c: f64) {
        for v in &mut self.entries {
            *v *= c;
        }
    }

    /// Sum of all entries; equals the breaking's total weight for both
    /// empirical and expected kappa.
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// Empirical kappa statistics of a profile under a breaking graph.
pub fn kappa_stats(g: &BreakingGraph, profile: &Profile) -> Result<KappaMatrix> {
    if g.m() != profile.m() {
        return Err(Error::DimensionMismatch { expected: g.m(), actual: profile.m() });
    }
    let mut kappa = KappaMatrix::zeros(g.m());
    let edges = g.edges();
    for r in profile.rankings() {
        deposit(&mut kappa, &edges, r, 1.0);
    }
    kappa.scale(1.0 / profile.n() as f64);
    Ok(kappa)
}

fn deposit(kappa: &mut KappaMatrix, edges: &[(usize, usize, f64)], r: &Ranking, coeff: f64) {
    let order = r.order();
    for &(k, l, w) in edges {
        // Position k outranks position l, so the alternative at k wins.
        kappa.add(order[k - 1], order[l - 1], coeff * w);
    }
}

/// Expected kappa under the model, exact by enumeration over all rankings.
///
/// Plackett-Luce supports m <= 8; families whose ranking probabilities come
/// from quadrature cap at m <= 6. Use [`expected_kappa_mc`] beyond that.
pub fn expected_kappa(
    g: &BreakingGraph,
    family: &UtilityFamily,
    theta: &Theta,
) -> Result<KappaMatrix> {
    let m = g.m();
    if m != theta.m() {
        return Err(Error::DimensionMismatch { expected: m, actual: theta.m() });
    }
    family.check_m(m)?;
    let cap = if family.is_plackett_luce() {
        EXACT_KAPPA_MAX_M
    } else {
        crate::model::RANKING_QUAD_MAX_M
    };
    if m > cap {
        return Err(Error::ExactModeTooLarge { m, max: cap });
    }
    let edges = g.edges();
    let mut kappa = KappaMatrix::zeros(m);
    for r in all_rankings(m) {
        let p = ranking_prob(family, theta, &r)?;
        deposit(&mut kappa, &edges, &r, p);
    }
    Ok(kappa)
}

/// Monte-Carlo estimate of expected kappa from sampled rankings.
pub fn expected_kappa_mc(
    g: &BreakingGraph,
    family: &UtilityFamily,
    theta: &Theta,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<KappaMatrix> {
    let m = g.m();
    if m != theta.m() {
        return Err(Error::DimensionMismatch { expected: m, actual: theta.m() });
    }
    family.check_m(m)?;
    let edges = g.edges();
    let mut kappa = KappaMatrix::zeros(m);
    for _ in 0..samples {
        let r = crate::sampling::sample_ranking(family, theta, rng);
        deposit(&mut kappa, &edges, &r, 1.0);
    }
    kappa.scale(1.0 / samples as f64);
    Ok(kappa)
}

/// Decomposition of a breaking into per-position coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionUnion {
    /// alpha_k for k = 1..m-1 (index 0 holds alpha_1).
    pub coefficients: Vec<f64>,
}

/// Accepts iff g is a weighted union of position-k breakings, i.e. for every
/// k the weights g_{kl} are constant over l > k (within tol).
pub fn is_weighted_union_of_position_k(g: &BreakingGraph, tol: f64) -> Option<PositionUnion> {
    let m = g.m();
    let mut coefficients = Vec::with_capacity(m - 1);
    for k in 1..m {
        let alpha = g.weight(k, k + 1);
        for l in k + 1..=m {
            if (g.weight(k, l) - alpha).abs() > tol {
                return None;
            }
        }
        coefficients.push(alpha);
    }
    Some(PositionUnion { coefficients })
}

/// True iff all C(m,2) weights are equal within tol (equal, not unit).
pub fn is_uniform(g: &BreakingGraph, tol: f64) -> bool {
    let first = g.weight(1, 2);
    g.weights.iter().all(|w| (w - first).abs() <= tol)
}

/// Default tolerance for graph-shape predicates.
pub const GRAPH_SHAPE_TOL: f64 = 1e-9;
