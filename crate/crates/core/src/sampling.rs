//! Ground-truth generation and synthetic ranking profiles with
//! reproducible, platform-independent randomness (ChaCha8 streams).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dist;
use crate::error::Result;
use crate::model::{Profile, Ranking, Theta, UtilityFamily};

/// The deterministic generator used throughout: same seed, same stream,
/// on every platform.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`; used to
/// give parallel trials their own reproducible randomness.
pub fn derive_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ground truth: each coordinate Uniform[0, 5], then shifted so the last
/// entry is 0.
pub fn sample_ground_truth(m: usize, rng: &mut SeededRng) -> Theta {
    assert!(m >= 2);
    let values: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0)).collect();
    Theta::new(values).expect("finite by construction")
}

/// One latent utility for alternative i at location `loc`.
pub(crate) fn draw_utility(family: &UtilityFamily, loc: f64, i: usize, rng: &mut SeededRng) -> f64 {
    match family {
        UtilityFamily::PlackettLuce => {
            // Inverse-CDF Gumbel draw: loc - ln(-ln U).
            let mut u: f64 = rng.gen();
            if u <= 0.0 {
                u = f64::MIN_POSITIVE;
            }
            loc + dist::gumbel_quantile(u)
        }
        UtilityFamily::Gaussian { scales } => {
            let z: f64 = rng.sample(StandardNormal);
            loc + scales[i] * z
        }
        UtilityFamily::CustomSymmetric(c) => {
            let mut u: f64 = rng.gen();
            u = u.clamp(1e-16, 1.0 - 1e-16);
            loc + invert_cdf(|x| c.cdf(x), u)
        }
    }
}

/// Invert a CDF by bracket expansion and bisection.
fn invert_cdf(cdf: impl Fn(f64) -> f64, u: f64) -> f64 {
    let mut lo = -1.0;
    let mut hi = 1.0;
    for _ in 0..60 {
        if cdf(lo) < u {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..60 {
        if cdf(hi) > u {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Draw one ranking: sample all utilities and sort descending. Ties (a
/// measure-zero event) break toward the lower alternative index.
pub fn sample_ranking(family: &UtilityFamily, theta: &Theta, rng: &mut SeededRng) -> Ranking {
    let m = theta.m();
    let mut scored: Vec<(f64, usize)> =
        (0..m).map(|i| (draw_utility(family, theta.get(i), i, rng), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ranking::new(scored.into_iter().map(|(_, i)| i).collect()).expect("permutation by construction")
}

/// Plackett-Luce sequential-choice sampler: repeatedly pick the next
/// alternative with probability proportional to e^theta. Agrees in
/// distribution with the Gumbel-sort sampler.
pub fn sample_ranking_pl_sequential(theta: &Theta, rng: &mut SeededRng) -> Ranking {
    let m = theta.m();
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut order = Vec::with_capacity(m);
    while remaining.len() > 1 {
        let max_t = remaining.iter().map(|&i| theta.get(i)).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = remaining.iter().map(|&i| (theta.get(i) - max_t).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut draw = rng.gen_range(0.0..total);
        let mut chosen = remaining.len() - 1;
        for (pos, w) in weights.iter().enumerate() {
            if draw < *w {
                chosen = pos;
                break;
            }
            draw -= w;
        }
        order.push(remaining.remove(chosen));
    }
    order.push(remaining[0]);
    Ranking::new(order).expect("permutation by construction")
}

/// n i.i.d. rankings.
pub fn sample_profile(
    family: &UtilityFamily,
    theta: &Theta,
    n: usize,
    rng: &mut SeededRng,
) -> Result<Profile> {
    family.check_m(theta.m())?;
    let rankings = (0..n).map(|_| sample_ranking(family, theta, rng)).collect();
    Profile::new(theta.m(), rankings)
}
