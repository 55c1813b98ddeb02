//! Scalar distribution functions: standard Gumbel, standard normal, and the
//! logistic link, with log-space variants that stay accurate in the tails.

use statrs::function::erf::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Log of the standard normal density.
pub fn normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Log of the standard normal CDF, usable far into both tails.
///
/// For x > 0 the complement form ln1p(-Q) keeps precision where the CDF
/// rounds to 1; below x = -37 the erfc underflows and an asymptotic
/// expansion of the Mills ratio takes over.
pub fn normal_log_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    } else if x > -37.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        let z = -x;
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Hazard ratio phi(x)/Phi(x) of the standard normal, stable for x << 0.
pub fn normal_hazard(x: f64) -> f64 {
    if x > -30.0 {
        normal_pdf(x) / normal_cdf(x)
    } else {
        let z = -x;
        let z2 = z * z;
        z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2))
    }
}

/// Standard Gumbel density e^{-x - e^{-x}}.
pub fn gumbel_pdf(x: f64) -> f64 {
    gumbel_log_pdf(x).exp()
}

/// Log of the standard Gumbel density.
pub fn gumbel_log_pdf(x: f64) -> f64 {
    -x - (-x).exp()
}

/// Standard Gumbel CDF e^{-e^{-x}}.
pub fn gumbel_cdf(x: f64) -> f64 {
    gumbel_log_cdf(x).exp()
}

/// Log of the standard Gumbel CDF, exact even where the CDF rounds to 1.
pub fn gumbel_log_cdf(x: f64) -> f64 {
    -(-x).exp()
}

/// Gumbel quantile -ln(-ln u) for u in (0, 1).
pub fn gumbel_quantile(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Logistic function 1 / (1 + e^{-x}).
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln sigmoid(x) = -ln(1 + e^{-x}), computed without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// ln(e^a + e^b).
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
