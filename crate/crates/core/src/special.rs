//! Gamma-family special functions on the positive real axis.
//!
//! `ln_gamma` uses a Lanczos approximation (g = 7, nine terms) below 10 and
//! the Stirling series above it. `digamma` and `trigamma` shift the argument
//! upward with their recurrences and finish with the asymptotic expansions.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the recurrences are used before the asymptotic series.
const ASYMPTOTIC_START: f64 = 10.0;

fn check_arg(k: f64, name: &str) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} requires a positive finite argument, got {k}"
        )))
    }
}

/// Natural logarithm of the gamma function for `k > 0`.
pub fn ln_gamma(k: f64) -> Result<f64> {
    check_arg(k, "ln_gamma")?;
    Ok(ln_gamma_unchecked(k))
}

/// Digamma function, the derivative of `ln_gamma`.
pub fn digamma(k: f64) -> Result<f64> {
    check_arg(k, "digamma")?;
    Ok(digamma_unchecked(k))
}

/// Trigamma function, the derivative of `digamma`.
pub fn trigamma(k: f64) -> Result<f64> {
    check_arg(k, "trigamma")?;
    Ok(trigamma_unchecked(k))
}

pub(crate) fn ln_gamma_unchecked(k: f64) -> f64 {
    if k >= ASYMPTOTIC_START {
        return stirling_ln_gamma(k);
    }
    if k < 0.5 {
        // ln Γ(k) = ln Γ(k + 1) - ln k keeps the Lanczos sum away from its pole.
        return lanczos_ln_gamma(k + 1.0) - k.ln();
    }
    lanczos_ln_gamma(k)
}

fn lanczos_ln_gamma(k: f64) -> f64 {
    let x = k - 1.0;
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (x + 0.5) * t.ln() - t + a.ln()
}

fn stirling_ln_gamma(k: f64) -> f64 {
    let inv = 1.0 / k;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))));
    (k - 0.5) * k.ln() - k + HALF_LN_TWO_PI + series
}

pub(crate) fn digamma_unchecked(mut k: f64) -> f64 {
    let mut acc = 0.0;
    while k < ASYMPTOTIC_START {
        acc -= 1.0 / k;
        k += 1.0;
    }
    let inv = 1.0 / k;
    let inv2 = inv * inv;
    // Bernoulli-number tail: -sum B_2n / (2n k^2n)
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    acc + k.ln() - 0.5 * inv - tail
}

pub(crate) fn trigamma_unchecked(mut k: f64) -> f64 {
    let mut acc = 0.0;
    while k < ASYMPTOTIC_START {
        acc += 1.0 / (k * k);
        k += 1.0;
    }
    let inv = 1.0 / k;
    let inv2 = inv * inv;
    let tail = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    acc + tail
}
