//! Censoring by the increment core: the probability that a cell is left
//! uncut and the density of the observed length of a cut cell.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increment core of radius `r` (mm). Cells longer than `2r` are always cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreGeometry {
    r: f64,
}

impl CoreGeometry {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_finite() && r > 0.0 {
            Ok(Self { r })
        } else {
            Err(Error::Domain(format!("core radius must be positive and finite, got {r}")))
        }
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.r
    }

    /// `t(y) = πr² + 2ry`.
    pub fn area_factor(&self, y: f64) -> Result<f64> {
        check_length(y)?;
        Ok(self.area_factor_unchecked(y))
    }

    pub(crate) fn area_factor_unchecked(&self, y: f64) -> f64 {
        PI * self.r * self.r + 2.0 * self.r * y
    }

    /// Probability that a cell of true length `y` is not cut by the core.
    pub fn prob_uncut(&self, y: f64) -> Result<f64> {
        check_length(y)?;
        Ok(self.prob_uncut_unchecked(y))
    }

    pub(crate) fn prob_uncut_unchecked(&self, y: f64) -> f64 {
        let r = self.r;
        if y >= 2.0 * r {
            return 0.0;
        }
        if y <= 0.0 {
            return 1.0;
        }
        let root = (4.0 * r * r - y * y).max(0.0).sqrt();
        let arg = (root / (2.0 * r)).clamp(0.0, 1.0);
        let p = (2.0 * r * r * arg.asin() - 0.5 * y * root) / self.area_factor_unchecked(y);
        p.clamp(0.0, 1.0)
    }

    /// Sub-density of the observed length `x` of a cut cell with true length `y`.
    pub fn cut_kernel(&self, x: f64, y: f64) -> Result<f64> {
        let d = self.diameter();
        if !(x > 0.0 && x < d && x < y) || !y.is_finite() {
            return Err(Error::Domain(format!(
                "cut kernel needs 0 < x < min(y, 2r); got x = {x}, y = {y}, 2r = {d}"
            )));
        }
        Ok(self.cut_kernel_unchecked(x, y))
    }

    pub(crate) fn cut_kernel_unchecked(&self, x: f64, y: f64) -> f64 {
        let r = self.r;
        let num = 8.0 * r * r - 3.0 * x * x + y * x;
        num / (self.area_factor_unchecked(y) * (4.0 * r * r - x * x).sqrt())
    }

    /// `8r² - 3x²`, the part of the kernel numerator that does not depend on `y`.
    pub(crate) fn kernel_offset(&self, x: f64) -> f64 {
        8.0 * self.r * self.r - 3.0 * x * x
    }

    /// `1 / sqrt(4r² - x²)`.
    pub(crate) fn kernel_scale(&self, x: f64) -> f64 {
        1.0 / (4.0 * self.r * self.r - x * x).sqrt()
    }

    /// Antiderivative in `x` of the cut kernel for fixed `y`, valid on `[0, min(y, 2r)]`.
    fn kernel_antiderivative(&self, x: f64, y: f64) -> f64 {
        let a = self.diameter();
        let x = x.clamp(0.0, a);
        let root = (a * a - x * x).max(0.0).sqrt();
        let arc = (x / a).clamp(-1.0, 1.0).asin();
        let r2 = self.r * self.r;
        (8.0 * r2 * arc - 3.0 * (0.5 * a * a * arc - 0.5 * x * root) - y * root)
            / self.area_factor_unchecked(y)
    }

    /// `∫₀ˣ k(s|y) ds` in closed form, for `0 ≤ x ≤ min(y, 2r)`.
    pub fn cut_kernel_cdf(&self, x: f64, y: f64) -> f64 {
        let upper = x.min(y).min(self.diameter());
        self.kernel_antiderivative(upper, y) - self.kernel_antiderivative(0.0, y)
    }

    /// Total probability that a cell of length `y` is cut: `1 - p_UC(y)`.
    pub fn cut_mass(&self, y: f64) -> f64 {
        self.cut_kernel_cdf(y.min(self.diameter()), y)
    }
}

fn check_length(y: f64) -> Result<()> {
    if y >= 0.0 && !y.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("length must be non-negative, got {y}")))
    }
}
