//! Distribution of users' private sampling costs.
//!
//! Every variant lives on `[0, b]`. The pricing formulas consume a linear
//! CDF, so non-linear laws are first reduced with [`fit_linear`].

use serde::{Deserialize, Serialize};

use crate::error::{Checker, Error, Result};
use crate::roots::bisect_increasing;

const INVERSE_TOL: f64 = 1e-10;

/// `F(pi) = clamp(a1 + a2 * pi, 0, 1)` on `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCdf {
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
}

impl LinearCdf {
    pub fn new(a1: f64, a2: f64, b: f64) -> Result<Self> {
        let mut c = Checker::default();
        c.check(a1.is_finite(), "a1", "must be finite");
        c.check(a2.is_finite() && a2 >= 0.0, "a2", "must be finite and >= 0");
        c.check(b.is_finite() && b > 0.0, "b", "must be > 0");
        c.finish()?;
        Ok(Self { a1, a2, b })
    }

    /// Clamping happens here, never at fit time.
    pub fn eval(&self, pi: f64) -> f64 {
        (self.a1 + self.a2 * pi).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostDistribution {
    Uniform {
        b: f64,
    },
    TruncatedNormal {
        #[serde(rename = "mu")]
        mean: f64,
        #[serde(rename = "sigma")]
        std_dev: f64,
        b: f64,
    },
    Linear(LinearCdf),
}

impl CostDistribution {
    pub fn uniform(b: f64) -> Result<Self> {
        let d = Self::Uniform { b };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_normal(mean: f64, std_dev: f64, b: f64) -> Result<Self> {
        let d = Self::TruncatedNormal { mean, std_dev, b };
        d.validate()?;
        Ok(d)
    }

    pub fn linear(a1: f64, a2: f64, b: f64) -> Result<Self> {
        Ok(Self::Linear(LinearCdf::new(a1, a2, b)?))
    }

    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        let b = self.upper_bound();
        c.check(b.is_finite() && b > 0.0, "b", "must be > 0");
        match *self {
            Self::Uniform { .. } => {}
            Self::TruncatedNormal { mean, std_dev, .. } => {
                c.check(mean.is_finite(), "mu", "must be finite");
                c.check(std_dev.is_finite() && std_dev > 0.0, "sigma", "must be > 0");
                if mean.is_finite() && std_dev > 0.0 && b > 0.0 {
                    let (_, den) = tn_mass(mean, std_dev, b, b);
                    c.check(
                        den > 0.0,
                        "sigma",
                        "too small for mu: no representable mass on [0, b]",
                    );
                }
            }
            Self::Linear(l) => {
                c.check(l.a1.is_finite(), "a1", "must be finite");
                c.check(l.a2.is_finite() && l.a2 >= 0.0, "a2", "must be finite and >= 0");
            }
        }
        c.finish()
    }

    pub fn upper_bound(&self) -> f64 {
        match *self {
            Self::Uniform { b } | Self::TruncatedNormal { b, .. } => b,
            Self::Linear(l) => l.b,
        }
    }

    /// CDF on `[0, b]`; arguments outside the support are a domain error.
    pub fn cdf(&self, pi: f64) -> Result<f64> {
        let b = self.upper_bound();
        if !(0.0..=b).contains(&pi) {
            return Err(Error::Domain {
                what: "cost",
                value: pi,
                lo: 0.0,
                hi: b,
            });
        }
        Ok(self.cdf_unchecked(pi))
    }

    /// Caller guarantees `0 <= pi <= b`.
    pub(crate) fn cdf_unchecked(&self, pi: f64) -> f64 {
        match *self {
            Self::Uniform { b } => pi / b,
            Self::TruncatedNormal { mean, std_dev, b } => {
                let (num, den) = tn_mass(mean, std_dev, b, pi);
                (num / den).clamp(0.0, 1.0)
            }
            Self::Linear(l) => l.eval(pi),
        }
    }

    /// Smallest `pi` in `[0, b]` with `cdf(pi) >= u`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain {
                what: "probability",
                value: u,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.inverse_unchecked(u))
    }

    pub(crate) fn inverse_unchecked(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { b } => u * b,
            Self::TruncatedNormal { b, .. } => {
                bisect_increasing(|x| self.cdf_unchecked(x) - u, 0.0, b, INVERSE_TOL)
            }
            Self::Linear(l) => {
                if l.a1 >= u {
                    0.0
                } else if l.a2 == 0.0 {
                    l.b
                } else {
                    ((u - l.a1) / l.a2).clamp(0.0, l.b)
                }
            }
        }
    }
}

/// Untruncated normal mass of `[0, pi]` and of `[0, b]`, up to a common
/// factor. Works in whichever tail is nearer so that a mean far outside
/// `[0, b]` does not cancel to 0/0.
fn tn_mass(mean: f64, std_dev: f64, b: f64, pi: f64) -> (f64, f64) {
    let s = std::f64::consts::SQRT_2 * std_dev;
    if mean >= 0.5 * b {
        let lower = |x: f64| libm::erfc((mean - x) / s);
        let at0 = lower(0.0);
        (lower(pi) - at0, lower(b) - at0)
    } else {
        let upper = |x: f64| libm::erfc((x - mean) / s);
        let at0 = upper(0.0);
        (at0 - upper(pi), at0 - upper(b))
    }
}

/// Result of a least-squares linear CDF fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub cdf: LinearCdf,
    pub residual_norm: f64,
}

pub const DEFAULT_FIT_POINTS: usize = 201;

/// Least-squares line through the CDF sampled on an even grid over `[0, b]`.
pub fn fit_linear(dist: &CostDistribution, grid_points: usize) -> Result<LinearFit> {
    if matches!(dist, CostDistribution::Linear(_)) {
        return Err(Error::Precondition(
            "distribution is already a linear CDF".into(),
        ));
    }
    if grid_points < 2 {
        return Err(Error::Precondition(format!(
            "fit needs at least 2 grid points, got {grid_points}"
        )));
    }
    dist.validate()?;
    let b = dist.upper_bound();
    let n = grid_points as f64;
    let xs: Vec<f64> = (0..grid_points)
        .map(|i| b * i as f64 / (n - 1.0))
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| dist.cdf_unchecked(x)).collect();

    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = xs.iter().zip(&ys).fold((0.0, 0.0), |(sxy, sxx), (&x, &y)| {
        let dx = x - x_mean;
        (sxy + dx * (y - y_mean), sxx + dx * dx)
    });
    let a2 = sxy / sxx;
    let a1 = y_mean - a2 * x_mean;
    let residual_norm = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (a1 + a2 * x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LinearFit {
        cdf: LinearCdf { a1, a2, b },
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tn() -> CostDistribution {
        CostDistribution::truncated_normal(0.5, 2.0, 2.0).unwrap()
    }

    #[test]
    fn uniform_cdf_is_ratio() {
        let d = CostDistribution::uniform(2.0).unwrap();
        assert_eq!(d.cdf(1.0).unwrap(), 0.5);
    }

    #[test]
    fn truncated_normal_starts_at_zero() {
        assert_eq!(tn().cdf(0.0).unwrap(), 0.0);
        assert!((tn().cdf(2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_cdf_value_and_clamping() {
        let d = CostDistribution::linear(0.14, 0.54, 2.0).unwrap();
        assert!((d.cdf(1.0).unwrap() - 0.68).abs() < 1e-12);
        assert_eq!(d.cdf(2.0).unwrap(), 1.0);
        let neg = CostDistribution::linear(-0.2, 0.5, 2.0).unwrap();
        assert_eq!(neg.cdf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn far_mean_stays_finite() {
        let d = CostDistribution::truncated_normal(2.93, 0.1, 2.0).unwrap();
        let x = d.cdf(1.9).unwrap();
        assert!(x.is_finite() && x > 0.0 && x < 1.0);
        assert!(CostDistribution::truncated_normal(60.0, 0.1, 2.0).is_err());
    }

    #[test]
    fn cdf_rejects_out_of_support() {
        assert!(matches!(tn().cdf(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(tn().cdf(2.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_uniform_and_lower_point() {
        let d = CostDistribution::uniform(2.0).unwrap();
        assert_eq!(d.inverse_cdf(0.25).unwrap(), 0.5);
        assert_eq!(d.inverse_cdf(0.0).unwrap(), 0.0);
        assert_eq!(tn().inverse_cdf(0.0).unwrap(), 0.0);
        let l = CostDistribution::linear(0.14, 0.54, 2.0).unwrap();
        assert_eq!(l.inverse_cdf(0.0).unwrap(), 0.0);
        assert_eq!(l.inverse_cdf(0.1).unwrap(), 0.0);
    }

    #[test]
    fn inverse_truncated_normal_median() {
        let d = tn();
        let x = d.inverse_cdf(0.5).unwrap();
        assert!((d.cdf(x).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn inverse_rejects_bad_probability() {
        assert!(tn().inverse_cdf(1.5).is_err());
    }

    #[test]
    fn fit_uniform_is_exact() {
        let fit = fit_linear(&CostDistribution::uniform(2.0).unwrap(), 201).unwrap();
        assert!(fit.cdf.a1.abs() < 1e-12);
        assert!((fit.cdf.a2 - 0.5).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn fit_rejects_linear_and_tiny_grid() {
        let l = CostDistribution::linear(0.1, 0.4, 2.0).unwrap();
        assert!(matches!(fit_linear(&l, 201), Err(Error::Precondition(_))));
        assert!(matches!(fit_linear(&tn(), 1), Err(Error::Precondition(_))));
    }

    // sigma = 0.5 gives the 0.14 + 0.54 pi fit with residual norm 1.46 on
    // the default grid.
    #[test]
    fn half_sigma_fit_coefficients() {
        let d = CostDistribution::truncated_normal(0.5, 0.5, 2.0).unwrap();
        let fit = fit_linear(&d, DEFAULT_FIT_POINTS).unwrap();
        assert!((fit.cdf.a1 - 0.141).abs() < 1e-3, "{fit:?}");
        assert!((fit.cdf.a2 - 0.537).abs() < 1e-3, "{fit:?}");
        assert!((fit.residual_norm - 1.462).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn fit_matches_normal_equations_oracle() {
        // Independent route: solve the 2x2 normal equations directly.
        let d = tn();
        let n = 11;
        let xs: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| d.cdf(x).unwrap()).collect();
        let (s1, sx, sxx) = (n as f64, xs.iter().sum::<f64>(), xs.iter().map(|x| x * x).sum::<f64>());
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let det = s1 * sxx - sx * sx;
        let a1 = (sy * sxx - sx * sxy) / det;
        let a2 = (s1 * sxy - sx * sy) / det;
        let fit = fit_linear(&d, n).unwrap();
        assert!((fit.cdf.a1 - a1).abs() < 1e-12);
        assert!((fit.cdf.a2 - a2).abs() < 1e-12);
    }

    #[test]
    fn serde_kind_tags() {
        let d: CostDistribution = serde_json::from_str(
            r#"{"kind":"truncated_normal","mu":0.5,"sigma":2.0,"b":2.0}"#,
        )
        .unwrap();
        assert_eq!(d, tn());
        let l: CostDistribution =
            serde_json::from_str(r#"{"kind":"linear","a1":0.1,"a2":0.4,"b":2.0}"#).unwrap();
        assert!(matches!(l, CostDistribution::Linear(_)));
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(x in 0.0f64..2.0, y in 0.0f64..2.0, sigma in 0.1f64..3.0, mu in -1.0f64..3.0) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            for d in [
                CostDistribution::uniform(2.0).unwrap(),
                CostDistribution::truncated_normal(mu, sigma, 2.0).unwrap(),
                CostDistribution::linear(0.14, 0.54, 2.0).unwrap(),
            ] {
                prop_assert!(d.cdf(lo).unwrap() <= d.cdf(hi).unwrap());
            }
        }

        #[test]
        fn inverse_undoes_cdf(x in 0.01f64..1.99) {
            for d in [CostDistribution::uniform(2.0).unwrap(), tn()] {
                let back = d.inverse_cdf(d.cdf(x).unwrap()).unwrap();
                prop_assert!((back - x).abs() < 1e-7, "{} -> {}", x, back);
            }
        }
    }
}
