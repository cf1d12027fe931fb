//! Private-cost distributions on a bounded support.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    Uniform { lo: f64, hi: f64 },
    /// Normal(mu, sigma) conditioned on [lo, hi].
    TruncatedNormal { mu: f64, sigma: f64, lo: f64, hi: f64 },
    /// Knots `(v, F(v))`; F runs from 0 to 1, both coordinates strictly increasing.
    PiecewiseLinearCdf { knots: Vec<(f64, f64)> },
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(core::f64::consts::TAU)
}

impl ValueDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Uniform { lo, hi } | Self::TruncatedNormal { lo, hi, .. } => (*lo, *hi),
            Self::PiecewiseLinearCdf { knots } => (knots[0].0, knots[knots.len() - 1].0),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |x: f64| x.is_finite();
        match self {
            Self::Uniform { lo, hi } => {
                if !(finite(*lo) && finite(*hi) && lo < hi) {
                    return Err(format!("uniform support [{lo}, {hi}] is empty or not finite"));
                }
            }
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                if !(finite(*lo) && finite(*hi) && lo < hi) {
                    return Err(format!("truncated normal support [{lo}, {hi}] is empty or not finite"));
                }
                if !(finite(*mu) && finite(*sigma) && *sigma > 0.0) {
                    return Err(format!("truncated normal needs finite mu and sigma > 0, got ({mu}, {sigma})"));
                }
                let mass = std_normal_cdf((hi - mu) / sigma) - std_normal_cdf((lo - mu) / sigma);
                if !(mass > 1e-300) {
                    return Err(format!("truncated normal puts no mass on [{lo}, {hi}]"));
                }
            }
            Self::PiecewiseLinearCdf { knots } => {
                if knots.len() < 2 {
                    return Err("piecewise-linear cdf needs at least two knots".into());
                }
                if knots.iter().any(|&(v, f)| !finite(v) || !finite(f)) {
                    return Err("piecewise-linear cdf knots must be finite".into());
                }
                if knots[0].1 != 0.0 || knots[knots.len() - 1].1 != 1.0 {
                    return Err("piecewise-linear cdf must start at 0 and end at 1".into());
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
                    return Err("piecewise-linear cdf knots must be strictly increasing in v and F".into());
                }
            }
        }
        Ok(())
    }

    /// F(v), clamped to 0 below and 1 above the support.
    pub fn cdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v <= lo {
            return 0.0;
        }
        if v >= hi {
            return 1.0;
        }
        match self {
            Self::Uniform { lo, hi } => (v - lo) / (hi - lo),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                let a = std_normal_cdf((lo - mu) / sigma);
                let b = std_normal_cdf((hi - mu) / sigma);
                ((std_normal_cdf((v - mu) / sigma) - a) / (b - a)).clamp(0.0, 1.0)
            }
            Self::PiecewiseLinearCdf { knots } => {
                let k = knots.partition_point(|&(x, _)| x <= v);
                let ((x0, f0), (x1, f1)) = (knots[k - 1], knots[k]);
                f0 + (f1 - f0) * (v - x0) / (x1 - x0)
            }
        }
    }

    /// f(v); zero outside the support. At a knot the right-hand slope is used.
    pub fn pdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v < lo || v > hi {
            return 0.0;
        }
        match self {
            Self::Uniform { lo, hi } => 1.0 / (hi - lo),
            Self::TruncatedNormal { mu, sigma, lo, hi } => {
                let mass = std_normal_cdf((hi - mu) / sigma) - std_normal_cdf((lo - mu) / sigma);
                std_normal_pdf((v - mu) / sigma) / (sigma * mass)
            }
            Self::PiecewiseLinearCdf { knots } => {
                let k = knots.partition_point(|&(x, _)| x <= v).clamp(1, knots.len() - 1);
                let ((x0, f0), (x1, f1)) = (knots[k - 1], knots[k]);
                (f1 - f0) / (x1 - x0)
            }
        }
    }

    /// Inverse cdf on [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::PiecewiseLinearCdf { knots } => {
                if u >= 1.0 {
                    return hi;
                }
                let k = knots.partition_point(|&(_, f)| f <= u).clamp(1, knots.len() - 1);
                let ((x0, f0), (x1, f1)) = (knots[k - 1], knots[k]);
                x0 + (x1 - x0) * (u - f0) / (f1 - f0)
            }
            Self::TruncatedNormal { .. } => {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if self.cdf(m) < u {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    }
}
