//! Type distributions on `[0, 1]` for the partial-information games.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Uniform,
    PiecewiseLinearCdf,
}

/// A continuous CDF on `[0, 1]` with `F(0) = 0` and `F(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TypeDistribution {
    Uniform,
    /// Linear interpolation between `(x, F(x))` knots.
    Piecewise { knots: Vec<(f64, f64)> },
}

impl TypeDistribution {
    pub fn uniform() -> Self {
        TypeDistribution::Uniform
    }

    /// Knots must start at `(0, 0)`, end at `(1, 1)`, have strictly
    /// increasing abscissae and non-decreasing CDF values.
    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        if knots.len() < 2 {
            return bad("need at least two knots".into());
        }
        if knots.iter().any(|(x, p)| !x.is_finite() || !p.is_finite()) {
            return bad("knots must be finite".into());
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if first != (0.0, 0.0) {
            return bad(format!("first knot must be (0, 0), got {first:?}"));
        }
        if last != (1.0, 1.0) {
            return bad(format!("last knot must be (1, 1), got {last:?}"));
        }
        for (i, pair) in knots.windows(2).enumerate() {
            let ((x0, p0), (x1, p1)) = (pair[0], pair[1]);
            if x1 <= x0 {
                return bad(format!("knot {} abscissa {x1} is not above {x0}", i + 1));
            }
            if p1 < p0 {
                return bad(format!("CDF decreases between knots {i} and {}", i + 1));
            }
        }
        Ok(TypeDistribution::Piecewise { knots })
    }

    pub fn kind(&self) -> DistributionKind {
        match self {
            TypeDistribution::Uniform => DistributionKind::Uniform,
            TypeDistribution::Piecewise { .. } => DistributionKind::PiecewiseLinearCdf,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            TypeDistribution::Uniform => x,
            TypeDistribution::Piecewise { knots } => {
                let k = segment_index(knots, x);
                let ((x0, p0), (x1, p1)) = (knots[k], knots[k + 1]);
                (p0 + (p1 - p0) * (x - x0) / (x1 - x0)).clamp(0.0, 1.0)
            }
        }
    }

    /// Derivative of the CDF; at a knot the right-hand slope is used (the
    /// left-hand one at `x = 1`). Zero outside `[0, 1]`.
    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            TypeDistribution::Uniform => 1.0,
            TypeDistribution::Piecewise { knots } => {
                let k = segment_index(knots, x);
                let ((x0, p0), (x1, p1)) = (knots[k], knots[k + 1]);
                (p1 - p0) / (x1 - x0)
            }
        }
    }

    /// Smallest `x` with `F(x) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            TypeDistribution::Uniform => u,
            TypeDistribution::Piecewise { knots } => {
                if u <= 0.0 {
                    return 0.0;
                }
                let k = knots
                    .windows(2)
                    .position(|w| w[1].1 >= u && w[1].1 > w[0].1)
                    .unwrap_or(knots.len() - 2);
                let ((x0, p0), (x1, p1)) = (knots[k], knots[k + 1]);
                (x0 + (u - p0) / (p1 - p0) * (x1 - x0)).clamp(x0, x1)
            }
        }
    }

    /// Interior points where the density may jump. Quadrature splits there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TypeDistribution::Uniform => Vec::new(),
            TypeDistribution::Piecewise { knots } => knots[1..knots.len() - 1].iter().map(|k| k.0).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Draw from `F` conditioned on `T >= lower`, i.e. the truncated CDF
    /// `(F(t) - F(lower)) / (1 - F(lower))`.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, rng: &mut R, lower: f64) -> f64 {
        self.truncated_quantile(rng.random::<f64>(), lower)
    }

    /// Quantile of the truncated distribution above `lower`.
    pub fn truncated_quantile(&self, u: f64, lower: f64) -> f64 {
        let base = self.cdf(lower);
        self.quantile(base + u * (1.0 - base)).max(lower)
    }
}

fn segment_index(knots: &[(f64, f64)], x: f64) -> usize {
    // Last segment whose left end is <= x.
    let k = knots.partition_point(|&(kx, _)| kx <= x);
    k.saturating_sub(1).min(knots.len() - 2)
}
