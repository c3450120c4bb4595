//! Solvers for the partial-information mechanisms M5-M7, where types are
//! private draws from a common distribution.

mod beta;
mod cutoff;

pub use beta::{
    beta_derivative, beta_uncalibrated, beta_uniform_closed_form, calibrate_beta, BetaCurve, Calibration, GridPoint,
    Segment, SegmentKind, SegmentLabel, SymmetricStrategy, CROSSING_GRID, MAX_CALIBRATION_PASSES,
    MIN_GRID_RESOLUTION,
};
pub use cutoff::{participation_value, solve_m5, solve_m7, CutoffEquilibrium, Estimate, M7Options};

use crate::distribution::TypeDistribution;
use crate::error::Result;
use crate::model::{GameConfig, Mechanism};
use crate::numeric::binomial;

/// Absolute tolerance for the strategy integrals.
pub const QUADRATURE_TOL: f64 = 1e-8;
/// Evaluation cap for a single adaptive integral.
pub const QUADRATURE_MAX_EVALS: usize = 1_000_000;

pub(crate) fn distribution(cfg: &GameConfig) -> &TypeDistribution {
    cfg.distribution().expect("partial-information configs always carry a distribution")
}

fn require_topk(cfg: &GameConfig) -> Result<()> {
    cfg.require("a top-K partial-information mechanism (M5 or M6)", &[Mechanism::M5, Mechanism::M6])
}

/// Probability that a user whose rank statistic is `p = F(x)` beats all
/// but at most `K - 1` of her `N - 1` opponents.
pub fn win_probability_at(p: f64, n: usize, k: usize) -> f64 {
    if n <= k {
        return 1.0;
    }
    let p = p.clamp(0.0, 1.0);
    let term = |j: usize| binomial(n - 1, j) * p.powi((n - 1 - j) as i32) * (1.0 - p).powi(j as i32);
    // Return whichever tail is smaller: the complement of a sum close to 1
    // would turn rounding noise into a non-monotone T near 0 or 1.
    let lower: f64 = (0..k).map(term).sum();
    let upper: f64 = (k..n).map(term).sum();
    if lower <= upper {
        lower
    } else {
        (1.0 - upper).max(0.0)
    }
}

/// `T(x)`: chance that a user of type `x` is among the top K when all
/// others play a strictly increasing symmetric strategy.
pub fn win_probability(x: f64, cfg: &GameConfig) -> Result<f64> {
    require_topk(cfg)?;
    Ok(win_probability_at(distribution(cfg).cdf(x), cfg.n_users(), cfg.k()))
}

/// Closed-form `dT/dx = (N-1) f(x) C(N-2, K-1) F^(N-K-1) (1-F)^(K-1)`;
/// zero when `N <= K`.
pub fn win_probability_derivative(x: f64, cfg: &GameConfig) -> Result<f64> {
    require_topk(cfg)?;
    let (n, k) = (cfg.n_users(), cfg.k());
    if n <= k {
        return Ok(0.0);
    }
    let d = distribution(cfg);
    Ok(derivative_kernel(n, k) * d.density(x) * rank_density(d.cdf(x), n, k))
}

pub(crate) fn derivative_kernel(n: usize, k: usize) -> f64 {
    (n - 1) as f64 * binomial(n - 2, k - 1)
}

pub(crate) fn rank_density(p: f64, n: usize, k: usize) -> f64 {
    p.powi((n - k - 1) as i32) * (1.0 - p).powi((k - 1) as i32)
}
