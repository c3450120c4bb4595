//! Cut-off equilibria: M5 (top-K, binary) and M7 (proportional, binary).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{distribution, win_probability_at, QUADRATURE_MAX_EVALS};
use crate::distribution::TypeDistribution;
use crate::error::{Error, Result};
use crate::model::{GameConfig, Mechanism};
use crate::numeric::{binomial, bisect, integrate};

/// Types at or above `threshold` participate with their full type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffEquilibrium {
    pub mechanism: Mechanism,
    pub threshold: f64,
    /// Indifference equation evaluated at the threshold.
    pub residual: f64,
    /// Monte Carlo standard error of `residual`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Standard error carried over to the threshold (delta method).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

/// Solves `(R/K) T(x) = c` by bisection. Needs `R > Kc`.
pub fn solve_m5(cfg: &GameConfig) -> Result<CutoffEquilibrium> {
    cfg.require("M5", &[Mechanism::M5])?;
    let (n, k) = (cfg.n_users(), cfg.k());
    let share = cfg.reward() / k as f64;
    if cfg.reward() <= k as f64 * cfg.cost_bound() {
        return Err(Error::Precondition(format!(
            "M5 needs R > Kc (R = {}, Kc = {})",
            cfg.reward(),
            k as f64 * cfg.cost_bound()
        )));
    }
    let mut out = CutoffEquilibrium {
        mechanism: Mechanism::M5,
        threshold: 0.0,
        residual: share - cfg.cost_bound(),
        std_error: None,
        threshold_std_error: None,
        samples: None,
        seed: None,
        notes: Vec::new(),
    };
    if n <= k {
        out.notes.push("N <= K: every participant wins, so every type participates".into());
        return Ok(out);
    }
    let d = distribution(cfg);
    let f = |x: f64| share * win_probability_at(d.cdf(x), n, k) - cfg.cost_bound();
    let root = bisect(f, 0.0, 1.0, 0.0).expect("f(0) = -c < 0 < R/K - c = f(1)");
    out.threshold = root.x;
    out.residual = root.fx;
    out.notes.push(format!("bisection on (R/K) T(x) - c, {} iterations", root.iterations));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M7Options {
    pub samples: usize,
    pub seed: u64,
    /// Opponent counts `k` from this value up are integrated by Monte
    /// Carlo; smaller ones by quadrature (`k = 0` is exact).
    pub mc_from_k: usize,
}

impl Default for M7Options {
    fn default() -> Self {
        M7Options { samples: 100_000, seed: 0, mc_from_k: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

struct Participation<'a> {
    n: usize,
    reward: f64,
    dist: &'a TypeDistribution,
    opts: M7Options,
}

impl Participation<'_> {
    /// `E[q / (q + S)]` with `S` a sum of `k` opponent types drawn above `t`.
    fn share_mc(&self, q: f64, k: usize, t: f64) -> (f64, f64) {
        // The same uniforms for every (q, t) keep y(t, t) a deterministic,
        // continuous function of t.
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(k as u64);
        let samples = self.opts.samples;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let mut others = 0.0;
            for _ in 0..k {
                others += self.dist.truncated_quantile(rng.random::<f64>(), t);
            }
            let v = if q > 0.0 { q / (q + others) } else { 0.0 };
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
        (mean, (var / samples as f64).sqrt())
    }

    /// `E[q / (q + T)]` for one opponent type `T ~ F(. | T >= t)`.
    fn share_one(&self, q: f64, t: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        let mass = 1.0 - self.dist.cdf(t);
        let mut cuts = vec![t];
        cuts.extend(self.dist.breakpoints().into_iter().filter(|&b| b > t && b < 1.0));
        cuts.push(1.0);
        let integral: f64 = cuts
            .windows(2)
            .map(|w| integrate(|s| q / (q + s) * self.dist.density(s), w[0], w[1], 1e-13, QUADRATURE_MAX_EVALS).value)
            .sum();
        integral / mass
    }

    /// `y(q, t)`: expected reward of a participating type `q` when the
    /// others participate iff their type is at least `t`.
    fn value(&self, q: f64, t: f64) -> Estimate {
        let p = self.dist.cdf(t);
        let (mut value, mut var) = (0.0, 0.0);
        for k in 0..self.n {
            let weight = binomial(self.n - 1, k) * p.powi((self.n - 1 - k) as i32) * (1.0 - p).powi(k as i32);
            if weight == 0.0 {
                continue;
            }
            let (share, se) = match k {
                0 => (1.0, 0.0),
                _ if k < self.opts.mc_from_k => (self.share_one(q, t), 0.0),
                _ => self.share_mc(q, k, t),
            };
            value += weight * self.reward * share;
            var += (weight * self.reward * se).powi(2);
        }
        Estimate { value, std_error: var.sqrt() }
    }
}

fn participation<'a>(cfg: &'a GameConfig, opts: M7Options) -> Result<Participation<'a>> {
    cfg.require("M7", &[Mechanism::M7])?;
    if opts.samples == 0 {
        return Err(Error::InvalidParameter { name: "mc_samples", value: 0.0, reason: "must be positive" });
    }
    Ok(Participation { n: cfg.n_users(), reward: cfg.reward(), dist: distribution(cfg), opts })
}

/// `y(q, t)` with its Monte Carlo standard error (zero when every term is
/// integrated deterministically).
pub fn participation_value(q: f64, t: f64, cfg: &GameConfig, opts: M7Options) -> Result<Estimate> {
    Ok(participation(cfg, opts)?.value(q, t))
}

/// Finds the threshold `x*` with `y(x*, x*) = c` by scanning 64 cells for
/// the first sign change and bisecting inside it. Needs `R > c`.
pub fn solve_m7(cfg: &GameConfig, opts: M7Options) -> Result<CutoffEquilibrium> {
    let model = participation(cfg, opts)?;
    let c = cfg.cost_bound();
    if cfg.reward() <= c {
        return Err(Error::Precondition(format!("M7 needs R > c (R = {}, c = {c})", cfg.reward())));
    }
    let uses_mc = (opts.mc_from_k..cfg.n_users()).next().is_some();
    let mut out = CutoffEquilibrium {
        mechanism: Mechanism::M7,
        threshold: 0.0,
        residual: cfg.reward() - c,
        std_error: None,
        threshold_std_error: None,
        samples: uses_mc.then_some(opts.samples),
        seed: uses_mc.then_some(opts.seed),
        notes: Vec::new(),
    };
    if cfg.n_users() == 1 {
        out.notes.push("no opponents: y = R > c, every type participates".into());
        return Ok(out);
    }
    let gap = |t: f64| model.value(t, t).value - c;
    const CELLS: usize = 64;
    let hi = (1..=CELLS)
        .map(|i| i as f64 / CELLS as f64)
        .find(|&t| gap(t) >= 0.0)
        .expect("y(1, 1) = R > c");
    let root = bisect(gap, hi - 1.0 / CELLS as f64, hi, 1e-14).expect("bracketed by the scan");
    let at_root = model.value(root.x, root.x);
    out.threshold = root.x;
    out.residual = at_root.value - c;
    if uses_mc {
        let h = 1e-4;
        let slope = (gap((root.x + h).min(1.0)) - gap((root.x - h).max(0.0))) / (2.0 * h);
        out.std_error = Some(at_root.std_error);
        out.threshold_std_error = Some(at_root.std_error / slope.abs());
        out.notes.push(format!("opponent counts k >= {} integrated by Monte Carlo", opts.mc_from_k));
    }
    out.notes.push(format!("bisection on y(t, t) - c, {} iterations", root.iterations));
    Ok(out)
}
