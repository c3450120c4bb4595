//! Monte Carlo deviation checks for symmetric partial-information play.
//!
//! One designated deviator faces `N - 1` opponents whose types are drawn
//! from the prior and who follow the candidate strategy. For every
//! deviator type on a grid, each alternative action is compared against
//! the prescribed one on the same opponent samples, so that the gain and
//! its standard error come from paired differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DeviationMethod, DeviationReport, UserDeviation};
use crate::distribution::TypeDistribution;
use crate::error::{Error, Result};
use crate::model::{GameConfig, Mechanism};
use crate::partialinfo::SymmetricStrategy;

/// Deviator types `i / GRID` for `i = 1..=GRID`, and pretend types
/// `i / GRID` for `i = 0..=GRID`.
const GRID: usize = 100;
/// Acceptance band in standard errors.
const SIGMAS: f64 = 3.0;
/// Resolution of the bid lookup table used for opponents.
const BID_TABLE: usize = 1 << 16;

#[derive(Debug, Clone, Copy)]
pub enum CandidateStrategy<'a> {
    /// Participate with the full type iff it is at least the threshold.
    Cutoff(f64),
    /// Bid `beta*(type)`.
    Symmetric(&'a SymmetricStrategy),
}

struct Point {
    q: f64,
    action: f64,
    gain: f64,
    se: f64,
}

/// Is the candidate a symmetric equilibrium, up to Monte Carlo noise?
///
/// Reports the grid point with the largest estimated gain; the candidate
/// passes iff that gain is at most three of its standard errors, which
/// are stored in `tolerance`.
pub fn mc_symmetric_check(
    strategy: CandidateStrategy<'_>,
    cfg: &GameConfig,
    samples: usize,
    seed: u64,
) -> Result<DeviationReport> {
    let dist = cfg
        .distribution()
        .ok_or(Error::WrongMechanism { expected: "a partial-information mechanism (M5-M7)", found: cfg.mechanism() })?;
    if samples == 0 {
        return Err(Error::InvalidParameter { name: "samples", value: 0.0, reason: "must be positive" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match (cfg.mechanism(), strategy) {
        (Mechanism::M5, CandidateStrategy::Cutoff(x)) => topk_binary(cfg, dist, x, samples, &mut rng),
        (Mechanism::M6, CandidateStrategy::Symmetric(s)) => topk_continuous(cfg, dist, s, samples, &mut rng),
        (Mechanism::M7, CandidateStrategy::Cutoff(x)) => proportional_binary(cfg, dist, x, samples, &mut rng),
        (m, _) => {
            return Err(Error::Precondition(format!(
                "{m} cannot be checked against this strategy shape (M5/M7 take cut-offs, M6 a bid curve)"
            )))
        }
    };
    let worst = points
        .into_iter()
        .reduce(|a, b| if b.gain > a.gain { b } else { a })
        .expect("grid is non-empty");
    let tolerance = SIGMAS * worst.se;
    Ok(DeviationReport {
        is_equilibrium: worst.gain <= tolerance,
        worst_deviator: 0,
        best_deviation: worst.action,
        gain: worst.gain,
        method: DeviationMethod::MonteCarlo,
        tolerance,
        per_user: vec![UserDeviation { user: 0, action: worst.action, gain: worst.gain }],
        std_error: Some(worst.se),
        samples: Some(samples),
        seed: Some(seed),
        deviator_type: Some(worst.q),
    })
}

fn deviator_types() -> impl Iterator<Item = f64> {
    (1..=GRID).map(|i| i as f64 / GRID as f64)
}

/// Sorted samples of the K-th largest opponent bid (0 when fewer than K
/// opponents bid). `bid` must be non-decreasing in the type.
fn kth_bids<F: Fn(f64) -> f64>(cfg: &GameConfig, dist: &TypeDistribution, bid: F, samples: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (opponents, k) = (cfg.n_users() - 1, cfg.k());
    let mut draws = vec![0.0; opponents];
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        draws.iter_mut().for_each(|u| *u = rng.random::<f64>());
        if opponents < k {
            out.push(0.0);
            continue;
        }
        let (_, kth, _) = draws.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        out.push(bid(dist.quantile(*kth)));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Chance that a positive bid `b` makes the top K; ties split evenly.
fn win_rate(sorted: &[f64], b: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    let below = sorted.partition_point(|&v| v < b);
    let tied = sorted.partition_point(|&v| v <= b) - below;
    (below as f64 + 0.5 * tied as f64) / sorted.len() as f64
}

fn binomial_se(p: f64, samples: usize) -> f64 {
    let n = samples as f64;
    // A zero count still carries one sample's worth of uncertainty.
    let p = p.abs();
    (p.max(1.0 / n) * (1.0 - p).max(0.0) / n).sqrt()
}

fn topk_binary(cfg: &GameConfig, dist: &TypeDistribution, threshold: f64, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let share = cfg.reward() / cfg.k() as f64;
    let c = cfg.cost_bound();
    let bids = kth_bids(cfg, dist, |t| if t >= threshold { t } else { 0.0 }, samples, rng);
    deviator_types()
        .map(|q| {
            let p = win_rate(&bids, q);
            let enter = share * p - c;
            let participates = q >= threshold;
            Point {
                q,
                action: if participates { 0.0 } else { q },
                gain: if participates { -enter } else { enter },
                se: share * binomial_se(p, samples),
            }
        })
        .collect()
}

fn topk_continuous(cfg: &GameConfig, dist: &TypeDistribution, s: &SymmetricStrategy, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let share = cfg.reward() / cfg.k() as f64;
    let c = cfg.cost_bound();
    let table: Vec<f64> = (0..=BID_TABLE).map(|i| s.evaluate(i as f64 / BID_TABLE as f64)).collect();
    let lookup = |t: f64| {
        let pos = t.clamp(0.0, 1.0) * BID_TABLE as f64;
        let i = (pos as usize).min(BID_TABLE - 1);
        table[i] + (table[i + 1] - table[i]) * (pos - i as f64)
    };
    let bids = kth_bids(cfg, dist, lookup, samples, rng);
    let pretend: Vec<(f64, f64)> = (0..=GRID)
        .map(|i| {
            let b = s.evaluate(i as f64 / GRID as f64);
            (b, win_rate(&bids, b))
        })
        .collect();
    let mut out = Vec::new();
    for q in deviator_types() {
        let b0 = s.evaluate(q);
        let p0 = win_rate(&bids, b0);
        let u0 = share * p0 - c * b0 / q;
        for &(b, p) in &pretend {
            if b > q {
                continue;
            }
            out.push(Point {
                q,
                action: b,
                gain: share * p - c * b / q - u0,
                se: share * binomial_se(p - p0, samples),
            });
        }
    }
    out
}

fn proportional_binary(cfg: &GameConfig, dist: &TypeDistribution, threshold: f64, samples: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let (r, c) = (cfg.reward(), cfg.cost_bound());
    let opponents = cfg.n_users() - 1;
    let others: Vec<f64> = (0..samples)
        .map(|_| {
            (0..opponents)
                .map(|_| dist.sample(rng))
                .filter(|&t| t >= threshold)
                .sum()
        })
        .collect();
    deviator_types()
        .map(|q| {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for &b in &others {
                let v = r * q / (q + b);
                sum += v;
                sum_sq += v * v;
            }
            let n = samples as f64;
            let mean = sum / n;
            let se = ((sum_sq / n - mean * mean).max(0.0) / n).sqrt();
            let enter = mean - c;
            let participates = q >= threshold;
            Point { q, action: if participates { 0.0 } else { q }, gain: if participates { -enter } else { enter }, se }
        })
        .collect()
}
