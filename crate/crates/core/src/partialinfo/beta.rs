//! The symmetric bidding function for M6 and its calibration onto `[0, x]`.

use serde::{Deserialize, Serialize};

use super::{derivative_kernel, distribution, rank_density, QUADRATURE_MAX_EVALS, QUADRATURE_TOL};
use crate::distribution::TypeDistribution;
use crate::error::{Error, Result};
use crate::model::{GameConfig, Mechanism};
use crate::numeric::{binomial, bisect, integrate};

/// Cells in the table behind [`BetaCurve`], also the crossing-scan grid.
pub const CROSSING_GRID: usize = 4096;
pub const MAX_CALIBRATION_PASSES: usize = 64;
pub const MIN_GRID_RESOLUTION: usize = 1000;
/// Bisection tolerance for crossings and slope-one points.
const REFINE_TOL: f64 = 1e-12;
/// Slack for `beta*(x) <= x` and monotonicity on exported grids.
const INVARIANT_SLACK: f64 = 1e-12;
const JOIN_TOL: f64 = 1e-9;

fn require_m6(cfg: &GameConfig) -> Result<()> {
    cfg.require("M6", &[Mechanism::M6])?;
    if cfg.n_users() <= cfg.k() {
        return Err(Error::Precondition(format!(
            "the symmetric bid needs N - K >= 1 (N = {}, K = {})",
            cfg.n_users(),
            cfg.k()
        )));
    }
    Ok(())
}

/// `beta(x) = R/(cK) * integral_0^x t T'(t) dt`, the bid that makes the
/// first-order condition hold at the true type.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaCurve {
    scale: f64,
    kernel: f64,
    n: usize,
    k: usize,
    dist: TypeDistribution,
    breaks: Vec<f64>,
    /// `beta` at `i / CROSSING_GRID`.
    table: Vec<f64>,
}

impl BetaCurve {
    pub fn new(cfg: &GameConfig) -> Result<Self> {
        require_m6(cfg)?;
        let (n, k) = (cfg.n_users(), cfg.k());
        let dist = distribution(cfg).clone();
        let mut curve = BetaCurve {
            scale: cfg.reward() / (cfg.cost_bound() * k as f64),
            kernel: derivative_kernel(n, k),
            n,
            k,
            breaks: dist.breakpoints(),
            dist,
            table: Vec::with_capacity(CROSSING_GRID + 1),
        };
        let mut acc = 0.0;
        curve.table.push(0.0);
        for i in 0..CROSSING_GRID {
            acc += curve.integral(node(i), node(i + 1), QUADRATURE_TOL / CROSSING_GRID as f64);
            curve.table.push(acc);
        }
        Ok(curve)
    }

    fn integrand(&self, t: f64) -> f64 {
        t * self.kernel * self.dist.density(t) * rank_density(self.dist.cdf(t), self.n, self.k)
    }

    /// `scale * integral_a^b t T'(t) dt`, split at density breakpoints.
    fn integral(&self, a: f64, b: f64, tol: f64) -> f64 {
        let mut cuts = vec![a];
        cuts.extend(self.breaks.iter().copied().filter(|&x| x > a && x < b));
        cuts.push(b);
        let tol = tol / self.scale.max(1.0);
        let value: f64 = cuts
            .windows(2)
            .map(|w| integrate(|t| self.integrand(t), w[0], w[1], tol, QUADRATURE_MAX_EVALS).value)
            .sum();
        self.scale * value
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = ((x * CROSSING_GRID as f64) as usize).min(CROSSING_GRID);
        if node(i) == x {
            return self.table[i];
        }
        self.table[i] + self.integral(node(i), x, QUADRATURE_TOL / CROSSING_GRID as f64)
    }

    /// `beta'(x) = x R/(cK) T'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.scale * self.integrand(x)
    }

    /// `beta(1) = R/(cK) * (N - K) / N` for every distribution.
    pub fn at_one(&self) -> f64 {
        self.table[CROSSING_GRID]
    }
}

fn node(i: usize) -> f64 {
    i as f64 / CROSSING_GRID as f64
}

/// One-off evaluation of the uncalibrated bid by adaptive quadrature.
pub fn beta_uncalibrated(x: f64, cfg: &GameConfig) -> Result<f64> {
    require_m6(cfg)?;
    let curve = BetaCurve::new_empty(cfg);
    Ok(curve.integral(0.0, x.clamp(0.0, 1.0), QUADRATURE_TOL * 1e-2))
}

impl BetaCurve {
    fn new_empty(cfg: &GameConfig) -> Self {
        let dist = distribution(cfg).clone();
        BetaCurve {
            scale: cfg.reward() / (cfg.cost_bound() * cfg.k() as f64),
            kernel: derivative_kernel(cfg.n_users(), cfg.k()),
            n: cfg.n_users(),
            k: cfg.k(),
            breaks: dist.breakpoints(),
            dist,
            table: Vec::new(),
        }
    }
}

pub fn beta_derivative(x: f64, cfg: &GameConfig) -> Result<f64> {
    require_m6(cfg)?;
    Ok(BetaCurve::new_empty(cfg).derivative(x))
}

/// Polynomial form for the uniform distribution:
/// `R/(cK) (N-1) C(N-2,K-1) sum_k (-1)^(K-k-1) C(K-1,k) x^(N-k) / (N-k)`.
pub fn beta_uniform_closed_form(x: f64, cfg: &GameConfig) -> Result<f64> {
    require_m6(cfg)?;
    if distribution(cfg) != &TypeDistribution::Uniform {
        return Err(Error::Precondition("closed form only holds for the uniform distribution".into()));
    }
    let (n, k) = (cfg.n_users(), cfg.k());
    let sum: f64 = (0..k)
        .map(|j| {
            let sign = if (k - j - 1) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(k - 1, j) * x.powi((n - j) as i32) / (n - j) as f64
        })
        .sum();
    Ok(cfg.reward() / (cfg.cost_bound() * k as f64) * derivative_kernel(n, k) * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SegmentKind {
    Original,
    Diagonal,
    Shifted { offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentLabel {
    Original,
    Diagonal,
    Shifted,
}

impl SegmentKind {
    pub fn label(self) -> SegmentLabel {
        match self {
            SegmentKind::Original => SegmentLabel::Original,
            SegmentKind::Diagonal => SegmentLabel::Diagonal,
            SegmentKind::Shifted { .. } => SegmentLabel::Shifted,
        }
    }
}

impl std::fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SegmentLabel::Original => "original",
            SegmentLabel::Diagonal => "diagonal",
            SegmentLabel::Shifted => "shifted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKind,
}

/// One calibration pass: where the bid first rose above the type, and
/// where it was pinned back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub crossing: f64,
    /// First point after the crossing with slope one, if any.
    pub slope_one: Option<f64>,
    /// Bid at `slope_one` before the shift.
    pub bid_at_slope_one: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub beta_star: f64,
    pub kind: SegmentLabel,
}

/// A symmetric strategy `x -> beta*(x)` for M6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricStrategy {
    pub segments: Vec<Segment>,
    pub calibrations: Vec<Calibration>,
    /// Set when some crossing had no slope-one point and the bid was
    /// pinned to the diagonal up to 1. Such a strategy is a guess.
    pub fallback: bool,
    pub grid: Vec<GridPoint>,
    #[serde(skip)]
    curve: Option<BetaCurve>,
}

impl SymmetricStrategy {
    /// A strategy known only through samples; evaluated by linear
    /// interpolation. Points must be sorted by `x` and span `[0, 1]`.
    pub fn from_grid(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Precondition("strategy grid needs at least two points".into()));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(Error::Precondition("strategy grid must start at 0 and end at 1".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Precondition("strategy grid abscissae must increase".into()));
        }
        Ok(SymmetricStrategy {
            segments: vec![Segment { start: 0.0, end: 1.0, kind: SegmentKind::Original }],
            calibrations: Vec::new(),
            fallback: false,
            grid: points.iter().map(|&(x, b)| GridPoint { x, beta_star: b, kind: SegmentLabel::Original }).collect(),
            curve: None,
        })
    }

    fn segment_at(&self, x: f64) -> Segment {
        let i = self.segments.partition_point(|s| s.start <= x).saturating_sub(1);
        self.segments[i]
    }

    /// `beta*(x)`; exact through the quadrature curve when available,
    /// interpolated from `grid` otherwise.
    pub fn evaluate(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.curve {
            Some(curve) => match self.segment_at(x).kind {
                SegmentKind::Original => curve.value(x),
                SegmentKind::Diagonal => x,
                SegmentKind::Shifted { offset } => curve.value(x) + offset,
            },
            None => {
                let i = self.grid.partition_point(|p| p.x <= x).clamp(1, self.grid.len() - 1);
                let (a, b) = (self.grid[i - 1], self.grid[i]);
                a.beta_star + (b.beta_star - a.beta_star) * (x - a.x) / (b.x - a.x)
            }
        }
    }

    pub fn kinds_present(&self) -> Vec<SegmentLabel> {
        let mut out: Vec<SegmentLabel> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.kind.label()) {
                out.push(s.kind.label());
            }
        }
        out
    }

    /// Violated invariants, empty when the strategy is well formed:
    /// `beta*(0) = 0`, continuity at segment joins, monotone and below the
    /// diagonal on the grid.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let at_zero = self.evaluate(0.0);
        if at_zero != 0.0 {
            out.push(format!("beta*(0) = {at_zero}"));
        }
        if let Some(curve) = &self.curve {
            for pair in self.segments.windows(2) {
                let x = pair[1].start;
                let side = |kind: SegmentKind| match kind {
                    SegmentKind::Original => curve.value(x),
                    SegmentKind::Diagonal => x,
                    SegmentKind::Shifted { offset } => curve.value(x) + offset,
                };
                let gap = (side(pair[0].kind) - side(pair[1].kind)).abs();
                if gap >= JOIN_TOL {
                    out.push(format!("jump of {gap} at x = {x}"));
                }
            }
        }
        for w in self.grid.windows(2) {
            if w[1].beta_star + INVARIANT_SLACK < w[0].beta_star {
                out.push(format!("decreases between x = {} and {}", w[0].x, w[1].x));
                break;
            }
        }
        if let Some(p) = self.grid.iter().find(|p| p.beta_star > p.x + INVARIANT_SLACK) {
            out.push(format!("beta*({}) = {} exceeds the type", p.x, p.beta_star));
        }
        out
    }
}

/// Calibrates `beta` into a feasible symmetric strategy.
///
/// Starting from `beta* = beta`, repeatedly: find the first crossing `x1`
/// where `beta*` rises above the diagonal, find the first `x_p > x1` with
/// `beta'(x_p) = 1`, pin `beta* = x` on `[x1, x_p]` and shift the tail down
/// by `beta*(x_p) - x_p`. Stops once `beta* <= x` on the crossing grid.
/// When a crossing has no slope-one point the bid is pinned to the
/// diagonal all the way to 1 and `fallback` is set.
///
/// `grid_resolution` is the number of cells in the exported grid.
pub fn calibrate_beta(cfg: &GameConfig, grid_resolution: usize) -> Result<SymmetricStrategy> {
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: grid_resolution as f64,
            reason: "calibration needs at least 1000 grid cells",
        });
    }
    let curve = BetaCurve::new(cfg)?;
    let mut segments = vec![Segment { start: 0.0, end: 1.0, kind: SegmentKind::Original }];
    let mut calibrations = Vec::new();
    let mut fallback = false;
    let mut start = 0.0;
    let mut offset = 0.0;

    for pass in 0.. {
        if pass == MAX_CALIBRATION_PASSES {
            return Err(Error::Exhausted(format!("calibration did not settle after {MAX_CALIBRATION_PASSES} passes")));
        }
        let gap = |x: f64| curve.value(x) + offset - x;
        let first = (0..=CROSSING_GRID)
            .find(|&i| node(i) > start && curve.table[i] + offset - node(i) > INVARIANT_SLACK);
        let Some(i) = first else { break };
        let lo = node(i - 1).max(start);
        let x1 = if gap(lo) > 0.0 { lo } else { bisect(gap, lo, node(i), REFINE_TOL).expect("sign change").x };

        let slope = |x: f64| curve.derivative(x) - 1.0;
        let xp = if slope(x1) <= 0.0 {
            Some(x1)
        } else {
            (0..=CROSSING_GRID)
                .map(node)
                .filter(|&x| x > x1)
                .find(|&x| slope(x) <= 0.0)
                .map(|hi| {
                    let lo = (hi - 1.0 / CROSSING_GRID as f64).max(x1);
                    bisect(slope, lo, hi, REFINE_TOL).expect("sign change").x
                })
        };

        let last = segments.last_mut().expect("non-empty");
        last.end = x1;
        match xp {
            None => {
                fallback = true;
                calibrations.push(Calibration { crossing: x1, slope_one: None, bid_at_slope_one: None });
                segments.push(Segment { start: x1, end: 1.0, kind: SegmentKind::Diagonal });
                break;
            }
            Some(xp) => {
                let bid = curve.value(xp);
                calibrations.push(Calibration { crossing: x1, slope_one: Some(xp), bid_at_slope_one: Some(bid + offset) });
                offset = xp - bid;
                segments.push(Segment { start: x1, end: xp, kind: SegmentKind::Diagonal });
                segments.push(Segment { start: xp, end: 1.0, kind: SegmentKind::Shifted { offset } });
                start = xp;
            }
        }
    }
    segments.retain(|s| s.end > s.start || s.start == 1.0 && s.end == 1.0);
    if segments.is_empty() {
        segments.push(Segment { start: 0.0, end: 1.0, kind: SegmentKind::Original });
    }

    let mut strategy = SymmetricStrategy { segments, calibrations, fallback, grid: Vec::new(), curve: Some(curve) };
    let mut xs: Vec<f64> = (0..=grid_resolution).map(|i| i as f64 / grid_resolution as f64).collect();
    xs.extend(strategy.segments.iter().skip(1).map(|s| s.start));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    strategy.grid = xs
        .into_iter()
        .map(|x| GridPoint { x, beta_star: strategy.evaluate(x), kind: strategy.segment_at(x).kind.label() })
        .collect();
    Ok(strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m6(n: usize, k: usize, r: f64, dist: TypeDistribution) -> GameConfig {
        GameConfig::partial_information(Mechanism::M6, n, dist, r, 1.0, Some(k)).unwrap()
    }

    fn figure() -> GameConfig {
        m6(11, 5, 8.0, TypeDistribution::uniform())
    }

    #[test]
    fn single_opponent_is_square() {
        let g = m6(2, 1, 2.0, TypeDistribution::uniform());
        // integral_0^x 2t dt
        assert!((beta_uncalibrated(0.5, &g).unwrap() - 0.25).abs() < 1e-12);
        assert!((beta_uniform_closed_form(0.5, &g).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(beta_uncalibrated(0.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn value_at_one() {
        let g = figure();
        let expected = 48.0 / 55.0;
        assert!((beta_uncalibrated(1.0, &g).unwrap() - expected).abs() < 1e-8);
        assert!((BetaCurve::new(&g).unwrap().at_one() - expected).abs() < 1e-8);
        assert!((beta_uniform_closed_form(1.0, &g).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_quadrature_on_grid() {
        let g = figure();
        let curve = BetaCurve::new(&g).unwrap();
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let closed = beta_uniform_closed_form(x, &g).unwrap();
            assert!((closed - curve.value(x)).abs() < 1e-8, "x={x}");
            assert!((closed - beta_uncalibrated(x, &g).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_form_rejects_non_uniform() {
        let d = TypeDistribution::piecewise(vec![(0.0, 0.0), (0.5, 0.3), (1.0, 1.0)]).unwrap();
        assert!(beta_uniform_closed_form(0.5, &m6(3, 1, 2.0, d)).is_err());
    }

    #[test]
    fn needs_more_users_than_winners() {
        assert!(BetaCurve::new(&m6(2, 2, 4.0, TypeDistribution::uniform())).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference_of_curve() {
        let curve = BetaCurve::new(&figure()).unwrap();
        let h = 1e-5;
        for x in [0.1, 0.37, 0.5, 0.8, 0.95] {
            let fd = (curve.value(x + h) - curve.value(x - h)) / (2.0 * h);
            assert!((fd - curve.derivative(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn no_calibration_needed_below_diagonal() {
        let s = calibrate_beta(&m6(2, 1, 2.0, TypeDistribution::uniform()), 1000).unwrap();
        assert!(s.calibrations.is_empty());
        assert_eq!(s.kinds_present(), vec![SegmentLabel::Original]);
        assert!((s.evaluate(0.3) - 0.09).abs() < 1e-12);
        assert!(s.invariant_violations().is_empty());
    }

    #[test]
    fn single_crossing_falls_back_to_diagonal() {
        // beta = 2x^2 crosses at 1/2 with slope 4x >= 2 afterwards.
        let s = calibrate_beta(&m6(2, 1, 4.0, TypeDistribution::uniform()), 1000).unwrap();
        assert!(s.fallback);
        assert!((s.calibrations[0].crossing - 0.5).abs() < 1e-10);
        assert_eq!(s.calibrations[0].slope_one, None);
        assert_eq!(s.evaluate(0.75), 0.75);
        assert!(s.invariant_violations().is_empty());
    }

    #[test]
    fn figure_instance_has_three_segments() {
        let s = calibrate_beta(&figure(), 1000).unwrap();
        assert!(!s.fallback);
        assert_eq!(s.kinds_present(), vec![SegmentLabel::Original, SegmentLabel::Diagonal, SegmentLabel::Shifted]);
        assert!(s.invariant_violations().is_empty(), "{:?}", s.invariant_violations());
        let g = figure();
        let cal = s.calibrations[0];
        // crossing and slope-one point re-derived from the polynomial form
        let gap = |x: f64| beta_uniform_closed_form(x, &g).unwrap() - x;
        let x1 = bisect(gap, 0.5, 0.75, 1e-14).unwrap().x;
        assert!((cal.crossing - x1).abs() < 1e-9);
        let h = 1e-6;
        let slope = |x: f64| (beta_uniform_closed_form(x + h, &g).unwrap() - beta_uniform_closed_form(x - h, &g).unwrap()) / (2.0 * h) - 1.0;
        let xp = bisect(slope, x1, 0.95, 1e-13).unwrap().x;
        assert!((cal.slope_one.unwrap() - xp).abs() < 1e-7);
        assert!(s.grid.iter().any(|p| p.kind == SegmentLabel::Diagonal));
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(calibrate_beta(&figure(), 100).is_err());
    }

    #[test]
    fn grid_strategy_interpolates() {
        let s = SymmetricStrategy::from_grid(&[(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        assert_eq!(s.evaluate(0.25), 0.125);
        assert!(SymmetricStrategy::from_grid(&[(0.0, 0.0), (0.5, 0.1)]).is_err());
    }

    #[test]
    fn json_roundtrip_keeps_segments_and_grid() {
        let s = calibrate_beta(&figure(), 1000).unwrap();
        let back: SymmetricStrategy = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back.segments, s.segments);
        assert_eq!(back.grid, s.grid);
        // without the quadrature curve the copy interpolates the grid
        assert!((back.evaluate(0.4321) - s.evaluate(0.4321)).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn calibrated_strategies_satisfy_invariants(
            n in 2usize..14,
            k in 1usize..8,
            r in 0.5f64..30.0,
            mid in 0.1f64..0.9,
            mass in 0.1f64..0.9,
        ) {
            prop_assume!(k < n);
            let d = TypeDistribution::piecewise(vec![(0.0, 0.0), (mid, mass), (1.0, 1.0)]).unwrap();
            let s = calibrate_beta(&m6(n, k, r, d), 1000).unwrap();
            prop_assert!(s.invariant_violations().is_empty(), "{:?}", s.invariant_violations());
        }

        #[test]
        fn beta_is_monotone(n in 2usize..14, k in 1usize..8, r in 0.5f64..30.0) {
            prop_assume!(k < n);
            let curve = BetaCurve::new(&m6(n, k, r, TypeDistribution::uniform())).unwrap();
            for w in curve.table.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }
}
