//! Brute-force and stochastic oracles that certify or refute solver output.
//!
//! Everything here works from the utility definitions in [`crate::model`]
//! and never calls into the solvers, with one exception: the M4 check uses
//! the closed-form best response, which is the exact argmax of a concave
//! utility and is itself cross-checked against a grid search in tests.

mod montecarlo;

pub use montecarlo::{mc_symmetric_check, CandidateStrategy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fullinfo::best_response_m4;
use crate::model::{
    proportional_utility_of, topk_utility_of, validate_profile, ActionProfile, ActionSpace, Allocation, GameConfig,
    Information, Mechanism,
};
use crate::numeric::golden_max;

/// Deviation grid step used by [`verify_pne`] for top-K continuous play.
pub const TOPK_VERIFY_STEP: f64 = 1e-4;
/// Coarse deviation grid used inside the non-existence scan.
pub const TOPK_SCAN_STEP: f64 = 1e-2;
/// Largest N accepted by [`enumerate_binary_equilibria`].
pub const ENUMERATION_CAP: usize = 20;
/// Largest grid the non-existence scan will walk.
pub const SCAN_BUDGET: u128 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationMethod {
    AnalyticBr,
    Grid,
    SubsetEnum,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserDeviation {
    pub user: usize,
    /// Most profitable action found for this user.
    pub action: f64,
    /// Utility improvement of `action` over the profile's action.
    pub gain: f64,
}

/// Result of a unilateral-deviation check. `gain <= tolerance` exactly when
/// `is_equilibrium`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub is_equilibrium: bool,
    pub worst_deviator: usize,
    pub best_deviation: f64,
    pub gain: f64,
    pub method: DeviationMethod,
    pub tolerance: f64,
    pub per_user: Vec<UserDeviation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Type of the designated deviator in symmetric Monte Carlo checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviator_type: Option<f64>,
}

impl DeviationReport {
    fn from_users(per_user: Vec<UserDeviation>, method: DeviationMethod, tolerance: f64) -> Self {
        let worst = per_user
            .iter()
            .copied()
            .reduce(|a, b| if b.gain > a.gain { b } else { a })
            .expect("at least one user");
        DeviationReport {
            is_equilibrium: worst.gain <= tolerance,
            worst_deviator: worst.user,
            best_deviation: worst.action,
            gain: worst.gain,
            method,
            tolerance,
            per_user,
            std_error: None,
            samples: None,
            seed: None,
            deviator_type: None,
        }
    }
}

/// Checks every user's best unilateral deviation from `profile`.
///
/// Binary mechanisms flip each user's participation bit; M4 uses the
/// closed-form best response; M2 searches a deviation grid refined around
/// the best grid point plus the rank-boundary actions just above each
/// competitor.
pub fn verify_pne(profile: &ActionProfile, cfg: &GameConfig, tol: f64) -> Result<DeviationReport> {
    if cfg.mechanism().information() != Information::Full {
        return Err(Error::WrongMechanism { expected: "a full-information mechanism (M1-M4)", found: cfg.mechanism() });
    }
    let check = validate_profile(profile, cfg);
    if !check.valid {
        return Err(Error::Precondition(format!("profile is not valid for the game: {check:?}")));
    }
    let per_user: Vec<UserDeviation> = (0..profile.len()).map(|i| best_deviation(i, profile.as_slice(), cfg, TOPK_VERIFY_STEP)).collect();
    let method = match cfg.mechanism() {
        Mechanism::M4 => DeviationMethod::AnalyticBr,
        Mechanism::M2 => DeviationMethod::Grid,
        _ => DeviationMethod::SubsetEnum,
    };
    Ok(DeviationReport::from_users(per_user, method, tol))
}

fn utility_at(i: usize, actions: &[f64], cfg: &GameConfig) -> f64 {
    match cfg.mechanism().allocation() {
        Allocation::TopK => topk_utility_of(i, actions, cfg.types(), cfg.k(), cfg.reward(), cfg.cost_bound()),
        Allocation::Proportional => proportional_utility_of(i, actions, cfg.types(), cfg.reward(), cfg.cost_bound()),
    }
}

fn best_deviation(i: usize, actions: &[f64], cfg: &GameConfig, topk_step: f64) -> UserDeviation {
    let current = utility_at(i, actions, cfg);
    let mut work = actions.to_vec();
    let mut gain_of = |x: f64| {
        work[i] = x;
        utility_at(i, &work, cfg) - current
    };
    let q = cfg.types()[i];
    let (action, gain) = match (cfg.mechanism().action_space(), cfg.mechanism().allocation()) {
        (ActionSpace::Binary, _) => {
            let flipped = if actions[i] > 0.0 { 0.0 } else { q };
            (flipped, gain_of(flipped))
        }
        (ActionSpace::Continuous, Allocation::Proportional) => {
            let others: f64 = actions.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum();
            // No maximiser exists when nobody else contributes: any positive
            // action earns all of R and halving it is always better.
            let action = best_response_m4(q, others, cfg).unwrap_or(if actions[i] > 0.0 { 0.5 * actions[i] } else { 1e-9 * q });
            (action, gain_of(action))
        }
        (ActionSpace::Continuous, Allocation::TopK) => topk_search(&mut gain_of, i, actions, q, topk_step),
    };
    UserDeviation { user: i, action, gain }
}

/// Maximises a rank-based deviation gain over `[0, q]`. Within a rank band
/// the utility falls linearly in `x`, so the candidates are zero, a tiny
/// positive action, each competitor's action and the point just above it,
/// plus a coarse grid refined by golden section.
fn topk_search<G: FnMut(f64) -> f64>(gain_of: &mut G, i: usize, actions: &[f64], q: f64, step: f64) -> (f64, f64) {
    let mut best = (0.0, gain_of(0.0));
    let mut consider = |x: f64, gain_of: &mut G| {
        if (0.0..=q).contains(&x) {
            let g = gain_of(x);
            if g > best.1 {
                best = (x, g);
            }
        }
    };
    consider(q * 1e-12, gain_of);
    consider(q, gain_of);
    for (j, &a) in actions.iter().enumerate() {
        if j != i && a > 0.0 {
            consider(a, gain_of);
            consider(a + (a * 1e-12).max(1e-15), gain_of);
        }
    }
    let steps = (q / step).floor() as usize;
    let mut grid_best = (0.0, f64::NEG_INFINITY);
    for g in 0..=steps {
        let x = g as f64 * step;
        let v = gain_of(x);
        if v > grid_best.1 {
            grid_best = (x, v);
        }
    }
    consider(grid_best.0, gain_of);
    let (lo, hi) = ((grid_best.0 - step).max(0.0), (grid_best.0 + step).min(q));
    if hi > lo {
        let (x, _) = golden_max(&mut *gain_of, lo, hi, 60);
        consider(x, gain_of);
    }
    best
}

/// All pure equilibria of a binary full-information game, by walking every
/// support set. Bit `i` of the walk index is user `i`, so results come out
/// in increasing mask order.
pub fn enumerate_binary_equilibria(cfg: &GameConfig) -> Result<Vec<ActionProfile>> {
    enumerate_binary_equilibria_with_tol(cfg, 0.0)
}

pub fn enumerate_binary_equilibria_with_tol(cfg: &GameConfig, tol: f64) -> Result<Vec<ActionProfile>> {
    cfg.require("a binary full-information mechanism (M1 or M3)", &[Mechanism::M1, Mechanism::M3])?;
    let n = cfg.n_users();
    if n > ENUMERATION_CAP {
        return Err(Error::BudgetExceeded { what: "binary enumeration", requested: 1u128 << n, cap: 1u128 << ENUMERATION_CAP });
    }
    let types = cfg.types();
    let mut found = Vec::new();
    let mut actions = vec![0.0; n];
    for mask in 0u32..(1u32 << n) {
        for (i, x) in actions.iter_mut().enumerate() {
            *x = if mask >> i & 1 == 1 { types[i] } else { 0.0 };
        }
        let stable = (0..n).all(|i| best_deviation(i, &actions, cfg, TOPK_VERIFY_STEP).gain <= tol);
        if stable {
            found.push(ActionProfile::new(actions.clone()));
        }
    }
    Ok(found)
}

/// A grid profile together with one profitable deviation from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub profile: ActionProfile,
    pub user: usize,
    pub deviation: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    /// True iff every grid profile admits a deviation gaining more than
    /// `threshold`.
    pub all_deviate: bool,
    pub step: f64,
    pub threshold: f64,
    pub profiles_scanned: usize,
    pub witnesses: Vec<Witness>,
    /// Grid profiles where no deviation beat the threshold.
    pub stable_points: Vec<ActionProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Walks every profile on a `step` grid over `[0, q_1] x ... x [0, q_N]`
/// and looks for a profitable unilateral deviation from each. A profile
/// counts as refuted when some user gains more than `step * c / 2`: half a
/// grid cell of cost, which is below the saving a contributor makes by
/// shading a single grid step down to an infinitesimal action.
pub fn grid_nonexistence_scan(cfg: &GameConfig, step: f64) -> Result<GridScan> {
    cfg.require("a continuous full-information mechanism (M2 or M4)", &[Mechanism::M2, Mechanism::M4])?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter { name: "step", value: step, reason: "must lie in (0, 1]" });
    }
    let n = cfg.n_users();
    if n > 4 {
        return Err(Error::Precondition(format!("grid scan supports N <= 4, got {n}")));
    }
    let threshold = 0.5 * step * cfg.cost_bound();
    if cfg.mechanism() == Mechanism::M2 && n <= cfg.k() {
        return Ok(GridScan {
            all_deviate: false,
            step,
            threshold,
            profiles_scanned: 0,
            witnesses: Vec::new(),
            stable_points: Vec::new(),
            note: Some("N <= K: every participant wins R/K, so the scan does not apply".into()),
        });
    }
    let axes: Vec<Vec<f64>> = cfg
        .types()
        .iter()
        .map(|&q| {
            let steps = (q / step + 1e-9).floor() as usize;
            let mut axis: Vec<f64> = (0..=steps).map(|g| (g as f64 * step).min(q)).collect();
            if q - axis[axis.len() - 1] > 1e-12 {
                axis.push(q);
            }
            axis
        })
        .collect();
    let total: u128 = axes.iter().map(|a| a.len() as u128).product();
    if total > SCAN_BUDGET {
        return Err(Error::BudgetExceeded { what: "grid scan", requested: total, cap: SCAN_BUDGET });
    }
    let mut witnesses = Vec::new();
    let mut stable_points = Vec::new();
    let mut index = vec![0usize; n];
    let mut actions = vec![0.0; n];
    loop {
        for (a, (axis, &g)) in actions.iter_mut().zip(axes.iter().zip(&index)) {
            *a = axis[g];
        }
        let witness = (0..n).find_map(|i| {
            let d = best_deviation(i, &actions, cfg, TOPK_SCAN_STEP);
            (d.gain > threshold).then_some(d)
        });
        match witness {
            Some(d) => witnesses.push(Witness {
                profile: ActionProfile::new(actions.clone()),
                user: d.user,
                deviation: d.action,
                gain: d.gain,
            }),
            None => stable_points.push(ActionProfile::new(actions.clone())),
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == n {
                let profiles_scanned = witnesses.len() + stable_points.len();
                return Ok(GridScan {
                    all_deviate: stable_points.is_empty(),
                    step,
                    threshold,
                    profiles_scanned,
                    witnesses,
                    stable_points,
                    note: None,
                });
            }
            index[pos] += 1;
            if index[pos] < axes[pos].len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}
