//! Equilibrium solvers for the full-information mechanisms M1-M4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionProfile, GameConfig, Mechanism};
use crate::numeric::nearly_equal;
use crate::verify::{enumerate_binary_equilibria, enumerate_binary_equilibria_with_tol, verify_pne, ENUMERATION_CAP};

/// Certification tolerance for continuous (M4) equilibria.
pub const CONTINUOUS_TOL: f64 = 1e-9;
/// Slack on the strict feasibility inequalities of the local-game formulas.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Exactly one equilibrium, established by the case analysis or an
    /// exhaustive search.
    Unique,
    Multiple,
    None,
    /// Knife-edge parameters (R = Kc or R = c) with a continuum of or many
    /// equilibria; `profiles` lists representatives.
    MarginalMultiplicity,
    /// At least one certified equilibrium; multiplicity was not examined.
    Exists,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub mechanism: Mechanism,
    pub verdict: Verdict,
    pub profiles: Vec<ActionProfile>,
    /// Largest unilateral deviation gain for each profile.
    pub certificates: Vec<f64>,
    pub notes: Vec<String>,
}

impl EquilibriumOutcome {
    fn none(mechanism: Mechanism, notes: Vec<String>) -> Self {
        EquilibriumOutcome { mechanism, verdict: Verdict::None, profiles: Vec::new(), certificates: Vec::new(), notes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Keep searching after the first M4 equilibrium and list every one.
    pub all: bool,
    /// Largest N for which M1/M3 equilibria are enumerated exhaustively.
    pub enumeration_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { all: false, enumeration_cap: ENUMERATION_CAP }
    }
}

/// Dispatches to the solver for `cfg`'s mechanism.
pub fn solve(cfg: &GameConfig, opts: SolveOptions) -> Result<EquilibriumOutcome> {
    match cfg.mechanism() {
        Mechanism::M1 => solve_m1_with(cfg, opts.enumeration_cap),
        Mechanism::M2 => solve_m2(cfg),
        Mechanism::M3 => solve_m3_with(cfg, opts.enumeration_cap),
        Mechanism::M4 => solve_m4_with(cfg, opts.all),
        m => Err(Error::WrongMechanism { expected: "a full-information mechanism (M1-M4)", found: m }),
    }
}

fn certify(cfg: &GameConfig, profiles: Vec<ActionProfile>, tol: f64) -> Result<(Vec<ActionProfile>, Vec<f64>)> {
    let mut certificates = Vec::with_capacity(profiles.len());
    for p in &profiles {
        let report = verify_pne(p, cfg, tol)?;
        if !report.is_equilibrium {
            return Err(Error::Exhausted(format!(
                "profile {:?} failed certification: user {} gains {} by moving to {}",
                p.0, report.worst_deviator, report.gain, report.best_deviation
            )));
        }
        certificates.push(report.gain);
    }
    Ok((profiles, certificates))
}

fn marginal_tol(cfg: &GameConfig) -> f64 {
    1e-12 * cfg.reward().max(cfg.cost_bound())
}

/// Top-K allocation, binary actions.
pub fn solve_m1(cfg: &GameConfig) -> Result<EquilibriumOutcome> {
    solve_m1_with(cfg, ENUMERATION_CAP)
}

fn solve_m1_with(cfg: &GameConfig, cap: usize) -> Result<EquilibriumOutcome> {
    cfg.require("M1", &[Mechanism::M1])?;
    let (n, k) = (cfg.n_users(), cfg.k());
    let threshold = k as f64 * cfg.cost_bound();
    let top = ActionProfile::new(cfg.types().iter().enumerate().map(|(i, &q)| if i < k { q } else { 0.0 }).collect());
    if nearly_equal(cfg.reward(), threshold) {
        let (profiles, certificates) = certify(cfg, vec![ActionProfile::zeros(n), top], marginal_tol(cfg))?;
        return Ok(EquilibriumOutcome {
            mechanism: Mechanism::M1,
            verdict: Verdict::MarginalMultiplicity,
            profiles,
            certificates,
            notes: vec!["R = Kc: every group of at most K contributors is an equilibrium; listing nobody and the top-K set".into()],
        });
    }
    let (candidate, note) = if cfg.reward() < threshold {
        (ActionProfile::zeros(n), "R < Kc: nobody contributes")
    } else {
        (top, "R > Kc: the K highest types contribute")
    };
    match certify(cfg, vec![candidate], 0.0) {
        Ok((profiles, certificates)) => Ok(EquilibriumOutcome {
            mechanism: Mechanism::M1,
            verdict: Verdict::Unique,
            profiles,
            certificates,
            notes: vec![note.into()],
        }),
        // Equal types straddling rank K break the construction under the
        // equal-split tie rule; fall back to exhaustive search.
        Err(Error::Exhausted(why)) if n <= cap => {
            let found = enumerate_binary_equilibria(cfg)?;
            let notes = vec![format!("{note}, but {why}; equilibria found by exhaustive search")];
            from_enumeration(cfg, found, notes)
        }
        Err(e) => Err(e),
    }
}

fn from_enumeration(cfg: &GameConfig, found: Vec<ActionProfile>, notes: Vec<String>) -> Result<EquilibriumOutcome> {
    if found.is_empty() {
        return Ok(EquilibriumOutcome::none(cfg.mechanism(), notes));
    }
    let verdict = if found.len() == 1 { Verdict::Unique } else { Verdict::Multiple };
    let (profiles, certificates) = certify(cfg, found, 0.0)?;
    Ok(EquilibriumOutcome { mechanism: cfg.mechanism(), verdict, profiles, certificates, notes })
}

/// Top-K allocation, continuous actions: no pure equilibrium exists.
///
/// Any winner can shade her contribution down while keeping her rank, a
/// loser prefers to drop out, and when nobody contributes any user can
/// enter with an arbitrarily small quality and collect R/K. The argument
/// goes through for every R > 0 and every N, K; the classic case is
/// R > Kc with N > K, and outside it a note records the extension. Use
/// [`crate::verify::grid_nonexistence_scan`] for numerical corroboration.
pub fn solve_m2(cfg: &GameConfig) -> Result<EquilibriumOutcome> {
    cfg.require("M2", &[Mechanism::M2])?;
    let (n, k) = (cfg.n_users(), cfg.k());
    let mut notes = Vec::new();
    if cfg.reward() > k as f64 * cfg.cost_bound() && n > k {
        notes.push("R > Kc and N > K: contributors race down towards zero quality, so no profile is stable".into());
    } else {
        notes.push(format!(
            "outside the R > Kc, N > K region (R = {}, Kc = {}, N = {n}, K = {k}); non-existence follows from the shading and entry deviations",
            cfg.reward(),
            k as f64 * cfg.cost_bound()
        ));
    }
    Ok(EquilibriumOutcome::none(Mechanism::M2, notes))
}

/// Proportional allocation, binary actions.
pub fn solve_m3(cfg: &GameConfig) -> Result<EquilibriumOutcome> {
    solve_m3_with(cfg, ENUMERATION_CAP)
}

/// Index count `j` of the prefix equilibrium: the largest `j` with
/// `R q_j / (q_1 + ... + q_j) > c`. Requires `R > c`.
pub fn m3_prefix_len(cfg: &GameConfig) -> usize {
    let mut sum = 0.0;
    let mut j = 0;
    for &q in cfg.types() {
        sum += q;
        if cfg.reward() * q / sum > cfg.cost_bound() {
            j += 1;
        } else {
            break;
        }
    }
    j
}

fn solve_m3_with(cfg: &GameConfig, cap: usize) -> Result<EquilibriumOutcome> {
    cfg.require("M3", &[Mechanism::M3])?;
    let n = cfg.n_users();
    let (r, c) = (cfg.reward(), cfg.cost_bound());
    if nearly_equal(r, c) {
        let mut candidates = vec![ActionProfile::zeros(n)];
        for i in 0..n {
            candidates.push(ActionProfile::zeros(n).with_action(i, cfg.types()[i]));
        }
        let (profiles, certificates) = certify(cfg, candidates, marginal_tol(cfg))?;
        return Ok(EquilibriumOutcome {
            mechanism: Mechanism::M3,
            verdict: Verdict::MarginalMultiplicity,
            profiles,
            certificates,
            notes: vec!["R = c: nobody contributing and every single contributor are equilibria".into()],
        });
    }
    if r < c {
        let (profiles, certificates) = certify(cfg, vec![ActionProfile::zeros(n)], 0.0)?;
        return Ok(EquilibriumOutcome {
            mechanism: Mechanism::M3,
            verdict: Verdict::Unique,
            profiles,
            certificates,
            notes: vec!["R < c: nobody contributes".into()],
        });
    }
    let j = m3_prefix_len(cfg);
    let prefix = ActionProfile::new(cfg.types().iter().enumerate().map(|(i, &q)| if i < j { q } else { 0.0 }).collect());
    let mut notes = vec![format!("R > c: the first {j} users contribute in the prefix equilibrium")];
    if n > cap {
        notes.push(format!("N = {n} exceeds the enumeration cap {cap}; other equilibria were not searched"));
        let (profiles, certificates) = certify(cfg, vec![prefix], 0.0)?;
        return Ok(EquilibriumOutcome { mechanism: Mechanism::M3, verdict: Verdict::Exists, profiles, certificates, notes });
    }
    let mut found = enumerate_binary_equilibria_with_tol(cfg, 0.0)?;
    match found.iter().position(|p| *p == prefix) {
        Some(pos) => {
            let p = found.remove(pos);
            found.insert(0, p);
        }
        None => return Err(Error::Exhausted(format!("prefix profile {:?} is not an equilibrium", prefix.0))),
    }
    if found.len() > 1 {
        notes.push(format!("exhaustive search found {} equilibria", found.len()));
    }
    from_enumeration(cfg, found, notes)
}

/// Unconstrained best response `sqrt(R q x_-i / c) - x_-i`, clamped into
/// `[0, q]`. `None` when `x_minus` is zero: then any positive action earns
/// all of R and no maximiser exists.
pub fn best_response_m4(q: f64, x_minus: f64, cfg: &GameConfig) -> Option<f64> {
    if x_minus <= 0.0 {
        return None;
    }
    let raw = (cfg.reward() * q * x_minus / cfg.cost_bound()).sqrt() - x_minus;
    Some(raw.clamp(0.0, q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    /// Lower bound on every action in the perturbed game.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once successive iterates differ by less than this (max-norm).
    pub tol: f64,
    pub record_trajectory: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions { epsilon: 1e-8, max_iters: 100_000, tol: 1e-13, record_trajectory: false }
    }
}

/// Damping factors tried in turn until the simultaneous update settles.
pub const DAMPING_SCHEDULE: [f64; 6] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub attempt: usize,
    pub iteration: usize,
    pub damping: f64,
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsResult {
    pub profile: ActionProfile,
    pub converged: bool,
    pub iterations: usize,
    pub damping: f64,
    pub epsilon: f64,
    /// Max-norm change of the last update.
    pub last_step: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trajectory: Vec<TrajectoryRow>,
}

/// Best-response iteration in the perturbed M4 game where every action is
/// floored at `epsilon`. All users update simultaneously from `x_i = q_i`;
/// if the plain update does not settle, it is restarted with the damping
/// factors of [`DAMPING_SCHEDULE`]. A non-converged result carries the last
/// iterate.
pub fn perturbed_dynamics(cfg: &GameConfig, opts: DynamicsOptions) -> Result<DynamicsResult> {
    cfg.require("M4", &[Mechanism::M4])?;
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(Error::InvalidParameter { name: "epsilon", value: opts.epsilon, reason: "must be positive" });
    }
    let types = cfg.types();
    if types.len() < 2 {
        return Err(Error::NoBestResponse { user: 0 });
    }
    let (r, c) = (cfg.reward(), cfg.cost_bound());
    let mut trajectory = Vec::new();
    let mut last = None;
    for (attempt, &damping) in DAMPING_SCHEDULE.iter().enumerate() {
        let mut x = types.to_vec();
        let mut next = x.clone();
        let mut step = f64::INFINITY;
        let mut iterations = 0;
        if opts.record_trajectory {
            trajectory.push(TrajectoryRow { attempt, iteration: 0, damping, profile: x.clone() });
        }
        while iterations < opts.max_iters {
            let total: f64 = x.iter().sum();
            step = 0.0;
            for (i, (&q, out)) in types.iter().zip(next.iter_mut()).enumerate() {
                let others = total - x[i];
                let br = ((r * q * others / c).sqrt() - others).clamp(opts.epsilon.min(q), q);
                *out = (1.0 - damping) * x[i] + damping * br;
                step = step.max((*out - x[i]).abs());
            }
            std::mem::swap(&mut x, &mut next);
            iterations += 1;
            if opts.record_trajectory {
                trajectory.push(TrajectoryRow { attempt, iteration: iterations, damping, profile: x.clone() });
            }
            if step < opts.tol || !step.is_finite() {
                break;
            }
        }
        let converged = step < opts.tol;
        let result = DynamicsResult {
            profile: ActionProfile::new(x),
            converged,
            iterations,
            damping,
            epsilon: opts.epsilon,
            last_step: step,
            trajectory: Vec::new(),
        };
        if converged {
            return Ok(DynamicsResult { trajectory, ..result });
        }
        last = Some(result);
    }
    Ok(DynamicsResult { trajectory, ..last.expect("schedule is non-empty") })
}

fn check_local_size(cfg: &GameConfig, n: usize) -> Result<()> {
    cfg.require("M4", &[Mechanism::M4])?;
    if n < 1 || n > cfg.n_users() {
        return Err(Error::Precondition(format!("local game size {n} outside 1..={}", cfg.n_users())));
    }
    Ok(())
}

/// Interior equilibrium of the local game among the first `n` users:
/// summing the first-order conditions gives the total
/// `R (n - 1) / (c * sum 1/q_k)` and each user's share follows. No
/// feasibility clamping; negative entries or entries above `q_i` mean the
/// interior candidate is infeasible.
pub fn eq_interior(cfg: &GameConfig, n: usize) -> Result<Vec<f64>> {
    check_local_size(cfg, n)?;
    if n < 2 {
        return Err(Error::Precondition("interior local game needs n >= 2".into()));
    }
    let types = &cfg.types()[..n];
    let inv_sum: f64 = types.iter().map(|q| 1.0 / q).sum();
    let m = (n - 1) as f64;
    let total = cfg.reward() * m / (cfg.cost_bound() * inv_sum);
    Ok(types.iter().map(|&q| total * (1.0 - m / (q * inv_sum))).collect())
}

/// Local game among the first `n` users with the first `m` of them pinned
/// at `x_i = q_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalGameSolution {
    pub n: usize,
    pub m: usize,
    /// Actions of the first `n` users.
    pub profile: ActionProfile,
    pub feasible: bool,
}

/// Boundary candidate of the local game: users `1..=m` contribute their
/// types and users `m+1..=n` play the interior first-order solution given
/// the pinned total `Q_m`. Feasible when every interior action lies in
/// `(0, q_i)` and no pinned user wants to drop below her type.
pub fn eq_boundary(cfg: &GameConfig, n: usize, m: usize) -> Result<LocalGameSolution> {
    check_local_size(cfg, n)?;
    if m < 1 || m > n {
        return Err(Error::Precondition(format!("pinned count {m} outside 1..={n}")));
    }
    if m == n && n == 1 {
        return Err(Error::Precondition("a lone pinned user has no opponent (x_-i = 0)".into()));
    }
    let (r, c) = (cfg.reward(), cfg.cost_bound());
    let types = &cfg.types()[..n];
    let pinned_total: f64 = types[..m].iter().sum();
    let mut profile = types[..m].to_vec();

    if m == n {
        let bound = |q: f64| c * pinned_total * pinned_total / (q * (pinned_total - q));
        let feasible = r >= bound(types[0]) * (1.0 - FEASIBILITY_SLACK) && r >= bound(types[n - 1]) * (1.0 - FEASIBILITY_SLACK);
        return Ok(LocalGameSolution { n, m, profile: ActionProfile::new(profile), feasible });
    }

    let a: f64 = types[m..].iter().map(|q| c / (r * q)).sum();
    let free = (n - m - 1) as f64;
    let s = (free + (free * free + 4.0 * pinned_total * a).sqrt()) / (2.0 * a);
    let mut feasible = true;
    for &q in &types[m..] {
        let x = s - c * s * s / (r * q);
        feasible &= x > -FEASIBILITY_SLACK && x < q + FEASIBILITY_SLACK;
        profile.push(x.clamp(0.0, q));
    }
    // Pinned users need sqrt(R q (x - q) / c) - (x - q) >= q, which has a
    // solution only when R >= 4c.
    let disc = 1.0 - 4.0 * c / r;
    if disc < 0.0 {
        feasible = false;
    } else {
        let total: f64 = profile.iter().sum();
        let lower = r * types[0] / (2.0 * c) * (1.0 - disc.sqrt());
        let upper = r * types[m - 1] / (2.0 * c) * (1.0 + disc.sqrt());
        let slack = FEASIBILITY_SLACK * total.max(1.0);
        feasible &= lower - slack <= total && total <= upper + slack;
    }
    Ok(LocalGameSolution { n, m, profile: ActionProfile::new(profile), feasible })
}

/// Is `{i : x_i = q_i}` a prefix of the (non-increasing) type order?
pub fn pinned_prefix(profile: &ActionProfile, types: &[f64]) -> bool {
    let pinned: Vec<bool> = profile.0.iter().zip(types).map(|(&x, &q)| (x - q).abs() <= FEASIBILITY_SLACK * q).collect();
    pinned.windows(2).all(|w| w[0] || !w[1])
}

/// Proportional allocation, continuous actions: the local-game search.
pub fn solve_m4(cfg: &GameConfig) -> Result<EquilibriumOutcome> {
    solve_m4_with(cfg, false)
}

/// Every equilibrium the local-game search reaches.
pub fn solve_m4_all(cfg: &GameConfig) -> Result<EquilibriumOutcome> {
    solve_m4_with(cfg, true)
}

/// For `n = 2..=N`, try the interior candidate of the `n`-user local game,
/// then each boundary candidate with `m = 1..=n` users pinned at their
/// types. A feasible local equilibrium extends to the full game (others at
/// zero) when its total is at least `R q_{n+1} / c`, so that nobody
/// outside wants to enter. Each lifted profile is certified by
/// [`verify_pne`] before it is returned.
fn solve_m4_with(cfg: &GameConfig, all: bool) -> Result<EquilibriumOutcome> {
    cfg.require("M4", &[Mechanism::M4])?;
    let types = cfg.types();
    let big_n = types.len();
    if big_n < 2 {
        return Err(Error::Precondition("M4 needs at least two users; a lone user has no best response".into()));
    }
    let (r, c) = (cfg.reward(), cfg.cost_bound());
    let mut profiles: Vec<ActionProfile> = Vec::new();
    let mut certificates = Vec::new();
    let mut notes = Vec::new();
    let mut diagnostics = Vec::new();

    let mut consider = |label: String, local: Vec<f64>, profiles: &mut Vec<ActionProfile>, certificates: &mut Vec<f64>| -> Result<bool> {
        let n = local.len();
        let total: f64 = local.iter().sum();
        if n < big_n && total < r * types[n] / c * (1.0 - FEASIBILITY_SLACK) {
            return Ok(false);
        }
        let mut full = local;
        full.resize(big_n, 0.0);
        let profile = ActionProfile::new(full);
        let report = verify_pne(&profile, cfg, CONTINUOUS_TOL)?;
        if !report.is_equilibrium {
            diagnostics.push(format!("{label}: lifted profile failed certification (gain {})", report.gain));
            return Ok(false);
        }
        if profiles.iter().any(|p| p.0.iter().zip(&profile.0).all(|(a, b)| (a - b).abs() < 1e-9)) {
            return Ok(false);
        }
        notes.push(format!("found at {label}"));
        profiles.push(profile);
        certificates.push(report.gain);
        Ok(true)
    };

    'outer: for n in 2..=big_n {
        let y = eq_interior(cfg, n)?;
        let interior_ok = y
            .iter()
            .zip(types)
            .all(|(&x, &q)| x >= -FEASIBILITY_SLACK && x <= q + FEASIBILITY_SLACK);
        if interior_ok {
            let local = y.iter().zip(types).map(|(&x, &q)| x.clamp(0.0, q)).collect();
            if consider(format!("n = {n}, interior"), local, &mut profiles, &mut certificates)? && !all {
                break 'outer;
            }
        }
        for m in 1..=n {
            let sol = eq_boundary(cfg, n, m)?;
            if sol.feasible
                && consider(format!("n = {n}, m = {m}"), sol.profile.0, &mut profiles, &mut certificates)?
                && !all
            {
                break 'outer;
            }
        }
    }
    if profiles.is_empty() {
        return Err(Error::Exhausted(format!("local-game search found no certified profile; {}", diagnostics.join("; "))));
    }
    let verdict = match (all, profiles.len()) {
        (false, _) => Verdict::Exists,
        (true, 1) => Verdict::Unique,
        (true, _) => Verdict::Multiple,
    };
    Ok(EquilibriumOutcome { mechanism: Mechanism::M4, verdict, profiles, certificates, notes })
}
