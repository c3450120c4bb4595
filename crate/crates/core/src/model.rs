//! The game model: mechanisms, configurations, action profiles and the two
//! reward allocation rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distribution::TypeDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Allocation {
    TopK,
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Information {
    Full,
    Partial,
}

/// The seven analysed combinations of allocation rule, action space and
/// information setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    /// Top-K, binary, full information.
    M1,
    /// Top-K, continuous, full information.
    M2,
    /// Proportional, binary, full information.
    M3,
    /// Proportional, continuous, full information.
    M4,
    /// Top-K, binary, partial information.
    M5,
    /// Top-K, continuous, partial information.
    M6,
    /// Proportional, binary, partial information.
    M7,
}

impl Mechanism {
    pub const ALL: [Mechanism; 7] = [
        Mechanism::M1,
        Mechanism::M2,
        Mechanism::M3,
        Mechanism::M4,
        Mechanism::M5,
        Mechanism::M6,
        Mechanism::M7,
    ];

    pub fn allocation(self) -> Allocation {
        match self {
            Mechanism::M1 | Mechanism::M2 | Mechanism::M5 | Mechanism::M6 => Allocation::TopK,
            Mechanism::M3 | Mechanism::M4 | Mechanism::M7 => Allocation::Proportional,
        }
    }

    pub fn action_space(self) -> ActionSpace {
        match self {
            Mechanism::M1 | Mechanism::M3 | Mechanism::M5 | Mechanism::M7 => ActionSpace::Binary,
            Mechanism::M2 | Mechanism::M4 | Mechanism::M6 => ActionSpace::Continuous,
        }
    }

    pub fn information(self) -> Information {
        match self {
            Mechanism::M1 | Mechanism::M2 | Mechanism::M3 | Mechanism::M4 => Information::Full,
            Mechanism::M5 | Mechanism::M6 | Mechanism::M7 => Information::Partial,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mechanism `{s}` (expected M1..M7)"))
    }
}

/// Who the users are: a known type profile or a common prior.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Types(Vec<f64>),
    Distribution { n_users: usize, distribution: TypeDistribution },
}

/// A validated game instance. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    mechanism: Mechanism,
    reward: f64,
    cost_bound: f64,
    top_k: Option<usize>,
    population: Population,
}

impl GameConfig {
    /// Full-information game over types `q_1 >= q_2 >= ... >= q_N`, each in
    /// `(0, 1]`. Use [`sort_types`] first if the input is unordered.
    pub fn full_information(
        mechanism: Mechanism,
        types: Vec<f64>,
        reward: f64,
        cost_bound: f64,
        top_k: Option<usize>,
    ) -> Result<Self> {
        if mechanism.information() != Information::Full {
            return Err(Error::WrongMechanism { expected: "a full-information mechanism (M1-M4)", found: mechanism });
        }
        if types.is_empty() {
            return Err(Error::InvalidParameter { name: "N", value: 0.0, reason: "at least one user is required" });
        }
        for (index, &q) in types.iter().enumerate() {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidType { index, value: q });
            }
            if index > 0 && q > types[index - 1] {
                return Err(Error::UnsortedTypes { index });
            }
        }
        let cfg = GameConfig { mechanism, reward, cost_bound, top_k, population: Population::Types(types) };
        cfg.check_parameters()?;
        Ok(cfg)
    }

    /// Partial-information game with `n_users` i.i.d. draws from `distribution`.
    pub fn partial_information(
        mechanism: Mechanism,
        n_users: usize,
        distribution: TypeDistribution,
        reward: f64,
        cost_bound: f64,
        top_k: Option<usize>,
    ) -> Result<Self> {
        if mechanism.information() != Information::Partial {
            return Err(Error::WrongMechanism { expected: "a partial-information mechanism (M5-M7)", found: mechanism });
        }
        if n_users == 0 {
            return Err(Error::InvalidParameter { name: "N", value: 0.0, reason: "at least one user is required" });
        }
        let cfg = GameConfig {
            mechanism,
            reward,
            cost_bound,
            top_k,
            population: Population::Distribution { n_users, distribution },
        };
        cfg.check_parameters()?;
        Ok(cfg)
    }

    fn check_parameters(&self) -> Result<()> {
        if !(self.reward.is_finite() && self.reward > 0.0) {
            return Err(Error::InvalidParameter { name: "R", value: self.reward, reason: "must be positive" });
        }
        if !(self.cost_bound.is_finite() && self.cost_bound > 0.0) {
            return Err(Error::InvalidParameter { name: "c", value: self.cost_bound, reason: "must be positive" });
        }
        match (self.mechanism.allocation(), self.top_k) {
            (Allocation::TopK, None) => Err(Error::MissingTopK(self.mechanism)),
            (_, Some(0)) => Err(Error::InvalidParameter { name: "K", value: 0.0, reason: "must be at least 1" }),
            _ => Ok(()),
        }
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn reward(&self) -> f64 {
        self.reward
    }

    pub fn cost_bound(&self) -> f64 {
        self.cost_bound
    }

    pub fn top_k(&self) -> Option<usize> {
        self.top_k
    }

    /// `K` for rank-based mechanisms; 1 otherwise (never used there).
    pub fn k(&self) -> usize {
        self.top_k.unwrap_or(1)
    }

    pub fn n_users(&self) -> usize {
        match &self.population {
            Population::Types(t) => t.len(),
            Population::Distribution { n_users, .. } => *n_users,
        }
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    /// The type profile; empty for partial-information games.
    pub fn types(&self) -> &[f64] {
        match &self.population {
            Population::Types(t) => t,
            Population::Distribution { .. } => &[],
        }
    }

    pub fn distribution(&self) -> Option<&TypeDistribution> {
        match &self.population {
            Population::Types(_) => None,
            Population::Distribution { distribution, .. } => Some(distribution),
        }
    }

    pub(crate) fn require(&self, expected: &'static str, allowed: &[Mechanism]) -> Result<()> {
        if allowed.contains(&self.mechanism) {
            Ok(())
        } else {
            Err(Error::WrongMechanism { expected, found: self.mechanism })
        }
    }
}

/// Stable sort into non-increasing order; equal types keep input order.
pub fn sort_types(types: &mut [f64]) {
    types.sort_by(|a, b| b.total_cmp(a));
}

/// Per-user contributed qualities `x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(pub Vec<f64>);

impl ActionProfile {
    pub fn new(actions: Vec<f64>) -> Self {
        ActionProfile(actions)
    }

    pub fn zeros(n: usize) -> Self {
        ActionProfile(vec![0.0; n])
    }

    /// Everyone contributes their full type.
    pub fn full(types: &[f64]) -> Self {
        ActionProfile(types.to_vec())
    }

    /// Binary profile from a support mask: `x_i = q_i` where `mask[i]`.
    pub fn from_support(types: &[f64], mask: &[bool]) -> Self {
        ActionProfile(types.iter().zip(mask).map(|(&q, &on)| if on { q } else { 0.0 }).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `x_{-i}`: total contribution of everyone except `i`.
    pub fn others_total(&self, i: usize) -> f64 {
        others_total(&self.0, i)
    }

    /// Participation mask (`x_i > 0`).
    pub fn support(&self) -> Vec<bool> {
        self.0.iter().map(|&x| x > 0.0).collect()
    }

    pub fn with_action(&self, i: usize, x: f64) -> Self {
        let mut next = self.clone();
        next.0[i] = x;
        next
    }
}

fn others_total(actions: &[f64], i: usize) -> f64 {
    actions.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x).sum()
}

/// Sum of contributed qualities.
pub fn total_quality(profile: &ActionProfile) -> f64 {
    profile.0.iter().sum()
}

/// Linear cost `c * x / q`.
#[inline]
pub fn cost(x: f64, q: f64, cost_bound: f64) -> f64 {
    if x > 0.0 {
        cost_bound * x / q
    } else {
        0.0
    }
}

/// Proportional share `R * x_i / (x_i + x_{-i})`, zero for non-participants.
#[inline]
pub fn proportional_reward(x: f64, others: f64, reward: f64) -> f64 {
    if x > 0.0 {
        reward * x / (x + others)
    } else {
        0.0
    }
}

pub fn proportional_rewards(actions: &[f64], reward: f64) -> Vec<f64> {
    let total: f64 = actions.iter().sum();
    actions
        .iter()
        .map(|&x| if x > 0.0 { reward * x / total } else { 0.0 })
        .collect()
}

/// Top-K reward of user `i`: `R/K` when among the K largest positive
/// contributions. Users tied at the K-th rank split the remaining slots
/// equally.
pub fn topk_reward(i: usize, actions: &[f64], k: usize, reward: f64) -> f64 {
    let xi = actions[i];
    if xi <= 0.0 {
        return 0.0;
    }
    let (mut above, mut tied) = (0usize, 1usize);
    for (j, &xj) in actions.iter().enumerate() {
        if j == i || xj <= 0.0 {
            continue;
        }
        if xj > xi {
            above += 1;
        } else if xj == xi {
            tied += 1;
        }
    }
    if above >= k {
        return 0.0;
    }
    let slots = k - above;
    let share = reward / k as f64;
    if tied <= slots {
        share
    } else {
        share * slots as f64 / tied as f64
    }
}

pub fn topk_rewards(actions: &[f64], k: usize, reward: f64) -> Vec<f64> {
    (0..actions.len()).map(|i| topk_reward(i, actions, k, reward)).collect()
}

/// Proportional-allocation utility on raw slices.
pub fn proportional_utility_of(i: usize, actions: &[f64], types: &[f64], reward: f64, cost_bound: f64) -> f64 {
    let x = actions[i];
    proportional_reward(x, others_total(actions, i), reward) - cost(x, types[i], cost_bound)
}

/// Top-K utility on raw slices.
pub fn topk_utility_of(i: usize, actions: &[f64], types: &[f64], k: usize, reward: f64, cost_bound: f64) -> f64 {
    topk_reward(i, actions, k, reward) - cost(actions[i], types[i], cost_bound)
}

/// `u_i = R x_i / sum(x) - c x_i / q_i` under the game's types.
pub fn utility_proportional(i: usize, profile: &ActionProfile, cfg: &GameConfig) -> f64 {
    proportional_utility_of(i, &profile.0, cfg.types(), cfg.reward(), cfg.cost_bound())
}

/// `u_i = R/K * [i in top K] - c x_i / q_i` under the game's types.
pub fn utility_topk(i: usize, profile: &ActionProfile, cfg: &GameConfig) -> f64 {
    topk_utility_of(i, &profile.0, cfg.types(), cfg.k(), cfg.reward(), cfg.cost_bound())
}

/// Utility under the configured mechanism's allocation rule.
pub fn utility(i: usize, profile: &ActionProfile, cfg: &GameConfig) -> f64 {
    match cfg.mechanism().allocation() {
        Allocation::TopK => utility_topk(i, profile, cfg),
        Allocation::Proportional => utility_proportional(i, profile, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// `x_i < 0` or `x_i > q_i` (or not finite).
    OutOfBounds,
    /// Binary mechanism with `x_i` not in `{0, q_i}`.
    NotBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub user: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCheck {
    pub valid: bool,
    pub length_mismatch: bool,
    pub violations: Vec<Violation>,
}

/// Checks `0 <= x_i <= q_i` and, for binary mechanisms, `x_i in {0, q_i}`.
/// User indices in the report are zero-based.
pub fn validate_profile(profile: &ActionProfile, cfg: &GameConfig) -> ProfileCheck {
    let types = cfg.types();
    let length_mismatch = profile.len() != types.len();
    let binary = cfg.mechanism().action_space() == ActionSpace::Binary;
    let mut violations = Vec::new();
    for (user, (&x, &q)) in profile.0.iter().zip(types).enumerate() {
        if !(x.is_finite() && x >= 0.0 && x <= q) {
            violations.push(Violation { user, kind: ViolationKind::OutOfBounds });
        } else if binary && x != 0.0 && x != q {
            violations.push(Violation { user, kind: ViolationKind::NotBinary });
        }
    }
    ProfileCheck { valid: !length_mismatch && violations.is_empty(), length_mismatch, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m4(types: Vec<f64>, r: f64, c: f64) -> GameConfig {
        GameConfig::full_information(Mechanism::M4, types, r, c, None).unwrap()
    }

    fn worked_m3() -> GameConfig {
        GameConfig::full_information(Mechanism::M3, vec![0.9247, 0.3421, 0.3095], 4.0, 1.0, None).unwrap()
    }

    #[test]
    fn rejects_zero_and_unsorted_types() {
        assert_eq!(
            GameConfig::full_information(Mechanism::M4, vec![1.0, 0.0], 1.0, 1.0, None),
            Err(Error::InvalidType { index: 1, value: 0.0 })
        );
        assert_eq!(
            GameConfig::full_information(Mechanism::M4, vec![0.5, 0.6], 1.0, 1.0, None),
            Err(Error::UnsortedTypes { index: 1 })
        );
        assert!(GameConfig::full_information(Mechanism::M4, vec![1.2], 1.0, 1.0, None).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GameConfig::full_information(Mechanism::M1, vec![1.0], 1.0, 1.0, None).is_err());
        assert!(GameConfig::full_information(Mechanism::M1, vec![1.0], 1.0, 1.0, Some(0)).is_err());
        assert!(GameConfig::full_information(Mechanism::M4, vec![1.0], 0.0, 1.0, None).is_err());
        assert!(GameConfig::full_information(Mechanism::M4, vec![1.0], 1.0, -1.0, None).is_err());
        assert!(GameConfig::full_information(Mechanism::M5, vec![1.0], 1.0, 1.0, Some(1)).is_err());
        assert!(GameConfig::partial_information(Mechanism::M3, 2, TypeDistribution::Uniform, 1.0, 1.0, None).is_err());
    }

    #[test]
    fn sort_is_stable_descending() {
        let mut t = vec![0.2, 0.9, 0.5, 0.9];
        sort_types(&mut t);
        assert_eq!(t, vec![0.9, 0.9, 0.5, 0.2]);
    }

    #[test]
    fn mechanism_parse_roundtrip() {
        for m in Mechanism::ALL {
            assert_eq!(m.to_string().parse::<Mechanism>().unwrap(), m);
        }
        assert_eq!("m6".parse::<Mechanism>().unwrap(), Mechanism::M6);
        assert!("M8".parse::<Mechanism>().is_err());
    }

    #[test]
    fn proportional_symmetric_pair() {
        let cfg = m4(vec![1.0, 1.0], 2.0, 1.0);
        let p = ActionProfile::new(vec![0.5, 0.5]);
        // Recomputed from the definition: reward 2 * 0.5 / 1.0, cost 1 * 0.5 / 1.
        let reward = 2.0 * 0.5 / (0.5 + 0.5);
        let cost = 1.0 * 0.5 / 1.0;
        assert_eq!(reward, 1.0);
        assert_eq!(utility_proportional(0, &p, &cfg), reward - cost);
        assert_eq!(utility_proportional(0, &p, &cfg), 0.5);
    }

    #[test]
    fn all_zero_profile_pays_nothing() {
        let cfg = worked_m3();
        let p = ActionProfile::zeros(3);
        for i in 0..3 {
            assert_eq!(utility_proportional(i, &p, &cfg), 0.0);
            assert_eq!(topk_utility_of(i, &p.0, cfg.types(), 2, 4.0, 1.0), 0.0);
        }
    }

    #[test]
    fn worked_m3_profile_utilities() {
        let cfg = worked_m3();
        let p = ActionProfile::new(vec![0.9247, 0.3421, 0.0]);
        assert_eq!(utility_proportional(2, &p, &cfg), 0.0);
        let expected = 4.0 * 0.3421 / (0.9247 + 0.3421) - 1.0;
        assert!((utility_proportional(1, &p, &cfg) - expected).abs() < 1e-15);
        assert!((expected - 0.0802).abs() < 1e-4);
        assert!((total_quality(&p) - 1.2668).abs() < 1e-12);
        assert!(validate_profile(&p, &cfg).valid);
    }

    #[test]
    fn topk_rank_example() {
        let cfg = GameConfig::full_information(Mechanism::M1, vec![0.9, 0.8, 0.7], 3.0, 1.0, Some(2)).unwrap();
        let p = ActionProfile::new(vec![0.9, 0.8, 0.0]);
        // Two participants, K = 2: both win 3/2; user 1 pays c * 0.9 / 0.9.
        assert!((utility_topk(0, &p, &cfg) - 0.5).abs() < 1e-15);
        assert_eq!(utility_topk(2, &p, &cfg), 0.0);
    }

    #[test]
    fn topk_tie_split_matches_random_tiebreak_expectation() {
        let types = [1.0, 0.8, 0.6];
        let actions = [0.5, 0.5, 0.0];
        // K = 1, R = 2: a uniformly random winner among the two tied users
        // gives each an expected reward of 2 * 1/2 = 1.
        let expected_reward = 2.0 * 0.5;
        for i in 0..2 {
            let u = topk_utility_of(i, &actions, &types, 1, 2.0, 1.0);
            assert!((u - (expected_reward - 0.5 / types[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn topk_fewer_than_k_participants_get_full_share() {
        let r = topk_rewards(&[0.3, 0.0, 0.0], 2, 4.0);
        assert_eq!(r, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn validate_reports_violations() {
        let cfg = GameConfig::full_information(Mechanism::M4, vec![1.0], 1.0, 1.0, None).unwrap();
        let check = validate_profile(&ActionProfile::new(vec![1.1]), &cfg);
        assert!(!check.valid);
        assert_eq!(check.violations, vec![Violation { user: 0, kind: ViolationKind::OutOfBounds }]);

        let bin = GameConfig::full_information(Mechanism::M3, vec![1.0], 1.0, 1.0, None).unwrap();
        let check = validate_profile(&ActionProfile::new(vec![0.5]), &bin);
        assert_eq!(check.violations, vec![Violation { user: 0, kind: ViolationKind::NotBinary }]);

        let check = validate_profile(&ActionProfile::new(vec![0.5, 0.1]), &cfg);
        assert!(check.length_mismatch && !check.valid);
    }

    fn profile_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((0.01f64..=1.0, 0.0f64..=1.0), 1..8)
            .prop_map(|pairs| pairs.into_iter().map(|(q, s)| (q, q * s)).unzip())
    }

    proptest! {
        #[test]
        fn proportional_budget_balance((types, actions) in profile_strategy(), r in 0.1f64..50.0) {
            let total: f64 = actions.iter().sum();
            let paid: f64 = proportional_rewards(&actions, r).iter().sum();
            if total > 0.0 {
                prop_assert!((paid - r).abs() <= 1e-12 * r);
            } else {
                prop_assert_eq!(paid, 0.0);
            }
            let _ = types;
        }

        #[test]
        fn topk_budget((_types, actions) in profile_strategy(), k in 1usize..5, r in 0.1f64..50.0) {
            let paid: f64 = topk_rewards(&actions, k, r).iter().sum();
            let participants = actions.iter().filter(|&&x| x > 0.0).count();
            prop_assert!(paid <= r * (1.0 + 1e-12));
            if participants >= k {
                prop_assert!((paid - r).abs() <= 1e-12 * r);
            } else {
                prop_assert!(paid < r);
            }
        }

        #[test]
        fn topk_ties_keep_budget(k in 1usize..5, n in 1usize..7, r in 0.1f64..10.0) {
            let actions = vec![0.5; n];
            let paid: f64 = topk_rewards(&actions, k, r).iter().sum();
            let expected = r * n.min(k) as f64 / k as f64;
            prop_assert!((paid - expected).abs() <= 1e-12 * r);
        }

        #[test]
        fn anonymity((types, actions) in profile_strategy(), seed in any::<u64>(), r in 0.1f64..10.0, k in 1usize..4) {
            let n = types.len();
            let mut perm: Vec<usize> = (0..n).collect();
            // deterministic shuffle from the seed
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let pt: Vec<f64> = perm.iter().map(|&j| types[j]).collect();
            let pa: Vec<f64> = perm.iter().map(|&j| actions[j]).collect();
            for (slot, &j) in perm.iter().enumerate() {
                let a = proportional_utility_of(j, &actions, &types, r, 1.0);
                let b = proportional_utility_of(slot, &pa, &pt, r, 1.0);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                let a = topk_utility_of(j, &actions, &types, k, r, 1.0);
                let b = topk_utility_of(slot, &pa, &pt, k, r, 1.0);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn zero_action_zero_utility((types, mut actions) in profile_strategy(), i in 0usize..8, r in 0.1f64..10.0) {
            let i = i % types.len();
            actions[i] = 0.0;
            prop_assert_eq!(proportional_utility_of(i, &actions, &types, r, 1.0), 0.0);
            prop_assert_eq!(topk_utility_of(i, &actions, &types, 2, r, 1.0), 0.0);
        }
    }
}
