//! Solver output against the brute-force oracles on random instances.

use proptest::prelude::*;
use ugc_equilibrium::fullinfo::{
    eq_interior, perturbed_dynamics, pinned_prefix, solve, solve_m4, DynamicsOptions, SolveOptions, Verdict,
};
use ugc_equilibrium::verify::{enumerate_binary_equilibria, grid_nonexistence_scan, verify_pne};
use ugc_equilibrium::{ActionProfile, GameConfig, Mechanism};

fn sorted_types() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..=1.0, 2..=6).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

fn max_dist(a: &ActionProfile, b: &ActionProfile) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn m4_solution_is_certified_prefix_and_dynamics_limit(types in sorted_types(), ratio in 0.5f64..20.0) {
        let cfg = GameConfig::full_information(Mechanism::M4, types.clone(), ratio, 1.0, None).unwrap();
        let out = solve_m4(&cfg).unwrap();
        let eq = &out.profiles[0];
        let report = verify_pne(eq, &cfg, 1e-9).unwrap();
        prop_assert!(report.is_equilibrium, "gain {}", report.gain);
        prop_assert!(pinned_prefix(eq, &types));
        prop_assert!(eq.0.iter().any(|&x| x > 0.0));
        let dynamics = perturbed_dynamics(&cfg, DynamicsOptions::default()).unwrap();
        prop_assert!(dynamics.converged);
        prop_assert!(max_dist(&dynamics.profile, eq) < 1e-3);
    }

    #[test]
    fn m4_depends_on_reward_to_cost_ratio_only(types in sorted_types(), ratio in 0.5f64..20.0, scale in 0.1f64..10.0) {
        let a = GameConfig::full_information(Mechanism::M4, types.clone(), ratio, 1.0, None).unwrap();
        let b = GameConfig::full_information(Mechanism::M4, types, ratio * scale, scale, None).unwrap();
        let (pa, pb) = (solve_m4(&a).unwrap(), solve_m4(&b).unwrap());
        prop_assert!(max_dist(&pa.profiles[0], &pb.profiles[0]) < 1e-10);
    }

    #[test]
    fn feasible_full_interior_is_the_answer(types in sorted_types(), ratio in 0.5f64..20.0) {
        let cfg = GameConfig::full_information(Mechanism::M4, types.clone(), ratio, 1.0, None).unwrap();
        let y = eq_interior(&cfg, types.len()).unwrap();
        prop_assume!(y.iter().zip(&types).all(|(&x, &q)| x > 0.0 && x < q));
        let all = solve(&cfg, SolveOptions { all: true, ..Default::default() }).unwrap();
        prop_assert!(all.profiles.iter().any(|p| p.0.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-10)));
    }

    #[test]
    fn binary_solvers_agree_with_enumeration(
        raw in prop::collection::vec(0.05f64..=1.0, 1..=10),
        reward in 0.2f64..8.0,
        k in 1usize..4,
        proportional in any::<bool>(),
    ) {
        let mut types = raw;
        types.sort_by(|a, b| b.total_cmp(a));
        let (mech, top_k) = if proportional { (Mechanism::M3, None) } else { (Mechanism::M1, Some(k)) };
        let cfg = GameConfig::full_information(mech, types, reward, 1.0, top_k).unwrap();
        let out = solve(&cfg, SolveOptions::default()).unwrap();
        let oracle = enumerate_binary_equilibria(&cfg).unwrap();
        for (p, &gain) in out.profiles.iter().zip(&out.certificates) {
            prop_assert!(gain <= 0.0);
            prop_assert!(oracle.contains(p));
        }
        match out.verdict {
            Verdict::Unique => prop_assert_eq!(oracle.len(), 1),
            Verdict::Multiple => prop_assert_eq!(oracle.len(), out.profiles.len()),
            Verdict::None => prop_assert!(oracle.is_empty()),
            Verdict::MarginalMultiplicity | Verdict::Exists => {}
        }
    }
}

#[test]
fn perturbed_limit_approaches_solution() {
    let instances = [
        (vec![1.0, 1.0, 0.1], 2.0),
        (vec![0.9, 0.6, 0.5, 0.2], 6.0),
        (vec![1.0, 0.3], 1.5),
        (vec![0.8, 0.8, 0.8, 0.8, 0.8], 12.0),
    ];
    for (types, r) in instances {
        let cfg = GameConfig::full_information(Mechanism::M4, types, r, 1.0, None).unwrap();
        let eq = solve_m4(&cfg).unwrap().profiles.remove(0);
        let dists: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&epsilon| {
                let res = perturbed_dynamics(&cfg, DynamicsOptions { epsilon, ..Default::default() }).unwrap();
                assert!(res.converged);
                max_dist(&res.profile, &eq)
            })
            .collect();
        // Where the floor never binds all three runs hit the same point, so
        // allow rounding-level ties.
        assert!(dists[0] + 1e-12 >= dists[1] && dists[1] + 1e-12 >= dists[2], "{dists:?}");
        assert!(dists[2] < 1e-3);
    }
}

#[test]
fn zero_profile_is_never_an_m4_answer() {
    let cfg = GameConfig::full_information(Mechanism::M4, vec![0.7, 0.4, 0.2], 3.0, 1.0, None).unwrap();
    let all = solve(&cfg, SolveOptions { all: true, ..Default::default() }).unwrap();
    assert!(all.profiles.iter().all(|p| p.0.iter().any(|&x| x > 0.0)));
    assert!(!verify_pne(&ActionProfile::zeros(3), &cfg, 1e-9).unwrap().is_equilibrium);
}

#[test]
fn m2_none_is_backed_by_grid_scan() {
    for (types, r, k) in [(vec![1.0, 0.7, 0.2], 2.0, 1), (vec![0.9, 0.9, 0.5], 5.0, 2), (vec![1.0, 0.5], 3.0, 1)] {
        let cfg = GameConfig::full_information(Mechanism::M2, types, r, 1.0, Some(k)).unwrap();
        assert_eq!(solve(&cfg, SolveOptions::default()).unwrap().verdict, Verdict::None);
        assert!(grid_nonexistence_scan(&cfg, 0.05).unwrap().all_deviate);
    }
}

#[test]
fn m2_scan_with_no_more_users_than_slots_is_degenerate() {
    let cfg = GameConfig::full_information(Mechanism::M2, vec![1.0, 0.5], 1.0, 1.0, Some(2)).unwrap();
    let scan = grid_nonexistence_scan(&cfg, 0.05).unwrap();
    assert!(!scan.all_deviate);
    assert!(scan.note.is_some());
}

#[test]
fn m4_scan_finds_the_interior_equilibrium() {
    let cfg = GameConfig::full_information(Mechanism::M4, vec![1.0, 1.0], 2.0, 1.0, None).unwrap();
    let scan = grid_nonexistence_scan(&cfg, 0.05).unwrap();
    assert!(!scan.all_deviate);
    assert!(scan.stable_points.iter().any(|p| max_dist(p, &ActionProfile::new(vec![0.5, 0.5])) < 1e-9));
}
