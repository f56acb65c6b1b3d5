mod common;

use common::instances::{fixed_instance, half_width_for_budget, variable_instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeflow_core::flowspace::{recover_flows, InjectionVector};
use treeflow_core::opf::{solve_opf, Mode, Objective, OpfOptions, Verdict};
use treeflow_core::oracle::{oracle_optimum, GridSpec};

fn opts() -> OpfOptions {
    OpfOptions::default()
}

#[test]
fn fixed_voltage_relaxation_matches_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let step = 2e-3;
    for trial in 0..8 {
        let n = 2 + trial % 3;
        let half = half_width_for_budget(n - 1, step, 2e5, 0.3);
        let inst = fixed_instance(&mut rng, n, half);
        let obj = if trial % 2 == 0 {
            Objective::Loss
        } else {
            Objective::Linear((0..n).map(|i| 1.0 + 0.25 * i as f64).collect())
        };
        let sol = solve_opf(&inst.net, &obj, Mode::Fixed, &opts()).unwrap();
        assert_eq!(sol.verdict, Verdict::TightOptimal, "trial {trial}");
        let relaxed = sol.objective.unwrap();
        let o = oracle_optimum(&inst.net, &obj, &GridSpec::angles(step)).unwrap();
        assert!(o.upper.is_some(), "trial {trial}: no exactly feasible grid point");
        assert!(
            (relaxed - o.value).abs() <= o.gap_bound,
            "trial {trial}: relaxed {relaxed} oracle {} bound {}",
            o.value,
            o.gap_bound
        );
        // The relaxation never exceeds an exactly feasible point.
        assert!(relaxed <= o.upper.unwrap() + 1e-7, "trial {trial}");
    }
}

#[test]
fn refining_the_grid_tightens_the_bracket() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = fixed_instance(&mut rng, 3, 0.1);
    let sol = solve_opf(&inst.net, &Objective::Loss, Mode::Fixed, &opts()).unwrap();
    let relaxed = sol.objective.unwrap();
    let mut last_eps = f64::INFINITY;
    for step in [8e-3, 4e-3, 2e-3, 1e-3] {
        let o = oracle_optimum(&inst.net, &Objective::Loss, &GridSpec::angles(step)).unwrap();
        assert!(o.epsilon < last_eps, "step {step}: {} !< {last_eps}", o.epsilon);
        assert!((relaxed - o.value).abs() <= o.gap_bound, "step {step}");
        last_eps = o.epsilon;
    }
}

#[test]
fn variable_voltage_relaxation_lower_bounds_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let grid = GridSpec {
        theta_step: 4e-3,
        vm_step: Some(0.02),
    };
    for trial in 0..4 {
        let inst = variable_instance(&mut rng, 3, 0.04);
        let sol = solve_opf(&inst.net, &Objective::Loss, Mode::Variable, &opts()).unwrap();
        assert_eq!(sol.verdict, Verdict::TightOptimal, "trial {trial}");
        let relaxed = sol.objective.unwrap();
        let o = oracle_optimum(&inst.net, &Objective::Loss, &grid).unwrap();
        if let Some(u) = o.upper {
            assert!(relaxed <= u + 1e-7, "trial {trial}: {relaxed} > {u}");
        }
        assert!(relaxed >= o.value - o.epsilon - 1e-7, "trial {trial}");
    }
}

#[test]
fn generating_point_is_recovered_from_its_injections() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let inst = fixed_instance(&mut rng, 6, 0.3);
        let rec = recover_flows(&inst.net, &InjectionVector(inst.injections.clone())).unwrap();
        for (a, b) in rec.line_thetas.iter().zip(&inst.thetas) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
