mod common;

use common::golden::{enumerate_lp, suite};
use treeflow_core::conic::{
    cone_violation, parse_program, solution_residuals, solve, write_program, SolverOptions, Status,
};

#[test]
fn golden_problems_reach_known_solutions() {
    let opts = SolverOptions::default();
    for g in suite() {
        let s = solve(&g.program, &opts).unwrap();
        assert_eq!(s.status, g.status, "{}", g.name);
        if g.status != Status::Optimal {
            continue;
        }
        assert!(
            (s.objective - g.objective).abs() <= 1e-7 * (1.0 + g.objective.abs()),
            "{}: {} vs {}",
            g.name,
            s.objective,
            g.objective
        );
        let r = solution_residuals(&g.program, &s).unwrap();
        assert!(r.primal <= 1e-8 && r.dual <= 1e-8 && r.gap <= 1e-8, "{}: {r:?}", g.name);
        assert!(cone_violation(&g.program, &s.x, false) <= 1e-8, "{}", g.name);
        assert!(cone_violation(&g.program, &s.z, true) <= 1e-8, "{}", g.name);
        if let Some(x) = &g.x {
            for (a, b) in s.x.iter().zip(x) {
                assert!((a - b).abs() <= 1e-6, "{}: x = {:?}", g.name, s.x);
            }
        }
    }
}

#[test]
fn weak_duality_at_every_iterate() {
    for g in suite() {
        let s = solve(&g.program, &SolverOptions::default()).unwrap();
        for it in &s.iterations {
            let scale = 1.0 + it.pobj.abs() + it.dobj.abs();
            assert!(
                it.corrected_gap >= -1e-9 * scale,
                "{} iter {}: {}",
                g.name,
                it.iter,
                it.corrected_gap
            );
        }
    }
}

#[test]
fn infeasibility_certificates_check_out() {
    for g in suite().into_iter().filter(|g| g.status != Status::Optimal) {
        let s = solve(&g.program, &SolverOptions::default()).unwrap();
        let cert = s.certificate.expect("certificate");
        let p = &g.program;
        match g.status {
            // bᵀy = 1 with −Aᵀy in the dual cone.
            Status::PrimalInfeasible => {
                let by: f64 = p.b.iter().zip(&cert).map(|(a, b)| a * b).sum();
                assert!((by - 1.0).abs() < 1e-9);
                let neg: Vec<f64> = p.at_mul(&cert).iter().map(|v| -v).collect();
                assert!(cone_violation(p, &neg, true) <= 1e-7);
            }
            // cᵀx = −1 with Ax = 0 and x in the cone.
            Status::DualInfeasible => {
                let cx: f64 = p.c.iter().zip(&cert).map(|(a, b)| a * b).sum();
                assert!((cx + 1.0).abs() < 1e-9);
                assert!(p.a_mul(&cert).iter().all(|v| v.abs() < 1e-7));
            }
            _ => unreachable!(),
        }
    }
}

#[test]
fn programs_survive_a_text_round_trip() {
    for g in suite() {
        let back = parse_program(&write_program(&g.program)).unwrap();
        assert_eq!(back, g.program, "{}", g.name);
    }
}

#[test]
fn enumeration_finds_the_cheapest_vertex() {
    // min x1 with x1 + x2 = 1 and x1 − x3 + x4 = 0.5 is solved by (0, 1, 0, 0.5).
    let (f, x) = enumerate_lp(
        [[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, -1.0, 1.0]],
        [1.0, 0.5],
        [1.0, 0.0, 0.0, 0.0],
    );
    assert_eq!(f, 0.0);
    assert_eq!(x, vec![0.0, 1.0, 0.0, 0.5]);
}
