//! Floating simplex against two independent oracles: the exact-rational
//! backend, and brute-force vertex enumeration for two-variable programs.

use nlgame_lp::{solve, solve_exact, BigRational, Comparator, LinearProgram, LpScalar, LpStatus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lp(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.set_objective(j, rng.gen_range(-4..=4) as f64);
        // Box bounds keep every program bounded.
        lp.set_upper(j, rng.gen_range(1..=5) as f64);
    }
    for _ in 0..rows {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                terms.push((j, rng.gen_range(-3..=3) as f64));
            }
        }
        let cmp = match rng.gen_range(0..6) {
            0 => Comparator::Eq,
            1 | 2 => Comparator::Ge,
            _ => Comparator::Le,
        };
        lp.add_constraint(terms, cmp, rng.gen_range(-3..=6) as f64);
    }
    lp
}

/// Maximum over all feasible intersections of two active constraints
/// (rows or bounds). `None` means infeasible.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    assert_eq!(lp.num_vars(), 2);
    let mut lines: Vec<([f64; 2], f64)> = Vec::new();
    for (i, c) in lp.constraints().iter().enumerate() {
        let row = lp.dense_row(i);
        lines.push(([row[0], row[1]], c.rhs));
    }
    lines.push(([1.0, 0.0], 0.0));
    lines.push(([0.0, 1.0], 0.0));
    for (j, ub) in lp.upper_bounds().iter().enumerate() {
        let ub = ub.expect("oracle needs bounded variables");
        let mut a = [0.0; 2];
        a[j] = 1.0;
        lines.push((a, ub));
    }
    let feasible = |x: [f64; 2]| lp.max_residual(&x) <= 1e-9;
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for k in i + 1..lines.len() {
            let ([a, b], e) = lines[i];
            let ([c, d], f) = lines[k];
            let det = a * d - b * c;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(e * d - b * f) / det, (a * f - e * c) / det];
            if feasible(x) {
                let val = lp.objective()[0] * x[0] + lp.objective()[1] * x[1];
                best = Some(best.map_or(val, |b: f64| b.max(val)));
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn two_variable_programs_match_vertex_enumeration(seed in any::<u64>(), rows in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 2, rows);
        let sol = solve(&lp).unwrap();
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-9,
                    "simplex {} vs vertices {}", sol.objective, best);
            }
        }
    }

    #[test]
    fn floating_agrees_with_exact(seed in any::<u64>(), n in 2usize..7, rows in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, n, rows);
        let float = solve(&lp).unwrap();
        let exact = solve_exact(&lp.to_exact().unwrap()).unwrap();
        prop_assert_eq!(float.status, exact.status);
        if exact.status == LpStatus::Optimal {
            let e = LpScalar::to_f64(&exact.objective);
            prop_assert!(float.objective <= e + 1e-8);
            prop_assert!((float.objective - e).abs() <= 1e-9);
            prop_assert!(float.max_residual <= 1e-8);
            prop_assert_eq!(exact.max_residual, 0.0);
        }
    }

    #[test]
    fn identical_input_gives_identical_output(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 5, 6);
        let a = solve(&lp).unwrap();
        let b = solve(&lp.clone()).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn exact_objective_is_a_rational() {
    let mut lp = LinearProgram::new(2);
    lp.set_objective(0, 1.0);
    lp.set_objective(1, 1.0);
    lp.add_constraint(vec![(0, 3.0), (1, 1.0)], Comparator::Le, 1.0);
    lp.add_constraint(vec![(0, 1.0), (1, 3.0)], Comparator::Le, 1.0);
    let exact = solve_exact(&lp.to_exact().unwrap()).unwrap();
    let half: BigRational = "1/2".parse().unwrap();
    assert_eq!(exact.objective, half);
}
