use proptest::prelude::*;

use switchopt::model::{eval_relaxed_field, paper_example, SimplexPoint};
use switchopt::project::project_rk;
use switchopt::signal::{convex_combine, l2_norm, Grid, RelaxedSignal};
use switchopt::sim::simulate;
use switchopt::topology::{topo_distance, TopologyKind};
use switchopt::verify::duty_cycle_error;

const Q1_BREAKS: [f64; 5] = [-1.0, 0.0, 0.5, 1.0, 2.0];
const Q2_BREAKS: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

fn away_from(breaks: &'static [f64]) -> impl Strategy<Value = f64> {
    (-1.5f64..4.5).prop_filter("too close to a breakpoint", move |v| {
        breaks.iter().all(|b| (v - b).abs() > 1e-3)
    })
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

fn signal(n: usize) -> impl Strategy<Value = RelaxedSignal> {
    weights(n).prop_map(move |w| {
        let d = w.iter().flat_map(|&a| [a, 1.0 - a]).collect();
        RelaxedSignal::from_weights(Grid::uniform(2.0, n).unwrap(), 2, d).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_matches_finite_differences(x1 in away_from(&Q2_BREAKS), x2 in away_from(&Q1_BREAKS)) {
        let p = paper_example();
        let x = [x1, x2];
        let h = 1e-4;
        for mode in 0..2 {
            let mut jac = [0.0; 4];
            p.eval_mode_jacobian(mode, 0.0, &x, &[], &mut jac);
            for col in 0..2 {
                // Samples stay 1e-3 clear of every kink, so a central
                // difference never straddles one.
                let (mut xp, mut xm) = (x, x);
                xp[col] += h;
                xm[col] -= h;
                let (mut fp, mut fm) = ([0.0; 2], [0.0; 2]);
                p.eval_mode(mode, 0.0, &xp, &[], &mut fp);
                p.eval_mode(mode, 0.0, &xm, &[], &mut fm);
                for row in 0..2 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    prop_assert!((fd - jac[row * 2 + col]).abs() <= 1e-5 * fd.abs().max(1.0),
                        "mode {mode} d{row}/dx{col}: fd {fd}, jac {}", jac[row * 2 + col]);
                }
            }
        }
    }

    #[test]
    fn relaxed_field_is_affine_in_weights(x1 in -1.0f64..5.0, x2 in -1.5f64..3.0, a in 0.0f64..=1.0) {
        let p = paper_example();
        let x = [x1, x2];
        let f = eval_relaxed_field(&p, 0.0, &x, &[], &SimplexPoint::new(vec![a, 1.0 - a]).unwrap()).unwrap();
        let f1 = eval_relaxed_field(&p, 0.0, &x, &[], &SimplexPoint::vertex(2, 0)).unwrap();
        let f2 = eval_relaxed_field(&p, 0.0, &x, &[], &SimplexPoint::vertex(2, 1)).unwrap();
        for i in 0..2 {
            let mix = a * f1[i] + (1.0 - a) * f2[i];
            prop_assert!((f[i] - mix).abs() <= 1e-12 * mix.abs().max(1.0));
        }
    }

    #[test]
    fn l2_norm_is_a_norm(a in signal(16), b in signal(16), c in -3.0f64..3.0) {
        // Signals are not closed under subtraction, so compare on the raw rows.
        let diff = |x: &RelaxedSignal, y: &RelaxedSignal| -> f64 {
            let g = x.grid();
            (0..x.n_cells())
                .map(|i| g.width(i) * x.d_row(i).iter().zip(y.d_row(i)).map(|(p, q)| (p - q).powi(2)).sum::<f64>())
                .sum::<f64>()
                .sqrt()
        };
        let zero = RelaxedSignal::from_weights(a.grid().clone(), 2, vec![0.0; 32]);
        prop_assert!(zero.is_err());
        let o = RelaxedSignal::constant(a.grid().clone(), &[0.5, 0.5]).unwrap();
        prop_assert!(diff(&a, &b) <= diff(&a, &o) + diff(&o, &b) + 1e-12);
        // Homogeneity along a segment: |a - (a + c'(b - a))| = |c'| |a - b|.
        let lam = c.abs() / 3.0;
        let m = convex_combine(&a, &b, lam).unwrap();
        prop_assert!((diff(&a, &m) - lam * diff(&a, &b)).abs() <= 1e-12);
        prop_assert!(l2_norm(&a) >= 0.0);
    }

    #[test]
    fn convex_combination_stays_in_the_simplex(a in signal(12), b in signal(12), lam in 0.0f64..=1.0) {
        let m = convex_combine(&a, &b, lam).unwrap();
        for c in 0..m.n_cells() {
            let row = m.d_row(c);
            prop_assert!(row.iter().all(|&v| v >= -1e-12));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_preserves_duty_cycles(s in signal(20), k in 1u32..10) {
        prop_assert!(duty_cycle_error(&s, k).unwrap() <= 1e-12);
        let p = project_rk(&s, k).unwrap();
        prop_assert!(switchopt::signal::is_pure(p.as_relaxed(), 1e-9));
    }

    #[test]
    fn projection_is_idempotent(s in signal(8), k in 1u32..8) {
        let once = project_rk(&s, k).unwrap();
        let twice = project_rk(once.as_relaxed(), k).unwrap();
        prop_assert!(duty_cycle_error(once.as_relaxed(), k).unwrap() <= 1e-12);
        let cells = 1usize << k;
        for i in 0..cells {
            let a = i as f64 * 2.0 / cells as f64;
            let b = (i + 1) as f64 * 2.0 / cells as f64;
            let x = once.as_relaxed().mode_integrals(a, b);
            let y = twice.as_relaxed().mode_integrals(a, b);
            prop_assert!((x[0] - y[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn topology_distances_are_pseudometrics(a in signal(8), b in signal(8), c in signal(8)) {
        let p = paper_example();
        let run = |s: &RelaxedSignal| simulate(&p, s, &[0.0, 0.0], 4).unwrap();
        let (ta, tb, tc) = (run(&a), run(&b), run(&c));
        for kind in [TopologyKind::TerminalState, TopologyKind::FullTrajectory] {
            let ab = topo_distance(kind, &ta, &tb).unwrap();
            let ba = topo_distance(kind, &tb, &ta).unwrap();
            let ac = topo_distance(kind, &ta, &tc).unwrap();
            let cb = topo_distance(kind, &tc, &tb).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
            prop_assert!(ab <= ac + cb + 1e-10);
        }
    }
}
