use std::cell::RefCell;

use proptest::prelude::*;

use rosfit::dfo::{Algorithm, OptOptions, Termination};

fn shifted_quartic(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .enumerate()
        .map(|(i, (v, ci))| (1.0 + i as f64) * (v - ci).powi(2) + 0.1 * (v - ci).powi(4))
        .sum()
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn budget_trace_and_counts(
        alg in prop::sample::select(Algorithm::ALL.to_vec()),
        (x0, c) in (2usize..5).prop_flat_map(|n| (point(n), point(n))),
        budget in 5usize..120,
    ) {
        let calls = RefCell::new(0usize);
        let f = |x: &[f64]| {
            *calls.borrow_mut() += 1;
            shifted_quartic(x, &c)
        };
        let opts = OptOptions::default().with_max_evals(budget).with_bounds(vec![(-3.0, 3.0); x0.len()]);
        let r = alg.minimize(f, &x0, &opts).unwrap();
        prop_assert!(r.neval <= budget);
        prop_assert_eq!(r.neval, *calls.borrow());
        prop_assert!(r.trace.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].0 > w[0].0));
        prop_assert_eq!(r.trace.last().unwrap().1, r.f_best);
        prop_assert_eq!(shifted_quartic(&r.x_best, &c), r.f_best);
        prop_assert!(r.f_best <= shifted_quartic(&x0, &c));
        if r.termination == Termination::MaxEvals {
            prop_assert_eq!(r.neval, budget);
        }
    }

    #[test]
    fn bounded_runs_stay_in_the_box(
        alg in prop::sample::select(vec![Algorithm::Bobyqa, Algorithm::NelderMead, Algorithm::PatternSearch]),
        (x0, c) in (2usize..5).prop_flat_map(|n| (prop::collection::vec(0.0..1.0f64, n), point(n))),
    ) {
        let seen = RefCell::new(Vec::new());
        let f = |x: &[f64]| {
            seen.borrow_mut().push(x.to_vec());
            shifted_quartic(x, &c)
        };
        let opts = OptOptions::default().with_max_evals(150).with_bounds(vec![(0.0, 1.0); x0.len()]);
        alg.minimize(f, &x0, &opts).unwrap();
        for p in seen.borrow().iter() {
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{p:?}");
        }
    }

    #[test]
    fn direct_search_is_translation_equivariant(
        alg in prop::sample::select(vec![Algorithm::NelderMead, Algorithm::PatternSearch]),
        shift in -1i32..1,
        (x0, c) in (2usize..4).prop_flat_map(|n| (prop::collection::vec(0.0..1.0f64, n), point(n))),
    ) {
        // the simplex edge depends on max(|x0_i|, 1), so keep |x0_i| <= 1 on both sides
        let s = f64::from(shift);
        let opts = OptOptions::default().with_max_evals(80);
        let a = alg.minimize(|x: &[f64]| shifted_quartic(x, &c), &x0, &opts).unwrap();
        let cs: Vec<f64> = c.iter().map(|v| v + s).collect();
        let xs: Vec<f64> = x0.iter().map(|v| v + s).collect();
        let b = alg.minimize(|x: &[f64]| shifted_quartic(x, &cs), &xs, &opts).unwrap();
        prop_assert_eq!(a.neval, b.neval);
        for (u, v) in a.x_best.iter().zip(&b.x_best) {
            prop_assert!((u + s - v).abs() < 1e-9 * (1.0 + v.abs()), "{:?} vs {:?}", a.x_best, b.x_best);
        }
    }
}

#[test]
fn unconstrained_mode_ignores_bounds_for_interior_minima() {
    let c = [0.3, -0.7, 1.1];
    let f = |x: &[f64]| shifted_quartic(x, &c);
    let opts = OptOptions::default().with_max_evals(400).with_bounds(vec![(-5.0, 5.0); 3]);
    let r = Algorithm::Newuoa.minimize(f, &[0.0; 3], &opts).unwrap();
    assert!(r.f_best < 1e-8, "{}", r.f_best);
}

#[test]
fn nan_objective_values_do_not_win() {
    let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 0.5).powi(2) + x[1] * x[1] };
    for alg in Algorithm::ALL {
        let opts = OptOptions::default().with_max_evals(100).with_bounds(vec![(-1.0, 1.0); 2]);
        let r = alg.minimize(f, &[0.0, 0.2], &opts).unwrap();
        assert!(r.f_best.is_finite(), "{}", alg.name());
        assert!(r.x_best[0] <= 0.5, "{}", alg.name());
    }
}

#[test]
fn time_limit_stops_the_run() {
    let f = |x: &[f64]| {
        std::thread::sleep(std::time::Duration::from_millis(5));
        x.iter().map(|v| v * v).sum::<f64>()
    };
    let mut opts = OptOptions::default().with_max_evals(100_000);
    opts.max_time = Some(0.05);
    let r = Algorithm::NelderMead.minimize(f, &[1.0, 1.0], &opts).unwrap();
    assert_eq!(r.termination, Termination::MaxTime);
    assert!(r.neval < 100);
}

#[test]
fn bad_inputs_are_rejected() {
    let f = |x: &[f64]| x[0];
    assert!(Algorithm::NelderMead.minimize(f, &[], &OptOptions::default()).is_err());
    let opts = OptOptions::default().with_bounds(vec![(0.0, 1.0)]);
    assert!(Algorithm::Bobyqa.minimize(f, &[0.0, 0.0], &opts).is_err());
}

#[test]
fn start_outside_the_box_is_clipped() {
    let opts = OptOptions::default().with_max_evals(1).with_bounds(vec![(0.0, 1.0)]);
    for alg in [Algorithm::Bobyqa, Algorithm::NelderMead, Algorithm::PatternSearch] {
        let r = alg.minimize(|x: &[f64]| x[0], &[2.0], &opts).unwrap();
        assert_eq!(r.x_best, vec![1.0], "{}", alg.name());
    }
}
