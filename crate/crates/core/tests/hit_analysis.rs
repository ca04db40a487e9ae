use proptest::prelude::*;
use stochwave::hit_analysis::{
    exponent_report, gaussian_order, lower_bound_capacity_order, mc_hitting_probability,
    polarity_classify, sandwich_report, scan_paths, upper_bound_order, write_sandwich_csv,
    BoundCase, Polarity, SandwichOptions, SpaceTimeWindow, Variant,
};
use stochwave::noise_field::GridSpec;
use stochwave::potential_theory::TargetSet;
use stochwave::spde_sim::{Coefficients, ModelSpec, Simulator};

fn setup(d: usize) -> (ModelSpec, GridSpec, SpaceTimeWindow) {
    let model = ModelSpec::additive(1, 0.5, d).unwrap();
    let grid = GridSpec::lockstep(1, 2.0, 64, 1.0).unwrap();
    let window = SpaceTimeWindow::new(0.5, 1.0, &[-0.5], &[0.5]).unwrap();
    (model, grid, window)
}

#[test]
fn empty_and_enclosing_targets() {
    let (model, grid, window) = setup(2);
    let sim = Simulator::new(&model, grid).unwrap();
    let f = sim.run(99, &[grid.n_time]).unwrap();
    let var = f.values.iter().map(|v| v * v).sum::<f64>() / f.values.len() as f64;
    let n = 10.0 * var.sqrt();
    let empty = mc_hitting_probability(&model, &window, &TargetSet::empty(2), grid, 200, 5, None).unwrap();
    assert_eq!(empty.p_hat, 0.0);
    let bx = TargetSet::cube(&[-n, -n], &[n, n]);
    let all = mc_hitting_probability(&model, &window, &bx, grid, 200, 5, None).unwrap();
    assert!(all.p_hat >= 0.99);
    assert!(all.ci_low <= all.p_hat && all.p_hat <= all.ci_high);
}

#[test]
fn nested_balls_are_monotone_with_shared_paths() {
    let (model, grid, window) = setup(2);
    let balls: Vec<TargetSet> = [0.05, 0.1, 0.2, 0.4].iter().map(|&r| TargetSet::ball(&[0.3, -0.2], r)).collect();
    let scan = scan_paths(&model, &window, &balls, grid, 400, 11).unwrap();
    let eps = scan.default_eps();
    assert!(eps > 0.0);
    let p: Vec<f64> = (0..balls.len()).map(|i| scan.estimate(i, eps).p_hat).collect();
    assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
    for (i, b) in balls.iter().enumerate() {
        let one = mc_hitting_probability(&model, &window, b, grid, 400, 11, Some(eps)).unwrap();
        assert_eq!(one.p_hat, p[i]);
    }
}

#[test]
fn interval_width_scales_like_inverse_root_n() {
    let (model, grid, window) = setup(1);
    let target = TargetSet::cube(&[0.3], &[50.0]);
    let width = |n: usize| {
        let h = mc_hitting_probability(&model, &window, &target, grid, n, 3, Some(0.0)).unwrap();
        assert!(h.p_hat > 0.1 && h.p_hat < 0.9, "p = {}", h.p_hat);
        h.ci_high - h.ci_low
    };
    let w: Vec<f64> = [400, 1600, 6400].iter().map(|&n| width(n)).collect();
    for pair in w.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((ratio / 2.0 - 1.0).abs() < 0.3, "{w:?}");
    }
}

#[test]
fn input_errors() {
    let (model, grid, window) = setup(2);
    let t = TargetSet::ball(&[0.0], 1.0);
    assert!(mc_hitting_probability(&model, &window, &t, grid, 200, 1, None).is_err());
    let t = TargetSet::ball(&[0.0, 0.0], 1.0);
    assert!(mc_hitting_probability(&model, &window, &t, grid, 50, 1, None).is_err());
    let outside = SpaceTimeWindow::new(0.5, 1.0, &[1.5], &[2.5]).unwrap();
    assert!(mc_hitting_probability(&model, &outside, &t, grid, 200, 1, None).is_err());
}

#[test]
fn nonlinear_model_uses_the_stepper() {
    let coeffs = Coefficients::preset("tanh-bounded", 2).unwrap();
    let model = ModelSpec::new(stochwave::wave_kernel::WaveParams::new(1, 0.5).unwrap(), coeffs).unwrap();
    let (_, grid, window) = setup(2);
    let t = TargetSet::ball(&[0.0, 0.0], 0.2);
    let a = mc_hitting_probability(&model, &window, &t, grid, 100, 4, None).unwrap();
    let b = mc_hitting_probability(&model, &window, &t, grid, 100, 4, None).unwrap();
    assert_eq!(a, b);
    let err = sandwich_report(&model, &window, &[t], grid, 100, 4, &SandwichOptions::default()).unwrap_err();
    assert!(matches!(err, stochwave::Error::Unsupported(_)));
}

#[test]
fn sandwich_rows_and_determinism() {
    // d = 1 < 4/1.5: negative order, capacity exactly one
    let (model, grid, window) = setup(1);
    let targets = vec![TargetSet::cube(&[0.0], &[0.5]), TargetSet::points(vec![vec![0.1]])];
    let opts = SandwichOptions::default();
    let r = sandwich_report(&model, &window, &targets, grid, 200, 8, &opts).unwrap();
    assert!(r.rows.iter().all(|row| row.capacity == 1.0 && row.capacity_order < 0.0));
    assert!(r.rows.iter().all(|row| row.hausdorff == f64::INFINITY));

    // d = 3 > 4/1.5: points are polar and have zero capacity
    let (model, grid, window) = setup(3);
    let z = vec![0.1, 0.0, -0.1];
    let targets = vec![
        TargetSet::ball(&z, 0.3),
        TargetSet::ball(&z, 0.05),
        TargetSet::points(vec![z.clone()]),
    ];
    let r = sandwich_report(&model, &window, &targets, grid, 200, 8, &opts).unwrap();
    assert_eq!(r.rows[2].polarity, Polarity::Polar);
    assert_eq!(r.rows[2].capacity, 0.0);
    assert!(r.rows[0].capacity > 0.0);
    assert!(r.rows.windows(2).all(|w| w[1].p_hat <= w[0].p_hat));
    assert!(r.ordering_consistent);
    let again = sandwich_report(&model, &window, &targets, grid, 200, 8, &opts).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_sandwich_csv(&r, &mut a).unwrap();
    write_sandwich_csv(&again, &mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("target_id,p_hat,ci_low,ci_high,capacity_order,capacity,hausdorff_order,hausdorff,polarity"));
}

#[test]
fn report_echoes_inputs() {
    let r = exponent_report(5, BoundCase::AdditiveC1 { beta: 1.0 }, 1, 1.0, 0.1, 0.01, None).unwrap();
    assert_eq!(r.polarity, Polarity::Polar);
    assert!(!r.within_c1);
    assert!((r.gaussian_order - 1.0).abs() < 1e-12);
    assert_eq!(r.rho, 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn classifier_agrees_with_the_orders(d in 1usize..12, k in 1usize..4, frac in 0.001f64..0.999) {
        let beta = frac * (k as f64).min(2.0);
        let e = 2.0 * (k as f64 + 1.0) / (2.0 - beta);
        let g = gaussian_order(d, k, beta).unwrap();
        prop_assert_eq!(g, d as f64 - e);
        match polarity_classify(d, k, beta).unwrap() {
            Polarity::NonPolar => {
                let df = d as f64;
                prop_assert!(df * (1.0 + 4.0 * df / (2.0 - beta)) - e < 0.0);
                let o = lower_bound_capacity_order(d, k, beta, 1e-9, None, Variant::Spacetime).unwrap();
                prop_assert!(o < 0.0);
            }
            Polarity::Polar => {
                let o = upper_bound_order(d, k, BoundCase::AdditiveC1 { beta }, 1e-9 * (g.min(1.0))).unwrap();
                prop_assert!(o > 0.0);
            }
            Polarity::Open => prop_assert!(g <= 0.0),
        }
    }

    #[test]
    fn upper_order_tends_to_gaussian_order(d in 1usize..8, k in 1usize..4, frac in 0.01f64..0.99) {
        let beta = frac * (k as f64).min(2.0);
        let o = upper_bound_order(d, k, BoundCase::AdditiveC1 { beta }, 1e-10).unwrap();
        prop_assert!((o - gaussian_order(d, k, beta).unwrap()).abs() < 1e-9);
    }
}
