use proptest::prelude::*;
use stochwave::noise_field::{sample_noise, GridSpec};
use stochwave::rng::path_seed;
use stochwave::spde_sim::*;
use stochwave::stats::{mean_stderr, variance_stderr};
use stochwave::wave_kernel::WaveParams;

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn mixing_model(d: usize) -> ModelSpec {
    let sigma: Vec<f64> = (0..d * d)
        .map(|f| if f / d == f % d { 1.0 + 0.25 * f as f64 } else { 0.3 })
        .collect();
    ModelSpec::new(
        WaveParams::new(1, 0.5).unwrap(),
        Coefficients::constant(d, &sigma).unwrap(),
    )
    .unwrap()
}

#[test]
fn initial_slice_vanishes() {
    let g = GridSpec::lockstep(2, 2.0, 16, 1.0).unwrap();
    let f = simulate_additive(&ModelSpec::additive(2, 0.8, 2).unwrap(), g, 4).unwrap();
    let np = g.points();
    assert!(f.values[..np * 2].iter().all(|&v| v == 0.0));
    assert!(f.values[np * 2..].iter().any(|&v| v != 0.0));
}

#[test]
fn stepper_with_constant_sigma_matches_synthesis() {
    let g = GridSpec::lockstep(1, 2.0, 64, 2.0).unwrap();
    let m = mixing_model(2);
    let noise = sample_noise(g, 2, 0.5, 31).unwrap();
    let times: Vec<usize> = (0..=g.n_time).collect();
    let a = Synthesizer::new(&m, g).unwrap().run_with_noise(&noise, &times).unwrap();
    let b = Stepper::new(&m, g).unwrap().run_with_noise(&noise, &times).unwrap();
    assert!(max_rel_diff(&a.values, &b.values) < 1e-10);
    // the spectral path of the same seed is the same field
    let c = simulate_additive(&m, g, 31).unwrap();
    assert!(max_rel_diff(&a.values, &c.values) < 1e-10);
    let e = simulate_nonlinear_k1(&m, g, 31).unwrap();
    assert!(max_rel_diff(&a.values, &e.values) < 1e-10);
}

#[test]
fn zero_noise_gives_zero_field() {
    let g = GridSpec::lockstep(1, 2.0, 32, 1.0).unwrap();
    let m = ModelSpec::new(
        WaveParams::new(1, 0.5).unwrap(),
        Coefficients::preset("diag-trig", 2).unwrap(),
    )
    .unwrap();
    let mut noise = sample_noise(g, 2, 0.5, 1).unwrap();
    noise.zero_from(0);
    let times: Vec<usize> = (0..=g.n_time).collect();
    let f = Stepper::new(&m, g).unwrap().run_with_noise(&noise, &times).unwrap();
    assert!(f.values.iter().all(|&v| v == 0.0));
}

#[test]
fn configuration_errors() {
    let g = GridSpec::lockstep(1, 2.0, 32, 1.0).unwrap();
    let drift = ModelSpec::new(
        WaveParams::new(1, 0.5).unwrap(),
        Coefficients::identity(1).with_drift(vec![Expr::parse("-x1").unwrap()]).unwrap(),
    )
    .unwrap();
    assert!(matches!(
        simulate_additive(&drift, g, 0),
        Err(stochwave::Error::Unsupported(_))
    ));
    let mut enabled = drift.clone();
    enabled.drift_stepping = true;
    assert!(simulate_additive(&enabled, g, 0).is_ok());
    let nonlinear = ModelSpec::new(
        WaveParams::new(1, 0.5).unwrap(),
        Coefficients::preset("diag-trig", 1).unwrap(),
    )
    .unwrap();
    assert!(simulate_additive(&nonlinear, g, 0).is_err());
    let coarse = GridSpec::new(1, 2.0, 32, 0.2, 5).unwrap();
    assert!(matches!(
        simulate_nonlinear_k1(&nonlinear, coarse, 0),
        Err(stochwave::Error::Config(_))
    ));
    let k2 = ModelSpec::new(WaveParams::new(2, 0.5).unwrap(), Coefficients::preset("diag-trig", 1).unwrap()).unwrap();
    assert!(simulate_nonlinear_k1(&k2, GridSpec::lockstep(2, 2.0, 16, 1.0).unwrap(), 0).is_err());
}

#[test]
fn drift_with_constant_sigma_agrees_between_schemes() {
    let g = GridSpec::lockstep(1, 2.0, 64, 1.0).unwrap();
    let mut m = ModelSpec::new(
        WaveParams::new(1, 0.5).unwrap(),
        Coefficients::identity(1).with_drift(vec![Expr::parse("1 - x1").unwrap()]).unwrap(),
    )
    .unwrap();
    m.drift_stepping = true;
    let a = simulate_additive(&m, g, 5).unwrap();
    let b = simulate_nonlinear_k1(&m, g, 5).unwrap();
    assert!(max_rel_diff(&a.values, &b.values) < 1e-10);
}

#[test]
fn exact_variance_converges_to_isometry() {
    let target = 1.885618083164127 / 2.5;
    let m = ModelSpec::additive(1, 0.5, 1).unwrap();
    let mut last = f64::INFINITY;
    for n in [64, 128, 256, 512] {
        let g = GridSpec::lockstep(1, 2.0, n, 1.0).unwrap();
        let err = (marginal_variance(&m, g, g.n_time).unwrap()[0] - target).abs();
        assert!(err <= 0.5 * last, "n={n}: {err} vs {last}");
        last = err;
    }
    assert!(last / target < 2e-5);
}

#[test]
fn sampled_variance_is_stationary_and_matches_exact() {
    let g = GridSpec::lockstep(1, 2.0, 64, 1.0).unwrap();
    let m = mixing_model(2);
    let s = Synthesizer::new(&m, g).unwrap();
    let exact = s.marginal_variance(g.n_time).unwrap();
    let paths = 4000u64;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in 0..paths {
        let f = s.run(path_seed(3, p), &[g.n_time]).unwrap();
        a.push(f.get(g.n_time, &[32]).unwrap()[1]);
        b.push(f.get(g.n_time, &[20]).unwrap()[1]);
    }
    let (va, sa) = variance_stderr(&a);
    let (vb, sb) = variance_stderr(&b);
    assert!((va - exact[1]).abs() < 3.0 * sa, "{va} vs {}", exact[1]);
    assert!((va - vb).abs() < 3.0 * (sa * sa + sb * sb).sqrt());
    let (mean, se) = mean_stderr(&a);
    assert!(mean.abs() < 4.0 * se);
}

#[test]
fn bounded_sigma_fourth_moment_is_stable_under_refinement() {
    let m = ModelSpec::new(
        WaveParams::new(1, 0.5).unwrap(),
        Coefficients::preset("tanh-bounded", 1).unwrap(),
    )
    .unwrap();
    let mut sups = Vec::new();
    for n in [64usize, 128] {
        let g = GridSpec::lockstep(1, 2.0, n, 1.0).unwrap();
        let st = Stepper::new(&m, g).unwrap();
        let mut acc = vec![0.0; n];
        let paths = 1000;
        for p in 0..paths {
            let f = st.run(path_seed(11, p), &[g.n_time]).unwrap();
            for (a, v) in acc.iter_mut().zip(&f.values) {
                *a += v.powi(4) / paths as f64;
            }
        }
        let lo = n / 4;
        let sup = acc[lo..n - lo].iter().cloned().fold(0.0, f64::max);
        assert!(sup.is_finite() && sup > 0.0);
        sups.push(sup);
    }
    assert!((sups[1] / sups[0] - 1.0).abs() < 0.1, "{sups:?}");
}

#[test]
fn moment_table_properties() {
    let g = GridSpec::lockstep(1, 2.0, 128, 1.0).unwrap();
    let m = ModelSpec::additive(1, 0.5, 1).unwrap();
    let s = Synthesizer::new(&m, g).unwrap();
    let nt = g.n_time;
    let pairs: Vec<(SpaceTimePoint, SpaceTimePoint)> = [0usize, 1, 2, 4, 8]
        .iter()
        .map(|&h| (SpaceTimePoint::new(nt, &[64]), SpaceTimePoint::new(nt, &[64 + h])))
        .collect();
    let ensemble: Vec<SolutionField> = (0..400)
        .map(|p| s.run(path_seed(8, p), &[nt]).unwrap())
        .collect();
    let m2 = increment_moments(&ensemble, 2, &pairs).unwrap();
    let m4 = increment_moments(&ensemble, 4, &pairs).unwrap();
    assert_eq!(m2[0].estimate, 0.0);
    assert_eq!(m4[0].estimate, 0.0);
    for (a, b) in m2.iter().zip(&m4) {
        assert!(b.estimate >= a.estimate * a.estimate);
    }
    let fit = fit_holder_exponent(&m2, 2).unwrap();
    assert_eq!(fit.excluded, vec![0]);
    assert!((0.6..0.9).contains(&fit.delta), "{fit:?}");
    let bad = [(SpaceTimePoint::new(nt + 1, &[0]), SpaceTimePoint::new(0, &[0]))];
    assert!(matches!(
        increment_moments(&ensemble, 2, &bad),
        Err(stochwave::Error::Index(_))
    ));
    assert!(increment_moments(&ensemble, 3, &pairs).is_err());
}

#[test]
fn fields_and_ensembles_roundtrip() {
    let g = GridSpec::lockstep(2, 1.0, 16, 0.5).unwrap();
    let m = ModelSpec::additive(2, 0.8, 2).unwrap();
    let fields: Vec<SolutionField> = (0..3).map(|p| simulate_additive(&m, g, path_seed(1, p)).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_ensemble(dir.path(), 1, &fields).unwrap();
    assert_eq!(manifest.model_hash, m.hash());
    let (back_manifest, back) = read_ensemble(dir.path()).unwrap();
    assert_eq!(back_manifest, manifest);
    assert_eq!(back, fields);
    assert!(fields[0].get(0, &[0, 0]).is_ok());
    assert!(fields[0].get(0, &[16, 0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn doubling_sigma_doubles_paths(seed in any::<u64>(), s in 0.1..3.0f64, c in -1.0..1.0f64) {
        let g = GridSpec::lockstep(1, 1.0, 32, 0.5).unwrap();
        let p = WaveParams::new(1, 0.7).unwrap();
        let one = ModelSpec::new(p, Coefficients::constant(2, &[s, c, 0.0, s]).unwrap()).unwrap();
        let two = ModelSpec::new(p, Coefficients::constant(2, &[2.0 * s, 2.0 * c, 0.0, 2.0 * s]).unwrap()).unwrap();
        let a = simulate_additive(&one, g, seed).unwrap();
        let b = simulate_additive(&two, g, seed).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn zeroing_later_noise_leaves_the_past_unchanged(seed in any::<u64>(), cut in 1usize..16) {
        let g = GridSpec::lockstep(1, 1.0, 32, 1.0).unwrap();
        let m = ModelSpec::new(
            WaveParams::new(1, 0.5).unwrap(),
            Coefficients::preset("tanh-bounded", 1).unwrap(),
        ).unwrap();
        let noise = sample_noise(g, 1, 0.5, seed).unwrap();
        let mut cut_noise = noise.clone();
        cut_noise.zero_from(cut);
        let times: Vec<usize> = (0..=g.n_time).collect();
        let st = Stepper::new(&m, g).unwrap();
        let a = st.run_with_noise(&noise, &times).unwrap();
        let b = st.run_with_noise(&cut_noise, &times).unwrap();
        let upto = (cut + 1) * g.n_space;
        prop_assert_eq!(&a.values[..upto], &b.values[..upto]);
        let add = ModelSpec::additive(1, 0.5, 1).unwrap();
        let sy = Synthesizer::new(&add, g).unwrap();
        let c = sy.run_with_noise(&noise, &times).unwrap();
        let d = sy.run_with_noise(&cut_noise, &times).unwrap();
        prop_assert_eq!(&c.values[..upto], &d.values[..upto]);
    }
}
