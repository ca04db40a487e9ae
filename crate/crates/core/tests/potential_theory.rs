use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stochwave::potential_theory::{
    capacity, capacity_with, hausdorff_measure, CapacityOptions, CapacityProblem, KernelOrder,
    TargetSet,
};

/// Cap_γ([0,1]) from the interior KKT system on n equal cells: midpoint
/// kernel off the diagonal, exact self-cell mean on it.
fn segment_capacity_oracle(gamma: f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let diag = 2.0 / ((1.0 - gamma) * (2.0 - gamma)) * h.powf(-gamma);
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else {
            ((i as f64 - j as f64).abs() * h).powf(-gamma)
        }
    });
    let x = k.lu().solve(&DVector::from_element(n, 1.0)).unwrap();
    assert!(x.iter().all(|v| *v > 0.0), "oracle optimum left the interior");
    x.sum()
}

#[test]
fn segment_capacity_matches_kkt_oracle() {
    let oracle = segment_capacity_oracle(0.5, 200);
    let r = capacity(&TargetSet::cube(&[0.0], &[1.0]), KernelOrder::new(0.5), 400, 1e-5).unwrap();
    assert!(r.converged);
    assert!(r.estimate >= 0.375);
    assert!((r.estimate / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", r.estimate);
}

#[test]
fn exact_cases() {
    let seg = TargetSet::cube(&[0.0], &[1.0]);
    assert_eq!(capacity(&seg, KernelOrder::new(-1.0), 100, 1e-4).unwrap().estimate, 1.0);
    let pt = TargetSet::points(vec![vec![0.2, 0.1]]);
    assert_eq!(capacity(&pt, KernelOrder::new(0.5), 100, 1e-4).unwrap().estimate, 0.0);
    assert_eq!(capacity(&TargetSet::empty(2), KernelOrder::new(0.5), 100, 1e-4).unwrap().estimate, 0.0);
    let r = capacity(&seg, KernelOrder::new(1.2), 100, 1e-4).unwrap();
    assert!(r.diverged && r.estimate == 0.0);
    assert!(capacity(&seg, KernelOrder::new(0.5), 10, 1e-4).is_err());
    assert!(capacity(&seg, KernelOrder::log(0.5), 100, 1e-4).is_err());
}

#[test]
fn refinement_is_stable() {
    let seg = TargetSet::cube(&[0.0], &[1.0]);
    let a = capacity(&seg, KernelOrder::new(0.5), 500, 1e-6).unwrap().estimate;
    let b = capacity(&seg, KernelOrder::new(0.5), 1000, 1e-6).unwrap().estimate;
    assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn log_capacity_of_segment() {
    // uniform measure on [0,1] with c = 2: E = log 2 + 3/2
    let seg = TargetSet::cube(&[0.0], &[1.0]);
    let r = capacity(&seg, KernelOrder::log(2.0), 400, 1e-6).unwrap();
    assert!(r.energy <= 2f64.ln() + 1.5);
    // arcsine law: log c + log 4 since the unit segment has log capacity 1/4
    assert!((r.energy - 8f64.ln()).abs() < 0.02, "{}", r.energy);
}

#[test]
fn nested_balls_are_monotone() {
    for dim in [2usize, 3] {
        let z = vec![0.1; dim];
        let mut last = (0.0, 0.0);
        for r in [0.25, 0.5, 1.0] {
            let b = TargetSet::ball(&z, r);
            let cap = capacity(&b, KernelOrder::new(0.8), 800, 1e-4).unwrap().estimate;
            let hm = hausdorff_measure(&b, dim as f64, 8).unwrap().estimate;
            assert!(cap >= last.0 && hm >= last.1, "dim {dim} r {r}: {cap} {hm}");
            last = (cap, hm);
        }
    }
}

#[test]
fn union_with_lower_dimensional_piece_keeps_full_part() {
    let mut s = TargetSet::cube(&[0.0, 0.0], &[1.0, 1.0]);
    let alone = capacity(&s, KernelOrder::new(1.0), 400, 1e-4).unwrap().estimate;
    s.primitives.push(stochwave::potential_theory::Primitive::Points { points: vec![vec![0.5, 0.5]] });
    let with = capacity(&s, KernelOrder::new(1.0), 400, 1e-4).unwrap().estimate;
    assert_eq!(alone, with);
    let cross = TargetSet::from_json(
        r#"{"dim":2,"primitives":[{"type":"box","min":[0,0],"max":[1,0]},{"type":"box","min":[0,0],"max":[0,2]}]}"#,
    )
    .unwrap();
    let r = capacity(&cross, KernelOrder::new(0.5), 200, 1e-4).unwrap();
    assert!(r.lower_bound && r.estimate > 0.0);
}

#[test]
fn hausdorff_segment_oracle() {
    let seg = TargetSet::cube(&[0.0], &[1.0]);
    for depth in [2usize, 10, 20] {
        let r = hausdorff_measure(&seg, 1.0, depth).unwrap();
        assert_eq!(r.estimate, 1.0 + 0.5f64.powi(depth as i32));
    }
    let sq = TargetSet::cube(&[0.0, 0.0], &[1.0, 1.0]);
    assert!(hausdorff_measure(&sq, 1.0, 6).unwrap().estimate > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimizer_beats_every_sampled_measure(seed in 0u64..1000) {
        let set = TargetSet::ball(&[0.0, 0.0], 1.0);
        let p = CapacityProblem::new(&set, 0.6, 1.0, 120).unwrap();
        let sol = p.solve(1e-6, 20_000);
        let n = p.n_cells();
        let mut w: Vec<f64> = (0..n)
            .map(|i| ((i as u64 * 2654435761 + seed * 97) % 1000) as f64 + 1.0)
            .collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        prop_assert!(sol.energy <= p.energy(&w) + 1e-6 * sol.energy);
    }

    #[test]
    fn smaller_order_gives_larger_capacity(g1 in 0.05f64..0.9, dg in 0.02f64..0.5) {
        let g2 = (g1 + dg).min(0.95);
        let seg = TargetSet::cube(&[0.0], &[1.0]);
        let opts = CapacityOptions { n_grid: 200, tol: 1e-6, max_iter: 50_000 };
        let a = capacity_with(&seg, KernelOrder::new(g1), &opts).unwrap().estimate;
        let b = capacity_with(&seg, KernelOrder::new(g2), &opts).unwrap().estimate;
        prop_assert!(a >= b);
    }

    #[test]
    fn hausdorff_is_monotone_in_boxes(lo in -1.0f64..0.0, len in 0.1f64..1.0, grow in 0.0f64..0.5) {
        let a = TargetSet::cube(&[lo, lo], &[lo + len, lo + len]);
        let b = TargetSet::cube(&[lo - grow, lo], &[lo + len + grow, lo + len]);
        let ha = hausdorff_measure(&a, 1.5, 10).unwrap().estimate;
        let hb = hausdorff_measure(&b, 1.5, 10).unwrap().estimate;
        prop_assert!(ha <= hb);
    }
}
