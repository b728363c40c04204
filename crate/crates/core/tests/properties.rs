use proptest::prelude::*;

use honestci::asymptotics::{scaled_argmin, t_star, two_bandwidth_efficiency, PerformanceCriterion};
use honestci::bandwidth::{minimize_rmse, Family, FunctionClass};
use honestci::kernels::{equivalent_kernel, holder_bias_constant, taylor_bias_constant};
use honestci::lpreg::{bias_weight_function, lp_weights, rd_weights};
use honestci::{
    coverage_given_ratio, cv, flci_at_point, invert_coverage, rd_estimate, BiasSdRatio, CiOptions, ConfidenceLevel,
    Design, Domain, KernelSpec, Sample, Side,
};

fn level(l: f64) -> ConfidenceLevel {
    ConfidenceLevel::new(l).unwrap()
}

fn ratio(t: f64) -> BiasSdRatio {
    BiasSdRatio::new(t).unwrap()
}

fn kernel(i: usize, domain: Domain) -> KernelSpec {
    match i {
        0 => KernelSpec::uniform(domain),
        1 => KernelSpec::triangular(domain),
        _ => KernelSpec::epanechnikov(domain),
    }
}

/// Sorted design on `[lo, hi]` from raw uniforms.
fn design(raw: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut x: Vec<f64> = raw.iter().map(|u| lo + (hi - lo) * u).collect();
    x.sort_by(f64::total_cmp);
    x
}

fn noisy(x: &[f64], seed: u64) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| v * v + 0.4 * (((i as u64 * 7919 + seed * 104_729) % 23) as f64 / 11.0 - 1.0))
        .collect()
}

proptest! {
    #[test]
    fn coverage_round_trip(c in 0.5001f64..0.9499) {
        let l = level(0.95);
        let t = invert_coverage(c, l).unwrap();
        prop_assert!((coverage_given_ratio(t, l) - c).abs() < 1e-8);
    }

    #[test]
    fn cv_increases_in_ratio_and_level(t in 0.0f64..3.0, dt in 1e-3f64..1.0, l in 0.5f64..0.98) {
        prop_assert!(cv(ratio(t + dt), level(l)) > cv(ratio(t), level(l)));
        prop_assert!(cv(ratio(t), level(l + 0.01)) > cv(ratio(t), level(l)));
    }

    #[test]
    fn two_bandwidth_efficiency_is_symmetric(s in 0.05f64..20.0, r in 0.3f64..0.95) {
        let a = two_bandwidth_efficiency(s, r).unwrap();
        let b = two_bandwidth_efficiency(1.0 / s, r).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a > 0.0 && a <= 1.0 + 1e-12);
    }

    #[test]
    fn weights_satisfy_moment_conditions(
        raw in prop::collection::vec(0.0f64..1.0, 40..120),
        h in 0.3f64..2.0,
        q in 0usize..3,
        k in 0usize..3,
        lo in -1.0f64..0.0,
    ) {
        let x = design(&raw, lo, 1.0);
        let k = kernel(k, Domain::Interior);
        if let Ok(fit) = lp_weights(&x, h, &k, q, Side::Both) {
            let sum: f64 = fit.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-8);
            let scale: f64 = fit.weights.iter().map(|w| w.abs()).sum();
            for j in 1..=q {
                let m: f64 = fit.x().iter().zip(&fit.weights).map(|(x, w)| w * (x / h).powi(j as i32)).sum();
                prop_assert!(m.abs() < 1e-8 * scale, "moment {j}: {m}");
            }
        }
    }

    #[test]
    fn weights_are_scale_invariant(
        raw in prop::collection::vec(0.0f64..1.0, 30..80),
        c in 0.01f64..100.0,
        q in 0usize..3,
    ) {
        let x = design(&raw, -1.0, 1.0);
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        let k = KernelSpec::epanechnikov(Domain::Interior);
        let a = lp_weights(&x, 0.8, &k, q, Side::Both);
        let b = lp_weights(&xs, 0.8 * c, &k, q, Side::Both);
        if let (Ok(a), Ok(b)) = (a, b) {
            for (wa, wb) in a.weights.iter().zip(&b.weights) {
                prop_assert!((wa - wb).abs() < 1e-9 * (1.0 + wa.abs()));
            }
        }
    }

    /// Local linear fits with nonnegative kernels at a boundary have a
    /// nonpositive second-order bias weight function.
    #[test]
    fn boundary_local_linear_sign(raw in prop::collection::vec(0.0f64..1.0, 10..60), h in 0.3f64..1.5, k in 0usize..3) {
        let x = design(&raw, 0.0, 1.0);
        if let Ok(fit) = lp_weights(&x, h, &kernel(k, Domain::Interior), 1, Side::Both) {
            let wb = bias_weight_function(&fit, 2);
            for i in 0..=400 {
                let s = 1.2 * h * i as f64 / 400.0;
                prop_assert!(wb.eval(s) <= 1e-12, "w̄(s = {s}) = {}", wb.eval(s));
            }
        }
    }

    #[test]
    fn rd_bias_identity(
        raw in prop::collection::vec(0.0f64..1.0, 40..100),
        h in 0.4f64..1.5,
        m in 0.1f64..10.0,
        k in 0usize..3,
    ) {
        let x = design(&raw, -1.0, 1.0);
        if let Ok(fit) = rd_weights(&x, h, &kernel(k, Domain::Interior), 1) {
            let s: f64 = x
                .iter()
                .zip(fit.plus.weights.iter().zip(&fit.minus.weights))
                .map(|(x, (a, b))| (a + b) * x * x)
                .sum();
            let identity = 0.5 * m * s.abs();
            let direct = fit.maxbias_holder(2, m).unwrap();
            prop_assert!((identity - direct).abs() < 1e-10 * direct.max(1e-300), "{identity} vs {direct}");
        }
    }

    #[test]
    fn ci_nesting_and_monotonicity(
        raw in prop::collection::vec(0.0f64..1.0, 80..200),
        h in 0.3f64..1.0,
        m in 0.1f64..5.0,
        seed in 0u64..1000,
    ) {
        let x = design(&raw, -1.0, 1.0);
        let y = noisy(&x, seed);
        let s = Sample::new(x, y).unwrap();
        let k = KernelSpec::triangular(Domain::Interior);
        let ci = |l: f64, m: f64| {
            let class = FunctionClass::new(Family::Holder, 2, m).unwrap();
            flci_at_point(&s, &class, &k, 1, &CiOptions::new(level(l)).with_bandwidth(h))
        };
        if let (Ok(a), Ok(b), Ok(c)) = (ci(0.95, m), ci(0.99, m), ci(0.95, 2.0 * m)) {
            prop_assert!(b.ci_lower <= a.ci_lower && a.ci_upper <= b.ci_upper);
            prop_assert!(c.half_length() >= a.half_length());
            // The conservative interval contains the FLCI.
            let z = level(0.95).z_two_sided();
            prop_assert!(a.half_length() <= a.maxbias + z * a.se + 1e-12);
        }
    }
}

/// For large `t` the lower tail of `|N(t, 1)|` vanishes, so the quantile
/// approaches `t + z_{1−α}`; the tabulated values at `t = 2` agree.
#[test]
fn cv_tail_approximation() {
    for l in [0.99, 0.95, 0.9] {
        let z = level(l).z_one_sided();
        for i in 0..=100 {
            let t = 2.0 + i as f64 * 0.05;
            assert!((cv(ratio(t), level(l)) - (t + z)).abs() < 5e-4, "t = {t}, level {l}");
        }
    }
}

#[test]
fn cv_monotone_on_grid() {
    for l in [0.99, 0.95, 0.9] {
        let v: Vec<f64> = (0..=300).map(|i| cv(ratio(i as f64 * 0.01), level(l))).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn rmse_ratio_is_the_argmin() {
    for r in [0.5, 2.0 / 3.0, 0.8, 6.0 / 7.0] {
        let (t, _) = scaled_argmin(PerformanceCriterion::Rmse, r);
        assert!((t - t_star(PerformanceCriterion::Rmse, r).get()).abs() < 1e-6, "r = {r}");
    }
}

#[test]
fn kernel_constant_orderings() {
    for domain in [Domain::Interior, Domain::Boundary] {
        for k in 0..3 {
            for q in 0..=2 {
                let ks = equivalent_kernel(&kernel(k, domain), q, domain).unwrap();
                assert!((ks.integral() - 1.0).abs() < 1e-12);
                for j in 1..=q {
                    assert!(ks.mul_monomial(j).integral().abs() < 1e-12);
                }
                for p in 1..=q + 1 {
                    let bt = taylor_bias_constant(&ks, p).unwrap();
                    let bh = holder_bias_constant(&ks, p).unwrap();
                    assert!(bt >= ks.mul_monomial(p).integral().abs() - 1e-12);
                    assert!(bh <= bt + 1e-12, "{domain} kernel {k} q={q} p={p}: {bh} > {bt}");
                }
            }
        }
    }
}

#[test]
fn rmse_minimizer_scales_with_noise_and_smoothness() {
    let d = Design::new(2, 2.0).unwrap().with_n(300);
    let s = d.draw(5, 0);
    let k = KernelSpec::triangular(Domain::Interior);
    let sigma2 = vec![0.25; s.len()];
    let c = 3.7;
    let scaled: Vec<f64> = sigma2.iter().map(|v| v * c * c).collect();
    let a = minimize_rmse(s.x(), &k, 1, &FunctionClass::new(Family::Holder, 2, 2.0).unwrap(), &sigma2, None).unwrap();
    let b =
        minimize_rmse(s.x(), &k, 1, &FunctionClass::new(Family::Holder, 2, 2.0 * c).unwrap(), &scaled, None).unwrap();
    // At a smooth minimum the argmin is only determined to about √ε.
    assert!((a.h_star - b.h_star).abs() < 1e-6 * a.h_star, "{} vs {}", a.h_star, b.h_star);
    assert!((b.rmse / a.rmse - c).abs() < 1e-9);
}

#[test]
fn holder_bandwidth_is_weakly_larger_than_taylor() {
    let k = KernelSpec::triangular(Domain::Interior);
    for id in 1..=3 {
        for m in [2.0, 6.0] {
            let s = Design::new(id, m).unwrap().draw(17, id as u64);
            let sigma2 = vec![0.25; s.len()];
            let h = |family| {
                let class = FunctionClass::new(family, 2, m).unwrap();
                minimize_rmse(s.x(), &k, 1, &class, &sigma2, None).unwrap().h_star
            };
            let (hh, ht) = (h(Family::Holder), h(Family::Taylor));
            // Equal minimizers may differ at the √ε resolution of the search.
            assert!(hh >= ht * (1.0 - 1e-6), "design {id}, M = {m}: {hh} < {ht}");
        }
    }
}

#[test]
fn rd_ci_covers_a_known_jump() {
    let n = 1000;
    let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
    let y: Vec<f64> = noisy(&x, 3).iter().zip(&x).map(|(y, x)| y + if *x >= 0.0 { 1.5 } else { 0.0 }).collect();
    let s = Sample::new(x, y).unwrap();
    let r = rd_estimate(&s, 2.0, &KernelSpec::triangular(Domain::Boundary), &CiOptions::new(level(0.95))).unwrap();
    assert!(r.contains(1.5), "{r:?}");
    assert!(r.ci_lower > 0.0);
}
