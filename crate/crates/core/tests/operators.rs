use masterop::catalog::{bundled, plane_wave, spacetime_bump};
use masterop::families::w_family;
use masterop::operators::{
    difference_decomposition, fractional_laplacian, fractional_laplacian_via, heat_limit_check, marchaud,
    master_op, FlapRoute,
};
use masterop::special::gamma;
use masterop::{FunctionHandle, Horizon, KernelParams, Normalization, QuadSpec, SpaceTimePoint, SupportBox};
use proptest::prelude::*;

fn far() -> QuadSpec {
    QuadSpec::default().with_horizon(Horizon::Finite(60.0))
}

#[test]
fn symbol_of_plane_waves() {
    let u = plane_wave(1.0, 1.0);
    for s in [0.25, 0.5, 0.75] {
        let p = KernelParams::normalized(1, s).unwrap();
        for (x, t) in [(0.0, 0.0), (0.5, 0.2), (-1.0, 1.0), (2.0, -0.5), (0.3, -2.0)] {
            let r = master_op(&u, &SpaceTimePoint::line(x, t), &p, &far()).unwrap();
            let exact = 2f64.powf(s) * t.exp() * f64::cos(x);
            assert!((r.value - exact).abs() <= 1e-6 * exact.abs(), "s={s} ({x},{t}): {} vs {exact}", r.value);
        }
    }
}

#[test]
fn reductions_to_the_one_variable_operators() {
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let samples = bundled(1);
    let cos = &samples.iter().find(|s| s.name == "cos_x").unwrap().u;
    for x in [0.0, 0.3, 1.7] {
        let m = master_op(cos, &SpaceTimePoint::line(x, 0.4), &p, &far()).unwrap();
        let f = fractional_laplacian(cos, &[x], &p, &QuadSpec::default()).unwrap();
        assert!((m.value - f.value).abs() <= 1e-4, "x={x}: {} vs {}", m.value, f.value);
        assert!((f.value - x.cos()).abs() <= 1e-4);
    }
    let et = &samples.iter().find(|s| s.name == "exp_t").unwrap().u;
    for t in [-1.0, 0.0, 0.2] {
        let m = master_op(et, &SpaceTimePoint::line(0.7, t), &p, &QuadSpec::default()).unwrap();
        let d = marchaud(et, t, &p, &QuadSpec::default()).unwrap();
        assert!((m.value - d.value).abs() <= 1e-4);
        assert!((d.value - t.exp()).abs() <= 1e-4 * t.exp());
    }
}

#[test]
fn compact_spatial_bump_reduction_in_two_dimensions() {
    let p = KernelParams::normalized(2, 0.5).unwrap();
    let u = FunctionHandle::spatial(|x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 < 1.0 {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    })
    .with_support(SupportBox::ball(1.0))
    .with_scales(0.25, f64::INFINITY);
    let x = [0.2, -0.1];
    let direct = fractional_laplacian_via(&u, &x, &p, &QuadSpec::default(), FlapRoute::Direct).unwrap();
    let via = fractional_laplacian_via(&u, &x, &p, &QuadSpec::default(), FlapRoute::Master).unwrap();
    assert!((direct.value - via.value).abs() <= 1e-4, "{direct:?} vs {via:?}");
}

#[test]
fn marchaud_of_truncated_square() {
    let u = FunctionHandle::temporal(|t| t.max(0.0).powi(2)).with_time_breaks(vec![0.0]);
    for s in [0.25, 0.5, 0.75] {
        let p = KernelParams::normalized(1, s).unwrap();
        let r = marchaud(&u, 1.0, &p, &QuadSpec::default()).unwrap();
        let exact = gamma(3.0) / gamma(3.0 - s);
        assert!((r.value - exact).abs() <= 1e-3 * exact, "s={s}: {} vs {exact}", r.value);
    }
}

#[test]
fn linearity() {
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let q = QuadSpec::default();
    let u = spacetime_bump(vec![0.0], 0.0, 2.0, 2.0);
    let v = spacetime_bump(vec![1.0], 0.5, 1.5, 1.0);
    let at = SpaceTimePoint::line(0.4, 0.3);
    let (a, b) = (2.5, -0.75);
    let mu = master_op(&u, &at, &p, &q).unwrap();
    let mv = master_op(&v, &at, &p, &q).unwrap();
    let mc = master_op(&FunctionHandle::combine(a, &u, b, &v), &at, &p, &q).unwrap();
    let expect = a * mu.value + b * mv.value;
    let tol = 3.0 * (mc.err_estimate + a.abs() * mu.err_estimate + b.abs() * mv.err_estimate);
    assert!((mc.value - expect).abs() <= tol, "{} vs {expect} (tol {tol})", mc.value);
}

#[test]
fn translation_covariance() {
    let p = KernelParams::normalized(2, 0.5).unwrap();
    let q = QuadSpec::default();
    let u = spacetime_bump(vec![0.0, 0.0], 0.0, 2.0, 2.0);
    let (x0, t0) = ([1.5, -0.5], 3.0);
    let moved = spacetime_bump(x0.to_vec(), t0, 2.0, 2.0);
    let base = master_op(&u, &SpaceTimePoint::new(vec![0.3, 0.2], 0.4), &p, &q).unwrap();
    let shifted = master_op(&moved, &SpaceTimePoint::new(vec![1.8, -0.3], 3.4), &p, &q).unwrap();
    let tol = 2.0 * (base.err_estimate + shifted.err_estimate);
    assert!((base.value - shifted.value).abs() <= tol);
}

#[test]
fn decomposition_reproduces_the_direct_difference() {
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let q = QuadSpec::default();
    let b = bundled(1);
    let pairs = [
        (b[0].u.clone(), b[1].u.clone()),
        (b[0].u.clone(), w_family(8, 1.0, 0.5, 1, Normalization::Normalized).unwrap()),
    ];
    for (u, ui) in &pairs {
        let at = SpaceTimePoint::line(0.5, 0.3);
        let a = master_op(u, &at, &p, &q).unwrap();
        let c = master_op(ui, &at, &p, &q).unwrap();
        for r in [20.0, 50.0] {
            let d = difference_decomposition(u, ui, &at, r, &p, &q).unwrap();
            let tol = d.err_estimate + a.err_estimate + c.err_estimate;
            let gap = (d.total() - (a.value - c.value)).abs();
            assert!(gap <= tol, "R={r}: gap {gap} > {tol}");
        }
    }
}

#[test]
fn heat_limit_trend() {
    let u = plane_wave(1.0, 1.0);
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let rep = heat_limit_check(&u, &SpaceTimePoint::line(0.0, 0.0), &[0.9, 0.95, 0.99], &p, &far()).unwrap();
    assert!((rep.classical - 2.0).abs() < 1e-6);
    let gaps: Vec<f64> = rep.entries.iter().map(|e| (e.value - 2.0).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn plane_wave_symbol(mu in 0.5f64..2.0, xi in 0.0f64..2.0, s in 0.1f64..0.9, x in -2.0f64..2.0, t in -1.0f64..1.0) {
        let p = KernelParams::normalized(1, s).unwrap();
        let r = master_op(&plane_wave(mu, xi), &SpaceTimePoint::line(x, t), &p, &far()).unwrap();
        let exact = (mu + xi * xi).powf(s) * (mu * t).exp() * (xi * x).cos();
        prop_assert!((r.value - exact).abs() <= 1e-5 * (mu * t).exp(), "{} vs {}", r.value, exact);
    }

    #[test]
    fn parabolic_scaling(lambda in 0.5f64..2.0, mu in 0.5f64..1.5, xi in 0.2f64..1.5, x in -1.0f64..1.0, t in -0.5f64..0.5) {
        let s = 0.4;
        let p = KernelParams::normalized(1, s).unwrap();
        let scaled = plane_wave(mu * lambda * lambda, xi * lambda);
        let lhs = master_op(&scaled, &SpaceTimePoint::line(x, t), &p, &far()).unwrap();
        let rhs = master_op(&plane_wave(mu, xi), &SpaceTimePoint::line(lambda * x, lambda * lambda * t), &p, &far()).unwrap();
        let tol = 1e-6 * (mu * lambda * lambda * t).exp() * lambda.powf(2.0 * s) + lhs.err_estimate + rhs.err_estimate;
        prop_assert!((lhs.value - lambda.powf(2.0 * s) * rhs.value).abs() <= tol);
    }
}
