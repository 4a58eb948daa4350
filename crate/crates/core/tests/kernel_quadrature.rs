use std::f64::consts::PI;

use approx::assert_relative_eq;
use masterop::catalog::{bundled, spacetime_bump};
use masterop::kernel::{decay_sweep, kernel_eval, kernel_log_ratio, DecayGrid};
use masterop::operators::{master_op, master_op_panels};
use masterop::quadrature::{gauss_hermite, gauss_legendre};
use masterop::special::gamma;
use masterop::{KernelParams, Normalization, QuadSpec, SpaceTimePoint};
use proptest::prelude::*;

/// Stirling series after shifting the argument above 20; independent of the
/// library's gamma routine.
fn gamma_oracle(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_oracle(1.0 - x));
    }
    let mut shift = 1.0;
    let mut z = x;
    while z < 20.0 {
        shift *= z;
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv / 12.0 - inv * inv2 / 360.0 + inv * inv2 * inv2 / 1260.0 - inv * inv2.powi(3) / 1680.0;
    ((z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series).exp() / shift
}

#[test]
fn gamma_agrees_with_stirling_oracle() {
    for x in [0.1, 0.25, 0.5, 0.75, 1.3, 2.5, 3.7, -0.5, -0.25, -1.5] {
        assert_relative_eq!(gamma(x), gamma_oracle(x), max_relative = 1e-12);
    }
}

#[test]
fn normalized_constants_match_oracle() {
    for n in 1..=3 {
        for s in [0.25, 0.5, 0.75] {
            let p = KernelParams::normalized(n, s).unwrap();
            let abs_g = -gamma_oracle(-s);
            let hn = n as f64 / 2.0;
            assert_relative_eq!(p.master_const, 1.0 / ((4.0 * PI).powf(hn) * abs_g), max_relative = 1e-12);
            assert_relative_eq!(p.marchaud_const, 1.0 / abs_g, max_relative = 1e-12);
            let flap = 4f64.powf(s) * gamma_oracle(hn + s) / (PI.powf(hn) * abs_g);
            assert_relative_eq!(p.flap_const, flap, max_relative = 1e-12);
        }
    }
    // closed form at s = 1/2, n = 1: 1/(4 pi)
    assert_relative_eq!(KernelParams::normalized(1, 0.5).unwrap().master_const, 0.25 / PI, max_relative = 1e-14);
}

#[test]
fn spatial_integral_of_kernel() {
    for n in 1..=3usize {
        let p = KernelParams::new(n, 0.4, Normalization::Raw).unwrap();
        let gh = gauss_hermite(12).unwrap();
        for dt in [1e-3f64, 0.7, 40.0] {
            // dx = 2 sqrt(dt) z turns the Gaussian into e^{-|z|^2}
            let h = 2.0 * dt.sqrt();
            let mut total = 0.0;
            let idx: Vec<usize> = (0..n).collect();
            let q = gh.nodes.len();
            for flat in 0..q.pow(n as u32) {
                let mut k = flat;
                let mut dx = vec![0.0; n];
                let mut w = 1.0;
                for &d in &idx {
                    let i = k % q;
                    k /= q;
                    dx[d] = h * gh.nodes[i];
                    w *= gh.weights[i] * (gh.nodes[i] * gh.nodes[i]).exp();
                }
                total += w * kernel_eval(&dx, dt, &p).unwrap().value;
            }
            total *= h.powi(n as i32);
            let expect = p.heat_factor() * dt.powf(-1.4);
            assert_relative_eq!(total, expect, max_relative = 1e-10);
        }
    }
}

#[test]
fn decay_bound_on_check_grid() {
    for n in 1..=3 {
        for s in [0.25, 0.5, 0.75] {
            for mode in [Normalization::Normalized, Normalization::Raw] {
                let p = KernelParams::new(n, s, mode).unwrap();
                let sweep = decay_sweep(&p, &DecayGrid::check_default()).unwrap();
                assert_eq!(sweep.points, 10_000);
                assert_eq!(sweep.violations, 0, "n={n} s={s} {mode:?}");
            }
        }
    }
}

#[test]
fn hermite_polynomial_exactness() {
    for q in [1usize, 2, 5, 10, 20, 40] {
        let rule = gauss_hermite(q).unwrap();
        for k in 0..2 * q {
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * z.powi(k as i32)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { gamma_oracle((k as f64 + 1.0) / 2.0) };
            let scale: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| (w * z.powi(k as i32)).abs()).sum();
            assert!((got - exact).abs() <= 1e-12 * scale, "q={q} k={k}: {got} vs {exact}");
        }
    }
}

#[test]
fn legendre_exactness() {
    let rule = gauss_legendre(8);
    for k in 0..16 {
        let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * z.powi(k)).sum();
        let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        assert!((got - exact).abs() < 1e-14);
    }
}

#[test]
fn innermost_panels_scale_like_a_to_one_minus_s() {
    let u = spacetime_bump(vec![0.0], 0.0, 2.0, 2.0);
    let at = SpaceTimePoint::line(0.3, 0.1);
    for s in [0.25, 0.5, 0.75] {
        let p = KernelParams::normalized(1, s).unwrap();
        let panels = master_op_panels(&u, &at, &p, &QuadSpec::default()).unwrap();
        // contribution per unit of log a on the three innermost full panels
        // (the first one is the sliver ending at a_min)
        let inner: Vec<(f64, f64)> =
            panels.iter().skip(1).take(3).map(|&(lo, hi, v)| ((lo * hi).sqrt(), v.abs() / (hi / lo).ln())).collect();
        let m = inner.len() as f64;
        let (sx, sy) = inner.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
        let (mx, my) = (sx / m, sy / m);
        let num: f64 = inner.iter().map(|(x, y)| (x.ln() - mx) * (y.ln() - my)).sum();
        let den: f64 = inner.iter().map(|(x, _)| (x.ln() - mx).powi(2)).sum();
        let slope = num / den;
        assert!((slope - (1.0 - s)).abs() <= 0.1, "s={s}: slope {slope}");
    }
}

#[test]
fn refinement_stays_within_error_estimate() {
    let p = KernelParams::normalized(1, 0.5).unwrap();
    for smp in bundled(1) {
        let q = QuadSpec::default().with_horizon(smp.horizon);
        let at = SpaceTimePoint::line(0.4, 0.3);
        let a = master_op(&smp.u, &at, &p, &q).unwrap();
        let b = master_op(&smp.u, &at, &p, &q.refined()).unwrap();
        assert!((a.value - b.value).abs() < 4.0 * a.err_estimate, "{}: {a:?} vs {b:?}", smp.name);
    }
}

#[test]
fn principal_value_independent_of_cutoff() {
    let u = spacetime_bump(vec![0.0], 0.0, 2.0, 2.0);
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let at = SpaceTimePoint::line(0.2, -0.1);
    let base = master_op(&u, &at, &p, &QuadSpec { a_min: 1e-8, ..QuadSpec::default() }).unwrap();
    for a_min in [1e-9, 1e-10, 1e-12] {
        let r = master_op(&u, &at, &p, &QuadSpec { a_min, ..QuadSpec::default() }).unwrap();
        assert!((r.value - base.value).abs() <= 1e-6 * base.value.abs());
    }
}

proptest! {
    #[test]
    fn kernel_is_positive(x in -50.0f64..50.0, y in -50.0f64..50.0, dt in 1e-3f64..1e3, n in 1usize..=3, s in 0.05f64..0.95) {
        let p = KernelParams::normalized(n, s).unwrap();
        let mut dx = vec![x, y, 0.5][..n].to_vec();
        dx[0] = x;
        // stay where the exponential does not underflow
        prop_assume!(dx.iter().map(|c| c * c).sum::<f64>() / (4.0 * dt) < 700.0);
        let v = kernel_eval(&dx, dt, &p).unwrap();
        prop_assert!(v.value > 0.0);
    }

    #[test]
    fn log_ratio_is_antisymmetric(a in -20.0f64..20.0, b in -20.0f64..20.0, c in -20.0f64..20.0, d in -20.0f64..20.0, dt in 1e-4f64..1e4) {
        let (x1, x2) = (vec![a, c], vec![b, d]);
        let fwd = kernel_log_ratio(&x1, &x2, dt).unwrap();
        let back = kernel_log_ratio(&x2, &x1, dt).unwrap();
        prop_assert_eq!(fwd, -back);
    }
}
