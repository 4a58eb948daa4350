use masterop::catalog::plane_wave;
use masterop::families::{
    c0_constant, eta, phi_family, psi_family, rescale, w_family, FamilyParams, SpatialRegime, BUMP_MAX,
};
use masterop::operators::{fractional_laplacian, marchaud, master_op};
use masterop::special::{gamma, unit_sphere_measure};
use masterop::{Error, FunctionHandle, Horizon, KernelParams, Normalization, QuadSpec, SpaceTimePoint};
use proptest::prelude::*;

const NORM: Normalization = Normalization::Normalized;

#[test]
fn families_vanish_on_fixed_cylinders() {
    let k = 10.0;
    for j in [7u32, 8, 16] {
        let w = w_family(j, 1.0, 0.5, 2, NORM).unwrap();
        let phi = phi_family(j, 1.0, 1.0);
        // the temporal family sits at t in [-3j, -2j], so it needs 2j > K^2
        let psi = psi_family(j * 8, 0.5, 1.0);
        let mut worst: f64 = 0.0;
        for a in 0..=40 {
            for b in 0..=40 {
                let x = [-k + 0.5 * a as f64, -k + 0.5 * b as f64];
                if x[0].hypot(x[1]) > k {
                    continue;
                }
                for c in 0..=20 {
                    let t = -k * k + (2.0 * k * k) * c as f64 / 20.0;
                    worst = worst.max(w.eval(&x, t).abs()).max(phi.eval(&x, t).abs()).max(psi.eval(&x, t).abs());
                }
            }
        }
        // 2j > K for the spatial factors, so every member is identically zero on Q_K
        assert_eq!(worst, 0.0, "j={j}");
    }
}

#[test]
fn spatial_dichotomy() {
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let q = QuadSpec::default();
    let c0 = c0_constant(0.5, 1, NORM).unwrap();
    let crit: Vec<f64> =
        [2u32, 4, 8, 16].iter().map(|&j| fractional_laplacian(&phi_family(j, 1.0, 1.0), &[0.5], &p, &q).unwrap().value).collect();
    let last = crit[crit.len() - 1];
    assert!((last + c0).abs() <= 0.02 * c0, "{crit:?} vs -{c0}");
    assert!((crit[2] - last).abs() <= 0.02 * c0);
    let low: Vec<f64> =
        [2u32, 4, 8, 16].iter().map(|&j| fractional_laplacian(&phi_family(j, 0.5, 1.0), &[0.5], &p, &q).unwrap().value).collect();
    assert!(low[3].abs() <= 1e-3 && low[2].abs() <= 1e-3, "{low:?}");
    assert!(low[3].abs() < low[0].abs());
}

#[test]
fn temporal_family_at_the_critical_amplitude() {
    let p = KernelParams::normalized(1, 0.5).unwrap();
    let fam = FamilyParams::new(1, 0.5, 1.0, 1.0, 0.5, 1, NORM).unwrap();
    for j in [2u32, 4, 8] {
        let v = marchaud(&psi_family(j, 0.5, 1.0), 0.0, &p, &QuadSpec::default()).unwrap().value;
        assert!((v + fam.c1).abs() <= 1e-6 * fam.c1, "j={j}: {v} vs -{}", fam.c1);
    }
}

#[test]
fn marchaud_of_eta_family() {
    let gam = 1.0;
    for s in [0.3, 0.5, 0.7] {
        let p = KernelParams::normalized(1, s).unwrap();
        for j in [2u32, 4] {
            let scale = (j as f64).powf(gam);
            let u = FunctionHandle::temporal(move |t| eta(t / scale)).with_time_breaks(vec![0.0]);
            for t in [0.5, 1.0, 3.0] {
                let got = marchaud(&u, t, &p, &QuadSpec::default()).unwrap().value;
                let exact = gamma(3.0) / gamma(3.0 - s) * (j as f64).powf(-2.0 * gam) * t.powf(2.0 - s);
                assert!((got - exact).abs() <= 1e-3 * exact, "s={s} j={j} t={t}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn space_time_family_between_its_bounds() {
    let s = 0.5;
    let gam = 1.0;
    let p = KernelParams::normalized(1, s).unwrap();
    let q = QuadSpec::default();
    let c0 = c0_constant(s, 1, NORM).unwrap();
    for j in [8u32, 16] {
        let jf = j as f64;
        let eta_j = FunctionHandle::temporal(move |t| eta(t / jf.powf(gam))).with_time_breaks(vec![0.0]);
        let w = w_family(j, gam, s, 1, NORM).unwrap();
        for (x, t) in [(0.0, 0.0), (1.0, 1.0), (-1.0, 0.5)] {
            let m = master_op(&w, &SpaceTimePoint::line(x, t), &p, &q).unwrap();
            let fl = fractional_laplacian(&phi_family(j, 2.0 * s, 1.0), &[x], &p, &q).unwrap();
            let de = marchaud(&eta_j, t, &p, &q).unwrap();
            let lower = fl.value / c0 * eta(t / jf.powf(gam));
            let upper = lower + jf.powf(2.0 * s) * BUMP_MAX * de.value / c0;
            let slack = m.err_estimate
                + fl.err_estimate / c0 * eta(t / jf.powf(gam))
                + jf.powf(2.0 * s) * BUMP_MAX * de.err_estimate / c0;
            assert!(m.value >= lower - slack && m.value <= upper + slack, "j={j} ({x},{t}): {lower} <= {} <= {upper}", m.value);
        }
    }
}

#[test]
fn constraint_and_regimes() {
    assert!(matches!(w_family(4, 0.5, 0.5, 1, NORM), Err(Error::Constraint(_))));
    let reg = |alpha| FamilyParams::new(2, alpha, 1.0, 1.0, 0.5, 1, NORM).unwrap().regime();
    assert_eq!(reg(1.0), SpatialRegime::Critical);
    assert_eq!(reg(0.5), SpatialRegime::Vanishing);
    assert_eq!(reg(1.5), SpatialRegime::Divergent);
    let f = FamilyParams::new(2, 1.0, 1.0, 1.0, 0.5, 3, NORM).unwrap();
    assert!((f.omega_nm1 - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(unit_sphere_measure(1), 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn rescale_evaluates_through_the_map(mk in 0.1f64..10.0, lambda in 0.1f64..5.0, xb in -3.0f64..3.0, tb in -3.0f64..3.0, x in -2.0f64..2.0, t in -2.0f64..2.0) {
        let u = w_family(4, 1.0, 0.5, 1, NORM).unwrap();
        let v = rescale(&u, mk, lambda, &[xb], tb).unwrap();
        let want = u.eval(&[lambda * x + xb], lambda * lambda * t + tb) / mk;
        prop_assert_eq!(v.eval(&[x], t), want);
    }

    #[test]
    fn rescale_commutes_with_the_operator(mk in 0.5f64..4.0, lambda in 0.5f64..2.0, xb in -1.0f64..1.0, tb in -0.5f64..0.5) {
        let s = 0.5;
        let p = KernelParams::normalized(1, s).unwrap();
        let q = QuadSpec::default().with_horizon(Horizon::Finite(60.0));
        let u = plane_wave(1.0, 1.0);
        let v = rescale(&u, mk, lambda, &[xb], tb).unwrap();
        let (x, t) = (0.3, 0.1);
        let lhs = master_op(&v, &SpaceTimePoint::line(x, t), &p, &q).unwrap();
        let inner = master_op(&u, &SpaceTimePoint::line(lambda * x + xb, lambda * lambda * t + tb), &p, &q).unwrap();
        let rhs = lambda.powf(2.0 * s) / mk * inner.value;
        prop_assert!((lhs.value - rhs).abs() <= 1e-6 * rhs.abs().max(1.0) + lhs.err_estimate + inner.err_estimate);
    }
}
