//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use masterop::catalog::{bundled, plane_wave};
use masterop::defect::{defect_estimate, DefectSchedule};
use masterop::families::{c0_constant, phi_family, w_family};
use masterop::kernel::{decay_sweep, DecayGrid};
use masterop::operators::{
    difference_decomposition, fractional_laplacian, heat_limit_check, marchaud, master_op,
};
use masterop::quadrature::gauss_hermite;
use masterop::regions::{
    c1_schedule, partition_check_step1, partition_check_step2, seeded_rng, verify_ratio_c2_c3,
    verify_ratio_step2, DEFAULT_SEED,
};
use masterop::special::gamma;
use masterop::{FunctionHandle, Horizon, KernelParams, Normalization, QuadSpec, SpaceTimePoint};

const NORM: Normalization = Normalization::Normalized;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn far() -> QuadSpec {
    QuadSpec::default().with_horizon(Horizon::Finite(60.0))
}

/// Ten times as many panels per decade and a doubled Hermite order.
fn ten_x(q: &QuadSpec) -> QuadSpec {
    QuadSpec {
        panels_per_decade: 10 * q.panels_per_decade,
        grading: q.grading.powf(0.1),
        gh_order: 2 * q.gh_order,
        ..q.clone()
    }
}

fn symbol_oracle() -> Outcome {
    let u = plane_wave(1.0, 1.0);
    let probes = [(0.0, 0.0), (0.5, 0.2), (-1.0, 1.0), (2.0, -0.5), (0.3, -2.0)];
    let mut worst: f64 = 0.0;
    let mut worst_ref: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        let p = KernelParams::normalized(1, s).map_err(|e| e.to_string())?;
        let clock = Instant::now();
        for &(x, t) in &probes {
            let at = SpaceTimePoint::line(x, t);
            let r = master_op(&u, &at, &p, &far()).map_err(|e| e.to_string())?;
            let exact = 2f64.powf(s) * t.exp() * f64::cos(x);
            worst = worst.max((r.value - exact).abs() / exact.abs());
            let reference = master_op(&u, &at, &p, &ten_x(&far())).map_err(|e| e.to_string())?;
            worst_ref = worst_ref.max((r.value - reference.value).abs() / reference.value.abs());
        }
        slowest = slowest.max(clock.elapsed().as_secs_f64());
    }
    check(
        worst <= 1e-3 && worst_ref <= 1e-3 && slowest <= 10.0,
        format!("max rel err {worst:.2e} (vs reference {worst_ref:.2e}, tol 1e-3), slowest s {slowest:.2} s (limit 10 s)"),
    )
}

fn reductions() -> Outcome {
    let p = KernelParams::normalized(1, 0.5).map_err(|e| e.to_string())?;
    let samples = bundled(1);
    let cos = &samples.iter().find(|s| s.name == "cos_x").unwrap().u;
    let et = &samples.iter().find(|s| s.name == "exp_t").unwrap().u;
    let mut worst: f64 = 0.0;
    for x in [0.0, 0.3, 1.7] {
        let m = master_op(cos, &SpaceTimePoint::line(x, 0.4), &p, &far()).map_err(|e| e.to_string())?;
        let f = fractional_laplacian(cos, &[x], &p, &QuadSpec::default()).map_err(|e| e.to_string())?;
        worst = worst.max((m.value - f.value).abs());
    }
    let mut worst_t: f64 = 0.0;
    for t in [-1.0, 0.0, 0.2] {
        let at = SpaceTimePoint::line(0.7, t);
        let m = master_op(et, &at, &p, &QuadSpec::default()).map_err(|e| e.to_string())?;
        let d = marchaud(et, t, &p, &QuadSpec::default()).map_err(|e| e.to_string())?;
        worst_t = worst_t.max((m.value - d.value).abs());
    }
    check(
        worst <= 1e-4 && worst_t <= 1e-4,
        format!("cos(x1): {worst:.2e}, e^t: {worst_t:.2e} (tol 1e-4)"),
    )
}

fn marchaud_values() -> Outcome {
    let et = FunctionHandle::temporal(f64::exp);
    let sq = FunctionHandle::temporal(|t| t.max(0.0).powi(2)).with_time_breaks(vec![0.0]);
    let (mut e1, mut e2): (f64, f64) = (0.0, 0.0);
    for s in [0.25, 0.5, 0.75] {
        let p = KernelParams::normalized(1, s).map_err(|e| e.to_string())?;
        for t in [-1.0, 0.0, 1.0] {
            let d = marchaud(&et, t, &p, &QuadSpec::default()).map_err(|e| e.to_string())?;
            e1 = e1.max((d.value - t.exp()).abs() / t.exp());
        }
        let d = marchaud(&sq, 1.0, &p, &QuadSpec::default()).map_err(|e| e.to_string())?;
        let exact = gamma(3.0) / gamma(3.0 - s);
        e2 = e2.max((d.value - exact).abs() / exact);
    }
    check(e1 <= 1e-4 && e2 <= 1e-3, format!("e^t rel {e1:.2e} (tol 1e-4), t_+^2 rel {e2:.2e} (tol 1e-3)"))
}

fn dichotomy() -> Outcome {
    let clock = Instant::now();
    let p = KernelParams::normalized(1, 0.5).map_err(|e| e.to_string())?;
    let c0 = c0_constant(0.5, 1, NORM).map_err(|e| e.to_string())?;
    let at_zero = |alpha: f64| -> Result<Vec<f64>, String> {
        [2u32, 4, 8, 16]
            .iter()
            .map(|&j| {
                fractional_laplacian(&phi_family(j, alpha, 1.0), &[0.0], &p, &QuadSpec::default())
                    .map(|r| r.value)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let crit = at_zero(1.0)?;
    let low = at_zero(0.5)?;
    let e_crit = (crit[3] + c0).abs();
    let secs = clock.elapsed().as_secs_f64();
    check(
        e_crit <= 0.02 * c0 && low[3].abs() <= 1e-3 && secs <= 60.0,
        format!(
            "alpha=1: {:.5} vs -C0 = {:.5} (err {e_crit:.2e}, tol {:.2e}); alpha=0.5: {:.2e} (tol 1e-3); {secs:.2} s",
            crit[3],
            -c0,
            0.02 * c0,
            low[3]
        ),
    )
}

fn space_time_family() -> Outcome {
    let clock = Instant::now();
    let p = KernelParams::normalized(1, 0.5).map_err(|e| e.to_string())?;
    let w = w_family(16, 1.0, 0.5, 1, NORM).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (x, t) in [(0.0, 0.0), (1.0, 1.0), (-1.0, 0.5)] {
        let r = master_op(&w, &SpaceTimePoint::line(x, t), &p, &QuadSpec::default()).map_err(|e| e.to_string())?;
        worst = worst.max((r.value + 1.0).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    check(worst <= 5e-2 && secs <= 300.0, format!("max |value + 1| at j=16: {worst:.2e} (tol 5e-2); {secs:.2} s"))
}

fn defect() -> Outcome {
    let p = KernelParams::normalized(1, 0.5).map_err(|e| e.to_string())?;
    let sched = DefectSchedule::with_default_probes(1, vec![10.0, 20.0, 40.0], vec![32, 64, 128]);
    let fam = |j: u32| w_family(j, 1.0, 0.5, 1, NORM);
    let rep = defect_estimate(&fam, &FunctionHandle::zero(), &sched, &p, &QuadSpec::default())
        .map_err(|e| e.to_string())?;
    let (Some(b), Some(spread)) = (rep.b_estimate, rep.b_spread) else {
        return Err("limits did not settle".into());
    };
    check(
        (b - 1.0).abs() <= 5e-2 && spread <= 5e-2 && rep.monotone_ok && sched.probes.len() == 5,
        format!("b = {b:.5} (1 +- 5e-2), spread {spread:.2e} (tol 5e-2), monotone {}", rep.monotone_ok),
    )
}

fn decay() -> Outcome {
    let mut violations = 0;
    let mut points = 0;
    for n in 1..=3 {
        for s in [0.25, 0.5, 0.75] {
            let p = KernelParams::normalized(n, s).map_err(|e| e.to_string())?;
            let sw = decay_sweep(&p, &DecayGrid::check_default()).map_err(|e| e.to_string())?;
            violations += sw.violations;
            points += sw.points;
        }
    }
    check(violations == 0, format!("{violations} violations over {points} points (9 grids of 1e4)"))
}

fn partitions() -> Outcome {
    let mut bad = 0;
    let mut total = 0;
    let mut rng = seeded_rng(DEFAULT_SEED);
    for n in 1..=3 {
        for r in [1e2, 1e3, 1e4] {
            let mut x = vec![0.0; n];
            x[0] = r / 7.0;
            let one = partition_check_step1(&x, 0.25 * r * r, r, 100_000, &mut rng).map_err(|e| e.to_string())?;
            let two = partition_check_step2(n, 0.0, r, 100_000, &mut rng).map_err(|e| e.to_string())?;
            for rep in [one, two] {
                bad += rep.double_assigned + rep.unassigned;
                total += rep.samples;
            }
        }
    }
    check(bad == 0, format!("{bad} violations over {total} samples (1e5 per run)"))
}

fn ratio_envelopes() -> Outcome {
    let mut rng = seeded_rng(DEFAULT_SEED);
    let (c1, decreasing) = c1_schedule(&[0.0, 0.0], 0.0, &[1e2, 1e3, 1e4], 10_000, &mut rng).map_err(|e| e.to_string())?;
    let maxima: Vec<String> = c1.iter().map(|r| format!("{:.3e}", r.max_observed)).collect();
    let (c2, c3) = verify_ratio_c2_c3(&[1.0, 0.0], 0.0, 1e4, 10_000, &mut rng).map_err(|e| e.to_string())?;
    let p = KernelParams::normalized(2, 0.5).map_err(|e| e.to_string())?;
    let step2 = verify_ratio_step2(&p, 1.0, 1e4, 10_000, &mut rng).map_err(|e| e.to_string())?;
    let step2_ok = step2.iter().all(|r| r.pass);
    let consts: Vec<String> = step2.iter().map(|r| format!("{:?} c={:.3}", r.region, r.fitted_c)).collect();
    check(
        decreasing && c1.iter().all(|r| r.pass) && c2.pass && c3.pass && step2_ok,
        format!(
            "c1 maxima [{}] decreasing {decreasing}; c2 c={:.3} {}; c3 c={:.3} {}; step 2 [{}] {step2_ok}",
            maxima.join(", "),
            c2.fitted_c,
            c2.pass,
            c3.fitted_c,
            c3.pass,
            consts.join(", ")
        ),
    )
}

fn quadrature() -> Outcome {
    // Hermite exactness against the moments Gamma((k+1)/2)
    let mut gh_err: f64 = 0.0;
    for q in [5usize, 10, 20, 40] {
        let rule = gauss_hermite(q).map_err(|e| e.to_string())?;
        for k in 0..2 * q {
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * z.powi(k as i32)).sum();
            let scale: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| (w * z.powi(k as i32)).abs()).sum();
            let exact = if k % 2 == 1 { 0.0 } else { gamma((k as f64 + 1.0) / 2.0) };
            gh_err = gh_err.max((got - exact).abs() / scale);
        }
    }
    let mut refine_ratio: f64 = 0.0;
    for n in [1usize, 2] {
        let p = KernelParams::normalized(n, 0.5).map_err(|e| e.to_string())?;
        let mut x = vec![0.0; n];
        x[0] = 0.4;
        let at = SpaceTimePoint::new(x, 0.3);
        for smp in bundled(n) {
            let q = QuadSpec::default().with_horizon(smp.horizon);
            let a = master_op(&smp.u, &at, &p, &q).map_err(|e| e.to_string())?;
            let b = master_op(&smp.u, &at, &p, &q.refined()).map_err(|e| e.to_string())?;
            refine_ratio = refine_ratio.max((a.value - b.value).abs() / a.err_estimate);
        }
    }
    let p = KernelParams::normalized(1, 0.5).map_err(|e| e.to_string())?;
    let q = QuadSpec::default();
    let b = bundled(1);
    let pairs = [
        (b[0].u.clone(), b[1].u.clone()),
        (b[0].u.clone(), w_family(8, 1.0, 0.5, 1, NORM).map_err(|e| e.to_string())?),
    ];
    let mut decomp: f64 = 0.0;
    let at = SpaceTimePoint::line(0.5, 0.3);
    for (u, ui) in &pairs {
        let a = master_op(u, &at, &p, &q).map_err(|e| e.to_string())?;
        let c = master_op(ui, &at, &p, &q).map_err(|e| e.to_string())?;
        for r in [20.0, 50.0] {
            let d = difference_decomposition(u, ui, &at, r, &p, &q).map_err(|e| e.to_string())?;
            let tol = d.err_estimate + a.err_estimate + c.err_estimate;
            decomp = decomp.max((d.total() - (a.value - c.value)).abs() / tol);
        }
    }
    check(
        gh_err <= 1e-12 && refine_ratio < 4.0 && decomp <= 1.0,
        format!(
            "GH moment err {gh_err:.1e} (tol 1e-12); refinement max |diff|/err {refine_ratio:.2} (< 4); decomposition gap/err {decomp:.2} (<= 1)"
        ),
    )
}

fn heat_limit() -> Outcome {
    let p = KernelParams::normalized(1, 0.5).map_err(|e| e.to_string())?;
    let rep = heat_limit_check(&plane_wave(1.0, 1.0), &SpaceTimePoint::line(0.0, 0.0), &[0.9, 0.95, 0.99], &p, &far())
        .map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rep.entries.iter().map(|e| (e.value - rep.classical).abs()).collect();
    let dec = gaps.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = rep.entries.iter().map(|e| format!("s={}: {:.4}", e.s, e.value)).collect();
    check(
        dec && (rep.classical - 2.0).abs() < 1e-6,
        format!("{} vs classical {:.6}; gaps decreasing {dec}", shown.join(", "), rep.classical),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("symbol oracle", symbol_oracle),
        ("reduction identities", reductions),
        ("Marchaud exact values", marchaud_values),
        ("spatial dichotomy", dichotomy),
        ("space-time family reaches -1", space_time_family),
        ("convergence defect", defect),
        ("kernel decay", decay),
        ("partition exactness", partitions),
        ("ratio envelopes", ratio_envelopes),
        ("quadrature self-consistency", quadrature),
        ("heat-limit trend", heat_limit),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = clock.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
