//! The tail functional `F(x, t, R)` and the convergence defect `b`.
//!
//! For a sequence `u_j` whose operator values converge, `F_j(x, t, R)` is the
//! integral of `u_j` against the kernel over the past exterior of `Q_R`. The
//! defect is `b = lim_R lim_j F_j(x, t, R)`, taken in that order, and is the
//! amount by which `lim_j master(u_j)` falls short of `master(lim_j u_j)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::function::FunctionHandle;
use crate::kernel::{KernelParams, SpaceTimePoint};
use crate::operators::{check_cylinder_precondition, exterior_parts, master_op};
use crate::quadrature::{gauss_legendre, QuadResult, QuadSpec};

/// `int_{(R^n x (-inf, t)) \ Q_R} u(y, tau) M(x - y, t - tau) dy dtau`.
pub fn tail_functional(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    r: f64,
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<QuadResult> {
    if u.is_zero() {
        check_cylinder_precondition(at, r)?;
        return Ok(QuadResult::zero());
    }
    Ok(exterior_parts(u, at, r, p, q, false)?.0)
}

/// One evaluation of the tail functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSample {
    pub j: u32,
    #[serde(rename = "R")]
    pub r: f64,
    pub at: SpaceTimePoint,
    #[serde(rename = "F")]
    pub f_value: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// Ordered by probe, then `R`, then `j`.
    pub samples: Vec<DefectSample>,
    /// Mean of the per-probe defects; absent when a limit did not settle.
    pub b_estimate: Option<f64>,
    /// Largest minus smallest per-probe defect.
    pub b_spread: Option<f64>,
    pub b_per_probe: Vec<Option<f64>>,
    /// Every inner (over `j`) and outer (over `R`) limit settled within `tol`.
    pub converged: bool,
    /// `F` is non-increasing in `R` for every probe and `j`, up to the
    /// combined error estimates.
    pub monotone_ok: bool,
    /// `max(0, max over probes of master(u_J) - master(u))` with `J` the
    /// largest index: a lower bound for the constant `M` in the liminf
    /// hypothesis.
    #[serde(rename = "liminf_bound_M")]
    pub liminf_bound_m: f64,
    /// Smallest `R` from which `sup` of `F` over the probes in `Q_{R/2}` stays
    /// below `M + 1` for the rest of the schedule.
    #[serde(rename = "N_threshold")]
    pub n_threshold: Option<f64>,
    /// `master(u) - master(u_J)` per probe.
    pub operator_gap: Vec<f64>,
}

/// Settings of [`defect_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSchedule {
    pub probes: Vec<SpaceTimePoint>,
    pub r_schedule: Vec<f64>,
    pub j_schedule: Vec<u32>,
    /// Successive iterates closer than this count as converged.
    pub tol: f64,
}

impl DefectSchedule {
    /// Five probes spread through `Q_{R/3}` of the smallest `R`, so that
    /// every probe is admissible for the whole `R` schedule.
    pub fn with_default_probes(n: usize, r_schedule: Vec<f64>, j_schedule: Vec<u32>) -> Self {
        let r0 = r_schedule.iter().copied().fold(f64::INFINITY, f64::min);
        let k = if r0.is_finite() { (r0 / 10.0).min(1.0) } else { 1.0 };
        let pt = |x: f64, t: f64| {
            let mut v = vec![0.0; n];
            v[0] = x * k;
            SpaceTimePoint::new(v, t * k * k)
        };
        DefectSchedule {
            probes: vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(-1.0, 0.5), pt(2.0, -1.0), pt(-2.0, 2.0)],
            r_schedule,
            j_schedule,
            tol: 5e-3,
        }
    }
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Estimate the convergence defect of `family(j)` relative to `limit_u`.
pub fn defect_estimate(
    family: &(dyn Fn(u32) -> Result<FunctionHandle> + Sync),
    limit_u: &FunctionHandle,
    sched: &DefectSchedule,
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<DefectReport> {
    if sched.r_schedule.is_empty() || sched.j_schedule.is_empty() || sched.probes.is_empty() {
        return domain("defect estimation needs probes and non-empty R and j schedules");
    }
    if !strictly_increasing(&sched.r_schedule) || !strictly_increasing(&sched.j_schedule) {
        return domain("R and j schedules must be strictly increasing");
    }
    if !(sched.tol > 0.0) {
        return domain("tolerance must be positive");
    }
    let r0 = sched.r_schedule[0];
    for pr in &sched.probes {
        if pr.x.len() != p.n {
            return domain(format!("probe has {} coordinates, expected {}", pr.x.len(), p.n));
        }
        check_cylinder_precondition(pr, r0).map_err(|_| {
            crate::error::Error::Domain(format!(
                "probe (x = {:?}, t = {}) must lie in Q_{{R/3}} for every R; smallest R is {r0}",
                pr.x, pr.t
            ))
        })?;
    }

    let members: Vec<FunctionHandle> =
        sched.j_schedule.iter().map(|&j| family(j)).collect::<Result<_>>()?;
    let (np, nr, nj) = (sched.probes.len(), sched.r_schedule.len(), sched.j_schedule.len());
    let grid: Vec<(usize, usize, usize)> = (0..np)
        .flat_map(|a| (0..nr).flat_map(move |b| (0..nj).map(move |c| (a, b, c))))
        .collect();
    let results: Vec<QuadResult> = grid
        .par_iter()
        .map(|&(a, b, c)| tail_functional(&members[c], &sched.probes[a], sched.r_schedule[b], p, q))
        .collect::<Result<_>>()?;
    let at = |a: usize, b: usize, c: usize| &results[(a * nr + b) * nj + c];

    let samples = grid
        .iter()
        .zip(&results)
        .map(|(&(a, b, c), res)| DefectSample {
            j: sched.j_schedule[c],
            r: sched.r_schedule[b],
            at: sched.probes[a].clone(),
            f_value: res.value,
            err: res.err_estimate,
        })
        .collect();

    let mut monotone_ok = true;
    for a in 0..np {
        for c in 0..nj {
            for b in 1..nr {
                let (prev, cur) = (at(a, b - 1, c), at(a, b, c));
                let slack = prev.err_estimate + cur.err_estimate + 1e-12 * prev.value.abs();
                if cur.value > prev.value + slack {
                    monotone_ok = false;
                }
            }
        }
    }

    let mut converged = true;
    let mut b_per_probe = Vec::with_capacity(np);
    for a in 0..np {
        let mut inner = Vec::with_capacity(nr);
        for b in 0..nr {
            let last = at(a, b, nj - 1).value;
            if nj > 1 && (last - at(a, b, nj - 2).value).abs() > sched.tol {
                converged = false;
            }
            inner.push(last);
        }
        let outer_ok = nr < 2 || (inner[nr - 1] - inner[nr - 2]).abs() < sched.tol;
        converged &= outer_ok;
        b_per_probe.push(Some(inner[nr - 1].max(0.0)));
    }
    if !converged {
        b_per_probe.iter_mut().for_each(|b| *b = None);
    }
    let (b_estimate, b_spread) = if converged {
        let vals: Vec<f64> = b_per_probe.iter().flatten().copied().collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        (Some(mean), Some(hi - lo))
    } else {
        (None, None)
    };

    let last = &members[nj - 1];
    let gaps: Vec<f64> = sched
        .probes
        .par_iter()
        .map(|pr| Ok(master_op(limit_u, pr, p, q)?.value - master_op(last, pr, p, q)?.value))
        .collect::<Result<_>>()?;
    let liminf_bound_m = gaps.iter().copied().fold(0.0, f64::max);

    let mut n_threshold = None;
    for b in (0..nr).rev() {
        let r = sched.r_schedule[b];
        let sup = (0..np)
            .filter(|&a| within(&sched.probes[a], r / 2.0))
            .map(|a| at(a, b, nj - 1).value)
            .fold(0.0, f64::max);
        if sup <= liminf_bound_m + 1.0 {
            n_threshold = Some(r);
        } else {
            break;
        }
    }

    Ok(DefectReport {
        samples,
        b_estimate,
        b_spread,
        b_per_probe,
        converged,
        monotone_ok,
        liminf_bound_m,
        n_threshold,
        operator_gap: gaps,
    })
}

fn within(pt: &SpaceTimePoint, r: f64) -> bool {
    let rx = pt.x.iter().map(|c| c * c).sum::<f64>().sqrt();
    rx <= r && pt.t.abs() <= r * r
}

/// Shell increments of the two weighted integrals that decide membership in
/// the slowly increasing and the classical function spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostic {
    pub radii: Vec<f64>,
    /// `int_{shell} int_R |u| / (1 + |x|^{n+2+2s} + |t|^{n/2+1+s})`.
    pub l2ss_tail: Vec<f64>,
    /// `int_{shell} int_{-inf}^0 |u(x,tau)| e^{-|x|^2/(4|tau|)} / (1 + |tau|^{n/2+1+s})`.
    pub l_tail: Vec<f64>,
}

/// Integrals of `|u|` against the two weights over the spatial shells
/// `r_{k-1} < |x| <= r_k` (the first shell is the ball `|x| <= r_0`), each
/// over the whole relevant time range. Decreasing increments point to
/// membership; nothing is concluded from finitely many shells.
pub fn weight_diagnostic(u: &FunctionHandle, radii: &[f64], p: &KernelParams) -> Result<WeightDiagnostic> {
    if radii.is_empty() || !(radii[0] > 0.0) || !strictly_increasing(radii) {
        return domain("truncation radii must be positive and strictly increasing");
    }
    if p.n > 3 {
        return Err(crate::error::Error::Unsupported(format!("dimension {} > 3", p.n)));
    }
    let pe = p.time_exponent();
    let n = p.n as f64;
    let mut l2ss = Vec::with_capacity(radii.len());
    let mut l = Vec::with_capacity(radii.len());
    let mut lo = 0.0;
    for &hi in radii {
        let w_st = |x2: f64, t: f64| 1.0 / (1.0 + x2.powf(0.5 * (n + 2.0 + 2.0 * p.s)) + t.abs().powf(pe));
        let a = shell_integral(p.n, lo, hi, |y, x2| {
            let scale = (1.0 + x2.powf(pe)).powf(1.0 / pe);
            let fwd = time_tail(pe, scale, |t| Ok(u.eval_checked(y, t)?.abs() * w_st(x2, t)))?;
            let bwd = time_tail(pe, scale, |t| Ok(u.eval_checked(y, -t)?.abs() * w_st(x2, t)))?;
            Ok(fwd + bwd)
        })?;
        let b = shell_integral(p.n, lo, hi, |y, x2| {
            time_tail(pe, 1.0 + x2, |tau| {
                if tau <= 0.0 {
                    return Ok(0.0);
                }
                let g = (-x2 / (4.0 * tau)).exp();
                if g == 0.0 {
                    return Ok(0.0);
                }
                Ok(u.eval_checked(y, -tau)?.abs() * g / (1.0 + tau.powf(pe)))
            })
        })?;
        l2ss.push(a);
        l.push(b);
        lo = hi;
    }
    Ok(WeightDiagnostic { radii: radii.to_vec(), l2ss_tail: l2ss, l_tail: l })
}

/// `int_0^inf f(t) dt` for `f` decaying like `t^{-pe}`, `pe > 1`, through
/// `t = scale (v^{-1/(pe-1)} - 1)`, which turns that decay into a bounded
/// integrand on `(0, 1]`.
fn time_tail(pe: f64, scale: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let k = 1.0 / (pe - 1.0);
    let rule = gauss_legendre(8);
    let panels = 24;
    let mut acc = 0.0;
    for i in 0..panels {
        // panels graded towards v = 0, where t is large
        let v0 = (i as f64 / panels as f64).powi(3);
        let v1 = ((i + 1) as f64 / panels as f64).powi(3);
        let half = 0.5 * (v1 - v0);
        let mid = 0.5 * (v1 + v0);
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let v = mid + half * z;
            let t = scale * (v.powf(-k) - 1.0);
            let jac = scale * k * v.powf(-k - 1.0);
            let val = f(t)?;
            if val != 0.0 {
                acc += w * half * val * jac;
            }
        }
    }
    Ok(acc)
}

/// `int_{lo < |x| <= hi} g(x, |x|^2) dx` in polar coordinates about the origin.
fn shell_integral(
    n: usize,
    lo: f64,
    hi: f64,
    mut g: impl FnMut(&[f64], f64) -> Result<f64>,
) -> Result<f64> {
    let rule = gauss_legendre(8);
    let panels = 16;
    let mut acc = 0.0;
    let (ang, cos_nodes) = match n {
        1 => (0, 0),
        2 => (64, 0),
        _ => (32, 16),
    };
    let cos_rule = gauss_legendre(cos_nodes.max(1));
    for i in 0..panels {
        let r0 = lo + (hi - lo) * i as f64 / panels as f64;
        let r1 = lo + (hi - lo) * (i + 1) as f64 / panels as f64;
        let half = 0.5 * (r1 - r0);
        let mid = 0.5 * (r1 + r0);
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let r = mid + half * z;
            let wr = w * half;
            let x2 = r * r;
            match n {
                1 => acc += wr * (g(&[r], x2)? + g(&[-r], x2)?),
                2 => {
                    let mut s = 0.0;
                    for k in 0..ang {
                        let th = 2.0 * PI * k as f64 / ang as f64;
                        s += g(&[r * th.cos(), r * th.sin()], x2)?;
                    }
                    acc += wr * r * s * 2.0 * PI / ang as f64;
                }
                _ => {
                    let mut s = 0.0;
                    for (c, wc) in cos_rule.nodes.iter().zip(&cos_rule.weights) {
                        let sn = (1.0 - c * c).sqrt();
                        for k in 0..ang {
                            let ph = 2.0 * PI * k as f64 / ang as f64;
                            s += wc * g(&[r * sn * ph.cos(), r * sn * ph.sin(), r * c], x2)?;
                        }
                    }
                    acc += wr * r * r * s * 2.0 * PI / ang as f64;
                }
            }
        }
    }
    Ok(acc)
}
