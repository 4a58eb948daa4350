//! The master operator, its two reductions, the interior/exterior/tail split
//! and the comparison with the classical heat operator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::function::{
    Dependence, FunctionHandle, GrowthEnvelope, Scales, Smoothness, SupportBox,
};
use crate::kernel::{KernelParams, Normalization, SpaceTimePoint};
use crate::quadrature::{
    auto_horizon, build_segments, gauss_legendre, integrate_segments, integrate_segments_side, power_remainder,
    sigma_tail, time_plan, whole_space_difference, Horizon, MeshPlan, Piece, QuadResult,
    QuadSpec, Region, Spatial,
};
use crate::special::unit_sphere_measure;

/// Value of `(d/dt - Laplacian)^s u` at `at`.
pub fn master_op(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<QuadResult> {
    crate::quadrature::integrate_difference(u, at, p, q)
}

/// Contribution of each time panel `(a_lo, a_hi, value)` to the master
/// operator, innermost first. The a -> 0 remainder and the far tail are not
/// included.
pub fn master_op_panels(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<Vec<(f64, f64, f64)>> {
    Ok(whole_space_difference(u, at, p.n, p.s, p.heat_factor(), q)?.panels)
}

/// How to evaluate the fractional Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlapRoute {
    /// Radial singular quadrature around `x`.
    Direct,
    /// Master operator of the time-constant extension.
    Master,
}

/// `(-Laplacian)^s u(x)` by the direct radial route.
pub fn fractional_laplacian(
    u: &FunctionHandle,
    x: &[f64],
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<QuadResult> {
    fractional_laplacian_via(u, x, p, q, FlapRoute::Direct)
}

pub fn fractional_laplacian_via(
    u: &FunctionHandle,
    x: &[f64],
    p: &KernelParams,
    q: &QuadSpec,
    route: FlapRoute,
) -> Result<QuadResult> {
    if u.dependence.uses_time() {
        return Err(Error::Domain("the fractional Laplacian needs a function of x only".into()));
    }
    if x.len() != p.n {
        return Err(Error::Domain(format!("point has {} coordinates, expected {}", x.len(), p.n)));
    }
    match route {
        FlapRoute::Direct => flap_direct(u, x, p, q),
        FlapRoute::Master => {
            let norm = KernelParams::new(p.n, p.s, Normalization::Normalized)?;
            let r = master_op(u, &SpaceTimePoint::new(x.to_vec(), 0.0), &norm, q)?;
            let k = p.flap_const / norm.flap_const;
            Ok(QuadResult { value: k * r.value, err_estimate: k * r.err_estimate, ..r })
        }
    }
}

/// Unit directions covering half the sphere, with weights summing to the
/// full sphere measure; used with symmetric pairs `x +- r theta`.
fn half_sphere(n: usize, r: f64, ell: f64, gl_order: usize) -> Vec<(Vec<f64>, f64)> {
    match n {
        1 => vec![(vec![1.0], 2.0)],
        2 => {
            let m = ((6.0 * PI * r / ell).ceil() as usize).clamp(16, 8192);
            let w = 2.0 * PI / m as f64;
            (0..m)
                .map(|k| {
                    let th = PI * k as f64 / m as f64;
                    (vec![th.cos(), th.sin()], w)
                })
                .collect()
        }
        _ => {
            let panels = ((PI * r / (2.0 * ell)).ceil() as usize).clamp(1, 256);
            let gl = gauss_legendre(gl_order);
            let m = ((6.0 * PI * r / ell).ceil() as usize).clamp(16, 2048);
            let dph = 2.0 * PI / m as f64;
            let step = 1.0 / panels as f64;
            let mut out = Vec::new();
            for k in 0..panels {
                let mid = (k as f64 + 0.5) * step;
                for (z, wz) in gl.nodes.iter().zip(&gl.weights) {
                    let ct = mid + 0.5 * step * z;
                    let st = (1.0 - ct * ct).max(0.0).sqrt();
                    for j in 0..m {
                        let ph = dph * j as f64;
                        out.push((vec![st * ph.cos(), st * ph.sin(), ct], 2.0 * 0.5 * step * wz * dph));
                    }
                }
            }
            out
        }
    }
}

fn flap_direct(
    u: &FunctionHandle,
    x: &[f64],
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<QuadResult> {
    q.validate()?;
    let n = p.n;
    let s = p.s;
    let mut evals = 0usize;
    let mut eval = |y: &[f64]| -> Result<f64> {
        evals += 1;
        let v = u.eval(y, 0.0);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric { message: format!("u({y:?}) = {v}"), location: 0.0 })
        }
    };
    let u0 = eval(x)?;
    if u.dependence == Dependence::Constant {
        return Ok(QuadResult { value: 0.0, err_estimate: 0.0, truncation_flag: false, nodes_used: 1 });
    }
    let sphere = unit_sphere_measure(n);
    let ell = u.scales.space.min(1e6);
    let (r_max, bounded) = match &u.support {
        Some(sup) if sup.radius.is_finite() => (sup.distance_to_center(x) + sup.radius, true),
        _ => (if n == 1 { 1e4 * ell } else { 200.0 * ell }, false),
    };
    let r_max = r_max.max(ell);
    let r_min = q.a_min.sqrt() * ell.min(1.0);
    let plan = MeshPlan {
        lower: r_min,
        singular: true,
        upper: r_max,
        ratio: q.effective_ratio(),
        breaks: Vec::new(),
        windows: vec![(0.0, r_max, 2.0 * ell)],
    };
    // work in a = r^2 so the integrand weight becomes a^{-1-s}
    let segs: Vec<(f64, f64)> = build_segments(&plan).into_iter().map(|(a, b)| (a * a, b * b)).collect();
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut spherical_diff = |a: f64| -> Result<f64> {
        let r = a.sqrt();
        let mut acc = 0.0;
        for (dir, w) in half_sphere(n, r, ell, q.gl_order) {
            for i in 0..n {
                y[i] = x[i] + r * dir[i];
                z[i] = x[i] - r * dir[i];
            }
            acc += w * (u0 - 0.5 * (eval(&y)? + eval(&z)?));
        }
        Ok(acc)
    };
    let body = integrate_segments(&segs, s, q, &mut spherical_diff)?;
    let noise = 8.0 * f64::EPSILON * sphere * (u0.abs() + body.max_abs_f);
    let rem = power_remainder(&body.innermost, segs[0].0, s, noise, u.smoothness == Smoothness::Smooth);
    let tail = sphere * u0 * r_max.powf(-2.0 * s) / (2.0 * s);
    let mut err = 0.5 * (body.err + rem.err);
    if !bounded {
        let a = r_max * r_max;
        let outer = spherical_diff(a)?;
        let avg = u0 - outer / sphere;
        err += sphere * avg.abs() * r_max.powf(-2.0 * s) / (2.0 * s);
    }
    let c = p.flap_const;
    Ok(QuadResult {
        value: c * (0.5 * (body.value + rem.value) + tail),
        err_estimate: c * err,
        truncation_flag: !bounded,
        nodes_used: evals,
    })
}

/// Marchaud derivative `C_s int_0^infinity (u(t) - u(t - a)) a^{-1-s} da`.
pub fn marchaud(u: &FunctionHandle, t: f64, p: &KernelParams, q: &QuadSpec) -> Result<QuadResult> {
    if u.dependence.uses_space() {
        return Err(Error::Domain("the Marchaud derivative needs a function of t only".into()));
    }
    let at = SpaceTimePoint::new(vec![0.0; p.n], t);
    Ok(whole_space_difference(u, &at, p.n, p.s, p.marchaud_const, q)?.result)
}

/// The three parts of the difference integral split at the cylinder `Q_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    /// Interior part, `v = u - u_i` over `Q_R`.
    #[serde(rename = "I")]
    pub i: f64,
    /// Exterior part with `v(x,t)` against `u(y,tau)`.
    #[serde(rename = "E")]
    pub e: f64,
    /// Tail functional of `u_i`.
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub err_estimate: f64,
    /// Kernel mass outside `Q_R`; decays like `R^{-2s}`.
    pub exterior_mass: f64,
}

impl DecompositionResult {
    pub fn total(&self) -> f64 {
        self.i + self.e + self.f
    }
}

pub(crate) fn check_cylinder_precondition(at: &SpaceTimePoint, r: f64) -> Result<()> {
    let rx = at.x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let need = 3.0 * at.t.abs().sqrt().max(rx);
    if !(r > need) {
        return Err(Error::Domain(format!(
            "R = {r} must exceed 3 max(sqrt|t|, |x|) = {need}"
        )));
    }
    Ok(())
}

/// Exterior integral `int_{outside Q_R} u(y,tau) M(x-y, t-tau)` and, on
/// request, the kernel mass of the exterior.
pub(crate) fn exterior_parts(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    r: f64,
    p: &KernelParams,
    q: &QuadSpec,
    with_mass: bool,
) -> Result<(QuadResult, Piece)> {
    q.validate()?;
    check_cylinder_precondition(at, r)?;
    let sp = Spatial::new(u, &at.x, p.n, q)?;
    let s = p.s;
    let t = at.t;
    let w = p.heat_factor();
    let a_split = t + r * r;
    let rx = at.x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let a_lo = ((r - rx) / (2.0 * 6.5)).powi(2).min(0.5 * a_split);

    let segs1 = build_segments(&time_plan(u, t, a_lo, false, a_split, q, &[]));
    let side = || sp.last_err();
    let mut f1 = |a: f64| sp.average(Region::Exterior(r), a, t - a);
    let part1 = integrate_segments_side(&segs1, s, q, &mut f1, Some(&side))?;

    let mut value = part1.value;
    let mut err = part1.err;
    let mut truncated = false;
    let mut h = |a: f64| sp.average(Region::Whole, a, t - a);
    match q.horizon {
        Horizon::Auto => {
            let big_t = auto_horizon(u, &at.x, t, q)?.max(2.0 * a_split);
            let segs2 = build_segments(&time_plan(u, t, a_split, false, big_t, q, &[]));
            let part2 = integrate_segments_side(&segs2, s, q, &mut h, Some(&side))?;
            let tail = sigma_tail(big_t, s, q, &mut h, Some(&side))?;
            value += part2.value + tail.value;
            err += part2.err + tail.err;
        }
        Horizon::Finite(hz) => {
            let big_t = hz.max(2.0 * a_split);
            let segs2 = build_segments(&time_plan(u, t, a_split, false, big_t, q, &[]));
            let part2 = integrate_segments_side(&segs2, s, q, &mut h, Some(&side))?;
            value += part2.value;
            err += part2.err;
            let past_empty = matches!(&u.support, Some(sup) if sup.time.0 >= t - big_t);
            if !past_empty {
                err += h(big_t)?.abs() * big_t.powf(-s) / s;
                truncated = true;
            }
        }
    }
    let f = QuadResult {
        value: w * value,
        err_estimate: w * err,
        truncation_flag: truncated,
        nodes_used: sp.evals(),
    };
    let mass = if with_mass {
        let mut m = |a: f64| Ok(sp.mass(Region::Exterior(r), a));
        let m1 = integrate_segments(&segs1, s, q, &mut m)?;
        Piece { value: w * (m1.value + a_split.powf(-s) / s), err: w * m1.err }
    } else {
        Piece::default()
    };
    Ok((f, mass))
}

/// Split of `master(u) - master(u_i)` at `(x, t)` into the interior part `I`,
/// the exterior part `E` and the tail `F` of `u_i`.
pub fn difference_decomposition(
    u: &FunctionHandle,
    ui: &FunctionHandle,
    at: &SpaceTimePoint,
    r: f64,
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<DecompositionResult> {
    check_cylinder_precondition(at, r)?;
    q.validate()?;
    let v = u.sub(ui);
    let s = p.s;
    let t = at.t;
    let w = p.heat_factor();
    let a_split = t + r * r;

    let sp = Spatial::new(&v, &at.x, p.n, q)?;
    let v0 = sp.eval_at(&at.x, t)?;
    let segs = build_segments(&time_plan(&v, t, q.a_min, true, a_split, q, &[]));
    let mut d = |a: f64| sp.difference(Region::Ball(r), a, t - a, v0);
    let side = || sp.last_err();
    let body = integrate_segments_side(&segs, s, q, &mut d, Some(&side))?;
    let noise = 8.0 * f64::EPSILON * (v0.abs() + body.max_abs_f);
    let rem = power_remainder(&body.innermost, segs[0].0, s, noise, v.smoothness == Smoothness::Smooth);
    let i_val = w * (body.value + rem.value);
    let i_err = w * (body.err + rem.err);

    let (fu, mass) = exterior_parts(u, at, r, p, q, true)?;
    let (fi, _) = exterior_parts(ui, at, r, p, q, false)?;
    let e_val = v0 * mass.value - fu.value;
    let e_err = v0.abs() * mass.err + fu.err_estimate;
    Ok(DecompositionResult {
        i: i_val,
        e: e_val,
        f: fi.value,
        r,
        err_estimate: i_err + e_err + fi.err_estimate,
        exterior_mass: mass.value,
    })
}

/// One row of [`heat_limit_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatLimitEntry {
    pub s: f64,
    pub value: f64,
    pub err_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatLimitReport {
    pub entries: Vec<HeatLimitEntry>,
    /// `(d/dt - Laplacian) u` by central differences with step `1e-4`.
    pub classical: f64,
}

/// Master operator values for each order in `s_list`, against the classical
/// heat operator.
pub fn heat_limit_check(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    s_list: &[f64],
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<HeatLimitReport> {
    let mut entries = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let ps = KernelParams::new(p.n, s, p.normalization)?;
        let r = master_op(u, at, &ps, q)?;
        entries.push(HeatLimitEntry { s, value: r.value, err_estimate: r.err_estimate });
    }
    let h = 1e-4;
    let x = &at.x;
    let u0 = u.eval_checked(x, at.t)?;
    let dt = (u.eval_checked(x, at.t + h)? - u.eval_checked(x, at.t - h)?) / (2.0 * h);
    let mut lap = 0.0;
    let mut y = x.clone();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = u.eval_checked(&y, at.t)?;
        y[i] = x[i] - h;
        let dn = u.eval_checked(&y, at.t)?;
        y[i] = x[i];
        lap += (up - 2.0 * u0 + dn) / (h * h);
    }
    Ok(HeatLimitReport { entries, classical: dt - lap })
}
