//! Time integration of `a^{-1-s} D(a)` on graded panels, the power-law
//! remainder at `a -> 0` and the mapped tail at `a -> infinity`.

use crate::error::{Error, Result};
use crate::function::{FunctionHandle, Smoothness};
use crate::kernel::{KernelParams, SpaceTimePoint};

use super::mesh::{build_segments, MeshPlan};
use super::rules::gauss_legendre;
use super::spatial::{Region, Spatial};
use super::{Horizon, QuadResult, QuadSpec};

/// A partial integral with its error estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Piece {
    pub value: f64,
    pub err: f64,
}

/// Result of integrating over a segment list.
#[derive(Debug, Clone, Default)]
pub(crate) struct SegmentOutcome {
    pub value: f64,
    pub err: f64,
    /// `(a, f(a))` at the Gauss nodes of the lowest segment, ascending.
    pub innermost: Vec<(f64, f64)>,
    /// `(lo, hi, contribution)` per segment.
    pub panels: Vec<(f64, f64, f64)>,
    pub max_abs_f: f64,
}

/// Optional read-out of the spatial error made by the last integrand call.
pub(crate) type SideErr<'a> = Option<&'a dyn Fn() -> f64>;

/// Panel value, time-rule error and propagated spatial error.
#[derive(Debug, Clone, Copy)]
struct PanelVal {
    v: f64,
    e: f64,
    se: f64,
}

fn gl_panel(
    lo: f64,
    hi: f64,
    s: f64,
    order: usize,
    f: &mut dyn FnMut(f64) -> Result<f64>,
    side: SideErr<'_>,
    samples: Option<&mut Vec<(f64, f64)>>,
) -> Result<PanelVal> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut sum = |ord: usize, keep: Option<&mut Vec<(f64, f64)>>| -> Result<(f64, f64)> {
        let rule = gauss_legendre(ord);
        let mut acc = 0.0;
        let mut acc_err = 0.0;
        let mut kept = Vec::new();
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let a = mid + half * z;
            let v = f(a)?;
            if !v.is_finite() {
                return Err(Error::Numeric { message: format!("integrand is {v}"), location: a });
            }
            kept.push((a, v));
            let wa = w * a.powf(-1.0 - s);
            acc += wa * v;
            if let Some(g) = side {
                acc_err += wa * g();
            }
        }
        if let Some(k) = keep {
            *k = kept;
        }
        Ok((acc * half, acc_err * half))
    };
    let (hi_val, se) = sum(order, samples)?;
    let (lo_val, _) = sum(order - 2, None)?;
    Ok(PanelVal { v: hi_val, e: (hi_val - lo_val).abs(), se })
}

/// `int a^{-1-s} f(a) da` over consecutive segments with Gauss-Legendre of
/// order `gl_order`, error from the order `gl_order - 2` companion. Segments
/// whose error is large against the running total are bisected.
pub(crate) fn integrate_segments(
    segs: &[(f64, f64)],
    s: f64,
    spec: &QuadSpec,
    f: &mut dyn FnMut(f64) -> Result<f64>,
) -> Result<SegmentOutcome> {
    integrate_segments_side(segs, s, spec, f, None)
}

/// As [`integrate_segments`], adding the spatial error reported through
/// `side` to the error. It plays no part in the bisection decisions.
pub(crate) fn integrate_segments_side(
    segs: &[(f64, f64)],
    s: f64,
    spec: &QuadSpec,
    f: &mut dyn FnMut(f64) -> Result<f64>,
    side: SideErr<'_>,
) -> Result<SegmentOutcome> {
    let mut out = SegmentOutcome::default();
    if segs.is_empty() {
        return Ok(out);
    }
    let q = spec.gl_order;
    let mut first: Vec<(f64, f64, PanelVal)> = Vec::with_capacity(segs.len());
    for (i, &(lo, hi)) in segs.iter().enumerate() {
        let keep = if i == 0 { Some(&mut out.innermost) } else { None };
        first.push((lo, hi, gl_panel(lo, hi, s, q, f, side, keep)?));
    }
    let scale: f64 = first.iter().map(|p| p.2.v.abs()).sum::<f64>().max(1e-300);
    let target = spec.rel_tol * scale / (first.len() as f64).sqrt();
    for (i, (lo, hi, pv)) in first.into_iter().enumerate() {
        let pv = if i > 0 && pv.e > target { refine(lo, hi, s, q, target, 6, f, side)? } else { pv };
        out.value += pv.v;
        out.err += pv.e + pv.se;
        out.panels.push((lo, hi, pv.v));
    }
    out.max_abs_f = out.innermost.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    lo: f64,
    hi: f64,
    s: f64,
    q: usize,
    target: f64,
    depth: usize,
    f: &mut dyn FnMut(f64) -> Result<f64>,
    side: SideErr<'_>,
) -> Result<PanelVal> {
    let mid = 0.5 * (lo + hi);
    let p1 = gl_panel(lo, mid, s, q, f, side, None)?;
    let p2 = gl_panel(mid, hi, s, q, f, side, None)?;
    let p1 = if depth > 0 && p1.e > 0.5 * target {
        refine(lo, mid, s, q, 0.5 * target, depth - 1, f, side)?
    } else {
        p1
    };
    let p2 = if depth > 0 && p2.e > 0.5 * target {
        refine(mid, hi, s, q, 0.5 * target, depth - 1, f, side)?
    } else {
        p2
    };
    Ok(PanelVal { v: p1.v + p2.v, e: p1.e + p2.e, se: p1.se + p2.se })
}

/// `int_0^{a_last} a^{-1-s} f(a) da` from the two smallest samples.
///
/// Smooth integrands behave like `K a` near 0 (the even rule kills the odd
/// moments), so the linear model is used and the spread of the two slope
/// estimates goes into the error. Otherwise a power law `K a^theta` is fitted
/// and its difference with the linear model is the error. An accumulated
/// rounding term is always added.
pub(crate) fn power_remainder(
    samples: &[(f64, f64)],
    a_last: f64,
    s: f64,
    noise: f64,
    smooth: bool,
) -> Piece {
    let rounding = noise * a_last.powf(-s) / s;
    if samples.len() < 2 {
        return Piece { value: 0.0, err: rounding };
    }
    let (a1, f1) = samples[0];
    let (a2, f2) = samples[1];
    if f1 == 0.0 && f2 == 0.0 {
        return Piece { value: 0.0, err: rounding };
    }
    let lin = |k: f64| k * a_last.powf(1.0 - s) / (1.0 - s);
    let linear = lin(f1 / a1);
    if smooth {
        return Piece { value: linear, err: (lin(f2 / a2) - linear).abs() + rounding };
    }
    if f1 * f2 <= 0.0 {
        return Piece { value: linear, err: linear.abs() + rounding };
    }
    let theta = ((f2 / f1).ln() / (a2 / a1).ln()).clamp(s + 1e-3, 3.0);
    let k = f1 / a1.powf(theta);
    let value = k * a_last.powf(theta - s) / (theta - s);
    Piece { value, err: (value - linear).abs() + rounding }
}

/// `int_T^infinity a^{-1-s} h(a) da` through `a = T sigma^{-1/s}`, which
/// turns it into `(T^{-s}/s) int_0^1 h(T sigma^{-1/s}) d sigma`.
///
/// Fails with an integrability error when per-decade contributions in sigma
/// stop decreasing, i.e. when `h` grows at least like `a^s`.
pub(crate) fn sigma_tail(
    big_t: f64,
    s: f64,
    spec: &QuadSpec,
    h: &mut dyn FnMut(f64) -> Result<f64>,
    side: SideErr<'_>,
) -> Result<Piece> {
    let sigma_min = 1e-16f64.max((big_t / 1e300).powf(s));
    let plan = MeshPlan {
        lower: sigma_min,
        singular: false,
        upper: 1.0,
        ratio: spec.effective_ratio(),
        breaks: (1..16).map(|k| 10f64.powi(-k)).collect(),
        windows: Vec::new(),
    };
    let segs = build_segments(&plan);
    let map = |sig: f64| big_t * sig.powf(-1.0 / s);
    let mut eval = |sig: f64| -> Result<f64> {
        let a = map(sig);
        let v = h(a);
        match v {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(Error::Integrability(format!(
                "integrand is {v} at a = {a:e}; the function grows too fast into the past"
            ))),
            Err(Error::Numeric { message, .. }) => Err(Error::Integrability(format!(
                "{message} at a = {a:e}; the function grows too fast into the past"
            ))),
            Err(e) => Err(e),
        }
    };
    let rule_hi = gauss_legendre(spec.gl_order);
    let rule_lo = gauss_legendre(spec.gl_order - 2);
    let mut decades: Vec<f64> = Vec::new();
    let (mut total, mut err) = (0.0, 0.0);
    for &(lo, hi) in segs.iter().rev() {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut v_hi = 0.0;
        let mut se = 0.0;
        for (z, w) in rule_hi.nodes.iter().zip(&rule_hi.weights) {
            v_hi += w * eval(mid + half * z)?;
            if let Some(g) = side {
                se += w * g();
            }
        }
        let mut v_lo = 0.0;
        for (z, w) in rule_lo.nodes.iter().zip(&rule_lo.weights) {
            v_lo += w * eval(mid + half * z)?;
        }
        v_hi *= half;
        v_lo *= half;
        total += v_hi;
        err += (v_hi - v_lo).abs() + half * se;
        let k = (-mid.log10()).floor().max(0.0) as usize;
        if decades.len() <= k {
            decades.resize(k + 1, 0.0);
        }
        decades[k] += v_hi.abs();
    }
    let sum_abs: f64 = decades.iter().sum();
    let m = decades.len();
    for k in m.saturating_sub(3)..m {
        if k == 0 {
            continue;
        }
        if decades[k] > decades[k - 1] * (1.0 + 1e-9) && decades[k] > 1e-13 * sum_abs {
            return Err(Error::Integrability(format!(
                "tail contributions grow towards a = infinity (decade {k}: {:e} > {:e})",
                decades[k],
                decades[k - 1]
            )));
        }
    }
    // below sigma_min
    err += eval(sigma_min)?.abs() * sigma_min;
    let factor = big_t.powf(-s) / s;
    Ok(Piece { value: factor * total, err: factor * err })
}

/// Default outer cut for `u` seen from `(x, t)`.
pub(crate) fn auto_horizon(u: &FunctionHandle, x: &[f64], t: f64, spec: &QuadSpec) -> Result<f64> {
    let mut big_t = 1.0f64.max(10.0 * spec.a_min);
    let mut known = !u.dependence.uses_space();
    if let Some(sup) = &u.support {
        if sup.radius.is_finite() {
            let d = sup.distance_to_center(x) + sup.radius;
            big_t = big_t.max(d * d);
            known = true;
        }
        if sup.time.0.is_finite() {
            known = true;
            if t > sup.time.0 {
                big_t = big_t.max((t - sup.time.0) * 1.01);
            }
        }
    }
    if !known {
        return Err(Error::HorizonRequired(
            "the function depends on x and declares no bounded support; pass a finite horizon".into(),
        ));
    }
    if u.dependence.uses_time() && u.scales.time.is_finite() {
        big_t = big_t.max(16.0 * u.scales.time * u.scales.time);
    }
    Ok(big_t)
}

/// Breakpoints in `a` and the window where time variation must be resolved.
pub(crate) fn time_plan(
    u: &FunctionHandle,
    t: f64,
    lower: f64,
    singular: bool,
    upper: f64,
    spec: &QuadSpec,
    extra_breaks: &[f64],
) -> MeshPlan {
    let mut breaks: Vec<f64> = u.time_breaks.iter().map(|b| t - b).collect();
    breaks.extend_from_slice(extra_breaks);
    let mut windows = Vec::new();
    if u.dependence.uses_time() {
        let (mut lo, mut hi) = (lower, upper);
        if let Some(sup) = &u.support {
            breaks.push(t - sup.time.0);
            breaks.push(t - sup.time.1);
            lo = lo.max(t - sup.time.1);
            hi = hi.min(t - sup.time.0);
        }
        let ell = u.scales.time;
        if hi > lo && ell.is_finite() && ell > 0.0 {
            windows.push((lo, hi, 2.0 * ell));
        }
    }
    breaks.retain(|b| b.is_finite() && *b > 0.0);
    MeshPlan { lower, singular, upper, ratio: spec.effective_ratio(), breaks, windows }
}

/// Panel-by-panel evaluation of `weight int_0^H a^{-1-s} D(a) da` over the
/// whole space, plus its tail. Shared by the master operator and the
/// Marchaud derivative.
pub(crate) struct WholeSpaceRun {
    pub result: QuadResult,
    pub panels: Vec<(f64, f64, f64)>,
}

pub(crate) fn whole_space_difference(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    n: usize,
    s: f64,
    weight: f64,
    q: &QuadSpec,
) -> Result<WholeSpaceRun> {
    q.validate()?;
    if !at.t.is_finite() {
        return Err(Error::Domain("time coordinate must be finite".into()));
    }
    let sp = Spatial::new(u, &at.x, n, q)?;
    let t = at.t;
    let u0 = sp.eval_at(&at.x, t)?;
    let (big_t, auto) = match q.horizon {
        Horizon::Auto => (auto_horizon(u, &at.x, t, q)?, true),
        Horizon::Finite(h) => (h, false),
    };
    let plan = time_plan(u, t, q.a_min, true, big_t, q, &[]);
    let segs = build_segments(&plan);
    let mut f = |a: f64| sp.difference(Region::Whole, a, t - a, u0);
    let side = || sp.last_err();
    let body = integrate_segments_side(&segs, s, q, &mut f, Some(&side))?;
    let a_last = segs[0].0;
    let noise = 8.0 * f64::EPSILON * (u0.abs() + body.max_abs_f);
    let smooth = u.smoothness == Smoothness::Smooth;
    let rem = power_remainder(&body.innermost, a_last, s, noise, smooth);

    let constant_tail = u0 * big_t.powf(-s) / s;
    let mut value = body.value + rem.value + constant_tail;
    let mut err = body.err + rem.err;
    let mut truncated = false;
    if auto {
        let mut h = |a: f64| sp.average(Region::Whole, a, t - a);
        let tail = sigma_tail(big_t, s, q, &mut h, Some(&side))?;
        value -= tail.value;
        err += tail.err;
    } else {
        let past_empty = matches!(&u.support, Some(sup) if sup.time.0 >= t - big_t);
        if !past_empty {
            let avg = sp.average(Region::Whole, big_t, t - big_t)?;
            err += avg.abs() * big_t.powf(-s) / s;
            truncated = true;
        }
    }
    if !value.is_finite() {
        return Err(Error::Numeric { message: "non-finite operator value".into(), location: big_t });
    }
    Ok(WholeSpaceRun {
        result: QuadResult {
            value: weight * value,
            err_estimate: weight.abs() * err,
            truncation_flag: truncated,
            nodes_used: sp.evals(),
        },
        panels: body.panels.iter().map(|&(lo, hi, v)| (lo, hi, weight * v)).collect(),
    })
}

/// `int_0^infinity c (4 pi)^{n/2} a^{-1-s} GH_z[u(x,t) - u(x + 2 sqrt(a) z, t - a)] da`,
/// the space-time difference integral defining the master operator.
pub fn integrate_difference(
    u: &FunctionHandle,
    at: &SpaceTimePoint,
    p: &KernelParams,
    q: &QuadSpec,
) -> Result<QuadResult> {
    Ok(whole_space_difference(u, at, p.n, p.s, p.heat_factor(), q)?.result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remainder_of_linear_integrand_is_exact() {
        let s = 0.5;
        let samples = [(1e-6, 3e-6), (2e-6, 6e-6)];
        let r = power_remainder(&samples, 1e-5, s, 0.0, false);
        let exact = 3.0 * 1e-5f64.powf(0.5) / 0.5;
        assert!((r.value - exact).abs() < 1e-12 * exact);
        assert!(r.err < 1e-12);
    }

    #[test]
    fn sigma_tail_of_power() {
        // int_T^inf a^{-1-s} a^{-1/2} da = T^{-s-1/2}/(s+1/2)
        let spec = QuadSpec::default();
        for s in [0.25, 0.5, 0.75] {
            let t = 7.0;
            let piece = sigma_tail(t, s, &spec, &mut |a| Ok(a.powf(-0.5)), None).unwrap();
            let exact = t.powf(-s - 0.5) / (s + 0.5);
            assert!((piece.value - exact).abs() < 1e-9 * exact, "s = {s}");
        }
    }

    #[test]
    fn sigma_tail_rejects_growth() {
        let spec = QuadSpec::default();
        let r = sigma_tail(2.0, 0.3, &spec, &mut |a| Ok(a), None);
        assert!(matches!(r, Err(Error::Integrability(_))));
        let r = sigma_tail(2.0, 0.3, &spec, &mut |a| Ok(a.exp()), None);
        assert!(matches!(r, Err(Error::Integrability(_))));
    }

    #[test]
    fn segments_integrate_smooth_weighted_function() {
        let spec = QuadSpec::default();
        let plan = MeshPlan {
            lower: 1.0,
            singular: false,
            upper: 50.0,
            ratio: 0.5,
            breaks: vec![],
            windows: vec![],
        };
        let segs = build_segments(&plan);
        let out = integrate_segments(&segs, 0.5, &spec, &mut |a| Ok(a.sqrt())).unwrap();
        // int_1^50 a^{-1} da
        assert!((out.value - 50f64.ln()).abs() < 1e-10, "{}", out.value);
    }
}
