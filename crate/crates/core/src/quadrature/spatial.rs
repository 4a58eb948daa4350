//! Spatial averages against the heat density `G_a(d) = (4 pi a)^{-n/2} e^{-|d|^2/(4a)}`.

use std::cell::Cell;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::FunctionHandle;

use super::rules::{gauss_hermite, gauss_legendre, Rule};
use super::QuadSpec;

/// Gaussian window half-width in units of `2 sqrt(a)`; `exp(-Z^2)` is below 1e-18.
pub(crate) const GAUSS_REACH: f64 = 6.5;

/// Spatial integration region, balls centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Region {
    Whole,
    Ball(f64),
    Exterior(f64),
}

impl Region {
    fn contains(&self, r: f64) -> bool {
        match *self {
            Region::Whole => true,
            Region::Ball(big_r) => r <= big_r,
            Region::Exterior(big_r) => r > big_r,
        }
    }

    fn boundary_distance(&self, r: f64) -> f64 {
        match *self {
            Region::Whole => f64::INFINITY,
            Region::Ball(big_r) | Region::Exterior(big_r) => (big_r - r).abs(),
        }
    }
}

/// Per-point integration workspace. Not shared between threads.
pub(crate) struct Spatial<'a> {
    u: &'a FunctionHandle,
    x: Vec<f64>,
    n: usize,
    gh: Arc<Rule>,
    gl: Arc<Rule>,
    /// Companion rules of lower order, for error estimates.
    gh_lo: Arc<Rule>,
    gl_lo: Arc<Rule>,
    evals: Cell<usize>,
    last_err: Cell<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// One axis of a composite Gauss-Legendre rule, nodes and weights.
fn composite_axis(gl: &Rule, lo: f64, hi: f64, h: f64, out: &mut Vec<(f64, f64)>) {
    if !(hi > lo) {
        return;
    }
    let m = ((hi - lo) / h).ceil().clamp(1.0, 1e6) as usize;
    let step = (hi - lo) / m as f64;
    for k in 0..m {
        let a = lo + step * k as f64;
        let half = 0.5 * step;
        let mid = a + half;
        for (z, w) in gl.nodes.iter().zip(&gl.weights) {
            out.push((mid + half * z, w * half));
        }
    }
}

impl<'a> Spatial<'a> {
    pub fn new(u: &'a FunctionHandle, x: &[f64], n: usize, spec: &QuadSpec) -> Result<Self> {
        if x.len() != n {
            return Err(Error::Domain(format!("point has {} coordinates, expected n = {n}", x.len())));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("point coordinates must be finite".into()));
        }
        if n > 3 {
            return Err(Error::Unsupported(format!("dimension {n} > 3")));
        }
        Ok(Spatial {
            u,
            x: x.to_vec(),
            n,
            gh: gauss_hermite(spec.gh_order)?,
            gl: gauss_legendre(spec.gl_order),
            gh_lo: gauss_hermite(spec.gh_order.saturating_sub(4).max(1))?,
            gl_lo: gauss_legendre(spec.gl_order - 2),
            evals: Cell::new(0),
            last_err: Cell::new(0.0),
        })
    }

    pub fn evals(&self) -> usize {
        self.evals.get()
    }

    /// Error estimate of the most recent [`Self::difference`] or
    /// [`Self::average`], from the lower-order companion rule.
    pub fn last_err(&self) -> f64 {
        self.last_err.get()
    }

    pub fn eval_at(&self, y: &[f64], tau: f64) -> Result<f64> {
        self.evals.set(self.evals.get() + 1);
        let v = self.u.eval(y, tau);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric {
                message: format!("non-finite value u({y:?}, {tau}) = {v}"),
                location: tau,
            })
        }
    }

    fn time_active(&self, tau: f64) -> bool {
        match &self.u.support {
            Some(s) => tau >= s.time.0 && tau <= s.time.1,
            None => true,
        }
    }

    /// Support ball as `(center, radius)` when spatially bounded.
    fn support_ball(&self) -> Option<(Vec<f64>, f64)> {
        let s = self.u.support.as_ref()?;
        if !s.radius.is_finite() {
            return None;
        }
        Some(((0..self.n).map(|i| s.center_coord(i)).collect(), s.radius))
    }

    /// `int_region (u0 - u(y, tau)) G_a(x - y) dy`.
    pub fn difference(&self, region: Region, a: f64, tau: f64, u0: f64) -> Result<f64> {
        self.last_err.set(0.0);
        if !self.time_active(tau) {
            return Ok(u0 * self.mass(region, a));
        }
        if !self.u.dependence.uses_space() {
            let v = self.eval_at(&self.x, tau)?;
            return Ok((u0 - v) * self.mass(region, a));
        }
        let sa = 2.0 * a.sqrt();
        let zmax = *self.gh.nodes.last().expect("non-empty rule");
        let reach = sa * zmax.max(1.0);
        let rx = norm(&self.x);
        let narrow = sa <= self.u.scales.space && reach <= region.boundary_distance(rx);
        if narrow {
            if !region.contains(rx) {
                return Ok(0.0);
            }
            if let Some((c, rho)) = self.support_ball() {
                let d: Vec<f64> = self.x.iter().zip(&c).map(|(p, q)| p - q).collect();
                if norm(&d) - rho > reach {
                    return Ok(u0);
                }
            }
            let hi = self.gh_difference(&self.gh, sa, tau, u0)?;
            let lo = self.gh_difference(&self.gh_lo, sa, tau, u0)?;
            self.last_err.set((hi - lo).abs());
            return Ok(hi);
        }
        let (avg, err) = self.wide_integral(region, a, tau, true)?;
        self.last_err.set(err);
        Ok(u0 * self.mass(region, a) - avg)
    }

    /// `int_region u(y, tau) G_a(x - y) dy`.
    pub fn average(&self, region: Region, a: f64, tau: f64) -> Result<f64> {
        Ok(-self.difference(region, a, tau, 0.0)?)
    }

    /// `int_region G_a(x - y) dy`.
    pub fn mass(&self, region: Region, a: f64) -> f64 {
        if region == Region::Whole {
            return 1.0;
        }
        let rx = norm(&self.x);
        if GAUSS_REACH * 2.0 * a.sqrt() <= region.boundary_distance(rx) {
            return if region.contains(rx) { 1.0 } else { 0.0 };
        }
        self.wide_integral(region, a, 0.0, false).expect("mass integrand is finite").0
    }

    fn gh_difference(&self, gh: &Rule, sa: f64, tau: f64, u0: f64) -> Result<f64> {
        let (z, w) = (&gh.nodes, &gh.weights);
        let q = z.len();
        let mut y = self.x.clone();
        let mut acc = 0.0;
        match self.n {
            1 => {
                for i in 0..q {
                    y[0] = self.x[0] + sa * z[i];
                    acc += w[i] * (u0 - self.eval_at(&y, tau)?);
                }
            }
            2 => {
                for i in 0..q {
                    y[0] = self.x[0] + sa * z[i];
                    let mut inner = 0.0;
                    for j in 0..q {
                        y[1] = self.x[1] + sa * z[j];
                        inner += w[j] * (u0 - self.eval_at(&y, tau)?);
                    }
                    acc += w[i] * inner;
                }
            }
            _ => {
                for i in 0..q {
                    y[0] = self.x[0] + sa * z[i];
                    let mut mid = 0.0;
                    for j in 0..q {
                        y[1] = self.x[1] + sa * z[j];
                        let mut inner = 0.0;
                        for k in 0..q {
                            y[2] = self.x[2] + sa * z[k];
                            inner += w[k] * (u0 - self.eval_at(&y, tau)?);
                        }
                        mid += w[j] * inner;
                    }
                    acc += w[i] * mid;
                }
            }
        }
        Ok(acc / PI.powf(self.n as f64 / 2.0))
    }

    /// Composite Gauss-Legendre integral of `u G_a` (or of `G_a` alone when
    /// `with_u` is false) over the region, restricted to the Gaussian window
    /// and, when integrating `u`, to its support. Returns the value and, when
    /// integrating `u`, its difference with the lower-order companion.
    fn wide_integral(&self, region: Region, a: f64, tau: f64, with_u: bool) -> Result<(f64, f64)> {
        let sa = 2.0 * a.sqrt();
        let half_window = sa * GAUSS_REACH;
        let mut h = 2.0 * sa;
        if with_u {
            h = h.min(2.0 * self.u.scales.space);
        }
        let support = if with_u { self.support_ball() } else { None };
        let inv_4a = 1.0 / (4.0 * a);
        let norm_c = (4.0 * PI * a).powf(-(self.n as f64) / 2.0);

        if self.n == 1 || region == Region::Whole {
            // tensor rule over boxes
            let mut boxes: Vec<Vec<(f64, f64)>> = Vec::new();
            let base: Vec<(f64, f64)> = (0..self.n)
                .map(|i| {
                    let (mut lo, mut hi) = (self.x[i] - half_window, self.x[i] + half_window);
                    if let Some((c, rho)) = &support {
                        lo = lo.max(c[i] - rho);
                        hi = hi.min(c[i] + rho);
                    }
                    (lo, hi)
                })
                .collect();
            match region {
                Region::Whole => boxes.push(base),
                Region::Ball(r) => boxes.push(vec![(base[0].0.max(-r), base[0].1.min(r))]),
                Region::Exterior(r) => {
                    boxes.push(vec![(base[0].0, base[0].1.min(-r))]);
                    boxes.push(vec![(base[0].0.max(r), base[0].1)]);
                }
            }
            let rules: &[&Rule] = if with_u { &[&self.gl, &self.gl_lo] } else { &[&self.gl] };
            let mut totals = [0.0; 2];
            for bx in boxes {
                for (k, rule) in rules.iter().enumerate() {
                    let axes: Vec<Vec<(f64, f64)>> = bx
                        .iter()
                        .enumerate()
                        .map(|(i, &(lo, hi))| {
                            let mut v = Vec::new();
                            composite_axis(rule, lo, hi, h, &mut v);
                            v.into_iter()
                                .map(|(y, w)| (y, w * (-(y - self.x[i]).powi(2) * inv_4a).exp()))
                                .collect()
                        })
                        .collect();
                    totals[k] += self.tensor_sum(&axes, tau, with_u, support.as_ref())?;
                }
            }
            let err = if with_u { (totals[0] - totals[1]).abs() } else { 0.0 };
            return Ok((totals[0] * norm_c, err * norm_c));
        }

        // polar coordinates about the origin for balls and exteriors, n >= 2
        let rx = norm(&self.x);
        let (mut r_lo, mut r_hi) = ((rx - half_window).max(0.0), rx + half_window);
        match region {
            Region::Ball(r) => r_hi = r_hi.min(r),
            Region::Exterior(r) => r_lo = r_lo.max(r),
            Region::Whole => unreachable!(),
        }
        if let Some((c, rho)) = &support {
            let rc = norm(c);
            r_lo = r_lo.max(rc - rho);
            r_hi = r_hi.min(rc + rho);
        }
        let rules: &[&Rule] = if with_u { &[&self.gl, &self.gl_lo] } else { &[&self.gl] };
        let mut totals = [0.0; 2];
        for (k, rule) in rules.iter().enumerate() {
            let mut radial = Vec::new();
            composite_axis(rule, r_lo, r_hi, h, &mut radial);
            for (r, wr) in radial {
                let shell = self.shell(r, h, tau, inv_4a, with_u, support.as_ref())?;
                totals[k] += wr * r.powi(self.n as i32 - 1) * shell;
            }
        }
        let err = if with_u { (totals[0] - totals[1]).abs() } else { 0.0 };
        Ok((totals[0] * norm_c, err * norm_c))
    }

    /// Integral over the sphere of radius `r` about the origin.
    fn shell(
        &self,
        r: f64,
        h: f64,
        tau: f64,
        inv_4a: f64,
        with_u: bool,
        support: Option<&(Vec<f64>, f64)>,
    ) -> Result<f64> {
        let mut y = vec![0.0; self.n];
        let mut shell = 0.0;
        if self.n == 2 {
            let m = ((12.0 * PI * r / h).ceil() as usize).clamp(16, 16384);
            let dth = 2.0 * PI / m as f64;
            for k in 0..m {
                let th = dth * k as f64;
                y[0] = r * th.cos();
                y[1] = r * th.sin();
                shell += dth * self.weighted(&y, tau, inv_4a, with_u, support)?;
            }
        } else {
            let panels = ((PI * r / h).ceil() as usize).clamp(1, 512);
            let mut cosines = Vec::new();
            composite_axis(&self.gl, -1.0, 1.0, 2.0 / panels as f64, &mut cosines);
            let m = ((12.0 * PI * r / h).ceil() as usize).clamp(16, 4096);
            let dph = 2.0 * PI / m as f64;
            for (ct, wc) in cosines {
                let st = (1.0 - ct * ct).max(0.0).sqrt();
                let mut ring = 0.0;
                for k in 0..m {
                    let ph = dph * k as f64;
                    y[0] = r * st * ph.cos();
                    y[1] = r * st * ph.sin();
                    y[2] = r * ct;
                    ring += self.weighted(&y, tau, inv_4a, with_u, support)?;
                }
                shell += wc * dph * ring;
            }
        }
        Ok(shell)
    }

    /// `u(y) exp(-|x-y|^2/(4a))`, skipping evaluations where the Gaussian
    /// underflows or `y` lies outside the support.
    fn weighted(
        &self,
        y: &[f64],
        tau: f64,
        inv_4a: f64,
        with_u: bool,
        support: Option<&(Vec<f64>, f64)>,
    ) -> Result<f64> {
        let d2: f64 = y.iter().zip(&self.x).map(|(p, q)| (p - q).powi(2)).sum();
        let arg = d2 * inv_4a;
        if arg > 745.0 {
            return Ok(0.0);
        }
        let g = (-arg).exp();
        if !with_u {
            return Ok(g);
        }
        if let Some((c, rho)) = support {
            let dc: f64 = y.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum();
            if dc > rho * rho {
                return Ok(0.0);
            }
        }
        Ok(g * self.eval_at(y, tau)?)
    }

    fn tensor_sum(
        &self,
        axes: &[Vec<(f64, f64)>],
        tau: f64,
        with_u: bool,
        support: Option<&(Vec<f64>, f64)>,
    ) -> Result<f64> {
        if axes.iter().any(|a| a.is_empty()) {
            return Ok(0.0);
        }
        let mut y = vec![0.0; self.n];
        let eval = |y: &[f64]| -> Result<f64> {
            if !with_u {
                return Ok(1.0);
            }
            if let Some((c, rho)) = support {
                let dc: f64 = y.iter().zip(c).map(|(p, q)| (p - q).powi(2)).sum();
                if dc > rho * rho {
                    return Ok(0.0);
                }
            }
            self.eval_at(y, tau)
        };
        let mut total = 0.0;
        match self.n {
            1 => {
                for &(y0, w0) in &axes[0] {
                    if w0 == 0.0 {
                        continue;
                    }
                    y[0] = y0;
                    total += w0 * eval(&y)?;
                }
            }
            2 => {
                for &(y0, w0) in &axes[0] {
                    if w0 == 0.0 {
                        continue;
                    }
                    y[0] = y0;
                    for &(y1, w1) in &axes[1] {
                        if w1 == 0.0 {
                            continue;
                        }
                        y[1] = y1;
                        total += w0 * w1 * eval(&y)?;
                    }
                }
            }
            _ => {
                for &(y0, w0) in &axes[0] {
                    if w0 == 0.0 {
                        continue;
                    }
                    y[0] = y0;
                    for &(y1, w1) in &axes[1] {
                        if w1 == 0.0 {
                            continue;
                        }
                        y[1] = y1;
                        for &(y2, w2) in &axes[2] {
                            if w2 == 0.0 {
                                continue;
                            }
                            y[2] = y2;
                            total += w0 * w1 * w2 * eval(&y)?;
                        }
                    }
                }
            }
        }
        Ok(total)
    }
}
