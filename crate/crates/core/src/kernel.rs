//! The fractional heat kernel `M(x,t) = c t^{-(n/2+1+s)} exp(-|x|^2/(4t))`,
//! its normalization constants, the pointwise decay majorant and log-space
//! kernel ratios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::gamma;

/// Which constants multiply the operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Every operator constant is 1.
    Raw,
    /// Constants chosen so the operator has symbol `(lambda + |xi|^2)^s`.
    Normalized,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Normalization::Raw),
            "normalized" | "norm" => Ok(Normalization::Normalized),
            other => Err(format!("unknown normalization '{other}' (expected raw|normalized)")),
        }
    }
}

/// Dimension, order and the constants attached to them. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub n: usize,
    pub s: f64,
    pub normalization: Normalization,
    /// Constant of the space-time kernel.
    pub master_const: f64,
    /// Constant of the Marchaud derivative.
    pub marchaud_const: f64,
    /// Constant of the fractional Laplacian.
    pub flap_const: f64,
    /// Constant of the decay majorant, fitted on [`DecayGrid::fit_default`].
    pub lambda: f64,
}

impl KernelParams {
    pub fn new(n: usize, s: f64, normalization: Normalization) -> Result<Self> {
        check_order(n, s)?;
        let (master_const, marchaud_const, flap_const) = match normalization {
            Normalization::Raw => (1.0, 1.0, 1.0),
            Normalization::Normalized => normalized_constants(n, s),
        };
        let lambda = fit_lambda(n, s, master_const, &DecayGrid::fit_default());
        Ok(KernelParams { n, s, normalization, master_const, marchaud_const, flap_const, lambda })
    }

    pub fn normalized(n: usize, s: f64) -> Result<Self> {
        Self::new(n, s, Normalization::Normalized)
    }

    pub fn raw(n: usize, s: f64) -> Result<Self> {
        Self::new(n, s, Normalization::Raw)
    }

    /// Replace the decay constant.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Exponent `n/2 + 1 + s` of the time factor.
    pub fn time_exponent(&self) -> f64 {
        self.n as f64 / 2.0 + 1.0 + self.s
    }

    /// `c (4 pi)^{n/2}`: integrating the kernel over space at duration `a`
    /// gives this factor times `a^{-(1+s)}`.
    pub fn heat_factor(&self) -> f64 {
        self.master_const * (4.0 * PI).powf(self.n as f64 / 2.0)
    }
}

fn check_order(n: usize, s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("order s = {s} must lie in (0, 1)"));
    }
    if !(1..=3).contains(&n) {
        return domain(format!("dimension n = {n} must be 1, 2 or 3"));
    }
    Ok(())
}

fn normalized_constants(n: usize, s: f64) -> (f64, f64, f64) {
    let half_n = n as f64 / 2.0;
    let abs_gamma_neg_s = gamma(1.0 - s) / s;
    let master = 1.0 / ((4.0 * PI).powf(half_n) * abs_gamma_neg_s);
    let marchaud = s / gamma(1.0 - s);
    let flap = 4f64.powf(s) * gamma(half_n + s) / (PI.powf(half_n) * abs_gamma_neg_s);
    (master, marchaud, flap)
}

/// A point `(x, t)` of space-time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        SpaceTimePoint { x, t }
    }

    /// `(x, t)` in one dimension.
    pub fn line(x: f64, t: f64) -> Self {
        SpaceTimePoint { x: vec![x], t }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|c| c.is_finite())
    }
}

/// Normalized constants for `(n, s)`.
pub fn kernel_constants(n: usize, s: f64) -> Result<KernelParams> {
    KernelParams::normalized(n, s)
}

/// A kernel value with an underflow marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    /// The exponential factor underflowed to zero.
    pub underflow: bool,
}

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum()
}

/// Evaluate `M(dx, dt)`.
pub fn kernel_eval(dx: &[f64], dt: f64, p: &KernelParams) -> Result<KernelValue> {
    if !(dt > 0.0) || !dt.is_finite() {
        return domain(format!("kernel needs a positive finite duration, got dt = {dt}"));
    }
    let r2 = squared_norm(dx);
    let arg = r2 / (4.0 * dt);
    let e = (-arg).exp();
    let value = p.master_const / dt.powf(p.time_exponent()) * e;
    Ok(KernelValue { value, underflow: e == 0.0 })
}

/// Outcome of comparing the kernel with its decay majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub value: f64,
    pub majorant: f64,
    pub pass: bool,
}

/// Compare `M(dx,dt)` with `Lambda / (|dx|^{n+2+2s} + dt^{n/2+1+s})`.
pub fn kernel_decay_check(dx: &[f64], dt: f64, p: &KernelParams) -> Result<DecayCheck> {
    let value = kernel_eval(dx, dt, p)?.value;
    let pexp = p.time_exponent();
    let r = squared_norm(dx).sqrt();
    let majorant = p.lambda / (r.powf(2.0 * pexp) + dt.powf(pexp));
    Ok(DecayCheck { value, majorant, pass: value <= majorant })
}

/// `log M(dx1,dt) - log M(dx2,dt)`, computed without forming either kernel.
pub fn kernel_log_ratio(dx1: &[f64], dx2: &[f64], dt: f64) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return domain(format!("kernel ratio needs a positive finite duration, got dt = {dt}"));
    }
    if dx1.len() != dx2.len() {
        return domain("kernel ratio arguments differ in dimension");
    }
    Ok((squared_norm(dx2) - squared_norm(dx1)) / (4.0 * dt))
}

/// Log-spaced grid of `(|dx|, dt)` pairs for the decay bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayGrid {
    pub radii: Vec<f64>,
    pub durations: Vec<f64>,
}

impl DecayGrid {
    pub fn log_spaced(lo: f64, hi: f64, per_axis: usize) -> Self {
        let pts = log_space(lo, hi, per_axis);
        DecayGrid { radii: pts.clone(), durations: pts }
    }

    /// Grid used to fit `Lambda`: 60 points per axis over `[1e-3, 1e3]`.
    pub fn fit_default() -> Self {
        Self::log_spaced(1e-3, 1e3, 60)
    }

    /// Verification grid: 100 points per axis over `[1e-3, 1e3]` (10^4 points).
    pub fn check_default() -> Self {
        Self::log_spaced(1e-3, 1e3, 100)
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..count).map(|i| (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Supremum of `M (|x|^{n+2+2s} + t^{n/2+1+s})` over the box spanned by the
/// grid, plus 1% headroom, for kernel constant `c`.
///
/// The product depends on `rho = |x|^2 / t` alone, as
/// `c (1 + rho^p) e^{-rho/4}`, so the supremum is a one-dimensional search
/// over the range of `rho` the box covers. Grid points alone can miss the peak.
pub fn fit_lambda(n: usize, s: f64, c: f64, grid: &DecayGrid) -> f64 {
    let pexp = n as f64 / 2.0 + 1.0 + s;
    let h = |lr: f64| {
        let rho = lr.exp();
        (pexp * lr).exp().ln_1p() - rho / 4.0
    };
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let (rmin, rmax) = (fold(&grid.radii, f64::min, f64::INFINITY), fold(&grid.radii, f64::max, 0.0));
    let (tmin, tmax) = (fold(&grid.durations, f64::min, f64::INFINITY), fold(&grid.durations, f64::max, 0.0));
    let lo = (rmin * rmin / tmax).ln().max(-60.0);
    let hi = (rmax * rmax / tmin).ln().min(lo.max(0.0) + 1e3);
    // coarse scan, then golden-section refinement around the best cell
    let m = 4000;
    let step = (hi - lo) / m as f64;
    let (mut best_k, mut best) = (0, h(lo));
    for k in 1..=m {
        let v = h(lo + step * k as f64);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let (mut a, mut b) = (lo + step * (best_k as f64 - 1.0).max(0.0), (lo + step * (best_k + 1) as f64).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if h(x1) < h(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    best = best.max(h(0.5 * (a + b)));
    1.01 * c * best.exp()
}

/// Summary of a decay-bound sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySweep {
    pub points: usize,
    pub violations: usize,
    /// Largest value of `M / majorant` seen.
    pub max_ratio: f64,
    pub lambda: f64,
}

/// Run [`kernel_decay_check`] over every grid point.
pub fn decay_sweep(p: &KernelParams, grid: &DecayGrid) -> Result<DecaySweep> {
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    let mut dx = vec![0.0; p.n];
    for &r in &grid.radii {
        dx[0] = r;
        for &t in &grid.durations {
            let c = kernel_decay_check(&dx, t, p)?;
            if !c.pass {
                violations += 1;
            }
            if c.majorant > 0.0 {
                max_ratio = max_ratio.max(c.value / c.majorant);
            }
        }
    }
    Ok(DecaySweep { points: grid.len(), violations, max_ratio, lambda: p.lambda })
}
