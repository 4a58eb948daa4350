//! Bump-based function sequences that converge to zero locally while their
//! operator values do not, plus the parabolic rescaling map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{
    Dependence, FunctionHandle, GrowthEnvelope, Scales, Smoothness, SupportBox,
};
use crate::kernel::{KernelParams, Normalization};
use crate::quadrature::adaptive_gk15;
use crate::special::unit_sphere_measure;

/// `exp(-1/((r-2)(3-r)))` on `(2, 3)`, zero elsewhere. Peak `e^{-4}` at 2.5.
pub fn standard_bump(r: f64) -> f64 {
    if r > 2.0 && r < 3.0 {
        (-1.0 / ((r - 2.0) * (3.0 - r))).exp()
    } else {
        0.0
    }
}

/// Largest value of [`standard_bump`].
pub const BUMP_MAX: f64 = 0.018_315_638_888_734_18;

/// `(t_+)^2 + 1`.
pub fn eta(t: f64) -> f64 {
    let tp = t.max(0.0);
    tp * tp + 1.0
}

/// `int_2^3 bump(r) r^{-p} dr`.
fn bump_moment(p: f64) -> f64 {
    adaptive_gk15(|r| standard_bump(r) * r.powf(-p), 2.0, 3.0, 1e-16, 1e-12, 2000).value
}

/// `omega_{n-1} int_2^3 bump(r) r^{-1-2s} dr`, times the fractional Laplacian
/// constant in normalized mode. With `alpha = 2 beta s` the fractional
/// Laplacian of `phi_j` at the origin equals `-C0` for every `j`.
pub fn c0_constant(s: f64, n: usize, mode: Normalization) -> Result<f64> {
    let p = KernelParams::new(n, s, mode)?;
    Ok(p.flap_const * unit_sphere_measure(n) * bump_moment(1.0 + 2.0 * s))
}

/// `C_s int_2^3 bump(r) r^{-1-s} dr`. With `alpha = beta s` the Marchaud
/// derivative of `psi_j` at `t = 0` equals `-C1` for every `j`.
pub fn c1_constant(s: f64, mode: Normalization) -> Result<f64> {
    let p = KernelParams::new(1, s, mode)?;
    Ok(p.marchaud_const * bump_moment(1.0 + s))
}

/// How `alpha` compares with `2 beta s` for the spatial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialRegime {
    /// `alpha < 2 beta s`: the fractional Laplacian at a fixed point tends to 0.
    Vanishing,
    /// `alpha = 2 beta s`: it tends to `-C0`.
    Critical,
    /// `alpha > 2 beta s`: it diverges.
    Divergent,
}

/// Parameters of one family member with the derived constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub j: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub s: f64,
    pub n: usize,
    pub normalization: Normalization,
    pub c0: f64,
    pub c1: f64,
    pub omega_nm1: f64,
}

impl FamilyParams {
    pub fn new(
        j: u32,
        alpha: f64,
        beta: f64,
        gamma: f64,
        s: f64,
        n: usize,
        normalization: Normalization,
    ) -> Result<Self> {
        if j == 0 || !(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0) {
            return Err(Error::Domain("need j >= 1 and alpha, beta, gamma > 0".into()));
        }
        Ok(FamilyParams {
            j,
            alpha,
            beta,
            gamma,
            s,
            n,
            normalization,
            c0: c0_constant(s, n, normalization)?,
            c1: c1_constant(s, normalization)?,
            omega_nm1: unit_sphere_measure(n),
        })
    }

    pub fn regime(&self) -> SpatialRegime {
        let crit = 2.0 * self.beta * self.s;
        if (self.alpha - crit).abs() <= 1e-12 * crit {
            SpatialRegime::Critical
        } else if self.alpha < crit {
            SpatialRegime::Vanishing
        } else {
            SpatialRegime::Divergent
        }
    }

    /// The time-growth family needs `gamma > s`.
    pub fn check_growth_constraint(&self) -> Result<()> {
        if self.gamma > self.s {
            Ok(())
        } else {
            Err(Error::Constraint(format!("gamma = {} must exceed s = {}", self.gamma, self.s)))
        }
    }
}

/// `phi_j(x) = j^alpha bump(j^{-beta} |x|)`, supported in `|x| <= 3 j^beta`.
pub fn phi_family(j: u32, alpha: f64, beta: f64) -> FunctionHandle {
    let jf = j as f64;
    let amp = jf.powf(alpha);
    let scale = jf.powf(beta);
    let inv = 1.0 / scale;
    FunctionHandle::spatial(move |x| {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        amp * standard_bump(r * inv)
    })
    .with_support(SupportBox::ball(3.0 * scale))
    .with_envelope(GrowthEnvelope::Bounded(amp * BUMP_MAX))
    .with_scales(scale / 20.0, f64::INFINITY)
}

/// `psi_j(t) = j^alpha bump(-j^{-beta} t)`, supported in `[-3 j^beta, -2 j^beta]`.
pub fn psi_family(j: u32, alpha: f64, beta: f64) -> FunctionHandle {
    let jf = j as f64;
    let amp = jf.powf(alpha);
    let scale = jf.powf(beta);
    let inv = 1.0 / scale;
    FunctionHandle::temporal(move |t| amp * standard_bump(-t * inv))
        .with_support(SupportBox::window(-3.0 * scale, -2.0 * scale))
        .with_envelope(GrowthEnvelope::Bounded(amp * BUMP_MAX))
        .with_scales(f64::INFINITY, scale / 20.0)
}

/// `w_j(x, t) = phi_j(x) eta(j^{-gamma} t) / C0` with `alpha = 2s`, `beta = 1`.
/// Equals `phi_j / C0` for `t <= 0` and grows like `t^2` afterwards.
pub fn w_family(j: u32, gamma: f64, s: f64, n: usize, mode: Normalization) -> Result<FunctionHandle> {
    if !(gamma > s) {
        return Err(Error::Constraint(format!("gamma = {gamma} must exceed s = {s}")));
    }
    let c0 = c0_constant(s, n, mode)?;
    Ok(w_with_c0(j, gamma, s, c0))
}

pub(crate) fn w_with_c0(j: u32, gamma: f64, s: f64, c0: f64) -> FunctionHandle {
    let jf = j as f64;
    let amp = jf.powf(2.0 * s) / c0;
    let inv = 1.0 / jf;
    let tscale = jf.powf(gamma);
    let tinv = 1.0 / tscale;
    let mut h = FunctionHandle::new(move |x, t| {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let b = standard_bump(r * inv);
        if b == 0.0 {
            0.0
        } else {
            amp * b * eta(t * tinv)
        }
    })
    .with_support(SupportBox::ball(3.0 * jf))
    .with_envelope(GrowthEnvelope::QuadraticForward { base: amp * BUMP_MAX, scale: tscale })
    .with_smoothness(Smoothness::Holder { space: f64::INFINITY, time: 2.0 })
    .with_time_breaks(vec![0.0]);
    h.scales = Scales { space: jf / 20.0, time: tscale };
    h.dependence = Dependence::Both;
    h
}

/// `v(x, t) = u(lambda x + x_bar, lambda^2 t + t_bar) / mk`, with metadata
/// mapped through the same change of variables.
pub fn rescale(
    u: &FunctionHandle,
    mk: f64,
    lambda: f64,
    x_bar: &[f64],
    t_bar: f64,
) -> Result<FunctionHandle> {
    if !(mk > 0.0) || !(lambda > 0.0) {
        return Err(Error::Domain("rescaling needs M > 0 and lambda > 0".into()));
    }
    let f = u.evaluator();
    let xb = x_bar.to_vec();
    let lam2 = lambda * lambda;
    let mut v = FunctionHandle::new(move |x, t| {
        let y: Vec<f64> =
            x.iter().enumerate().map(|(i, c)| lambda * c + xb.get(i).copied().unwrap_or(0.0)).collect();
        f(&y, lam2 * t + t_bar) / mk
    });
    v.dependence = u.dependence;
    v.smoothness = u.smoothness;
    v.epsilon = u.epsilon;
    v.scales = Scales { space: u.scales.space / lambda, time: u.scales.time / lam2 };
    v.time_breaks = u.time_breaks.iter().map(|b| (b - t_bar) / lam2).collect();
    v.support = u.support.as_ref().map(|sup| {
        let k = sup.center.len().max(x_bar.len());
        SupportBox {
            center: (0..k)
                .map(|i| (sup.center_coord(i) - x_bar.get(i).copied().unwrap_or(0.0)) / lambda)
                .collect(),
            radius: sup.radius / lambda,
            time: ((sup.time.0 - t_bar) / lam2, (sup.time.1 - t_bar) / lam2),
        }
    });
    v.envelope = u.envelope.as_ref().map(|e| match e {
        GrowthEnvelope::Bounded(b) => GrowthEnvelope::Bounded(b / mk),
        GrowthEnvelope::QuadraticForward { base, scale } => {
            GrowthEnvelope::QuadraticForward { base: base / mk, scale: scale / lam2 }
        }
        GrowthEnvelope::Descriptor(d) => GrowthEnvelope::Descriptor(format!("rescaled: {d}")),
    });
    Ok(v)
}
