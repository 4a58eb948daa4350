//! A fixed set of test functions with closed-form operator values where one
//! exists. Used by the self-consistency checks and the test suites.

use crate::function::{Dependence, FunctionHandle, SupportBox};
use crate::quadrature::Horizon;

/// One catalog entry.
#[derive(Debug, Clone)]
pub struct Sample {
    pub name: &'static str,
    pub u: FunctionHandle,
    /// Horizon to evaluate with. Entries without bounded support in space need
    /// a finite one.
    pub horizon: Horizon,
}

/// `exp(1 - 1/(1 - rho))` for `rho < 1`, else 0. Peak 1 at `rho = 0`.
fn smooth_bump(rho: f64) -> f64 {
    if rho < 1.0 {
        (1.0 - 1.0 / (1.0 - rho)).exp()
    } else {
        0.0
    }
}

/// Smooth space-time bump centered at `(c, tc)`, spatial radius `r` and time
/// half-width `h`.
pub fn spacetime_bump(c: Vec<f64>, tc: f64, r: f64, h: f64) -> FunctionHandle {
    let center = c.clone();
    FunctionHandle::new(move |x, t| {
        let d2: f64 = x.iter().enumerate().map(|(i, v)| (v - c.get(i).copied().unwrap_or(0.0)).powi(2)).sum();
        let dt = (t - tc) / h;
        smooth_bump(d2 / (r * r) + dt * dt)
    })
    .with_support(SupportBox { center, radius: r, time: (tc - h, tc + h) })
    .with_scales(r / 4.0, h / 4.0)
}

/// `e^{lambda t} cos(xi x_1)`, whose master operator value is
/// `(lambda + xi^2)^s` times itself.
pub fn plane_wave(lambda: f64, xi: f64) -> FunctionHandle {
    FunctionHandle::new(move |x, t| (lambda * t).exp() * (xi * x[0]).cos())
}

pub fn bundled(n: usize) -> Vec<Sample> {
    let far = Horizon::Finite(60.0);
    let mut shifted = vec![0.0; n];
    shifted[0] = 1.0;
    vec![
        Sample { name: "bump", u: spacetime_bump(vec![0.0; n], 0.0, 2.0, 2.0), horizon: Horizon::Auto },
        Sample { name: "shifted_bump", u: spacetime_bump(shifted, 0.5, 1.5, 1.0), horizon: Horizon::Auto },
        Sample { name: "wave", u: plane_wave(1.0, 1.0), horizon: far },
        Sample {
            name: "cos_x",
            u: FunctionHandle::spatial(|x| x[0].cos()),
            horizon: far,
        },
        Sample { name: "exp_t", u: FunctionHandle::temporal(f64::exp), horizon: Horizon::Auto },
        Sample {
            name: "gauss_exp",
            u: FunctionHandle::new(|x, t| (-x.iter().map(|v| v * v).sum::<f64>() + t).exp())
                .with_dependence(Dependence::Both),
            horizon: far,
        },
    ]
}
