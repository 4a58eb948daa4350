//! Singular quadrature for space-time difference integrals.
//!
//! Space is handled by Gauss-Hermite after the substitution
//! `y = x + 2 sqrt(a) z` while the Gaussian is narrow, and by composite
//! Gauss-Legendre once it is wider than the function's features. Time is
//! handled by geometrically graded panels towards `a = 0` and a mapped tail
//! towards `a = infinity`.

mod engine;
mod mesh;
mod rules;
mod spatial;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use engine::integrate_difference;
pub(crate) use engine::{
    auto_horizon, integrate_segments, integrate_segments_side, power_remainder, sigma_tail, time_plan,
    whole_space_difference, Piece,
};
pub use mesh::{graded_time_mesh, Panel};
pub(crate) use mesh::{build_segments, MeshPlan};
pub use rules::{
    adaptive_gk15, gauss_hermite, gauss_hermite_nodes, gauss_legendre, gl_integrate,
    AdaptiveResult, Rule, MAX_HERMITE_ORDER,
};
pub(crate) use spatial::{Region, Spatial};

/// Outer truncation of the time integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    /// Chosen from the support metadata; the far tail is integrated, not dropped.
    Auto,
    /// Integrate up to this duration and drop what lies beyond.
    Finite(f64),
}

/// Quadrature settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub gh_order: usize,
    pub panels_per_decade: usize,
    pub grading: f64,
    pub a_min: f64,
    pub horizon: Horizon,
    pub gl_order: usize,
    pub rel_tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            gh_order: 20,
            panels_per_decade: 4,
            grading: 0.5,
            a_min: 1e-10,
            horizon: Horizon::Auto,
            gl_order: 8,
            rel_tol: 1e-6,
        }
    }
}

impl QuadSpec {
    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    /// Same spec with panels of half the size and twice the Gauss-Hermite order.
    pub fn refined(&self) -> Self {
        QuadSpec {
            gh_order: (2 * self.gh_order).min(MAX_HERMITE_ORDER),
            panels_per_decade: 2 * self.panels_per_decade,
            grading: self.grading.sqrt(),
            ..self.clone()
        }
    }

    /// Geometric ratio actually used between consecutive panel ends: the
    /// coarser of `grading` and the panels-per-decade ratio.
    pub fn effective_ratio(&self) -> f64 {
        let ppd = 10f64.powf(-1.0 / self.panels_per_decade.max(1) as f64);
        self.grading.max(ppd)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gh_order == 0 {
            return domain("gh_order must be at least 1");
        }
        if self.gh_order > MAX_HERMITE_ORDER {
            return Err(crate::error::Error::Unsupported(format!(
                "gh_order {} exceeds {MAX_HERMITE_ORDER}",
                self.gh_order
            )));
        }
        if !(self.grading > 0.0 && self.grading < 1.0) {
            return domain(format!("grading {} must lie in (0, 1)", self.grading));
        }
        if !(self.a_min > 0.0) {
            return domain(format!("a_min {} must be positive", self.a_min));
        }
        if self.gl_order < 3 {
            return domain("gl_order must be at least 3");
        }
        if self.panels_per_decade == 0 {
            return domain("panels_per_decade must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return domain("rel_tol must be positive");
        }
        if let Horizon::Finite(h) = self.horizon {
            if !(h > self.a_min) || !h.is_finite() {
                return domain(format!("horizon {h} must be finite and exceed a_min {}", self.a_min));
            }
        }
        Ok(())
    }
}

/// Value of a quadrature with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
    /// Part of the integral beyond a finite horizon was dropped.
    pub truncation_flag: bool,
    /// Number of function evaluations.
    pub nodes_used: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult { value: 0.0, err_estimate: 0.0, truncation_flag: false, nodes_used: 0 }
    }

    /// Sum of `a * self + b * other`, errors added in absolute value.
    pub fn combine(a: f64, x: &QuadResult, b: f64, y: &QuadResult) -> QuadResult {
        QuadResult {
            value: a * x.value + b * y.value,
            err_estimate: a.abs() * x.err_estimate + b.abs() * y.err_estimate,
            truncation_flag: x.truncation_flag || y.truncation_flag,
            nodes_used: x.nodes_used + y.nodes_used,
        }
    }
}
