//! Geometrically graded panels in the time offset `a = t - tau`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// One time panel `(a_lo, a_hi]`, with the matching window in absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub a_lo: f64,
    pub a_hi: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
}

/// Panels `(g a_k, a_k]` with `a_0 = horizon`, `a_{k+1} = g a_k`, stopping at
/// the first panel whose lower end is at or below `a_min`.
pub fn graded_time_mesh(t_ref: f64, horizon: f64, grading: f64, a_min: f64) -> Result<Vec<Panel>> {
    if !t_ref.is_finite() {
        return domain("reference time must be finite");
    }
    if !(grading > 0.0 && grading < 1.0) {
        return domain(format!("grading {grading} must lie in (0, 1)"));
    }
    if !(a_min > 0.0) || !(horizon > a_min) || !horizon.is_finite() {
        return domain(format!("need horizon > a_min > 0, got horizon = {horizon}, a_min = {a_min}"));
    }
    let mut panels = Vec::new();
    let mut hi = horizon;
    loop {
        let lo = hi * grading;
        panels.push(Panel { a_lo: lo, a_hi: hi, tau_lo: t_ref - hi, tau_hi: t_ref - lo });
        if lo <= a_min {
            break;
        }
        hi = lo;
    }
    Ok(panels)
}

/// Recipe for the internal segment list.
#[derive(Debug, Clone)]
pub(crate) struct MeshPlan {
    /// Lower end. When `singular`, the geometric sequence runs until it is
    /// at or below this value and the final point is kept as is.
    pub lower: f64,
    pub singular: bool,
    pub upper: f64,
    pub ratio: f64,
    /// Points where the integrand is only piecewise smooth.
    pub breaks: Vec<f64>,
    /// `(lo, hi, max_width)`: segments inside are cut to at most `max_width`.
    pub windows: Vec<(f64, f64, f64)>,
}

const MAX_PIECES: usize = 20_000;

/// Ascending list of segments covering `(lower, upper]`.
pub(crate) fn build_segments(plan: &MeshPlan) -> Vec<(f64, f64)> {
    let mut pts = vec![plan.upper];
    let mut a = plan.upper;
    while a > plan.lower {
        a *= plan.ratio;
        if !plan.singular && a <= plan.lower {
            a = plan.lower;
        }
        pts.push(a);
    }
    let bottom = *pts.last().expect("non-empty");
    let inside = |b: f64| b > bottom && b < plan.upper;
    pts.extend(plan.breaks.iter().copied().filter(|&b| inside(b)));
    for &(lo, hi, _) in &plan.windows {
        pts.extend([lo, hi].into_iter().filter(|&b| inside(b)));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|p, q| (*p - *q).abs() <= 1e-14 * q.abs());

    let mut segs = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let width = plan
            .windows
            .iter()
            .filter(|(a, b, _)| mid > *a && mid < *b)
            .map(|w| w.2)
            .fold(f64::INFINITY, f64::min);
        let pieces = if width.is_finite() && width > 0.0 {
            (((hi - lo) / width).ceil() as usize).clamp(1, MAX_PIECES)
        } else {
            1
        };
        let h = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let a = lo + h * k as f64;
            let b = if k + 1 == pieces { hi } else { lo + h * (k + 1) as f64 };
            segs.push((a, b));
        }
    }
    segs
}
