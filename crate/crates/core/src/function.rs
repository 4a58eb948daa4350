//! Evaluable space-time functions together with the metadata the quadrature
//! engine relies on: support, growth, smoothness and characteristic scales.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Evaluator signature. Must be reentrant.
pub type Evaluator = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Closed ball in space times a time window. Outside it the function vanishes.
///
/// `radius` may be infinite when only the time window is bounded. Missing
/// center coordinates are read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub center: Vec<f64>,
    pub radius: f64,
    pub time: (f64, f64),
}

impl SupportBox {
    pub fn ball(radius: f64) -> Self {
        SupportBox { center: Vec::new(), radius, time: (f64::NEG_INFINITY, f64::INFINITY) }
    }

    pub fn window(lo: f64, hi: f64) -> Self {
        SupportBox { center: Vec::new(), radius: f64::INFINITY, time: (lo, hi) }
    }

    pub fn with_time(mut self, lo: f64, hi: f64) -> Self {
        self.time = (lo, hi);
        self
    }

    pub fn center_coord(&self, i: usize) -> f64 {
        self.center.get(i).copied().unwrap_or(0.0)
    }

    /// Euclidean distance from `x` to the center.
    pub fn distance_to_center(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, xi)| (xi - self.center_coord(i)).powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_spatially_bounded(&self) -> bool {
        self.radius.is_finite()
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        t >= self.time.0 && t <= self.time.1 && self.distance_to_center(x) <= self.radius
    }

    fn union(&self, other: &SupportBox) -> SupportBox {
        let k = self.center.len().max(other.center.len());
        let same_center = (0..k).all(|i| self.center_coord(i) == other.center_coord(i));
        let radius = if same_center {
            self.radius.max(other.radius)
        } else {
            let d = (0..k)
                .map(|i| (self.center_coord(i) - other.center_coord(i)).powi(2))
                .sum::<f64>()
                .sqrt();
            self.radius.max(d + other.radius)
        };
        SupportBox {
            center: self.center.clone(),
            radius,
            time: (self.time.0.min(other.time.0), self.time.1.max(other.time.1)),
        }
    }
}

/// Declared growth of a function, used to decide whether tails converge.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthEnvelope {
    /// `|u| <= bound` everywhere.
    Bounded(f64),
    /// `|u| <= base (1 + (t_+/scale)^2)`; the past is bounded.
    QuadraticForward { base: f64, scale: f64 },
    /// Free-form note for user-supplied functions.
    Descriptor(String),
}

impl fmt::Display for GrowthEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthEnvelope::Bounded(b) => write!(f, "bounded by {b}"),
            GrowthEnvelope::QuadraticForward { base, scale } => {
                write!(f, "{base}*(1+(t+/{scale})^2)")
            }
            GrowthEnvelope::Descriptor(s) => f.write_str(s),
        }
    }
}

/// Regularity class of the function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Smooth,
    /// Hölder exponents in space and time.
    Holder { space: f64, time: f64 },
}

impl Smoothness {
    fn worse(self, other: Smoothness) -> Smoothness {
        match (self, other) {
            (Smoothness::Smooth, o) | (o, Smoothness::Smooth) => o,
            (
                Smoothness::Holder { space: a, time: b },
                Smoothness::Holder { space: c, time: d },
            ) => Smoothness::Holder { space: a.min(c), time: b.min(d) },
        }
    }
}

/// Which variables the function actually depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Both,
    SpaceOnly,
    TimeOnly,
    Constant,
}

impl Dependence {
    pub fn uses_space(self) -> bool {
        matches!(self, Dependence::Both | Dependence::SpaceOnly)
    }

    pub fn uses_time(self) -> bool {
        matches!(self, Dependence::Both | Dependence::TimeOnly)
    }

    pub fn from_flags(space: bool, time: bool) -> Self {
        match (space, time) {
            (true, true) => Dependence::Both,
            (true, false) => Dependence::SpaceOnly,
            (false, true) => Dependence::TimeOnly,
            (false, false) => Dependence::Constant,
        }
    }

    fn join(self, other: Dependence) -> Dependence {
        Dependence::from_flags(
            self.uses_space() || other.uses_space(),
            self.uses_time() || other.uses_time(),
        )
    }
}

/// Length scales over which the function changes appreciably.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub space: f64,
    pub time: f64,
}

impl Default for Scales {
    fn default() -> Self {
        Scales { space: 1.0, time: 1.0 }
    }
}

/// A space-time function `u(x, t)` with metadata.
#[derive(Clone)]
pub struct FunctionHandle {
    eval: Evaluator,
    pub support: Option<SupportBox>,
    pub envelope: Option<GrowthEnvelope>,
    pub smoothness: Smoothness,
    pub epsilon: Option<f64>,
    pub dependence: Dependence,
    pub scales: Scales,
    /// Times where the function is only piecewise smooth.
    pub time_breaks: Vec<f64>,
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("support", &self.support)
            .field("envelope", &self.envelope)
            .field("smoothness", &self.smoothness)
            .field("epsilon", &self.epsilon)
            .field("dependence", &self.dependence)
            .field("scales", &self.scales)
            .field("time_breaks", &self.time_breaks)
            .finish_non_exhaustive()
    }
}

impl FunctionHandle {
    pub fn new(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        FunctionHandle {
            eval: Arc::new(f),
            support: None,
            envelope: None,
            smoothness: Smoothness::Smooth,
            epsilon: None,
            dependence: Dependence::Both,
            scales: Scales::default(),
            time_breaks: Vec::new(),
        }
    }

    /// Function of `x` only.
    pub fn spatial(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let mut h = Self::new(move |x, _| f(x));
        h.dependence = Dependence::SpaceOnly;
        h
    }

    /// Function of `t` only.
    pub fn temporal(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let mut h = Self::new(move |_, t| f(t));
        h.dependence = Dependence::TimeOnly;
        h
    }

    pub fn constant(c: f64) -> Self {
        let mut h = Self::new(move |_, _| c);
        h.dependence = Dependence::Constant;
        h.scales = Scales { space: f64::INFINITY, time: f64::INFINITY };
        h.envelope = Some(GrowthEnvelope::Bounded(c.abs()));
        if c == 0.0 {
            h.support = Some(SupportBox { center: Vec::new(), radius: 0.0, time: (0.0, 0.0) });
        }
        h
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn with_support(mut self, support: SupportBox) -> Self {
        self.support = Some(support);
        self
    }

    pub fn with_envelope(mut self, envelope: GrowthEnvelope) -> Self {
        self.envelope = Some(envelope);
        self
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_dependence(mut self, dependence: Dependence) -> Self {
        self.dependence = dependence;
        self
    }

    pub fn with_scales(mut self, space: f64, time: f64) -> Self {
        self.scales = Scales { space, time };
        self
    }

    pub fn with_time_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.time_breaks = breaks;
        self
    }

    /// Raw evaluation, no checks.
    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    /// Evaluation that rejects non-finite results.
    pub fn eval_checked(&self, x: &[f64], t: f64) -> Result<f64> {
        let v = self.eval(x, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric { message: format!("u({x:?}, {t}) = {v}"), location: t })
        }
    }

    pub fn evaluator(&self) -> Evaluator {
        self.eval.clone()
    }

    /// True when the zero support is declared (the function is identically 0).
    pub fn is_zero(&self) -> bool {
        matches!(&self.support, Some(s) if s.radius == 0.0 && s.time.0 == s.time.1)
            && self.dependence == Dependence::Constant
    }

    /// `a u + b v` with merged metadata.
    pub fn combine(a: f64, u: &FunctionHandle, b: f64, v: &FunctionHandle) -> FunctionHandle {
        let (fu, fv) = (u.eval.clone(), v.eval.clone());
        let support = match (&u.support, &v.support) {
            (Some(_), Some(sv)) if u.is_zero() => Some(sv.clone()),
            (Some(su), Some(_)) if v.is_zero() => Some(su.clone()),
            (Some(su), Some(sv)) => Some(su.union(sv)),
            _ => None,
        };
        let envelope = match (&u.envelope, &v.envelope) {
            (Some(GrowthEnvelope::Bounded(p)), Some(GrowthEnvelope::Bounded(q))) => {
                Some(GrowthEnvelope::Bounded(a.abs() * p + b.abs() * q))
            }
            (Some(e), None) | (None, Some(e)) => Some(e.clone()),
            (Some(e), Some(_)) => Some(e.clone()),
            (None, None) => None,
        };
        let mut breaks: Vec<f64> = u.time_breaks.iter().chain(&v.time_breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        FunctionHandle {
            eval: Arc::new(move |x, t| a * fu(x, t) + b * fv(x, t)),
            support,
            envelope,
            smoothness: u.smoothness.worse(v.smoothness),
            epsilon: match (u.epsilon, v.epsilon) {
                (Some(p), Some(q)) => Some(p.min(q)),
                (p, q) => p.or(q),
            },
            dependence: u.dependence.join(v.dependence),
            scales: Scales {
                space: u.scales.space.min(v.scales.space),
                time: u.scales.time.min(v.scales.time),
            },
            time_breaks: breaks,
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &FunctionHandle) -> FunctionHandle {
        Self::combine(1.0, self, -1.0, other)
    }

    /// `self + other`.
    pub fn add(&self, other: &FunctionHandle) -> FunctionHandle {
        Self::combine(1.0, self, 1.0, other)
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> FunctionHandle {
        Self::combine(c, self, 0.0, &FunctionHandle::zero())
    }

    /// Evaluate at random points outside the declared support and fail if any
    /// value is nonzero.
    pub fn spot_check_support(&self, n: usize, samples: usize, seed: u64) -> Result<()> {
        let Some(sup) = &self.support else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; n];
        for _ in 0..samples {
            let outside_space = sup.radius.is_finite() && rng.gen_bool(0.5);
            let t;
            if outside_space {
                let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
                let r = sup.radius * (1.0 + 1e-9) + rng.gen_range(0.0..2.0) * sup.radius.max(1.0);
                for i in 0..n {
                    x[i] = sup.center_coord(i) + r * dir[i] / norm;
                }
                t = rng.gen_range(-10.0..10.0);
            } else {
                for xi in x.iter_mut() {
                    *xi = rng.gen_range(-10.0..10.0);
                }
                let width = if sup.time.0.is_finite() && sup.time.1.is_finite() {
                    (sup.time.1 - sup.time.0).max(1.0)
                } else {
                    10.0
                };
                let below = rng.gen_bool(0.5);
                if below && sup.time.0.is_finite() {
                    t = sup.time.0 - 1e-9 * width - rng.gen_range(0.0..width);
                } else if sup.time.1.is_finite() {
                    t = sup.time.1 + 1e-9 * width + rng.gen_range(0.0..width);
                } else if sup.time.0.is_finite() {
                    t = sup.time.0 - 1e-9 * width - rng.gen_range(0.0..width);
                } else {
                    continue;
                }
            }
            let v = self.eval(&x, t);
            if v != 0.0 {
                return Err(Error::Validation(format!(
                    "declared support violated: u({x:?}, {t}) = {v}"
                )));
            }
        }
        Ok(())
    }
}
