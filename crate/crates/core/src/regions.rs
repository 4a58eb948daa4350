//! The parabolic cylinder `Q_R`, the two partitions of its past exterior and
//! sampled checks of the kernel-ratio estimates on each piece.
//!
//! Step 1 splits the exterior into `A` (far from `x` relative to the elapsed
//! time), `B` (near) and `C` (inside the ball, deep past). Step 2 splits it into
//! `C`, `D` (elapsed time dominates), `E` (deep past) and `F` (recent past).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{KernelParams, SpaceTimePoint};

/// Seed used by every sampler unless the caller picks another.
pub const DEFAULT_SEED: u64 = 0xA11CE;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `{ |y - c_x| <= R, |tau - c_t| <= R^2 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub r: f64,
    pub center: SpaceTimePoint,
}

impl ParabolicCylinder {
    pub fn new(r: f64) -> Result<Self> {
        Self::centered(r, SpaceTimePoint::new(Vec::new(), 0.0))
    }

    pub fn centered(r: f64, center: SpaceTimePoint) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return domain(format!("cylinder size must be positive, got {r}"));
        }
        Ok(ParabolicCylinder { r, center })
    }

    pub fn contains(&self, y: &[f64], tau: f64) -> bool {
        let d2: f64 = y
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let c = self.center.x.get(i).copied().unwrap_or(0.0);
                (v - c) * (v - c)
            })
            .sum();
        d2.sqrt() <= self.r && (tau - self.center.t).abs() <= self.r * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Interior,
    A,
    B,
    C,
    D,
    E,
    F,
}

impl RegionKind {
    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Interior => "Q_R",
            RegionKind::A => "A_R",
            RegionKind::B => "B_R",
            RegionKind::C => "C_R",
            RegionKind::D => "D_R",
            RegionKind::E => "E_R",
            RegionKind::F => "F_R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// A classified point together with the scale parameters of the partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub kind: RegionKind,
    /// Sector of `y - x` (1-based coordinate and sign), for `A` and `B`.
    pub sector: Option<(usize, Sign)>,
    /// `R^{-1/3}`.
    pub delta: f64,
    /// `R^{3/2}`.
    pub t0: f64,
}

fn label(kind: RegionKind, sector: Option<(usize, Sign)>, r: f64) -> RegionLabel {
    RegionLabel { kind, sector, delta: r.powf(-1.0 / 3.0), t0: r.powf(1.5) }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len().max(b.len());
    (0..k)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Which of the `2n` cones around `x` contains `y`: the coordinate of
/// largest `|y_k - x_k|` (smallest index on ties) and its sign.
pub fn sector_index(y: &[f64], x: &[f64]) -> Result<(usize, Sign)> {
    if y.len() != x.len() {
        return domain("sector_index: y and x differ in dimension");
    }
    let mut best = 0;
    let mut best_abs = -1.0;
    for (k, (a, b)) in y.iter().zip(x).enumerate() {
        let d = (a - b).abs();
        if d > best_abs {
            best = k;
            best_abs = d;
        }
    }
    if !(best_abs > 0.0) {
        return domain("sector_index needs y != x");
    }
    let sign = if y[best] - x[best] >= 0.0 { Sign::Plus } else { Sign::Minus };
    Ok((best + 1, sign))
}

fn check_inputs(y: &[f64], tau: f64, t: f64, r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("R must be positive, got {r}"));
    }
    if !(tau < t) {
        return domain(format!("the partition covers the past only, need tau < t (tau = {tau}, t = {t})"));
    }
    if y.iter().any(|v| !v.is_finite()) || !tau.is_finite() {
        return domain("non-finite sample point");
    }
    Ok(())
}

/// Independent membership predicates of the step-1 sets, in the order
/// `[Interior, A, B, C]`. Ties follow the rules of [`classify_step1`].
pub fn step1_memberships(y: &[f64], tau: f64, x: &[f64], t: f64, r: f64) -> [bool; 4] {
    let ry = norm(y);
    let delta = r.powf(-1.0 / 3.0);
    let near = dist(y, x);
    let outside = ry > r;
    [
        !outside && tau.abs() <= r * r,
        outside && near >= delta * (t - tau),
        outside && near < delta * (t - tau),
        !outside && tau < -r * r,
    ]
}

/// Independent membership predicates of the step-2 sets, in the order
/// `[Interior, C, D, E, F]`. `D` takes the points it shares with `F`.
pub fn step2_memberships(y: &[f64], tau: f64, t: f64, r: f64) -> [bool; 5] {
    let ry = norm(y);
    let outside = ry > r;
    let el = t - tau;
    let long = el * el >= r * ry * ry;
    let cut = -r.powf(1.5);
    [
        !outside && tau.abs() <= r * r,
        !outside && tau < -r * r,
        outside && long,
        outside && !long && tau <= cut,
        outside && !long && tau > cut,
    ]
}

/// Step-1 label of `(y, tau)` relative to the point `(x, t)` and `Q_R`.
/// The boundary `|y - x| = delta (t - tau)` goes to `A`, `|y| = R` to the
/// inside of the ball.
pub fn classify_step1(y: &[f64], tau: f64, x: &[f64], t: f64, r: f64) -> Result<RegionLabel> {
    check_inputs(y, tau, t, r)?;
    let m = step1_memberships(y, tau, x, t, r);
    let kinds = [RegionKind::Interior, RegionKind::A, RegionKind::B, RegionKind::C];
    let Some(k) = m.iter().position(|&b| b) else {
        return Err(uncovered(tau, r));
    };
    let kind = kinds[k];
    let sector = match kind {
        RegionKind::A | RegionKind::B if y.len() == x.len() => sector_index(y, x).ok(),
        _ => None,
    };
    Ok(label(kind, sector, r))
}

/// Step-2 label of `(y, tau)` for the point `(0, t)`. Ties
/// `(t - tau)^2 = R |y|^2` go to `D`, `tau = -R^{3/2}` to `E`.
pub fn classify_step2(y: &[f64], tau: f64, t: f64, r: f64) -> Result<RegionLabel> {
    check_inputs(y, tau, t, r)?;
    let m = step2_memberships(y, tau, t, r);
    if m[0] {
        return domain(format!("(y, tau) lies inside Q_R (R = {r}); step 2 partitions the exterior"));
    }
    let kinds = [RegionKind::C, RegionKind::D, RegionKind::E, RegionKind::F];
    match m[1..].iter().position(|&b| b) {
        Some(k) => Ok(label(kinds[k], None, r)),
        None => Err(uncovered(tau, r)),
    }
}

fn uncovered(tau: f64, r: f64) -> Error {
    Error::Domain(format!(
        "tau = {tau} lies above R^2 = {} inside the ball; the partition needs t <= R^2",
        r * r
    ))
}

/// Result of an exactness sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub samples: usize,
    pub double_assigned: usize,
    pub unassigned: usize,
    /// Count per label in the order of the membership arrays.
    pub counts: Vec<usize>,
    pub pass: bool,
}

/// Random point of the past exterior of `Q_R`: `|y|` log-uniform over
/// `[R/10, 100 R]` or uniform in the ball, `t - tau` log-uniform over
/// `[1e-3, 1e3 R^2]`.
pub fn sample_exterior(rng: &mut impl Rng, n: usize, t: f64, r: f64) -> (Vec<f64>, f64) {
    loop {
        let radius = if rng.gen_bool(0.5) {
            r * rng.gen::<f64>().powf(1.0 / n as f64)
        } else {
            r * 10f64.powf(rng.gen_range(-1.0..2.0))
        };
        let y = random_direction(rng, n).into_iter().map(|c| c * radius).collect::<Vec<_>>();
        let hi = (1e3 * r * r).log10();
        let tau = t - 10f64.powf(rng.gen_range(-3.0..hi));
        let inside = norm(&y) <= r && tau.abs() <= r * r;
        if !inside && !(norm(&y) <= r && tau > r * r) {
            return (y, tau);
        }
    }
}

fn random_direction(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = norm(&v);
        if l > 1e-3 && l <= 1.0 {
            return v.into_iter().map(|c| c / l).collect();
        }
    }
}

fn tally<const K: usize>(
    samples: usize,
    mut draw: impl FnMut() -> [bool; K],
) -> PartitionReport {
    let mut counts = vec![0; K];
    let (mut double, mut none) = (0, 0);
    for _ in 0..samples {
        let m = draw();
        let hits = m.iter().filter(|&&b| b).count();
        match hits {
            0 => none += 1,
            1 => counts[m.iter().position(|&b| b).unwrap_or(0)] += 1,
            _ => double += 1,
        }
    }
    PartitionReport {
        samples,
        double_assigned: double,
        unassigned: none,
        counts,
        pass: double == 0 && none == 0,
    }
}

/// Exactness of the step-1 partition over `samples` random exterior points.
pub fn partition_check_step1(
    x: &[f64],
    t: f64,
    r: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<PartitionReport> {
    partition_pre(x, t, r)?;
    Ok(tally(samples, || {
        let (y, tau) = sample_exterior(rng, x.len(), t, r);
        step1_memberships(&y, tau, x, t, r)
    }))
}

/// Exactness of the step-2 partition over `samples` random exterior points.
pub fn partition_check_step2(
    n: usize,
    t: f64,
    r: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<PartitionReport> {
    partition_pre(&vec![0.0; n], t, r)?;
    Ok(tally(samples, || {
        let (y, tau) = sample_exterior(rng, n, t, r);
        step2_memberships(&y, tau, t, r)
    }))
}

fn partition_pre(x: &[f64], t: f64, r: f64) -> Result<()> {
    if x.is_empty() {
        return domain("dimension must be at least 1");
    }
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("R must be positive, got {r}"));
    }
    if t.abs() > r * r {
        return domain(format!("|t| = {} must not exceed R^2 = {}", t.abs(), r * r));
    }
    Ok(())
}

/// Largest sampled kernel ratio on one region against its envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub region: RegionKind,
    pub r: f64,
    pub samples: usize,
    /// Largest ratio, or largest `|log ratio|` when `log_scale` is set.
    pub max_observed: f64,
    pub envelope: f64,
    /// Constant in the envelope, derived from the estimate chain.
    pub fitted_c: f64,
    pub log_scale: bool,
    /// No sample landed in the region.
    pub empty: bool,
    pub pass: bool,
}

impl EnvelopeReport {
    fn finish(region: RegionKind, r: f64, samples: usize, max: f64, env: f64, c: f64, log: bool) -> Self {
        let empty = samples == 0;
        EnvelopeReport {
            region,
            r,
            samples,
            max_observed: max,
            envelope: env,
            fitted_c: c,
            log_scale: log,
            empty,
            pass: !empty && max <= env * (1.0 + 1e-9),
        }
    }
}

const ATTEMPTS_PER_SAMPLE: usize = 400;

/// Draw up to `samples` exterior points that fall in `kind` under `pick`.
fn collect(
    rng: &mut impl Rng,
    n: usize,
    t: f64,
    r: f64,
    samples: usize,
    mut pick: impl FnMut(&[f64], f64) -> bool,
) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples * ATTEMPTS_PER_SAMPLE {
        if out.len() == samples {
            break;
        }
        let (y, tau) = sample_exterior(rng, n, t, r);
        if pick(&y, tau) {
            out.push((y, tau));
        }
    }
    out
}

fn ratio_pre(x: &[f64], t: f64, r: f64, samples: usize) -> Result<()> {
    partition_pre(x, t, r)?;
    if samples == 0 {
        return domain("need at least one sample");
    }
    if norm(x) > r / 3.0 {
        return domain(format!("|x| = {} must not exceed R/3 = {}", norm(x), r / 3.0));
    }
    Ok(())
}

/// Ratio `M(x - y, t - tau) / M(x +- e_j / delta^2 - y, t - tau)` over `A_R`,
/// with `(j, +-)` the sector of `y - x`. The envelope `exp(-c / delta)` uses
/// `c = (2/sqrt(n) - 3 delta / 2) / 4`, which follows from
/// `|y_j - x_j| >= |y - x| / sqrt(n)`, `|y - x| >= 2R/3` and
/// `t - tau <= |y - x| / delta`.
pub fn verify_ratio_c1(
    x: &[f64],
    t: f64,
    r: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<EnvelopeReport> {
    ratio_pre(x, t, r, samples)?;
    let n = x.len();
    let delta = r.powf(-1.0 / 3.0);
    let pts = collect(rng, n, t, r, samples, |y, tau| step1_memberships(y, tau, x, t, r)[1]);
    let mut max: f64 = 0.0;
    for (y, tau) in &pts {
        let lr = c1_log_ratio(y, *tau, x, t, delta)?;
        max = max.max(lr.exp());
    }
    let c = (2.0 / (n as f64).sqrt() - 1.5 * delta) / 4.0;
    Ok(EnvelopeReport::finish(RegionKind::A, r, pts.len(), max, (-c / delta).exp(), c, false))
}

/// `log M(x - y, dt) - log M(x +- e_j/delta^2 - y, dt)` for the sector of `y`.
pub fn c1_log_ratio(y: &[f64], tau: f64, x: &[f64], t: f64, delta: f64) -> Result<f64> {
    let (j, sign) = sector_index(y, x)?;
    let shift = if sign == Sign::Plus { 1.0 } else { -1.0 } / (delta * delta);
    let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut dshift = dx.clone();
    dshift[j - 1] += shift;
    crate::kernel::kernel_log_ratio(&dx, &dshift, t - tau)
}

/// Runs [`verify_ratio_c1`] for each `R` and reports whether the sampled
/// maximum strictly decreases along the schedule.
pub fn c1_schedule(
    x: &[f64],
    t: f64,
    rs: &[f64],
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<EnvelopeReport>, bool)> {
    let reports = rs
        .iter()
        .map(|&r| verify_ratio_c1(x, t, r, samples, rng))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = reports.windows(2).all(|w| w[1].max_observed < w[0].max_observed);
    Ok((reports, decreasing))
}

/// `|log M(x - y, dt) / M(-y, dt)|` over `B_R` against
/// `delta (|x|/2 + 3|x|^2/4)`, and over `C_R` against `c |x| / R` with
/// `c = R (|x| + 2R) / (4 (R^2 + t))`.
pub fn verify_ratio_c2_c3(
    x: &[f64],
    t: f64,
    r: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(EnvelopeReport, EnvelopeReport)> {
    ratio_pre(x, t, r, samples)?;
    let n = x.len();
    let delta = r.powf(-1.0 / 3.0);
    let ax = norm(x);
    let zero = vec![0.0; n];
    let shift_log = |y: &[f64], tau: f64| -> Result<f64> {
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let d0: Vec<f64> = y.iter().map(|b| -b).collect();
        Ok(crate::kernel::kernel_log_ratio(&dx, &d0, t - tau)?.abs())
    };

    let b_pts = collect(rng, n, t, r, samples, |y, tau| step1_memberships(y, tau, x, t, r)[2]);
    let mut b_max: f64 = 0.0;
    for (y, tau) in &b_pts {
        b_max = b_max.max(shift_log(y, *tau)?);
    }
    let b_env = delta * (ax / 2.0 + 0.75 * ax * ax);
    let b = EnvelopeReport::finish(RegionKind::B, r, b_pts.len(), b_max, b_env, delta, true);

    let c_pts = collect(rng, n, t, r, samples, |y, tau| step1_memberships(y, tau, &zero, t, r)[3]);
    let mut c_max: f64 = 0.0;
    for (y, tau) in &c_pts {
        c_max = c_max.max(shift_log(y, *tau)?);
    }
    let c = r * (ax + 2.0 * r) / (4.0 * (r * r + t));
    let c_rep = EnvelopeReport::finish(RegionKind::C, r, c_pts.len(), c_max, c * ax / r, c, true);
    Ok((b, c_rep))
}

/// Step-2 ratios. On `C_R` and `D_R`: `|log M(-y, -tau) / M(-y, t - tau)|`
/// against `c/R^2 + o(1)` and `c/R + o(1)`. On `E_R` and `F_R`:
/// `M(-y, t - tau) / M(-y, t + t0 - tau)` with `t0 = R^{3/2}`.
///
/// All envelopes are the chain bounds evaluated at the extreme admissible
/// point, so they are explicit rather than up to constants. With
/// `P = n/2 + 1 + s`:
/// - `C`: `|t| (9P/8 + 9/32) / R^2`,
/// - `D`: `P |t| / m + |t| (1 + t_+/m) / (4R)` with `m = R^{3/2} - t_+`,
/// - `E`: `(1 + t0/T)^P exp(-T t0 / (4R (T + t0)))` with `T = t + R^{3/2}`,
/// - `F`: the supremum over `0 < T' <= T` of `(1 + t0/T')^P exp(-k R^2 / (4T'))`
///   with `k = t0 / (T + t0)`.
pub fn verify_ratio_step2(
    p: &KernelParams,
    t: f64,
    r: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<EnvelopeReport>> {
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("R must be positive, got {r}"));
    }
    if t.abs() > r * r / 9.0 {
        return domain(format!("step 2 needs |t| <= R^2/9, got |t| = {} with R = {r}", t.abs()));
    }
    if samples == 0 {
        return domain("need at least one sample");
    }
    let n = p.n;
    let pe = p.time_exponent();
    let t0 = r.powf(1.5);
    let tp = t.max(0.0);
    let log_m = |y2: f64, dt: f64| -> f64 {
        if dt > 0.0 {
            -pe * dt.ln() - y2 / (4.0 * dt)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut out = Vec::with_capacity(4);

    // C and D compare the kernel seen from time 0 with the one seen from t.
    let shift_max = |kind: RegionKind, idx: usize, env: f64, c: f64, rng: &mut ChaCha8Rng| {
        let pts = collect(rng, n, t, r, samples, |y, tau| step2_memberships(y, tau, t, r)[idx]);
        let mut max: f64 = 0.0;
        for (y, tau) in &pts {
            let y2: f64 = y.iter().map(|v| v * v).sum();
            let lr = log_m(y2, -tau) - log_m(y2, t - tau);
            max = max.max(if lr.is_nan() { f64::INFINITY } else { lr.abs() });
        }
        EnvelopeReport::finish(kind, r, pts.len(), max, env, c, true)
    };
    let mut inner = ChaCha8Rng::seed_from_u64(rng.gen());
    let c_c = t.abs() * (9.0 * pe / 8.0 + 9.0 / 32.0);
    out.push(shift_max(RegionKind::C, 1, c_c / (r * r), c_c, &mut inner));
    let m = t0 - tp;
    if m > 0.0 {
        let c_d = t.abs() * (1.0 + tp / m) / 4.0;
        out.push(shift_max(RegionKind::D, 2, pe * t.abs() / m + c_d / r, c_d, &mut inner));
    } else {
        // D reaches tau >= 0 where the kernel from time 0 vanishes.
        out.push(EnvelopeReport::finish(RegionKind::D, r, 0, f64::INFINITY, 0.0, f64::NAN, true));
    }

    // E and F compare the kernel seen from t with the one seen from t + t0.
    let big_t = t + t0;
    let forward = |kind: RegionKind, idx: usize, env: f64, c: f64, rng: &mut ChaCha8Rng| {
        let pts = collect(rng, n, t, r, samples, |y, tau| step2_memberships(y, tau, t, r)[idx]);
        let mut max: f64 = 0.0;
        for (y, tau) in &pts {
            let y2: f64 = y.iter().map(|v| v * v).sum();
            let lr = log_m(y2, t - tau) - log_m(y2, t + t0 - tau);
            max = max.max(lr.exp());
        }
        EnvelopeReport::finish(kind, r, pts.len(), max, env, c, false)
    };
    if big_t > 0.0 {
        let k = t0 / (big_t + t0);
        let lead = (1.0 + t0 / big_t).powf(pe);
        let e_env = lead * (-big_t * k / (4.0 * r)).exp();
        out.push(forward(RegionKind::E, 3, e_env, k / 4.0, &mut inner));
        let f_env = f_envelope(pe, t0, big_t, k * r * r);
        out.push(forward(RegionKind::F, 4, f_env, k / 4.0, &mut inner));
    } else {
        out.push(EnvelopeReport::finish(RegionKind::E, r, 0, f64::INFINITY, 0.0, f64::NAN, false));
        out.push(EnvelopeReport::finish(RegionKind::F, r, 0, f64::INFINITY, 0.0, f64::NAN, false));
    }
    Ok(out)
}

/// `sup_{0 < T <= hi} (1 + t0/T)^P exp(-q / (4T))`. The log is smooth in `T`
/// with at most one stationary point.
fn f_envelope(pe: f64, t0: f64, hi: f64, q: f64) -> f64 {
    let g = |tt: f64| pe * (t0 / tt).ln_1p() - q / (4.0 * tt);
    let mut best = g(hi);
    let den = 4.0 * pe * t0 - q;
    if den > 0.0 {
        let star = q * t0 / den;
        if star > 0.0 && star < hi {
            best = best.max(g(star));
        }
    }
    best.exp()
}
