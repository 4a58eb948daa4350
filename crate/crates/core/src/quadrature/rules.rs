//! Fixed Gaussian rules and an adaptive Gauss-Kronrod integrator.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest supported Gauss-Hermite order.
pub const MAX_HERMITE_ORDER: usize = 200;

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Hermite rule for the weight `exp(-z^2)` on the real line, nodes ascending.
pub fn gauss_hermite_nodes(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = gauss_hermite(order)?;
    Ok((r.nodes.clone(), r.weights.clone()))
}

/// Cached Gauss-Hermite rule.
pub fn gauss_hermite(order: usize) -> Result<Arc<Rule>> {
    if order == 0 {
        return Err(Error::Unsupported("Gauss-Hermite order must be at least 1".into()));
    }
    if order > MAX_HERMITE_ORDER {
        return Err(Error::Unsupported(format!(
            "Gauss-Hermite order {order} exceeds the supported maximum {MAX_HERMITE_ORDER}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    Ok(guard.entry(order).or_insert_with(|| Arc::new(compute_hermite(order))).clone())
}

fn compute_hermite(n: usize) -> Rule {
    // Golub-Welsch: roots are the eigenvalues of the Jacobi matrix with zero
    // diagonal and off-diagonal sqrt(k/2). Each root is then polished by
    // Newton on the scaled orthonormal recurrence, which also yields the weight.
    let mut d = vec![0.0; n];
    let mut e: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    e.push(0.0);
    tridiagonal_eigenvalues(&mut d, &mut e);
    d.sort_by(f64::total_cmp);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (i, &root) in d.iter().enumerate() {
        let mut z = root;
        let mut pp = 1.0;
        for _ in 0..3 {
            // recurrence on h_j(z) exp(-z^2/2) so large orders do not overflow
            let mut p1 = pim4 * (-0.5 * z * z).exp();
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            if step.is_finite() && step.abs() < 1e-6 * (1.0 + z.abs()) {
                z -= step;
            }
        }
        x[i] = z;
        // weight 2 / h'(z)^2 with the scaling factor exp(-z^2) restored
        w[i] = 2.0 / (pp * pp) * (-z * z).exp();
    }
    // enforce exact symmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let xs = 0.5 * (x[j] - x[i]);
        let ws = 0.5 * (w[i] + w[j]);
        x[i] = -xs;
        x[j] = xs;
        w[i] = ws;
        w[j] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Rule { nodes: x, weights: w }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with shifts.
/// `d` holds the diagonal, `e[0..n-1]` the subdiagonal; results land in `d`.
fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Cached Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(order: usize) -> Arc<Rule> {
    let order = order.max(1);
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    guard.entry(order).or_insert_with(|| Arc::new(compute_legendre(order))).clone()
}

fn compute_legendre(n: usize) -> Rule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Rule { nodes: x, weights: w }
}

/// Integrate `f` over `[a, b]` with the `order`-point Gauss-Legendre rule.
pub fn gl_integrate<F: FnMut(f64) -> f64>(order: usize, a: f64, b: f64, mut f: F) -> f64 {
    let r = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    r.nodes.iter().zip(&r.weights).map(|(z, w)| w * f(mid + half * z)).sum::<f64>() * half
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Result of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol |I|)`
/// or after `max_intervals` subdivisions.
pub fn adaptive_gk15<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> AdaptiveResult {
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    intervals.push((a, b, v, e));
    let mut evaluations = 15;
    loop {
        let total: f64 = intervals.iter().map(|i| i.2).sum();
        let err: f64 = intervals.iter().map(|i| i.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || intervals.len() >= max_intervals {
            return AdaptiveResult { value: total, error: err, evaluations };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_small_orders() {
        let (x, w) = gauss_hermite_nodes(1).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_relative_eq!(w[0], PI.sqrt(), max_relative = 1e-14);

        let (x, w) = gauss_hermite_nodes(2).unwrap();
        assert_relative_eq!(x[0], -(0.5f64).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(x[1], (0.5f64).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(w[0], PI.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(w[1], PI.sqrt() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn hermite_weight_sums() {
        for order in [1, 2, 3, 5, 8, 13, 20, 40, 64, 100, 150, 200] {
            let (_, w) = gauss_hermite_nodes(order).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - PI.sqrt()).abs() < 1e-12, "order {order}: {sum}");
        }
    }

    #[test]
    fn hermite_rejects_unsupported_orders() {
        assert!(matches!(gauss_hermite_nodes(0), Err(Error::Unsupported(_))));
        assert!(matches!(gauss_hermite_nodes(201), Err(Error::Unsupported(_))));
    }

    #[test]
    fn hermite_nodes_sorted_and_symmetric() {
        let (x, w) = gauss_hermite_nodes(21).unwrap();
        for i in 0..x.len() {
            assert!(i == 0 || x[i] > x[i - 1]);
            assert_relative_eq!(x[i], -x[x.len() - 1 - i], epsilon = 1e-14);
            assert_relative_eq!(w[i], w[x.len() - 1 - i], max_relative = 1e-13);
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        for order in 1..=12 {
            for k in 0..(2 * order) {
                let v = gl_integrate(order, -1.0, 1.0, |x| x.powi(k as i32));
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((v - exact).abs() < 1e-13, "order {order} degree {k}");
            }
        }
    }

    #[test]
    fn kronrod_adaptive_handles_peaks() {
        let r = adaptive_gk15(|x| 1.0 / (1e-4 + (x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-12, 1e-12, 1000);
        let exact = 100.0 * ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan());
        assert_relative_eq!(r.value, exact, max_relative = 1e-10);
    }
}
