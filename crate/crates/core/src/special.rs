//! Gamma function and a few derived constants.

use std::f64::consts::PI;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments. Poles return `NaN`.
pub fn gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x < 0.5 {
        // reflection
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    if x == x.floor() && x <= 171.0 {
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return acc;
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let w = z + LANCZOS_G + 0.5;
    // split the power to delay overflow for large arguments
    let half = w.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * half * (-w).exp() * sum
}

/// Surface measure of the unit sphere in R^n (2 for n = 1).
pub fn unit_sphere_measure(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(1.5), PI.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-15);
        assert_relative_eq!(gamma(1.0 / 3.0), 2.678_938_534_707_747_6, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.25), 3.625_609_908_221_908_3, max_relative = 1e-13);
        assert_relative_eq!(gamma(2.5), 1.329_340_388_179_137, max_relative = 1e-13);
        assert_relative_eq!(gamma(10.3), 716_430.689_062_376_5, max_relative = 1e-12);
    }

    #[test]
    fn gamma_negative_arguments() {
        assert_relative_eq!(gamma(-0.5), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(-1.5), 4.0 * PI.sqrt() / 3.0, max_relative = 1e-13);
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-2.0).is_nan());
    }

    #[test]
    fn gamma_recurrence() {
        for i in 1..200 {
            let x = 0.05 + i as f64 * 0.073;
            assert_relative_eq!(gamma(x + 1.0), x * gamma(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn sphere_measures() {
        assert_relative_eq!(unit_sphere_measure(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_measure(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_measure(3), 4.0 * PI, max_relative = 1e-14);
    }
}
