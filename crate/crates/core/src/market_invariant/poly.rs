//! Closed-form roots of cubic and quartic polynomials over the complex numbers.

use num_complex::Complex64;

/// Relative threshold on the imaginary part for a root to count as real.
pub const REAL_ROOT_TOL: f64 = 1e-7;

fn zeta() -> Complex64 {
    Complex64::new(-0.5, 3f64.sqrt() / 2.0)
}

/// Picks the cube root of `(Δ1 ± √(Δ1² − 4Δ0³))/2` with the larger radicand,
/// which vanishes only when `Δ0 = Δ1 = 0`.
fn cardano_q(delta0: f64, delta1: f64) -> Complex64 {
    let disc = Complex64::new(delta1 * delta1 - 4.0 * delta0.powi(3), 0.0).sqrt();
    let d1 = Complex64::new(delta1, 0.0);
    let plus = (d1 + disc) / 2.0;
    let minus = (d1 - disc) / 2.0;
    let radicand = if plus.norm() >= minus.norm() { plus } else { minus };
    if radicand.norm() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        radicand.cbrt()
    }
}

/// Roots of `b1·x³ + b2·x² + b3·x + b4` with `b1 ≠ 0`.
pub fn cubic_roots(b1: f64, b2: f64, b3: f64, b4: f64) -> [Complex64; 3] {
    let (b, c, d) = (b2 / b1, b3 / b1, b4 / b1);
    let delta0 = b * b - 3.0 * c;
    let delta1 = 2.0 * b.powi(3) - 9.0 * b * c + 27.0 * d;
    let q = cardano_q(delta0, delta1);
    if q.norm() == 0.0 {
        let r = Complex64::new(-b / 3.0, 0.0);
        return [r, r, r];
    }
    let z = zeta();
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    let mut rot = Complex64::new(1.0, 0.0);
    for root in &mut roots {
        let qk = rot * q;
        *root = -(b + qk + delta0 / qk) / 3.0;
        rot *= z;
    }
    roots
}

/// Roots of `b1·x⁴ + b2·x³ + b3·x² + b4·x + b5` with `b1 ≠ 0`.
///
/// Uses the resolvent-cubic form with `T = ½√(−⅔r + (Q + Δ0/Q)/3)` and roots
/// `−b/4 + σT ± ½√(−4T² − 2r − σ·s/T)` for `σ = ±1`.
pub fn quartic_roots(b1: f64, b2: f64, b3: f64, b4: f64, b5: f64) -> [Complex64; 4] {
    let (b, c, d, e) = (b2 / b1, b3 / b1, b4 / b1, b5 / b1);
    let delta0 = c * c - 3.0 * b * d + 12.0 * e;
    let delta1 = 2.0 * c.powi(3) - 9.0 * b * c * d + 27.0 * b * b * e + 27.0 * d * d - 72.0 * c * e;
    let r = (8.0 * c - 3.0 * b * b) / 8.0;
    let s = (b.powi(3) - 4.0 * b * c + 8.0 * d) / 8.0;
    let shift = Complex64::new(-b / 4.0, 0.0);
    let scale = 1.0 + b.abs() + c.abs().sqrt() + d.abs().cbrt() + e.abs().sqrt().sqrt();

    let q = cardano_q(delta0, delta1);
    let candidates: Vec<Complex64> = if q.norm() == 0.0 {
        vec![Complex64::new(0.0, 0.0)]
    } else {
        let z = zeta();
        vec![q, q * z, q * z * z]
    };
    let t = candidates
        .iter()
        .map(|&qk| {
            let sum = if qk.norm() == 0.0 { qk } else { qk + delta0 / qk };
            (Complex64::new(-2.0 / 3.0 * r, 0.0) + sum / 3.0).sqrt() / 2.0
        })
        .find(|t| t.norm() > 1e-12 * scale);

    match t {
        Some(t) => {
            let mut roots = [Complex64::new(0.0, 0.0); 4];
            let mut k = 0;
            for sigma in [1.0, -1.0] {
                let ts = t * sigma;
                let inner = (-4.0 * ts * ts - 2.0 * r - s / ts).sqrt() / 2.0;
                for tau in [1.0, -1.0] {
                    roots[k] = shift + ts + inner * tau;
                    k += 1;
                }
            }
            roots
        }
        None => {
            // Biquadratic in y = x + b/4: y⁴ + r·y² + u = 0.
            let u = (-3.0 * b.powi(4) + 256.0 * e - 64.0 * b * d + 16.0 * b * b * c) / 256.0;
            let disc = Complex64::new(r * r - 4.0 * u, 0.0).sqrt();
            let y2p = (Complex64::new(-r, 0.0) + disc) / 2.0;
            let y2m = (Complex64::new(-r, 0.0) - disc) / 2.0;
            let (yp, ym) = (y2p.sqrt(), y2m.sqrt());
            [shift + yp, shift - yp, shift + ym, shift - ym]
        }
    }
}

/// Real parts of roots whose imaginary part is below `REAL_ROOT_TOL·|root|`.
pub fn real_roots(roots: &[Complex64]) -> Vec<f64> {
    roots
        .iter()
        .filter(|z| z.im.abs() <= REAL_ROOT_TOL * z.norm().max(1e-12))
        .map(|z| z.re)
        .collect()
}

/// Evaluates a polynomial with coefficients ordered from the highest degree.
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_derivative(coeffs: &[f64], x: f64) -> f64 {
    let degree = coeffs.len().saturating_sub(1);
    coeffs
        .iter()
        .take(degree)
        .enumerate()
        .fold(0.0, |acc, (k, &c)| acc * x + c * (degree - k) as f64)
}

/// Newton steps that are kept only while they shrink `|f(x)|`.
pub fn polish_root(coeffs: &[f64], mut x: f64) -> f64 {
    let mut fx = horner(coeffs, x).abs();
    for _ in 0..8 {
        let slope = horner_derivative(coeffs, x);
        if slope == 0.0 || fx == 0.0 {
            break;
        }
        let next = x - horner(coeffs, x) / slope;
        let fnext = horner(coeffs, next).abs();
        if fnext < fx {
            x = next;
            fx = fnext;
        } else {
            break;
        }
    }
    x
}
