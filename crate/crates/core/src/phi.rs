//! Exponential-integrator weights φ_k(z) = Σ_{i≥0} z^i / (i + k)!.
//!
//! φ₀ = e^z, φ₁(z) = (e^z − 1)/z and z φ_{k+1}(z) = φ_k(z) − 1/k!.
//! Divided differences φ_k[z₁, z₂] switch to a midpoint Taylor expansion
//! when the nodes nearly coincide.

use num_complex::Complex64;

/// Below this modulus φ₁ is summed from its Taylor series.
pub const PHI1_TAYLOR_RADIUS: f64 = 1e-3;

/// Node separation (relative to max(1, |midpoint|)) under which divided
/// differences use the confluent expansion.
pub const CONFLUENT_THRESHOLD: f64 = 1e-3;

/// Below this modulus general φ_k and their derivatives use the power series.
const SERIES_RADIUS: f64 = 4.0;
const SERIES_MAX_TERMS: usize = 96;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// e^z − 1 without cancellation for small |z|.
pub fn expm1(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        return Complex64::new(z.re.exp_m1(), 0.0);
    }
    // e^x cos y − 1 = expm1(x) cos y − 2 sin²(y/2)
    let half_sin = (0.5 * z.im).sin();
    let re = z.re.exp_m1() * z.im.cos() - 2.0 * half_sin * half_sin;
    let im = z.re.exp() * z.im.sin();
    Complex64::new(re, im)
}

/// φ₁(z) = (e^z − 1)/z with φ₁(0) = 1.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < PHI1_TAYLOR_RADIUS {
        // 1 + z/2 + z²/6 + z³/24 + z⁴/120 + z⁵/720 (Horner)
        let mut acc = Complex64::new(1.0 / 720.0, 0.0);
        for c in [1.0 / 120.0, 1.0 / 24.0, 1.0 / 6.0, 0.5, 1.0] {
            acc = acc * z + c;
        }
        acc
    } else {
        expm1(z) / z
    }
}

/// φ₁′(z) = (e^z (z − 1) + 1)/z², the confluent limit of the φ₁ divided difference.
pub fn phi1_derivative(z: Complex64) -> Complex64 {
    phi_derivative(1, 1, z)
}

/// (φ₁(z₁) − φ₁(z₂))/(z₁ − z₂), continuous through z₁ = z₂.
pub fn phi1_divided_difference(z1: Complex64, z2: Complex64) -> Complex64 {
    phi_divided_difference(1, z1, z2)
}

/// General φ_k(z).
pub fn phi(k: usize, z: Complex64) -> Complex64 {
    match k {
        0 => z.exp(),
        1 => phi1(z),
        _ if z.norm() < SERIES_RADIUS => phi_series(k, 0, z),
        _ => {
            let mut value = phi1(z);
            let mut factorial = 1.0;
            for order in 1..k {
                // φ_{order+1} = (φ_order − 1/order!)/z
                factorial *= order as f64;
                value = (value - 1.0 / factorial) / z;
            }
            value
        }
    }
}

/// j-th derivative of φ_k at z.
///
/// Uses φ_k′ = φ_k − k φ_{k+1}, hence
/// φ_k^{(j)} = Σ_i (−1)^i C(j, i) k(k+1)…(k+i−1) φ_{k+i}.
pub fn phi_derivative(k: usize, j: usize, z: Complex64) -> Complex64 {
    if j == 0 {
        return phi(k, z);
    }
    if z.norm() < SERIES_RADIUS {
        return phi_series(k, j, z);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut binom = 1.0;
    let mut rising = 1.0;
    for i in 0..=j {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += phi(k + i, z) * (sign * binom * rising);
        binom = binom * (j - i) as f64 / (i + 1) as f64;
        rising *= (k + i) as f64;
    }
    acc
}

/// φ_k[z₁, z₂] = (φ_k(z₁) − φ_k(z₂))/(z₁ − z₂).
pub fn phi_divided_difference(k: usize, z1: Complex64, z2: Complex64) -> Complex64 {
    let diff = z1 - z2;
    let mid = 0.5 * (z1 + z2);
    if diff.norm() < CONFLUENT_THRESHOLD * mid.norm().max(1.0) {
        // odd Taylor terms about the midpoint: Σ φ^{(j)}(m) h^{j−1}/j!, h = (z₁ − z₂)/2
        let h = 0.5 * diff;
        let h2 = h * h;
        phi_derivative(k, 1, mid)
            + phi_derivative(k, 3, mid) * h2 / 6.0
            + phi_derivative(k, 5, mid) * h2 * h2 / 120.0
    } else {
        (phi(k, z1) - phi(k, z2)) / diff
    }
}

/// e^a · φ₁(z) without overflow/underflow of the separate factors.
pub fn exp_times_phi1(a: Complex64, z: Complex64) -> Complex64 {
    if z.re > 1.0 {
        ((a + z).exp() - a.exp()) / z
    } else {
        a.exp() * phi1(z)
    }
}

/// Σ_i (i + j)!/i! · z^i/(i + j + k)!
fn phi_series(k: usize, j: usize, z: Complex64) -> Complex64 {
    // leading coefficient j!/(j + k)!
    let mut coeff = 1.0;
    for m in (j + 1)..=(j + k) {
        coeff /= m as f64;
    }
    let mut term_scale = coeff;
    let mut power = ONE;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..SERIES_MAX_TERMS {
        let term = power * term_scale;
        acc += term;
        if i > 4 && term.norm() <= 1e-18 * acc.norm() {
            break;
        }
        // ratio of consecutive coefficients: (i + j + 1)/((i + 1)(i + j + k + 1))
        term_scale *= (i + j + 1) as f64 / ((i + 1) as f64 * (i + j + k + 1) as f64);
        power *= z;
    }
    acc
}
