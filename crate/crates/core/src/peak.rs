//! Closed-form integrals of Lorentzian-like peaks in the wave number.
//!
//! Near a resonance z = E − iΓ/2 the resonant amplitude behaves like
//! 1/|E_k − z|², and with the parabolic dispersion this becomes
//! γ²/((k² − c)² + d²). Against a piecewise-linear numerator the cell
//! integrals reduce to the two primitives below, so a coarse frequency mesh
//! still captures a peak of any width exactly.

use num_complex::Complex64;

/// χ⁰(a, b, c, d) = ∫_a^b dx / ((x² − c)² + d²), for d > 0.
pub fn chi0(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let z0 = Complex64::new(c, -d).sqrt();
    // ln((b ± z0)/(a ± z0)) written as ln(1 + (b − a)/(a ± z0)): both points
    // sit in the same half-plane, so this is the continuous branch, and it
    // keeps its digits when the cell is short.
    let logs = ln_1p((b - a) / (a + z0)) - ln_1p((b - a) / (a - z0));
    (logs / z0).im / (2.0 * d)
}

/// ln(1 + u) accurate for small |u|.
fn ln_1p(u: Complex64) -> Complex64 {
    let re = 0.5 * (u.re * (2.0 + u.re) + u.im * u.im).ln_1p();
    Complex64::new(re, u.im.atan2(1.0 + u.re))
}

/// χ¹(a, b, c, d) = ∫_a^b x dx / ((x² − c)² + d²), for d > 0.
pub fn chi1(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let x = (b * b - c) / d;
    let y = (a * a - c) / d;
    // Far from the peak both arguments are large and nearly equal, and the
    // plain difference of arctangents loses most of its digits.
    let diff = if x * y > -1.0 {
        ((b - a) * (b + a) / d / (1.0 + x * y)).atan()
    } else {
        x.atan() - y.atan()
    };
    diff / (2.0 * d)
}

/// ∫_{k0}^{k1} R(k) / |E_k − z|² dk with R linear between `r0` at `k0` and
/// `r1` at `k1`, and E_k the biased dispersion: k²/γ for k ≥ 0 and
/// k²/γ − bias for k < 0.
///
/// Cells straddling k = 0 are split there because the dispersion branch
/// changes.
pub fn resonant_cell_integral(k0: f64, k1: f64, r0: f64, r1: f64, z: Complex64, bias: f64, gamma: f64) -> f64 {
    if k1 <= k0 {
        return 0.0;
    }
    if k0 < 0.0 && k1 > 0.0 {
        let r_mid = r0 + (r1 - r0) * (-k0) / (k1 - k0);
        return resonant_cell_integral(k0, 0.0, r0, r_mid, z, bias, gamma)
            + resonant_cell_integral(0.0, k1, r_mid, r1, z, bias, gamma);
    }
    let slope = (r1 - r0) / (k1 - k0);
    let offset = r0 - slope * k0;
    let shift = if k1 <= 0.0 { bias } else { 0.0 };
    let c = gamma * (z.re + shift);
    let d = -gamma * z.im;
    gamma * gamma * (slope * chi1(k0, k1, c, d) + offset * chi0(k0, k1, c, d))
}
