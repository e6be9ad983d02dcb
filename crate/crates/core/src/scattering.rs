//! Stationary scattering states.
//!
//! For each wave number k the state Φ_k solves
//! `−(ħ²/2m) Φ'' + Q Φ = E_k Φ` on [0, L] with the open boundary conditions
//! that describe a plane wave injected from the left (k > 0) or from the
//! right (k < 0). The equation is integrated with fourth-order Runge-Kutta
//! from the outgoing side, where the solution is a pure transmitted wave, and
//! the result is rescaled to match the incoming amplitude.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::model::{Device, FrequencyMesh};

/// Square root with the branch cut on the negative imaginary axis.
///
/// The argument is taken in (−π/2, 3π/2], so the result lies in the
/// half-plane arg ∈ (−π/4, 3π/4]. On the real axis this gives √x for x ≥ 0
/// and i√|x| for x < 0, which selects decaying evanescent waves.
pub fn branch_sqrt(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut theta = z.im.atan2(z.re);
    if theta <= -std::f64::consts::FRAC_PI_2 {
        theta += 2.0 * std::f64::consts::PI;
    }
    Complex64::from_polar(r.sqrt(), 0.5 * theta)
}

/// Scattering state Φ_k on the spatial grid.
pub fn scattering_state(device: &Device, q: &[f64], k: f64, bias: f64) -> Result<Vec<Complex64>> {
    let n = device.nodes();
    ensure_len(q.len(), n, "potential")?;
    if !k.is_finite() || !bias.is_finite() {
        return Err(Error::NonFinite("scattering input"));
    }
    let params = &device.params;
    let gamma = params.gamma();
    let energy = params.dispersion(k, bias);
    let dx = device.dx();
    let length = device.grid.length();
    let i = Complex64::i();

    if k == 0.0 {
        // The injected amplitude 2ik vanishes; so does the state.
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let f = |qv: f64| gamma * (qv - energy);
    let mut phi = vec![Complex64::new(0.0, 0.0); n];
    if k > 0.0 {
        // Transmitted wave exp(i s_R (x − L)) on the right.
        let s_right = branch_sqrt(Complex64::new(k * k + gamma * bias, 0.0));
        let (y0, y1) = integrate(q, dx, &f, Complex64::new(1.0, 0.0), i * s_right, true, &mut phi);
        let scale = 2.0 * i * k / (y1 + i * k * y0);
        phi.iter_mut().for_each(|v| *v *= scale);
    } else {
        let s_left = branch_sqrt(Complex64::new(k * k - gamma * bias, 0.0));
        let (y0, y1) = integrate(q, dx, &f, Complex64::new(1.0, 0.0), -i * s_left, false, &mut phi);
        let scale = 2.0 * i * k * Complex64::from_polar(1.0, k * length) / (y1 + i * k * y0);
        phi.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(phi)
}

/// RK4 for y'' = f(Q) y on the nodes, from the right end when `backward`.
/// Writes y into `out` and returns (y, y') at the far end.
fn integrate(
    q: &[f64],
    dx: f64,
    f: &impl Fn(f64) -> f64,
    y_start: Complex64,
    dy_start: Complex64,
    backward: bool,
    out: &mut [Complex64],
) -> (Complex64, Complex64) {
    let n = q.len();
    let h = if backward { -dx } else { dx };
    let mut y = y_start;
    let mut dy = dy_start;
    let first = if backward { n - 1 } else { 0 };
    out[first] = y;
    for step in 0..n - 1 {
        let (j0, j1) = if backward {
            (n - 1 - step, n - 2 - step)
        } else {
            (step, step + 1)
        };
        let f0 = f(q[j0]);
        let fm = f(0.5 * (q[j0] + q[j1]));
        let f1 = f(q[j1]);
        let k1y = dy;
        let k1d = f0 * y;
        let k2y = dy + 0.5 * h * k1d;
        let k2d = fm * (y + 0.5 * h * k1y);
        let k3y = dy + 0.5 * h * k2d;
        let k3d = fm * (y + 0.5 * h * k2y);
        let k4y = dy + h * k3d;
        let k4d = f1 * (y + h * k3y);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        out[j1] = y;
    }
    (y, dy)
}

/// Scattering states for every point of a mesh, in mesh order.
pub fn scattering_states(
    device: &Device,
    q: &[f64],
    mesh: &FrequencyMesh,
    bias: f64,
) -> Result<Vec<Vec<Complex64>>> {
    ensure_finite(q, "potential")?;
    mesh.points()
        .par_iter()
        .map(|&k| scattering_state(device, q, k, bias))
        .collect()
}

/// Electron density n_j = ∫ g(k) |Φ_k(x_j)|² dk by the trapezoid rule.
pub fn density(device: &Device, mesh: &FrequencyMesh, states: &[Vec<Complex64>]) -> Vec<f64> {
    let weights = mesh.trapezoid_weights();
    let mut n = vec![0.0; device.nodes()];
    for ((&k, w), phi) in mesh.points().iter().zip(&weights).zip(states) {
        let wg = w * device.params.injection(k);
        for (nj, p) in n.iter_mut().zip(phi) {
            *nj += wg * p.norm_sqr();
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_sqrt_on_real_axis() {
        let s = branch_sqrt(Complex64::new(4.0, 0.0));
        assert!((s - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let s = branch_sqrt(Complex64::new(-4.0, 0.0));
        assert!((s - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        // Just below the positive real axis the branch is continuous.
        let s = branch_sqrt(Complex64::new(4.0, -1e-12));
        assert!((s - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        // Just below the negative real axis it is continuous as well; the
        // cut is on the negative imaginary axis.
        let s = branch_sqrt(Complex64::new(-4.0, -1e-12));
        assert!((s - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn branch_sqrt_squares_back() {
        for (re, im) in [(1.0, 2.0), (-3.0, 0.5), (-1.0, -2.0), (0.2, -5.0)] {
            let z = Complex64::new(re, im);
            let s = branch_sqrt(z);
            assert!((s * s - z).norm() < 1e-13);
            let arg = s.arg();
            assert!(arg > -std::f64::consts::FRAC_PI_4 - 1e-15);
            assert!(arg <= 3.0 * std::f64::consts::FRAC_PI_4 + 1e-15);
        }
    }

    fn plane_wave_error(intervals: usize, k: f64) -> f64 {
        let device = Device::new(Default::default(), Default::default(), intervals).unwrap();
        let q = vec![0.0; device.nodes()];
        let phi = scattering_state(&device, &q, k, 0.0).unwrap();
        phi.iter()
            .enumerate()
            .map(|(j, p)| (p - Complex64::from_polar(1.0, k * device.grid.x(j))).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn free_space_gives_plane_wave_to_fourth_order() {
        for k in [0.3, -0.45] {
            let coarse = plane_wave_error(300, k);
            let fine = plane_wave_error(600, k);
            assert!(coarse < 1e-3, "k={k}: {coarse}");
            let order = (coarse / fine).log2();
            assert!((order - 4.0).abs() < 0.3, "k={k}: order {order}");
        }
    }

    #[test]
    fn zero_wavenumber_state_vanishes() {
        let device = Device::standard();
        let q = device.external_potential(0.0);
        let phi = scattering_state(&device, &q, 0.0, 0.0).unwrap();
        assert!(phi.iter().all(|p| p.norm() == 0.0));
    }

    #[test]
    fn probability_flux_is_conserved() {
        // Left of the device Φ = e^{ikx} + r e^{−ikx}; right of it
        // Φ = t e^{i s_R (x − L)}. Flux balance: |r|² + (s_R/k)|t|² = 1.
        let device = Device::standard();
        let bias = 0.05;
        let q = device.external_potential(bias);
        for k in [0.2, 0.35, 0.5] {
            let phi = scattering_state(&device, &q, k, bias).unwrap();
            let r = phi[0] - 1.0;
            let t = phi[device.nodes() - 1];
            let s_right = (k * k + device.params.gamma() * bias).sqrt();
            let balance = r.norm_sqr() + s_right / k * t.norm_sqr();
            assert!((balance - 1.0).abs() < 1e-5, "k={k}: {balance}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let device = Device::standard();
        let q = vec![0.0; 5];
        assert!(matches!(
            scattering_state(&device, &q, 0.1, 0.0),
            Err(Error::LengthMismatch { .. })
        ));
        let q = vec![0.0; device.nodes()];
        assert!(matches!(
            scattering_state(&device, &q, f64::NAN, 0.0),
            Err(Error::NonFinite(_))
        ));
    }
}
