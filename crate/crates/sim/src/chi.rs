//! Randomised check of the closed-form peak primitives against adaptive
//! quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtd_core::peak::{chi0, chi1};
use rtd_core::quadrature::integrate;

/// One parameter tuple (a, b, c, d) of ∫_a^b x^n / ((x² − c)² + d²) dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiReport {
    pub samples: usize,
    pub worst_chi0: f64,
    pub worst_chi1: f64,
    pub worst_sample: ChiSample,
}

impl ChiReport {
    pub fn worst(&self) -> f64 {
        self.worst_chi0.max(self.worst_chi1)
    }
}

/// Draw a tuple in the range met by resonant cell integrals: cells inside
/// a little more than [−k_M, k_M], peak positions c = γE for resonance
/// energies between a few meV and a few hundred meV, and relative widths
/// d/c from 10⁻⁴ to 10⁻¹. Half of the cells are placed on a peak.
pub fn sample(rng: &mut impl Rng) -> ChiSample {
    let c: f64 = rng.random_range(0.005..0.5);
    let d = c * 10f64.powf(rng.random_range(-4.0..-1.0));
    let width: f64 = 10f64.powf(rng.random_range(-4.0..-0.5));
    let a = if rng.random_bool(0.5) {
        let centre = if rng.random_bool(0.5) { c.sqrt() } else { -c.sqrt() };
        centre - rng.random_range(0.0..1.0) * width
    } else {
        rng.random_range(-1.0..1.0)
    };
    ChiSample { a, b: a + width, c, d }
}

/// Relative errors of χ⁰ and χ¹ for one tuple. χ¹ can vanish by symmetry,
/// so its error is measured against ∫|x| / ((x² − c)² + d²) dx.
pub fn errors(s: ChiSample) -> (f64, f64) {
    let ChiSample { a, b, c, d } = s;
    let f = move |x: f64| 1.0 / ((x * x - c).powi(2) + d * d);
    let root = c.sqrt();
    let breaks = [-root, 0.0, root];
    let tight = |g: &dyn Fn(f64) -> f64| {
        let rough = integrate(g, a, b, &breaks, 1e-6 * (b - a) / (d * d));
        integrate(g, a, b, &breaks, 1e-15 * rough.abs())
    };
    let q0 = tight(&f);
    let q1 = tight(&|x| x * f(x));
    let scale1 = tight(&|x| x.abs() * f(x));
    ((chi0(a, b, c, d) - q0).abs() / q0, (chi1(a, b, c, d) - q1).abs() / scale1)
}

pub fn chi_sweep(samples: usize, seed: u64) -> ChiReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ChiReport {
        samples,
        worst_chi0: 0.0,
        worst_chi1: 0.0,
        worst_sample: ChiSample { a: 0.0, b: 0.0, c: 0.0, d: 0.0 },
    };
    for _ in 0..samples {
        let s = sample(&mut rng);
        let (e0, e1) = errors(s);
        if e0.max(e1) > report.worst() {
            report.worst_sample = s;
        }
        report.worst_chi0 = report.worst_chi0.max(e0);
        report.worst_chi1 = report.worst_chi1.max(e1);
    }
    report
}
