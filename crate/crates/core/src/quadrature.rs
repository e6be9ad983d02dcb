//! Adaptive Gauss-Kronrod quadrature for smooth, possibly sharply peaked,
//! integrands. Used to cross-check the closed-form peak integrals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod estimate and its difference to the embedded
/// 7-point Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Globally adaptive bisection: the interval with the largest error
/// estimate is split until the total estimate meets `tol` or the budget of
/// subintervals is spent.
fn adapt(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, budget: usize) -> f64 {
    let (value, err) = gk15(f, a, b);
    let mut pieces = vec![(a, b, value, err)];
    let mut total_err = err;
    while total_err > tol && pieces.len() < budget {
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v, e) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Cannot split further in floating point.
            pieces.push((lo, hi, v, 0.0));
            total_err -= e;
            continue;
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        total_err += e1 + e2 - e;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    // Sum in position order so the result does not depend on split history.
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    pieces.iter().map(|p| p.2).sum()
}

/// Integral of f over [a, b] with an absolute error target `tol`, splitting
/// first at every point of `breaks` that lies inside (a, b).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    inner.sort_by(f64::total_cmp);
    cuts.extend(inner);
    cuts.push(hi);
    let pieces = (cuts.len() - 1) as f64;
    sign * cuts
        .windows(2)
        .map(|w| adapt(&f, w[0], w[1], tol / pieces, 4000))
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, &[], 1e-14);
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn narrow_lorentzian() {
        let d: f64 = 1e-4;
        let v = integrate(|x| d / (x * x + d * d), -1.0, 1.0, &[0.0], 1e-13);
        let exact = 2.0 * (1.0 / d).atan();
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }
}
