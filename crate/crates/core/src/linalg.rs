//! Banded linear solvers.
//!
//! Every matrix in this crate is tridiagonal, possibly bordered by one dense
//! row and column. The solvers here are O(n) and never form a dense matrix.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solve a real tridiagonal system with the Thomas algorithm.
///
/// `sub[i]` couples row i+1 to column i and `sup[i]` couples row i to
/// column i+1. Intended for diagonally dominant matrices, where no pivoting
/// is needed.
pub fn solve_tridiagonal_real(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(Error::LengthMismatch {
            what: "tridiagonal system",
            got: rhs.len(),
            expected: n,
        });
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Singular(0));
    }
    if n > 1 {
        c[0] = sup[0] / denom;
    }
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(i));
        }
        if i + 1 < n {
            c[i] = sup[i] / denom;
        }
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Complex tridiagonal matrix in band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub sup: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            sub: vec![z; n.saturating_sub(1)],
            diag: vec![z; n],
            sup: vec![z; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn factor(&self) -> Result<TridiagonalLu> {
        TridiagonalLu::new(self)
    }
}

/// LU factorisation of a complex tridiagonal matrix with partial pivoting.
///
/// One factorisation serves any number of right-hand sides, which is how
/// the Crank-Nicolson propagator advances all frequencies with one matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    pub fn new(m: &Tridiagonal) -> Result<Self> {
        let n = m.dim();
        if m.sub.len() + 1 != n || m.sup.len() + 1 != n {
            return Err(Error::LengthMismatch {
                what: "tridiagonal bands",
                got: m.sub.len(),
                expected: n.saturating_sub(1),
            });
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut dl = m.sub.clone();
        let mut d = m.diag.clone();
        let mut du = m.sup.clone();
        let mut du2 = vec![zero; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm_sqr() >= dl[i].norm_sqr() {
                if d[i] == zero {
                    return Err(Error::Singular(i));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == zero {
            return Err(Error::Singular(n - 1));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        debug_assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let bi = b[i];
                b[i + 1] -= self.dl[i] * bi;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solve the bordered system
///
/// ```text
/// [ T   c ] [x]   [b]
/// [ rᵀ  g ] [y] = [β]
/// ```
///
/// where T is tridiagonal. Gaussian elimination with row interchanges
/// between neighbouring rows keeps the fill to one extra superdiagonal, and
/// the border row takes part in pivoting at the last column, where a nearly
/// singular T produces its small pivot.
pub fn solve_bordered(
    t: &Tridiagonal,
    c: &[Complex64],
    r: &[Complex64],
    g: Complex64,
    b: &[Complex64],
    beta: Complex64,
) -> Result<(Vec<Complex64>, Complex64)> {
    let n = t.dim();
    if c.len() != n || r.len() != n || b.len() != n || n < 2 {
        return Err(Error::LengthMismatch {
            what: "bordered system",
            got: b.len(),
            expected: n,
        });
    }
    let zero = Complex64::new(0.0, 0.0);

    #[derive(Clone, Copy)]
    struct Row {
        // Entries at columns j, j+1, j+2 relative to the active column j,
        // then the border column and the right-hand side.
        v: [Complex64; 3],
        e: Complex64,
        b: Complex64,
    }

    let mut border = r.to_vec();
    border.push(zero);
    border.push(zero);
    let mut border_e = g;
    let mut border_b = beta;

    let mut pivots: Vec<Row> = Vec::with_capacity(n);
    let mut cur = Row {
        v: [t.diag[0], t.sup[0], zero],
        e: c[0],
        b: b[0],
    };
    for j in 0..n - 1 {
        let mut next = Row {
            v: [
                t.sub[j],
                t.diag[j + 1],
                if j + 1 < n - 1 { t.sup[j + 1] } else { zero },
            ],
            e: c[j + 1],
            b: b[j + 1],
        };
        if next.v[0].norm_sqr() > cur.v[0].norm_sqr() {
            std::mem::swap(&mut cur, &mut next);
        }
        if cur.v[0] == zero {
            return Err(Error::Singular(j));
        }
        let f = next.v[0] / cur.v[0];
        let reduced = Row {
            v: [next.v[1] - f * cur.v[1], next.v[2] - f * cur.v[2], zero],
            e: next.e - f * cur.e,
            b: next.b - f * cur.b,
        };
        let f = border[j] / cur.v[0];
        border[j + 1] -= f * cur.v[1];
        border[j + 2] -= f * cur.v[2];
        border_e -= f * cur.e;
        border_b -= f * cur.b;
        pivots.push(cur);
        cur = reduced;
    }

    // Final 2x2 block in columns n-1 and the border column.
    let mut last = (cur.v[0], cur.e, cur.b);
    let mut other = (border[n - 1], border_e, border_b);
    if other.0.norm_sqr() > last.0.norm_sqr() {
        std::mem::swap(&mut last, &mut other);
    }
    if last.0 == zero {
        return Err(Error::Singular(n - 1));
    }
    let f = other.0 / last.0;
    let e = other.1 - f * last.1;
    if e == zero {
        return Err(Error::Singular(n));
    }
    let y = (other.2 - f * last.2) / e;
    let mut x = vec![zero; n];
    x[n - 1] = (last.2 - last.1 * y) / last.0;
    for j in (0..n - 1).rev() {
        let p = &pivots[j];
        let mut s = p.b - p.v[1] * x[j + 1] - p.e * y;
        if j + 2 < n {
            s -= p.v[2] * x[j + 2];
        }
        x[j] = s / p.v[0];
    }
    if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
        return Err(Error::NonFinite("bordered solve"));
    }
    Ok((x, y))
}

/// Hermitian inner product Σ conj(a_i) b_i.
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
