//! Tridiagonal solves and restarted, right-preconditioned GMRES.

use crate::error::Result;

/// Tridiagonal matrix with rows `lower[i]·x[i−1] + diag[i]·x[i] + upper[i]·x[i+1]`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert!(lower.len() == diag.len() && upper.len() == diag.len());
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm; no pivoting, so the matrix should be diagonally dominant.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        c[0] = self.upper[0] / denom;
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / denom;
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// `‖b − Ax‖ / ‖b‖`, recomputed explicitly at the end.
    pub rel_residual: f64,
    pub matvecs: usize,
}

/// Solves `A x = b` from `x = 0` with right preconditioning `A M⁻¹ y = b, x = M⁻¹y`.
pub fn gmres<A, P>(
    mut apply: A,
    precond: P,
    b: &[f64],
    rtol: f64,
    restart: usize,
    max_matvecs: usize,
) -> Result<GmresOutcome>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x,
            rel_residual: 0.0,
            matvecs: 0,
        });
    }
    let mut r = b.to_vec();
    let mut matvecs = 0;
    let mut rel = 1.0;
    while matvecs < max_matvecs {
        let beta = norm(&r);
        rel = beta / b_norm;
        if rel <= rtol {
            break;
        }
        let m = restart.min(max_matvecs - matvecs).max(1);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m {
            let z = precond(&basis[k]);
            let mut w = apply(&z)?;
            matvecs += 1;
            // Modified Gram–Schmidt, applied twice.
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let proj = dot(&w, q);
                    hess[i][k] += proj;
                    w.iter_mut().zip(q).for_each(|(wv, qv)| *wv -= proj * qv);
                }
            }
            let wn = norm(&w);
            hess[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            if (g[k].abs() / b_norm) <= rtol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // Back substitution on the k×k triangle.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, q) in y.iter().zip(&basis) {
            update.iter_mut().zip(q).for_each(|(u, qv)| *u += yi * qv);
        }
        let dx = precond(&update);
        x.iter_mut().zip(&dx).for_each(|(xv, d)| *xv += d);
        let ax = apply(&x)?;
        matvecs += 1;
        r = b.iter().zip(&ax).map(|(bv, av)| bv - av).collect();
        rel = norm(&r) / b_norm;
        if k == 0 {
            break;
        }
    }
    Ok(GmresOutcome {
        x,
        rel_residual: rel,
        matvecs,
    })
}
