use super::Tensor;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Full spectrum of a symmetric matrix, largest eigenvalue first.
#[derive(Clone, Debug)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    /// `n × n` row-major; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Vec<f64>,
    pub n: usize,
}

impl SymEigResult {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.eigenvectors[r * self.n + i])
            .collect()
    }
}

pub fn sym_eig(a: &Tensor) -> Result<SymEigResult> {
    let [n, m] = a.dims2()?;
    if n != m {
        return Err(Error::shape(format!(
            "sym_eig needs a square matrix, got {n}x{m}"
        )));
    }
    sym_eig_f64(&a.to_f64(), n)
}

/// Cyclic Jacobi rotations on a row-major `n × n` buffer.
pub fn sym_eig_f64(a: &[f64], n: usize) -> Result<SymEigResult> {
    if a.len() != n * n {
        return Err(Error::shape(format!(
            "sym_eig: {} elements for n = {n}",
            a.len()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sym_eig input".into()));
    }
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            if (a[i * n + j] - a[j * n + i]).abs() > 1e-5 * scale {
                return Err(Error::Domain(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a[i * n + j],
                    a[j * n + i]
                )));
            }
        }
    }

    let mut m: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            0.5 * (a[i * n + j] + a[j * n + i])
        })
        .collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob2: f64 = m.iter().map(|x| x * x).sum();
    let off2 = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s
    };

    let mut sweeps = 0;
    loop {
        if frob2 == 0.0 || off2(&m) <= 1e-26 * frob2 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence {
                sweeps,
                off_norm: off2(&m).sqrt(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[r * n + col] = v[r * n + src];
        }
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
        n,
    })
}
