use crate::error::{Error, Result};
use crate::tensor::kernels::gemm;
use crate::tensor::sym_eig_f64;
use crate::tensor::Tensor;

use super::HsiCube;

/// Band-space principal axes of a cube.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `[B, n_keep]` row-major; columns are orthonormal, by descending variance.
    pub components: Vec<f64>,
    pub bands: usize,
    pub n_keep: usize,
    /// Variance along every axis, not just the kept ones.
    pub variances: Vec<f64>,
}

/// Fits on every pixel of the cube; the largest-magnitude entry of each
/// component is made positive so the projection is reproducible.
pub fn fit_pca(cube: &HsiCube, n_keep: usize) -> Result<PcaModel> {
    let b = cube.bands();
    if n_keep == 0 || n_keep > b {
        return Err(Error::config(format!(
            "cannot keep {n_keep} components of {b} bands"
        )));
    }
    let n = cube.height() * cube.width();
    let x: Vec<f64> = cube.values().to_f64();
    let mut mean = vec![0.0; b];
    for px in x.chunks_exact(b) {
        for (m, v) in mean.iter_mut().zip(px) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<f64> = x
        .chunks_exact(b)
        .flat_map(|px| px.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    let mut cov = vec![0.0; b * b];
    gemm(b, n, b, &centered, true, &centered, false, &mut cov, 0.0);
    let denom = (n.max(2) - 1) as f64;
    cov.iter_mut().for_each(|c| *c /= denom);
    // exact symmetry for the eigensolver
    for i in 0..b {
        for j in i + 1..b {
            let s = 0.5 * (cov[i * b + j] + cov[j * b + i]);
            cov[i * b + j] = s;
            cov[j * b + i] = s;
        }
    }
    let eig = sym_eig_f64(&cov, b)?;
    let mut components = vec![0.0; b * n_keep];
    for c in 0..n_keep {
        let v = eig.vector(c);
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for r in 0..b {
            components[r * n_keep + c] = sign * v[r];
        }
    }
    Ok(PcaModel {
        mean,
        components,
        bands: b,
        n_keep,
        variances: eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
    })
}

impl PcaModel {
    /// Projects every pixel: `[H, W, B]` to `[H, W, n_keep]`.
    pub fn transform(&self, cube: &HsiCube) -> Result<Tensor> {
        if cube.bands() != self.bands {
            return Err(Error::shape(format!(
                "model fitted on {} bands, cube has {}",
                self.bands,
                cube.bands()
            )));
        }
        let (h, w) = (cube.height(), cube.width());
        let centered: Vec<f64> = cube
            .values()
            .data()
            .chunks_exact(self.bands)
            .flat_map(|px| px.iter().zip(&self.mean).map(|(&v, m)| f64::from(v) - m))
            .collect();
        let mut out = vec![0.0; h * w * self.n_keep];
        gemm(
            h * w,
            self.bands,
            self.n_keep,
            &centered,
            false,
            &self.components,
            false,
            &mut out,
            0.0,
        );
        Tensor::from_f64(&[h, w, self.n_keep], &out, "pca transform")
    }

    /// Share of total variance captured by the kept components.
    pub fn explained_variance_ratio(&self) -> f64 {
        let total: f64 = self.variances.iter().sum();
        if total == 0.0 {
            return 1.0;
        }
        self.variances[..self.n_keep].iter().sum::<f64>() / total
    }

    /// Mean squared error of projecting onto the kept axes and back.
    pub fn reconstruction_error(&self, cube: &HsiCube) -> Result<f64> {
        let z = self.transform(cube)?.to_f64();
        let mut err = 0.0;
        for (px, zp) in cube
            .values()
            .data()
            .chunks_exact(self.bands)
            .zip(z.chunks_exact(self.n_keep))
        {
            for r in 0..self.bands {
                let rec: f64 = self.mean[r]
                    + (0..self.n_keep)
                        .map(|c| self.components[r * self.n_keep + c] * zp[c])
                        .sum::<f64>();
                err += (f64::from(px[r]) - rec).powi(2);
            }
        }
        Ok(err / cube.values().len() as f64)
    }

    pub fn mean_tensor(&self) -> Result<Tensor> {
        Tensor::from_f64(&[self.bands], &self.mean, "pca mean")
    }

    pub fn components_tensor(&self) -> Result<Tensor> {
        Tensor::from_f64(
            &[self.bands, self.n_keep],
            &self.components,
            "pca components",
        )
    }

    /// Rebuilds a projection-only model from stored tensors.
    pub fn from_tensors(mean: &Tensor, components: &Tensor) -> Result<Self> {
        let [b, k] = components.dims2()?;
        if mean.shape() != [b] {
            return Err(Error::shape("pca mean and components disagree"));
        }
        Ok(Self {
            mean: mean.to_f64(),
            components: components.to_f64(),
            bands: b,
            n_keep: k,
            variances: vec![0.0; b],
        })
    }
}
