//! Cube ingestion, band reduction, patch cutting, splitting and input coding.

mod cube;
mod patch;
mod pca;
mod split;
mod synthetic;

pub(crate) use cube::Reader;
pub use cube::{write_atomic, HsiCube, LabelMap, FORMAT_VERSION};
pub use patch::{extract_patch, reflect_index};
pub use pca::{fit_pca, PcaModel};
pub use split::{class_coords, stratified_split, Coord, SplitMode, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-component affine normalisation fitted on training pixels only.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Statistics over the given pixels of a `[H, W, C]` cube. A component
    /// with zero spread keeps unit scale.
    pub fn fit(cube: &Tensor, coords: &[Coord]) -> Result<Self> {
        let [_, w, c] = cube.dims3()?;
        if coords.is_empty() {
            return Err(Error::data("cannot standardise on an empty pixel set"));
        }
        let d = cube.data();
        let px = |&(r, col): &Coord| &d[(r * w + col) * c..(r * w + col + 1) * c];
        let n = coords.len() as f64;
        let mut mean = vec![0.0; c];
        for p in coords.iter().map(px) {
            for (m, &v) in mean.iter_mut().zip(p) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for p in coords.iter().map(px) {
            for ((s, &v), m) in var.iter_mut().zip(p).zip(&mean) {
                *s += (f64::from(v) - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, cube: &Tensor) -> Result<Tensor> {
        let [h, w, c] = cube.dims3()?;
        if c != self.mean.len() {
            return Err(Error::shape(format!(
                "standardiser has {} components, cube has {c}",
                self.mean.len()
            )));
        }
        let out: Vec<f64> = cube
            .data()
            .chunks_exact(c)
            .flat_map(|p| {
                p.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(&v, (m, s))| (f64::from(v) - m) / s)
            })
            .collect();
        Tensor::from_f64(&[h, w, c], &out, "standardise")
    }
}

/// Direct coding: the analog patch is presented unchanged at each of the
/// `t` steps, giving a `[T, C, s, s]` current train.
pub fn encode_direct(patch: &Tensor, t: usize) -> Result<Tensor> {
    patch.dims3()?;
    if t == 0 {
        return Err(Error::config("time steps must be at least 1"));
    }
    let mut shape = vec![t];
    shape.extend_from_slice(patch.shape());
    let data = patch.data().repeat(t);
    Tensor::new(shape, data)
}

fn round_to_f32(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = f64::from(*x as f32));
}

/// A cube reduced by PCA and standardised, ready for patch extraction.
#[derive(Clone, Debug)]
pub struct Scene {
    pub pca: PcaModel,
    pub standardizer: Standardizer,
    /// `[H, W, n_components]`
    pub features: Tensor,
}

impl Scene {
    /// Fits PCA on the whole cube and the standardiser on `train` pixels.
    ///
    /// Both fitted transforms are rounded to `f32` before use, so a model
    /// restored from a checkpoint reproduces these features bit for bit.
    pub fn prepare(cube: &HsiCube, n_components: usize, train: &[Coord]) -> Result<Self> {
        let mut pca = fit_pca(cube, n_components)?;
        round_to_f32(&mut pca.mean);
        round_to_f32(&mut pca.components);
        let reduced = pca.transform(cube)?;
        let mut standardizer = Standardizer::fit(&reduced, train)?;
        round_to_f32(&mut standardizer.mean);
        round_to_f32(&mut standardizer.std);
        let features = standardizer.apply(&reduced)?;
        Ok(Self {
            pca,
            standardizer,
            features,
        })
    }

    /// Re-applies stored projection and normalisation to a cube.
    pub fn from_parts(cube: &HsiCube, pca: PcaModel, standardizer: Standardizer) -> Result<Self> {
        let features = standardizer.apply(&pca.transform(cube)?)?;
        Ok(Self {
            pca,
            standardizer,
            features,
        })
    }

    pub fn encode(&self, at: Coord, patch_size: usize, t: usize) -> Result<Tensor> {
        encode_direct(&extract_patch(&self.features, at.0, at.1, patch_size)?, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication() {
        let p = Tensor::from_fn(&[2, 3, 3], |i| i as f32 - 4.0);
        let e = encode_direct(&p, 10).unwrap();
        assert_eq!(e.shape(), &[10, 2, 3, 3]);
        for t in 0..10 {
            assert_eq!(e.slice_outer(t), p);
        }
        assert!(encode_direct(&p, 0).is_err());
    }

    #[test]
    fn standardiser_uses_only_given_pixels() {
        let cube = Tensor::from_fn(&[1, 4, 1], |i| i as f32);
        let s = Standardizer::fit(&cube, &[(0, 0), (0, 1)]).unwrap();
        assert_eq!(s.mean, vec![0.5]);
        assert_eq!(s.std, vec![0.5]);
        let z = s.apply(&cube).unwrap();
        assert_eq!(z.data(), &[-1.0, 1.0, 3.0, 5.0]);
    }
}
