use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};

/// Winning input position per pooled element, as a flat index into the
/// `H × W` plane of its channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgmaxIndices {
    pub indices: Vec<u32>,
    pub in_shape: [usize; 3],
    pub k: usize,
}

impl ArgmaxIndices {
    /// `(row, col)` of the winner for output element `(c, oy, ox)`.
    pub fn source(&self, c: usize, oy: usize, ox: usize) -> (usize, usize) {
        let [_, h, w] = self.in_shape;
        let (ho, wo) = (h / self.k, w / self.k);
        let idx = self.indices[c * ho * wo + oy * wo + ox] as usize;
        (idx / w, idx % w)
    }
}

/// Non-overlapping `k × k` max pooling; output spatial size is `floor(H / k)`.
pub fn max_pool2d(input: &Tensor, k: usize) -> Result<(Tensor, ArgmaxIndices)> {
    let [c, h, w] = input.dims3()?;
    if k == 0 {
        return Err(Error::shape("pool size must be at least 1"));
    }
    if h < k || w < k {
        return Err(Error::shape(format!("pool size {k} exceeds input {h}x{w}")));
    }
    let (ho, wo) = (h / k, w / k);
    let mut out = vec![0.0; c * ho * wo];
    let mut idx = vec![0u32; c * ho * wo];
    kernels::max_pool_forward(&input.to_f64(), c, h, w, k, &mut out, &mut idx);
    Ok((
        Tensor::from_f64(&[c, ho, wo], &out, "max_pool2d")?,
        ArgmaxIndices {
            indices: idx,
            in_shape: [c, h, w],
            k,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_window() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = max_pool2d(&x, 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx.indices, vec![3]);
        assert_eq!(idx.source(0, 0, 0), (1, 1));
    }

    #[test]
    fn table_shape_floor() {
        let x = Tensor::zeros(&[128, 17, 17]);
        let (y, _) = max_pool2d(&x, 2).unwrap();
        assert_eq!(y.shape(), &[128, 8, 8]);
    }

    #[test]
    fn ties_pick_first() {
        let x = Tensor::full(&[1, 2, 2], 1.0);
        let (_, idx) = max_pool2d(&x, 2).unwrap();
        assert_eq!(idx.indices, vec![0]);
    }

    #[test]
    fn rejects_zero_k() {
        assert!(max_pool2d(&Tensor::zeros(&[1, 2, 2]), 0).is_err());
    }
}
