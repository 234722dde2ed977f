use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaddingMode {
    /// Zero padding of `(k - 1) / 2` on every side.
    #[default]
    Same,
    Valid,
}

impl PaddingMode {
    pub fn amount(self, k: usize) -> usize {
        match self {
            PaddingMode::Same => (k - 1) / 2,
            PaddingMode::Valid => 0,
        }
    }
}

fn check_kernel(k: usize, stride: usize, h: usize, w: usize, pad: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::shape(format!("kernel size {k} must be odd")));
    }
    if stride == 0 {
        return Err(Error::shape("stride must be at least 1"));
    }
    if h + 2 * pad < k || w + 2 * pad < k {
        return Err(Error::shape(format!(
            "kernel {k} larger than padded input {h}x{w}"
        )));
    }
    Ok(())
}

/// 2-D cross-correlation of `[C_in, H, W]` with `[C_out, C_in, k, k]`.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    padding: PaddingMode,
) -> Result<Tensor> {
    let [cin, h, w] = input.dims3()?;
    let [cout, kin, k, k2] = kernels.dims4()?;
    if kin != cin {
        return Err(Error::shape(format!(
            "conv2d: input has {cin} channels, kernels expect {kin}"
        )));
    }
    if k != k2 {
        return Err(Error::shape("conv2d: kernels must be square"));
    }
    let pad = padding.amount(k);
    check_kernel(k, stride, h, w, pad)?;
    let g = ConvGeom {
        cin,
        h,
        w,
        cout,
        k,
        stride,
        pad,
    };
    let mut out = vec![0.0; g.out_len()];
    let mut scratch = Vec::new();
    kernels::conv_forward(
        &input.to_f64(),
        &kernels.to_f64(),
        &g,
        &mut out,
        &mut scratch,
    );
    Tensor::from_f64(&[cout, g.out_h(), g.out_w()], &out, "conv2d")
}

/// Channel-wise cross-correlation of `[C, H, W]` with `[C, k, k]`.
pub fn depthwise_conv2d(
    input: &Tensor,
    kernels: &Tensor,
    stride: usize,
    padding: PaddingMode,
) -> Result<Tensor> {
    let [c, h, w] = input.dims3()?;
    let [kc, k, k2] = kernels.dims3()?;
    if kc != c {
        return Err(Error::shape(format!(
            "depthwise_conv2d: {c} channels but {kc} kernels"
        )));
    }
    if k != k2 {
        return Err(Error::shape("depthwise_conv2d: kernels must be square"));
    }
    let pad = padding.amount(k);
    check_kernel(k, stride, h, w, pad)?;
    let g = ConvGeom {
        cin: c,
        h,
        w,
        cout: c,
        k,
        stride,
        pad,
    };
    let mut out = vec![0.0; g.out_len()];
    kernels::depthwise_forward(&input.to_f64(), &kernels.to_f64(), &g, &mut out);
    Tensor::from_f64(&[c, g.out_h(), g.out_w()], &out, "depthwise_conv2d")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_shaped_kernel() {
        let x = Tensor::full(&[1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 1, 1], 2.0);
        let y = conv2d(&x, &k, 1, PaddingMode::Same).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn stem_shape() {
        let x = Tensor::zeros(&[30, 17, 17]);
        let k = Tensor::zeros(&[64, 30, 3, 3]);
        assert_eq!(
            conv2d(&x, &k, 1, PaddingMode::Same).unwrap().shape(),
            &[64, 17, 17]
        );
    }

    #[test]
    fn valid_and_strided_shapes() {
        let x = Tensor::zeros(&[2, 9, 7]);
        let k = Tensor::zeros(&[3, 2, 3, 3]);
        assert_eq!(
            conv2d(&x, &k, 1, PaddingMode::Valid).unwrap().shape(),
            &[3, 7, 5]
        );
        assert_eq!(
            conv2d(&x, &k, 2, PaddingMode::Same).unwrap().shape(),
            &[3, 5, 4]
        );
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[2, 5, 5]);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), 1, PaddingMode::Same),
            Err(Error::Shape(_))
        ));
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 2, 2]), 1, PaddingMode::Same).is_err());
        assert!(conv2d(&x, &Tensor::zeros(&[1, 2, 3, 3]), 0, PaddingMode::Same).is_err());
        assert!(depthwise_conv2d(&x, &Tensor::zeros(&[3, 3, 3]), 1, PaddingMode::Same).is_err());
    }

    #[test]
    fn depthwise_per_channel_scaling() {
        let x = Tensor::from_fn(&[2, 3, 3], |i| i as f32 + 1.0);
        let k = Tensor::new(vec![2, 1, 1], vec![1.0, 0.0]).unwrap();
        let y = depthwise_conv2d(&x, &k, 1, PaddingMode::Same).unwrap();
        assert_eq!(&y.data()[..9], &x.data()[..9]);
        assert!(y.data()[9..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn depthwise_table_shape() {
        let x = Tensor::zeros(&[64, 17, 17]);
        let k = Tensor::zeros(&[64, 3, 3]);
        assert_eq!(
            depthwise_conv2d(&x, &k, 1, PaddingMode::Same)
                .unwrap()
                .shape(),
            &[64, 17, 17]
        );
    }
}
