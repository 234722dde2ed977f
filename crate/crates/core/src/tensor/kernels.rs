//! Slice-level `f64` kernels shared by the checked tensor API and the
//! network engine. Layouts are row-major: images are `[C, H, W]`, conv
//! weights `[C_out, C_in * k * k]`, depthwise weights `[C, k * k]`.

/// `c = op(a) · op(b) + beta · c` where `op(a)` is `[m, k]` and `op(b)` is `[k, n]`.
/// A transposed operand is stored in the opposite orientation (`a` as `[k, m]`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m) } else { (k, 1) };
    let (rsb, csb) = if trans_b { (1, k) } else { (n, 1) };
    // SAFETY: the asserts above bound every index dgemm touches for these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn in_len(&self) -> usize {
        self.cin * self.h * self.w
    }

    pub fn out_len(&self) -> usize {
        self.cout * self.out_h() * self.out_w()
    }

    pub fn patch_len(&self) -> usize {
        self.cin * self.k * self.k
    }

    /// 1×1, stride 1, no padding: the input already is the column matrix.
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }

    /// Source pixel for output position `o` and kernel offset `kk` along one axis.
    #[inline]
    fn src(&self, o: usize, kk: usize, extent: usize) -> Option<usize> {
        let p = (o * self.stride + kk) as isize - self.pad as isize;
        (p >= 0 && (p as usize) < extent).then_some(p as usize)
    }
}

/// Unfolds `[C_in, H, W]` into `[C_in * k * k, H' * W']` with zero padding.
pub fn im2col(input: &[f64], g: &ConvGeom, col: &mut [f64]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    debug_assert_eq!(col.len(), g.patch_len() * plane);
    for ci in 0..g.cin {
        let src = &input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut col[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    match g.src(oy, ky, g.h) {
                        None => dst[oy * wo..(oy + 1) * wo].fill(0.0),
                        Some(iy) => {
                            for ox in 0..wo {
                                dst[oy * wo + ox] = match g.src(ox, kx, g.w) {
                                    Some(ix) => src[iy * g.w + ix],
                                    None => 0.0,
                                };
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters columns back, accumulating into `input`.
pub fn col2im_add(col: &[f64], g: &ConvGeom, input: &mut [f64]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    for ci in 0..g.cin {
        let dst = &mut input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &col[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let Some(iy) = g.src(oy, ky, g.h) else {
                        continue;
                    };
                    for ox in 0..wo {
                        if let Some(ix) = g.src(ox, kx, g.w) {
                            dst[iy * g.w + ix] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of one image. `scratch` is reused across calls.
pub fn conv_forward(
    input: &[f64],
    weights: &[f64],
    g: &ConvGeom,
    out: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let plane = g.out_h() * g.out_w();
    if g.is_pointwise() {
        gemm(g.cout, g.cin, plane, weights, false, input, false, out, 0.0);
    } else {
        scratch.resize(g.patch_len() * plane, 0.0);
        im2col(input, g, scratch);
        gemm(
            g.cout,
            g.patch_len(),
            plane,
            weights,
            false,
            scratch,
            false,
            out,
            0.0,
        );
    }
}

/// Accumulates `∂L/∂W` and, when requested, `∂L/∂input` for one image.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    input: &[f64],
    weights: &[f64],
    g_out: &[f64],
    g: &ConvGeom,
    g_weights: &mut [f64],
    g_input: Option<&mut [f64]>,
    scratch: &mut Vec<f64>,
    scratch2: &mut Vec<f64>,
) {
    let plane = g.out_h() * g.out_w();
    let patch = g.patch_len();
    if g.is_pointwise() {
        gemm(
            g.cout, plane, g.cin, g_out, false, input, true, g_weights, 1.0,
        );
        if let Some(gi) = g_input {
            gemm(g.cin, g.cout, plane, weights, true, g_out, false, gi, 1.0);
        }
        return;
    }
    scratch.resize(patch * plane, 0.0);
    im2col(input, g, scratch);
    gemm(
        g.cout, plane, patch, g_out, false, scratch, true, g_weights, 1.0,
    );
    if let Some(gi) = g_input {
        scratch2.resize(patch * plane, 0.0);
        gemm(
            patch, g.cout, plane, weights, true, g_out, false, scratch2, 0.0,
        );
        col2im_add(scratch2, g, gi);
    }
}

/// Per-channel cross-correlation; `g.cout` must equal `g.cin`.
pub fn depthwise_forward(input: &[f64], weights: &[f64], g: &ConvGeom, out: &mut [f64]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let kk = g.k * g.k;
    for c in 0..g.cin {
        let src = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        let wk = &weights[c * kk..(c + 1) * kk];
        let dst = &mut out[c * ho * wo..(c + 1) * ho * wo];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0;
                for ky in 0..g.k {
                    let Some(iy) = g.src(oy, ky, g.h) else {
                        continue;
                    };
                    for kx in 0..g.k {
                        if let Some(ix) = g.src(ox, kx, g.w) {
                            acc += wk[ky * g.k + kx] * src[iy * g.w + ix];
                        }
                    }
                }
                dst[oy * wo + ox] = acc;
            }
        }
    }
}

pub fn depthwise_backward(
    input: &[f64],
    weights: &[f64],
    g_out: &[f64],
    g: &ConvGeom,
    g_weights: &mut [f64],
    mut g_input: Option<&mut [f64]>,
) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let kk = g.k * g.k;
    for c in 0..g.cin {
        let src = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        let wk = &weights[c * kk..(c + 1) * kk];
        let go = &g_out[c * ho * wo..(c + 1) * ho * wo];
        for oy in 0..ho {
            for ox in 0..wo {
                let d = go[oy * wo + ox];
                if d == 0.0 {
                    continue;
                }
                for ky in 0..g.k {
                    let Some(iy) = g.src(oy, ky, g.h) else {
                        continue;
                    };
                    for kx in 0..g.k {
                        if let Some(ix) = g.src(ox, kx, g.w) {
                            g_weights[c * kk + ky * g.k + kx] += d * src[iy * g.w + ix];
                            if let Some(gi) = g_input.as_deref_mut() {
                                gi[c * g.h * g.w + iy * g.w + ix] += d * wk[ky * g.k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Non-overlapping `k × k` max pooling of `[C, H, W]`. `argmax` receives,
/// per output element, the flat in-plane index of the first maximal input.
pub fn max_pool_forward(
    input: &[f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    out: &mut [f64],
    argmax: &mut [u32],
) {
    let (ho, wo) = (h / k, w / k);
    for ch in 0..c {
        let src = &input[ch * h * w..(ch + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = oy * k * w + ox * k;
                for dy in 0..k {
                    for dx in 0..k {
                        let idx = (oy * k + dy) * w + ox * k + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                }
                let o = ch * ho * wo + oy * wo + ox;
                out[o] = src[best];
                argmax[o] = best as u32;
            }
        }
    }
}

pub fn max_pool_backward(
    g_out: &[f64],
    argmax: &[u32],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    g_in: &mut [f64],
) {
    let plane_out = (h / k) * (w / k);
    for ch in 0..c {
        for o in 0..plane_out {
            let i = ch * plane_out + o;
            g_in[ch * h * w + argmax[i] as usize] += g_out[i];
        }
    }
}
