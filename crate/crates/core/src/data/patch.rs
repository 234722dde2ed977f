use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reflects an out-of-range index back into `0..n` without repeating the edge
/// sample (`-1 → 1`, `n → n − 2`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Cuts the `s × s` window centred on `(row, col)` out of a `[H, W, C]` cube
/// and returns it channel-first as `[C, s, s]`, mirroring across the borders.
pub fn extract_patch(cube: &Tensor, row: usize, col: usize, s: usize) -> Result<Tensor> {
    let [h, w, c] = cube.dims3()?;
    if s.is_multiple_of(2) {
        return Err(Error::config(format!("patch size must be odd, got {s}")));
    }
    if row >= h || col >= w {
        return Err(Error::shape(format!(
            "pixel ({row}, {col}) outside {h}x{w} image"
        )));
    }
    let r = (s / 2) as isize;
    let src = cube.data();
    let mut out = vec![0.0f32; c * s * s];
    for dy in 0..s {
        let y = reflect_index(row as isize + dy as isize - r, h);
        for dx in 0..s {
            let x = reflect_index(col as isize + dx as isize - r, w);
            let px = &src[(y * w + x) * c..(y * w + x + 1) * c];
            for (ch, &v) in px.iter().enumerate() {
                out[(ch * s + dy) * s + dx] = v;
            }
        }
    }
    Tensor::new(vec![c, s, s], out)
}
