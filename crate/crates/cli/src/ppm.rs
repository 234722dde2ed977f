//! Class-colored maps as binary PPM (P6).

/// Deterministic palette: hues spread by the golden angle, alternating
/// between two brightness levels, so the first 32 colors are distinct.
pub fn palette(k: usize) -> Vec<[u8; 3]> {
    (0..k)
        .map(|i| {
            let h = (i as f64 * 137.507_764) % 360.0;
            let (s, v) = if i % 2 == 0 {
                (0.85, 0.95)
            } else {
                (0.65, 0.7)
            };
            hsv_to_rgb(h, s, v)
        })
        .collect()
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r, g, b].map(|u| ((u + m) * 255.0).round() as u8)
}

/// `classes` holds one entry per pixel in raster order: 0 for black,
/// otherwise a one-based class index into `colors`.
pub fn encode(width: usize, height: usize, classes: &[usize], colors: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for &c in classes {
        out.extend_from_slice(&if c == 0 { [0, 0, 0] } else { colors[c - 1] });
    }
    out
}
