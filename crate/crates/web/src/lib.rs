//! WebAssembly bindings for the demo page in `www/`. Each export is a thin
//! wrapper over a plain function so the logic is testable natively.

use spikegrid::data::{fit_pca, generate_synthetic, SyntheticSpec};
use spikegrid::neuron::{lif_step, LifConfig, LifState, SurrogateKind, SurrogateSpec};
use spikegrid::tensor::Tensor;
use spikegrid::Result;
use wasm_bindgen::prelude::*;

fn js(e: spikegrid::Error) -> JsError {
    JsError::new(&e.to_string())
}

pub fn parse_kind(kind: &str) -> Result<SurrogateKind> {
    match kind {
        "aad_arcsin" => Ok(SurrogateKind::AadArcsin),
        "aad_arccos" => Ok(SurrogateKind::AadArccos),
        "rectangular" => Ok(SurrogateKind::Rectangular),
        other => Err(spikegrid::Error::Config(format!(
            "unknown surrogate {other:?}"
        ))),
    }
}

/// Surrogate derivative sampled at `n` evenly spaced points of `[lo, hi]`.
pub fn surrogate_samples(kind: &str, lambda: f64, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    let spec = SurrogateSpec::new(parse_kind(kind)?, lambda)?;
    let step = if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    };
    Ok((0..n).map(|i| spec.eval(lo + step * i as f64)).collect())
}

#[wasm_bindgen]
pub fn surrogate_curve(
    kind: &str,
    lambda: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    surrogate_samples(kind, lambda, lo, hi, n).map_err(js)
}

/// Membrane potential before reset and the spike train of one neuron.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct LifTrace {
    potential: Vec<f64>,
    spikes: Vec<u8>,
}

#[wasm_bindgen]
impl LifTrace {
    pub fn potential(&self) -> Vec<f64> {
        self.potential.clone()
    }

    pub fn spikes(&self) -> Vec<u8> {
        self.spikes.clone()
    }
}

/// Drives a resting neuron with `current` for `steps` steps, then silence.
pub fn simulate_lif(
    decay: f64,
    threshold: f64,
    current: f64,
    on_steps: usize,
    steps: usize,
) -> Result<LifTrace> {
    let cfg = LifConfig {
        decay,
        v_threshold: threshold,
        ..Default::default()
    };
    cfg.validate()?;
    let mut state = LifState::resting(&[1], &cfg);
    let mut trace = LifTrace {
        potential: Vec::with_capacity(steps),
        spikes: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let i = if t < on_steps { current as f32 } else { 0.0 };
        trace
            .potential
            .push(cfg.integrate(state.v[0], f64::from(i)));
        let (s, next) = lif_step(&state, &Tensor::new(vec![1], vec![i])?, &cfg)?;
        trace.spikes.push(s.data()[0] as u8);
        state = next;
    }
    Ok(trace)
}

#[wasm_bindgen]
pub fn lif_trace(
    decay: f64,
    threshold: f64,
    current: f64,
    on_steps: usize,
    steps: usize,
) -> std::result::Result<LifTrace, JsError> {
    simulate_lif(decay, threshold, current, on_steps, steps).map_err(js)
}

/// A generated scene rendered two ways: ground truth and the first three
/// principal components as RGB.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct SceneView {
    width: usize,
    height: usize,
    labels: Vec<u16>,
    pca_rgba: Vec<u8>,
    explained: Vec<f64>,
}

#[wasm_bindgen]
impl SceneView {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> Vec<u16> {
        self.labels.clone()
    }

    /// `width · height · 4` bytes, ready for `ImageData`.
    pub fn pca_rgba(&self) -> Vec<u8> {
        self.pca_rgba.clone()
    }

    /// Cumulative explained-variance ratio for 1..=bands components.
    pub fn explained(&self) -> Vec<f64> {
        self.explained.clone()
    }
}

pub fn build_scene(spec: &SyntheticSpec) -> Result<SceneView> {
    let (cube, labels) = generate_synthetic(spec)?;
    let full = fit_pca(&cube, cube.bands())?;
    let total: f64 = full.variances.iter().sum();
    let explained = full
        .variances
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(if total > 0.0 { *acc / total } else { 1.0 })
        })
        .collect();

    let keep = cube.bands().min(3);
    let z = fit_pca(&cube, keep)?.transform(&cube)?;
    let mut lo = vec![f32::INFINITY; keep];
    let mut hi = vec![f32::NEG_INFINITY; keep];
    for px in z.data().chunks_exact(keep) {
        for c in 0..keep {
            lo[c] = lo[c].min(px[c]);
            hi[c] = hi[c].max(px[c]);
        }
    }
    let mut pca_rgba = Vec::with_capacity(cube.height() * cube.width() * 4);
    for px in z.data().chunks_exact(keep) {
        for c in 0..3 {
            let v = if c < keep && hi[c] > lo[c] {
                (px[c] - lo[c]) / (hi[c] - lo[c])
            } else {
                0.0
            };
            pca_rgba.push((v * 255.0).round() as u8);
        }
        pca_rgba.push(255);
    }
    Ok(SceneView {
        width: cube.width(),
        height: cube.height(),
        labels: labels.labels().to_vec(),
        pca_rgba,
        explained,
    })
}

#[wasm_bindgen]
pub fn synthetic_scene(
    classes: usize,
    size: usize,
    bands: usize,
    separation: f64,
    noise: f64,
    seed: u32,
) -> std::result::Result<SceneView, JsError> {
    let spec = SyntheticSpec {
        num_classes: classes,
        height: size,
        width: size,
        bands,
        class_separation: separation,
        noise_sigma: noise,
        seed: u64::from(seed),
    };
    build_scene(&spec).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_endpoints() {
        let ys = surrogate_samples("aad_arcsin", 1.0, -1.0, 1.0, 201).unwrap();
        assert_eq!(ys.len(), 201);
        assert_eq!(ys[100], 1.0);
        assert_eq!(ys[0], 0.0);
        let rect = surrogate_samples("rectangular", 0.5, -1.0, 1.0, 5).unwrap();
        assert_eq!(rect, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(surrogate_samples("nope", 1.0, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn lif_trace_fires_and_resets() {
        // decay 0.5, current 0.6: 0.6, 0.9, 1.05 -> spike every third step
        let t = simulate_lif(0.5, 1.0, 0.6, 6, 8).unwrap();
        assert_eq!(t.spikes, vec![0, 0, 1, 0, 0, 1, 0, 0]);
        assert!((t.potential[2] - 1.05).abs() < 1e-6);
        assert_eq!(t.potential[7], 0.0);
        assert!(simulate_lif(0.0, 1.0, 0.5, 1, 1).is_err());
    }

    #[test]
    fn scene_view_layout() {
        let v = build_scene(&SyntheticSpec {
            height: 8,
            width: 8,
            bands: 5,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(v.pca_rgba.len(), 8 * 8 * 4);
        assert_eq!(v.labels.len(), 64);
        assert_eq!(v.explained.len(), 5);
        assert!((v.explained[4] - 1.0).abs() < 1e-9);
        assert!(v.explained.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }
}
