//! Leaky integrate-and-fire dynamics and the surrogate derivatives used in
//! place of the spike nonlinearity's Dirac derivative during backprop.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// A spiking neuron's potential is set back to `v_rest`.
    #[default]
    HardToRest,
}

/// Discrete LIF parameters. Input resistance is folded into synaptic weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifConfig {
    pub v_threshold: f64,
    pub v_rest: f64,
    /// Per-step leak factor in `(0, 1]`; 0.5 corresponds to τ = 2 steps.
    pub decay: f64,
    pub reset_mode: ResetMode,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            v_threshold: 1.0,
            v_rest: 0.0,
            decay: 0.5,
            reset_mode: ResetMode::HardToRest,
        }
    }
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::config(format!(
                "decay {} outside (0, 1]",
                self.decay
            )));
        }
        if self.v_threshold.partial_cmp(&self.v_rest) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::config(format!(
                "threshold {} must exceed resting potential {}",
                self.v_threshold, self.v_rest
            )));
        }
        Ok(())
    }

    /// Leak toward rest, then integrate. Returns the pre-reset potential.
    #[inline]
    pub fn integrate(&self, v: f64, current: f64) -> f64 {
        self.v_rest + self.decay * (v - self.v_rest) + current
    }

    /// Current that brings a resting neuron exactly to threshold.
    pub fn threshold_gap(&self) -> f64 {
        self.v_threshold - self.v_rest
    }
}

/// Membrane potentials of one neuron population.
#[derive(Clone, Debug, PartialEq)]
pub struct LifState {
    pub v: Vec<f64>,
    pub shape: Vec<usize>,
}

impl LifState {
    pub fn resting(shape: &[usize], cfg: &LifConfig) -> Self {
        Self {
            v: vec![cfg.v_rest; shape.iter().product()],
            shape: shape.to_vec(),
        }
    }

    pub fn reset(&mut self, cfg: &LifConfig) {
        self.v.fill(cfg.v_rest);
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_f64(&self.shape, &self.v, "LifState")
    }
}

/// Advances every neuron by one step. Spikes are emitted where the updated
/// potential reaches threshold (inclusive) and those neurons reset to rest.
pub fn lif_step(
    state: &LifState,
    input_current: &Tensor,
    cfg: &LifConfig,
) -> Result<(Tensor, LifState)> {
    if input_current.shape() != state.shape.as_slice() {
        return Err(Error::shape(format!(
            "lif_step: state {:?} vs current {:?}",
            state.shape,
            input_current.shape()
        )));
    }
    let mut next = state.clone();
    let mut spikes = vec![0.0f32; state.v.len()];
    for ((v, &i), s) in next.v.iter_mut().zip(input_current.data()).zip(&mut spikes) {
        let u = cfg.integrate(*v, f64::from(i));
        if u >= cfg.v_threshold {
            *s = 1.0;
            *v = cfg.v_rest;
        } else {
            *v = u;
        }
    }
    Ok((Tensor::new(state.shape.clone(), spikes)?, next))
}

#[inline]
pub fn step_fn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Unit step: 1 where `v - v_th >= 0`.
pub fn heaviside(v_minus_th: &Tensor) -> Tensor {
    v_minus_th.map(|x| step_fn(f64::from(x)) as f32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    AadArcsin,
    AadArccos,
    Rectangular,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Half-width of the support window on `v - v_th`, in `(0, 1]`.
    pub lambda: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::AadArcsin,
            lambda: 1.0,
        }
    }
}

impl SurrogateSpec {
    pub fn new(kind: SurrogateKind, lambda: f64) -> Result<Self> {
        let s = Self { kind, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::config(format!(
                "surrogate lambda {} outside (0, 1]",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Surrogate factor substituted for `∂spike/∂v` at offset `x = v - v_th`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() >= self.lambda {
            return 0.0;
        }
        let c = x.clamp(-1.0, 1.0);
        match self.kind {
            SurrogateKind::AadArcsin => (1.0 - c.asin().abs()).abs(),
            SurrogateKind::AadArccos => (1.0 - (c.acos() - FRAC_PI_2).abs()).abs(),
            SurrogateKind::Rectangular => 1.0 / (2.0 * self.lambda),
        }
    }
}

pub fn surrogate_grad(v_minus_th: &Tensor, spec: &SurrogateSpec) -> Tensor {
    v_minus_th.map(|x| spec.eval(f64::from(x)) as f32)
}

/// Forward nonlinearity of a spiking population.
///
/// `Heaviside` is the real spike; backward substitutes the surrogate.
/// `Sigmoid` is a smooth stand-in whose exact derivative is used in backward;
/// with it the reset is also smooth (`v ← u + s·(v_rest − u)`), so the whole
/// unrolled network is differentiable and checkable by finite differences.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum SpikeFunction {
    #[default]
    Heaviside,
    Sigmoid {
        slope: f64,
    },
}

impl SpikeFunction {
    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        match *self {
            SpikeFunction::Heaviside => step_fn(x),
            SpikeFunction::Sigmoid { slope } => 1.0 / (1.0 + (-slope * x).exp()),
        }
    }

    /// `∂output/∂v` used by backward at offset `x`.
    #[inline]
    pub fn derivative(&self, x: f64, surrogate: &SurrogateSpec) -> f64 {
        match *self {
            SpikeFunction::Heaviside => surrogate.eval(x),
            SpikeFunction::Sigmoid { slope } => {
                let s = 1.0 / (1.0 + (-slope * x).exp());
                slope * s * (1.0 - s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aad(kind: SurrogateKind, lambda: f64) -> SurrogateSpec {
        SurrogateSpec::new(kind, lambda).unwrap()
    }

    #[test]
    fn three_step_trace() {
        let cfg = LifConfig::default();
        let mut st = LifState::resting(&[1], &cfg);
        let i = Tensor::full(&[1], 0.6);
        let mut trace = Vec::new();
        for _ in 0..3 {
            let (s, next) = lif_step(&st, &i, &cfg).unwrap();
            // record the pre-reset potential via the integrate rule
            trace.push((cfg.integrate(st.v[0], 0.6f32 as f64), s.data()[0]));
            st = next;
        }
        assert!((trace[0].0 - 0.6).abs() < 1e-7 && trace[0].1 == 0.0);
        assert!((trace[1].0 - 0.9).abs() < 1e-7 && trace[1].1 == 0.0);
        assert!((trace[2].0 - 1.05).abs() < 1e-7 && trace[2].1 == 1.0);
        assert_eq!(st.v[0], 0.0);
    }

    #[test]
    fn leak_without_input_never_spikes() {
        let cfg = LifConfig::default();
        let mut st = LifState {
            v: vec![0.8],
            shape: vec![1],
        };
        let zero = Tensor::zeros(&[1]);
        let mut seen = Vec::new();
        for _ in 0..20 {
            let (s, next) = lif_step(&st, &zero, &cfg).unwrap();
            assert_eq!(s.data()[0], 0.0);
            st = next;
            seen.push(st.v[0]);
        }
        assert_eq!(&seen[..3], &[0.4, 0.2, 0.1]);
    }

    #[test]
    fn exact_threshold_fires() {
        let cfg = LifConfig::default();
        let st = LifState::resting(&[1], &cfg);
        let (s, next) = lif_step(&st, &Tensor::full(&[1], 1.0), &cfg).unwrap();
        assert_eq!(s.data()[0], 1.0);
        assert_eq!(next.v[0], 0.0);
    }

    #[test]
    fn lif_shape_mismatch() {
        let cfg = LifConfig::default();
        let st = LifState::resting(&[2], &cfg);
        assert!(matches!(
            lif_step(&st, &Tensor::zeros(&[3]), &cfg),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(LifConfig {
            decay: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LifConfig {
            decay: 1.0,
            ..Default::default()
        }
        .validate()
        .is_ok());
        assert!(LifConfig {
            v_threshold: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SurrogateSpec::new(SurrogateKind::AadArcsin, 0.0).is_err());
        assert!(SurrogateSpec::new(SurrogateKind::AadArcsin, 1.5).is_err());
    }

    #[test]
    fn heaviside_values() {
        let t = Tensor::new(vec![3], vec![0.2, -0.2, 0.0]).unwrap();
        assert_eq!(heaviside(&t).data(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn surrogate_examples() {
        let s = aad(SurrogateKind::AadArcsin, 1.0);
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(aad(SurrogateKind::AadArccos, 1.0).eval(0.0), 1.0);
        // 1 - pi/6 computed independently of asin
        assert!((s.eval(0.5) - (1.0 - std::f64::consts::PI / 6.0)).abs() < 1e-12);
        for kind in [
            SurrogateKind::AadArcsin,
            SurrogateKind::AadArccos,
            SurrogateKind::Rectangular,
        ] {
            assert_eq!(aad(kind, 1.0).eval(1.5), 0.0);
        }
        let c = aad(SurrogateKind::AadArccos, 1.0);
        assert!((s.eval(0.3) - c.eval(0.3)).abs() < 1e-6);
        let r = aad(SurrogateKind::Rectangular, 0.25);
        assert_eq!(r.eval(0.1), 2.0);
        assert_eq!(r.eval(0.25), 0.0);
    }

    #[test]
    fn sigmoid_derivative_matches_difference() {
        let f = SpikeFunction::Sigmoid { slope: 3.0 };
        let sg = SurrogateSpec::default();
        for x in [-0.7, -0.1, 0.0, 0.4] {
            let h = 1e-6;
            let fd = (f.forward(x + h) - f.forward(x - h)) / (2.0 * h);
            assert!((fd - f.derivative(x, &sg)).abs() < 1e-8);
        }
    }
}
