//! Stand-alone spiking layers over `[T, C, H, W]` spike trains.
//!
//! These run the same tape kernels the full network uses, but take their
//! weights and membrane states explicitly so each layer can be driven and
//! inspected on its own. States carry across the `T` steps of a call and are
//! left at their final potentials; callers reset them between samples.

use serde::{Deserialize, Serialize};

use crate::bptt::{DepthwiseGroup, Tape};
use crate::error::{Error, Result};
use crate::network::Params;
use crate::neuron::{LifConfig, LifState, SpikeFunction};
use crate::tensor::Tensor;

/// Binary, time-major `[T, C, H, W]` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain {
    data: Tensor,
}

impl SpikeTrain {
    pub fn new(data: Tensor) -> Result<Self> {
        data.dims4()?;
        if data.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain("spike trains hold only 0 and 1".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(t: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            data: Tensor::zeros(&[t, c, h, w]),
        }
    }

    fn from_buffer(dims: [usize; 4], buf: &[f64]) -> Result<Self> {
        Self::new(Tensor::from_f64(&dims, buf, "spike train")?)
    }

    pub fn steps(&self) -> usize {
        self.data.shape()[0]
    }

    /// `[C, H, W]` of a single step.
    pub fn frame_shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[1], s[2], s[3]]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    pub fn spike_count(&self) -> usize {
        self.data.data().iter().filter(|&&v| v == 1.0).count()
    }
}

/// Mixed depthwise convolution: channel group `i` uses kernel size
/// `group_kernel_sizes[i]`, groups occupy consecutive channel blocks in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcSpec {
    pub group_kernel_sizes: Vec<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl SmcSpec {
    pub fn validate(&self) -> Result<()> {
        let g = self.group_kernel_sizes.len();
        if g == 0 {
            return Err(Error::config("SMC needs at least one kernel group"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("SMC channel counts must be positive"));
        }
        if !self.in_channels.is_multiple_of(g) {
            return Err(Error::config(format!(
                "{} channels do not split into {g} equal groups",
                self.in_channels
            )));
        }
        if let Some(k) = self.group_kernel_sizes.iter().find(|&&k| k % 2 == 0) {
            return Err(Error::config(format!("SMC kernel size {k} must be odd")));
        }
        Ok(())
    }

    pub fn group_size(&self) -> usize {
        self.in_channels / self.group_kernel_sizes.len()
    }
}

/// Residual block of `width_factor` parallel SMC branches around an identity shortcut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwmrSpec {
    pub channels: usize,
    pub width_factor: usize,
    pub branch_specs: Vec<SmcSpec>,
}

impl SwmrSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width_factor == 0 {
            return Err(Error::config("width factor must be at least 1"));
        }
        if self.branch_specs.len() != self.width_factor {
            return Err(Error::config(format!(
                "width factor {} but {} branches",
                self.width_factor,
                self.branch_specs.len()
            )));
        }
        for b in &self.branch_specs {
            b.validate()?;
            if b.in_channels != self.channels || b.out_channels != self.channels {
                return Err(Error::config(format!(
                    "branch maps {} -> {} channels; the residual needs {}",
                    b.in_channels, b.out_channels, self.channels
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmcParams {
    /// One `[C / groups, k_i, k_i]` tensor per group.
    pub depthwise: Vec<Tensor>,
    /// `[C_out, C_in, 1, 1]`.
    pub pointwise: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmcStates {
    pub sdc: LifState,
    pub spc: LifState,
}

impl SmcStates {
    pub fn resting(spec: &SmcSpec, h: usize, w: usize, cfg: &LifConfig) -> Self {
        Self {
            sdc: LifState::resting(&[spec.in_channels, h, w], cfg),
            spc: LifState::resting(&[spec.out_channels, h, w], cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwmrStates {
    /// Depthwise-stage neurons of each branch.
    pub sdc: Vec<LifState>,
    /// Merge neurons fed by every branch's pointwise current plus the shortcut.
    pub merge: LifState,
}

impl SwmrStates {
    pub fn resting(spec: &SwmrSpec, h: usize, w: usize, cfg: &LifConfig) -> Self {
        let shape = [spec.channels, h, w];
        Self {
            sdc: (0..spec.width_factor)
                .map(|_| LifState::resting(&shape, cfg))
                .collect(),
            merge: LifState::resting(&shape, cfg),
        }
    }
}

fn check_state(state: &LifState, shape: [usize; 3]) -> Result<()> {
    if state.shape != shape {
        return Err(Error::shape(format!(
            "membrane state {:?} for a {shape:?} layer",
            state.shape
        )));
    }
    Ok(())
}

fn adhoc(entries: Vec<(String, Tensor)>) -> Result<Params> {
    let (names, tensors) = entries.into_iter().unzip();
    Params::new(names, tensors)
}

/// Convolution current into a LIF population at every step.
pub fn sconv_forward(
    input: &SpikeTrain,
    weights: &Tensor,
    cfg: &LifConfig,
    state: &mut LifState,
) -> Result<SpikeTrain> {
    let [cout, _, _, _] = weights.dims4()?;
    let [_, h, w] = input.frame_shape();
    check_state(state, [cout, h, w])?;
    let params = adhoc(vec![("weight".into(), weights.clone())])?;
    let mut tape = Tape::new(&params, input.steps(), SpikeFunction::Heaviside);
    let x = tape.input(input.tensor())?;
    let cur = tape.conv(x, 0)?;
    let (out, pop) = tape.spike(cur, *cfg, Some(&state.v))?;
    state.v.copy_from_slice(tape.final_potentials(pop));
    SpikeTrain::from_buffer(tape.buffer_dims(out), tape.buffer(out))
}

fn smc_groups(spec: &SmcSpec, first_param: usize) -> Vec<DepthwiseGroup> {
    let per = spec.group_size();
    spec.group_kernel_sizes
        .iter()
        .enumerate()
        .map(|(g, &k)| DepthwiseGroup {
            param: first_param + g,
            c0: g * per,
            c1: (g + 1) * per,
            k,
        })
        .collect()
}

fn smc_param_entries(prefix: &str, spec: &SmcSpec, p: &SmcParams) -> Result<Vec<(String, Tensor)>> {
    if p.depthwise.len() != spec.group_kernel_sizes.len() {
        return Err(Error::config(format!(
            "{} depthwise tensors for {} groups",
            p.depthwise.len(),
            spec.group_kernel_sizes.len()
        )));
    }
    let mut v: Vec<(String, Tensor)> = p
        .depthwise
        .iter()
        .enumerate()
        .map(|(g, t)| (format!("{prefix}dw{g}"), t.clone()))
        .collect();
    v.push((format!("{prefix}pw"), p.pointwise.clone()));
    Ok(v)
}

/// Grouped depthwise conv → LIF → 1×1 conv → LIF.
pub fn smc_forward(
    input: &SpikeTrain,
    spec: &SmcSpec,
    params: &SmcParams,
    cfg: &LifConfig,
    states: &mut SmcStates,
) -> Result<SpikeTrain> {
    spec.validate()?;
    let [c, h, w] = input.frame_shape();
    if c != spec.in_channels {
        return Err(Error::shape(format!(
            "SMC expects {} channels, got {c}",
            spec.in_channels
        )));
    }
    check_state(&states.sdc, [spec.in_channels, h, w])?;
    check_state(&states.spc, [spec.out_channels, h, w])?;
    let all = adhoc(smc_param_entries("", spec, params)?)?;
    let mut tape = Tape::new(&all, input.steps(), SpikeFunction::Heaviside);
    let x = tape.input(input.tensor())?;
    let dw = tape.depthwise(x, smc_groups(spec, 0))?;
    let (sdc, pop_sdc) = tape.spike(dw, *cfg, Some(&states.sdc.v))?;
    let pw = tape.conv(sdc, spec.group_kernel_sizes.len())?;
    let (out, pop_spc) = tape.spike(pw, *cfg, Some(&states.spc.v))?;
    states.sdc.v.copy_from_slice(tape.final_potentials(pop_sdc));
    states.spc.v.copy_from_slice(tape.final_potentials(pop_spc));
    SpikeTrain::from_buffer(tape.buffer_dims(out), tape.buffer(out))
}

/// Residual block. The shortcut enters the merge neurons as current
/// `(v_th - v_rest) · x`, so an input spike alone fires a resting neuron and
/// every branch adds its pointwise current in membrane space.
pub fn swmr_forward(
    input: &SpikeTrain,
    spec: &SwmrSpec,
    branch_params: &[SmcParams],
    cfg: &LifConfig,
    states: &mut SwmrStates,
) -> Result<SpikeTrain> {
    spec.validate()?;
    let [c, h, w] = input.frame_shape();
    if c != spec.channels {
        return Err(Error::config(format!(
            "SWMR block expects {} channels, got {c}",
            spec.channels
        )));
    }
    if branch_params.len() != spec.width_factor || states.sdc.len() != spec.width_factor {
        return Err(Error::config(
            "one parameter set and state per branch required",
        ));
    }
    for s in &states.sdc {
        check_state(s, [c, h, w])?;
    }
    check_state(&states.merge, [c, h, w])?;

    let mut entries = Vec::new();
    let mut first = Vec::new();
    for (b, (bs, bp)) in spec.branch_specs.iter().zip(branch_params).enumerate() {
        first.push(entries.len());
        entries.extend(smc_param_entries(&format!("branch{b}."), bs, bp)?);
    }
    let all = adhoc(entries)?;
    let mut tape = Tape::new(&all, input.steps(), SpikeFunction::Heaviside);
    let x = tape.input(input.tensor())?;
    let mut terms = Vec::new();
    let mut pops = Vec::new();
    for (b, bs) in spec.branch_specs.iter().enumerate() {
        let dw = tape.depthwise(x, smc_groups(bs, first[b]))?;
        let (sdc, pop) = tape.spike(dw, *cfg, Some(&states.sdc[b].v))?;
        pops.push(pop);
        terms.push((tape.conv(sdc, first[b] + bs.group_kernel_sizes.len())?, 1.0));
    }
    terms.push((x, cfg.threshold_gap()));
    let merged = tape.sum(terms)?;
    let (out, pop_merge) = tape.spike(merged, *cfg, Some(&states.merge.v))?;
    for (s, &pop) in states.sdc.iter_mut().zip(&pops) {
        s.v.copy_from_slice(tape.final_potentials(pop));
    }
    states
        .merge
        .v
        .copy_from_slice(tape.final_potentials(pop_merge));
    SpikeTrain::from_buffer(tape.buffer_dims(out), tape.buffer(out))
}

/// Per-step `k × k` max pooling; binary in, binary out.
pub fn pool_forward(input: &SpikeTrain, k: usize) -> Result<SpikeTrain> {
    let mut tape = Tape::new(&adhoc(vec![])?, input.steps(), SpikeFunction::Heaviside);
    let x = tape.input(input.tensor())?;
    let out = tape.pool(x, k)?;
    SpikeTrain::from_buffer(tape.buffer_dims(out), tape.buffer(out))
}

/// Non-spiking readout: accumulated `W · flatten(s_t)` over all steps, divided by `T`.
pub fn output_integrate(input: &SpikeTrain, fc_weights: &Tensor) -> Result<Tensor> {
    let params = adhoc(vec![("fc.weight".into(), fc_weights.clone())])?;
    let mut tape = Tape::new(&params, input.steps(), SpikeFunction::Heaviside);
    let x = tape.input(input.tensor())?;
    tape.integrate(x, 0)?;
    Tensor::from_f64(&[tape.logits().len()], tape.logits(), "output_integrate")
}
