//! Recording forward pass and reverse-mode gradients through the unrolled
//! time dimension.
//!
//! Every value lives in a time-major `[T, C, H, W]` `f64` buffer owned by the
//! [`Tape`]. Synaptic ops (convolutions, pooling, the readout) are recorded
//! once per layer and cover all steps; spike generation is recorded once per
//! population *per step*, because the membrane recurrence is what couples
//! steps together. Backward walks the nodes in reverse. At a spike node the
//! spike nonlinearity's derivative is replaced by the surrogate, the membrane
//! carry to the previous step is scaled by `decay`, and the carry is cut at
//! steps where the neuron reset. The smooth twin instead resets softly,
//! `v ← u + s·(v_rest − u)`, and that reset is differentiated exactly.

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Params};
use crate::neuron::{LifConfig, SpikeFunction, SurrogateSpec};
use crate::tensor::kernels::{self, ConvGeom};
use crate::tensor::Tensor;

pub type BufId = usize;
pub type PopId = usize;

#[derive(Clone, Debug)]
pub(crate) struct Buffer {
    pub dims: [usize; 4],
    pub data: Vec<f64>,
    pub requires_grad: bool,
    /// Winning input index per pooled element, for pool outputs.
    pub argmax: Option<Vec<u32>>,
}

impl Buffer {
    fn step_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }
}

/// One LIF population: its config, starting potentials, and the recorded
/// pre-threshold offsets `v - v_th` for every step.
#[derive(Clone, Debug)]
pub(crate) struct Population {
    pub cfg: LifConfig,
    pub n: usize,
    pub init: Vec<f64>,
    pub v: Vec<f64>,
    pub pre_threshold: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthwiseGroup {
    pub param: usize,
    pub c0: usize,
    pub c1: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TapeOp {
    /// Encoded input currents.
    Input { output: BufId },
    /// Same-padded, stride-1 convolution applied at every step.
    Conv {
        input: BufId,
        output: BufId,
        param: usize,
        geom: ConvGeom,
    },
    /// Channel-grouped depthwise convolution; group `i` covers channels `c0..c1`.
    Depthwise {
        input: BufId,
        output: BufId,
        groups: Vec<DepthwiseGroup>,
    },
    /// Weighted sum of equally shaped buffers.
    Sum {
        terms: Vec<(BufId, f64)>,
        output: BufId,
    },
    /// LIF update and spike emission for one population at one step.
    Spike {
        pop: PopId,
        current: BufId,
        output: BufId,
    },
    /// Non-overlapping max pooling at every step.
    Pool {
        input: BufId,
        output: BufId,
        k: usize,
    },
    /// Readout: time-averaged membrane of a non-spiking linear layer.
    Integrate {
        input: BufId,
        output: BufId,
        param: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TapeNode {
    pub op: TapeOp,
    /// Time step for per-step nodes; `None` for nodes spanning all steps.
    pub step: Option<usize>,
}

impl TapeNode {
    pub fn is_spike(&self) -> bool {
        matches!(self.op, TapeOp::Spike { .. })
    }
}

/// Shape-matched gradients for every parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub grads: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(params: &Params) -> Self {
        Self {
            names: params.names().to_vec(),
            shapes: params
                .tensors()
                .iter()
                .map(|t| t.shape().to_vec())
                .collect(),
            grads: params
                .tensors()
                .iter()
                .map(|t| vec![0.0; t.len()])
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.grads[i].as_slice())
    }

    pub fn tensor(&self, i: usize) -> Result<Tensor> {
        Tensor::from_f64(&self.shapes[i], &self.grads[i], &self.names[i])
    }

    /// `self += scale * other`, in parameter order.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.grads.iter_mut().flatten().for_each(|x| *x *= s);
    }

    /// First parameter holding a NaN or infinite entry.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.grads
            .iter()
            .position(|g| g.iter().any(|v| !v.is_finite()))
            .map(|i| self.names[i].as_str())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.grads.iter().flatten().copied().collect()
    }
}

/// Ordered record of a forward pass with everything backward needs.
#[derive(Clone, Debug)]
pub struct Tape {
    pub nodes: Vec<TapeNode>,
    pub(crate) bufs: Vec<Buffer>,
    pub(crate) pops: Vec<Population>,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) param_names: Vec<String>,
    pub(crate) param_shapes: Vec<Vec<usize>>,
    pub(crate) spike_fn: SpikeFunction,
    pub(crate) steps: usize,
    logits: Option<BufId>,
}

impl Tape {
    pub(crate) fn new(params: &Params, steps: usize, spike_fn: SpikeFunction) -> Self {
        Self {
            nodes: Vec::new(),
            bufs: Vec::new(),
            pops: Vec::new(),
            weights: params.tensors().iter().map(Tensor::to_f64).collect(),
            param_names: params.names().to_vec(),
            param_shapes: params
                .tensors()
                .iter()
                .map(|t| t.shape().to_vec())
                .collect(),
            spike_fn,
            steps,
            logits: None,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn spike_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_spike()).count()
    }

    pub fn population_count(&self) -> usize {
        self.pops.len()
    }

    /// Time-averaged readout potentials of the recorded pass.
    pub fn logits(&self) -> &[f64] {
        let id = self.logits.expect("tape has no readout");
        &self.bufs[id].data
    }

    pub fn buffer_dims(&self, id: BufId) -> [usize; 4] {
        self.bufs[id].dims
    }

    pub fn buffer(&self, id: BufId) -> &[f64] {
        &self.bufs[id].data
    }

    /// Membrane potentials each population ended the pass with.
    pub fn final_potentials(&self, pop: PopId) -> &[f64] {
        &self.pops[pop].v
    }

    /// Mean spikes per neuron per step for each population, in creation order.
    pub fn firing_rates(&self) -> Vec<f64> {
        let mut out: Vec<Option<BufId>> = vec![None; self.pops.len()];
        for n in &self.nodes {
            if let TapeOp::Spike { pop, output, .. } = n.op {
                out[pop] = Some(output);
            }
        }
        out.iter()
            .map(|b| {
                b.map_or(0.0, |id| {
                    let d = &self.bufs[id].data;
                    d.iter().sum::<f64>() / d.len() as f64
                })
            })
            .collect()
    }

    /// Every recorded `v - v_th`, population-major then time-major.
    pub fn pre_threshold_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pops
            .iter()
            .flat_map(|p| p.pre_threshold.iter().copied())
    }

    fn dims(&self, id: BufId) -> [usize; 4] {
        self.bufs[id].dims
    }

    fn push_buf(&mut self, id: BufId, dims: [usize; 4], data: Vec<f64>, requires_grad: bool) {
        debug_assert_eq!(id, self.bufs.len());
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        self.bufs.push(Buffer {
            dims,
            data,
            requires_grad,
            argmax: None,
        });
    }

    fn record(&mut self, op: TapeOp, step: Option<usize>) -> Result<()> {
        self.exec(&op, step)?;
        self.nodes.push(TapeNode { op, step });
        Ok(())
    }

    // ---- builders ------------------------------------------------------

    pub(crate) fn input(&mut self, currents: &Tensor) -> Result<BufId> {
        let [t, c, h, w] = currents.dims4()?;
        if t != self.steps {
            return Err(Error::shape(format!(
                "input has {t} steps, tape expects {}",
                self.steps
            )));
        }
        let id = self.bufs.len();
        self.push_buf(id, [t, c, h, w], currents.to_f64(), false);
        self.nodes.push(TapeNode {
            op: TapeOp::Input { output: id },
            step: None,
        });
        Ok(id)
    }

    pub(crate) fn conv(&mut self, input: BufId, param: usize) -> Result<BufId> {
        let [_, cin, h, w] = self.dims(input);
        let [cout, kin, k, k2] = match self.param_shapes[param][..] {
            [a, b, c, d] => [a, b, c, d],
            _ => {
                return Err(Error::shape(format!(
                    "{} is not a conv kernel",
                    self.param_names[param]
                )))
            }
        };
        if kin != cin || k != k2 || k % 2 == 0 {
            return Err(Error::shape(format!(
                "{}: kernel {:?} vs input channels {cin}",
                self.param_names[param], self.param_shapes[param]
            )));
        }
        let geom = ConvGeom {
            cin,
            h,
            w,
            cout,
            k,
            stride: 1,
            pad: (k - 1) / 2,
        };
        let output = self.bufs.len();
        self.record(
            TapeOp::Conv {
                input,
                output,
                param,
                geom,
            },
            None,
        )?;
        Ok(output)
    }

    pub(crate) fn depthwise(&mut self, input: BufId, groups: Vec<DepthwiseGroup>) -> Result<BufId> {
        let [_, c, _, _] = self.dims(input);
        let mut next = 0;
        for g in &groups {
            let shape = &self.param_shapes[g.param];
            if g.c0 != next || g.c1 > c || shape[..] != [g.c1 - g.c0, g.k, g.k] || g.k % 2 == 0 {
                return Err(Error::shape(format!(
                    "depthwise group {}..{} with kernel {:?} does not tile {c} channels",
                    g.c0, g.c1, shape
                )));
            }
            next = g.c1;
        }
        if next != c {
            return Err(Error::shape(format!(
                "depthwise groups cover {next} of {c} channels"
            )));
        }
        let output = self.bufs.len();
        self.record(
            TapeOp::Depthwise {
                input,
                output,
                groups,
            },
            None,
        )?;
        Ok(output)
    }

    pub(crate) fn sum(&mut self, terms: Vec<(BufId, f64)>) -> Result<BufId> {
        let dims = self.dims(terms[0].0);
        if terms.iter().any(|&(b, _)| self.dims(b) != dims) {
            return Err(Error::shape("sum over differently shaped buffers"));
        }
        let output = self.bufs.len();
        self.record(TapeOp::Sum { terms, output }, None)?;
        Ok(output)
    }

    /// Adds a population driven by `current` and records one spike node per step.
    pub(crate) fn spike(
        &mut self,
        current: BufId,
        cfg: LifConfig,
        init: Option<&[f64]>,
    ) -> Result<(BufId, PopId)> {
        let dims = self.dims(current);
        let n = dims[1] * dims[2] * dims[3];
        let init = match init {
            Some(v) if v.len() == n => v.to_vec(),
            Some(v) => {
                return Err(Error::shape(format!(
                    "initial state has {} neurons, layer has {n}",
                    v.len()
                )))
            }
            None => vec![cfg.v_rest; n],
        };
        let pop = self.pops.len();
        self.pops.push(Population {
            cfg,
            n,
            v: init.clone(),
            init,
            pre_threshold: vec![0.0; dims[0] * n],
        });
        let output = self.bufs.len();
        self.push_buf(output, dims, vec![0.0; dims[0] * n], true);
        for t in 0..dims[0] {
            self.record(
                TapeOp::Spike {
                    pop,
                    current,
                    output,
                },
                Some(t),
            )?;
        }
        Ok((output, pop))
    }

    pub(crate) fn pool(&mut self, input: BufId, k: usize) -> Result<BufId> {
        let [_, _, h, w] = self.dims(input);
        if k == 0 || h < k || w < k {
            return Err(Error::shape(format!("pool size {k} on {h}x{w} maps")));
        }
        let output = self.bufs.len();
        self.record(TapeOp::Pool { input, output, k }, None)?;
        Ok(output)
    }

    pub(crate) fn integrate(&mut self, input: BufId, param: usize) -> Result<BufId> {
        let f = self.bufs[input].step_len();
        match self.param_shapes[param][..] {
            [_, pf] if pf == f => {}
            _ => {
                return Err(Error::shape(format!(
                    "readout {:?} does not match {f} features",
                    self.param_shapes[param]
                )))
            }
        }
        let output = self.bufs.len();
        self.record(
            TapeOp::Integrate {
                input,
                output,
                param,
            },
            None,
        )?;
        self.logits = Some(output);
        Ok(output)
    }

    // ---- forward execution ---------------------------------------------

    fn exec(&mut self, op: &TapeOp, step: Option<usize>) -> Result<()> {
        match *op {
            TapeOp::Input { .. } => unreachable!("input buffers are pushed directly"),
            TapeOp::Conv {
                input,
                output,
                param,
                geom,
            } => {
                let src = &self.bufs[input];
                let t = src.dims[0];
                let (il, ol) = (geom.in_len(), geom.out_len());
                let wts = &self.weights[param];
                let mut out = vec![0.0; t * ol];
                let mut scratch = Vec::new();
                if is_constant_in_time(&src.data, t, il) {
                    kernels::conv_forward(
                        &src.data[..il],
                        wts,
                        &geom,
                        &mut out[..ol],
                        &mut scratch,
                    );
                    let (first, rest) = out.split_at_mut(ol);
                    rest.chunks_exact_mut(ol)
                        .for_each(|c| c.copy_from_slice(first));
                } else {
                    for s in 0..t {
                        kernels::conv_forward(
                            &src.data[s * il..(s + 1) * il],
                            wts,
                            &geom,
                            &mut out[s * ol..(s + 1) * ol],
                            &mut scratch,
                        );
                    }
                }
                let dims = [t, geom.cout, geom.out_h(), geom.out_w()];
                self.push_buf(output, dims, out, true);
            }
            TapeOp::Depthwise {
                input,
                output,
                ref groups,
            } => {
                let src = &self.bufs[input];
                let [t, c, h, w] = src.dims;
                let plane = h * w;
                let mut out = vec![0.0; t * c * plane];
                for s in 0..t {
                    for g in groups {
                        let geom = group_geom(g, h, w);
                        let range = (s * c + g.c0) * plane..(s * c + g.c1) * plane;
                        kernels::depthwise_forward(
                            &src.data[range.clone()],
                            &self.weights[g.param],
                            &geom,
                            &mut out[range],
                        );
                    }
                }
                self.push_buf(output, [t, c, h, w], out, true);
            }
            TapeOp::Sum { ref terms, output } => {
                let dims = self.bufs[terms[0].0].dims;
                let mut out = vec![0.0; dims.iter().product()];
                for &(b, scale) in terms {
                    for (o, &x) in out.iter_mut().zip(&self.bufs[b].data) {
                        *o += scale * x;
                    }
                }
                self.push_buf(output, dims, out, true);
            }
            TapeOp::Spike {
                pop,
                current,
                output,
            } => {
                let t = step.expect("spike nodes are per step");
                let spike_fn = self.spike_fn;
                let p = &mut self.pops[pop];
                let n = p.n;
                let cur = &self.bufs[current].data[t * n..(t + 1) * n];
                let th = p.cfg.v_threshold;
                let mut spikes = vec![0.0; n];
                for i in 0..n {
                    let u = p.cfg.integrate(p.v[i], cur[i]);
                    let x = u - th;
                    p.pre_threshold[t * n + i] = x;
                    spikes[i] = spike_fn.forward(x);
                    p.v[i] = match spike_fn {
                        SpikeFunction::Heaviside if u >= th => p.cfg.v_rest,
                        SpikeFunction::Heaviside => u,
                        // smooth reset toward rest, weighted by the soft spike
                        SpikeFunction::Sigmoid { .. } => u + spikes[i] * (p.cfg.v_rest - u),
                    };
                }
                self.bufs[output].data[t * n..(t + 1) * n].copy_from_slice(&spikes);
            }
            TapeOp::Pool { input, output, k } => {
                let src = &self.bufs[input];
                let [t, c, h, w] = src.dims;
                let (ho, wo) = (h / k, w / k);
                let (il, ol) = (c * h * w, c * ho * wo);
                let mut out = vec![0.0; t * ol];
                let mut idx = vec![0u32; t * ol];
                for s in 0..t {
                    kernels::max_pool_forward(
                        &src.data[s * il..(s + 1) * il],
                        c,
                        h,
                        w,
                        k,
                        &mut out[s * ol..(s + 1) * ol],
                        &mut idx[s * ol..(s + 1) * ol],
                    );
                }
                self.push_buf(output, [t, c, ho, wo], out, true);
                self.bufs[output].argmax = Some(idx);
            }
            TapeOp::Integrate {
                input,
                output,
                param,
            } => {
                let src = &self.bufs[input];
                let t = src.dims[0];
                let f = src.step_len();
                let counts = time_sum(&src.data, t, f);
                let classes = self.param_shapes[param][0];
                let mut logits = vec![0.0; classes];
                kernels::gemm(
                    classes,
                    f,
                    1,
                    &self.weights[param],
                    false,
                    &counts,
                    false,
                    &mut logits,
                    0.0,
                );
                let inv_t = 1.0 / t as f64;
                logits.iter_mut().for_each(|v| *v *= inv_t);
                self.push_buf(output, [1, classes, 1, 1], logits, true);
            }
        }
        Ok(())
    }

    /// Re-executes the recorded node list from the stored input and weights.
    pub fn replay(&self) -> Result<Vec<f64>> {
        let mut fresh = Tape {
            nodes: Vec::new(),
            bufs: Vec::new(),
            pops: self
                .pops
                .iter()
                .map(|p| Population {
                    v: p.init.clone(),
                    pre_threshold: vec![0.0; p.pre_threshold.len()],
                    ..p.clone()
                })
                .collect(),
            weights: self.weights.clone(),
            param_names: self.param_names.clone(),
            param_shapes: self.param_shapes.clone(),
            spike_fn: self.spike_fn,
            steps: self.steps,
            logits: self.logits,
        };
        for node in &self.nodes {
            match node.op {
                TapeOp::Input { output } => {
                    let b = &self.bufs[output];
                    fresh.push_buf(output, b.dims, b.data.clone(), false);
                }
                TapeOp::Spike { output, .. } if node.step == Some(0) => {
                    let dims = self.bufs[output].dims;
                    fresh.push_buf(output, dims, vec![0.0; dims.iter().product()], true);
                    fresh.exec(&node.op, node.step)?;
                }
                _ => fresh.exec(&node.op, node.step)?,
            }
        }
        Ok(fresh.logits().to_vec())
    }

    // ---- backward --------------------------------------------------------

    /// Gradients of `Σ d_logits · logits` with respect to every parameter.
    pub fn backward_f64(&self, d_logits: &[f64], surrogate: &SurrogateSpec) -> Result<GradientSet> {
        let logits_id = self
            .logits
            .ok_or_else(|| Error::shape("tape has no readout"))?;
        if d_logits.len() != self.bufs[logits_id].data.len() {
            return Err(Error::shape(format!(
                "d_logits has {} entries, readout has {}",
                d_logits.len(),
                self.bufs[logits_id].data.len()
            )));
        }
        let mut pgrads: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.bufs.len()];
        grads[logits_id] = Some(d_logits.to_vec());
        let mut carry: Vec<Option<Vec<f64>>> = vec![None; self.pops.len()];
        let mut scratch = Vec::new();
        let mut scratch2 = Vec::new();

        for node in self.nodes.iter().rev() {
            match node.op {
                TapeOp::Input { .. } => {}
                TapeOp::Conv {
                    input,
                    output,
                    param,
                    geom,
                } => {
                    let Some(g_out) = grads[output].take() else {
                        continue;
                    };
                    let src = &self.bufs[input];
                    let t = src.dims[0];
                    let (il, ol) = (geom.in_len(), geom.out_len());
                    let wts = &self.weights[param];
                    if !src.requires_grad && is_constant_in_time(&src.data, t, il) {
                        let g_sum = time_sum(&g_out, t, ol);
                        kernels::conv_backward(
                            &src.data[..il],
                            wts,
                            &g_sum,
                            &geom,
                            &mut pgrads[param],
                            None,
                            &mut scratch,
                            &mut scratch2,
                        );
                        continue;
                    }
                    let mut g_in = src
                        .requires_grad
                        .then(|| take_or_zero(&mut grads, input, t * il));
                    for s in 0..t {
                        kernels::conv_backward(
                            &src.data[s * il..(s + 1) * il],
                            wts,
                            &g_out[s * ol..(s + 1) * ol],
                            &geom,
                            &mut pgrads[param],
                            g_in.as_mut().map(|g| &mut g[s * il..(s + 1) * il]),
                            &mut scratch,
                            &mut scratch2,
                        );
                    }
                    if let Some(g) = g_in {
                        grads[input] = Some(g);
                    }
                }
                TapeOp::Depthwise {
                    input,
                    output,
                    ref groups,
                } => {
                    let Some(g_out) = grads[output].take() else {
                        continue;
                    };
                    let src = &self.bufs[input];
                    let [t, c, h, w] = src.dims;
                    let plane = h * w;
                    let mut g_in = src
                        .requires_grad
                        .then(|| take_or_zero(&mut grads, input, t * c * plane));
                    for s in 0..t {
                        for g in groups {
                            let geom = group_geom(g, h, w);
                            let range = (s * c + g.c0) * plane..(s * c + g.c1) * plane;
                            kernels::depthwise_backward(
                                &src.data[range.clone()],
                                &self.weights[g.param],
                                &g_out[range.clone()],
                                &geom,
                                &mut pgrads[g.param],
                                g_in.as_mut().map(|gi| &mut gi[range.clone()]),
                            );
                        }
                    }
                    if let Some(g) = g_in {
                        grads[input] = Some(g);
                    }
                }
                TapeOp::Sum { ref terms, output } => {
                    let Some(g_out) = grads[output].take() else {
                        continue;
                    };
                    for &(b, scale) in terms {
                        if !self.bufs[b].requires_grad {
                            continue;
                        }
                        let g = grads[b].get_or_insert_with(|| vec![0.0; g_out.len()]);
                        for (gi, &go) in g.iter_mut().zip(&g_out) {
                            *gi += scale * go;
                        }
                    }
                }
                TapeOp::Spike {
                    pop,
                    current,
                    output,
                } => {
                    let t = node.step.expect("spike nodes are per step");
                    let p = &self.pops[pop];
                    let n = p.n;
                    let decay = p.cfg.decay;
                    // no loss path through these spikes
                    let Some(g_out) = grads[output].as_ref() else {
                        continue;
                    };
                    let g_s = g_out[t * n..(t + 1) * n].to_vec();
                    let g_v = carry[pop].get_or_insert_with(|| vec![0.0; n]);
                    let g_cur = grads[current]
                        .get_or_insert_with(|| vec![0.0; self.bufs[current].data.len()]);
                    for i in 0..n {
                        let x = p.pre_threshold[t * n + i];
                        let ds = self.spike_fn.derivative(x, surrogate);
                        // ∂v/∂u: the hard reset is detached (0 or 1); the
                        // twin's smooth reset is differentiated exactly
                        let dv_du = match self.spike_fn {
                            SpikeFunction::Heaviside => f64::from(u8::from(x < 0.0)),
                            SpikeFunction::Sigmoid { .. } => {
                                let s = self.spike_fn.forward(x);
                                let u = x + p.cfg.v_threshold;
                                (1.0 - s) - ds * (u - p.cfg.v_rest)
                            }
                        };
                        let g_u = g_s[i] * ds + g_v[i] * dv_du;
                        g_cur[t * n + i] += g_u;
                        g_v[i] = decay * g_u;
                    }
                    if t == 0 {
                        grads[output] = None;
                    }
                }
                TapeOp::Pool { input, output, k } => {
                    let Some(g_out) = grads[output].take() else {
                        continue;
                    };
                    let [t, c, h, w] = self.bufs[input].dims;
                    let (il, ol) = (c * h * w, c * (h / k) * (w / k));
                    let idx = self.bufs[output]
                        .argmax
                        .as_ref()
                        .expect("pool output keeps argmax");
                    let mut g_in = take_or_zero(&mut grads, input, t * il);
                    for s in 0..t {
                        kernels::max_pool_backward(
                            &g_out[s * ol..(s + 1) * ol],
                            &idx[s * ol..(s + 1) * ol],
                            c,
                            h,
                            w,
                            k,
                            &mut g_in[s * il..(s + 1) * il],
                        );
                    }
                    grads[input] = Some(g_in);
                }
                TapeOp::Integrate {
                    input,
                    output,
                    param,
                } => {
                    let Some(g_out) = grads[output].take() else {
                        continue;
                    };
                    let src = &self.bufs[input];
                    let t = src.dims[0];
                    let f = src.step_len();
                    let classes = g_out.len();
                    let inv_t = 1.0 / t as f64;
                    let g_scaled: Vec<f64> = g_out.iter().map(|g| g * inv_t).collect();
                    let counts = time_sum(&src.data, t, f);
                    kernels::gemm(
                        classes,
                        1,
                        f,
                        &g_scaled,
                        false,
                        &counts,
                        false,
                        &mut pgrads[param],
                        1.0,
                    );
                    if src.requires_grad {
                        let mut g_step = vec![0.0; f];
                        kernels::gemm(
                            f,
                            classes,
                            1,
                            &self.weights[param],
                            true,
                            &g_scaled,
                            false,
                            &mut g_step,
                            0.0,
                        );
                        let g_in = grads[input].get_or_insert_with(|| vec![0.0; t * f]);
                        for s in 0..t {
                            for (gi, &gs) in g_in[s * f..(s + 1) * f].iter_mut().zip(&g_step) {
                                *gi += gs;
                            }
                        }
                    }
                }
            }
        }

        Ok(GradientSet {
            names: self.param_names.clone(),
            shapes: self.param_shapes.clone(),
            grads: pgrads,
        })
    }
}

fn take_or_zero(grads: &mut [Option<Vec<f64>>], id: BufId, len: usize) -> Vec<f64> {
    grads[id].take().unwrap_or_else(|| vec![0.0; len])
}

fn group_geom(g: &DepthwiseGroup, h: usize, w: usize) -> ConvGeom {
    let c = g.c1 - g.c0;
    ConvGeom {
        cin: c,
        h,
        w,
        cout: c,
        k: g.k,
        stride: 1,
        pad: (g.k - 1) / 2,
    }
}

fn is_constant_in_time(data: &[f64], t: usize, step: usize) -> bool {
    let first = &data[..step];
    (1..t).all(|s| &data[s * step..(s + 1) * step] == first)
}

fn time_sum(data: &[f64], t: usize, step: usize) -> Vec<f64> {
    let mut acc = vec![0.0; step];
    for s in 0..t {
        for (a, &x) in acc.iter_mut().zip(&data[s * step..(s + 1) * step]) {
            *a += x;
        }
    }
    acc
}

/// Runs the network on one encoded sample and keeps the full tape.
pub fn forward_record(
    net: &NetworkSpec,
    params: &Params,
    input: &Tensor,
) -> Result<(Tensor, Tape)> {
    forward_record_with(net, params, input, SpikeFunction::Heaviside)
}

pub fn forward_record_with(
    net: &NetworkSpec,
    params: &Params,
    input: &Tensor,
    spike_fn: SpikeFunction,
) -> Result<(Tensor, Tape)> {
    let tape = net.build_tape(params, input, spike_fn)?;
    let logits = Tensor::from_f64(&[tape.logits().len()], tape.logits(), "readout")?;
    Ok((logits, tape))
}

/// Gradients of the loss whose derivative with respect to the logits is `d_logits`.
pub fn backward(tape: &Tape, d_logits: &Tensor, spec: &SurrogateSpec) -> Result<GradientSet> {
    tape.backward_f64(&d_logits.to_f64(), spec)
}
