//! Declarative network layout, named parameters and their initialisation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bptt::{DepthwiseGroup, Tape};
use crate::error::{Error, Result};
use crate::layers::{SmcSpec, SwmrSpec};
use crate::neuron::{LifConfig, SpikeFunction};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Convolution followed by a LIF population.
    Sconv {
        out_channels: usize,
        kernel: usize,
    },
    Swmr(SwmrSpec),
    Pool {
        k: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub in_channels: usize,
    pub patch_size: usize,
    pub num_classes: usize,
    pub time_steps: usize,
    pub lif: LifConfig,
    pub layers: Vec<LayerSpec>,
}

/// Knobs the ablations vary, expanded into a full [`NetworkSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchPlan {
    /// Stem width, then the widths after the first and second transition convs.
    pub channels: [usize; 3],
    pub width_factor: usize,
    /// Kernel groups for branches of the shallow block; branch `i` uses entry `i % len`.
    pub shallow_kernels: Vec<Vec<usize>>,
    /// Same, for the deep blocks.
    pub deep_kernels: Vec<Vec<usize>>,
    pub deep_blocks: usize,
    pub stem_kernel: usize,
}

impl Default for ArchPlan {
    fn default() -> Self {
        Self {
            channels: [64, 128, 256],
            width_factor: 2,
            shallow_kernels: vec![vec![1, 3]],
            deep_kernels: vec![vec![1, 3], vec![3, 5]],
            deep_blocks: 2,
            stem_kernel: 3,
        }
    }
}

impl ArchPlan {
    /// Every SMC uses the same kernel pair, as in the uniform-kernel ablations.
    pub fn uniform_kernels(mut self, kernels: &[usize]) -> Self {
        self.shallow_kernels = vec![kernels.to_vec()];
        self.deep_kernels = vec![kernels.to_vec()];
        self
    }

    fn block(&self, channels: usize, kernels: &[Vec<usize>]) -> Result<SwmrSpec> {
        if kernels.is_empty() {
            return Err(Error::config("empty kernel plan"));
        }
        let branch_specs = (0..self.width_factor)
            .map(|i| SmcSpec {
                group_kernel_sizes: kernels[i % kernels.len()].clone(),
                in_channels: channels,
                out_channels: channels,
            })
            .collect();
        let spec = SwmrSpec {
            channels,
            width_factor: self.width_factor,
            branch_specs,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub input: [usize; 3],
    pub output: [usize; 3],
}

impl NetworkSpec {
    /// SConv → SWMR → 1×1 SConv → pool → SWMR × `deep_blocks` → 1×1 SConv → pool → FC.
    pub fn from_plan(
        plan: &ArchPlan,
        in_channels: usize,
        patch_size: usize,
        num_classes: usize,
        time_steps: usize,
        lif: LifConfig,
    ) -> Result<Self> {
        if plan.width_factor == 0 {
            return Err(Error::config("width factor must be at least 1"));
        }
        let [c1, c2, c3] = plan.channels;
        let mut layers = vec![
            LayerSpec::Sconv {
                out_channels: c1,
                kernel: plan.stem_kernel,
            },
            LayerSpec::Swmr(plan.block(c1, &plan.shallow_kernels)?),
            LayerSpec::Sconv {
                out_channels: c2,
                kernel: 1,
            },
            LayerSpec::Pool { k: 2 },
        ];
        for _ in 0..plan.deep_blocks {
            layers.push(LayerSpec::Swmr(plan.block(c2, &plan.deep_kernels)?));
        }
        layers.push(LayerSpec::Sconv {
            out_channels: c3,
            kernel: 1,
        });
        layers.push(LayerSpec::Pool { k: 2 });
        let spec = Self {
            in_channels,
            patch_size,
            num_classes,
            time_steps,
            lif,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The reference layout: 30 input components, 64/128/256 channels.
    pub fn reference(patch_size: usize, num_classes: usize, time_steps: usize) -> Result<Self> {
        Self::from_plan(
            &ArchPlan::default(),
            30,
            patch_size,
            num_classes,
            time_steps,
            LifConfig::default(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size.is_multiple_of(2) {
            return Err(Error::config(format!(
                "patch size {} must be odd",
                self.patch_size
            )));
        }
        if self.time_steps == 0 {
            return Err(Error::config("time steps must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        self.lif.validate()?;
        self.layer_shapes().map(|_| ())
    }

    /// Per-layer `[C, H, W]` in and out, checking every transition.
    pub fn layer_shapes(&self) -> Result<Vec<LayerShape>> {
        let mut shape = [self.in_channels, self.patch_size, self.patch_size];
        let mut out = Vec::new();
        let (mut n_sconv, mut n_swmr, mut n_pool) = (0, 0, 0);
        for layer in &self.layers {
            let input = shape;
            let name = match layer {
                LayerSpec::Sconv {
                    out_channels,
                    kernel,
                } => {
                    if kernel % 2 == 0 || *out_channels == 0 {
                        return Err(Error::config(format!("bad sconv kernel {kernel}")));
                    }
                    shape[0] = *out_channels;
                    n_sconv += 1;
                    format!("sconv{n_sconv}")
                }
                LayerSpec::Swmr(s) => {
                    s.validate()?;
                    if s.channels != shape[0] {
                        return Err(Error::config(format!(
                            "swmr block expects {} channels, receives {}",
                            s.channels, shape[0]
                        )));
                    }
                    n_swmr += 1;
                    format!("swmr{n_swmr}")
                }
                LayerSpec::Pool { k } => {
                    if *k == 0 || shape[1] < *k || shape[2] < *k {
                        return Err(Error::config(format!(
                            "pool {k} on {}x{} maps",
                            shape[1], shape[2]
                        )));
                    }
                    shape[1] /= k;
                    shape[2] /= k;
                    n_pool += 1;
                    format!("pool{n_pool}")
                }
            };
            out.push(LayerShape {
                name,
                input,
                output: shape,
            });
        }
        out.push(LayerShape {
            name: "fc".into(),
            input: shape,
            output: [self.num_classes, 1, 1],
        });
        Ok(out)
    }

    pub fn feature_len(&self) -> Result<usize> {
        let shapes = self.layer_shapes()?;
        let [c, h, w] = shapes.last().expect("fc row").input;
        Ok(c * h * w)
    }

    /// `(name, shape, fan_in)` for every parameter tensor, in tape order.
    pub fn param_layout(&self) -> Result<Vec<(String, Vec<usize>, usize)>> {
        let shapes = self.layer_shapes()?;
        let mut out = Vec::new();
        for (layer, ls) in self.layers.iter().zip(&shapes) {
            match layer {
                LayerSpec::Sconv {
                    out_channels,
                    kernel,
                } => {
                    let cin = ls.input[0];
                    out.push((
                        format!("{}.weight", ls.name),
                        vec![*out_channels, cin, *kernel, *kernel],
                        cin * kernel * kernel,
                    ));
                }
                LayerSpec::Swmr(s) => {
                    for (b, br) in s.branch_specs.iter().enumerate() {
                        let per = br.group_size();
                        for (g, &k) in br.group_kernel_sizes.iter().enumerate() {
                            out.push((
                                format!("{}.branch{b}.dw{g}", ls.name),
                                vec![per, k, k],
                                k * k,
                            ));
                        }
                        out.push((
                            format!("{}.branch{b}.pw", ls.name),
                            vec![br.out_channels, br.in_channels, 1, 1],
                            br.in_channels,
                        ));
                    }
                }
                LayerSpec::Pool { .. } => {}
            }
        }
        let f = self.feature_len()?;
        out.push(("fc.weight".into(), vec![self.num_classes, f], f));
        Ok(out)
    }

    /// Stable fingerprint of the layout, stored in checkpoints.
    pub fn schema_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("spec serialises");
        let digest = Sha256::digest(json.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub(crate) fn build_tape(
        &self,
        params: &Params,
        input: &Tensor,
        spike_fn: SpikeFunction,
    ) -> Result<Tape> {
        params.check_layout(self)?;
        let expect = [
            self.time_steps,
            self.in_channels,
            self.patch_size,
            self.patch_size,
        ];
        if input.shape() != expect {
            return Err(Error::shape(format!(
                "network input {:?}, expected {expect:?}",
                input.shape()
            )));
        }
        let mut tape = Tape::new(params, self.time_steps, spike_fn);
        let mut x = tape.input(input)?;
        let mut next_param = 0;
        let mut take = || {
            next_param += 1;
            next_param - 1
        };
        let gap = self.lif.threshold_gap();
        for layer in &self.layers {
            match layer {
                LayerSpec::Sconv { .. } => {
                    let cur = tape.conv(x, take())?;
                    x = tape.spike(cur, self.lif, None)?.0;
                }
                LayerSpec::Swmr(s) => {
                    let mut terms = Vec::with_capacity(s.width_factor + 1);
                    for br in &s.branch_specs {
                        let per = br.group_size();
                        let groups = br
                            .group_kernel_sizes
                            .iter()
                            .enumerate()
                            .map(|(g, &k)| DepthwiseGroup {
                                param: take(),
                                c0: g * per,
                                c1: (g + 1) * per,
                                k,
                            })
                            .collect();
                        let dw = tape.depthwise(x, groups)?;
                        let sdc = tape.spike(dw, self.lif, None)?.0;
                        terms.push((tape.conv(sdc, take())?, 1.0));
                    }
                    terms.push((x, gap));
                    let merged = tape.sum(terms)?;
                    x = tape.spike(merged, self.lif, None)?.0;
                }
                LayerSpec::Pool { k } => {
                    x = tape.pool(x, *k)?;
                }
            }
        }
        tape.integrate(x, take())?;
        Ok(tape)
    }

    /// Logits for one encoded sample, without keeping the tape.
    pub fn forward(&self, params: &Params, input: &Tensor) -> Result<Tensor> {
        let tape = self.build_tape(params, input, SpikeFunction::Heaviside)?;
        Tensor::from_f64(&[self.num_classes], tape.logits(), "readout")
    }
}

/// Named parameter tensors in tape order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn new(names: Vec<String>, tensors: Vec<Tensor>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(Error::shape("parameter names and tensors differ in count"));
        }
        Ok(Self { names, tensors })
    }

    /// Fan-in scaled uniform: `U(-a, a)` with `a = gain · sqrt(3 / fan_in)`.
    pub fn init(spec: &NetworkSpec, gain: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, fan_in) in spec.param_layout()? {
            let a = (gain * (3.0 / fan_in as f64).sqrt()) as f32;
            tensors.push(Tensor::from_fn(&shape, |_| rng.gen_range(-a..=a)));
            names.push(name);
        }
        Ok(Self { names, tensors })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let (names, tensors) = spec
            .param_layout()?
            .into_iter()
            .map(|(n, s, _)| (n, Tensor::zeros(&s)))
            .unzip();
        Ok(Self { names, tensors })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(|i| &mut self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn check_layout(&self, spec: &NetworkSpec) -> Result<()> {
        let layout = spec.param_layout()?;
        if layout.len() != self.len() {
            return Err(Error::shape(format!(
                "network needs {} parameter tensors, got {}",
                layout.len(),
                self.len()
            )));
        }
        for ((name, shape, _), (n, t)) in layout.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != n || shape.as_slice() != t.shape() {
                return Err(Error::shape(format!(
                    "parameter {n} {:?} does not match layout {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}
