use proptest::prelude::*;
use spikegrid::data::{
    encode_direct, extract_patch, fit_pca, stratified_split, HsiCube, LabelMap, SplitMode,
    SplitSpec, Standardizer,
};
use spikegrid::layers::{
    pool_forward, sconv_forward, smc_forward, swmr_forward, SmcParams, SmcSpec, SmcStates,
    SpikeTrain, SwmrSpec, SwmrStates,
};
use spikegrid::neuron::{lif_step, LifConfig, LifState, SurrogateKind, SurrogateSpec};
use spikegrid::tensor::{conv2d, depthwise_conv2d, max_pool2d, sym_eig, PaddingMode, Tensor};
use spikegrid::train::{ConfusionMatrix, TrainConfig};

fn tensor(shape: &'static [usize], lo: f32, hi: f32) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(lo..hi, n).prop_map(move |d| Tensor::new(shape.to_vec(), d).unwrap())
}

fn spikes(shape: &'static [usize]) -> impl Strategy<Value = SpikeTrain> {
    let n: usize = shape.iter().product();
    prop::collection::vec(prop::bool::ANY, n).prop_map(move |b| {
        SpikeTrain::new(
            Tensor::new(
                shape.to_vec(),
                b.into_iter().map(|x| x as u8 as f32).collect(),
            )
            .unwrap(),
        )
        .unwrap()
    })
}

fn lif() -> impl Strategy<Value = LifConfig> {
    (0.05f64..1.0, 0.2f64..2.0, -0.5f64..0.5).prop_map(|(decay, gap, rest)| LifConfig {
        decay,
        v_threshold: rest + gap,
        v_rest: rest,
        ..Default::default()
    })
}

fn kinds() -> impl Strategy<Value = SurrogateKind> {
    prop_oneof![
        Just(SurrogateKind::AadArcsin),
        Just(SurrogateKind::AadArccos),
        Just(SurrogateKind::Rectangular)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ---- tensors ---------------------------------------------------------

    #[test]
    fn conv_is_linear(x in tensor(&[3, 6, 5], -1.0, 1.0), y in tensor(&[3, 6, 5], -1.0, 1.0),
                      k in tensor(&[2, 3, 3, 3], -1.0, 1.0), a in -2.0f32..2.0, b in -2.0f32..2.0) {
        let mix = x.zip_with(&y, |p, q| a * p + b * q).unwrap();
        let lhs = conv2d(&mix, &k, 1, PaddingMode::Same).unwrap();
        let cx = conv2d(&x, &k, 1, PaddingMode::Same).unwrap();
        let cy = conv2d(&y, &k, 1, PaddingMode::Same).unwrap();
        let rhs = cx.zip_with(&cy, |p, q| a * p + b * q).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-5);
    }

    #[test]
    fn depthwise_is_per_channel_conv(x in tensor(&[3, 5, 7], -1.0, 1.0), k in tensor(&[3, 3, 3], -1.0, 1.0)) {
        let dw = depthwise_conv2d(&x, &k, 1, PaddingMode::Same).unwrap();
        for c in 0..3 {
            let xc = x.slice_outer(c).reshape(&[1, 5, 7]).unwrap();
            let kc = k.slice_outer(c).reshape(&[1, 1, 3, 3]).unwrap();
            let single = conv2d(&xc, &kc, 1, PaddingMode::Same).unwrap();
            let own = dw.slice_outer(c);
            prop_assert_eq!(own.data(), single.data());
        }
    }

    #[test]
    fn pooled_values_come_from_their_window(x in tensor(&[2, 7, 6], -5.0, 5.0), k in 1usize..4) {
        let (y, arg) = max_pool2d(&x, k).unwrap();
        let max_in = x.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
        for c in 0..2 {
            for oy in 0..7 / k {
                for ox in 0..6 / k {
                    let v = y.get(&[c, oy, ox]);
                    prop_assert!(v <= max_in);
                    let (sy, sx) = arg.source(c, oy, ox);
                    prop_assert!(sy / k == oy && sx / k == ox);
                    prop_assert_eq!(x.get(&[c, sy, sx]), v);
                }
            }
        }
    }

    #[test]
    fn eigen_trace_and_residual(m in tensor(&[6, 6], -3.0, 3.0)) {
        let sym = m.zip_with(&m.transpose2().unwrap(), |a, b| 0.5 * (a + b)).unwrap();
        let r = sym_eig(&sym).unwrap();
        let trace: f64 = (0..6).map(|i| f64::from(sym.get(&[i, i]))).sum();
        let sum: f64 = r.eigenvalues.iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-4 * trace.abs().max(1.0));
        for i in 0..6 {
            let v = r.vector(i);
            for row in 0..6 {
                let av: f64 = (0..6).map(|c| f64::from(sym.get(&[row, c])) * v[c]).sum();
                prop_assert!((av - r.eigenvalues[i] * v[row]).abs() < 1e-8);
            }
        }
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    // ---- neurons ---------------------------------------------------------

    #[test]
    fn spikes_binary_and_reset_exact(cfg in lif(), currents in prop::collection::vec(-1.0f32..3.0, 4 * 12)) {
        let mut state = LifState::resting(&[4], &cfg);
        for step in currents.chunks(4) {
            let (s, next) = lif_step(&state, &Tensor::new(vec![4], step.to_vec()).unwrap(), &cfg).unwrap();
            for (i, &o) in s.data().iter().enumerate() {
                prop_assert!(o == 0.0 || o == 1.0);
                if o == 1.0 {
                    prop_assert_eq!(next.v[i], cfg.v_rest);
                }
            }
            state = next;
        }
    }

    #[test]
    fn weak_input_never_fires(cfg in lif(), frac in prop::collection::vec(0.0f64..0.999, 50)) {
        let bound = (1.0 - cfg.decay) * (cfg.v_threshold - cfg.v_rest);
        let mut state = LifState::resting(&[1], &cfg);
        for f in frac {
            // currents measured relative to rest, strictly under the steady-state bound
            let i = (f * bound) as f32;
            let (s, next) = lif_step(&state, &Tensor::new(vec![1], vec![i]).unwrap(), &cfg).unwrap();
            prop_assert_eq!(s.data()[0], 0.0);
            state = next;
        }
    }

    #[test]
    fn surrogate_is_even_and_bounded(kind in kinds(), lambda in 0.05f64..=1.0, x in -2.0f64..2.0) {
        let s = SurrogateSpec::new(kind, lambda).unwrap();
        prop_assert!((s.eval(x) - s.eval(-x)).abs() <= 1e-6);
        if x.abs() >= lambda {
            prop_assert_eq!(s.eval(x), 0.0);
        }
        prop_assert!(s.eval(x) >= 0.0);
    }

    #[test]
    fn aad_kinds_coincide(lambda in 0.05f64..=1.0, x in -2.0f64..2.0) {
        let a = SurrogateSpec::new(SurrogateKind::AadArcsin, lambda).unwrap().eval(x);
        let b = SurrogateSpec::new(SurrogateKind::AadArccos, lambda).unwrap().eval(x);
        prop_assert!((a - b).abs() <= 1e-6);
    }

    #[test]
    fn aad_peak_and_descent(lambda in 0.05f64..=1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        // |1 - |asin x|| falls to zero at sin(1) and rises again up to x = 1,
        // so descent is checked on [0, min(lambda, sin 1)]
        let top = lambda.min(1f64.sin());
        let s = SurrogateSpec::new(SurrogateKind::AadArcsin, lambda).unwrap();
        prop_assert_eq!(s.eval(0.0), 1.0);
        let (lo, hi) = if a <= b { (a * top, b * top) } else { (b * top, a * top) };
        if hi < lambda {
            prop_assert!(s.eval(hi) <= s.eval(lo) + 1e-12);
        }
    }

    // ---- layers ----------------------------------------------------------

    #[test]
    fn layer_outputs_are_binary(x in spikes(&[4, 4, 5, 5]), w in tensor(&[4, 4, 3, 3], -1.0, 1.5),
                                dw0 in tensor(&[2, 1, 1], -1.0, 2.0), dw in tensor(&[2, 3, 3], -1.0, 2.0),
                                pw in tensor(&[4, 4, 1, 1], -1.0, 2.0)) {
        let cfg = LifConfig::default();
        let mut st = LifState::resting(&[4, 5, 5], &cfg);
        let a = sconv_forward(&x, &w, &cfg, &mut st).unwrap();
        prop_assert!(a.tensor().data().iter().all(|&v| v == 0.0 || v == 1.0));
        let spec = SmcSpec { group_kernel_sizes: vec![1, 3], in_channels: 4, out_channels: 4 };
        let p = SmcParams { depthwise: vec![dw0, dw], pointwise: pw };
        let mut ss = SmcStates::resting(&spec, 5, 5, &cfg);
        let b = smc_forward(&a, &spec, &p, &cfg, &mut ss).unwrap();
        prop_assert!(b.tensor().data().iter().all(|&v| v == 0.0 || v == 1.0));
        let sw = SwmrSpec { channels: 4, width_factor: 2, branch_specs: vec![spec.clone(), spec.clone()] };
        let mut sws = SwmrStates::resting(&sw, 5, 5, &cfg);
        let c = swmr_forward(&b, &sw, &[p.clone(), p], &cfg, &mut sws).unwrap();
        prop_assert!(c.tensor().data().iter().all(|&v| v == 0.0 || v == 1.0));
        let d = pool_forward(&c, 2).unwrap();
        prop_assert!(d.tensor().data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn sdc_groups_are_independent(x in spikes(&[3, 4, 5, 5]), flip in 0usize..50, dw0 in tensor(&[2, 1, 1], 0.5, 2.0),
                                  dw1 in tensor(&[2, 3, 3], -0.5, 1.5)) {
        // identity pointwise mixing reproduces the depthwise-stage spikes exactly
        let cfg = LifConfig::default();
        let spec = SmcSpec { group_kernel_sizes: vec![1, 3], in_channels: 4, out_channels: 4 };
        let eye = Tensor::from_fn(&[4, 4, 1, 1], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        let p = SmcParams { depthwise: vec![dw0, dw1], pointwise: eye };
        let run = |input: &SpikeTrain| {
            let mut st = SmcStates::resting(&spec, 5, 5, &cfg);
            smc_forward(input, &spec, &p, &cfg, &mut st).unwrap()
        };
        // toggle one input spike in group 1 (channels 2..4)
        let mut data = x.tensor().clone();
        let (t, c, yx) = (flip % 3, 2 + flip % 2, flip % 25);
        let v = data.get(&[t, c, yx / 5, yx % 5]);
        data.set(&[t, c, yx / 5, yx % 5], 1.0 - v);
        let (a, b) = (run(&x), run(&SpikeTrain::new(data).unwrap()));
        for step in 0..3 {
            for ch in 0..2 {
                let sa = a.tensor().slice_outer(step).slice_outer(ch);
                let sb = b.tensor().slice_outer(step).slice_outer(ch);
                prop_assert_eq!(sa, sb);
            }
        }
    }

    #[test]
    fn residual_identity(x in spikes(&[6, 4, 3, 3]), width in 1usize..4) {
        let cfg = LifConfig::default();
        let spec = SmcSpec { group_kernel_sizes: vec![1, 3], in_channels: 4, out_channels: 4 };
        let sw = SwmrSpec { channels: 4, width_factor: width, branch_specs: vec![spec; width] };
        let zero = SmcParams {
            depthwise: vec![Tensor::zeros(&[2, 1, 1]), Tensor::zeros(&[2, 3, 3])],
            pointwise: Tensor::zeros(&[4, 4, 1, 1]),
        };
        let mut st = SwmrStates::resting(&sw, 3, 3, &cfg);
        let y = swmr_forward(&x, &sw, &vec![zero; width], &cfg, &mut st).unwrap();
        prop_assert_eq!(y, x);
    }

    // ---- data ------------------------------------------------------------

    #[test]
    fn pca_orthonormal_and_reconstruction_monotone(cube in tensor(&[5, 6, 5], -2.0, 2.0)) {
        let cube = HsiCube::new(cube).unwrap();
        let mut prev = f64::INFINITY;
        for keep in 1..=5 {
            let m = fit_pca(&cube, keep).unwrap();
            for i in 0..keep {
                for j in 0..keep {
                    let dot: f64 = (0..5).map(|r| m.components[r * keep + i] * m.components[r * keep + j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-4);
                }
            }
            let err = m.reconstruction_error(&cube).unwrap();
            prop_assert!(err <= prev + 1e-9);
            prev = err;
        }
    }

    #[test]
    fn split_partitions_labeled_pixels(labels in prop::collection::vec(0u16..4, 60), n in 1usize..6, seed in any::<u64>()) {
        let mut labels = labels;
        labels[..3].copy_from_slice(&[1, 2, 3]);
        let lm = LabelMap::new(6, 10, 3, labels).unwrap();
        let spec = SplitSpec { mode: SplitMode::PerClassCount(n), seed };
        let (train, test) = stratified_split(&lm, &spec).unwrap();
        let mut all: Vec<_> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        prop_assert_eq!(before, all.len());
        prop_assert_eq!(all.len(), lm.labeled_count());
        prop_assert!(all.iter().all(|&(r, c)| lm.get(r, c) != 0));
        prop_assert_eq!(stratified_split(&lm, &spec).unwrap(), (train, test));
    }

    #[test]
    fn encoding_repeats_patch(cube in tensor(&[6, 6, 3], -2.0, 2.0), r in 0usize..6, c in 0usize..6, t in 1usize..12) {
        let p = extract_patch(&cube, r, c, 5).unwrap();
        prop_assert_eq!(p.get(&[1, 2, 2]), cube.get(&[r, c, 1]));
        let e = encode_direct(&p, t).unwrap();
        for step in 0..t {
            prop_assert_eq!(&e.slice_outer(step), &p);
        }
    }

    // ---- training --------------------------------------------------------

    #[test]
    fn kappa_one_iff_diagonal(counts in prop::collection::vec(0u64..6, 9), off in prop::bool::ANY) {
        let mut counts = counts;
        for i in 0..3 {
            counts[i * 4] += 1;
        }
        if !off {
            for (i, c) in counts.iter_mut().enumerate() {
                if i % 4 != 0 {
                    *c = 0;
                }
            }
        }
        let cm = ConfusionMatrix::from_counts(3, counts).unwrap();
        let m = cm.metrics();
        prop_assert_eq!((m.kappa - 1.0).abs() < 1e-12, cm.is_diagonal());
    }

    #[test]
    fn aa_equals_oa_with_equal_support_and_recall(support in 1u64..20, hit_frac in 0.0f64..=1.0) {
        let hits = (hit_frac * support as f64).floor() as u64;
        let miss = support - hits;
        // each class: `hits` correct, `miss` sent to the next class
        let mut counts = vec![0u64; 16];
        for i in 0..4 {
            counts[i * 4 + i] = hits;
            counts[i * 4 + (i + 1) % 4] += miss;
        }
        let m = ConfusionMatrix::from_counts(4, counts).unwrap().metrics();
        prop_assert!((m.aa - m.oa).abs() < 1e-12);
    }

    #[test]
    fn lr_schedule_steps(every in 1usize..40, factor in 0.01f64..=1.0, epoch in 0usize..200) {
        let cfg = TrainConfig { lr_decay_every: every, lr_decay_factor: factor, ..Default::default() };
        let here = cfg.lr_at(epoch);
        let next = cfg.lr_at(epoch + 1);
        if (epoch + 1) % every == 0 {
            prop_assert!((next - here * factor).abs() <= 1e-15 * here.max(1e-300) + f64::MIN_POSITIVE);
        } else {
            prop_assert_eq!(next, here);
        }
    }
}

#[test]
fn standardisation_uses_training_pixels_only() {
    let cube = Tensor::from_fn(&[4, 4, 2], |i| {
        (i % 7) as f32 + if i >= 16 { 3.0 } else { 0.0 }
    });
    let train: Vec<_> = (0..2).flat_map(|r| (0..4).map(move |c| (r, c))).collect();
    let test: Vec<_> = (2..4).flat_map(|r| (0..4).map(move |c| (r, c))).collect();
    let s = Standardizer::fit(&cube, &train).unwrap();
    let z = s.apply(&cube).unwrap();
    let mean = |px: &[(usize, usize)], ch: usize| {
        px.iter()
            .map(|&(r, c)| f64::from(z.get(&[r, c, ch])))
            .sum::<f64>()
            / px.len() as f64
    };
    for ch in 0..2 {
        assert!(mean(&train, ch).abs() < 1e-6);
        assert!(mean(&test, ch).abs() > 0.1);
    }
}
