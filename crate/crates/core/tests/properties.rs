use delaysnn::hwcost::{energy, OpCounts};
use delaysnn::layers::{delayed_input, DelayLayerParams, SpikeHistory};
use delaysnn::pruning::{prune_by_magnitude, prune_layer, refine_delays, PruneRule};
use delaysnn::tasks::{bin_events, gen_adding, SpikeEvent, SpikeEventSet};
use delaysnn::{
    forward, Checkpoint, CheckpointMeta, DelaySpec, EnergyCoeffs, LayerKind, LayerSpec, NetworkParams, NetworkSpec,
    NeuronConfig, ReadoutSpec, SurrogateConfig,
};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn window() -> impl Strategy<Value = (usize, usize)> {
    (1usize..6, 1usize..8).prop_map(|(stride, n)| (stride * n, stride))
}

fn layer(seed: u64, pre: usize, post: usize, depth: usize, stride: usize) -> DelayLayerParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DelayLayerParams::init(pre, post, DelaySpec::from_depth_stride(depth, stride).unwrap(), 1.0, &mut rng)
}

fn small_net(delay_depth: usize, stride: usize) -> NetworkSpec {
    NetworkSpec {
        input_size: 3,
        layers: vec![
            LayerSpec { size: 4, kind: LayerKind::Recurrent, neuron: NeuronConfig::default() },
            LayerSpec {
                size: 3,
                kind: LayerKind::Delayed { delays: DelaySpec::from_depth_stride(delay_depth, stride).unwrap() },
                neuron: NeuronConfig::default(),
            },
        ],
        readout: ReadoutSpec { size: 2, delays: None, tau_init: 4.0 },
        surrogate: SurrogateConfig::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_delays_cover_depth((depth, stride) in window()) {
        let d = DelaySpec::from_depth_stride(depth, stride).unwrap();
        prop_assert_eq!(d.len(), depth / stride);
        prop_assert_eq!(d.delays()[0], 0);
        prop_assert!(d.delays().windows(2).all(|w| w[1] - w[0] == stride));
        prop_assert!(d.max_delay() < depth);
    }

    #[test]
    fn history_returns_lagged_rows(width in 1usize..5, cap in 1usize..10, steps in 1usize..30, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = SpikeHistory::new(width, cap);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for _ in 0..steps {
            let r: Vec<f64> = (0..width).map(|_| rng.gen_range(0..2) as f64).collect();
            h.push(&r).unwrap();
            rows.push(r);
            for lag in 0..cap {
                let want = if lag < rows.len() { rows[rows.len() - 1 - lag].clone() } else { vec![0.0; width] };
                prop_assert_eq!(h.lag(lag), &want[..]);
            }
        }
    }

    #[test]
    fn delayed_input_is_linear_in_weights(seed: u64, (depth, stride) in window(), a in -3.0f64..3.0) {
        let p = layer(seed, 3, 2, depth, stride);
        let mut h = SpikeHistory::for_delays(3, &p.delay_spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..depth {
            let r: Vec<f64> = (0..3).map(|_| rng.gen_range(0..2) as f64).collect();
            h.push(&r).unwrap();
        }
        let mut scaled = p.clone();
        scaled.weights.mapv_inplace(|w| w * a);
        let base = delayed_input(&p, &h).unwrap();
        let s = delayed_input(&scaled, &h).unwrap();
        for (x, y) in base.iter().zip(&s) {
            prop_assert!((a * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn cap_pruning_keeps_k_per_pair(seed: u64, pre in 1usize..5, post in 1usize..5, (depth, stride) in window(), k in 1usize..8) {
        let p = layer(seed, pre, post, depth, stride);
        let k = k.min(p.slots());
        let mask = prune_by_magnitude(&p, PruneRule::CapPerPair(k)).unwrap();
        for i in 0..pre {
            for j in 0..post {
                let kept: Vec<f64> = (0..p.slots()).filter(|&s| mask[[i, j, s]]).map(|s| p.weights[[i, j, s]].abs()).collect();
                prop_assert_eq!(kept.len(), k);
                let dropped_max = (0..p.slots()).filter(|&s| !mask[[i, j, s]]).map(|s| p.weights[[i, j, s]].abs()).fold(0.0, f64::max);
                prop_assert!(kept.iter().all(|&w| w >= dropped_max));
            }
        }
    }

    #[test]
    fn fraction_pruning_is_idempotent_and_scale_free(seed: u64, (depth, stride) in window(), f in 0.05f64..1.0, scale in 0.001f64..1000.0) {
        let mut p = layer(seed, 4, 3, depth, stride);
        let mut scaled = p.clone();
        scaled.weights.mapv_inplace(|w| w * scale);
        let m = prune_by_magnitude(&p, PruneRule::KeepFraction(f)).unwrap();
        prop_assert_eq!(&prune_by_magnitude(&scaled, PruneRule::KeepFraction(f)).unwrap(), &m);
        prune_layer(&mut p, PruneRule::KeepFraction(f)).unwrap();
        let again = prune_by_magnitude(&p, PruneRule::KeepFraction(1.0)).unwrap();
        prop_assert_eq!(again, m);
    }

    #[test]
    fn refinement_keeps_survivors_and_their_delays(seed: u64, stride_exp in 1u32..3, n in 2usize..6, k in 1usize..3) {
        let stride = 2usize.pow(stride_exp);
        let mut p = layer(seed, 3, 2, stride * n, stride);
        prune_layer(&mut p, PruneRule::CapPerPair(k.min(n))).unwrap();
        let r = refine_delays(&p, stride / 2).unwrap();
        prop_assert_eq!(r.delay_spec.stride(), Some(stride / 2));
        prop_assert!(r.delay_spec.max_delay() <= p.delay_spec.max_delay());
        for (s, &d) in p.delay_spec.delays().iter().enumerate() {
            let ns = r.delay_spec.slot_of(d).unwrap();
            for i in 0..3 {
                for j in 0..2 {
                    if p.mask[[i, j, s]] {
                        prop_assert!(r.mask[[i, j, ns]]);
                        prop_assert_eq!(r.weights[[i, j, ns]], p.weights[[i, j, s]]);
                    }
                }
            }
        }
        // new candidates start at zero
        let added: f64 = r.weights.iter().sum::<f64>() - p.weights.iter().sum::<f64>();
        prop_assert!(added.abs() < 1e-9);
    }

    #[test]
    fn checkpoint_roundtrip_reproduces_outputs(seed: u64, (depth, stride) in window()) {
        let spec = small_net(depth, stride);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = NetworkParams::init(&spec, 2.0, &mut rng).unwrap();
        let ck = Checkpoint::new(spec, params, CheckpointMeta { seed, ..Default::default() }).unwrap();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &ck);
        let x = Array2::from_shape_fn((15, 3), |_| rng.gen_range(0.0..2.0));
        prop_assert_eq!(forward(&ck.spec, &ck.params, &x).unwrap().readout, forward(&back.spec, &back.params, &x).unwrap().readout);
    }

    #[test]
    fn hard_spikes_are_binary(seed: u64, (depth, stride) in window()) {
        let spec = small_net(depth, stride);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = NetworkParams::init(&spec, 3.0, &mut rng).unwrap();
        let x = Array2::from_shape_fn((20, 3), |_| rng.gen_range(0..2) as f64);
        let tape = forward(&spec, &params, &x).unwrap();
        for l in &tape.layers {
            prop_assert!(l.theta.iter().all(|&t| t == 0.0 || t == 1.0));
        }
    }

    #[test]
    fn energy_is_linear(c in proptest::array::uniform9(0.0f64..1e6), k in proptest::array::uniform9(0.0f64..1e-11), s in 0.0f64..10.0) {
        let c = OpCounts::from_array(c);
        let k = EnergyCoeffs::from_array(k);
        let e = energy(&c, &k);
        prop_assert!((energy(&c.scale(s), &k) - s * e).abs() <= 1e-12 * (1.0 + s * e));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn binning_is_binary_and_bounded(times in proptest::collection::vec((0.0f64..1.0, 0usize..6), 0..40), bins in 1usize..30) {
        let set = SpikeEventSet {
            events: times.iter().map(|&(time, channel)| SpikeEvent { time, channel }).collect(),
            num_channels: 6,
            duration: 1.0,
            label: None,
        };
        let r = bin_events(&set, bins).unwrap();
        prop_assert_eq!(r.0.dim(), (bins, 6));
        prop_assert!(r.0.iter().all(|&v| v == 0.0 || v == 1.0));
        prop_assert!(r.0.sum() <= set.events.len() as f64);
        prop_assert!(set.events.is_empty() || r.0.sum() >= 1.0);
    }

    #[test]
    fn adding_markers_one_per_half(steps in 1usize..40, seed: u64) {
        let steps = steps * 2;
        for s in gen_adding(steps, 5, seed).unwrap() {
            let first: f64 = s.markers[..steps / 2].iter().sum();
            let second: f64 = s.markers[steps / 2..].iter().sum();
            prop_assert_eq!((first, second), (1.0, 1.0));
            let want: f64 = s.values.iter().zip(&s.markers).map(|(v, m)| v * m).sum();
            prop_assert!((s.target - want).abs() < 1e-12);
        }
    }
}
