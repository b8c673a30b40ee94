//! Trains a coarse-stride delayed network on delay-xor, then alternates
//! magnitude pruning, stride refinement and fine-tuning.
//!
//! cargo run --release --example prune_refine

use delaysnn::pruning::prune_finetune_loop;
use delaysnn::tasks::{event_sample, gen_delay_xor, DelayXorOptions};
use delaysnn::training::train;
use delaysnn::{
    DelaySpec, Hyperparams, LayerKind, LayerSpec, LossKind, NetworkSpec, NeuronConfig, PruneConfig, ReadoutSpec,
    Sample, SurrogateConfig,
};

fn main() -> delaysnn::Result<()> {
    let gaps = [6, 18, 30, 42];
    let opts = DelayXorOptions { channels: 4, jitter: 1 };
    let data = |n, seed| -> delaysnn::Result<Vec<Sample>> {
        gen_delay_xor(64, &gaps, n, seed, &opts)?.iter().map(|e| event_sample(e, 64)).collect()
    };
    let (train_set, test_set) = (data(800, 0)?, data(400, 1000)?);

    let neuron = NeuronConfig { u_th: 1.0, tau_init: 1.0 };
    let window = DelaySpec::from_depth_stride(48, 12).unwrap();
    let spec = NetworkSpec {
        input_size: 4,
        layers: vec![
            LayerSpec { size: 16, kind: LayerKind::Feedforward, neuron },
            LayerSpec { size: 16, kind: LayerKind::Delayed { delays: window.clone() }, neuron },
        ],
        readout: ReadoutSpec { size: gaps.len(), delays: Some(window), tau_init: 1.0 },
        surrogate: SurrogateConfig::default(),
    };
    let hp = Hyperparams {
        learning_rate: 0.01,
        batch_size: 32,
        epochs: 30,
        loss: LossKind::CrossEntropy,
        init_gain: 4.0,
        ..Default::default()
    };
    let trained = train(&spec, &train_set, &hp)?;

    let config = PruneConfig { refine_rounds: 2, refine_factor: Some(2), finetune_epochs: 5, ..PruneConfig::cap(2) };
    let out = prune_finetune_loop(&spec, &trained.params, &train_set, &test_set, &config, &hp)?;
    for r in &out.rounds {
        println!(
            "round {}: {:>5} parameters  test accuracy {:.3}",
            r.round,
            r.params,
            r.accuracy.unwrap_or(0.0)
        );
    }
    let final_delays = out.spec.layers[1].kind.delays().unwrap();
    println!("final delay set of layer 1: {:?}", final_delays.delays());
    Ok(())
}
