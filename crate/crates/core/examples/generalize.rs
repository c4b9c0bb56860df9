//! Two-stage training on synthetic poses with a held-out split.
//!
//! cargo run --release --example generalize -- [train] [test] [articulation] [stage1 epochs] [stage2 epochs]

use std::time::Instant;

use pointpose::nn::{NetConfig, PoseNet};
use pointpose::synth::{synthetic_dataset, DatasetConfig};
use pointpose::tensor::ModelParams;
use pointpose::train::{train, validation_map, EpochStats, TrainConfig, TrainHooks};

fn main() -> pointpose::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).map_or(d, |s| s.parse().expect("number"));
    let n_train = arg(0, 256.0) as usize;
    let n_test = arg(1, 64.0) as usize;
    let articulation = arg(2, 0.3);
    let epochs1 = arg(3, 60.0) as usize;
    let epochs2 = arg(4, 10.0) as usize;

    let split = |frames, seed| {
        let cfg = DatasetConfig {
            articulation,
            ..DatasetConfig::new(frames, seed)
        };
        synthetic_dataset(&cfg, &cfg.segment_config(256))
    };
    let train_set = split(n_train, 10)?;
    let test_set = split(n_test, 20)?;
    let net_cfg = NetConfig::desk(256, 8, 15, 8);
    let net = PoseNet::new(net_cfg.clone())?;

    let start = Instant::now();
    let mut log = |s: &EpochStats, _: &ModelParams<f32>| {
        println!(
            "epoch {:3}  loss {:.5}  sq.err {:.5}  lr {:.0e}  held-out mAP {:6.2}  {:.0?}",
            s.epoch,
            s.loss,
            s.data_loss,
            s.lr,
            s.val_map.unwrap_or(f64::NAN),
            start.elapsed()
        );
    };
    let stage1 = TrainConfig {
        epochs: epochs1,
        lr_drop_epoch: epochs1 * 3 / 4,
        ..TrainConfig::stage1()
    };
    let mut params = net.init_params(stage1.seed);
    let hooks = TrainHooks {
        validation: Some(&test_set),
        on_epoch: Some(&mut log),
    };
    train(&train_set, &net_cfg, &mut params, &stage1, hooks)?;

    let stage2 = TrainConfig {
        epochs: epochs2,
        ..TrainConfig::stage2()
    };
    train(&train_set, &net_cfg, &mut params, &stage2, TrainHooks::default())?;
    println!("held-out mAP@10cm after stage 2: {:.2}", validation_map(&net, &params, &test_set)?);
    Ok(())
}
