//! Overfits the desk-scale network on a handful of synthetic frames and
//! reports loss and training mAP@10cm.
//!
//! cargo run --release --example train_overfit -- [frames] [epochs] [lr_drop_epoch]

use std::time::Instant;

use pointpose::nn::{NetConfig, PoseNet};
use pointpose::synth::{synthetic_dataset, DatasetConfig};
use pointpose::train::{evaluate_loss, train, validation_map, TrainConfig, TrainHooks};

fn main() -> pointpose::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let frames = args.first().copied().unwrap_or(8);
    let epochs = args.get(1).copied().unwrap_or(500);
    let drop = args.get(2).copied().unwrap_or(epochs * 3 / 4);

    let data_cfg = DatasetConfig::new(frames, 1);
    let data = synthetic_dataset(&data_cfg, &data_cfg.segment_config(256))?;
    let net_cfg = NetConfig::desk(256, 8, 15, 8);
    let net = PoseNet::new(net_cfg.clone())?;
    let cfg = TrainConfig {
        epochs,
        lr_drop_epoch: drop,
        ..TrainConfig::stage1()
    };

    let mut params = net.init_params(cfg.seed);
    let (initial, initial_data) = evaluate_loss(&net, &params, &data, cfg.lambda)?;
    println!("initial loss {initial:.4} (squared error {initial_data:.4})");
    let start = Instant::now();
    let mut log = |s: &pointpose::train::EpochStats, _: &pointpose::tensor::ModelParams<f32>| {
        if s.epoch.is_multiple_of(25) || s.epoch + 1 == epochs {
            println!(
                "epoch {:4}  loss {:.5}  sq.err {:.5}  lr {:.0e}  {:.0?}",
                s.epoch,
                s.loss,
                s.data_loss,
                s.lr,
                start.elapsed()
            );
        }
    };
    let hooks = TrainHooks {
        on_epoch: Some(&mut log),
        ..Default::default()
    };
    let history = train(&data, &net_cfg, &mut params, &cfg, hooks)?;
    let (last, last_data) = evaluate_loss(&net, &params, &data, cfg.lambda)?;
    println!("{} steps, final loss {last:.5} (squared error {last_data:.5})", history.steps);
    println!("training mAP@10cm {:.2}", validation_map(&net, &params, &data)?);
    Ok(())
}
