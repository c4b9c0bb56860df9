//! Trains a tiny network briefly, then runs full inference on an unseen
//! frame: segmentation, forward pass and denormalization to camera space.
//!
//! cargo run --release --example predict_frame -- [epochs]

use pointpose::cli::predict_frame;
use pointpose::eval::map_score;
use pointpose::nn::{NetConfig, PoseNet};
use pointpose::synth::{generate_frame, synthetic_dataset, DatasetConfig};
use pointpose::train::{train_stage1, TrainConfig};

fn main() -> pointpose::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(30, |s| s.parse().expect("integer epochs"));
    let data_cfg = DatasetConfig {
        articulation: 0.3,
        ..DatasetConfig::new(64, 5)
    };
    let seg = data_cfg.segment_config(256);
    let data = synthetic_dataset(&data_cfg, &seg)?;
    let net_cfg = NetConfig::desk(256, 8, 15, 8);
    let cfg = TrainConfig {
        epochs,
        lr_drop_epoch: epochs * 3 / 4,
        ..TrainConfig::stage1()
    };
    let (params, _) = train_stage1(&data, &net_cfg, &cfg)?;
    let net = PoseNet::new(net_cfg)?;

    let unseen = DatasetConfig {
        articulation: 0.3,
        ..DatasetConfig::new(1, 6)
    };
    let scene = generate_frame(&unseen, 0)?;
    let out = predict_frame(
        scene.depth.as_ref().expect("depth rendered"),
        &unseen.camera().intrinsics,
        &unseen.segment_config(256),
        &net,
        &params,
        &scene.gt.joint_names,
    )?;
    for ((name, p), g) in out.camera.joint_names.iter().zip(&out.camera.joints).zip(&scene.gt.joints) {
        let err = ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt();
        println!("{name:12} ({:6.3}, {:6.3}, {:6.3})  error {:5.1} cm", p[0], p[1], p[2], err * 100.0);
    }
    let report = map_score(&[out.camera], &[scene.gt], 0.10)?;
    println!("mAP@10cm on this frame: {:.1}", report.mean);
    Ok(())
}
