//! Writes a synthetic dataset (16-bit PGM depth frames, joint CSVs and a
//! manifest) and loads it back through the segmentation pipeline.
//!
//! cargo run --release --example synth_dataset -- <out_dir> [frames] [eval]

use pointpose::synth::{write_dataset, DatasetConfig, SkeletonSpec};
use pointpose::train::Dataset;

fn main() -> pointpose::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic".into());
    let frames: usize = args.next().map_or(16, |s| s.parse().expect("integer frame count"));
    let mut cfg = DatasetConfig::new(frames, 0);
    if args.next().as_deref() == Some("eval") {
        cfg.spec = SkeletonSpec::eval();
    }
    let manifest = write_dataset(&out, &cfg)?;
    println!("wrote {}", manifest.display());

    let data = Dataset::from_manifest(&manifest, &cfg.camera().intrinsics, &cfg.segment_config(512))?;
    let names = data.joint_names().unwrap_or_default().join(" ");
    println!("{} samples of 512 points; joints: {names}", data.len());
    for (i, s) in data.samples.iter().enumerate().take(4) {
        let b = &s.body_box;
        println!("frame {i}: box {:.2} x {:.2} m at depth {:.2} m", b.width, b.height, b.center[2]);
    }
    Ok(())
}
