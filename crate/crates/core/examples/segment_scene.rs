//! Renders one synthetic scene (body, wall, noise blobs), segments it and
//! reports how many pixels of each kind survive.
//!
//! cargo run --release --example segment_scene -- [seed] [out.ply]

use pointpose::io::write_ply;
use pointpose::preprocess::segment_frame;
use pointpose::synth::{generate_frame, DatasetConfig, Label};

fn main() -> pointpose::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("integer seed"));
    let out = args.next();

    let cfg = DatasetConfig::new(1, seed);
    let scene = generate_frame(&cfg, 0)?;
    let depth = scene.depth.as_ref().expect("depth rendered");
    let labels = scene.pixel_labels.as_ref().expect("pixel labels");
    let seg = segment_frame(depth, &cfg.camera().intrinsics, &cfg.segment_config(1024))?;

    for label in [Label::Body, Label::Background, Label::Noise] {
        let rendered = labels.iter().filter(|l| **l == Some(label)).count();
        let kept = seg.body_pixels.iter().filter(|&&p| labels[p] == Some(label)).count();
        println!("{label:?}: {rendered} pixels rendered, {kept} kept");
    }
    let b = &seg.body_box;
    println!(
        "body box {:.3} x {:.3} m centered at ({:.3}, {:.3}, {:.3})",
        b.width, b.height, b.center[0], b.center[1], b.center[2]
    );
    if let Some(path) = out {
        write_ply(&seg.camera_cloud, Some(&scene.gt), &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
