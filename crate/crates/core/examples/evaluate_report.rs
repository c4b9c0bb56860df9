//! Scores perturbed ground truth with mAP@10cm and prints the per-part
//! report and its CSV form.
//!
//! cargo run --example evaluate_report -- [noise_meters]

use pointpose::eval::map_score;
use pointpose::synth::{generate_frame, DatasetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pointpose::Result<()> {
    let noise: f64 = std::env::args().nth(1).map_or(0.08, |s| s.parse().expect("number"));
    let cfg = DatasetConfig::new(50, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gts = Vec::new();
    let mut preds = Vec::new();
    for i in 0..cfg.frames {
        let gt = generate_frame(&cfg, i)?.gt;
        let mut pred = gt.clone();
        for j in &mut pred.joints {
            for c in j.iter_mut() {
                *c += rng.gen_range(-noise..noise);
            }
        }
        gts.push(gt);
        preds.push(pred);
    }
    let report = map_score(&preds, &gts, 0.10)?;
    print!("{report}");
    println!();
    print!("{}", report.to_csv());
    Ok(())
}
