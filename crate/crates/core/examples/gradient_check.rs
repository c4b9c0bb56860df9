//! Compares the hand-written backward pass of a small network against
//! central differences and prints the worst relative error per tensor.
//!
//! cargo run --release --example gradient_check -- [n_points] [samples_per_tensor]

use pointpose::nn::{check_pose_net, GradCheckConfig, NetConfig, PoseNet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pointpose::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n = args.first().copied().unwrap_or(32);
    let per_tensor = args.get(1).copied().unwrap_or(50);

    let net = PoseNet::new(NetConfig::desk(n, 4, 15, 8))?;
    let mut params = net.init_params::<f64>(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for e in params.entries_mut() {
        if e.name.ends_with(".bias") || e.name == "tnet.fc3.weight" {
            for v in e.tensor.values_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }
    let points: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let target: Vec<f64> = (0..45).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let cfg = GradCheckConfig {
        max_per_tensor: Some(per_tensor),
        ..GradCheckConfig::default()
    };
    let report = check_pose_net(&net, &params, &points, &target, 5e-4, &cfg)?;
    for (name, err) in &report.per_tensor {
        println!("{name:24} {err:.2e}");
    }
    println!(
        "{} scalars, max relative error {:.2e}, {} unresolved kinks",
        report.checked, report.max_rel_error, report.unresolved_kinks
    );
    Ok(())
}
