//! An ε-family converging to a tensor of higher rank, and a short training
//! run along a decaying ε schedule.

use tensornet::border::{train_eps, w_state_residual, EpsConfig, EpsSchedule};
use tensornet::train::TrainConfig;

fn main() -> tensornet::Result<()> {
    let (a, b) = ([1.0, 0.0], [0.0, 1.0]);
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        println!("eps {eps:e}: residual {:.3e}", w_state_residual(&a, &b, eps)?);
    }

    // lowest power of ε carried by F; negative powers enlarge every Adam
    // step on those coefficients by ε^p
    for f_min in [-2, 0] {
        let cfg = EpsConfig {
            train: TrainConfig {
                n: 3,
                r: 19,
                epochs: 15,
                train_size: 2000,
                val_size: 1000,
                ..TrainConfig::default()
            },
            schedule: EpsSchedule::default(),
            f_min,
            ..EpsConfig::default()
        };
        let run = train_eps(&cfg)?;
        let traj = run.record.epsilon_trajectory.as_deref().unwrap_or_default();
        let probes = run.record.probe_losses.as_deref().unwrap_or_default();
        println!("f_min = {f_min}");
        for (e, ((eps, v), p)) in traj.iter().zip(&run.record.val_loss).zip(probes).enumerate() {
            if e % 5 == 4 {
                println!("  epoch {:2} eps {eps:.5} val {v:.4e} probe {p:.4e}", e + 1);
            }
        }
    }
    Ok(())
}
