//! Small 3x3 rank sweep with CSV/JSON export.
//!
//! `cargo run --release --example rank_sweep -- [out_dir]`

use std::path::PathBuf;

use tensornet::harness::{compare_ranks, export, sweep, SweepConfig};
use tensornet::train::TrainConfig;

fn main() -> tensornet::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("rank_sweep"));
    let cfg = SweepConfig {
        ranks: vec![19, 21, 23],
        reps: 3,
        base: TrainConfig {
            n: 3,
            epochs: 20,
            train_size: 2000,
            val_size: 2000,
            ..TrainConfig::default()
        },
        threads: None,
        all_vs_top: true,
    };
    let runs = sweep(&cfg)?;
    let summary = compare_ranks(&runs, cfg.all_vs_top)?;
    for (r, s) in &summary.per_rank {
        println!("r={r}: mean {:.4} std {:.4}", s.mean, s.std);
    }
    for c in &summary.comparisons {
        if let Some(rep) = &c.report {
            println!("{}: t={:.3} df={:.2} p={:.4}", c.label, rep.t, rep.df, rep.p_one_tailed);
        }
    }
    for f in export(&runs, &out, cfg.all_vs_top)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
