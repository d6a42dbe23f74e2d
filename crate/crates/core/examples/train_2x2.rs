//! Learn a rank-7 scheme for 2x2 products, then try to round it to an exact one.
//!
//! `cargo run --release --example train_2x2 -- [epochs] [samples] [seed]`

use tensornet::train::{train, TrainConfig};
use tensornet::verify::{default_grid, round_learned, verify_exact};

fn main() -> tensornet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let cfg = TrainConfig {
        n: 2,
        r: 7,
        epochs: arg(0, 60) as usize,
        train_size: arg(1, 10_000) as usize,
        val_size: 10_000,
        seed: arg(2, 1),
        ..TrainConfig::default()
    };
    let rec = train(&cfg)?;
    for (e, (t, v)) in rec.train_loss.iter().zip(&rec.val_loss).enumerate() {
        if e % 10 == 0 || e + 1 == cfg.epochs {
            println!("epoch {:3}  train {t:.3e}  val {v:.3e}", e + 1);
        }
    }
    let rounded = round_learned(&rec.scheme, &default_grid())?;
    println!("rounded scheme exact: {:?}", verify_exact(&rounded)?.exact);
    Ok(())
}
