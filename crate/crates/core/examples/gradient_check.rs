//! Closed-form gradients against central differences.

use tensornet::model::BilinearScheme;
use tensornet::train::{gen_dataset, grad_analytic, grad_fd};

fn main() -> tensornet::Result<()> {
    for (n, r) in [(2, 7), (3, 23)] {
        let s = BilinearScheme::init(n, r, 17, 1.0)?;
        let data = gen_dataset(n, 32, 5, [-1.0, 1.0])?;
        let idx: Vec<usize> = (0..32).collect();
        let an = grad_analytic(&s, &data, &idx);
        for h in [1e-4, 1e-6] {
            let fd = grad_fd(&s, &data, &idx, h)?;
            let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            println!("n={n} r={r} h={h:e}: max rel err {:.2e}", an.max_abs_diff(&fd) / scale);
        }
    }
    Ok(())
}
