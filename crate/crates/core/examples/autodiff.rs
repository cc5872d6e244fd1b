//! Fit a two-parameter line with the reverse-mode engine and Adam.

use gazelt::tensor::{fit, Graph, OptimConfig, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();

    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vec![0.0]), true)?;
    let b = store.add("b", Tensor::from_vec(vec![0.0]), true)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cfg = OptimConfig {
        batch_size: 4,
        ..OptimConfig::constant(0.05, 200)
    };
    let history = fit(
        &mut store,
        &cfg,
        xs.len(),
        &mut rng,
        |g: &mut Graph, s, i| {
            let wv = g.param(s, w);
            let bv = g.param(s, b);
            let x = g.constant(Tensor::from_vec(vec![xs[i]]));
            let wx = g.mul(wv, x)?;
            let pred = g.add(wx, bv)?;
            let y = g.constant(Tensor::from_vec(vec![ys[i]]));
            let err = g.sub(pred, y)?;
            let sq = g.mul(err, err)?;
            Ok(g.sum(sq))
        },
    )?;

    println!(
        "loss: first epoch {:.4}, last epoch {:.2e}",
        history[0],
        history[history.len() - 1]
    );
    println!(
        "w = {:.4}, b = {:.4} (target 3, -1)",
        store.get(w).tensor.item(),
        store.get(b).tensor.item()
    );
    Ok(())
}
