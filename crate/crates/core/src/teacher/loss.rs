use crate::tensor::{Graph, Tensor, TensorError, Var};

/// `v / ||v||`, or the uniform unit vector when `v` is all zeros.
pub fn unit_normalized(t: &Tensor) -> Tensor {
    let norm = t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        Tensor::full(t.shape(), 1.0 / (t.len() as f64).sqrt())
    } else {
        t.map(|v| v / norm)
    }
}

fn normalize_var(g: &mut Graph, x: Var) -> Result<Var, TensorError> {
    let axes: Vec<usize> = (0..g.shape(x).len()).collect();
    if g.value(x).data().iter().all(|&v| v == 0.0) {
        let uniform = unit_normalized(g.value(x));
        return Ok(g.constant(uniform));
    }
    let norm = g.l2_norm(x, &axes)?;
    g.div(x, norm)
}

/// Time-windowed visual attention loss:
/// `sum_t || O_t / ||O_t|| - f_t / ||f_t|| ||`, each map flattened.
///
/// Targets must already be resized to the matching layer's shape. Used for
/// both the integration and the disintegration branch.
pub fn tval_loss(g: &mut Graph, outputs: &[Var], targets: &[Tensor]) -> Result<Var, TensorError> {
    if outputs.len() != targets.len() || outputs.is_empty() {
        return Err(TensorError::Contract(format!(
            "tVAL needs one target per layer, got {} layers and {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let mut total: Option<Var> = None;
    for (&o, f) in outputs.iter().zip(targets) {
        if g.shape(o) != f.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "tval_loss",
                lhs: g.shape(o).to_vec(),
                rhs: f.shape().to_vec(),
            });
        }
        let o_hat = normalize_var(g, o)?;
        let f_hat = g.constant(unit_normalized(f));
        let diff = g.sub(o_hat, f_hat)?;
        let axes: Vec<usize> = (0..f.rank()).collect();
        let term = g.l2_norm(diff, &axes)?;
        total = Some(match total {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.expect("nonempty"))
}
