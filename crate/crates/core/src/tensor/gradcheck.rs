//! Central finite-difference verification of graph gradients.

use super::{Graph, ParamStore, TensorError, Var};

/// Outcome of [`grad_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Coordinates whose perturbation crossed a ReLU/clamp kink at every
    /// tried step size; these are excluded from the maximum.
    pub skipped: usize,
}

const MIN_EPS_SHRINK: u32 = 4;

/// Compare autodiff gradients of `f` against five-point central differences
/// over every trainable parameter coordinate.
///
/// Per coordinate the error is `|g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|)`.
/// When any of `x +/- eps`, `x +/- 2 eps` lands on a different piece of a
/// piecewise-linear op than `x` itself, the step is shrunk by 10x (up to
/// four times) so the stencil stays inside one smooth piece.
pub fn grad_check<F>(
    f: F,
    params: &mut ParamStore,
    eps: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var, TensorError>,
{
    let eval = |store: &ParamStore| -> Result<(f64, u64), TensorError> {
        let mut g = Graph::new();
        let loss = f(&mut g, store)?;
        let v = g.value(loss).item();
        if !v.is_finite() {
            return Err(TensorError::NonFinite("grad_check loss"));
        }
        Ok((v, g.branch_signature()))
    };

    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    if !g.value(loss).item().is_finite() {
        return Err(TensorError::NonFinite("grad_check loss"));
    }
    let base_sig = g.branch_signature();
    let analytic = g.backward(loss)?.for_params(params);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coordinates: 0,
        skipped: 0,
    };
    let ids: Vec<_> = params
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    for id in ids {
        for k in 0..params.get(id).tensor.len() {
            let original = params.get(id).tensor.data()[k];
            let mut numeric = None;
            let mut step = eps;
            for _ in 0..=MIN_EPS_SHRINK {
                let mut probe = |offset: f64| -> Result<(f64, bool), TensorError> {
                    params.get_mut(id).tensor.data_mut()[k] = original + offset;
                    let (v, sig) = eval(params)?;
                    Ok((v, sig == base_sig))
                };
                let (f1, s1) = probe(step)?;
                let (fm1, sm1) = probe(-step)?;
                let (f2, s2) = probe(2.0 * step)?;
                let (fm2, sm2) = probe(-2.0 * step)?;
                params.get_mut(id).tensor.data_mut()[k] = original;
                if s1 && sm1 && s2 && sm2 {
                    numeric = Some((8.0 * (f1 - fm1) - (f2 - fm2)) / (12.0 * step));
                    break;
                }
                step *= 0.1;
            }
            report.coordinates += 1;
            let Some(fd) = numeric else {
                report.skipped += 1;
                continue;
            };
            let ad = analytic[id.index()].data()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-12);
            report.max_rel_error = report.max_rel_error.max(rel);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn sum_is_exact() {
        // Dyadic values and step keep every perturbed sum exactly representable.
        let mut store = ParamStore::new();
        let id = store
            .add("x", Tensor::new(&[3], vec![0.5, -1.0, 2.0]).unwrap(), true)
            .unwrap();
        let r = grad_check(
            |g, s| {
                let x = g.param(s, id);
                Ok(g.sum(x))
            },
            &mut store,
            2f64.powi(-13),
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.coordinates, 3);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::from_vec(vec![-1.0]), true).unwrap();
        let r = grad_check(
            |g, s| {
                let x = g.param(s, id);
                let l = g.log(x);
                Ok(g.sum(l))
            },
            &mut store,
            1e-4,
        );
        assert!(matches!(r, Err(TensorError::NonFinite(_))));
    }
}
