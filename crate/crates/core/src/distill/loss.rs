use serde::{Deserialize, Serialize};

use crate::tensor::{Graph, Tensor, TensorError, Var};

/// Fused teacher target `J = softmax((f_I + f_D) / 2)`.
pub fn fuse_teacher_features(f_i: &Tensor, f_d: &Tensor) -> Result<Tensor, TensorError> {
    if f_i.shape() != f_d.shape() || f_i.rank() != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "fuse_teacher_features",
            lhs: f_i.shape().to_vec(),
            rhs: f_d.shape().to_vec(),
        });
    }
    if !(f_i.all_finite() && f_d.all_finite()) {
        return Err(TensorError::NonFinite("teacher features"));
    }
    let mean: Vec<f64> = f_i
        .data()
        .iter()
        .zip(f_d.data())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let max = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = mean.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::new(f_i.shape(), exps.into_iter().map(|e| e / total).collect())
}

/// Bhattacharyya distance `-ln(max(sum_k sqrt(softmax(f_s)_k J_k), eps))`.
///
/// `sqrt(p_k)` is formed as `exp(log_softmax / 2)` so the gradient stays
/// finite where `J` has zero entries.
pub fn bd_loss(g: &mut Graph, f_s: Var, j: &Tensor, eps: f64) -> Result<Var, TensorError> {
    if g.shape(f_s) != j.shape() || j.rank() != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "bd_loss",
            lhs: g.shape(f_s).to_vec(),
            rhs: j.shape().to_vec(),
        });
    }
    if !g.value(f_s).all_finite() || !j.all_finite() {
        return Err(TensorError::NonFinite("bd_loss input"));
    }
    let log_p = g.log_softmax(f_s, 0)?;
    let half = g.scale(log_p, 0.5);
    let sqrt_p = g.exp(half);
    let sqrt_j = g.constant(j.map(|v| v.max(0.0).sqrt()));
    let prod = g.mul(sqrt_p, sqrt_j)?;
    let bc = g.sum(prod);
    let clamped = g.clamp_min(bc, eps);
    let ln = g.log(clamped);
    Ok(g.neg(ln))
}

/// Per-class LDAM margins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdamParams {
    pub margins: Vec<f64>,
    pub max_margin: f64,
}

/// `Delta_y = C / n_y^(1/4)` with `C` chosen so the rarest class gets `m_max`.
pub fn margins_from_counts(counts: &[usize], m_max: f64) -> Result<LdamParams, TensorError> {
    if counts.is_empty() {
        return Err(TensorError::Contract(
            "margins need at least one class".into(),
        ));
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(TensorError::Contract(format!(
            "class {k} has no training samples"
        )));
    }
    if !(m_max > 0.0 && m_max.is_finite()) {
        return Err(TensorError::Contract(format!(
            "max margin {m_max} must be positive"
        )));
    }
    let min = *counts.iter().min().expect("nonempty") as f64;
    let c = m_max * min.powf(0.25);
    Ok(LdamParams {
        margins: counts.iter().map(|&n| c / (n as f64).powf(0.25)).collect(),
        max_margin: m_max,
    })
}

/// `-ln( e^(z_y - Delta_y) / (e^(z_y - Delta_y) + sum_{j != y} e^(z_j)) )`.
pub fn ldam_loss(
    g: &mut Graph,
    logits: Var,
    label: usize,
    margins: &[f64],
) -> Result<Var, TensorError> {
    let k = g.shape(logits).iter().product::<usize>();
    if g.shape(logits).len() != 1 || margins.len() != k {
        return Err(TensorError::ShapeMismatch {
            op: "ldam_loss",
            lhs: g.shape(logits).to_vec(),
            rhs: vec![margins.len()],
        });
    }
    if label >= k {
        return Err(TensorError::Contract(format!(
            "label {label} out of range for {k} classes"
        )));
    }
    let mut shift = vec![0.0; k];
    shift[label] = margins[label];
    let shift = g.constant(Tensor::from_vec(shift));
    let shifted = g.sub(logits, shift)?;
    let log_p = g.log_softmax(shifted, 0)?;
    let mut pick = vec![0.0; k];
    pick[label] = 1.0;
    let pick = g.constant(Tensor::from_vec(pick));
    let chosen = g.mul(log_p, pick)?;
    let s = g.sum(chosen);
    Ok(g.neg(s))
}

/// Distillation settings of the student objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionParams {
    pub lambda: f64,
    pub eps_bd: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eps_bd: 1e-12,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), TensorError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.eps_bd > 0.0) {
            return Err(TensorError::Contract(format!(
                "invalid fusion params {self:?}"
            )));
        }
        Ok(())
    }
}

/// `L_s = L_LDAM + lambda * L_BD(f_s, fuse(f_I, f_D))`.
///
/// The BD term is skipped entirely when `lambda == 0`.
pub fn student_loss(
    g: &mut Graph,
    logits: Var,
    label: usize,
    f_s: Var,
    target: &Tensor,
    margins: &[f64],
    fusion: &FusionParams,
) -> Result<Var, TensorError> {
    let ldam = ldam_loss(g, logits, label, margins)?;
    if fusion.lambda == 0.0 {
        return Ok(ldam);
    }
    let bd = bd_loss(g, f_s, target, fusion.eps_bd)?;
    let weighted = g.scale(bd, fusion.lambda);
    g.add(ldam, weighted)
}
