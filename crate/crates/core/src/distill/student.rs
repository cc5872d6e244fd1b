use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{he_uniform, Graph, ParamStore, Tensor, TensorError, Var};

/// Residual student classifier with a classification and a distillation head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudentConfig {
    pub stages: usize,
    pub base_channels: usize,
    pub in_channels: usize,
    pub n_classes: usize,
    pub distill_dim: usize,
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            stages: 3,
            base_channels: 16,
            in_channels: 1,
            n_classes: 8,
            distill_dim: 64,
        }
    }
}

impl StudentConfig {
    pub fn channels(&self, stage: usize) -> usize {
        self.base_channels << stage
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.stages == 0
            || self.base_channels == 0
            || self.in_channels == 0
            || self.n_classes < 2
            || self.distill_dim == 0
        {
            return Err(TensorError::Contract(format!(
                "invalid student config {self:?}"
            )));
        }
        Ok(())
    }
}

fn conv_params(
    s: &mut ParamStore,
    name: &str,
    c_out: usize,
    c_in: usize,
    rng: &mut impl Rng,
) -> Result<(), TensorError> {
    s.add(
        format!("{name}.w"),
        he_uniform(&[c_out, c_in, 3, 3], c_in * 9, rng),
        true,
    )?;
    s.add(format!("{name}.b"), Tensor::zeros(&[c_out]), true)?;
    Ok(())
}

pub fn init_student(cfg: &StudentConfig, rng: &mut impl Rng) -> Result<ParamStore, TensorError> {
    cfg.validate()?;
    let mut s = ParamStore::new();
    conv_params(&mut s, "stem", cfg.channels(0), cfg.in_channels, rng)?;
    for st in 0..cfg.stages {
        let c = cfg.channels(st);
        if st > 0 {
            conv_params(&mut s, &format!("s{st}.down"), c, cfg.channels(st - 1), rng)?;
        }
        conv_params(&mut s, &format!("s{st}.a"), c, c, rng)?;
        conv_params(&mut s, &format!("s{st}.b"), c, c, rng)?;
    }
    let c = cfg.channels(cfg.stages - 1);
    for (head, dim) in [("cls", cfg.n_classes), ("distill", cfg.distill_dim)] {
        s.add(format!("{head}.w"), he_uniform(&[dim, c], c, rng), true)?;
        s.add(format!("{head}.b"), Tensor::zeros(&[dim, 1]), true)?;
    }
    Ok(s)
}

fn conv(
    g: &mut Graph,
    store: &ParamStore,
    name: &str,
    x: Var,
    stride: usize,
) -> Result<Var, TensorError> {
    let find = |suffix: &str| {
        store
            .find(&format!("{name}.{suffix}"))
            .ok_or_else(|| TensorError::Contract(format!("missing parameter `{name}.{suffix}`")))
    };
    let w = g.param(store, find("w")?);
    let b = g.param(store, find("b")?);
    g.conv2d(x, w, Some(b), stride)
}

fn head(g: &mut Graph, store: &ParamStore, name: &str, pooled: Var) -> Result<Var, TensorError> {
    let find = |suffix: &str| {
        store
            .find(&format!("{name}.{suffix}"))
            .ok_or_else(|| TensorError::Contract(format!("missing parameter `{name}.{suffix}`")))
    };
    let w = g.param(store, find("w")?);
    let b = g.param(store, find("b")?);
    let y = g.matmul(w, pooled)?;
    let y = g.add(y, b)?;
    let n = g.shape(y)[0];
    g.reshape(y, &[n])
}

/// Logits `z` and distillation features `f_s` of one `(C,H,W)` image.
///
/// Stem: stride-2 3x3 conv and 2x2 average pool. Each stage holds two 3x3
/// convs with an identity skip; stages after the first open with a
/// stride-2 conv. Global average pooling feeds both linear heads.
pub fn student_forward(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &StudentConfig,
    image: Var,
) -> Result<(Var, Var), TensorError> {
    let s = g.shape(image).to_vec();
    let unit = 1usize << (cfg.stages + 1);
    if s.len() != 3 || s[0] != cfg.in_channels || s[1] % unit != 0 || s[2] % unit != 0 {
        return Err(TensorError::InvalidShape {
            shape: s,
            reason: "student input must be (C,H,W) with H and W divisible by 2^(stages+1)",
        });
    }
    let x = conv(g, store, "stem", image, 2)?;
    let x = g.relu(x);
    let mut x = g.avg_pool2d(x, 2, 2, 0)?;
    for st in 0..cfg.stages {
        if st > 0 {
            let d = conv(g, store, &format!("s{st}.down"), x, 2)?;
            x = g.relu(d);
        }
        let h = conv(g, store, &format!("s{st}.a"), x, 1)?;
        let h = g.relu(h);
        let h = conv(g, store, &format!("s{st}.b"), h, 1)?;
        let sum = g.add(x, h)?;
        x = g.relu(sum);
    }
    let pooled = g.global_avg_pool(x)?;
    let c = g.shape(pooled)[0];
    let pooled = g.reshape(pooled, &[c, 1])?;
    let logits = head(g, store, "cls", pooled)?;
    let f_s = head(g, store, "distill", pooled)?;
    Ok((logits, f_s))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn shapes_and_zero_image() {
        let cfg = StudentConfig {
            base_channels: 4,
            ..StudentConfig::default()
        };
        let store = init_student(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 64, 64]));
        let (z, f) = student_forward(&mut g, &store, &cfg, x).unwrap();
        assert_eq!(g.shape(z), [8]);
        assert_eq!(g.shape(f), [64]);
        assert!(g.value(z).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = StudentConfig::default();
        let store = init_student(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 20, 20]));
        assert!(student_forward(&mut g, &store, &cfg, x).is_err());
    }
}
