use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{he_uniform, Graph, ParamId, ParamStore, Tensor, TensorError, Var};

/// Shape of both teacher branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherConfig {
    /// Sub-blocks per branch; equals the number of gaze time windows.
    pub n_subblocks: usize,
    pub base_channels: usize,
    pub in_channels: usize,
    pub distill_dim: usize,
    /// Side of the pooled final attention map included in the feature summary.
    pub map_grid: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            n_subblocks: 4,
            base_channels: 16,
            in_channels: 1,
            distill_dim: 64,
            map_grid: 4,
        }
    }
}

/// Spatial halvings are capped so deep variants keep a usable resolution.
const MAX_HALVINGS: usize = 4;

impl TeacherConfig {
    /// Channel width of sub-block `t`.
    pub fn channels(&self, t: usize) -> usize {
        self.base_channels << t.min(2)
    }

    /// Total spatial halving from input to the last sub-block.
    pub fn halvings(&self) -> usize {
        self.n_subblocks.min(MAX_HALVINGS)
    }

    /// `(h_t, w_t)` of every sub-block for an `height x width` input.
    pub fn layer_dims(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        (0..self.n_subblocks)
            .map(|t| {
                let k = (t + 1).min(MAX_HALVINGS);
                (height >> k, width >> k)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.n_subblocks == 0
            || self.base_channels == 0
            || self.in_channels == 0
            || self.distill_dim == 0
            || self.map_grid == 0
        {
            return Err(TensorError::Contract(format!(
                "teacher config has a zero field: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn check_input(&self, shape: &[usize]) -> Result<(), TensorError> {
        let unit = 1usize << self.halvings();
        if shape.len() != 3
            || shape[0] != self.in_channels
            || shape[1] % unit != 0
            || shape[2] % unit != 0
        {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason:
                    "teacher input must be (C,H,W) with H and W divisible by 2^min(n_subblocks, 4)",
            });
        }
        let (h, w) = (shape[1] >> self.halvings(), shape[2] >> self.halvings());
        if h % self.map_grid != 0
            || w % self.map_grid != 0
            || h / self.map_grid != w / self.map_grid
        {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason: "final attention map must split into map_grid x map_grid square cells",
            });
        }
        Ok(())
    }

    /// Length of the summary vector `[GAP(Y_L); pooled O_L]` fed to the projection.
    pub fn summary_len(&self) -> usize {
        self.channels(self.n_subblocks - 1) + self.map_grid * self.map_grid
    }
}

/// Per-layer attention outputs and the distillation feature of one branch.
#[derive(Clone, Debug)]
pub struct TeacherOutputs {
    /// `O_t`, each of shape `(h_t, w_t)`.
    pub attn_maps: Vec<Var>,
    /// `f`, of shape `(d)`.
    pub feature: Var,
    /// Unstandardized input of the projection, shape `(n, 1)`.
    pub summary: Var,
}

fn add_weight(
    store: &mut ParamStore,
    name: String,
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> Result<ParamId, TensorError> {
    store.add(name, he_uniform(&[rows, cols], cols, rng), true)
}

fn add_bias(store: &mut ParamStore, name: String, rows: usize) -> Result<ParamId, TensorError> {
    store.add(name, Tensor::zeros(&[rows, 1]), true)
}

/// Frozen feature projection with its standardization statistics.
fn add_projection(
    s: &mut ParamStore,
    prefix: &str,
    cfg: &TeacherConfig,
    rng: &mut impl Rng,
) -> Result<(), TensorError> {
    let n = cfg.summary_len();
    add_weight(s, format!("{prefix}.proj.w"), cfg.distill_dim, n, rng)?;
    s.add(format!("{prefix}.proj.mean"), Tensor::zeros(&[n, 1]), false)?;
    s.add(format!("{prefix}.proj.scale"), Tensor::ones(&[n, 1]), false)?;
    Ok(())
}

fn lookup(store: &ParamStore, name: &str) -> Result<ParamId, TensorError> {
    store
        .find(name)
        .ok_or_else(|| TensorError::Contract(format!("missing parameter `{name}`")))
}

fn param(g: &mut Graph, store: &ParamStore, name: &str) -> Result<Var, TensorError> {
    Ok(g.param(store, lookup(store, name)?))
}

/// `W x + b` over `(C, P)` features.
fn pointwise(g: &mut Graph, store: &ParamStore, prefix: &str, x: Var) -> Result<Var, TensorError> {
    let w = param(g, store, &format!("{prefix}.w"))?;
    let b = param(g, store, &format!("{prefix}.b"))?;
    let y = g.matmul(w, x)?;
    g.add(y, b)
}

/// Parameters of the focal-gating (TW-I) branch, names prefixed `twi.`.
pub fn init_twi(cfg: &TeacherConfig, rng: &mut impl Rng) -> Result<ParamStore, TensorError> {
    cfg.validate()?;
    let mut s = ParamStore::new();
    let mut c_in = cfg.in_channels;
    for t in 0..cfg.n_subblocks {
        let c = cfg.channels(t);
        add_weight(&mut s, format!("twi.b{t}.z.w"), c, c_in, rng)?;
        add_bias(&mut s, format!("twi.b{t}.z.b"), c)?;
        add_weight(&mut s, format!("twi.b{t}.mix.w"), c, 2 * c, rng)?;
        add_bias(&mut s, format!("twi.b{t}.mix.b"), c)?;
        c_in = c;
    }
    add_projection(&mut s, "twi", cfg, rng)?;
    Ok(s)
}

/// Parameters of the global-context (TW-D) branch, names prefixed `twd.`.
pub fn init_twd(cfg: &TeacherConfig, rng: &mut impl Rng) -> Result<ParamStore, TensorError> {
    cfg.validate()?;
    let mut s = ParamStore::new();
    let mut c_in = cfg.in_channels;
    for t in 0..cfg.n_subblocks {
        let c = cfg.channels(t);
        for role in ["k", "v"] {
            add_weight(&mut s, format!("twd.b{t}.{role}.w"), c, c_in, rng)?;
            add_bias(&mut s, format!("twd.b{t}.{role}.b"), c)?;
        }
        c_in = c;
    }
    add_projection(&mut s, "twd", cfg, rng)?;
    Ok(s)
}

/// Stem halving, then the per-sub-block body; `(C,H,W)` features flow
/// between sub-blocks and are halved after each until the cap is reached.
/// The feature `f` projects the standardized summary of the last sub-block.
fn run_branch<F>(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &TeacherConfig,
    image: Var,
    prefix: &str,
    mut block: F,
) -> Result<TeacherOutputs, TensorError>
where
    F: FnMut(&mut Graph, usize, Var, usize, usize) -> Result<(Var, Var), TensorError>,
{
    cfg.check_input(g.shape(image))?;
    let mut x = g.avg_pool2d(image, 2, 2, 0)?;
    let mut attn_maps = Vec::with_capacity(cfg.n_subblocks);
    for t in 0..cfg.n_subblocks {
        let s = g.shape(x).to_vec();
        let (h, w) = (s[1], s[2]);
        let flat = g.reshape(x, &[s[0], h * w])?;
        let (y, attn) = block(g, t, flat, h, w)?;
        attn_maps.push(g.reshape(attn, &[h, w])?);
        let c = g.shape(y)[0];
        x = g.reshape(y, &[c, h, w])?;
        if t + 1 < cfg.n_subblocks && t + 2 <= MAX_HALVINGS {
            x = g.avg_pool2d(x, 2, 2, 0)?;
        }
    }
    let summary = summary(
        g,
        cfg,
        x,
        *attn_maps.last().expect("at least one sub-block"),
    )?;
    let mean = param(g, store, &format!("{prefix}.proj.mean"))?;
    let scale = param(g, store, &format!("{prefix}.proj.scale"))?;
    let centered = g.sub(summary, mean)?;
    let standardized = g.mul(centered, scale)?;
    let proj = param(g, store, &format!("{prefix}.proj.w"))?;
    let f = g.matmul(proj, standardized)?;
    let feature = g.reshape(f, &[cfg.distill_dim])?;
    Ok(TeacherOutputs {
        attn_maps,
        feature,
        summary,
    })
}

/// `[GAP(Y_L); O_L pooled to map_grid x map_grid]` as an `(n, 1)` column.
fn summary(
    g: &mut Graph,
    cfg: &TeacherConfig,
    features: Var,
    last_map: Var,
) -> Result<Var, TensorError> {
    let pooled = g.global_avg_pool(features)?;
    let c = g.shape(pooled)[0];
    let pooled = g.reshape(pooled, &[c, 1])?;
    let (h, w) = (g.shape(last_map)[0], g.shape(last_map)[1]);
    let grid = cfg.map_grid;
    let map = g.reshape(last_map, &[1, h, w])?;
    let map = if h == grid && w == grid {
        map
    } else {
        g.avg_pool2d(map, h / grid, h / grid, 0)?
    };
    let map = g.reshape(map, &[grid * grid, 1])?;
    g.concat(&[pooled, map], 0)
}

/// TW-I forward pass.
///
/// Sub-block `t`: `Z = W_z X + b_z`; local contexts `M1`, `M2` are 3x3 and
/// 7x7 average pools of `Z`; gate `m = sigmoid(W_mix [M1; M2] + b_mix)`;
/// output `Y = Z * m`; `O_t` is the channel mean of `m`.
pub fn twi_forward(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &TeacherConfig,
    image: Var,
) -> Result<TeacherOutputs, TensorError> {
    run_branch(g, store, cfg, image, "twi", |g, t, x, h, w| {
        let z = pointwise(g, store, &format!("twi.b{t}.z"), x)?;
        let c = g.shape(z)[0];
        let z3 = g.reshape(z, &[c, h, w])?;
        let m1 = g.avg_pool_same(z3, 3)?;
        let m2 = g.avg_pool_same(z3, 7)?;
        let ctx = g.concat(&[m1, m2], 0)?;
        let ctx = g.reshape(ctx, &[2 * c, h * w])?;
        let mix = pointwise(g, store, &format!("twi.b{t}.mix"), ctx)?;
        let gate = g.sigmoid(mix);
        let y = g.mul(z, gate)?;
        let attn = g.mean_axis(gate, 0)?;
        Ok((y, attn))
    })
}

/// TW-D forward pass.
///
/// Sub-block `t`: keys `K` and values `V` are pointwise projections; the
/// query is the spatial mean of `K`; `A = softmax_p(<K(p), q> / sqrt(c))`;
/// output `Y = relu(V + V A)` with the context `V A` broadcast over
/// positions; `O_t = A`.
pub fn twd_forward(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &TeacherConfig,
    image: Var,
) -> Result<TeacherOutputs, TensorError> {
    run_branch(g, store, cfg, image, "twd", |g, t, x, _h, _w| {
        let k = pointwise(g, store, &format!("twd.b{t}.k"), x)?;
        let v = pointwise(g, store, &format!("twd.b{t}.v"), x)?;
        let (c, p) = (g.shape(k)[0], g.shape(k)[1]);
        let q = g.mean_axis(k, 1)?;
        let q = g.reshape(q, &[1, c])?;
        let logits = g.matmul(q, k)?;
        let logits = g.scale(logits, 1.0 / (c as f64).sqrt());
        let logits = g.reshape(logits, &[p])?;
        let attn = g.softmax(logits, 0)?;
        let col = g.reshape(attn, &[p, 1])?;
        let ctx = g.matmul(v, col)?;
        let y = g.add(v, ctx)?;
        Ok((g.relu(y), attn))
    })
}
