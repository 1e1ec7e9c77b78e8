//! Miniature decoder-only transformer with pre-norm wiring.
//!
//! The architecture is deliberately conventional: learned token and position
//! embeddings write into a residual stream of width `d`, each block applies
//! causal multi-head attention and a two-layer GELU MLP behind RMSNorm, and a
//! final RMSNorm feeds the language-model head. All arithmetic is `f64` so
//! that exact-zero propagation and bit-reproducibility can be asserted
//! elsewhere in the crate.
//!
//! The residual width and the attention inner width are tracked separately
//! (`d` versus `n_heads * head_dim`). They coincide for freshly built models;
//! hard pruning narrows the residual stream while leaving head geometry
//! untouched, and the forward pass here runs both regimes unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Standard deviation of the Gaussian used for projection and embedding
/// weights in [`build_model`].
pub const INIT_STD: f64 = 0.02;

/// Hyperparameters of the miniature transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Residual stream width.
    pub d: usize,
    /// Number of transformer blocks.
    pub n_blocks: usize,
    /// Number of attention heads.
    pub n_heads: usize,
    /// Width of one attention head. `n_heads * head_dim` is the attention
    /// inner width; it equals `d` for freshly built models and stays fixed
    /// when the residual stream is later narrowed.
    pub head_dim: usize,
    /// MLP hidden width.
    pub d_ff: usize,
    /// Vocabulary size.
    pub vocab: usize,
    /// Maximum sequence length (also the size of the position table).
    pub max_seq: usize,
    /// RMSNorm epsilon. Zero keeps the normalization exactly homogeneous.
    pub norm_eps: f64,
    /// Whether the LM head shares the token embedding tensor.
    pub tie_lm_head: bool,
}

impl ModelConfig {
    /// Builds a config with standard geometry (`head_dim = d / n_heads`),
    /// `norm_eps = 0`, and an untied head. Adjust fields afterwards and call
    /// [`ModelConfig::validate`] if you change them.
    pub fn new(
        d: usize,
        n_blocks: usize,
        n_heads: usize,
        d_ff: usize,
        vocab: usize,
        max_seq: usize,
    ) -> Result<Self> {
        if n_heads == 0 {
            return Err(Error::Config("n_heads must be at least 1".into()));
        }
        if d % n_heads != 0 {
            return Err(Error::Config(format!(
                "residual width {d} is not divisible by n_heads {n_heads}"
            )));
        }
        let cfg = ModelConfig {
            d,
            n_blocks,
            n_heads,
            head_dim: d / n_heads,
            d_ff,
            vocab,
            max_seq,
            norm_eps: 0.0,
            tie_lm_head: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that every count is positive and the epsilon is a finite
    /// non-negative number.
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("d", self.d),
            ("n_blocks", self.n_blocks),
            ("n_heads", self.n_heads),
            ("head_dim", self.head_dim),
            ("d_ff", self.d_ff),
            ("vocab", self.vocab),
            ("max_seq", self.max_seq),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !self.norm_eps.is_finite() || self.norm_eps < 0.0 {
            return Err(Error::Config(format!(
                "norm_eps must be a finite non-negative number, got {}",
                self.norm_eps
            )));
        }
        Ok(())
    }

    /// Attention inner width, `n_heads * head_dim`.
    #[must_use]
    pub fn inner_width(&self) -> usize {
        self.n_heads * self.head_dim
    }
}

/// A weight matrix with an optional bias on its output side.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `[out x in]` weight.
    pub weight: Matrix,
    /// Optional bias of length `out`.
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    #[must_use]
    pub fn new(weight: Matrix) -> Self {
        Linear { weight, bias: None }
    }

    /// `y = W x + b`.
    #[must_use]
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weight.matvec(x);
        if let Some(b) = &self.bias {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += bi;
            }
        }
        y
    }

    #[must_use]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    #[must_use]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Stored values including the bias, if any.
    #[must_use]
    pub fn param_count(&self) -> u64 {
        self.weight.len() as u64 + self.bias.as_ref().map_or(0, |b| b.len() as u64)
    }
}

/// Weights of one transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    /// RMSNorm gain ahead of attention, length `d`.
    pub norm1_w: Vec<f64>,
    /// Query projection `[inner x d]`.
    pub attn_q: Linear,
    /// Key projection `[inner x d]`.
    pub attn_k: Linear,
    /// Value projection `[inner x d]`.
    pub attn_v: Linear,
    /// Attention output projection `[d x inner]`; writes into the residual.
    pub attn_o: Linear,
    /// RMSNorm gain ahead of the MLP, length `d`.
    pub norm2_w: Vec<f64>,
    /// MLP input projection `[d_ff x d]`.
    pub mlp_in: Linear,
    /// MLP output projection `[d x d_ff]`; writes into the residual.
    pub mlp_out: Linear,
}

/// Full model: embeddings, blocks, final norm, and head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    /// Token embedding `[vocab x d]`.
    pub tok_embedding: Matrix,
    /// Learned absolute position embedding `[max_seq x d]`.
    pub pos_embedding: Matrix,
    pub blocks: Vec<BlockWeights>,
    /// RMSNorm gain ahead of the LM head, length `d`.
    pub final_norm_w: Vec<f64>,
    /// Untied LM head `[vocab x d]`. `None` when the head is tied to the
    /// token embedding.
    pub lm_head: Option<Linear>,
}

impl ModelWeights {
    /// Checks every tensor shape against the config. Loaders and the forward
    /// pass call this so that a hand-edited container cannot silently
    /// produce garbage.
    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        cfg.validate()?;
        let d = cfg.d;
        let inner = cfg.inner_width();
        let check = |name: &str, got: (usize, usize), want: (usize, usize)| -> Result<()> {
            if got != want {
                return Err(Error::Consistency(format!(
                    "{name} has shape {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
            Ok(())
        };
        let check_vec = |name: &str, got: usize, want: usize| -> Result<()> {
            if got != want {
                return Err(Error::Consistency(format!(
                    "{name} has length {got}, expected {want}"
                )));
            }
            Ok(())
        };
        check("tok_embedding", self.tok_embedding.shape(), (cfg.vocab, d))?;
        check("pos_embedding", self.pos_embedding.shape(), (cfg.max_seq, d))?;
        check_vec("final_norm_w", self.final_norm_w.len(), d)?;
        if self.blocks.len() != cfg.n_blocks {
            return Err(Error::Consistency(format!(
                "model has {} blocks, config says {}",
                self.blocks.len(),
                cfg.n_blocks
            )));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            check_vec(&format!("block{i}.norm1_w"), b.norm1_w.len(), d)?;
            check_vec(&format!("block{i}.norm2_w"), b.norm2_w.len(), d)?;
            check(&format!("block{i}.attn_q"), b.attn_q.weight.shape(), (inner, d))?;
            check(&format!("block{i}.attn_k"), b.attn_k.weight.shape(), (inner, d))?;
            check(&format!("block{i}.attn_v"), b.attn_v.weight.shape(), (inner, d))?;
            check(&format!("block{i}.attn_o"), b.attn_o.weight.shape(), (d, inner))?;
            check(&format!("block{i}.mlp_in"), b.mlp_in.weight.shape(), (cfg.d_ff, d))?;
            check(&format!("block{i}.mlp_out"), b.mlp_out.weight.shape(), (d, cfg.d_ff))?;
            for (name, lin) in [
                ("attn_q", &b.attn_q),
                ("attn_k", &b.attn_k),
                ("attn_v", &b.attn_v),
                ("attn_o", &b.attn_o),
                ("mlp_in", &b.mlp_in),
                ("mlp_out", &b.mlp_out),
            ] {
                if let Some(bias) = &lin.bias {
                    check_vec(&format!("block{i}.{name}.bias"), bias.len(), lin.out_dim())?;
                }
            }
        }
        match (&self.lm_head, cfg.tie_lm_head) {
            (Some(_), true) => {
                return Err(Error::Consistency(
                    "config says the head is tied but a separate lm_head tensor is present".into(),
                ))
            }
            (None, false) => {
                return Err(Error::Consistency(
                    "config says the head is untied but no lm_head tensor is present".into(),
                ))
            }
            (Some(h), false) => {
                check("lm_head", h.weight.shape(), (cfg.vocab, d))?;
                if let Some(bias) = &h.bias {
                    check_vec("lm_head.bias", bias.len(), cfg.vocab)?;
                }
            }
            (None, true) => {}
        }
        Ok(())
    }

    /// Total stored values across all tensors, biases included.
    #[must_use]
    pub fn param_count(&self) -> u64 {
        let mut n = self.tok_embedding.len() as u64
            + self.pos_embedding.len() as u64
            + self.final_norm_w.len() as u64;
        for b in &self.blocks {
            n += b.norm1_w.len() as u64 + b.norm2_w.len() as u64;
            n += b.attn_q.param_count()
                + b.attn_k.param_count()
                + b.attn_v.param_count()
                + b.attn_o.param_count()
                + b.mlp_in.param_count()
                + b.mlp_out.param_count();
        }
        if let Some(h) = &self.lm_head {
            n += h.param_count();
        }
        n
    }

    /// Fills every projection with a fresh seeded Gaussian bias. Fixture
    /// helper for exercising bias handling in masking and compaction.
    pub fn add_random_biases(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let mut fill = |lin: &mut Linear| {
            let n = lin.out_dim();
            lin.bias = Some((0..n).map(|_| normal.sample(&mut rng)).collect());
        };
        for b in &mut self.blocks {
            fill(&mut b.attn_q);
            fill(&mut b.attn_k);
            fill(&mut b.attn_v);
            fill(&mut b.attn_o);
            fill(&mut b.mlp_in);
            fill(&mut b.mlp_out);
        }
        if let Some(h) = &mut self.lm_head {
            fill(h);
        }
    }
}

/// Per-block activations captured during a forward pass.
///
/// `mlp_out` holds the MLP output before the residual add, which is the
/// signal the activation profiler aggregates. The residual snapshots exist so
/// that exact-zero propagation through the stream can be asserted directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    /// Residual stream right after the token and position embeddings, `[L x d]`.
    pub embed: Matrix,
    /// Residual stream after each block's attention add, `[L x d]` per block.
    pub resid_after_attn: Vec<Matrix>,
    /// Residual stream after each block's MLP add, `[L x d]` per block.
    pub resid_after_mlp: Vec<Matrix>,
    /// MLP output before the residual add, `[L x d]` per block.
    pub mlp_out: Vec<Matrix>,
    /// Number of real tokens in the sequence. Sequences are processed
    /// unpadded, so this equals the trace row count.
    pub valid_token_count: usize,
}

/// Builds a model with seeded Gaussian weights.
///
/// Projection and embedding tensors are drawn from `N(0, 0.02^2)` in a fixed
/// tensor order from a single ChaCha stream; norm gains start at one. The
/// same `(config, seed)` pair therefore yields bit-identical weights, and
/// different seeds diverge immediately. Requires standard geometry
/// (`n_heads * head_dim == d`); no biases are created.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    if config.inner_width() != config.d {
        return Err(Error::Config(format!(
            "build_model requires n_heads * head_dim == d, got {} * {} != {}",
            config.n_heads, config.head_dim, config.d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut gauss = |rows: usize, cols: usize| -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng))
    };
    let d = config.d;
    let inner = config.inner_width();
    let tok_embedding = gauss(config.vocab, d);
    let pos_embedding = gauss(config.max_seq, d);
    let mut blocks = Vec::with_capacity(config.n_blocks);
    for _ in 0..config.n_blocks {
        blocks.push(BlockWeights {
            norm1_w: vec![1.0; d],
            attn_q: Linear::new(gauss(inner, d)),
            attn_k: Linear::new(gauss(inner, d)),
            attn_v: Linear::new(gauss(inner, d)),
            attn_o: Linear::new(gauss(d, inner)),
            norm2_w: vec![1.0; d],
            mlp_in: Linear::new(gauss(config.d_ff, d)),
            mlp_out: Linear::new(gauss(d, config.d_ff)),
        });
    }
    let lm_head = if config.tie_lm_head {
        None
    } else {
        Some(Linear::new(gauss(config.vocab, d)))
    };
    let weights = ModelWeights {
        config: config.clone(),
        tok_embedding,
        pos_embedding,
        blocks,
        final_norm_w: vec![1.0; d],
        lm_head,
    };
    weights.validate()?;
    Ok(weights)
}

/// RMS normalization without mean subtraction:
/// `out[k] = x[k] / sqrt(mean(x^2) + eps) * weight[k]`.
pub fn rmsnorm(x: &[f64], weight: &[f64], eps: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Input("cannot normalize an empty vector".into()));
    }
    if x.len() != weight.len() {
        return Err(Error::Input(format!(
            "value vector has length {}, gain vector has length {}",
            x.len(),
            weight.len()
        )));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Input(format!(
            "eps must be a finite non-negative number, got {eps}"
        )));
    }
    let mut out = vec![0.0; x.len()];
    rmsnorm_into(x, weight, eps, &mut out);
    Ok(out)
}

/// Unchecked core of [`rmsnorm`], shared with the forward pass.
fn rmsnorm_into(x: &[f64], weight: &[f64], eps: f64, out: &mut [f64]) {
    let mut sumsq = 0.0;
    for v in x {
        sumsq += v * v;
    }
    let denom = (sumsq / x.len() as f64 + eps).sqrt();
    for ((o, v), w) in out.iter_mut().zip(x).zip(weight) {
        *o = v / denom * w;
    }
}

/// GELU activation, tanh approximation. Maps exact zero to exact zero.
#[must_use]
pub fn gelu(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}

/// Runs the model over one unpadded token sequence.
///
/// Returns `[L x vocab]` logits and, when `capture` is set, the per-block
/// [`ActivationTrace`]. Position `j` only ever attends to positions `0..=j`,
/// so logits at a position are unaffected by later tokens. The pass is pure:
/// identical weights and tokens produce bit-identical logits, and `&ModelWeights`
/// can be shared across threads.
pub fn forward(
    weights: &ModelWeights,
    tokens: &[u32],
    capture: bool,
) -> Result<(Matrix, Option<ActivationTrace>)> {
    weights.validate()?;
    let cfg = &weights.config;
    let l = tokens.len();
    if l == 0 {
        return Err(Error::Input("cannot run the model on an empty token sequence".into()));
    }
    if l > cfg.max_seq {
        return Err(Error::Input(format!(
            "sequence length {l} exceeds max_seq {}",
            cfg.max_seq
        )));
    }
    for (j, &t) in tokens.iter().enumerate() {
        if t as usize >= cfg.vocab {
            return Err(Error::Input(format!(
                "token {t} at position {j} is outside the vocabulary of size {}",
                cfg.vocab
            )));
        }
    }

    let d = cfg.d;
    let inner = cfg.inner_width();
    let hd = cfg.head_dim;
    let score_scale = 1.0 / (hd as f64).sqrt();

    // Residual stream, one row per position.
    let mut x = Matrix::zeros(l, d);
    for (j, &t) in tokens.iter().enumerate() {
        let e = weights.tok_embedding.row(t as usize);
        let p = weights.pos_embedding.row(j);
        let row = x.row_mut(j);
        for k in 0..d {
            row[k] = e[k] + p[k];
        }
    }

    let mut trace = capture.then(|| ActivationTrace {
        embed: x.clone(),
        resid_after_attn: Vec::with_capacity(cfg.n_blocks),
        resid_after_mlp: Vec::with_capacity(cfg.n_blocks),
        mlp_out: Vec::with_capacity(cfg.n_blocks),
        valid_token_count: l,
    });

    let mut normed = vec![0.0; d];
    for block in &weights.blocks {
        // ── Attention sublayer ──
        let mut q = Matrix::zeros(l, inner);
        let mut k = Matrix::zeros(l, inner);
        let mut v = Matrix::zeros(l, inner);
        for j in 0..l {
            rmsnorm_into(x.row(j), &block.norm1_w, cfg.norm_eps, &mut normed);
            q.row_mut(j).copy_from_slice(&block.attn_q.apply(&normed));
            k.row_mut(j).copy_from_slice(&block.attn_k.apply(&normed));
            v.row_mut(j).copy_from_slice(&block.attn_v.apply(&normed));
        }
        let mut attn_inner = Matrix::zeros(l, inner);
        for j in 0..l {
            for h in 0..cfg.n_heads {
                let lo = h * hd;
                let hi = lo + hd;
                let qj = &q.row(j)[lo..hi];
                let mut scores = Vec::with_capacity(j + 1);
                let mut max_score = f64::NEG_INFINITY;
                for i in 0..=j {
                    let ki = &k.row(i)[lo..hi];
                    let mut s = 0.0;
                    for t in 0..hd {
                        s += qj[t] * ki[t];
                    }
                    s *= score_scale;
                    if s > max_score {
                        max_score = s;
                    }
                    scores.push(s);
                }
                let mut denom = 0.0;
                for s in &mut scores {
                    *s = (*s - max_score).exp();
                    denom += *s;
                }
                let out = &mut attn_inner.row_mut(j)[lo..hi];
                for (i, s) in scores.iter().enumerate() {
                    let p = s / denom;
                    let vi = &v.row(i)[lo..hi];
                    for t in 0..hd {
                        out[t] += p * vi[t];
                    }
                }
            }
        }
        for j in 0..l {
            let o = block.attn_o.apply(attn_inner.row(j));
            let row = x.row_mut(j);
            for (t, val) in o.iter().enumerate() {
                row[t] += val;
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.resid_after_attn.push(x.clone());
        }

        // ── MLP sublayer ──
        let mut mlp_block = Matrix::zeros(l, d);
        for j in 0..l {
            rmsnorm_into(x.row(j), &block.norm2_w, cfg.norm_eps, &mut normed);
            let mut hidden = block.mlp_in.apply(&normed);
            for t in &mut hidden {
                *t = gelu(*t);
            }
            mlp_block.row_mut(j).copy_from_slice(&block.mlp_out.apply(&hidden));
        }
        for j in 0..l {
            let row = x.row_mut(j);
            for (t, val) in mlp_block.row(j).iter().enumerate() {
                row[t] += val;
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.mlp_out.push(mlp_block);
            tr.resid_after_mlp.push(x.clone());
        }
    }

    // ── Final norm and head ──
    let mut logits = Matrix::zeros(l, cfg.vocab);
    for j in 0..l {
        rmsnorm_into(x.row(j), &weights.final_norm_w, cfg.norm_eps, &mut normed);
        let lj = match &weights.lm_head {
            Some(head) => head.apply(&normed),
            None => weights.tok_embedding.matvec(&normed),
        };
        logits.row_mut(j).copy_from_slice(&lj);
    }
    Ok((logits, trace))
}

/// Analytic size and compute figures for a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Tensor elements of the bias-free reference architecture.
    pub param_count: u64,
    /// Flops per token at the given sequence length: two flops per
    /// multiply-accumulate over every projection, plus `2 * L * inner` MACs
    /// per block for attention scores and mixing. Norm and activation costs
    /// are excluded.
    pub flops_per_token: u64,
    /// Rough bytes of live `f64` activations at the given sequence length.
    pub peak_activation_bytes: u64,
}

/// Computes [`CostReport`] figures from shapes alone.
///
/// `param_count` counts the tensors that [`build_model`] creates (a tied
/// head contributes its shared tensor once); models with fixture biases
/// fall outside this closed form.
pub fn cost_report(config: &ModelConfig, seq_len: usize) -> Result<CostReport> {
    config.validate()?;
    if seq_len == 0 || seq_len > config.max_seq {
        return Err(Error::Input(format!(
            "seq_len {seq_len} is outside 1..={}",
            config.max_seq
        )));
    }
    let d = config.d as u64;
    let inner = config.inner_width() as u64;
    let d_ff = config.d_ff as u64;
    let vocab = config.vocab as u64;
    let max_seq = config.max_seq as u64;
    let b = config.n_blocks as u64;
    let l = seq_len as u64;

    let per_block_params = 3 * inner * d + d * inner + d_ff * d + d * d_ff + 2 * d;
    let mut param_count = vocab * d + max_seq * d + b * per_block_params + d;
    if !config.tie_lm_head {
        param_count += vocab * d;
    }

    let per_block_macs = 3 * inner * d + inner * d + 2 * l * inner + 2 * d_ff * d;
    let flops_per_token = 2 * (b * per_block_macs + vocab * d);

    let peak_activation_bytes = 8 * l * (2 * d + 4 * inner + d_ff + vocab);

    Ok(CostReport {
        param_count,
        flops_per_token,
        peak_activation_bytes,
    })
}
