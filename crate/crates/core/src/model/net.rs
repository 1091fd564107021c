//! Pre-LN transformer: an encoder over the query's features and an
//! autoregressive decoder whose per-feature heads emit bin logits.
//!
//! Every feature is one token. Encoder token `j` is `x_j · v_j + e_j`.
//! Decoder token 0 is a learned start vector; token `j > 0` embeds the
//! previous target coordinate. The causal mask lets the head for feature
//! `j` see only target coordinates before `j`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_EPS: f64 = 1e-5;
const MASKED: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub embed: usize,
    pub heads: usize,
    pub ffn: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
}

impl NetConfig {
    /// Small CPU-friendly stack used for the 2D experiments.
    pub fn desk() -> Self {
        Self {
            embed: 32,
            heads: 4,
            ffn: 32,
            enc_layers: 4,
            dec_layers: 4,
        }
    }

    /// Full-size stack for tabular runs.
    pub fn tabular() -> Self {
        Self {
            embed: 32,
            heads: 8,
            ffn: 32,
            enc_layers: 16,
            dec_layers: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.heads == 0 || !self.embed.is_multiple_of(self.heads) {
            return Err(Error::Invalid(format!(
                "embed {} must be a positive multiple of heads {}",
                self.embed, self.heads
            )));
        }
        if self.dec_layers == 0 || self.ffn == 0 {
            return Err(Error::Invalid("decoder needs at least one layer".into()));
        }
        Ok(())
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
struct Attention {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
}

#[derive(Debug, Clone)]
struct FeedForward {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone)]
struct Block {
    self_norm: Norm,
    self_attn: Attention,
    cross: Option<(Norm, Attention)>,
    ff_norm: Norm,
    ff: FeedForward,
}

#[derive(Debug, Clone)]
struct Embedding {
    value: ParamId,
    position: ParamId,
}

/// Parameter layout; the values live in a [`ParamStore`].
#[derive(Debug, Clone)]
pub(crate) struct Net {
    pub cfg: NetConfig,
    pub dim: usize,
    encoder: Option<(Embedding, Vec<Block>, Norm)>,
    dec_embed: Embedding,
    decoder: Vec<Block>,
    dec_norm: Norm,
    head_w: ParamId,
    head_b: ParamId,
    /// Padded-bin mask over `[dim, 1, max_bins]`.
    pad_mask: Vec<bool>,
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut Rng,
}

impl Builder<'_> {
    fn norm(&mut self, name: &str, e: usize) -> Norm {
        Norm {
            gain: self.store.add(format!("{name}.gain"), Tensor::filled(&[e], 1.0)),
            bias: self.store.add_zeros(&format!("{name}.bias"), &[e]),
        }
    }

    fn linear(&mut self, name: &str, i: usize, o: usize) -> (ParamId, ParamId) {
        (
            self.store.add_glorot(&format!("{name}.w"), &[i, o], self.rng),
            self.store.add_zeros(&format!("{name}.b"), &[o]),
        )
    }

    fn attention(&mut self, name: &str, e: usize) -> Attention {
        let (wq, bq) = self.linear(&format!("{name}.q"), e, e);
        let (wk, bk) = self.linear(&format!("{name}.k"), e, e);
        let (wv, bv) = self.linear(&format!("{name}.v"), e, e);
        let (wo, bo) = self.linear(&format!("{name}.o"), e, e);
        Attention {
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
        }
    }

    fn block(&mut self, name: &str, cfg: &NetConfig, cross: bool) -> Block {
        let e = cfg.embed;
        let self_norm = self.norm(&format!("{name}.ln_self"), e);
        let self_attn = self.attention(&format!("{name}.self"), e);
        let cross = cross.then(|| {
            (
                self.norm(&format!("{name}.ln_cross"), e),
                self.attention(&format!("{name}.cross"), e),
            )
        });
        let ff_norm = self.norm(&format!("{name}.ln_ff"), e);
        let (w1, b1) = self.linear(&format!("{name}.ff1"), e, cfg.ffn);
        let (w2, b2) = self.linear(&format!("{name}.ff2"), cfg.ffn, e);
        Block {
            self_norm,
            self_attn,
            cross,
            ff_norm,
            ff: FeedForward { w1, b1, w2, b2 },
        }
    }

    fn embedding(&mut self, name: &str, d: usize, e: usize) -> Embedding {
        Embedding {
            value: self.store.add_glorot(&format!("{name}.value"), &[d, e], self.rng),
            position: self
                .store
                .add_normal(&format!("{name}.position"), &[d, e], 0.1, self.rng),
        }
    }
}

impl Net {
    /// Registers parameters in `store`. Without an encoder the decoder models
    /// the target marginally.
    pub fn new(
        cfg: NetConfig,
        bins: Vec<usize>,
        conditional: bool,
        store: &mut ParamStore,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let dim = bins.len();
        if dim == 0 || bins.contains(&0) {
            return Err(Error::Invalid("every feature needs at least one bin".into()));
        }
        let e = cfg.embed;
        let mut b = Builder { store, rng };
        let encoder = conditional.then(|| {
            let emb = b.embedding("enc.embed", dim, e);
            let blocks = (0..cfg.enc_layers)
                .map(|l| b.block(&format!("enc.{l}"), &cfg, false))
                .collect();
            (emb, blocks, b.norm("enc.ln_out", e))
        });
        let dec_embed = b.embedding("dec.embed", dim, e);
        let decoder = (0..cfg.dec_layers)
            .map(|l| b.block(&format!("dec.{l}"), &cfg, conditional))
            .collect();
        let dec_norm = b.norm("dec.ln_out", e);
        let nmax = *bins.iter().max().expect("non-empty");
        let head_w = b.store.add_glorot("head.w", &[dim, e, nmax], b.rng);
        let head_b = b.store.add_zeros("head.b", &[dim, 1, nmax]);
        let pad_mask = bins.iter().flat_map(|&n| (0..nmax).map(move |k| k >= n)).collect();
        Ok(Self {
            cfg,
            dim,
            encoder,
            dec_embed,
            decoder,
            dec_norm,
            head_w,
            head_b,
            pad_mask,
        })
    }

    pub fn conditional(&self) -> bool {
        self.encoder.is_some()
    }

    pub fn max_bins(&self) -> usize {
        self.pad_mask.len() / self.dim
    }

    fn norm(&self, t: &mut Tape, p: &Bound, n: &Norm, x: Var) -> Result<Var> {
        let y = t.layer_norm(x, LN_EPS)?;
        let y = t.mul(y, p[n.gain])?;
        t.add(y, p[n.bias])
    }

    fn linear(t: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = t.matmul(x, w)?;
        t.add(y, b)
    }

    /// Multi-head attention from `q_src [B,Lq,E]` onto `kv_src [B,Lk,E]`.
    fn attention(&self, t: &mut Tape, p: &Bound, a: &Attention, q_src: Var, kv_src: Var, causal: bool) -> Result<Var> {
        let (b, lq, e) = dims3(t.shape(q_src));
        let lk = t.shape(kv_src)[1];
        let h = self.cfg.heads;
        let dh = e / h;
        let split = |t: &mut Tape, x: Var, l: usize, perm: &[usize], shape: [usize; 3]| -> Result<Var> {
            let x = t.reshape(x, &[b, l, h, dh])?;
            let x = t.permute(x, perm)?;
            t.reshape(x, &shape)
        };
        let q = Self::linear(t, q_src, p[a.wq], p[a.bq])?;
        let k = Self::linear(t, kv_src, p[a.wk], p[a.bk])?;
        let v = Self::linear(t, kv_src, p[a.wv], p[a.bv])?;
        let q = split(t, q, lq, &[0, 2, 1, 3], [b * h, lq, dh])?;
        let k = split(t, k, lk, &[0, 2, 3, 1], [b * h, dh, lk])?;
        let v = split(t, v, lk, &[0, 2, 1, 3], [b * h, lk, dh])?;
        let scores = t.bmm(q, k)?;
        let mut scores = t.scale(scores, 1.0 / (dh as f64).sqrt());
        if causal {
            let mask: Vec<bool> = (0..lq * lk).map(|i| i % lk > i / lk).collect();
            scores = t.masked_fill(scores, &mask, MASKED)?;
        }
        let att = t.softmax(scores)?;
        let out = t.bmm(att, v)?;
        let out = t.reshape(out, &[b, h, lq, dh])?;
        let out = t.permute(out, &[0, 2, 1, 3])?;
        let out = t.reshape(out, &[b, lq, e])?;
        Self::linear(t, out, p[a.wo], p[a.bo])
    }

    fn block(&self, t: &mut Tape, p: &Bound, blk: &Block, x: Var, memory: Option<Var>, causal: bool) -> Result<Var> {
        let n = self.norm(t, p, &blk.self_norm, x)?;
        let a = self.attention(t, p, &blk.self_attn, n, n, causal)?;
        let mut x = t.add(x, a)?;
        if let (Some((norm, attn)), Some(mem)) = (&blk.cross, memory) {
            let n = self.norm(t, p, norm, x)?;
            let a = self.attention(t, p, attn, n, mem, false)?;
            x = t.add(x, a)?;
        }
        let n = self.norm(t, p, &blk.ff_norm, x)?;
        let f = Self::linear(t, n, p[blk.ff.w1], p[blk.ff.b1])?;
        let f = t.relu(f);
        let f = Self::linear(t, f, p[blk.ff.w2], p[blk.ff.b2])?;
        t.add(x, f)
    }

    /// `values [B, d]` -> tokens `[B, d, E]`.
    fn embed(&self, t: &mut Tape, p: &Bound, emb: &Embedding, values: Tensor) -> Result<Var> {
        let b = values.shape()[0];
        let v = t.constant(values.reshaped(vec![b, self.dim, 1])?);
        let tok = t.mul(v, p[emb.value])?;
        t.add(tok, p[emb.position])
    }

    /// Encoder states `[B, d, E]` for a batch of queries `[B, d]`.
    pub fn encode(&self, t: &mut Tape, p: &Bound, x: Tensor) -> Result<Option<Var>> {
        let Some((emb, blocks, norm)) = &self.encoder else {
            return Ok(None);
        };
        let mut h = self.embed(t, p, emb, x)?;
        for blk in blocks {
            h = self.block(t, p, blk, h, None, false)?;
        }
        Ok(Some(self.norm(t, p, norm, h)?))
    }

    /// Per-feature log-probabilities `[d, B, max_bins]` (padded bins ≈ −1e9)
    /// given encoder states and the targets `[B, d]` (teacher forcing).
    pub fn decode(&self, t: &mut Tape, p: &Bound, memory: Option<Var>, target: &Tensor) -> Result<Var> {
        let (b, d) = (target.shape()[0], self.dim);
        // shift right; the constant 1 in slot 0 turns the first value
        // embedding row into the start token
        let mut shifted = vec![0.0; b * d];
        for (row, src) in shifted.chunks_mut(d).zip(target.data().chunks(d)) {
            row[0] = 1.0;
            row[1..].copy_from_slice(&src[..d - 1]);
        }
        let mut h = self.embed(t, p, &self.dec_embed, Tensor::new(vec![b, d], shifted)?)?;
        for blk in &self.decoder {
            h = self.block(t, p, blk, h, memory, true)?;
        }
        let h = self.norm(t, p, &self.dec_norm, h)?;
        let h = t.permute(h, &[1, 0, 2])?;
        let logits = t.bmm(h, p[self.head_w])?;
        let logits = t.add(logits, p[self.head_b])?;
        let nmax = self.max_bins();
        let mask: Vec<bool> = (0..d)
            .flat_map(|j| {
                let row = &self.pad_mask[j * nmax..(j + 1) * nmax];
                std::iter::repeat_n(row, b).flatten().copied()
            })
            .collect();
        let logits = t.masked_fill(logits, &mask, MASKED)?;
        t.log_softmax(logits)
    }
}

fn dims3(s: &[usize]) -> (usize, usize, usize) {
    (s[0], s[1], s[2])
}
