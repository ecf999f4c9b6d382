use alloc::format;

use crate::blocks::layers::{Builder, ConvLayer, GrnLayer};
use crate::blocks::AttentionVariant;
use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Graph, Var};

/// Conditional positional encoding: `GRN(DW3x3(x)) + x`.
#[derive(Clone, Debug)]
pub struct CpeLayer {
    pub dw: ConvLayer,
    pub grn: GrnLayer,
}

impl CpeLayer {
    pub fn build<T: Scalar>(b: &mut Builder<'_, T>, channels: usize) -> Result<Self> {
        Ok(Self { dw: b.depthwise("dw", channels, (3, 3), 1)?, grn: b.grn("grn", channels)? })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let y = self.dw.forward(g, store, x)?;
        let y = self.grn.forward(g, store, y)?;
        g.add(y, x)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        Ok(self.dw.cost(n, h, w)?.0)
    }
}

/// Query, key and value in token layout `[N·heads, H·W, d]`. `k_agg` and
/// `v_agg` are the neighbour-aggregated keys/values actually attended to;
/// for the traditional variant they are `k` and `v` themselves.
#[derive(Clone, Copy, Debug)]
pub struct AttentionTriple {
    pub q: Var,
    pub k: Var,
    pub v: Var,
    pub k_agg: Var,
    pub v_agg: Var,
}

/// Adaptive feature guidance: global multi-head attention in which keys and
/// values are first aggregated over 3×3 neighbourhoods by depthwise
/// convolution.
#[derive(Clone, Debug)]
pub struct AfgLayer {
    pub qkv: ConvLayer,
    pub dw_k: Option<ConvLayer>,
    pub dw_v: Option<ConvLayer>,
    pub project: ConvLayer,
    pub channels: usize,
    pub heads: usize,
}

impl AfgLayer {
    /// `heads` must divide `channels`; the network uses `channels / HEAD_DIM`.
    pub fn build<T: Scalar>(
        b: &mut Builder<'_, T>,
        channels: usize,
        heads: usize,
        variant: AttentionVariant,
    ) -> Result<Self> {
        if heads == 0 || !channels.is_multiple_of(heads) {
            return Err(Error::config(format!(
                "attention over {channels} channels cannot be split into {heads} heads"
            )));
        }
        let qkv = b.pointwise("qkv", channels, 3 * channels)?;
        let (dw_k, dw_v) = match variant {
            AttentionVariant::Interaction => {
                (Some(b.depthwise("dw_k", channels, (3, 3), 1)?), Some(b.depthwise("dw_v", channels, (3, 3), 1)?))
            }
            AttentionVariant::Traditional => (None, None),
        };
        let project = b.pointwise("project", channels, channels)?;
        Ok(Self { qkv, dw_k, dw_v, project, channels, heads })
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    /// `[N, C, H, W] -> [N·heads, H·W, d]`.
    fn to_tokens<T: Scalar>(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        let [n, _, h, w] = g.value(x).dims4()?;
        let r = g.reshape(x, &[n * self.heads, self.head_dim(), h * w])?;
        g.transpose(r)
    }

    pub fn project_tokens<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
    ) -> Result<AttentionTriple> {
        let c = self.channels;
        let qkv = self.qkv.forward(g, store, x)?;
        let q = g.slice_channels(qkv, 0, c)?;
        let k = g.slice_channels(qkv, c, c)?;
        let v = g.slice_channels(qkv, 2 * c, c)?;
        let k_agg = match &self.dw_k {
            Some(dw) => dw.forward(g, store, k)?,
            None => k,
        };
        let v_agg = match &self.dw_v {
            Some(dw) => dw.forward(g, store, v)?,
            None => v,
        };
        Ok(AttentionTriple {
            q: self.to_tokens(g, q)?,
            k: self.to_tokens(g, k)?,
            v: self.to_tokens(g, v)?,
            k_agg: self.to_tokens(g, k_agg)?,
            v_agg: self.to_tokens(g, v_agg)?,
        })
    }

    /// Row-stochastic attention weights `[N·heads, HW, HW]`, normalised over keys.
    pub fn attention_weights<T: Scalar>(&self, g: &mut Graph<T>, t: &AttentionTriple) -> Result<Var> {
        let kt = g.transpose(t.k_agg)?;
        let scores = g.matmul(t.q, kt)?;
        let scaled = g.scale(scores, 1.0 / libm::sqrt(self.head_dim() as f64))?;
        g.softmax(scaled)
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let [n, c, h, w] = g.value(x).dims4()?;
        if c != self.channels {
            return Err(Error::config(format!("attention layer built for {} channels, got {c}", self.channels)));
        }
        let t = self.project_tokens(g, store, x)?;
        let attn = self.attention_weights(g, &t)?;
        let mixed = g.matmul(attn, t.v_agg)?;
        let back = g.transpose(mixed)?;
        let back = g.reshape(back, &[n, c, h, w])?;
        let out = self.project.forward(g, store, back)?;
        g.add(out, x)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        let mut total = self.qkv.cost(n, h, w)?.0 + self.project.cost(n, h, w)?.0;
        for dw in self.dw_k.iter().chain(&self.dw_v) {
            total += dw.cost(n, h, w)?.0;
        }
        let tokens = (h * w) as u64;
        // QK'^T and the product with V'
        total += 2 * (n * self.heads) as u64 * tokens * tokens * self.head_dim() as u64;
        Ok(total)
    }
}

/// Cascade multi-scale layer: 1×1 expansion to 4C, four equal groups each
/// filtered by a 3×3 depthwise conv after adding the previous group's
/// output, concat → GELU → GRN → 3×3 depthwise → 1×1 projection, residual.
#[derive(Clone, Debug)]
pub struct CmsfeLayer {
    pub expand: ConvLayer,
    pub cascade: [ConvLayer; 4],
    pub grn: GrnLayer,
    pub fuse_dw: ConvLayer,
    pub project: ConvLayer,
    pub channels: usize,
}

impl CmsfeLayer {
    pub fn build<T: Scalar>(b: &mut Builder<'_, T>, channels: usize) -> Result<Self> {
        let c = channels;
        Ok(Self {
            expand: b.pointwise("expand", c, 4 * c)?,
            cascade: [
                b.depthwise("cascade0", c, (3, 3), 1)?,
                b.depthwise("cascade1", c, (3, 3), 1)?,
                b.depthwise("cascade2", c, (3, 3), 1)?,
                b.depthwise("cascade3", c, (3, 3), 1)?,
            ],
            grn: b.grn("grn", 4 * c)?,
            fuse_dw: b.depthwise("fuse_dw", 4 * c, (3, 3), 1)?,
            project: b.pointwise("project", 4 * c, c)?,
            channels: c,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, z: Var) -> Result<Var> {
        let c = self.channels;
        let e = self.expand.forward(g, store, z)?;
        let mut outs = [e; 4];
        let mut prev: Option<Var> = None;
        for (i, dw) in self.cascade.iter().enumerate() {
            let zi = g.slice_channels(e, i * c, c)?;
            let input = match prev {
                Some(p) => g.add(zi, p)?,
                None => zi,
            };
            let y = dw.forward(g, store, input)?;
            outs[i] = y;
            prev = Some(y);
        }
        let cat = g.concat_channels(&outs)?;
        let act = g.gelu(cat)?;
        let norm = self.grn.forward(g, store, act)?;
        let fused = self.fuse_dw.forward(g, store, norm)?;
        let out = self.project.forward(g, store, fused)?;
        g.add(out, z)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        let mut total = self.expand.cost(n, h, w)?.0 + self.fuse_dw.cost(n, h, w)?.0 + self.project.cost(n, h, w)?.0;
        for dw in &self.cascade {
            total += dw.cost(n, h, w)?.0;
        }
        Ok(total)
    }
}

#[derive(Clone, Debug)]
pub struct MsiaBlock {
    pub cpe: CpeLayer,
    pub afg: AfgLayer,
    pub cmsfe: CmsfeLayer,
}

impl MsiaBlock {
    pub fn build<T: Scalar>(
        b: &mut Builder<'_, T>,
        channels: usize,
        heads: usize,
        variant: AttentionVariant,
    ) -> Result<Self> {
        Ok(Self {
            cpe: b.scope("cpe", |b| CpeLayer::build(b, channels))?,
            afg: b.scope("afg", |b| AfgLayer::build(b, channels, heads, variant))?,
            cmsfe: b.scope("cmsfe", |b| CmsfeLayer::build(b, channels))?,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let y = self.cpe.forward(g, store, x)?;
        let y = self.afg.forward(g, store, y)?;
        self.cmsfe.forward(g, store, y)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        Ok(self.cpe.macs(n, h, w)? + self.afg.macs(n, h, w)? + self.cmsfe.macs(n, h, w)?)
    }
}
