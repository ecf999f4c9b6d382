use alloc::format;

use crate::blocks::layers::{Builder, ConvLayer, GrnLayer};
use crate::blocks::MbmsVariant;
use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Graph, SubbandVars, Var};

/// Frequency-domain feature extraction: Haar analysis, one depthwise
/// filter per subband (3×3 on LL and HH, `1×k` on LH, `k×1` on HL), Haar
/// synthesis, residual add.
#[derive(Clone, Debug)]
pub struct FdfeLayer {
    pub dw_ll: ConvLayer,
    pub adw_lh: ConvLayer,
    pub adw_hl: ConvLayer,
    pub dw_hh: ConvLayer,
    pub channels: usize,
}

impl FdfeLayer {
    pub fn build<T: Scalar>(b: &mut Builder<'_, T>, channels: usize, adw_kernel: usize) -> Result<Self> {
        Ok(Self {
            dw_ll: b.depthwise("dw_ll", channels, (3, 3), 1)?,
            adw_lh: b.depthwise("adw_lh", channels, (1, adw_kernel), 1)?,
            adw_hl: b.depthwise("adw_hl", channels, (adw_kernel, 1), 1)?,
            dw_hh: b.depthwise("dw_hh", channels, (3, 3), 1)?,
            channels,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let [_, _, h, w] = g.value(x).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::config(format!("frequency-domain layer needs even H and W, got {h}x{w}")));
        }
        let bands = g.dwt2(x)?;
        let filtered = SubbandVars {
            ll: self.dw_ll.forward(g, store, bands.ll)?,
            lh: self.adw_lh.forward(g, store, bands.lh)?,
            hl: self.adw_hl.forward(g, store, bands.hl)?,
            hh: self.dw_hh.forward(g, store, bands.hh)?,
        };
        let rec = g.idwt2(filtered)?;
        g.add(rec, x)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        let (h2, w2) = (h / 2, w / 2);
        let mut total = 0;
        for conv in [&self.dw_ll, &self.adw_lh, &self.adw_hl, &self.dw_hh] {
            total += conv.cost(n, h2, w2)?.0;
        }
        Ok(total)
    }

    pub fn subband_convs(&self) -> [&ConvLayer; 4] {
        [&self.dw_ll, &self.adw_lh, &self.adw_hl, &self.dw_hh]
    }
}

/// Multi-branch multi-scale layer: 1×1 expansion to 4C, split 2C:C:C into
/// three depthwise branches, concat → GELU → GRN → 3×3 depthwise →
/// 1×1 projection to C, residual add.
#[derive(Clone, Debug)]
pub struct MbmsLayer {
    pub expand: ConvLayer,
    pub b1: ConvLayer,
    pub b2: ConvLayer,
    pub b3: ConvLayer,
    pub grn: GrnLayer,
    pub fuse_dw: ConvLayer,
    pub project: ConvLayer,
    pub channels: usize,
}

impl MbmsLayer {
    pub fn build<T: Scalar>(b: &mut Builder<'_, T>, channels: usize, variant: MbmsVariant) -> Result<Self> {
        let c = channels;
        let expand = b.pointwise("expand", c, 4 * c)?;
        let b1 = b.depthwise("b1", 2 * c, (3, 3), 1)?;
        let (b2, b3) = match variant {
            MbmsVariant::Dilated => (b.depthwise("b2", c, (3, 3), 2)?, b.depthwise("b3", c, (3, 3), 3)?),
            MbmsVariant::LargeKernel => (b.depthwise("b2", c, (5, 5), 1)?, b.depthwise("b3", c, (7, 7), 1)?),
        };
        Ok(Self {
            expand,
            b1,
            b2,
            b3,
            grn: b.grn("grn", 4 * c)?,
            fuse_dw: b.depthwise("fuse_dw", 4 * c, (3, 3), 1)?,
            project: b.pointwise("project", 4 * c, c)?,
            channels: c,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, z: Var) -> Result<Var> {
        let c = self.channels;
        let e = self.expand.forward(g, store, z)?;
        let z1 = g.slice_channels(e, 0, 2 * c)?;
        let z2 = g.slice_channels(e, 2 * c, c)?;
        let z3 = g.slice_channels(e, 3 * c, c)?;
        let y1 = self.b1.forward(g, store, z1)?;
        let y2 = self.b2.forward(g, store, z2)?;
        let y3 = self.b3.forward(g, store, z3)?;
        let cat = g.concat_channels(&[y1, y2, y3])?;
        let act = g.gelu(cat)?;
        let norm = self.grn.forward(g, store, act)?;
        let fused = self.fuse_dw.forward(g, store, norm)?;
        let out = self.project.forward(g, store, fused)?;
        g.add(out, z)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        let mut total = 0;
        for conv in [&self.expand, &self.b1, &self.b2, &self.b3, &self.fuse_dw, &self.project] {
            total += conv.cost(n, h, w)?.0;
        }
        Ok(total)
    }
}

#[derive(Clone, Debug)]
pub struct MsfdBlock {
    pub fdfe: FdfeLayer,
    pub mbms: MbmsLayer,
}

impl MsfdBlock {
    pub fn build<T: Scalar>(
        b: &mut Builder<'_, T>,
        channels: usize,
        adw_kernel: usize,
        variant: MbmsVariant,
    ) -> Result<Self> {
        Ok(Self {
            fdfe: b.scope("fdfe", |b| FdfeLayer::build(b, channels, adw_kernel))?,
            mbms: b.scope("mbms", |b| MbmsLayer::build(b, channels, variant))?,
        })
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let z = self.fdfe.forward(g, store, x)?;
        self.mbms.forward(g, store, z)
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        Ok(self.fdfe.macs(n, h, w)? + self.mbms.macs(n, h, w)?)
    }
}
