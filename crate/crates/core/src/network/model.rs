use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::blocks::{Builder, ConvLayer, LinearLayer, MsfdBlock, MsiaBlock};
use crate::error::{Error, Result};
use crate::network::config::{BlockKind, NetworkConfig};
use crate::ops::Conv2dSpec;
use crate::param::{Initializer, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Graph, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Block {
    Msfd(MsfdBlock),
    Msia(MsiaBlock),
}

impl Block {
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        match self {
            Block::Msfd(b) => b.forward(g, store, x),
            Block::Msia(b) => b.forward(g, store, x),
        }
    }

    pub fn macs(&self, n: usize, h: usize, w: usize) -> Result<u64> {
        match self {
            Block::Msfd(b) => b.macs(n, h, w),
            Block::Msia(b) => b.macs(n, h, w),
        }
    }
}

/// One resolution level. Stages after the first open with a stride-2 3×3
/// convolution that also changes the width.
#[derive(Clone, Debug)]
pub struct Stage {
    pub downsample: Option<ConvLayer>,
    pub blocks: Vec<Block>,
    pub channels: usize,
}

/// Classifier together with its parameter store.
#[derive(Clone, Debug)]
pub struct Model<T = f32> {
    pub config: NetworkConfig,
    pub params: ParamStore<T>,
    pub stem: [ConvLayer; 2],
    pub stages: Vec<Stage>,
    pub head: LinearLayer,
}

pub struct ForwardOutput {
    pub logits: Var,
    /// Output of the last block of each stage.
    pub stage_outputs: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    pub name: String,
    pub params: u64,
    pub macs: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: u64,
    pub macs: u64,
    pub input_shape: [usize; 4],
    /// `stem`, `stage1` … `stageK` (each including its downsampler), `head`.
    pub breakdown: Vec<StageCost>,
}

fn stride2(cin: usize, cout: usize) -> (usize, usize, usize, Conv2dSpec) {
    let spec = Conv2dSpec { padding: (1, 1), ..Conv2dSpec::default() }.with_stride((2, 2));
    (cin, cout, 3, spec)
}

impl<T: Scalar> Model<T> {
    /// Builds and initialises the network; the same seed gives bit-identical
    /// parameters.
    pub fn build(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut init = Initializer::new(seed);
        let mut b = Builder::new(&mut params, &mut init);

        let c1 = config.stage_channels[0];
        let (ci, co, k, spec) = stride2(3, c1 / 2);
        let conv1 = b.scope("stem", |b| b.conv("conv1", ci, co, (k, k), spec))?;
        let (ci, co, k, spec) = stride2(c1 / 2, c1);
        let conv2 = b.scope("stem", |b| b.conv("conv2", ci, co, (k, k), spec))?;

        let mut stages = Vec::with_capacity(config.num_stages());
        for s in 0..config.num_stages() {
            let c = config.stage_channels[s];
            let stage = b.scope(&format!("stage{}", s + 1), |b| {
                let downsample = if s > 0 {
                    let (ci, co, k, spec) = stride2(config.stage_channels[s - 1], c);
                    Some(b.conv("downsample", ci, co, (k, k), spec)?)
                } else {
                    None
                };
                let mut blocks = Vec::with_capacity(config.stage_depths[s]);
                for j in 0..config.stage_depths[s] {
                    let block = b.scope(&format!("block{}", j + 1), |b| match config.block_plan[s] {
                        BlockKind::Msfd => {
                            Ok(Block::Msfd(MsfdBlock::build(b, c, config.adw_kernel, config.mbms_variant)?))
                        }
                        BlockKind::Msia => {
                            Ok(Block::Msia(MsiaBlock::build(b, c, config.heads(s), config.attention_variant)?))
                        }
                    })?;
                    blocks.push(block);
                }
                Ok(Stage { downsample, blocks, channels: c })
            })?;
            stages.push(stage);
        }
        let last = *config.stage_channels.last().expect("validated non-empty");
        let head = b.linear("head", last, config.num_classes)?;
        Ok(Self { config, params, stem: [conv1, conv2], stages, head })
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            stem: self.stem.clone(),
            stages: self.stages.clone(),
            head: self.head.clone(),
        }
    }

    pub fn check_input(&self, shape: &[usize]) -> Result<()> {
        let s = self.config.input_size;
        if shape.len() != 4 || shape[1] != 3 || shape[2] != s || shape[3] != s || shape[0] == 0 {
            return Err(Error::usage(format!("model expects input [N, 3, {s}, {s}], got {shape:?}")));
        }
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph<T>, x: Var) -> Result<Var> {
        Ok(self.forward_traced(g, x)?.logits)
    }

    pub fn forward_traced(&self, g: &mut Graph<T>, x: Var) -> Result<ForwardOutput> {
        self.check_input(g.shape(x))?;
        let store = &self.params;
        let y = self.stem[0].forward(g, store, x)?;
        let y = g.gelu(y)?;
        let mut y = self.stem[1].forward(g, store, y)?;
        let mut stage_outputs = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            if let Some(ds) = &stage.downsample {
                y = ds.forward(g, store, y)?;
            }
            for block in &stage.blocks {
                y = block.forward(g, store, y)?;
            }
            stage_outputs.push(y);
        }
        let pooled = g.global_avg_pool(y)?;
        let logits = self.head.forward(g, store, pooled)?;
        Ok(ForwardOutput { logits, stage_outputs })
    }

    /// Logits `[N, classes]` without recording a tape.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let v = g.leaf(x.clone());
        let out = self.forward(&mut g, v)?;
        Ok(g.value(out).clone())
    }

    pub fn count_params(&self) -> u64 {
        self.params.num_scalars() as u64
    }

    /// Multiply-accumulates of one forward pass over `input_shape`
    /// (convolutions, attention matmuls and the head; element-wise ops are
    /// not counted).
    pub fn count_flops(&self, input_shape: [usize; 4]) -> Result<u64> {
        Ok(self.cost_report(input_shape)?.macs)
    }

    pub fn cost_report(&self, input_shape: [usize; 4]) -> Result<CostReport> {
        let [n, c, mut h, mut w] = input_shape;
        if c != 3 || n == 0 || h == 0 || w == 0 {
            return Err(Error::usage(format!("cost input must be [N>0, 3, H>0, W>0], got {input_shape:?}")));
        }
        let mut breakdown = Vec::new();
        let conv = |layer: &ConvLayer, h: &mut usize, w: &mut usize| -> Result<(u64, u64)> {
            let (m, oh, ow) = layer.cost(n, *h, *w)?;
            *h = oh;
            *w = ow;
            Ok((layer.num_params() as u64, m))
        };

        let (p1, m1) = conv(&self.stem[0], &mut h, &mut w)?;
        let (p2, m2) = conv(&self.stem[1], &mut h, &mut w)?;
        breakdown.push(StageCost { name: String::from("stem"), params: p1 + p2, macs: m1 + m2 });

        for (s, stage) in self.stages.iter().enumerate() {
            let (mut params, mut macs) = (0u64, 0u64);
            if let Some(ds) = &stage.downsample {
                let (p, m) = conv(ds, &mut h, &mut w)?;
                params += p;
                macs += m;
            }
            if stage.blocks.iter().any(|b| matches!(b, Block::Msfd(_))) && (h % 2 != 0 || w % 2 != 0) {
                return Err(Error::usage(format!(
                    "stage {} would run the wavelet transform at odd size {h}x{w}",
                    s + 1
                )));
            }
            for block in &stage.blocks {
                macs += block.macs(n, h, w)?;
            }
            let prefix = format!("stage{}.", s + 1);
            params += self
                .params
                .iter()
                .filter(|p| p.name.starts_with(&prefix) && !p.name.starts_with(&format!("{prefix}downsample.")))
                .map(|p| p.value.numel() as u64)
                .sum::<u64>();
            breakdown.push(StageCost { name: format!("stage{}", s + 1), params, macs });
        }
        breakdown.push(StageCost {
            name: String::from("head"),
            params: self.head.num_params() as u64,
            macs: self.head.macs(n),
        });
        Ok(CostReport {
            params: breakdown.iter().map(|s| s.params).sum(),
            macs: breakdown.iter().map(|s| s.macs).sum(),
            input_shape,
            breakdown,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_model_shapes_and_breakdown() {
        let m = Model::<f64>::build(NetworkConfig::reduced(), 1).unwrap();
        let mut g = Graph::inference();
        let x = g.leaf(Tensor::zeros(&[2, 3, 32, 32]));
        let out = m.forward_traced(&mut g, x).unwrap();
        assert_eq!(g.shape(out.logits), &[2, 8]);
        let shapes: Vec<_> = out.stage_outputs.iter().map(|v| g.shape(*v).to_vec()).collect();
        assert_eq!(shapes, [[2, 8, 8, 8], [2, 16, 4, 4], [2, 32, 2, 2], [2, 64, 1, 1]]);
        let r = m.cost_report([1, 3, 32, 32]).unwrap();
        assert_eq!(r.params, m.count_params());
        assert_eq!(r.breakdown.len(), 6);
    }

    #[test]
    fn wrong_input_is_usage_error() {
        let m = Model::<f32>::build(NetworkConfig::reduced(), 1).unwrap();
        let mut g = Graph::inference();
        let x = g.leaf(Tensor::zeros(&[1, 3, 30, 30]));
        assert!(matches!(m.forward(&mut g, x), Err(Error::Usage(_))));
    }
}
