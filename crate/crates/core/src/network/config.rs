use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::blocks::{AttentionVariant, MbmsVariant, HEAD_DIM};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Msfd,
    Msia,
}

/// Architecture description. Field names are the JSON config keys.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub stage_depths: Vec<usize>,
    pub stage_channels: Vec<usize>,
    pub num_classes: usize,
    /// Length of the asymmetric subband kernels: 7, 9 or 11.
    pub adw_kernel: usize,
    pub mbms_variant: MbmsVariant,
    pub attention_variant: AttentionVariant,
    pub block_plan: Vec<BlockKind>,
    pub input_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            stage_depths: vec![2, 3, 5, 2],
            stage_channels: vec![64, 128, 160, 224],
            num_classes: 8,
            adw_kernel: 9,
            mbms_variant: MbmsVariant::Dilated,
            attention_variant: AttentionVariant::Interaction,
            block_plan: vec![BlockKind::Msfd, BlockKind::Msfd, BlockKind::Msia, BlockKind::Msia],
            input_size: 224,
        }
    }
}

/// Output extent of a 3×3, stride-2, pad-1 convolution.
pub(crate) fn halve(extent: usize) -> usize {
    extent.div_ceil(2)
}

impl NetworkConfig {
    /// Small configuration for gradient checks and toy training runs.
    pub fn reduced() -> Self {
        Self { stage_depths: vec![1, 1, 1, 1], stage_channels: vec![8, 16, 32, 64], input_size: 32, ..Self::default() }
    }

    pub fn num_stages(&self) -> usize {
        self.stage_depths.len()
    }

    /// Spatial extent entering each stage.
    pub fn stage_resolutions(&self) -> Vec<usize> {
        let mut r = halve(halve(self.input_size));
        let mut out = Vec::with_capacity(self.num_stages());
        for s in 0..self.num_stages() {
            if s > 0 {
                r = halve(r);
            }
            out.push(r);
        }
        out
    }

    pub fn heads(&self, stage: usize) -> usize {
        self.stage_channels[stage] / HEAD_DIM
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.stage_depths.len();
        if n == 0 {
            return Err(Error::config("stage_depths must list at least one stage"));
        }
        if self.stage_channels.len() != n || self.block_plan.len() != n {
            return Err(Error::config(format!(
                "stage_depths ({n}), stage_channels ({}) and block_plan ({}) must have the same length",
                self.stage_channels.len(),
                self.block_plan.len()
            )));
        }
        if let Some(i) = self.stage_depths.iter().position(|&d| d == 0) {
            return Err(Error::config(format!("stage_depths[{i}] must be at least 1")));
        }
        if let Some(i) = self.stage_channels.iter().position(|&c| c == 0) {
            return Err(Error::config(format!("stage_channels[{i}] must be positive")));
        }
        if !self.stage_channels[0].is_multiple_of(2) {
            return Err(Error::config(format!(
                "stage_channels[0]={} must be even (the stem's first convolution produces half of it)",
                self.stage_channels[0]
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::config("num_classes must be positive"));
        }
        if ![7, 9, 11].contains(&self.adw_kernel) {
            return Err(Error::config(format!("adw_kernel must be 7, 9 or 11, got {}", self.adw_kernel)));
        }
        if self.input_size < 4 {
            return Err(Error::config(format!("input_size {} is too small", self.input_size)));
        }
        let res = self.stage_resolutions();
        for (s, kind) in self.block_plan.iter().enumerate() {
            let c = self.stage_channels[s];
            match kind {
                BlockKind::Msia if !c.is_multiple_of(HEAD_DIM) => {
                    return Err(Error::config(format!(
                        "stage_channels[{s}]={c} must be divisible by the attention head width {HEAD_DIM}"
                    )));
                }
                BlockKind::Msfd if !res[s].is_multiple_of(2) => {
                    return Err(Error::config(format!(
                        "stage {} runs MSFD blocks at odd resolution {}x{}; input_size {} does not give even extents",
                        s + 1,
                        res[s],
                        res[s],
                        self.input_size
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_with_expected_resolutions() {
        let c = NetworkConfig::default();
        c.validate().unwrap();
        assert_eq!(c.stage_resolutions(), vec![56, 28, 14, 7]);
        assert_eq!(NetworkConfig::reduced().stage_resolutions(), vec![8, 4, 2, 1]);
        NetworkConfig::reduced().validate().unwrap();
    }

    #[test]
    fn msia_channel_constraint_named() {
        let mut c = NetworkConfig::default();
        c.stage_channels[2] = 100;
        match c.validate() {
            Err(Error::Config(m)) => assert!(m.contains("stage_channels[2]=100"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_violations() {
        let c = NetworkConfig { adw_kernel: 5, ..NetworkConfig::default() };
        assert!(c.validate().is_err());

        let c = NetworkConfig { block_plan: vec![BlockKind::Msfd; 4], ..NetworkConfig::default() };
        // 7x7 in stage 4 is odd
        assert!(c.validate().is_err());

        let mut c = NetworkConfig::default();
        c.stage_depths.pop();
        assert!(c.validate().is_err());

        // 50, 25: stage 2 MSFD at odd size
        let c = NetworkConfig { input_size: 200, ..NetworkConfig::default() };
        assert!(c.validate().is_err());
    }
}
