#![allow(dead_code)]

use dfeia_core::blocks::{Builder, ConvLayer, GrnLayer};
use dfeia_core::param::Initializer;
use dfeia_core::verify::oracle::{conv2d_naive, grn_naive, haar_block_matrix};
use dfeia_core::wavelet::SubbandSet;
use dfeia_core::{ParamStore, Result, Tensor};

/// Builds something against a fresh f64 store, then fills every parameter
/// (GRN scales included) with uniform noise of the given scale.
pub fn build_random<R>(
    seed: u64,
    scale: f64,
    f: impl FnOnce(&mut Builder<'_, f64>) -> Result<R>,
) -> (R, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(seed);
    let r = f(&mut Builder::new(&mut store, &mut init)).unwrap();
    store.randomize(seed.wrapping_add(1), scale);
    (r, store)
}

pub fn conv(store: &ParamStore<f64>, layer: &ConvLayer, x: &Tensor<f64>) -> Tensor<f64> {
    conv2d_naive(x, store.value(layer.weight), Some(store.value(layer.bias)), layer.spec)
}

pub fn grn(store: &ParamStore<f64>, layer: &GrnLayer, x: &Tensor<f64>) -> Tensor<f64> {
    grn_naive(x, store.value(layer.gamma), store.value(layer.beta), layer.epsilon)
}

pub fn gelu(x: &Tensor<f64>) -> Tensor<f64> {
    x.map(|v| 0.5 * v * (1.0 + libm::erf(v / core::f64::consts::SQRT_2)))
}

pub fn add(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    Tensor::from_fn(a.shape(), |i| a.data()[i] + b.data()[i])
}

/// Channels `[start, start+len)` by explicit indexing.
pub fn slice(x: &Tensor<f64>, start: usize, len: usize) -> Tensor<f64> {
    let s = x.shape();
    let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
    Tensor::from_fn(&[n, len, s[2], s[3]], |i| {
        let (b, rest) = (i / (len * hw), i % (len * hw));
        x.data()[(b * c + start) * hw + rest]
    })
}

pub fn concat(parts: &[&Tensor<f64>]) -> Tensor<f64> {
    let s = parts[0].shape();
    let (n, hw) = (s[0], s[2] * s[3]);
    let c: usize = parts.iter().map(|p| p.shape()[1]).sum();
    let mut data = Vec::with_capacity(n * c * hw);
    for b in 0..n {
        for p in parts {
            let pc = p.shape()[1];
            data.extend_from_slice(&p.data()[b * pc * hw..(b + 1) * pc * hw]);
        }
    }
    Tensor::new(&[n, c, s[2], s[3]], data).unwrap()
}

/// Haar synthesis by multiplying each coefficient quadruple with the
/// transpose of the analysis matrix.
pub fn idwt_via_matrix(bands: &SubbandSet<f64>) -> Tensor<f64> {
    let s = bands.ll.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let m = haar_block_matrix();
    let mut out = Tensor::zeros(&[n, c, 2 * h, 2 * w]);
    for b in 0..n {
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let at = |t: &Tensor<f64>| t.data()[((b * c + ch) * h + i) * w + j];
                    let coef = [at(&bands.ll), at(&bands.lh), at(&bands.hl), at(&bands.hh)];
                    for (p, (di, dj)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                        let v: f64 = (0..4).map(|k| m[k][p] * coef[k]).sum();
                        out.data_mut()[((b * c + ch) * 2 * h + 2 * i + di) * 2 * w + 2 * j + dj] = v;
                    }
                }
            }
        }
    }
    out
}
