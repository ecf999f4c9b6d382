//! Straightforward reference implementations. None of these call into
//! [`crate::ops`], [`crate::wavelet`] or [`crate::tape`]; they exist to be
//! compared against those.

use alloc::vec;
use alloc::vec::Vec;

use crate::ops::Conv2dSpec;
use crate::tensor::Tensor;
use crate::wavelet::SubbandSet;

/// Six nested loops over (n, oc, oh, ow, ic, ki, kj) with explicit bounds
/// checks against the zero-padded input.
pub fn conv2d_naive(x: &Tensor<f64>, w: &Tensor<f64>, b: Option<&Tensor<f64>>, spec: Conv2dSpec) -> Tensor<f64> {
    let s = x.shape();
    let (n, cin, h, wd) = (s[0], s[1], s[2], s[3]);
    let ws = w.shape();
    let (cout, cin_g, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    let groups = spec.groups;
    let cout_g = cout / groups;
    let oh = (h + 2 * spec.padding.0 - spec.dilation.0 * (kh - 1) - 1) / spec.stride.0 + 1;
    let ow = (wd + 2 * spec.padding.1 - spec.dilation.1 * (kw - 1) - 1) / spec.stride.1 + 1;
    let mut out = vec![0.0; n * cout * oh * ow];
    for bn in 0..n {
        for oc in 0..cout {
            let g = oc / cout_g;
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b.data()[oc]);
                    for icg in 0..cin_g {
                        let ic = g * cin_g + icg;
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let iy = (y * spec.stride.0 + ki * spec.dilation.0) as isize - spec.padding.0 as isize;
                                let ix = (xo * spec.stride.1 + kj * spec.dilation.1) as isize - spec.padding.1 as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                let xv = x.data()[((bn * cin + ic) * h + iy as usize) * wd + ix as usize];
                                let wv = w.data()[((oc * cin_g + icg) * kh + ki) * kw + kj];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((bn * cout + oc) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    Tensor::new(&[n, cout, oh, ow], out).unwrap()
}

pub fn matmul_naive(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let r = a.rank();
    let (m, k, n) = (a.shape()[r - 2], a.shape()[r - 1], b.shape()[r - 1]);
    let batch = a.numel() / (m * k);
    let mut out = vec![0.0; batch * m * n];
    for bi in 0..batch {
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.data()[bi * m * k + i * k + p] * b.data()[bi * k * n + p * n + j];
                }
                out[bi * m * n + i * n + j] = acc;
            }
        }
    }
    let mut shape = a.shape().to_vec();
    shape[r - 1] = n;
    Tensor::new(&shape, out).unwrap()
}

/// GRN written directly from its definition, one element at a time.
pub fn grn_naive(x: &Tensor<f64>, gamma: &Tensor<f64>, beta: &Tensor<f64>, eps: f64) -> Tensor<f64> {
    let s = x.shape();
    let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
    let mut out = x.clone();
    for bn in 0..n {
        let mut norms = vec![0.0; c];
        for (ch, norm) in norms.iter_mut().enumerate() {
            let mut ss = 0.0;
            for p in 0..hw {
                let v = x.data()[(bn * c + ch) * hw + p];
                ss += v * v;
            }
            *norm = libm::sqrt(ss);
        }
        let mean = norms.iter().sum::<f64>() / c as f64;
        for ch in 0..c {
            let nx = norms[ch] / (mean + eps);
            for p in 0..hw {
                let i = (bn * c + ch) * hw + p;
                let v = x.data()[i];
                out.data_mut()[i] = gamma.data()[ch] * (v * nx) + beta.data()[ch] + v;
            }
        }
    }
    out
}

/// Rows are the LL, LH, HL, HH analysis vectors over `[a, b, c, d]`.
pub fn haar_block_matrix() -> [[f64; 4]; 4] {
    [[0.5, 0.5, 0.5, 0.5], [0.5, 0.5, -0.5, -0.5], [0.5, -0.5, 0.5, -0.5], [0.5, -0.5, -0.5, 0.5]]
}

pub fn apply_block_matrix(m: &[[f64; 4]; 4], v: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(&v).map(|(a, b)| a * b).sum();
    }
    out
}

/// Haar analysis by multiplying every 2×2 block with [`haar_block_matrix`].
pub fn dwt2_via_matrix(x: &Tensor<f64>) -> SubbandSet<f64> {
    let s = x.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let m = haar_block_matrix();
    let half = [n, c, h / 2, w / 2];
    let mut bands: Vec<Tensor<f64>> = (0..4).map(|_| Tensor::zeros(&half)).collect();
    for bn in 0..n {
        for ch in 0..c {
            for i in 0..h / 2 {
                for j in 0..w / 2 {
                    let at = |r: usize, q: usize| x.data()[((bn * c + ch) * h + r) * w + q];
                    let v = [at(2 * i, 2 * j), at(2 * i, 2 * j + 1), at(2 * i + 1, 2 * j), at(2 * i + 1, 2 * j + 1)];
                    let r = apply_block_matrix(&m, v);
                    for k in 0..4 {
                        bands[k].data_mut()[((bn * c + ch) * (h / 2) + i) * (w / 2) + j] = r[k];
                    }
                }
            }
        }
    }
    let hh = bands.pop().unwrap();
    let hl = bands.pop().unwrap();
    let lh = bands.pop().unwrap();
    let ll = bands.pop().unwrap();
    SubbandSet { ll, lh, hl, hh }
}

/// Weights of a plain multi-head self-attention layer with a residual:
/// `out = proj(concat_h softmax(q_h k_hᵀ / √d) v_h) + x`.
pub struct VanillaAttention<'a> {
    /// `[3C, C]` stacked query/key/value projection, rows `q | k | v`.
    pub qkv_weight: &'a [f64],
    pub qkv_bias: &'a [f64],
    /// `[C, C]`.
    pub proj_weight: &'a [f64],
    pub proj_bias: &'a [f64],
    pub heads: usize,
}

impl VanillaAttention<'_> {
    /// `x: [N, C, H, W]`; tokens are the H·W spatial positions.
    pub fn forward(&self, x: &Tensor<f64>) -> Tensor<f64> {
        let s = x.shape();
        let (n, c, t) = (s[0], s[1], s[2] * s[3]);
        let d = c / self.heads;
        let mut out = x.clone();
        for bn in 0..n {
            // token-major features: tok[p][ch]
            let tok: Vec<Vec<f64>> =
                (0..t).map(|p| (0..c).map(|ch| x.data()[(bn * c + ch) * t + p]).collect()).collect();
            let project = |row: usize, feat: &[f64]| -> f64 {
                self.qkv_bias[row] + (0..c).map(|j| self.qkv_weight[row * c + j] * feat[j]).sum::<f64>()
            };
            let q: Vec<Vec<f64>> = tok.iter().map(|f| (0..c).map(|r| project(r, f)).collect()).collect();
            let k: Vec<Vec<f64>> = tok.iter().map(|f| (0..c).map(|r| project(c + r, f)).collect()).collect();
            let v: Vec<Vec<f64>> = tok.iter().map(|f| (0..c).map(|r| project(2 * c + r, f)).collect()).collect();
            let mut mixed = vec![vec![0.0; c]; t];
            for h in 0..self.heads {
                let lo = h * d;
                for i in 0..t {
                    let mut scores: Vec<f64> = (0..t)
                        .map(|j| (lo..lo + d).map(|e| q[i][e] * k[j][e]).sum::<f64>() / libm::sqrt(d as f64))
                        .collect();
                    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for sc in scores.iter_mut() {
                        *sc = libm::exp(*sc - m);
                        z += *sc;
                    }
                    for e in lo..lo + d {
                        mixed[i][e] = (0..t).map(|j| scores[j] / z * v[j][e]).sum();
                    }
                }
            }
            for p in 0..t {
                for ch in 0..c {
                    let y =
                        self.proj_bias[ch] + (0..c).map(|j| self.proj_weight[ch * c + j] * mixed[p][j]).sum::<f64>();
                    out.data_mut()[(bn * c + ch) * t + p] += y;
                }
            }
        }
        out
    }
}

/// Per-class one-vs-rest counts read off a `K×K` row-major confusion matrix
/// (row = true class) by visiting every cell.
pub fn one_vs_rest_counts(matrix: &[u64], k: usize, class: usize) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for t in 0..k {
        for p in 0..k {
            let v = matrix[t * k + p];
            match (t == class, p == class) {
                (true, true) => tp += v,
                (false, true) => fp += v,
                (true, false) => fn_ += v,
                (false, false) => tn += v,
            }
        }
    }
    (tp, fp, fn_, tn)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `[accuracy, precision, recall, specificity, f1]` for one class.
pub fn binary_metrics(tp: u64, fp: u64, fn_: u64, tn: u64) -> [f64; 5] {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    [
        ratio(tp + tn, tp + tn + fp + fn_),
        ratio(tp, tp + fp),
        ratio(tp, tp + fn_),
        ratio(tn, tn + fp),
        ratio(2.0 * tp, 2.0 * tp + fp + fn_),
    ]
}

/// Macro `[precision, recall, specificity, f1]` by brute force.
pub fn macro_metrics(matrix: &[u64], k: usize) -> [f64; 4] {
    let mut sums = [0.0; 4];
    for class in 0..k {
        let (tp, fp, fn_, tn) = one_vs_rest_counts(matrix, k, class);
        let m = binary_metrics(tp, fp, fn_, tn);
        for i in 0..4 {
            sums[i] += m[i + 1];
        }
    }
    sums.map(|s| s / k as f64)
}
