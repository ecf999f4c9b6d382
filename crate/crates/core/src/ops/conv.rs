//! Direct 2-D convolution over `[N, C, H, W]` with groups, stride, zero
//! padding and dilation. Depthwise (`groups == C`), asymmetric (`1×k` /
//! `k×1`) and pointwise (`1×1`) layers are all special cases of the one
//! kernel.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
    pub groups: usize,
}

impl Default for Conv2dSpec {
    fn default() -> Self {
        Self { stride: (1, 1), padding: (0, 0), dilation: (1, 1), groups: 1 }
    }
}

impl Conv2dSpec {
    /// Stride-1 convolution whose output keeps the input's spatial size:
    /// `pad = dilation * (k - 1) / 2` on each axis (odd kernels only).
    pub fn same(kernel: (usize, usize), dilation: (usize, usize), groups: usize) -> Self {
        debug_assert!(kernel.0 % 2 == 1 && kernel.1 % 2 == 1, "`same` padding needs odd kernels");
        Self {
            stride: (1, 1),
            padding: (dilation.0 * (kernel.0 - 1) / 2, dilation.1 * (kernel.1 - 1) / 2),
            dilation,
            groups,
        }
    }

    pub fn with_stride(mut self, stride: (usize, usize)) -> Self {
        self.stride = stride;
        self
    }

    /// Output extent along one axis, `None` if the window never fits.
    pub fn output_extent(input: usize, kernel: usize, stride: usize, padding: usize, dilation: usize) -> Option<usize> {
        let span = dilation * (kernel - 1) + 1;
        let padded = input + 2 * padding;
        if padded < span || stride == 0 {
            return None;
        }
        Some((padded - span) / stride + 1)
    }
}

/// Resolved extents of one convolution call.
#[derive(Clone, Copy, Debug)]
pub struct ConvGeometry {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
    pub spec: Conv2dSpec,
}

impl ConvGeometry {
    pub fn resolve(x_shape: &[usize], w_shape: &[usize], spec: Conv2dSpec) -> Result<Self> {
        let [n, cin, h, w] = match x_shape {
            &[n, c, h, w] => [n, c, h, w],
            _ => return Err(Error::config(format!("conv2d input must be [N,C,H,W], got {x_shape:?}"))),
        };
        let [cout, cin_g, kh, kw] = match w_shape {
            &[a, b, c, d] => [a, b, c, d],
            _ => return Err(Error::config(format!("conv2d weight must be [Cout,Cin/g,kh,kw], got {w_shape:?}"))),
        };
        let g = spec.groups;
        if g == 0 || cin % g != 0 || cout % g != 0 {
            return Err(Error::config(format!("conv2d groups={g} must divide Cin={cin} and Cout={cout}")));
        }
        if cin_g != cin / g {
            return Err(Error::config(format!(
                "conv2d weight {w_shape:?} expects {cin_g} input channels per group, input has {} (Cin={cin}, groups={g})",
                cin / g
            )));
        }
        if spec.stride.0 == 0 || spec.stride.1 == 0 || spec.dilation.0 == 0 || spec.dilation.1 == 0 {
            return Err(Error::config("conv2d stride and dilation must be positive"));
        }
        let oh = Conv2dSpec::output_extent(h, kh, spec.stride.0, spec.padding.0, spec.dilation.0);
        let ow = Conv2dSpec::output_extent(w, kw, spec.stride.1, spec.padding.1, spec.dilation.1);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(Error::config(format!("conv2d kernel {kh}x{kw} with {spec:?} does not fit a {h}x{w} input")));
        };
        Ok(Self { n, cin, h, w, cout, kh, kw, oh, ow, spec })
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.n, self.cout, self.oh, self.ow]
    }

    /// Multiply-accumulates for one forward pass.
    pub fn macs(&self) -> u64 {
        (self.n * self.oh * self.ow * self.cout * (self.cin / self.spec.groups) * self.kh * self.kw) as u64
    }
}

/// Range of output indices `o` for which `o*stride + offset - pad` lands
/// inside `[0, input)`.
#[inline]
fn valid_outputs(out_len: usize, input: usize, stride: usize, pad: usize, offset: usize) -> (usize, usize) {
    let lo = if pad > offset { (pad - offset).div_ceil(stride) } else { 0 };
    if input + pad < offset + 1 {
        return (0, 0);
    }
    let hi = ((input - 1 + pad - offset) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// Calls `f(oc, ic_in_group, ic, ki, kj, oh_range, ow_range)` for every
/// kernel tap, in a fixed order.
#[inline]
fn for_each_tap(
    g: &ConvGeometry,
    mut f: impl FnMut(usize, usize, usize, usize, usize, (usize, usize), (usize, usize)),
) {
    let s = g.spec;
    let cin_g = g.cin / s.groups;
    let cout_g = g.cout / s.groups;
    for grp in 0..s.groups {
        for oc in grp * cout_g..(grp + 1) * cout_g {
            for icg in 0..cin_g {
                let ic = grp * cin_g + icg;
                for ki in 0..g.kh {
                    let rows = valid_outputs(g.oh, g.h, s.stride.0, s.padding.0, ki * s.dilation.0);
                    if rows.0 >= rows.1 {
                        continue;
                    }
                    for kj in 0..g.kw {
                        let cols = valid_outputs(g.ow, g.w, s.stride.1, s.padding.1, kj * s.dilation.1);
                        if cols.0 >= cols.1 {
                            continue;
                        }
                        f(oc, icg, ic, ki, kj, rows, cols);
                    }
                }
            }
        }
    }
}

fn check_bias<T: Scalar>(bias: Option<&Tensor<T>>, cout: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::config(format!("conv2d bias must have shape [{cout}], got {:?}", b.shape())));
        }
    }
    Ok(())
}

pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv2dSpec,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::resolve(x.shape(), weight.shape(), spec)?;
    check_bias(bias, g.cout)?;
    let (h, w, oh, ow) = (g.h, g.w, g.oh, g.ow);
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (dh, dw) = spec.dilation;
    let cin_g = g.cin / spec.groups;
    let xd = x.data();
    let wd = weight.data();
    let mut out = vec![T::ZERO; g.n * g.cout * oh * ow];

    for n in 0..g.n {
        let out_n = &mut out[n * g.cout * oh * ow..(n + 1) * g.cout * oh * ow];
        if let Some(b) = bias {
            for (oc, plane) in out_n.chunks_exact_mut(oh * ow).enumerate() {
                plane.fill(b.data()[oc]);
            }
        }
        let x_n = &xd[n * g.cin * h * w..(n + 1) * g.cin * h * w];
        for_each_tap(&g, |oc, icg, ic, ki, kj, rows, cols| {
            let wv = wd[((oc * cin_g + icg) * g.kh + ki) * g.kw + kj];
            let plane = &mut out_n[oc * oh * ow..(oc + 1) * oh * ow];
            let xin = &x_n[ic * h * w..(ic + 1) * h * w];
            for o_r in rows.0..rows.1 {
                let ir = o_r * sh + ki * dh - ph;
                let orow = &mut plane[o_r * ow..(o_r + 1) * ow];
                let irow = &xin[ir * w..(ir + 1) * w];
                if sw == 1 {
                    let start = cols.0 + kj * dw - pw;
                    let len = cols.1 - cols.0;
                    for (o, &i) in orow[cols.0..cols.1].iter_mut().zip(&irow[start..start + len]) {
                        *o += wv * i;
                    }
                } else {
                    for o_c in cols.0..cols.1 {
                        orow[o_c] += wv * irow[o_c * sw + kj * dw - pw];
                    }
                }
            }
        });
    }
    Tensor::new(&g.output_shape(), out)
}

/// Gradients of [`conv2d`] with respect to input, weight and (if present)
/// bias, given the upstream gradient of the output.
pub struct Conv2dGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    with_bias: bool,
    spec: Conv2dSpec,
    grad_out: &Tensor<T>,
) -> Result<Conv2dGrads<T>> {
    let g = ConvGeometry::resolve(x.shape(), weight.shape(), spec)?;
    if grad_out.shape() != g.output_shape() {
        return Err(Error::config(format!(
            "conv2d upstream gradient has shape {:?}, expected {:?}",
            grad_out.shape(),
            g.output_shape()
        )));
    }
    let (h, w, oh, ow) = (g.h, g.w, g.oh, g.ow);
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (dh, dw) = spec.dilation;
    let cin_g = g.cin / spec.groups;
    let xd = x.data();
    let wd = weight.data();
    let gd = grad_out.data();
    let mut dx = vec![T::ZERO; x.numel()];
    let mut dwt = vec![T::ZERO; weight.numel()];

    for n in 0..g.n {
        let g_n = &gd[n * g.cout * oh * ow..(n + 1) * g.cout * oh * ow];
        let x_n = &xd[n * g.cin * h * w..(n + 1) * g.cin * h * w];
        let dx_n = &mut dx[n * g.cin * h * w..(n + 1) * g.cin * h * w];
        for_each_tap(&g, |oc, icg, ic, ki, kj, rows, cols| {
            let widx = ((oc * cin_g + icg) * g.kh + ki) * g.kw + kj;
            let wv = wd[widx];
            let gplane = &g_n[oc * oh * ow..(oc + 1) * oh * ow];
            let xin = &x_n[ic * h * w..(ic + 1) * h * w];
            let dxin = &mut dx_n[ic * h * w..(ic + 1) * h * w];
            let mut acc = T::ZERO;
            for o_r in rows.0..rows.1 {
                let ir = o_r * sh + ki * dh - ph;
                let grow = &gplane[o_r * ow..(o_r + 1) * ow];
                let irow = &xin[ir * w..(ir + 1) * w];
                let drow = &mut dxin[ir * w..(ir + 1) * w];
                for o_c in cols.0..cols.1 {
                    let ic_col = o_c * sw + kj * dw - pw;
                    let gv = grow[o_c];
                    acc += gv * irow[ic_col];
                    drow[ic_col] += wv * gv;
                }
            }
            dwt[widx] += acc;
        });
    }

    let bias = with_bias.then(|| {
        let mut db = vec![T::ZERO; g.cout];
        for n in 0..g.n {
            for (oc, slot) in db.iter_mut().enumerate() {
                let start = (n * g.cout + oc) * oh * ow;
                *slot += gd[start..start + oh * ow].iter().copied().sum::<T>();
            }
        }
        Tensor::new(&[g.cout], db)
    });

    Ok(Conv2dGrads {
        input: Tensor::new(x.shape(), dx)?,
        weight: Tensor::new(weight.shape(), dwt)?,
        bias: bias.transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::oracle;
    use crate::verify::rng::TestRng;

    fn delta_kernel(c: usize, k: usize) -> Tensor<f64> {
        let mut w = Tensor::zeros(&[c, 1, k, k]);
        for ch in 0..c {
            w.data_mut()[ch * k * k + (k * k) / 2] = 1.0;
        }
        w
    }

    #[test]
    fn depthwise_delta_kernel_is_identity() {
        let mut rng = TestRng::new(1);
        let x = rng.tensor(&[2, 3, 5, 6]);
        let y =
            conv2d(&x, &delta_kernel(3, 3), Some(&Tensor::zeros(&[3])), Conv2dSpec::same((3, 3), (1, 1), 3)).unwrap();
        assert_eq!(y, x);
        // dilated taps still centred
        let y = conv2d(&x, &delta_kernel(3, 3), None, Conv2dSpec::same((3, 3), (2, 2), 3)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_on_constant_input_sums_nine_taps() {
        let x = Tensor::<f64>::full(&[1, 2, 5, 5], 1.5);
        let w = Tensor::full(&[2, 1, 3, 3], 1.0);
        let y = conv2d(&x, &w, Some(&Tensor::zeros(&[2])), Conv2dSpec::same((3, 3), (1, 1), 2)).unwrap();
        // interior pixel (2,2) of channel 1
        assert_eq!(y.data()[25 + 2 * 5 + 2], 9.0 * 1.5);
        // corner sees only four taps
        assert_eq!(y.data()[0], 4.0 * 1.5);
    }

    #[test]
    fn asymmetric_depthwise_matches_direct_loops() {
        let mut rng = TestRng::new(7);
        let x = rng.tensor(&[1, 4, 6, 6]);
        let w = rng.tensor(&[4, 1, 1, 9]);
        let b = rng.tensor(&[4]);
        let spec = Conv2dSpec { padding: (0, 4), groups: 4, ..Default::default() };
        let got = conv2d(&x, &w, Some(&b), spec).unwrap();
        let want = oracle::conv2d_naive(&x, &w, Some(&b), spec);
        assert_eq!(got.shape(), &[1, 4, 6, 6]);
        assert!(got.max_rel_diff(&want) < 1e-6);
    }

    #[test]
    fn strided_grouped_dilated_matches_direct_loops() {
        let mut rng = TestRng::new(11);
        for &(stride, pad, dil, groups) in &[(2, 1, 1, 1), (1, 2, 2, 2), (2, 3, 3, 4), (3, 0, 1, 2)] {
            let x = rng.tensor(&[2, 4, 9, 7]);
            let w = rng.tensor(&[8, 4 / groups, 3, 3]);
            let b = rng.tensor(&[8]);
            let spec = Conv2dSpec { stride: (stride, stride), padding: (pad, pad), dilation: (dil, dil), groups };
            let got = conv2d(&x, &w, Some(&b), spec).unwrap();
            let want = oracle::conv2d_naive(&x, &w, Some(&b), spec);
            assert_eq!(got.shape(), want.shape());
            assert!(got.max_rel_diff(&want) < 1e-12, "{spec:?}");
        }
    }

    #[test]
    fn output_extent_formula() {
        let g = ConvGeometry::resolve(
            &[1, 3, 224, 224],
            &[20, 3, 3, 3],
            Conv2dSpec { stride: (2, 2), padding: (1, 1), ..Default::default() },
        )
        .unwrap();
        assert_eq!((g.oh, g.ow), (112, 112));
        let g = ConvGeometry::resolve(
            &[1, 3, 7, 7],
            &[3, 1, 3, 3],
            Conv2dSpec { stride: (2, 2), padding: (1, 1), groups: 3, ..Default::default() },
        )
        .unwrap();
        assert_eq!((g.oh, g.ow), (4, 4));
    }

    #[test]
    fn configuration_errors() {
        let x = Tensor::<f32>::zeros(&[1, 6, 4, 4]);
        // Cin not divisible by groups
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(&[6, 1, 3, 3]), None, Conv2dSpec { groups: 4, ..Default::default() }),
            Err(Error::Config(_))
        ));
        // weight channel mismatch
        assert!(conv2d(&x, &Tensor::zeros(&[6, 2, 3, 3]), None, Conv2dSpec::same((3, 3), (1, 1), 6)).is_err());
        // wrong bias length
        assert!(conv2d(
            &x,
            &Tensor::zeros(&[6, 1, 3, 3]),
            Some(&Tensor::zeros(&[5])),
            Conv2dSpec::same((3, 3), (1, 1), 6)
        )
        .is_err());
        // kernel larger than padded input
        assert!(
            conv2d(&x, &Tensor::zeros(&[6, 1, 7, 7]), None, Conv2dSpec { groups: 6, ..Default::default() }).is_err()
        );
    }

    #[test]
    fn macs_closed_form() {
        let pw = ConvGeometry::resolve(&[1, 4, 5, 5], &[8, 4, 1, 1], Conv2dSpec::default()).unwrap();
        assert_eq!(pw.macs(), 800);
        let dw = ConvGeometry::resolve(&[1, 8, 5, 5], &[8, 1, 3, 3], Conv2dSpec::same((3, 3), (1, 1), 8)).unwrap();
        assert_eq!(dw.macs(), 1800);
    }
}
