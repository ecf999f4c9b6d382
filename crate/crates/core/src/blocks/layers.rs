use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::ops::{Conv2dSpec, ConvGeometry, GRN_EPSILON};
use crate::param::{Initializer, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Graph, Var};
use crate::tensor::Tensor;

/// Registers parameters under a dotted name prefix.
pub struct Builder<'a, T> {
    pub store: &'a mut ParamStore<T>,
    pub init: &'a mut Initializer,
    prefix: String,
}

impl<'a, T: Scalar> Builder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, init: &'a mut Initializer) -> Self {
        Self { store, init, prefix: String::new() }
    }

    /// Runs `f` with `name` appended to the prefix.
    pub fn scope<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<R>) -> Result<R> {
        let saved = self.prefix.clone();
        self.prefix = self.path(name);
        let r = f(self);
        self.prefix = saved;
        r
    }

    fn path(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            String::from(name)
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn conv(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: (usize, usize),
        spec: Conv2dSpec,
    ) -> Result<ConvLayer> {
        if spec.groups == 0 || !cin.is_multiple_of(spec.groups) || !cout.is_multiple_of(spec.groups) {
            return Err(Error::config(format!(
                "{}: groups={} must divide in={cin} and out={cout}",
                self.path(name),
                spec.groups
            )));
        }
        let w = self.init.truncated_normal(&[cout, cin / spec.groups, kernel.0, kernel.1]);
        let weight = self.store.register(self.path(&format!("{name}.weight")), w)?;
        let bias = self.store.register(self.path(&format!("{name}.bias")), Tensor::zeros(&[cout]))?;
        Ok(ConvLayer { weight, bias, spec, in_channels: cin, out_channels: cout, kernel })
    }

    /// Depthwise, stride 1, spatial size preserved.
    pub fn depthwise(
        &mut self,
        name: &str,
        channels: usize,
        kernel: (usize, usize),
        dilation: usize,
    ) -> Result<ConvLayer> {
        self.conv(name, channels, channels, kernel, Conv2dSpec::same(kernel, (dilation, dilation), channels))
    }

    pub fn pointwise(&mut self, name: &str, cin: usize, cout: usize) -> Result<ConvLayer> {
        self.conv(name, cin, cout, (1, 1), Conv2dSpec::default())
    }

    pub fn grn(&mut self, name: &str, channels: usize) -> Result<GrnLayer> {
        let gamma = self.store.register(self.path(&format!("{name}.gamma")), Tensor::zeros(&[channels]))?;
        let beta = self.store.register(self.path(&format!("{name}.beta")), Tensor::zeros(&[channels]))?;
        Ok(GrnLayer { gamma, beta, channels, epsilon: GRN_EPSILON })
    }

    pub fn linear(&mut self, name: &str, fin: usize, fout: usize) -> Result<LinearLayer> {
        let w = self.init.truncated_normal(&[fout, fin]);
        let weight = self.store.register(self.path(&format!("{name}.weight")), w)?;
        let bias = self.store.register(self.path(&format!("{name}.bias")), Tensor::zeros(&[fout]))?;
        Ok(LinearLayer { weight, bias, in_features: fin, out_features: fout })
    }
}

/// Convolution with a bias; every convolution in the network has one.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub spec: Conv2dSpec,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
}

impl ConvLayer {
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.conv2d(x, w, Some(b), self.spec)
    }

    pub fn num_params(&self) -> usize {
        self.out_channels * (self.in_channels / self.spec.groups) * self.kernel.0 * self.kernel.1 + self.out_channels
    }

    /// `(MACs, output height, output width)` for an `n × in × h × w` input.
    pub fn cost(&self, n: usize, h: usize, w: usize) -> Result<(u64, usize, usize)> {
        let g = ConvGeometry::resolve(
            &[n, self.in_channels, h, w],
            &[self.out_channels, self.in_channels / self.spec.groups, self.kernel.0, self.kernel.1],
            self.spec,
        )?;
        Ok((g.macs(), g.oh, g.ow))
    }

    /// Sets the kernel to a centred unit impulse per output channel and the
    /// bias to zero. Depthwise layers become the identity.
    pub fn set_delta<T: Scalar>(&self, store: &mut ParamStore<T>) {
        let (kh, kw) = self.kernel;
        let per_out = (self.in_channels / self.spec.groups) * kh * kw;
        let p = store.get_mut(self.weight);
        p.value.fill(T::ZERO);
        for oc in 0..self.out_channels {
            p.value.data_mut()[oc * per_out + (kh / 2) * kw + kw / 2] = T::ONE;
        }
        store.get_mut(self.bias).value.fill(T::ZERO);
    }

    pub fn set_zero<T: Scalar>(&self, store: &mut ParamStore<T>) {
        store.get_mut(self.weight).value.fill(T::ZERO);
        store.get_mut(self.bias).value.fill(T::ZERO);
    }
}

#[derive(Clone, Debug)]
pub struct GrnLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub channels: usize,
    pub epsilon: f64,
}

impl GrnLayer {
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        g.grn(x, gamma, beta, self.epsilon)
    }

    pub fn set_zero<T: Scalar>(&self, store: &mut ParamStore<T>) {
        store.get_mut(self.gamma).value.fill(T::ZERO);
        store.get_mut(self.beta).value.fill(T::ZERO);
    }
}

#[derive(Clone, Debug)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl LinearLayer {
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        g.linear(x, w, b)
    }

    pub fn num_params(&self) -> usize {
        self.in_features * self.out_features + self.out_features
    }

    pub fn macs(&self, n: usize) -> u64 {
        (n * self.in_features * self.out_features) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_param_counts() {
        let mut store = ParamStore::<f32>::new();
        let mut init = Initializer::new(0);
        let mut b = Builder::new(&mut store, &mut init);
        let dw = b.depthwise("dw", 8, (3, 3), 1).unwrap();
        assert_eq!(dw.num_params(), 8 * 9 + 8);
        let head = b.linear("head", 320, 8).unwrap();
        assert_eq!(head.num_params(), 2568);
        assert_eq!(store.num_scalars(), 80 + 2568);
        assert!(store.id_of("dw.weight").is_some() && store.id_of("head.bias").is_some());
    }

    #[test]
    fn scoped_names() {
        let mut store = ParamStore::<f32>::new();
        let mut init = Initializer::new(0);
        let mut b = Builder::new(&mut store, &mut init);
        b.scope("stage3", |b| b.scope("block2", |b| b.pointwise("qkv", 4, 12))).unwrap();
        assert!(store.id_of("stage3.block2.qkv.weight").is_some());
    }

    #[test]
    fn bad_groups_fail_at_build() {
        let mut store = ParamStore::<f32>::new();
        let mut init = Initializer::new(0);
        let mut b = Builder::new(&mut store, &mut init);
        assert!(matches!(b.conv("c", 6, 8, (3, 3), Conv2dSpec::same((3, 3), (1, 1), 4)), Err(Error::Config(_))));
    }
}
