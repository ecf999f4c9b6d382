//! Central finite-difference check of taped gradients in 64-bit precision.
//!
//! The function under test maps inputs (and parameters read from a store) to
//! an output tensor `y`. The check contracts it to the scalar
//! `L = Σ y ⊙ R` with a fixed random `R`, differentiates `L` on the tape,
//! and compares every probed element against `(L(θ+h) − L(θ−h)) / 2h`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::ops::Activation;
use crate::param::ParamStore;
use crate::tape::{Graph, Var};
use crate::tensor::Tensor;
use crate::verify::rng::TestRng;

#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub step: f64,
    pub tolerance: f64,
    /// Elements probed per tensor; `None` probes every element.
    pub max_probes: Option<usize>,
    pub seed: u64,
    /// Activation installed on every graph the check builds.
    pub activation: Activation,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self { step: 1e-4, tolerance: 1e-4, max_probes: None, seed: 0x5eed, activation: Activation::GELU }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub probes: usize,
    pub worst_rel_error: f64,
    pub worst_location: String,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.worst_rel_error <= self.tolerance
    }
}

/// Denominator floor of [`relative_error`]. A central difference at
/// `h = 1e-4` carries roundoff of order `1e-11`, so gradients that are
/// exactly zero (e.g. a key bias under a row-wise softmax) need a floor well
/// above that; below `1e-6` the check is effectively `|a − n| ≤ 1e-10`.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a| + |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

impl GradCheck {
    pub fn run<F>(&self, inputs: &[Tensor<f64>], store: &mut ParamStore<f64>, f: F) -> Result<GradCheckReport>
    where
        F: Fn(&mut Graph<f64>, &ParamStore<f64>, &[Var]) -> Result<Var>,
    {
        let mut rng = TestRng::new(self.seed);

        // analytic pass, which also fixes the projection R
        let mut g = Graph::new().with_activation(self.activation);
        let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, store, &vars)?;
        let proj = rng.tensor(g.shape(out));
        let r = g.leaf(proj.clone());
        let prod = g.mul(out, r)?;
        let loss = g.sum(prod)?;
        store.zero_grad();
        let grads = g.backward(loss, store)?;

        let eval = |inputs: &[Tensor<f64>], store: &ParamStore<f64>| -> Result<f64> {
            let mut g = Graph::inference().with_activation(self.activation);
            let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
            let out = f(&mut g, store, &vars)?;
            Ok(g.value(out).data().iter().zip(proj.data()).map(|(a, b)| a * b).sum())
        };

        let mut report = GradCheckReport {
            probes: 0,
            worst_rel_error: 0.0,
            worst_location: String::new(),
            tolerance: self.tolerance,
        };
        let record = |report: &mut GradCheckReport, analytic: f64, numeric: f64, location: &dyn Fn() -> String| {
            let err = relative_error(analytic, numeric);
            report.probes += 1;
            if err > report.worst_rel_error || report.worst_location.is_empty() {
                report.worst_rel_error = err;
                report.worst_location = format!("{} (analytic {analytic:.6e}, numeric {numeric:.6e})", location());
            }
        };

        let mut perturbed = inputs.to_vec();
        for (ti, var) in vars.iter().enumerate() {
            let zeros = Tensor::zeros(inputs[ti].shape());
            let analytic = grads.get(*var).unwrap_or(&zeros).clone();
            for e in self.probe_indices(&mut rng, inputs[ti].numel()) {
                let orig = perturbed[ti].data()[e];
                perturbed[ti].data_mut()[e] = orig + self.step;
                let plus = eval(&perturbed, store)?;
                perturbed[ti].data_mut()[e] = orig - self.step;
                let minus = eval(&perturbed, store)?;
                perturbed[ti].data_mut()[e] = orig;
                let numeric = (plus - minus) / (2.0 * self.step);
                record(&mut report, analytic.data()[e], numeric, &|| format!("input {ti}[{e}]"));
            }
        }

        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let analytic = store.get(id).grad.clone();
            let name = store.get(id).name.clone();
            for e in self.probe_indices(&mut rng, analytic.numel()) {
                let orig = store.get(id).value.data()[e];
                store.get_mut(id).value.data_mut()[e] = orig + self.step;
                let plus = eval(inputs, store)?;
                store.get_mut(id).value.data_mut()[e] = orig - self.step;
                let minus = eval(inputs, store)?;
                store.get_mut(id).value.data_mut()[e] = orig;
                let numeric = (plus - minus) / (2.0 * self.step);
                record(&mut report, analytic.data()[e], numeric, &|| format!("{name}[{e}]"));
            }
        }
        Ok(report)
    }

    fn probe_indices(&self, rng: &mut TestRng, numel: usize) -> Vec<usize> {
        match self.max_probes {
            Some(k) if k < numel => (0..k).map(|_| rng.below(numel)).collect(),
            _ => (0..numel).collect(),
        }
    }
}
