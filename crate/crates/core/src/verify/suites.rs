//! Self-contained verification suites. Each returns a [`SuiteReport`] with
//! the number of checks executed and a message per failure; the test
//! targets, the acceptance run and the CLI `selftest` all call these.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::blocks::{
    AfgLayer, AttentionVariant, Builder, CmsfeLayer, CpeLayer, FdfeLayer, MbmsLayer, MbmsVariant, MsfdBlock, MsiaBlock,
};
use crate::error::Result;
use crate::metrics::ConfusionCounts;
use crate::network::{Model, NetworkConfig};
use crate::ops::{gelu_grad_scalar, Activation, Conv2dSpec};
use crate::param::{Initializer, ParamStore};
use crate::tape::{Graph, Var};
use crate::tensor::Tensor;
use crate::verify::gradcheck::GradCheck;
use crate::verify::oracle::{self, VanillaAttention};
use crate::verify::rng::TestRng;
use crate::wavelet;

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self { name, ..Self::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    /// Wider shapes, every element probed, more repetitions.
    pub thorough: bool,
    /// Activation under test; [`Activation::GELU`] unless running the
    /// harness's own mutation check.
    pub activation: Activation,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { thorough: false, activation: Activation::GELU }
    }
}

/// The common tanh approximation of GELU. Wrong by up to ~5e-4, which the
/// activation and gradient suites must detect.
pub fn tanh_gelu(x: f64) -> f64 {
    let c = libm::sqrt(2.0 / core::f64::consts::PI);
    0.5 * x * (1.0 + libm::tanh(c * (x + 0.044715 * x * x * x)))
}

/// Exact derivative paired with the approximate value: the mutation fixture.
pub const CORRUPTED_GELU: Activation = Activation { value: tanh_gelu, derivative: gelu_grad_scalar::<f64> };

/// `Φ(x)` by composite Simpson integration of the normal density, which
/// shares no code with the `erf`-based implementation.
fn normal_cdf_by_quadrature(x: f64) -> f64 {
    let n = 4000;
    let h = x / n as f64;
    let pdf = |t: f64| libm::exp(-0.5 * t * t) / libm::sqrt(2.0 * core::f64::consts::PI);
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

pub fn activation_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport::new("activation");
    let step = if opts.thorough { 0.01 } else { 0.25 };
    let n = (12.0 / step) as usize;
    for i in 0..=n {
        let x = -6.0 + i as f64 * step;
        let want = x * normal_cdf_by_quadrature(x);
        let got = (opts.activation.value)(x);
        r.expect((got - want).abs() <= 1e-9, || format!("gelu({x}) = {got:.12}, expected {want:.12}"));
        let h = 1e-5;
        let numeric = ((opts.activation.value)(x + h) - (opts.activation.value)(x - h)) / (2.0 * h);
        let analytic = (opts.activation.derivative)(x);
        r.expect((numeric - analytic).abs() <= 1e-7, || {
            format!("gelu'({x}) = {analytic:.10}, finite difference {numeric:.10}")
        });
    }
    r
}

type Forward = Box<dyn Fn(&mut Graph<f64>, &ParamStore<f64>, &[Var]) -> Result<Var>>;

struct GradCase {
    name: String,
    inputs: Vec<Tensor<f64>>,
    store: ParamStore<f64>,
    forward: Forward,
    /// Overrides the per-tensor probe budget of the options.
    probes: Option<usize>,
}

fn leaf_case(name: &str, inputs: Vec<Tensor<f64>>, forward: Forward) -> GradCase {
    GradCase { name: String::from(name), inputs, store: ParamStore::new(), forward, probes: None }
}

fn block_case<B: 'static>(
    name: &str,
    seed: u64,
    input: Tensor<f64>,
    build: impl FnOnce(&mut Builder<'_, f64>) -> Result<B>,
    forward: fn(&B, &mut Graph<f64>, &ParamStore<f64>, Var) -> Result<Var>,
) -> Result<GradCase> {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(seed);
    let block = build(&mut Builder::new(&mut store, &mut init))?;
    store.randomize(seed ^ 0x9e37, 0.3);
    Ok(GradCase {
        name: String::from(name),
        inputs: vec![input],
        store,
        forward: Box::new(move |g, s, v| forward(&block, g, s, v[0])),
        probes: None,
    })
}

fn primitive_cases(rng: &mut TestRng) -> Vec<GradCase> {
    let mut t = |s: &[usize]| rng.tensor(s);
    let dense = Conv2dSpec::same((3, 3), (1, 1), 1);
    let strided =
        Conv2dSpec { padding: (2, 1), dilation: (2, 1), groups: 2, ..Conv2dSpec::default() }.with_stride((2, 2));
    let asym = Conv2dSpec::same((1, 9), (1, 1), 3);
    vec![
        leaf_case(
            "conv2d 3x3",
            vec![t(&[2, 4, 6, 6]), t(&[5, 4, 3, 3]), t(&[5])],
            Box::new(move |g, _, v| g.conv2d(v[0], v[1], Some(v[2]), dense)),
        ),
        leaf_case(
            "conv2d strided dilated grouped",
            vec![t(&[1, 4, 7, 8]), t(&[6, 2, 3, 3]), t(&[6])],
            Box::new(move |g, _, v| g.conv2d(v[0], v[1], Some(v[2]), strided)),
        ),
        leaf_case(
            "conv2d asymmetric depthwise 1x9",
            vec![t(&[2, 3, 4, 10]), t(&[3, 1, 1, 9])],
            Box::new(move |g, _, v| g.conv2d(v[0], v[1], None, asym)),
        ),
        leaf_case("gelu", vec![t(&[2, 3, 4, 4]).scale(3.0)], Box::new(|g, _, v| g.gelu(v[0]))),
        leaf_case(
            "grn",
            vec![t(&[2, 4, 3, 3]), t(&[4]), t(&[4])],
            Box::new(|g, _, v| g.grn(v[0], v[1], v[2], crate::ops::GRN_EPSILON)),
        ),
        leaf_case("softmax", vec![t(&[2, 3, 5]).scale(2.0)], Box::new(|g, _, v| g.softmax(v[0]))),
        leaf_case("matmul", vec![t(&[2, 3, 4]), t(&[2, 4, 5])], Box::new(|g, _, v| g.matmul(v[0], v[1]))),
        leaf_case("transpose", vec![t(&[2, 3, 4])], Box::new(|g, _, v| g.transpose(v[0]))),
        leaf_case("reshape", vec![t(&[2, 3, 4])], Box::new(|g, _, v| g.reshape(v[0], &[4, 6]))),
        leaf_case("add", vec![t(&[2, 3, 4]), t(&[2, 3, 4])], Box::new(|g, _, v| g.add(v[0], v[1]))),
        leaf_case("mul", vec![t(&[2, 3, 4]), t(&[2, 3, 4])], Box::new(|g, _, v| g.mul(v[0], v[1]))),
        leaf_case("scale", vec![t(&[3, 4])], Box::new(|g, _, v| g.scale(v[0], -1.7))),
        leaf_case("sum", vec![t(&[3, 4])], Box::new(|g, _, v| g.sum(v[0]))),
        leaf_case("slice channels", vec![t(&[2, 6, 3, 3])], Box::new(|g, _, v| g.slice_channels(v[0], 2, 3))),
        leaf_case(
            "concat channels",
            vec![t(&[2, 2, 3, 3]), t(&[2, 3, 3, 3]), t(&[2, 1, 3, 3])],
            Box::new(|g, _, v| g.concat_channels(v)),
        ),
        leaf_case(
            "dwt2",
            vec![t(&[2, 3, 4, 6])],
            Box::new(|g, _, v| {
                let b = g.dwt2(v[0])?;
                g.concat_channels(&[b.ll, b.lh, b.hl, b.hh])
            }),
        ),
        leaf_case(
            "idwt2",
            vec![t(&[2, 3, 2, 3]), t(&[2, 3, 2, 3]), t(&[2, 3, 2, 3]), t(&[2, 3, 2, 3])],
            Box::new(|g, _, v| g.idwt2(crate::tape::SubbandVars { ll: v[0], lh: v[1], hl: v[2], hh: v[3] })),
        ),
        leaf_case("global average pool", vec![t(&[2, 4, 3, 5])], Box::new(|g, _, v| g.global_avg_pool(v[0]))),
        leaf_case("linear", vec![t(&[3, 5]), t(&[4, 5]), t(&[4])], Box::new(|g, _, v| g.linear(v[0], v[1], v[2]))),
        leaf_case(
            "cross entropy",
            vec![t(&[4, 8]).scale(2.0)],
            Box::new(|g, _, v| g.cross_entropy(v[0], &[0, 3, 7, 3])),
        ),
    ]
}

fn block_cases(rng: &mut TestRng, thorough: bool) -> Result<Vec<GradCase>> {
    let (n, s) = if thorough { (2, 8) } else { (1, 8) };
    let mut x = || rng.tensor(&[n, 8, s, s]);
    Ok(vec![
        block_case("FDFE", 1, x(), |b| FdfeLayer::build(b, 8, 9), FdfeLayer::forward)?,
        block_case("MBMS dilated", 2, x(), |b| MbmsLayer::build(b, 8, MbmsVariant::Dilated), MbmsLayer::forward)?,
        block_case(
            "MBMS large kernel",
            3,
            x(),
            |b| MbmsLayer::build(b, 8, MbmsVariant::LargeKernel),
            MbmsLayer::forward,
        )?,
        block_case("CPE", 4, x(), |b| CpeLayer::build(b, 8), CpeLayer::forward)?,
        block_case(
            "AFG interaction",
            5,
            x(),
            |b| AfgLayer::build(b, 8, 2, AttentionVariant::Interaction),
            AfgLayer::forward,
        )?,
        block_case(
            "AFG traditional",
            6,
            x(),
            |b| AfgLayer::build(b, 8, 2, AttentionVariant::Traditional),
            AfgLayer::forward,
        )?,
        block_case("CMSFE", 7, x(), |b| CmsfeLayer::build(b, 8), CmsfeLayer::forward)?,
        block_case("MSFD block", 8, x(), |b| MsfdBlock::build(b, 8, 9, MbmsVariant::Dilated), MsfdBlock::forward)?,
        block_case(
            "MSIA block",
            9,
            x(),
            |b| MsiaBlock::build(b, 8, 2, AttentionVariant::Interaction),
            MsiaBlock::forward,
        )?,
    ])
}

fn network_case(rng: &mut TestRng, thorough: bool) -> Result<GradCase> {
    let model = Model::<f64>::build(NetworkConfig::reduced(), 11)?;
    let mut store = model.params.clone();
    store.randomize(12, 0.1);
    let input = rng.tensor(&[1, 3, 32, 32]);
    Ok(GradCase {
        name: String::from("network (reduced config)"),
        inputs: vec![input],
        store,
        forward: Box::new(move |g, s, v| {
            // the store passed in is the perturbed copy; rebuild the view on it
            let m = Model { params: s.clone(), ..model.clone() };
            m.forward(g, v[0])
        }),
        probes: Some(if thorough { 16 } else { 3 }),
    })
}

/// Finite-difference checks of every primitive, every layer and block, and
/// the reduced end-to-end network.
pub fn gradient_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport::new("gradients");
    let mut rng = TestRng::new(0xd1ff);
    let mut cases = primitive_cases(&mut rng);
    let built = block_cases(&mut rng, opts.thorough).and_then(|mut b| {
        b.push(network_case(&mut rng, opts.thorough)?);
        Ok(b)
    });
    match built {
        Ok(b) => cases.extend(b),
        Err(e) => r.expect(false, || format!("building gradient fixtures: {e}")),
    }
    for mut case in cases {
        let check = GradCheck {
            max_probes: case.probes.or(if opts.thorough { None } else { Some(24) }),
            activation: opts.activation,
            ..GradCheck::default()
        };
        match check.run(&case.inputs, &mut case.store, &case.forward) {
            Ok(rep) => r.expect(rep.passed(), || {
                format!("{}: relative error {:.3e} at {}", case.name, rep.worst_rel_error, rep.worst_location)
            }),
            Err(e) => r.expect(false, || format!("{}: {e}", case.name)),
        }
    }
    r
}

/// Perfect reconstruction both ways, energy preservation, and agreement
/// with the block-matrix definition.
pub fn wavelet_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport::new("wavelet");
    let mut rng = TestRng::new(0x4aa2);
    let reps = if opts.thorough { 500 } else { 100 };
    let max_half = if opts.thorough { 16 } else { 8 };
    for i in 0..reps {
        let shape = [1 + rng.below(2), 1 + rng.below(4), 2 * (1 + rng.below(max_half)), 2 * (1 + rng.below(max_half))];
        let x = rng.uniform(&shape, -3.0, 3.0);
        let outcome = (|| -> Result<()> {
            let bands = wavelet::dwt2(&x)?;
            let back = wavelet::idwt2(&bands)?;
            r.expect(back.max_abs_diff(&x) <= 1e-12, || format!("case {i}: idwt2(dwt2(x)) differs from x"));
            let energy = (bands.energy() - x.sum_squares()).abs();
            r.expect(energy <= 1e-10, || format!("case {i}: energy changed by {energy:.3e}"));
            let m = oracle::dwt2_via_matrix(&x);
            let d = [(&bands.ll, &m.ll), (&bands.lh, &m.lh), (&bands.hl, &m.hl), (&bands.hh, &m.hh)]
                .iter()
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max);
            r.expect(d <= 1e-12, || format!("case {i}: subbands differ from the block-matrix definition by {d:.3e}"));

            let half = [shape[0], shape[1], shape[2] / 2, shape[3] / 2];
            let set = wavelet::SubbandSet {
                ll: rng.tensor(&half),
                lh: rng.tensor(&half),
                hl: rng.tensor(&half),
                hh: rng.tensor(&half),
            };
            let again = wavelet::dwt2(&wavelet::idwt2(&set)?)?;
            let d = [(&again.ll, &set.ll), (&again.lh, &set.lh), (&again.hl, &set.hl), (&again.hh, &set.hh)]
                .iter()
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max);
            r.expect(d <= 1e-12, || format!("case {i}: dwt2(idwt2(s)) differs from s by {d:.3e}"));
            Ok(())
        })();
        if let Err(e) = outcome {
            r.expect(false, || format!("case {i}: {e}"));
        }
    }
    r
}

/// Interaction attention with identity aggregation kernels (and the
/// traditional variant) against a straightforward multi-head attention.
pub fn attention_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport::new("attention oracle");
    let mut rng = TestRng::new(0xa77e);
    let mut shapes = vec![([1, 64, 8, 8], 2)];
    if opts.thorough {
        shapes.extend([([2, 64, 6, 8], 2), ([1, 96, 5, 5], 3), ([1, 32, 4, 4], 4)]);
    }
    for (seed, (shape, heads)) in shapes.into_iter().enumerate() {
        for variant in [AttentionVariant::Interaction, AttentionVariant::Traditional] {
            let outcome = (|| -> Result<f64> {
                let mut store = ParamStore::new();
                let mut init = Initializer::new(seed as u64);
                let layer = AfgLayer::build(&mut Builder::new(&mut store, &mut init), shape[1], heads, variant)?;
                store.randomize(seed as u64 + 100, 0.2);
                for dw in layer.dw_k.iter().chain(&layer.dw_v) {
                    dw.set_delta(&mut store);
                }
                let x = rng.tensor(&shape);
                let mut g = Graph::inference().with_activation(opts.activation);
                let v = g.leaf(x.clone());
                let out = layer.forward(&mut g, &store, v)?;
                let reference = VanillaAttention {
                    qkv_weight: store.value(layer.qkv.weight).data(),
                    qkv_bias: store.value(layer.qkv.bias).data(),
                    proj_weight: store.value(layer.project.weight).data(),
                    proj_bias: store.value(layer.project.bias).data(),
                    heads,
                }
                .forward(&x);
                Ok(g.value(out).max_abs_diff(&reference))
            })();
            match outcome {
                Ok(d) => r.expect(d <= 1e-5, || format!("{variant:?} {shape:?}: differs from reference by {d:.3e}")),
                Err(e) => r.expect(false, || format!("{variant:?} {shape:?}: {e}")),
            }
        }
    }
    r
}

/// Each layer with its final projection (or all of its kernels) zeroed must
/// return its input bit for bit, whatever its other parameters are.
pub fn residual_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport::new("residual identity");
    let seeds: u64 = if opts.thorough { 8 } else { 2 };
    for seed in 0..seeds {
        let x = TestRng::new(0x1de7 + seed).tensor(&[2, 8, 8, 8]);
        let mut check = |name: &str, outcome: Result<Tensor<f64>>| match outcome {
            Ok(y) => r.expect(y.data() == x.data(), || format!("{name} (seed {seed}): output is not the input")),
            Err(e) => r.expect(false, || format!("{name} (seed {seed}): {e}")),
        };
        check(
            "FDFE",
            zeroed(
                seed,
                opts,
                &x,
                |b| FdfeLayer::build(b, 8, 9),
                |l, s| l.subband_convs().iter().for_each(|c| c.set_zero(s)),
                FdfeLayer::forward,
            ),
        );
        check(
            "MBMS",
            zeroed(
                seed,
                opts,
                &x,
                |b| MbmsLayer::build(b, 8, MbmsVariant::Dilated),
                |l, s| l.project.set_zero(s),
                MbmsLayer::forward,
            ),
        );
        check(
            "CPE",
            zeroed(
                seed,
                opts,
                &x,
                |b| CpeLayer::build(b, 8),
                |l, s| {
                    l.dw.set_zero(s);
                    l.grn.set_zero(s);
                },
                CpeLayer::forward,
            ),
        );
        check(
            "AFG",
            zeroed(
                seed,
                opts,
                &x,
                |b| AfgLayer::build(b, 8, 2, AttentionVariant::Interaction),
                |l, s| l.project.set_zero(s),
                AfgLayer::forward,
            ),
        );
        check(
            "CMSFE",
            zeroed(seed, opts, &x, |b| CmsfeLayer::build(b, 8), |l, s| l.project.set_zero(s), CmsfeLayer::forward),
        );
    }
    r
}

fn zeroed<L>(
    seed: u64,
    opts: &SuiteOptions,
    x: &Tensor<f64>,
    build: impl FnOnce(&mut Builder<'_, f64>) -> Result<L>,
    zero: impl FnOnce(&L, &mut ParamStore<f64>),
    forward: impl FnOnce(&L, &mut Graph<f64>, &ParamStore<f64>, Var) -> Result<Var>,
) -> Result<Tensor<f64>> {
    let mut store = ParamStore::new();
    let mut init = Initializer::new(seed);
    let layer = build(&mut Builder::new(&mut store, &mut init))?;
    store.randomize(seed + 1, 0.3);
    zero(&layer, &mut store);
    let mut g = Graph::inference().with_activation(opts.activation);
    let v = g.leaf(x.clone());
    let y = forward(&layer, &mut g, &store, v)?;
    Ok(g.value(y).clone())
}

/// Macro metrics against the brute-force oracle on random matrices, and
/// the balanced-split identity macro recall = accuracy.
pub fn metrics_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport::new("metrics oracle");
    let mut rng = TestRng::new(0x3e7c);
    let reps = if opts.thorough { 5000 } else { 1000 };
    let k = 8;
    for i in 0..reps {
        let matrix: Vec<u64> = (0..k * k).map(|_| rng.below(20) as u64).collect();
        let c = match ConfusionCounts::from_matrix(k, matrix.clone()) {
            Ok(c) => c,
            Err(e) => {
                r.expect(false, || format!("matrix {i}: {e}"));
                continue;
            }
        };
        let m = c.macro_metrics();
        let o = oracle::macro_metrics(&matrix, k);
        let got = [m.precision, m.recall, m.specificity, m.f1];
        let d = got.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.expect(d <= 1e-9, || format!("matrix {i}: macro metrics differ from oracle by {d:.3e}"));
        for class in 0..k {
            let cc = c.class_counts(class);
            let (tp, fp, fn_, tn) = oracle::one_vs_rest_counts(&matrix, k, class);
            r.expect((cc.tp, cc.fp, cc.fn_, cc.tn) == (tp, fp, fn_, tn) && cc.total() == c.total(), || {
                format!("matrix {i} class {class}: one-vs-rest counts differ")
            });
        }

        // balanced: every true class has the same number of samples
        let per_class = 1 + rng.below(30) as u64;
        let mut balanced = vec![0u64; k * k];
        for t in 0..k {
            for _ in 0..per_class {
                balanced[t * k + rng.below(k)] += 1;
            }
        }
        if let Ok(b) = ConfusionCounts::from_matrix(k, balanced) {
            let m = b.macro_metrics();
            let d = (m.recall - m.accuracy).abs();
            r.expect(d <= 1e-9, || format!("balanced matrix {i}: macro recall and accuracy differ by {d:.3e}"));
        }
    }
    r
}

/// All suites of this crate in a fixed order.
pub fn core_suites(opts: &SuiteOptions) -> Vec<SuiteReport> {
    vec![
        activation_suite(opts),
        gradient_suite(opts),
        wavelet_suite(opts),
        residual_suite(opts),
        attention_suite(opts),
        metrics_suite(opts),
    ]
}
