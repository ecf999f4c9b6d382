use dfeia_core::blocks::{AttentionVariant, MbmsVariant};
use dfeia_core::network::{BlockKind, Model, NetworkConfig};
use dfeia_core::verify::rng::TestRng;
use dfeia_core::{Error, Graph, Tensor};

/// Hand count of one convolution with bias: (params, MACs at h×w output).
fn conv(cin: usize, cout: usize, groups: usize, kh: usize, kw: usize, oh: usize, ow: usize) -> (u64, u64) {
    let w = (cout * (cin / groups) * kh * kw) as u64;
    (w + cout as u64, (oh * ow) as u64 * w)
}

fn dw(c: usize, kh: usize, kw: usize, h: usize) -> (u64, u64) {
    conv(c, c, c, kh, kw, h, h)
}

fn pw(cin: usize, cout: usize, h: usize) -> (u64, u64) {
    conv(cin, cout, 1, 1, 1, h, h)
}

fn total(parts: &[(u64, u64)]) -> (u64, u64) {
    parts.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn msfd(c: usize, h: usize, k: usize, variant: MbmsVariant) -> (u64, u64) {
    let h2 = h / 2;
    let (b2, b3) = match variant {
        MbmsVariant::Dilated => (dw(c, 3, 3, h), dw(c, 3, 3, h)),
        MbmsVariant::LargeKernel => (dw(c, 5, 5, h), dw(c, 7, 7, h)),
    };
    total(&[
        dw(c, 3, 3, h2),
        dw(c, 1, k, h2),
        dw(c, k, 1, h2),
        dw(c, 3, 3, h2),
        pw(c, 4 * c, h),
        dw(2 * c, 3, 3, h),
        b2,
        b3,
        (8 * c as u64, 0),
        dw(4 * c, 3, 3, h),
        pw(4 * c, c, h),
    ])
}

fn msia(c: usize, h: usize, variant: AttentionVariant) -> (u64, u64) {
    let heads = c / 32;
    let t = (h * h) as u64;
    let agg = match variant {
        AttentionVariant::Interaction => total(&[dw(c, 3, 3, h), dw(c, 3, 3, h)]),
        AttentionVariant::Traditional => (0, 0),
    };
    total(&[
        dw(c, 3, 3, h),
        (2 * c as u64, 0),
        pw(c, 3 * c, h),
        agg,
        (0, 2 * heads as u64 * t * t * 32),
        pw(c, c, h),
        pw(c, 4 * c, h),
        dw(c, 3, 3, h),
        dw(c, 3, 3, h),
        dw(c, 3, 3, h),
        dw(c, 3, 3, h),
        (8 * c as u64, 0),
        dw(4 * c, 3, 3, h),
        pw(4 * c, c, h),
    ])
}

/// Independent per-layer count of the whole network at batch 1.
fn closed_form(cfg: &NetworkConfig) -> (u64, u64) {
    let ch = &cfg.stage_channels;
    let s = cfg.input_size;
    let mut parts = vec![conv(3, ch[0] / 2, 1, 3, 3, s / 2, s / 2), conv(ch[0] / 2, ch[0], 1, 3, 3, s / 4, s / 4)];
    let mut h = s / 4;
    for i in 0..ch.len() {
        if i > 0 {
            h /= 2;
            parts.push(conv(ch[i - 1], ch[i], 1, 3, 3, h, h));
        }
        for _ in 0..cfg.stage_depths[i] {
            parts.push(match cfg.block_plan[i] {
                BlockKind::Msfd => msfd(ch[i], h, cfg.adw_kernel, cfg.mbms_variant),
                BlockKind::Msia => msia(ch[i], h, cfg.attention_variant),
            });
        }
    }
    let last = *ch.last().unwrap();
    parts.push(((last * cfg.num_classes + cfg.num_classes) as u64, (last * cfg.num_classes) as u64));
    total(&parts)
}

fn counts(cfg: NetworkConfig) -> (u64, u64) {
    let m = Model::<f32>::build(cfg.clone(), 0).unwrap();
    let s = cfg.input_size;
    (m.count_params(), m.count_flops([1, 3, s, s]).unwrap())
}

#[test]
fn counts_match_closed_form_for_all_variants() {
    let mut cfgs = vec![NetworkConfig::default(), NetworkConfig::reduced()];
    for k in [7, 11] {
        cfgs.push(NetworkConfig { adw_kernel: k, ..NetworkConfig::default() });
    }
    cfgs.push(NetworkConfig { mbms_variant: MbmsVariant::LargeKernel, ..NetworkConfig::default() });
    cfgs.push(NetworkConfig { attention_variant: AttentionVariant::Traditional, ..NetworkConfig::default() });
    cfgs.push(NetworkConfig {
        stage_channels: vec![64, 96, 128, 256],
        stage_depths: vec![1, 2, 3, 1],
        ..NetworkConfig::default()
    });
    for cfg in cfgs {
        assert_eq!(counts(cfg.clone()), closed_form(&cfg), "{cfg:?}");
    }
}

#[test]
fn default_counts_in_calibration_bands() {
    let (params, macs) = counts(NetworkConfig::default());
    assert_eq!(params, 4_030_376);
    assert_eq!(macs, 1_190_455_616);
    assert!((3_000_000..=5_000_000).contains(&params));
    assert!((850_000_000..=1_600_000_000).contains(&macs));
}

#[test]
fn registry_sum_and_breakdown_agree() {
    let m = Model::<f32>::build(NetworkConfig::default(), 0).unwrap();
    let sum: usize = m.params.iter().map(|p| p.value.numel()).sum();
    assert_eq!(m.count_params(), sum as u64);
    let r = m.cost_report([2, 3, 224, 224]).unwrap();
    let names: Vec<_> = r.breakdown.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["stem", "stage1", "stage2", "stage3", "stage4", "head"]);
    assert_eq!(r.params, m.count_params());
    assert_eq!(r.macs, 2 * m.count_flops([1, 3, 224, 224]).unwrap());
}

#[test]
fn adw_kernel_orders_params_and_macs() {
    let c: Vec<_> =
        [7, 9, 11].iter().map(|&k| counts(NetworkConfig { adw_kernel: k, ..NetworkConfig::default() })).collect();
    assert!(c[0].0 < c[1].0 && c[1].0 < c[2].0);
    assert!(c[0].1 < c[1].1 && c[1].1 < c[2].1);
}

#[test]
fn traditional_attention_removes_exactly_the_aggregation_kernels() {
    let cfg = NetworkConfig::default();
    let (p_int, m_int) = counts(cfg.clone());
    let (p_tr, m_tr) = counts(NetworkConfig { attention_variant: AttentionVariant::Traditional, ..cfg.clone() });
    let delta: u64 = (0..cfg.num_stages())
        .filter(|&s| cfg.block_plan[s] == BlockKind::Msia)
        .map(|s| cfg.stage_depths[s] as u64 * 2 * (9 * cfg.stage_channels[s] as u64 + cfg.stage_channels[s] as u64))
        .sum();
    assert_eq!(p_int - p_tr, delta);
    assert!(m_tr < m_int);
}

#[test]
fn build_is_deterministic_and_seed_sensitive() {
    let a = Model::<f32>::build(NetworkConfig::reduced(), 7).unwrap();
    let b = Model::<f32>::build(NetworkConfig::reduced(), 7).unwrap();
    let c = Model::<f32>::build(NetworkConfig::reduced(), 8).unwrap();
    let bits = |m: &Model<f32>| -> Vec<u32> {
        m.params.iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits())).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&c));
    let names = |m: &Model<f32>| -> Vec<String> { m.params.iter().map(|p| p.name.clone()).collect() };
    assert_eq!(names(&a), names(&b));
    assert!(names(&a).contains(&"stage3.block1.afg.qkv.weight".to_string()));
}

#[test]
fn init_statistics() {
    let m = Model::<f64>::build(NetworkConfig::default(), 3).unwrap();
    for p in m.params.iter() {
        let v = p.value.data();
        if p.name.ends_with(".bias") || p.name.ends_with(".gamma") || p.name.ends_with(".beta") {
            assert!(v.iter().all(|&x| x == 0.0), "{}", p.name);
        } else {
            assert!(v.iter().all(|&x| x.abs() <= 0.04), "{}", p.name);
        }
    }
    let w = m.params.value(m.params.id_of("stage1.block1.mbms.expand.weight").unwrap());
    let std = (w.sum_squares() / w.numel() as f64).sqrt();
    // truncation at 2σ shrinks the std to about 0.88σ
    assert!((std - 0.0176).abs() < 0.001, "{std}");
}

#[test]
fn default_forward_shapes_and_determinism() {
    let m = Model::<f32>::build(NetworkConfig::default(), 1).unwrap();
    let x = TestRng::new(2).uniform(&[2, 3, 224, 224], -3.0, 3.0).cast::<f32>();
    let mut g = Graph::inference();
    let v = g.leaf(x.clone());
    let out = m.forward_traced(&mut g, v).unwrap();
    assert_eq!(g.shape(out.logits), &[2, 8]);
    let shapes: Vec<Vec<usize>> = out.stage_outputs.iter().map(|s| g.shape(*s).to_vec()).collect();
    assert_eq!(shapes, vec![vec![2, 64, 56, 56], vec![2, 128, 28, 28], vec![2, 160, 14, 14], vec![2, 224, 7, 7]]);
    let logits = g.value(out.logits).clone();
    assert!(logits.all_finite());
    assert_eq!(m.predict(&x).unwrap().data(), logits.data());
}

#[test]
fn reduced_forward_is_repeatable_in_f64() {
    let m = Model::<f64>::build(NetworkConfig::reduced(), 4).unwrap();
    let x = TestRng::new(5).uniform(&[3, 3, 32, 32], -3.0, 3.0);
    let a = m.predict(&x).unwrap();
    let b = m.predict(&x).unwrap();
    assert!(a.max_abs_diff(&b) <= 1e-12);
}

#[test]
fn config_violations_are_named() {
    let bad = NetworkConfig { stage_channels: vec![64, 128, 100, 224], ..NetworkConfig::default() };
    match Model::<f32>::build(bad, 0) {
        Err(Error::Config(msg)) => assert!(msg.contains("stage_channels[2]"), "{msg}"),
        other => panic!("expected config error, got {:?}", other.map(|_| ())),
    }
    let m = Model::<f32>::build(NetworkConfig::reduced(), 0).unwrap();
    let mut g = Graph::inference();
    let x = g.leaf(Tensor::zeros(&[1, 3, 224, 224]));
    assert!(matches!(m.forward(&mut g, x), Err(Error::Usage(_))));
}
