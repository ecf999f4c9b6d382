//! `selftest`: the core verification suites plus a weight-file round trip.

use dfeia_core::network::{Model, NetworkConfig};
use dfeia_core::verify::suites::{self, SuiteOptions, SuiteReport};

use crate::weights::{self, WeightsError};

/// Round trip on a reduced model, then one corruption per error kind.
pub fn serialization_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut r = SuiteReport { name: "serialization", ..SuiteReport::default() };
    let mut check = |ok: bool, msg: &str| {
        r.checks += 1;
        if !ok {
            r.failures.push(msg.to_string());
        }
    };
    let seeds: &[u64] = if opts.thorough { &[1, 2, 3, 4] } else { &[1] };
    for &seed in seeds {
        let model = match Model::<f32>::build(NetworkConfig::reduced(), seed) {
            Ok(m) => m,
            Err(e) => {
                check(false, &format!("building model: {e}"));
                continue;
            }
        };
        let mut source = model.params.clone();
        source.randomize(seed, 1.0);
        let bytes = match weights::encode(&source) {
            Ok(b) => b,
            Err(e) => {
                check(false, &format!("encoding: {e}"));
                continue;
            }
        };
        let mut target = model.params.clone();
        let restored = weights::decode(&bytes).and_then(|t| weights::apply(&mut target, t));
        let identical = restored.is_ok()
            && source.iter().zip(target.iter()).all(|(a, b)| {
                a.name == b.name && a.value.data().iter().zip(b.value.data()).all(|(x, y)| x.to_bits() == y.to_bits())
            });
        check(identical, "save/load round trip is not bit-exact");
        check(weights::encode(&target).ok().as_ref() == Some(&bytes), "re-encoding changes the bytes");

        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"DFEX");
        check(matches!(weights::decode(&bad), Err(WeightsError::BadMagic(_))), "bad magic not detected");
        let mut bad = bytes.clone();
        bad[4..8].copy_from_slice(&7u32.to_le_bytes());
        check(weights::decode(&bad) == Err(WeightsError::UnsupportedVersion(7)), "version mismatch not detected");
        check(
            matches!(weights::decode(&bytes[..bytes.len() / 2]), Err(WeightsError::UnexpectedEof(_))),
            "truncation not detected",
        );
        let mut bad = bytes.clone();
        // first name starts at byte 14; change its first letter
        bad[14] = b'X';
        let mut t = model.params.clone();
        check(
            matches!(weights::decode(&bad).and_then(|d| weights::apply(&mut t, d)), Err(WeightsError::UnknownName(n)) if n.starts_with('X')),
            "renamed tensor not reported as unknown",
        );
        let other = Model::<f32>::build(NetworkConfig { adw_kernel: 7, ..NetworkConfig::reduced() }, seed);
        if let Ok(mut other) = other {
            check(
                matches!(
                    weights::apply(&mut other.params, weights::decode(&bytes).unwrap_or_default()),
                    Err(WeightsError::ShapeMismatch { .. })
                ),
                "shape mismatch not detected",
            );
        }
    }
    r
}

/// Every suite in a fixed order.
pub fn run(opts: &SuiteOptions) -> Vec<SuiteReport> {
    let mut all = suites::core_suites(opts);
    all.push(serialization_suite(opts));
    all
}
