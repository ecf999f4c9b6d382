//! Network configuration as JSON; keys mirror `NetworkConfig` field names.

use std::path::Path;

use dfeia_core::network::NetworkConfig;

use crate::error::{DfeiaError, Result};

/// Parses and validates; absent keys take their defaults, unknown keys
/// are rejected.
pub fn load(path: &Path) -> Result<NetworkConfig> {
    let text = std::fs::read_to_string(path).map_err(DfeiaError::io(path))?;
    parse(&text).map_err(|e| match e {
        DfeiaError::ConfigParse { source, .. } => DfeiaError::ConfigParse { path: path.into(), source },
        DfeiaError::ConfigInvalid { source, .. } => DfeiaError::ConfigInvalid { path: path.into(), source },
        other => other,
    })
}

pub fn parse(text: &str) -> Result<NetworkConfig> {
    let cfg: NetworkConfig =
        serde_json::from_str(text).map_err(|source| DfeiaError::ConfigParse { path: "<config>".into(), source })?;
    cfg.validate().map_err(|source| DfeiaError::ConfigInvalid { path: "<config>".into(), source })?;
    Ok(cfg)
}

/// `None` means the built-in default.
pub fn load_or_default(path: Option<&Path>) -> Result<NetworkConfig> {
    path.map_or_else(|| Ok(NetworkConfig::default()), load)
}

pub fn to_json(cfg: &NetworkConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialises")
}

pub fn save(cfg: &NetworkConfig, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(cfg)).map_err(DfeiaError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let cfg = NetworkConfig::reduced();
        assert_eq!(parse(&to_json(&cfg)).unwrap(), cfg);
        assert_eq!(parse("{}").unwrap(), NetworkConfig::default());
        let partial = parse(r#"{"adw_kernel": 7, "attention_variant": "traditional"}"#).unwrap();
        assert_eq!(partial.adw_kernel, 7);
    }

    #[test]
    fn unknown_keys_and_violations_rejected() {
        assert!(matches!(parse(r#"{"adw_kernal": 7}"#), Err(DfeiaError::ConfigParse { .. })));
        let err = parse(r#"{"stage_channels": [64, 128, 100, 224]}"#).unwrap_err();
        assert!(err.to_string().contains("stage_channels[2]"), "{err}");
    }
}
