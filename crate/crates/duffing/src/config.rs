//! JSON system configurations and their canonical digest.

use std::fs;
use std::path::Path;

use duffing_core::SystemConfig;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::AppError;

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SystemConfig, AppError> {
    let cfg: SystemConfig = serde_json::from_str(text).map_err(|e| AppError::Validation(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SystemConfig, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn save_config(cfg: &SystemConfig, path: &Path) -> Result<(), AppError> {
    fs::write(path, serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(())
}

/// Compact JSON with sorted object keys and shortest round-trip floats.
pub fn canonical_json(cfg: &SystemConfig) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled,
    // which this crate never turns on.
    let value: Value = serde_json::to_value(cfg).expect("configuration serializes");
    value.to_string()
}

/// Hex SHA-256 of [`canonical_json`].
pub fn config_hash(cfg: &SystemConfig) -> String {
    let digest = Sha256::digest(canonical_json(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "n": 1,
        "coefficients": [
            {"mean": 0.0, "harmonics": []},
            {"mean": 0.0, "harmonics": [[0.1, 0.0]]},
            {"mean": 0.0, "harmonics": []}
        ],
        "impulses": {"t1": 0.25, "t2": 0.5},
        "integrator": {"abs_tol": 1e-12, "rel_tol": 1e-12, "max_step": 0.25}
    }"#;

    #[test]
    fn round_trip_and_hash() {
        let cfg = parse_config(DOC).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        save_config(&cfg, &path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_hash(&back), config_hash(&cfg));
        assert_eq!(config_hash(&cfg).len(), 64);
    }

    #[test]
    fn hash_ignores_key_order_and_whitespace() {
        let shuffled = r#"{"integrator":{"max_step":0.25,"rel_tol":1e-12,"abs_tol":1e-12},
            "impulses":{"t2":0.5,"t1":0.25},"n":1,
            "coefficients":[{"harmonics":[],"mean":0.0},{"harmonics":[[0.1,0.0]],"mean":0.0},{"harmonics":[],"mean":0.0}]}"#;
        assert_eq!(config_hash(&parse_config(shuffled).unwrap()), config_hash(&parse_config(DOC).unwrap()));
    }

    #[test]
    fn hash_sees_every_field() {
        let a = parse_config(DOC).unwrap();
        let b = parse_config(&DOC.replace("0.1, 0.0", "0.1, 1e-300")).unwrap();
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(parse_config(&DOC.replace("\"n\": 1", "\"n\": 1, \"extra\": 2")), Err(AppError::Validation(_))));
        assert!(matches!(parse_config(&DOC.replace("\"t1\": 0.25", "\"t1\": 0.75")), Err(AppError::Validation(_))));
        assert!(matches!(parse_config("{"), Err(AppError::Validation(_))));
        assert!(matches!(load_config(Path::new("/nonexistent/c.json")), Err(AppError::Io(_))));
    }
}
