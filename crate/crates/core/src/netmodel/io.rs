use std::path::Path;

use super::{validate_spec, NetError, NetworkSpec, Result};

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }
}

/// Read and validate a network description file.
pub fn load_spec(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let spec = NetworkSpec::from_json(&std::fs::read_to_string(path)?)?;
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        return Err(NetError::Invalid(violations));
    }
    Ok(spec)
}

pub fn save_spec(spec: &NetworkSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, spec.to_json() + "\n")?;
    Ok(())
}
