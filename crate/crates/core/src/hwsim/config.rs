use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccelStyle {
    /// 2-D array of fusion units built from 2-bit bricks.
    FusedSystolic,
    /// Narrow vector engines: 2-bit multipliers feeding an adder tree.
    VectorEngine,
}

fn default_dram_energy() -> f64 {
    15.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Energy of one 2-bit multiply-accumulate.
    pub e_mac_pj: f64,
    pub e_sram_pj_per_bit: f64,
    #[serde(default = "default_dram_energy")]
    pub e_dram_pj_per_bit: f64,
}

fn default_native_bits() -> u32 {
    2
}

fn default_acc_bits() -> u64 {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorConfig {
    pub name: String,
    pub style: AccelStyle,
    #[serde(default = "default_native_bits")]
    pub native_bits: u32,
    /// Number of native-width multipliers.
    pub mult_count: u64,
    /// `[rows, cols]` of a fused array, `[lanes, width]` of a vector engine.
    pub array_dims: [u64; 2],
    pub act_buffer_bytes: u64,
    pub wgt_buffer_bytes: u64,
    pub out_buffer_bytes: u64,
    pub dram_bandwidth_bits_per_cycle: u64,
    /// Width of one partial-sum accumulator in the output buffer.
    #[serde(default = "default_acc_bits")]
    pub acc_bits: u64,
    pub energy: EnergyModel,
    /// Free-form notes on where each assumed value comes from.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub assumptions: BTreeMap<String, String>,
}

const BITFUSION_LIKE: &str = include_str!("../../presets/bitfusion-like.json");
const BPVEC_LIKE: &str = include_str!("../../presets/bpvec-like.json");

pub const PRESET_NAMES: [&str; 2] = ["bitfusion-like", "bpvec-like"];

/// Effectively unlimited capacity, small enough to keep products in u64.
const UNBOUNDED: u64 = 1 << 40;

impl AcceleratorConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "bitfusion-like" => load_config(BITFUSION_LIKE),
            "bpvec-like" => load_config(BPVEC_LIKE),
            _ => Err(SimError::UnknownPreset {
                name: name.to_string(),
                available: PRESET_NAMES.join(", "),
            }),
        }
    }

    /// Preset name or path to a config file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if PRESET_NAMES.contains(&name_or_path) {
            return Self::preset(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            return load_config(&std::fs::read_to_string(path)?);
        }
        Self::preset(name_or_path)
    }

    /// Same datapath with buffers and bandwidth large enough to never bind.
    pub fn unbounded(&self) -> Self {
        Self {
            name: format!("{}+unbounded", self.name),
            act_buffer_bytes: UNBOUNDED,
            wgt_buffer_bytes: UNBOUNDED,
            out_buffer_bytes: UNBOUNDED,
            dram_bandwidth_bits_per_cycle: UNBOUNDED,
            ..self.clone()
        }
    }

    /// Same datapath with all three buffers scaled.
    pub fn with_buffers(&self, act: u64, wgt: u64, out: u64) -> Self {
        Self {
            act_buffer_bytes: act,
            wgt_buffer_bytes: wgt,
            out_buffer_bytes: out,
            ..self.clone()
        }
    }

    pub fn with_bandwidth(&self, bits_per_cycle: u64) -> Self {
        Self {
            dram_bandwidth_bits_per_cycle: bits_per_cycle,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut positive = |field: &str, value: u64| {
            if value == 0 {
                v.push(format!("{field}: must be positive"));
            }
        };
        positive("native_bits", u64::from(self.native_bits));
        positive("mult_count", self.mult_count);
        positive("array_dims[0]", self.array_dims[0]);
        positive("array_dims[1]", self.array_dims[1]);
        positive("act_buffer_bytes", self.act_buffer_bytes);
        positive("wgt_buffer_bytes", self.wgt_buffer_bytes);
        positive("out_buffer_bytes", self.out_buffer_bytes);
        positive("dram_bandwidth_bits_per_cycle", self.dram_bandwidth_bits_per_cycle);
        positive("acc_bits", self.acc_bits);
        if self.native_bits > 16 {
            v.push("native_bits: must be at most 16".into());
        }
        for (field, value) in [
            ("energy.e_mac_pj", self.energy.e_mac_pj),
            ("energy.e_sram_pj_per_bit", self.energy.e_sram_pj_per_bit),
            ("energy.e_dram_pj_per_bit", self.energy.e_dram_pj_per_bit),
        ] {
            if !value.is_finite() || value < 0.0 {
                v.push(format!("{field}: must be finite and non-negative"));
            }
        }
        v
    }
}

/// Parse and validate an accelerator config document.
pub fn load_config(source: &str) -> Result<AcceleratorConfig> {
    let cfg: AcceleratorConfig =
        serde_json::from_str(source).map_err(|e| SimError::Config(vec![e.to_string()]))?;
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(SimError::Config(v));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load() {
        let bf = AcceleratorConfig::preset("bitfusion-like").unwrap();
        assert_eq!(bf.style, AccelStyle::FusedSystolic);
        assert_eq!(bf.energy.e_dram_pj_per_bit, 15.0);
        assert_eq!(bf.native_bits, 2);
        assert!(!bf.assumptions.is_empty());
        let bp = AcceleratorConfig::preset("bpvec-like").unwrap();
        assert_eq!(bp.style, AccelStyle::VectorEngine);
        assert_eq!(bp.energy.e_dram_pj_per_bit, 15.0);
    }

    #[test]
    fn unknown_preset_lists_available() {
        let err = AcceleratorConfig::preset("tpu").unwrap_err().to_string();
        assert!(err.contains("bitfusion-like") && err.contains("bpvec-like"), "{err}");
    }

    #[test]
    fn zero_buffer_rejected() {
        let mut cfg = AcceleratorConfig::preset("bitfusion-like").unwrap();
        cfg.wgt_buffer_bytes = 0;
        match load_config(&cfg.to_json()) {
            Err(SimError::Config(v)) => assert_eq!(v, vec!["wgt_buffer_bytes: must be positive"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = load_config(r#"{"name": "x", "style": "FusedSystolic"}"#).unwrap_err();
        assert!(err.to_string().contains("mult_count"), "{err}");
        let err = load_config(r#"{"name": "x", "style": "Systolic"}"#).unwrap_err();
        assert!(err.to_string().contains("Systolic"), "{err}");
    }

    #[test]
    fn dram_energy_defaults_to_ddr4_figure() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&AcceleratorConfig::preset("bpvec-like").unwrap().to_json()).unwrap();
        doc["energy"].as_object_mut().unwrap().remove("e_dram_pj_per_bit");
        let cfg = load_config(&doc.to_string()).unwrap();
        assert_eq!(cfg.energy.e_dram_pj_per_bit, 15.0);
    }
}
