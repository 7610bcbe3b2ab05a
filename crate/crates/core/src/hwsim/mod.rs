//! Cycle, traffic and energy model of 2-bit bit-parallel accelerators.
//!
//! Two datapath styles are modeled: a fused systolic array of 2-bit
//! multipliers and narrow vector engines feeding adder trees. A network is
//! run either as M-bit layers iterated over all B-bit limb pairs, or as a
//! parallel-group network whose grouped B-bit convs run directly.
//!
//! Cycle counts are idealized: no pipeline fill and no control overhead.
//! Only ratios between two runs on the same config are meaningful.

mod config;
mod report;
mod schedule;
mod sim;

pub use config::{load_config, AccelStyle, AcceleratorConfig, EnergyModel, PRESET_NAMES};
pub use schedule::{fused_pairs, layer_works, schedule, schedule_layer, LayerWork, TileSchedule};
pub use sim::{compare, simulate, Comparison, EnergyBreakdown, LayerStats, SimReport, Totals};
pub use report::{comparison_grid, sweep, GridRow, SweepPoint, PUBLISHED_RATIOS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{NetError, NetworkSpec, Scheme};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown accelerator preset {name:?} (available: {available})")]
    UnknownPreset { name: String, available: String },
    #[error("invalid accelerator config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("accelerator config: {0}")]
    Io(#[from] std::io::Error),
    #[error("layer {layer}: buffer too small for minimum tile ({detail})")]
    BufferTooSmall { layer: String, detail: String },
    #[error("layer {layer}: {msg}")]
    Layer { layer: String, msg: String },
    #[error("execution mode {mode} does not match network scheme {scheme}")]
    ModeMismatch { mode: String, scheme: String },
    #[error("reports come from different accelerator configs ({0} vs {1})")]
    ConfigMismatch(String, String),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// How M-bit arithmetic reaches the native-width multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecutionMode {
    /// Every M-bit product is `ceil(M/B)^2` shifted B-bit limb products.
    NibbleIteration { total_bits: u32, limb_bits: u32 },
    /// A parallel-group network: G grouped B-bit paths, one pass each.
    PalQuantGroups { limb_bits: u32, groups: usize },
}

impl ExecutionMode {
    pub fn limb_bits(self) -> u32 {
        match self {
            Self::NibbleIteration { limb_bits, .. } | Self::PalQuantGroups { limb_bits, .. } => limb_bits,
        }
    }

    /// Limb passes per M-bit product (nibble) or path count (groups).
    pub fn group_count(self) -> u64 {
        match self {
            Self::NibbleIteration { total_bits, limb_bits } => {
                u64::from(total_bits.div_ceil(limb_bits.max(1)))
            }
            Self::PalQuantGroups { groups, .. } => groups as u64,
        }
    }

    /// The mode natural to a network's scheme: uniform networks iterate
    /// over `limb_bits` limbs, parallel-group networks run as they are.
    pub fn for_scheme(scheme: Scheme, limb_bits: u32) -> Result<Self> {
        match scheme {
            Scheme::Uniform { b_a, b_w } => Ok(Self::NibbleIteration {
                total_bits: b_a.max(b_w),
                limb_bits,
            }),
            Scheme::PalQuant { limb_bits, groups } => Ok(Self::PalQuantGroups { limb_bits, groups }),
            Scheme::FullPrecision => Err(SimError::ModeMismatch {
                mode: "any".into(),
                scheme: scheme.to_string(),
            }),
        }
    }

    fn check(self, spec: &NetworkSpec) -> Result<()> {
        let ok = match (self, spec.scheme) {
            (Self::NibbleIteration { total_bits, limb_bits }, Scheme::Uniform { b_a, b_w }) => {
                limb_bits >= 1 && b_a.max(b_w) == total_bits
            }
            (Self::PalQuantGroups { limb_bits, groups }, Scheme::PalQuant { limb_bits: b, groups: g }) => {
                limb_bits == b && groups == g
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::ModeMismatch {
                mode: self.to_string(),
                scheme: spec.scheme.to_string(),
            })
        }
    }
}

impl std::fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NibbleIteration { total_bits, limb_bits } => {
                write!(f, "nibble-iteration(M={total_bits},B={limb_bits})")
            }
            Self::PalQuantGroups { limb_bits, groups } => write!(f, "palquant(B={limb_bits},G={groups})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_counts() {
        let nib = ExecutionMode::NibbleIteration { total_bits: 6, limb_bits: 2 };
        assert_eq!(nib.group_count(), 3);
        let odd = ExecutionMode::NibbleIteration { total_bits: 5, limb_bits: 2 };
        assert_eq!(odd.group_count(), 3);
        let pal = ExecutionMode::PalQuantGroups { limb_bits: 2, groups: 4 };
        assert_eq!(pal.group_count(), 4);
    }

    #[test]
    fn mode_must_match_scheme() {
        let mut spec = crate::netmodel::build_network(crate::netmodel::Arch::ResNet18);
        spec.scheme = Scheme::Uniform { b_a: 4, b_w: 4 };
        let pal = ExecutionMode::PalQuantGroups { limb_bits: 2, groups: 2 };
        assert!(matches!(pal.check(&spec), Err(SimError::ModeMismatch { .. })));
        let nib = ExecutionMode::for_scheme(spec.scheme, 2).unwrap();
        assert!(nib.check(&spec).is_ok());
    }
}
