//! Domain types shared by every other module: block identities and
//! attributes, configuration points, resource vectors, platform capacities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the synthesis sweep for both operand widths.
pub const SWEEP_MIN_BITS: u8 = 3;
/// Upper bound of the synthesis sweep for both operand widths.
pub const SWEEP_MAX_BITS: u8 = 16;

/// The four convolution block variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Conv1,
    Conv2,
    Conv3,
    Conv4,
}

impl BlockKind {
    pub const ALL: [BlockKind; 4] = [
        BlockKind::Conv1,
        BlockKind::Conv2,
        BlockKind::Conv3,
        BlockKind::Conv4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Conv1 => "conv1",
            BlockKind::Conv2 => "conv2",
            BlockKind::Conv3 => "conv3",
            BlockKind::Conv4 => "conv4",
        }
    }

    /// Stable ordinal, 0..4.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv1" => Ok(BlockKind::Conv1),
            "conv2" => Ok(BlockKind::Conv2),
            "conv3" => Ok(BlockKind::Conv3),
            "conv4" => Ok(BlockKind::Conv4),
            other => Err(Error::UnknownBlock(other.to_string())),
        }
    }
}

/// Fixed per-variant attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockDescriptor {
    pub kind: BlockKind,
    pub dsp_per_block: u32,
    pub convs_per_cycle: u32,
    pub max_operand_bits: u8,
    pub uses_cchain: bool,
}

/// Attribute row for a block kind.
pub const fn descriptor(kind: BlockKind) -> BlockDescriptor {
    match kind {
        BlockKind::Conv1 => BlockDescriptor {
            kind,
            dsp_per_block: 0,
            convs_per_cycle: 1,
            max_operand_bits: 16,
            uses_cchain: true,
        },
        BlockKind::Conv2 => BlockDescriptor {
            kind,
            dsp_per_block: 1,
            convs_per_cycle: 1,
            max_operand_bits: 16,
            uses_cchain: false,
        },
        BlockKind::Conv3 => BlockDescriptor {
            kind,
            dsp_per_block: 1,
            convs_per_cycle: 2,
            max_operand_bits: 8,
            uses_cchain: false,
        },
        BlockKind::Conv4 => BlockDescriptor {
            kind,
            dsp_per_block: 2,
            convs_per_cycle: 2,
            max_operand_bits: 16,
            uses_cchain: false,
        },
    }
}

/// One point of the sweep domain: data width `d` and coefficient width `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub data_bits: u8,
    pub coeff_bits: u8,
}

impl ConfigPoint {
    pub fn new(data_bits: u8, coeff_bits: u8) -> Self {
        ConfigPoint {
            data_bits,
            coeff_bits,
        }
    }
}

/// Checks sweep bounds and the block's operand limit.
pub fn validate_config(kind: BlockKind, cfg: ConfigPoint) -> Result<()> {
    for (field, value) in [("data_bits", cfg.data_bits), ("coeff_bits", cfg.coeff_bits)] {
        if value < SWEEP_MIN_BITS {
            return Err(Error::WidthBelowSweep { field, value });
        }
        if value > SWEEP_MAX_BITS {
            return Err(Error::WidthAboveSweep { field, value });
        }
        let limit = descriptor(kind).max_operand_bits;
        if value > limit {
            return Err(Error::OperandLimit {
                kind,
                limit,
                field,
                value,
            });
        }
    }
    Ok(())
}

/// Resource column labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Llut,
    Mlut,
    Ff,
    Cchain,
    Dsp,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 5] = [
        ResourceKind::Llut,
        ResourceKind::Mlut,
        ResourceKind::Ff,
        ResourceKind::Cchain,
        ResourceKind::Dsp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Llut => "llut",
            ResourceKind::Mlut => "mlut",
            ResourceKind::Ff => "ff",
            ResourceKind::Cchain => "cchain",
            ResourceKind::Dsp => "dsp",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llut" => Ok(ResourceKind::Llut),
            "mlut" => Ok(ResourceKind::Mlut),
            "ff" => Ok(ResourceKind::Ff),
            "cchain" => Ok(ResourceKind::Cchain),
            "dsp" => Ok(ResourceKind::Dsp),
            other => Err(Error::UnknownResource(other.to_string())),
        }
    }
}

/// Per-resource quantities. Integers for measurements, reals for predictions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceVector {
    pub llut: f64,
    pub mlut: f64,
    pub ff: f64,
    pub cchain: f64,
    pub dsp: f64,
}

impl ResourceVector {
    pub fn new(llut: f64, mlut: f64, ff: f64, cchain: f64, dsp: f64) -> Self {
        ResourceVector {
            llut,
            mlut,
            ff,
            cchain,
            dsp,
        }
    }

    /// Same value in every component.
    pub fn splat(v: f64) -> Self {
        ResourceVector::new(v, v, v, v, v)
    }

    pub fn get(&self, kind: ResourceKind) -> f64 {
        match kind {
            ResourceKind::Llut => self.llut,
            ResourceKind::Mlut => self.mlut,
            ResourceKind::Ff => self.ff,
            ResourceKind::Cchain => self.cchain,
            ResourceKind::Dsp => self.dsp,
        }
    }

    pub fn set(&mut self, kind: ResourceKind, value: f64) {
        match kind {
            ResourceKind::Llut => self.llut = value,
            ResourceKind::Mlut => self.mlut = value,
            ResourceKind::Ff => self.ff = value,
            ResourceKind::Cchain => self.cchain = value,
            ResourceKind::Dsp => self.dsp = value,
        }
    }

    /// Each component rounded to the nearest integer.
    pub fn rounded(&self) -> Self {
        let mut out = *self;
        for r in ResourceKind::ALL {
            out.set(r, self.get(r).round());
        }
        out
    }

    pub fn is_integral(&self) -> bool {
        ResourceKind::ALL.iter().all(|&r| {
            let v = self.get(r);
            v.fract() == 0.0
        })
    }

    pub fn is_non_negative(&self) -> bool {
        ResourceKind::ALL.iter().all(|&r| self.get(r) >= 0.0)
    }
}

/// Total resources of a target device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformCapacity {
    pub platform_id: String,
    pub totals: ResourceVector,
}

impl PlatformCapacity {
    /// Built-in Zynq UltraScale+ ZCU104 profile (XCZU7EV).
    pub fn zcu104() -> Self {
        PlatformCapacity {
            platform_id: "zcu104".to_string(),
            totals: ResourceVector::new(230_400.0, 0.0, 460_800.0, 28_800.0, 1_728.0),
        }
    }
}

/// Looks up a built-in platform profile by id.
pub fn capacity(platform_id: &str) -> Result<PlatformCapacity> {
    match platform_id {
        "zcu104" => Ok(PlatformCapacity::zcu104()),
        other => Err(Error::UnknownPlatform(other.to_string())),
    }
}

/// Parses a capacity file: CSV with header `platform,llut,mlut,ff,cchain,dsp`,
/// one row per device.
pub fn parse_capacity_csv(text: &str) -> Result<Vec<PlatformCapacity>> {
    const HEADER: &str = "platform,llut,mlut,ff,cchain,dsp";
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::CsvFormat {
        line: 1,
        message: "empty capacity file".to_string(),
    })?;
    if header.trim_end() != HEADER {
        return Err(Error::CsvFormat {
            line: 1,
            message: format!("expected header `{HEADER}`, got `{header}`"),
        });
    }
    let mut out = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        if row.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::CsvFormat {
                line,
                message: format!("expected 6 cells, got {}", cells.len()),
            });
        }
        let platform_id = cells[0].trim().to_string();
        if platform_id.is_empty() {
            return Err(Error::CsvFormat {
                line,
                message: "empty platform id".to_string(),
            });
        }
        let mut totals = ResourceVector::default();
        for (cell, kind) in cells[1..].iter().zip(ResourceKind::ALL) {
            let value: u64 = cell.trim().parse().map_err(|_| Error::CsvFormat {
                line,
                message: format!("non-integer {kind} capacity `{cell}`"),
            })?;
            totals.set(kind, value as f64);
        }
        out.push(PlatformCapacity {
            platform_id,
            totals,
        });
    }
    Ok(out)
}

/// Resolves a platform id against an optional capacity file, falling back to
/// the built-in profiles.
pub fn resolve_capacity(platform_id: &str, extra: &[PlatformCapacity]) -> Result<PlatformCapacity> {
    if let Some(found) = extra.iter().find(|p| p.platform_id == platform_id) {
        return Ok(found.clone());
    }
    capacity(platform_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_matches_attribute_table() {
        let d1 = descriptor(BlockKind::Conv1);
        assert_eq!((d1.dsp_per_block, d1.convs_per_cycle), (0, 1));
        assert!(d1.uses_cchain);
        let d2 = descriptor(BlockKind::Conv2);
        assert_eq!((d2.dsp_per_block, d2.convs_per_cycle), (1, 1));
        let d3 = descriptor(BlockKind::Conv3);
        assert_eq!((d3.dsp_per_block, d3.convs_per_cycle), (1, 2));
        assert_eq!(d3.max_operand_bits, 8);
        let d4 = descriptor(BlockKind::Conv4);
        assert_eq!((d4.dsp_per_block, d4.convs_per_cycle), (2, 2));
        assert_eq!(d4.max_operand_bits, 16);
        // pure and total
        for kind in BlockKind::ALL {
            assert_eq!(descriptor(kind), descriptor(kind));
            assert_eq!(descriptor(kind).kind, kind);
        }
    }

    #[test]
    fn validate_config_bounds() {
        assert!(validate_config(BlockKind::Conv1, ConfigPoint::new(3, 3)).is_ok());
        assert!(validate_config(BlockKind::Conv1, ConfigPoint::new(16, 16)).is_ok());
        match validate_config(BlockKind::Conv3, ConfigPoint::new(9, 4)) {
            Err(Error::OperandLimit {
                limit: 8, value: 9, ..
            }) => {}
            other => panic!("expected operand-limit violation, got {other:?}"),
        }
        match validate_config(BlockKind::Conv2, ConfigPoint::new(2, 8)) {
            Err(Error::WidthBelowSweep { value: 2, .. }) => {}
            other => panic!("expected below-sweep violation, got {other:?}"),
        }
        assert!(validate_config(BlockKind::Conv2, ConfigPoint::new(8, 17)).is_err());
    }

    #[test]
    fn zcu104_totals() {
        let cap = capacity("zcu104").unwrap();
        assert_eq!(cap.totals.llut, 230_400.0);
        assert_eq!(cap.totals.ff, 460_800.0);
        assert_eq!(cap.totals.dsp, 1_728.0);
        assert_eq!(cap.totals.cchain, 28_800.0);
        assert!(capacity("unknown-board").is_err());
    }

    #[test]
    fn capacity_csv_roundtrip_and_errors() {
        let text = "platform,llut,mlut,ff,cchain,dsp\nzcu102,274080,144000,548160,34260,2520\n";
        let caps = parse_capacity_csv(text).unwrap();
        assert_eq!(caps.len(), 1);
        assert_eq!(caps[0].platform_id, "zcu102");
        assert_eq!(caps[0].totals.dsp, 2520.0);
        let found = resolve_capacity("zcu102", &caps).unwrap();
        assert_eq!(found.totals.llut, 274_080.0);
        // built-in fallback still works
        assert!(resolve_capacity("zcu104", &caps).is_ok());
        assert!(parse_capacity_csv("bogus,header\n").is_err());
        assert!(parse_capacity_csv("platform,llut,mlut,ff,cchain,dsp\nx,1.5,0,0,0,0\n").is_err());
    }

    #[test]
    fn block_kind_serialization_is_stable() {
        for (kind, name) in BlockKind::ALL
            .iter()
            .zip(["conv1", "conv2", "conv3", "conv4"])
        {
            assert_eq!(kind.as_str(), name);
            assert_eq!(name.parse::<BlockKind>().unwrap(), *kind);
            assert_eq!(serde_json::to_string(kind).unwrap(), format!("\"{name}\""));
        }
    }
}
