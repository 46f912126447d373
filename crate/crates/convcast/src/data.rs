//! Synthesis-sweep datasets: a deterministic virtual-synthesis oracle, an
//! optional multiplicative noise layer, and the CSV interchange format for
//! synthesis reports.

use std::io::{BufRead, BufReader, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{
    descriptor, validate_config, BlockKind, ConfigPoint, ResourceKind, ResourceVector,
    SWEEP_MAX_BITS, SWEEP_MIN_BITS,
};

/// Exact CSV header of the dataset interchange format.
pub const DATASET_HEADER: &str = "block,platform,data_bits,coeff_bits,llut,mlut,ff,cchain,dsp";

/// One measured (or generated) resource vector for a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRecord {
    pub block: BlockKind,
    pub platform: String,
    pub cfg: ConfigPoint,
    pub measured: ResourceVector,
}

impl SynthesisRecord {
    fn key(&self) -> (BlockKind, &str, u8, u8) {
        (
            self.block,
            self.platform.as_str(),
            self.cfg.data_bits,
            self.cfg.coeff_bits,
        )
    }
}

/// An ordered set of records, unique per (block, platform, config).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<SynthesisRecord>,
}

impl Dataset {
    /// Builds a dataset, canonically sorting by (block, platform, d, c).
    /// Fails on duplicate configurations.
    pub fn new(mut records: Vec<SynthesisRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        for pair in records.windows(2) {
            if pair[0].key() == pair[1].key() {
                return Err(Error::DuplicateConfig {
                    line: 0,
                    block: pair[0].block,
                    platform: pair[0].platform.clone(),
                    d: pair[0].cfg.data_bits,
                    c: pair[0].cfg.coeff_bits,
                });
            }
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[SynthesisRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_block(&self, block: BlockKind) -> impl Iterator<Item = &SynthesisRecord> {
        self.records.iter().filter(move |r| r.block == block)
    }
}

/// Relative multiplicative noise applied to generated measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Relative standard deviation (fraction, >= 0).
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Deterministic per-configuration resource cost. Real-valued; measurement
/// records round each component to the nearest integer.
pub fn oracle_cost(block: BlockKind, cfg: ConfigPoint) -> Result<ResourceVector> {
    validate_config(block, cfg)?;
    let d = cfg.data_bits as f64;
    let c = cfg.coeff_bits as f64;
    let (llut, ff, cchain) = match block {
        BlockKind::Conv1 => (
            4.87 + 4.0 * d + 4.4 * c + 0.5 * d * c,
            5.37 + 3.0 * d + 3.0 * c,
            0.29 + 0.5625 * (d + c),
        ),
        BlockKind::Conv2 => (8.04 + 1.0 * d + 1.1 * c, 2.10 + 2.405 * c, 0.0),
        BlockKind::Conv3 => {
            let llut = if cfg.coeff_bits <= 5 { 30.0 } else { 35.84 };
            (llut, 2.0 + 3.585 * c, 0.0)
        }
        BlockKind::Conv4 => (20.886 + 1.004 * d + 1.037 * c, 2.01 + 2.5 * c, 0.0),
    };
    Ok(ResourceVector {
        llut,
        mlut: 0.2 * llut,
        ff,
        cchain,
        dsp: descriptor(block).dsp_per_block as f64,
    })
}

/// splitmix64 finalizer, used to derive independent per-component streams.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn component_seed(seed: u64, block: BlockKind, cfg: ConfigPoint, component: ResourceKind) -> u64 {
    let tag = (block.index() as u64) << 24
        | (cfg.data_bits as u64) << 16
        | (cfg.coeff_bits as u64) << 8
        | component as u64;
    mix64(seed ^ mix64(tag))
}

fn noisy_component(base: f64, sigma: f64, stream_seed: u64) -> f64 {
    if sigma == 0.0 {
        return base;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let eps = Normal::new(0.0, sigma)
        .expect("sigma >= 0")
        .sample(&mut rng);
    (base * (1.0 + eps)).max(0.0)
}

fn check_range(name: &'static str, lo: u8, hi: u8) -> Result<()> {
    if lo > hi {
        return Err(Error::InvertedRange { name, lo, hi });
    }
    if lo < SWEEP_MIN_BITS {
        return Err(Error::WidthBelowSweep {
            field: name,
            value: lo,
        });
    }
    if hi > SWEEP_MAX_BITS {
        return Err(Error::WidthAboveSweep {
            field: name,
            value: hi,
        });
    }
    Ok(())
}

fn sweep_configs(block: BlockKind, d_range: (u8, u8), c_range: (u8, u8)) -> Vec<ConfigPoint> {
    let limit = descriptor(block).max_operand_bits;
    let (d_lo, d_hi) = (d_range.0, d_range.1.min(limit));
    let (c_lo, c_hi) = (c_range.0, c_range.1.min(limit));
    let mut out = Vec::new();
    for d in d_lo..=d_hi {
        for c in c_lo..=c_hi {
            out.push(ConfigPoint::new(d, c));
        }
    }
    out
}

/// Generates one rounded measurement record per valid (block, d, c), with an
/// optional deterministic multiplicative noise layer. DSP counts are never
/// noised. Ranges for Conv3 are clipped to its 8-bit operand limit.
pub fn generate_dataset(
    blocks: &[BlockKind],
    d_range: (u8, u8),
    c_range: (u8, u8),
    noise: &NoiseSpec,
    platform: &str,
) -> Result<Dataset> {
    if blocks.is_empty() {
        return Err(Error::EmptyBlockSet);
    }
    check_range("data_bits", d_range.0, d_range.1)?;
    check_range("coeff_bits", c_range.0, c_range.1)?;
    let mut records = Vec::new();
    for &block in blocks {
        for cfg in sweep_configs(block, d_range, c_range) {
            let base = oracle_cost(block, cfg)?;
            let mut measured = ResourceVector::default();
            for r in ResourceKind::ALL {
                let value = if r == ResourceKind::Dsp {
                    base.dsp
                } else {
                    noisy_component(
                        base.get(r),
                        noise.sigma,
                        component_seed(noise.seed, block, cfg, r),
                    )
                };
                measured.set(r, value.round());
            }
            records.push(SynthesisRecord {
                block,
                platform: platform.to_string(),
                cfg,
                measured,
            });
        }
    }
    Dataset::new(records)
}

/// The calibration counterpart of [`generate_dataset`]: noise-free records
/// carrying the oracle's real-valued costs, for exact model recovery.
pub fn oracle_sweep(
    blocks: &[BlockKind],
    d_range: (u8, u8),
    c_range: (u8, u8),
    platform: &str,
) -> Result<Dataset> {
    if blocks.is_empty() {
        return Err(Error::EmptyBlockSet);
    }
    check_range("data_bits", d_range.0, d_range.1)?;
    check_range("coeff_bits", c_range.0, c_range.1)?;
    let mut records = Vec::new();
    for &block in blocks {
        for cfg in sweep_configs(block, d_range, c_range) {
            records.push(SynthesisRecord {
                block,
                platform: platform.to_string(),
                cfg,
                measured: oracle_cost(block, cfg)?,
            });
        }
    }
    Dataset::new(records)
}

fn format_count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Writes the dataset in the interchange format (UTF-8, `\n` line endings).
pub fn write_csv<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    out.write_all(DATASET_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for rec in dataset.records() {
        let m = rec.measured;
        let row = format!(
            "{},{},{},{},{},{},{},{},{}\n",
            rec.block,
            rec.platform,
            rec.cfg.data_bits,
            rec.cfg.coeff_bits,
            format_count(m.llut),
            format_count(m.mlut),
            format_count(m.ff),
            format_count(m.cchain),
            format_count(m.dsp),
        );
        out.write_all(row.as_bytes())?;
    }
    Ok(())
}

pub fn to_csv_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// Reads and validates a dataset: schema, ranges, uniqueness; records are
/// sorted canonically. Every failure is reported with its line number.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::CsvFormat {
                line: 1,
                message: "empty file".to_string(),
            })
        }
    };
    if header.trim_end() != DATASET_HEADER {
        return Err(Error::CsvFormat {
            line: 1,
            message: format!("expected header `{DATASET_HEADER}`, got `{header}`"),
        });
    }

    let mut records = Vec::new();
    let mut seen: Vec<((BlockKind, String, u8, u8), usize)> = Vec::new();
    for (idx, row) in lines.enumerate() {
        let line = idx + 2;
        let row = row?;
        if row.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 9 {
            return Err(Error::CsvFormat {
                line,
                message: format!("expected 9 cells, got {}", cells.len()),
            });
        }
        let block: BlockKind = cells[0].parse().map_err(|_| Error::CsvFormat {
            line,
            message: format!("unknown block `{}`", cells[0]),
        })?;
        let platform = cells[1].to_string();
        if platform.is_empty() {
            return Err(Error::CsvFormat {
                line,
                message: "empty platform id".to_string(),
            });
        }
        let parse_width = |cell: &str, name: &str| -> Result<u8> {
            cell.parse().map_err(|_| Error::CsvFormat {
                line,
                message: format!("non-integer {name} `{cell}`"),
            })
        };
        let d = parse_width(cells[2], "data_bits")?;
        let c = parse_width(cells[3], "coeff_bits")?;
        let cfg = ConfigPoint::new(d, c);
        validate_config(block, cfg).map_err(|e| Error::CsvFormat {
            line,
            message: e.to_string(),
        })?;
        let mut measured = ResourceVector::default();
        for (cell, kind) in cells[4..].iter().zip(ResourceKind::ALL) {
            let value: u64 = cell.parse().map_err(|_| Error::CsvFormat {
                line,
                message: format!("non-integer {kind} cell `{cell}`"),
            })?;
            measured.set(kind, value as f64);
        }
        let key = (block, platform.clone(), d, c);
        if seen.iter().any(|(k, _)| *k == key) {
            return Err(Error::DuplicateConfig {
                line,
                block,
                platform,
                d,
                c,
            });
        }
        seen.push((key, line));
        records.push(SynthesisRecord {
            block,
            platform,
            cfg,
            measured,
        });
    }
    Dataset::new(records)
}
