//! Report files: JSON, CSV tables, whitespace columns for gnuplot and
//! field dumps. Nothing time-dependent goes into these, so equal seeds give
//! byte-identical files; wall-clock timings live in `timing.json`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hydrolim_core::dual::DiffusionResult;
use hydrolim_core::field::DensityField;
use serde::Serialize;

use crate::config::FieldFormat;
use crate::exact::ExactDiagnostics;
use crate::experiment::{ComparisonReport, StudyTable};
use crate::HarnessError;

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Header carried by every field file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub side: usize,
    /// Block radius for empirical fields, 0 for PDE fields.
    pub block_radius: usize,
    pub time: f64,
    /// `None` for ensemble means and PDE fields.
    pub replica: Option<u64>,
    pub seed: u64,
}

pub const FIELD_MAGIC: &[u8; 4] = b"HLF1";

/// Writes `field` to `base` with extension `.csv` or `.bin`; returns the path.
///
/// CSV: a `#` header line with `key=value` pairs, a column header, then
/// one row per cell (`x0[,x1[,x2]],value`). Binary (little endian): magic
/// `HLF1`, `u32` dim, `u32` side, `u32` block radius, `f64` time, `u64`
/// replica (`u64::MAX` for none), `u64` seed, then `side^dim` `f64` values
/// with axis 0 varying fastest.
pub fn write_field(
    base: &Path,
    field: &DensityField,
    header: FieldHeader,
    format: FieldFormat,
) -> Result<Option<PathBuf>, HarnessError> {
    match format {
        FieldFormat::None => Ok(None),
        FieldFormat::Csv => {
            let path = base.with_extension("csv");
            let mut s = String::new();
            let replica = header.replica.map_or("none".to_string(), |r| r.to_string());
            writeln!(
                s,
                "# dim={} side={} block_radius={} time={} replica={} seed={}",
                header.dim, header.side, header.block_radius, header.time, replica, header.seed
            )
            .unwrap();
            let cols: Vec<String> = (0..field.dim()).map(|i| format!("x{i}")).collect();
            writeln!(s, "{},value", cols.join(",")).unwrap();
            for (x, v) in field.values().iter().enumerate() {
                let c = field.coords(x);
                for ci in &c[..field.dim()] {
                    write!(s, "{ci},").unwrap();
                }
                writeln!(s, "{v:e}").unwrap();
            }
            fs::write(&path, s)?;
            Ok(Some(path))
        }
        FieldFormat::Binary => {
            let path = base.with_extension("bin");
            let mut buf = Vec::with_capacity(40 + 8 * field.len());
            buf.extend_from_slice(FIELD_MAGIC);
            buf.extend_from_slice(&(header.dim as u32).to_le_bytes());
            buf.extend_from_slice(&(header.side as u32).to_le_bytes());
            buf.extend_from_slice(&(header.block_radius as u32).to_le_bytes());
            buf.extend_from_slice(&header.time.to_le_bytes());
            buf.extend_from_slice(&header.replica.unwrap_or(u64::MAX).to_le_bytes());
            buf.extend_from_slice(&header.seed.to_le_bytes());
            for v in field.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            fs::File::create(&path)?.write_all(&buf)?;
            Ok(Some(path))
        }
    }
}

/// Reads a binary field written by [`write_field`].
pub fn read_binary_field(path: &Path) -> Result<(FieldHeader, DensityField), HarnessError> {
    let bytes = fs::read(path)?;
    let bad = || HarnessError::Config(format!("{} is not a field file", path.display()));
    if bytes.len() < 40 || &bytes[..4] != FIELD_MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (dim, side, block_radius) = (u32_at(4), u32_at(8), u32_at(12));
    let time = f64::from_bits(u64_at(16));
    let replica = Some(u64_at(24)).filter(|&r| r != u64::MAX);
    let seed = u64_at(32);
    let values: Vec<f64> = bytes[40..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let field = DensityField::new(dim, side, values).map_err(|_| bad())?;
    Ok((FieldHeader { dim, side, block_radius, time, replica, seed }, field))
}

fn write_table(dir: &Path, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut csv = header.join(",");
    csv.push('\n');
    let mut dat = format!("# {}\n", header.join(" "));
    for r in rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
        dat.push_str(&r.join(" "));
        dat.push('\n');
    }
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    fs::write(dir.join(format!("{stem}.dat")), dat)?;
    Ok(())
}

/// `report.json`, `distances.csv` and `distances.dat`.
pub fn emit_report(report: &ComparisonReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.side.to_string(),
                r.time.to_string(),
                format!("{:e}", r.l1),
                format!("{:e}", r.l2),
                format!("{:e}", r.linf),
            ]
        })
        .collect();
    write_table(dir, "distances", &["side", "time", "l1", "l2", "linf"], &rows)
}

/// `study.csv` and `study.dat`.
pub fn emit_study(table: &StudyTable, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("study.json"), table)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.side.to_string(),
                r.time.to_string(),
                format!("{:e}", r.l1),
                format!("{:e}", r.l2),
                format!("{:e}", r.noise_floor),
            ]
        })
        .collect();
    write_table(dir, "study", &["side", "time", "l1", "l2", "noise_floor"], &rows)
}

/// `diffusion.json` and a flat `a_table.csv` (row-major entries per α).
pub fn emit_diffusion(result: &DiffusionResult, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("diffusion.json"), result)?;
    let d = result.dim;
    let mut header = vec!["alpha".to_string()];
    for m in ["d", "a", "j"] {
        for i in 0..d {
            for j in 0..d {
                header.push(format!("{m}{}{}", i + 1, j + 1));
            }
        }
    }
    header.push("min_eig_d_minus_alpha_sigma".into());
    let rows: Vec<Vec<String>> = result
        .entries
        .iter()
        .map(|e| {
            let mut r = vec![e.alpha.to_string()];
            for m in [&e.d, &e.a, &e.j] {
                for row in m {
                    r.extend(row.iter().map(|v| format!("{v:e}")));
                }
            }
            r.push(format!("{:e}", e.min_eig_d_minus_alpha_sigma));
            r
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(dir, "a_table", &h, &rows)
}

/// `exact.json` and `entropy.csv`.
pub fn emit_exact(diag: &ExactDiagnostics, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("exact.json"), diag)?;
    let rows: Vec<Vec<String>> = diag
        .entropy
        .iter()
        .map(|p| {
            vec![p.time.to_string(), format!("{:e}", p.exact), p.product.map_or("nan".into(), |v| format!("{v:e}"))]
        })
        .collect();
    write_table(dir, "entropy", &["time", "exact", "product"], &rows)
}

/// Wall-clock seconds per phase, kept apart from the reproducible files.
pub fn write_timing(dir: &Path, phases: &[(String, f64)]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let map: serde_json::Map<String, serde_json::Value> =
        phases.iter().map(|(k, v)| (k.clone(), serde_json::json!(v))).collect();
    write_json(&dir.join("timing.json"), &map)
}
