//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use shellcap_core::model::surface_measure;

use crate::config::{Format, RunConfig};
use crate::sweep::{PointOutcome, SweepRecord};

pub const CSV_HEADER: [&str; 10] = [
    "snr_db",
    "amplitude",
    "lower_bpcu",
    "upper_bpcu",
    "k_hat",
    "k_lower",
    "radii_norm",
    "probs",
    "converged",
    "wall_time_s",
];

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes the sweep table. List columns are `;`-separated.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.snr_db.to_string(),
            r.amplitude.to_string(),
            r.lower_bpcu.to_string(),
            r.upper_bpcu.to_string(),
            r.k_hat.to_string(),
            r.k_lower.to_string(),
            join(&r.radii_norm),
            join(&r.probs),
            r.converged.to_string(),
            r.wall_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let split = |s: &str| -> Result<Vec<f64>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(';').map(|v| v.parse::<f64>().context("bad list entry")).collect()
    };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).context("short row");
        out.push(SweepRecord {
            snr_db: f(0)?.parse()?,
            amplitude: f(1)?.parse()?,
            lower_bpcu: f(2)?.parse()?,
            upper_bpcu: f(3)?.parse()?,
            k_hat: f(4)?.parse()?,
            k_lower: f(5)?.parse()?,
            radii_norm: split(f(6)?)?,
            probs: split(f(7)?)?,
            converged: f(8)?.parse()?,
            wall_time_s: f(9)?.parse()?,
        });
    }
    Ok(out)
}

/// One shell as dumped: radius, normalized radius, probability and the
/// probability per unit surface (`None` for the shell at the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfEntry {
    pub rho: f64,
    pub rho_norm: f64,
    pub p: f64,
    #[serde(rename = "p_over_S")]
    pub p_over_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRecord {
    pub snr_db: f64,
    pub amplitude: f64,
    pub lower_bpcu: f64,
    pub upper_bpcu: f64,
    pub k_hat: usize,
    pub k_lower: u32,
    pub pmf: Vec<PmfEntry>,
    pub converged: bool,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_bpcu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_std_error_bpcu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonDoc {
    pub config: RunConfig,
    pub records: Vec<JsonRecord>,
}

/// Shell table sorted by decreasing radius.
pub fn pmf_entries(point: &PointOutcome) -> Vec<PmfEntry> {
    let a = point.params.amplitude();
    let n = point.params.n_dim();
    let pmf = &point.result.pmf;
    let mut rows: Vec<PmfEntry> = pmf
        .radii()
        .iter()
        .zip(pmf.probs())
        .map(|(&rho, &p)| {
            let s = surface_measure(n, rho);
            PmfEntry { rho, rho_norm: rho / a, p, p_over_s: (s > 0.0).then(|| p / s) }
        })
        .collect();
    rows.sort_by(|x, y| y.rho.total_cmp(&x.rho));
    rows
}

pub fn json_record(point: &PointOutcome) -> JsonRecord {
    let r = &point.record;
    JsonRecord {
        snr_db: r.snr_db,
        amplitude: r.amplitude,
        lower_bpcu: r.lower_bpcu,
        upper_bpcu: r.upper_bpcu,
        k_hat: r.k_hat,
        k_lower: r.k_lower,
        pmf: pmf_entries(point),
        converged: r.converged,
        wall_time_s: r.wall_time_s,
        mc_bpcu: point.mc.map(|m| m.mean),
        mc_std_error_bpcu: point.mc.map(|m| m.std_error),
    }
}

pub fn write_json<W: Write>(cfg: &RunConfig, points: &[PointOutcome], out: W) -> Result<()> {
    let doc = JsonDoc { config: cfg.clone(), records: points.iter().map(json_record).collect() };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

/// Writes the PMF of one point as `(rho_norm, p, p_over_S)` rows.
pub fn dump_pmf<W: Write>(point: &PointOutcome, format: Format, mut out: W) -> Result<()> {
    let rows = pmf_entries(point);
    if format.json() {
        serde_json::to_writer_pretty(&mut out, &rows)?;
        writeln!(out)?;
    }
    if format.csv() {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho_norm", "p", "p_over_S"])?;
        for r in &rows {
            let dens = r.p_over_s.map_or_else(|| "inf".to_string(), |v| v.to_string());
            w.write_record([r.rho_norm.to_string(), r.p.to_string(), dens])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes the sweep files (or stdout) and per-point PMF dumps as
/// configured.
pub fn write_outputs(cfg: &RunConfig, points: &[PointOutcome]) -> Result<()> {
    let records: Vec<SweepRecord> = points.iter().map(|p| p.record.clone()).collect();
    match &cfg.out {
        Some(prefix) => {
            if cfg.format.csv() {
                let path = with_extension(prefix, "csv");
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_csv(&records, f)?;
            }
            if cfg.format.json() {
                let path = with_extension(prefix, "json");
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_json(cfg, points, f)?;
            }
        }
        None => {
            let stdout = io::stdout().lock();
            if cfg.format.json() {
                write_json(cfg, points, stdout)?;
                println!();
            } else {
                write_csv(&records, stdout)?;
            }
        }
    }
    if let Some(dir) = &cfg.dump_pmf {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for p in points {
            let formats: &[(Format, &str)] = match cfg.format {
                Format::Both => &[(Format::Csv, "csv"), (Format::Json, "json")],
                Format::Csv => &[(Format::Csv, "csv")],
                Format::Json => &[(Format::Json, "json")],
            };
            for &(fmt, ext) in formats {
                let path = dir.join(format!("pmf_snr_{}.{ext}", p.record.snr_db));
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                dump_pmf(p, fmt, f)?;
            }
        }
    }
    Ok(())
}
