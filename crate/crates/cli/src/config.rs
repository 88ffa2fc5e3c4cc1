//! Command-line flags, the optional TOML config file and their merge.
//!
//! Every flag has a config-file key of the same name without the leading
//! dashes (`--grid-points` ↔ `grid-points`). Precedence is flag, then file,
//! then built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use shellcap_core::solver::{InnerConfig, OuterConfig};
use shellcap_core::{bits_to_nats, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

/// Capacity of the amplitude-constrained N×N complex Gaussian MIMO channel.
#[derive(Debug, Parser)]
#[command(name = "shellcap", version, allow_negative_numbers = true)]
pub struct Cli {
    /// Channel dimension N.
    #[arg(long)]
    pub dim: Option<u32>,
    /// SNR in dB: a value, a comma-separated list, or lo:hi:count.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    /// Inner-layer tolerance (nats).
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Target width of the capacity bracket (bpcu).
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Initial gradient step in rho^2 (default 0.1 (A/K)^2).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Trailing inner iterations that must agree within eps1.
    #[arg(long)]
    pub m_window: Option<usize>,
    /// Iteration cap for one inner-layer run.
    #[arg(long)]
    pub max_inner: Option<usize>,
    /// Iteration cap for the outer layer.
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Minimum number of points in the upper-bound scan.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Probability mass dropped from the output integrals.
    #[arg(long)]
    pub tail_mass: Option<f64>,
    /// Absolute tolerance of the adaptive quadrature.
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Seed for the Monte-Carlo checks.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path prefix; `.csv` / `.json` are appended. Stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Start each SNR point from the previous point's radii.
    #[arg(long, value_enum)]
    pub warm_start: Option<Toggle>,
    /// Run the built-in property checks and exit.
    #[arg(long)]
    pub selftest: bool,
    /// Cross-check every point's lower bound by simulation.
    #[arg(long)]
    pub mc_check: bool,
    /// Samples per Monte-Carlo check.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// Worker threads for independent SNR points.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Directory receiving one PMF file per SNR point.
    #[arg(long)]
    pub dump_pmf: Option<PathBuf>,
    /// TOML file with defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// SNR list as written in a config file: a number, an array, or the same
/// string syntax as the flag.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub dim: Option<u32>,
    pub snr_db: Option<SnrSpec>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub mu: Option<f64>,
    pub m_window: Option<usize>,
    pub max_inner: Option<usize>,
    pub max_outer: Option<usize>,
    pub grid_points: Option<usize>,
    pub tail_mass: Option<f64>,
    pub abs_tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub warm_start: Option<Toggle>,
    pub mc_check: Option<bool>,
    pub mc_samples: Option<usize>,
    pub threads: Option<usize>,
    pub dump_pmf: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved run configuration; echoed into the JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: u32,
    pub snr_db: Vec<f64>,
    pub eps1: f64,
    /// bpcu
    pub eps2: f64,
    pub mu: Option<f64>,
    pub m_window: usize,
    pub max_inner: usize,
    pub max_outer: usize,
    pub grid_points: usize,
    pub tail_mass: f64,
    pub abs_tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub warm_start: bool,
    pub mc_check: bool,
    pub mc_samples: usize,
    pub threads: Option<usize>,
    pub dump_pmf: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let inner = InnerConfig::default();
        let outer = OuterConfig::default();
        let quad = QuadratureSpec::default();
        RunConfig {
            dim: 2,
            snr_db: Vec::new(),
            eps1: inner.eps1,
            eps2: 1e-2,
            mu: None,
            m_window: inner.m_window,
            max_inner: inner.max_iters,
            max_outer: outer.max_outer_iters,
            grid_points: outer.grid_points,
            tail_mass: quad.tail_mass,
            abs_tol: quad.abs_tol,
            seed: 0,
            out: None,
            format: Format::Csv,
            warm_start: true,
            mc_check: false,
            mc_samples: 100_000,
            threads: None,
            dump_pmf: None,
        }
    }
}

impl RunConfig {
    /// Merges flags over the config file (if any) over defaults.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let d = RunConfig::default();
        let snr_db = match (&cli.snr_db, file.snr_db) {
            (Some(text), _) => parse_snr_list(text)?,
            (None, Some(SnrSpec::One(x))) => vec![x],
            (None, Some(SnrSpec::Many(v))) => v,
            (None, Some(SnrSpec::Text(t))) => parse_snr_list(&t)?,
            (None, None) => Vec::new(),
        };
        let cfg = RunConfig {
            dim: cli.dim.or(file.dim).unwrap_or(d.dim),
            snr_db,
            eps1: cli.eps1.or(file.eps1).unwrap_or(d.eps1),
            eps2: cli.eps2.or(file.eps2).unwrap_or(d.eps2),
            mu: cli.mu.or(file.mu),
            m_window: cli.m_window.or(file.m_window).unwrap_or(d.m_window),
            max_inner: cli.max_inner.or(file.max_inner).unwrap_or(d.max_inner),
            max_outer: cli.max_outer.or(file.max_outer).unwrap_or(d.max_outer),
            grid_points: cli.grid_points.or(file.grid_points).unwrap_or(d.grid_points),
            tail_mass: cli.tail_mass.or(file.tail_mass).unwrap_or(d.tail_mass),
            abs_tol: cli.abs_tol.or(file.abs_tol).unwrap_or(d.abs_tol),
            seed: cli.seed.or(file.seed).unwrap_or(d.seed),
            out: cli.out.clone().or(file.out),
            format: cli.format.or(file.format).unwrap_or(d.format),
            warm_start: cli.warm_start.or(file.warm_start).map_or(d.warm_start, |t| t == Toggle::On),
            mc_check: cli.mc_check || file.mc_check.unwrap_or(d.mc_check),
            mc_samples: cli.mc_samples.or(file.mc_samples).unwrap_or(d.mc_samples),
            threads: cli.threads.or(file.threads),
            dump_pmf: cli.dump_pmf.clone().or(file.dump_pmf),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.dim >= 1, "dim must be at least 1");
        ensure!(self.snr_db.iter().all(|s| s.is_finite()), "SNR values must be finite");
        ensure!(!(self.format == Format::Both && self.out.is_none()), "--format both needs --out");
        ensure!(self.threads != Some(0), "threads must be at least 1");
        ensure!(self.mc_samples >= 10_000, "mc-samples must be at least 10000");
        self.inner().validate()?;
        self.outer().validate()?;
        self.quadrature().validate()?;
        Ok(())
    }

    pub fn inner(&self) -> InnerConfig {
        InnerConfig { eps1: self.eps1, m_window: self.m_window, max_iters: self.max_inner }
    }

    pub fn outer(&self) -> OuterConfig {
        OuterConfig {
            eps2: bits_to_nats(self.eps2),
            mu: self.mu,
            grid_points: self.grid_points,
            max_outer_iters: self.max_outer,
            ..OuterConfig::default()
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            abs_tol: self.abs_tol,
            tail_mass: self.tail_mass,
            ..QuadratureSpec::default()
        }
    }
}

/// Parses `"x"`, `"x,y,z"` or `"lo:hi:count"` (count evenly spaced points,
/// both ends included).
pub fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [lo, hi, count] = parts[..] else {
            bail!("SNR range must be lo:hi:count, got {text:?}");
        };
        let lo: f64 = lo.parse().with_context(|| format!("bad SNR bound {lo:?}"))?;
        let hi: f64 = hi.parse().with_context(|| format!("bad SNR bound {hi:?}"))?;
        let count: usize = count.parse().with_context(|| format!("bad point count {count:?}"))?;
        ensure!(count >= 1, "SNR range needs at least one point");
        ensure!(count > 1 || lo == hi, "a one-point range needs lo == hi");
        if count == 1 {
            return Ok(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        return Ok((0..count)
            .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
            .collect());
    }
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().with_context(|| format!("bad SNR value {s:?}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_forms() {
        assert_eq!(parse_snr_list("-5").unwrap(), vec![-5.0]);
        assert_eq!(parse_snr_list("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        let r = parse_snr_list("-5:30:20").unwrap();
        assert_eq!(r.len(), 20);
        assert_eq!(r[0], -5.0);
        assert_eq!(r[19], 30.0);
        assert!((r[1] - r[0] - 35.0 / 19.0).abs() < 1e-12);
        assert!(parse_snr_list("1:2").is_err());
        assert!(parse_snr_list("x").is_err());
        assert!(parse_snr_list("0:1:0").is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dim = 3\neps2 = 0.05\nsnr-db = [1.0, 2.0]\ngrid-points = 1024\n").unwrap();
        let cli = Cli::parse_from([
            "shellcap",
            "--config",
            path.to_str().unwrap(),
            "--eps2",
            "0.02",
        ]);
        let cfg = RunConfig::resolve(&cli).unwrap();
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.eps2, 0.02);
        assert_eq!(cfg.snr_db, vec![1.0, 2.0]);
        assert_eq!(cfg.grid_points, 1024);
        assert_eq!(cfg.m_window, 5);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dimension = 3\n").unwrap();
        assert!(FileConfig::load(&path).is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let cli = Cli::parse_from(["shellcap", "--snr-db", "0", "--eps1", "-1"]);
        assert!(RunConfig::resolve(&cli).is_err());
        let cli = Cli::parse_from(["shellcap", "--snr-db", "0", "--format", "both"]);
        assert!(RunConfig::resolve(&cli).is_err());
    }
}
