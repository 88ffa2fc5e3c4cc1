//! SNR sweeps.

use std::time::Instant;

use anyhow::{Context, Result};
use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use shellcap_core::model::{kappa_lower_bound, params_from_snr};
use shellcap_core::solver::{initial_pmf, outer_layer_observed, CapacityResult};
use shellcap_core::{nats_to_bits, ChannelParams, InputPmf};

use crate::config::RunConfig;
use crate::oracle::{mc_mutual_information, McConfig, McEstimate};

/// One row of the sweep CSV. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub snr_db: f64,
    pub amplitude: f64,
    pub lower_bpcu: f64,
    pub upper_bpcu: f64,
    pub k_hat: usize,
    pub k_lower: u32,
    /// `ρ_i / A`, decreasing.
    pub radii_norm: Vec<f64>,
    pub probs: Vec<f64>,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Everything known about one solved SNR point.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub record: SweepRecord,
    pub params: ChannelParams,
    pub result: CapacityResult,
    /// Simulated mutual information (bpcu) when `mc_check` is on.
    pub mc: Option<McEstimate>,
}

impl SweepRecord {
    pub fn from_result(params: &ChannelParams, result: &CapacityResult, wall_time_s: f64) -> Self {
        let a = params.amplitude();
        SweepRecord {
            snr_db: params.snr_db(),
            amplitude: a,
            lower_bpcu: result.lower_bits(),
            upper_bpcu: result.upper_bits(),
            k_hat: result.k_hat(),
            k_lower: kappa_lower_bound(params),
            radii_norm: result.pmf.radii().iter().map(|r| r / a).collect(),
            probs: result.pmf.probs().to_vec(),
            converged: result.converged,
            wall_time_s,
        }
    }
}

/// Solves one SNR point, from `start` if given (radii in absolute units).
pub fn solve_point(cfg: &RunConfig, snr_db: f64, start: Option<InputPmf>) -> Result<PointOutcome> {
    let params = params_from_snr(cfg.dim, snr_db)?;
    let start = start.unwrap_or_else(|| initial_pmf(&params));
    let t0 = Instant::now();
    let mut observe = |r: &shellcap_core::solver::OuterRecord| {
        debug!(
            "snr {snr_db:.3} dB: K={} lower={:.6} upper={:.6} mu={:.3e}",
            r.shells,
            nats_to_bits(r.lower_nats),
            nats_to_bits(r.upper_nats),
            r.mu
        );
    };
    let result = outer_layer_observed(
        start,
        &params,
        &cfg.quadrature(),
        &cfg.inner(),
        &cfg.outer(),
        &mut observe,
    )
    .with_context(|| format!("solving SNR {snr_db} dB"))?;
    let elapsed = t0.elapsed().as_secs_f64();
    let record = SweepRecord::from_result(&params, &result, elapsed);
    info!(
        "snr {snr_db:.3} dB: [{:.6}, {:.6}] bpcu, K={} in {elapsed:.1}s",
        record.lower_bpcu, record.upper_bpcu, record.k_hat
    );
    if !result.converged {
        warn!("snr {snr_db} dB did not converge (gap {:.3e} bpcu)", record.upper_bpcu - record.lower_bpcu);
    }

    let mc = if cfg.mc_check {
        let mc_cfg = McConfig::new(cfg.mc_samples, cfg.seed);
        let est = mc_mutual_information(&result.pmf, &params, &mc_cfg)?;
        let (mean, se) = (nats_to_bits(est.mean), nats_to_bits(est.std_error));
        let z = (mean - record.lower_bpcu) / se;
        if z.abs() > 4.0 {
            warn!("snr {snr_db} dB: simulated {mean:.5} ± {se:.1e} bpcu disagrees with {:.5} (z = {z:.1})", record.lower_bpcu);
        } else {
            info!("snr {snr_db} dB: simulated {mean:.5} ± {se:.1e} bpcu");
        }
        Some(McEstimate { mean, std_error: se, n_samples: est.n_samples })
    } else {
        None
    };
    Ok(PointOutcome { record, params, result, mc })
}

/// Solves every SNR point of `cfg`, in input order.
///
/// With warm start the points are solved one after another, each starting
/// from the previous point's PMF with radii rescaled to the new amplitude
/// (unless that PMF has fewer shells than the new lower bound on the count).
/// Without it the points are independent and run on the thread pool.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<PointOutcome>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| {
        if !cfg.warm_start {
            return cfg.snr_db.par_iter().map(|&snr| solve_point(cfg, snr, None)).collect();
        }
        let mut out: Vec<PointOutcome> = Vec::with_capacity(cfg.snr_db.len());
        for &snr in &cfg.snr_db {
            let start = match out.last() {
                Some(prev) => warm_start_from(prev, cfg.dim, snr)?,
                None => None,
            };
            let point = solve_point(cfg, snr, start)?;
            if let Some(prev) = out.last() {
                if point.record.k_hat > prev.record.k_hat + 1 {
                    warn!(
                        "shell count jumped from {} to {} between {} and {} dB",
                        prev.record.k_hat, point.record.k_hat, prev.record.snr_db, snr
                    );
                }
            }
            out.push(point);
        }
        Ok(out)
    })
}

fn warm_start_from(prev: &PointOutcome, dim: u32, snr_db: f64) -> Result<Option<InputPmf>> {
    let params = params_from_snr(dim, snr_db)?;
    if prev.result.k_hat() < kappa_lower_bound(&params) as usize {
        return Ok(None);
    }
    let scale = params.amplitude() / prev.params.amplitude();
    let radii = prev.result.pmf.radii().iter().map(|r| r * scale).collect();
    Ok(Some(InputPmf::new(radii, prev.result.pmf.probs().to_vec())?))
}
