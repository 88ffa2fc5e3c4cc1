//! Quick property checks behind `shellcap --selftest`.

use std::io::Write;

use shellcap_core::infodensity::{aux_density_limit_check, derivative_lower_bound};
use shellcap_core::model::params_from_snr;
use shellcap_core::quadrature::integrate_weighted;
use shellcap_core::solver::{inner_layer, outer_layer, InnerConfig, OuterConfig};
use shellcap_core::specfun::{amos_upper_bound, bessel_ratio};
use shellcap_core::{nats_to_bits, ChannelParams, Chi2Params, InfoDensityContext, InputPmf, QuadratureSpec};

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<String, String>) -> Check {
    match run() {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn chi2_moments() -> Result<String, String> {
    let spec = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for k in [2, 4, 6, 8] {
        for l in [0.0, 1.0, 10.0, 1e3, 4e3] {
            let w = Chi2Params::new(k, l).map_err(|e| e.to_string())?;
            let one = integrate_weighted(|_| 1.0, w, &spec).map_err(|e| e.to_string())?;
            let mean = integrate_weighted(|y| y, w, &spec).map_err(|e| e.to_string())?;
            if (one - 1.0).abs() > 1e-8 || (mean - w.mean()).abs() > 1e-6 * w.mean() {
                return Err(format!("k={k} λ={l}: mass {one}, mean {mean}"));
            }
            worst = worst.max((one - 1.0).abs());
        }
    }
    Ok(format!("max mass error {worst:.1e}"))
}

fn bessel_recurrence() -> Result<String, String> {
    // 1/R_ν − R_{ν+1} = 2ν/z with R_ν = I_ν/I_{ν−1}
    let mut worst = 0.0f64;
    for nu in 1..=8 {
        for &z in &[1e-3, 0.1, 1.0, 7.5, 40.0, 300.0, 2e3] {
            let r0 = bessel_ratio(nu as f64, z).map_err(|e| e.to_string())?;
            let r1 = bessel_ratio(nu as f64 + 1.0, z).map_err(|e| e.to_string())?;
            let lhs = 1.0 / r0 - r1;
            let rhs = 2.0 * nu as f64 / z;
            worst = worst.max((lhs - rhs).abs() / rhs.max(1.0));
        }
    }
    if worst < 1e-10 {
        Ok(format!("max residual {worst:.1e}"))
    } else {
        Err(format!("residual {worst:.1e}"))
    }
}

fn amos_dominance() -> Result<String, String> {
    for i in 0..40 {
        let nu = 1.0 + 7.0 * i as f64 / 39.0;
        for j in 0..60 {
            let z = 1e3 * (j as f64 / 59.0).powi(3);
            let r = bessel_ratio(nu, z).map_err(|e| e.to_string())?;
            let b = amos_upper_bound(nu - 1.0, z).map_err(|e| e.to_string())?;
            if r > b * (1.0 + 1e-14) {
                return Err(format!("ν={nu} z={z}: {r} > {b}"));
            }
        }
    }
    Ok("2400 points".into())
}

fn ratio_monotone() -> Result<String, String> {
    for n in 1..=4u32 {
        let mut prev = f64::INFINITY;
        for j in 0..=400 {
            let t = 10f64.powf(-3.0 + 6.0 * j as f64 / 400.0);
            let s = bessel_ratio(n as f64 - 1.0, t).map_err(|e| e.to_string())? / t;
            if s >= prev {
                return Err(format!("N={n}: not decreasing at t={t}"));
            }
            prev = s;
        }
    }
    Ok("N = 1..4".into())
}

fn derivative_vs_fd() -> Result<String, String> {
    let spec = QuadratureSpec::default();
    let cases: [(u32, f64, &[f64], &[f64]); 3] = [
        (1, 3.0, &[3.0, 1.0], &[0.7, 0.3]),
        (2, 4.0, &[4.0, 2.0, 0.0], &[0.5, 0.3, 0.2]),
        (3, 5.0, &[5.0, 2.5], &[0.6, 0.4]),
    ];
    let mut worst = 0.0f64;
    for (n, a, radii, probs) in cases {
        let params = ChannelParams::new(n, a).map_err(|e| e.to_string())?;
        let pmf = InputPmf::new(radii.to_vec(), probs.to_vec()).map_err(|e| e.to_string())?;
        let ctx = InfoDensityContext::new(pmf, params, &spec).map_err(|e| e.to_string())?;
        for &rho in &[0.5, 1.7, 0.8 * a] {
            let h = 1e-4;
            let fd = (ctx.info_density(rho + h).unwrap() - ctx.info_density(rho - h).unwrap()) / (2.0 * h);
            let d = ctx.info_density_derivative(rho).map_err(|e| e.to_string())?;
            let err = (d - fd).abs();
            if err > 1e-4f64.max(1e-3 * d.abs()) {
                return Err(format!("N={n} ρ={rho}: {d} vs {fd}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn bound_beyond_support() -> Result<String, String> {
    let spec = QuadratureSpec::default();
    let params = ChannelParams::new(2, 6.0).map_err(|e| e.to_string())?;
    let pmf = InputPmf::new(vec![2.5, 1.0, 0.0], vec![0.5, 0.3, 0.2]).map_err(|e| e.to_string())?;
    let ctx = InfoDensityContext::new(pmf, params, &spec).map_err(|e| e.to_string())?;
    let c = 2.5;
    for j in 1..=40 {
        let rho = c + (6.0 - c) * j as f64 / 40.0;
        let d = ctx.info_density_derivative(rho).map_err(|e| e.to_string())?;
        let b = derivative_lower_bound(c, rho, &params).map_err(|e| e.to_string())?;
        if d < b {
            return Err(format!("ρ={rho}: {d} < {b}"));
        }
    }
    Ok("40 points".into())
}

fn aux_first_order() -> Result<String, String> {
    let params = ChannelParams::new(2, 6.0).map_err(|e| e.to_string())?;
    let (rho, y) = (2.0, 8.0);
    let r1 = aux_density_limit_check(rho, 0.1, y, &params).map_err(|e| e.to_string())?;
    let r2 = aux_density_limit_check(rho, 0.05, y, &params).map_err(|e| e.to_string())?;
    let ratio = r1 / r2;
    if (1.7..=2.3).contains(&ratio) {
        Ok(format!("ratio {ratio:.3}"))
    } else {
        Err(format!("ratio {ratio}"))
    }
}

fn inner_monotone() -> Result<String, String> {
    let params = params_from_snr(2, 10.0).map_err(|e| e.to_string())?;
    let a = params.amplitude();
    let pmf = InputPmf::uniform(vec![a, 0.6 * a, 0.2 * a]).map_err(|e| e.to_string())?;
    let spec = QuadratureSpec::default();
    let out = inner_layer(&pmf, &params, &spec, &InnerConfig::default()).map_err(|e| e.to_string())?;
    if out.max_decrease > 10.0 * spec.abs_tol {
        return Err(format!("objective dropped by {:.1e}", out.max_decrease));
    }
    Ok(format!("{} iterations", out.iterations))
}

fn low_snr_point() -> Result<String, String> {
    let params = params_from_snr(2, -5.0).map_err(|e| e.to_string())?;
    let r = outer_layer(&params, &QuadratureSpec::default(), &InnerConfig::default(), &OuterConfig::default())
        .map_err(|e| e.to_string())?;
    let c = nats_to_bits(r.lower_nats);
    if r.converged && r.k_hat() == 1 && (c - 0.7919).abs() <= 0.02 {
        Ok(format!("{c:.5} bpcu, one shell"))
    } else {
        Err(format!("{c} bpcu, K={}, converged={}", r.k_hat(), r.converged))
    }
}

/// Runs every check in order.
pub fn run_checks() -> Vec<Check> {
    vec![
        check("chi2 mass and mean", chi2_moments),
        check("bessel recurrence", bessel_recurrence),
        check("amos bound dominance", amos_dominance),
        check("bessel ratio over t decreasing", ratio_monotone),
        check("info density derivative vs finite differences", derivative_vs_fd),
        check("derivative bound beyond support", bound_beyond_support),
        check("auxiliary density first-order limit", aux_first_order),
        check("inner layer monotone", inner_monotone),
        check("single shell at -5 dB", low_snr_point),
    ]
}

/// Prints one line per check; true if all passed.
pub fn report<W: Write>(checks: &[Check], mut out: W) -> std::io::Result<bool> {
    for c in checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {}: {}", c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} passed, {failed} failed", checks.len() - failed)?;
    Ok(failed == 0)
}
