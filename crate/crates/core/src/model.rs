//! Channel parameters, the shell PMF, and the one-dimensional capacity
//! functional.
//!
//! The channel is `Y = X + W` in `ℂ^N` with `W ~ CN(0, 2I_N)` and
//! `|X| ≤ A`. Given `|X| = ρ`, the output energy `|Y|²` is `χ²_{2N}(ρ²)`,
//! so an input made of shells `{(ρ_i, p_i)}` produces the output mixture
//! `f(y) = Σ p_i f_{χ²_{2N}(ρ_i²)}(y)` and
//! `I(X;Y) = Σ p_i ∫ f_i(y) log(y^{N-1}/f(y)) dy − log((2e)^N Γ(N))`.

use alloc::vec::Vec;
use core::f64::consts::{E, PI};

#[allow(unused_imports)]
use num_traits::Float;

use crate::quadrature::{integrate_weighted, QuadratureSpec};
use crate::specfun::{ln_gamma, Chi2Params};
use crate::{Error, Result};

/// Dimension and amplitude budget of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    n_dim: u32,
    amplitude: f64,
}

impl ChannelParams {
    pub fn new(n_dim: u32, amplitude: f64) -> Result<Self> {
        if n_dim == 0 {
            return Err(Error::Domain("dimension must be at least 1"));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::Domain("amplitude must be positive and finite"));
        }
        Ok(ChannelParams { n_dim, amplitude })
    }

    pub fn n_dim(&self) -> u32 {
        self.n_dim
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `A² / (2N)`.
    pub fn snr_linear(&self) -> f64 {
        self.amplitude * self.amplitude / (2.0 * self.n_dim as f64)
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr_linear().log10()
    }

    /// Law of `|Y|²` given `|X| = rho`.
    pub fn output_law(&self, rho: f64) -> Chi2Params {
        Chi2Params::new(2 * self.n_dim, rho * rho).expect("valid by construction")
    }
}

/// `A = √(2N · 10^{snr_db/10})`.
pub fn params_from_snr(n_dim: u32, snr_db: f64) -> Result<ChannelParams> {
    if !snr_db.is_finite() {
        return Err(Error::Domain("snr must be finite"));
    }
    let amplitude = (2.0 * n_dim as f64 * 10f64.powf(snr_db / 10.0)).sqrt();
    ChannelParams::new(n_dim, amplitude)
}

/// Amplitude PMF: shell radii with their probabilities.
///
/// Construction accepts any order and repeated radii so that degenerate
/// configurations can be expressed; [`InputPmf::canonical`] sorts by
/// decreasing radius and merges near-coincident shells, which is the form
/// the solver keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPmf {
    radii: Vec<f64>,
    probs: Vec<f64>,
}

impl InputPmf {
    pub fn new(radii: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidPmf("at least one shell is required"));
        }
        if radii.len() != probs.len() {
            return Err(Error::InvalidPmf("radii and probabilities differ in length"));
        }
        if radii.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidPmf("radii must be finite and nonnegative"));
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidPmf("probabilities must be positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPmf("probabilities must sum to one"));
        }
        Ok(InputPmf { radii, probs })
    }

    /// Normalizes `weights` before validating.
    pub fn from_weights(radii: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidPmf("weights must have a positive finite sum"));
        }
        let probs = weights.iter().map(|w| w / total).collect();
        Self::new(radii, probs)
    }

    pub fn uniform(radii: Vec<f64>) -> Result<Self> {
        let k = radii.len();
        Self::from_weights(radii, alloc::vec![1.0; k])
    }

    pub fn single(rho: f64) -> Result<Self> {
        Self::new(alloc::vec![rho], alloc::vec![1.0])
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    /// Sorted by decreasing radius, with radii closer than `merge_tol`
    /// combined into one shell (probabilities summed, position weighted).
    pub fn canonical(&self, merge_tol: f64) -> InputPmf {
        let mut shells: Vec<(f64, f64)> =
            self.radii.iter().copied().zip(self.probs.iter().copied()).collect();
        shells.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("radii are finite"));
        let mut radii: Vec<f64> = Vec::with_capacity(shells.len());
        let mut probs: Vec<f64> = Vec::with_capacity(shells.len());
        for (r, p) in shells {
            // the outermost shell keeps its radius so ρ₁ stays pinned
            let pinned = radii.len() == 1;
            match (radii.last_mut(), probs.last_mut()) {
                (Some(lr), Some(lp)) if *lr - r <= merge_tol => {
                    if !pinned {
                        *lr = (*lr * *lp + r * p) / (*lp + p);
                    }
                    *lp += p;
                }
                _ => {
                    radii.push(r);
                    probs.push(p);
                }
            }
        }
        InputPmf { radii, probs }
    }

    /// Drops shells lighter than `threshold` and renormalizes. The shell of
    /// largest radius is always kept.
    pub fn pruned(&self, threshold: f64) -> InputPmf {
        let keep_idx = self
            .radii
            .iter()
            .enumerate()
            .fold(0, |best, (i, r)| if *r > self.radii[best] { i } else { best });
        let mut radii = Vec::with_capacity(self.len());
        let mut probs = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            if i == keep_idx || self.probs[i] >= threshold {
                radii.push(self.radii[i]);
                probs.push(self.probs[i]);
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        InputPmf { radii, probs }
    }

    /// Checks the shells against the amplitude budget.
    pub fn check_against(&self, params: &ChannelParams) -> Result<()> {
        let a = params.amplitude();
        if self.radii.iter().any(|&r| r > a * (1.0 + 1e-12)) {
            return Err(Error::InvalidPmf("a radius exceeds the amplitude budget"));
        }
        Ok(())
    }

    pub fn geometry(&self, n_dim: u32) -> ShellGeometry {
        ShellGeometry {
            surface_measure: self.radii.iter().map(|&r| surface_measure(n_dim, r)).collect(),
        }
    }
}

/// Hyper-surface measure of each shell.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellGeometry {
    pub surface_measure: Vec<f64>,
}

impl ShellGeometry {
    /// Probability density `p_i / S_i` of a single point on each shell;
    /// infinite for a shell collapsed to the origin.
    pub fn point_density(&self, pmf: &InputPmf) -> Vec<f64> {
        pmf.probs()
            .iter()
            .zip(&self.surface_measure)
            .map(|(p, s)| if *s > 0.0 { p / s } else { f64::INFINITY })
            .collect()
    }
}

/// `S = 2π^N ρ^{2N-1} / Γ(N)`.
pub fn surface_measure(n_dim: u32, rho: f64) -> f64 {
    let n = n_dim as f64;
    if rho == 0.0 {
        return 0.0;
    }
    (core::f64::consts::LN_2 + n * PI.ln() + (2.0 * n - 1.0) * rho.ln() - ln_gamma(n)).exp()
}

/// Max-shifted `log Σ exp(x_i)`.
pub fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(xs: I) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log f_{|Y|²}(y)` for the shell mixture.
pub fn output_log_density(pmf: &InputPmf, params: &ChannelParams, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain("density argument must be positive and finite"));
    }
    Ok(mixture_log_density(pmf, params, y))
}

pub(crate) fn mixture_log_density(pmf: &InputPmf, params: &ChannelParams, y: f64) -> f64 {
    let terms = pmf
        .radii()
        .iter()
        .zip(pmf.probs())
        .map(move |(&r, &p)| p.ln() + params.output_law(r).log_pdf(y));
    log_sum_exp(terms)
}

/// `log((2e)^N Γ(N))`, the gap between `ℓ` and the mutual information.
pub fn capacity_offset(params: &ChannelParams) -> f64 {
    let n = params.n_dim() as f64;
    n * (2.0 * E).ln() + ln_gamma(n)
}

/// `ℓ = Σ_i p_i ∫ f_i(y) log(y^{N-1}/f(y)) dy`, each shell integrated
/// adaptively to `spec.abs_tol`.
pub fn ell_functional(pmf: &InputPmf, params: &ChannelParams, spec: &QuadratureSpec) -> Result<f64> {
    let nm1 = params.n_dim() as f64 - 1.0;
    let mut total = 0.0;
    for (&r, &p) in pmf.radii().iter().zip(pmf.probs()) {
        let inner = integrate_weighted(
            |y| nm1 * y.ln() - mixture_log_density(pmf, params, y),
            params.output_law(r),
            spec,
        )?;
        total += p * inner;
    }
    Ok(total)
}

/// Mutual information `ℓ − log((2e)^N Γ(N))` in nats.
pub fn mutual_information(pmf: &InputPmf, params: &ChannelParams, spec: &QuadratureSpec) -> Result<f64> {
    Ok(ell_functional(pmf, params, spec)? - capacity_offset(params))
}

/// Lower bound on the number of shells of the optimal input:
/// `⌈√(((A²+2e)² + 8π(N−1)) / (8πe(N + A²/2)))⌉`.
pub fn kappa_lower_bound(params: &ChannelParams) -> u32 {
    let a2 = params.amplitude() * params.amplitude();
    let n = params.n_dim() as f64;
    let num = (a2 + 2.0 * E).powi(2) + 8.0 * PI * (n - 1.0);
    let den = 8.0 * PI * E * (n + 0.5 * a2);
    ((num / den).sqrt().ceil() as u32).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn snr_conversion() {
        let p = params_from_snr(2, 0.0).unwrap();
        assert!((p.amplitude() - 2.0).abs() < 1e-15);
        let p = params_from_snr(2, -5.0).unwrap();
        assert!((p.amplitude() - (4.0 * 10f64.powf(-0.5)).sqrt()).abs() < 1e-15);
        assert!((p.amplitude() - 1.12468).abs() < 1e-5);
        let p = params_from_snr(2, 30.0).unwrap();
        assert!((p.amplitude().powi(2) - 4000.0).abs() < 1e-9);
        assert!((p.snr_db() - 30.0).abs() < 1e-12);
        assert!(params_from_snr(0, 1.0).is_err());
    }

    #[test]
    fn offset_values() {
        let p1 = ChannelParams::new(1, 1.0).unwrap();
        assert!((capacity_offset(&p1) - (2.0 * E).ln()).abs() < 1e-15);
        let p2 = ChannelParams::new(2, 1.0).unwrap();
        assert!((capacity_offset(&p2) - 3.386294361119891).abs() < 1e-14);
        let p4 = ChannelParams::new(4, 1.0).unwrap();
        assert!((capacity_offset(&p4) - (4.0 * (2.0 * E).ln() + 6f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_lower_bound(&params_from_snr(2, -5.0).unwrap()), 1);
        assert_eq!(kappa_lower_bound(&params_from_snr(2, 30.0).unwrap()), 11);
        for n in 1..5 {
            assert_eq!(kappa_lower_bound(&ChannelParams::new(n, 1e-6).unwrap()), 1);
        }
    }

    #[test]
    fn kappa_is_nondecreasing_in_amplitude() {
        for n in 1..=4 {
            let mut prev = 0;
            for i in 1..=400 {
                let k = kappa_lower_bound(&ChannelParams::new(n, 0.25 * i as f64).unwrap());
                assert!(k >= prev);
                prev = k;
            }
        }
    }

    #[test]
    fn pmf_validation() {
        assert!(InputPmf::new(vec![], vec![]).is_err());
        assert!(InputPmf::new(vec![1.0], vec![0.5]).is_err());
        assert!(InputPmf::new(vec![1.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(InputPmf::new(vec![-1.0], vec![1.0]).is_err());
        assert!(InputPmf::new(vec![1.0, 2.0], vec![1.0]).is_err());
        let p = InputPmf::new(vec![2.0, 1.0], vec![0.25, 0.75]).unwrap();
        let params = ChannelParams::new(2, 1.5).unwrap();
        assert!(p.check_against(&params).is_err());
    }

    #[test]
    fn canonical_merges_and_sorts() {
        let p = InputPmf::new(vec![0.5, 2.0, 0.5 + 1e-9, 1.0], vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        let c = p.canonical(1e-6);
        assert_eq!(c.len(), 3);
        assert_eq!(c.radii()[0], 2.0);
        assert!((c.probs()[2] - 0.3).abs() < 1e-15);
        assert!(c.radii().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn pruning_keeps_outer_shell() {
        let p = InputPmf::new(vec![2.0, 1.0, 0.0], vec![1e-12, 0.5, 0.5 - 1e-12]).unwrap();
        let q = p.pruned(1e-9);
        assert_eq!(q.len(), 3);
        let p = InputPmf::new(vec![2.0, 1.0, 0.0], vec![0.5, 1e-12, 0.5 - 1e-12]).unwrap();
        let q = p.pruned(1e-9);
        assert_eq!(q.radii(), &[2.0, 0.0]);
        assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn surface_measure_matches_closed_forms() {
        // N=1: circle circumference 2πρ; N=2: S³ area 2π²ρ³
        assert!((surface_measure(1, 3.0) - 2.0 * PI * 3.0).abs() < 1e-12);
        assert!((surface_measure(2, 1.5) - 2.0 * PI * PI * 1.5f64.powi(3)).abs() < 1e-12);
        assert_eq!(surface_measure(2, 0.0), 0.0);
    }

    #[test]
    fn single_central_shell_is_central_chi2() {
        let params = ChannelParams::new(2, 1.0).unwrap();
        let pmf = InputPmf::single(0.0).unwrap();
        for &y in &[0.1, 1.0, 7.0] {
            let v = output_log_density(&pmf, &params, y).unwrap();
            assert!((v - Chi2Params::new(4, 0.0).unwrap().log_pdf(y)).abs() < 1e-14);
        }
        assert!(output_log_density(&pmf, &params, 0.0).is_err());
    }

    #[test]
    fn coincident_shells_collapse() {
        let params = ChannelParams::new(2, 3.0).unwrap();
        let two = InputPmf::new(vec![1.3, 1.3], vec![0.5, 0.5]).unwrap();
        let one = InputPmf::single(1.3).unwrap();
        for &y in &[0.2, 2.0, 9.0, 30.0] {
            let a = output_log_density(&two, &params, y).unwrap();
            let b = output_log_density(&one, &params, y).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn no_input_gives_zero_rate() {
        let params = ChannelParams::new(1, 1.0).unwrap();
        let pmf = InputPmf::single(0.0).unwrap();
        let spec = QuadratureSpec::default();
        let ell = ell_functional(&pmf, &params, &spec).unwrap();
        assert!((ell - (1.0 + core::f64::consts::LN_2)).abs() < 1e-8);
        assert!(mutual_information(&pmf, &params, &spec).unwrap().abs() < 1e-8);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp([-2000.0, -2000.0]);
        assert!((v - (-2000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
    }
}
