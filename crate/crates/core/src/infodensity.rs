//! Information density `i(ρ; F)` of a shell PMF, its derivative in `ρ`, and
//! the monotonicity bound that pins the outer shell at `ρ = A`.
//!
//! `i(ρ) = ∫ f_{χ²_{2N}(ρ²)}(y) log(y^{N-1}/f(y)) dy − log((2e)^N Γ(N))`.
//! Averaged over the PMF it is the mutual information, and its maximum over
//! `ρ ∈ [0, A]` is an upper bound on capacity.
//!
//! The derivative uses the score
//! `s(q) = d/dq log(f(q)/q^{N-1}) = E[½ (|X|/√q) I_{N-2}(|X|√q)/I_{N-1}(|X|√q) | |Y|² = q] − ½ − (N−1)/q`,
//! with the conditional expectation taken over the posterior of the shell
//! given the output, and `i′(ρ) = −2ρ E[s(Q′)]`, `Q′ ~ χ²_{2(N+1)}(ρ²)`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{capacity_offset, log_sum_exp, ChannelParams, InputPmf};
use crate::quadrature::{integrate_adaptive, truncation_window, Grid, QuadratureSpec};
use crate::specfun::{bessel_ratio_unchecked, Chi2Params};
use crate::{Error, Result};

/// Chi-squared terms with `|√y − ρ|` beyond this many units are below
/// `e^{-80}` and skipped.
const SQRT_SPREAD: f64 = 13.0;

/// A shell PMF together with its output mixture cached on a [`Grid`].
#[derive(Debug, Clone)]
pub struct InfoDensityContext {
    params: ChannelParams,
    pmf: InputPmf,
    grid: Grid,
    /// `log f_{χ²_{2N}(ρ_i²)}(y_g)`, one row per shell
    shell_log_pdf: Vec<Vec<f64>>,
    log_mixture: Vec<f64>,
    /// `(N−1) log y − log f(y)`
    kernel: Vec<f64>,
    score: Vec<f64>,
    offset: f64,
}

impl InfoDensityContext {
    pub fn new(pmf: InputPmf, params: ChannelParams, spec: &QuadratureSpec) -> Result<Self> {
        let grid = Grid::for_channel(params.n_dim(), params.amplitude(), spec)?;
        Self::with_grid(pmf, params, grid)
    }

    pub fn with_grid(pmf: InputPmf, params: ChannelParams, grid: Grid) -> Result<Self> {
        pmf.check_against(&params)?;
        let shell_log_pdf: Vec<Vec<f64>> = pmf
            .radii()
            .iter()
            .map(|&r| {
                let law = params.output_law(r);
                grid.nodes().iter().map(|&y| law.log_pdf(y)).collect()
            })
            .collect();
        Ok(Self::from_shell_logs(pmf, params, grid, shell_log_pdf))
    }

    /// Builds the context from precomputed shell log-densities (one row per
    /// shell of `pmf`, one column per node of `grid`).
    pub(crate) fn from_shell_logs(
        pmf: InputPmf,
        params: ChannelParams,
        grid: Grid,
        shell_log_pdf: Vec<Vec<f64>>,
    ) -> Self {
        let n = params.n_dim();
        let nm1 = n as f64 - 1.0;
        let log_p: Vec<f64> = pmf.probs().iter().map(|p| p.ln()).collect();
        let mut log_mixture = Vec::with_capacity(grid.len());
        let mut kernel = Vec::with_capacity(grid.len());
        let mut score = Vec::with_capacity(grid.len());
        for (g, &y) in grid.nodes().iter().enumerate() {
            let lm = log_sum_exp(log_p.iter().zip(&shell_log_pdf).map(|(lp, row)| lp + row[g]));
            log_mixture.push(lm);
            kernel.push(nm1 * y.ln() - lm);
            let mut posterior_term = 0.0;
            for ((&r, lp), row) in pmf.radii().iter().zip(&log_p).zip(&shell_log_pdf) {
                let w = (lp + row[g] - lm).exp();
                if w > 0.0 {
                    posterior_term += w * half_bessel_term(n, r, y);
                }
            }
            score.push(posterior_term - 0.5 - nm1 / y);
        }
        let offset = capacity_offset(&params);
        InfoDensityContext { params, pmf, grid, shell_log_pdf, log_mixture, kernel, score, offset }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn pmf(&self) -> &InputPmf {
        &self.pmf
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn log_mixture(&self) -> &[f64] {
        &self.log_mixture
    }

    pub fn shell_log_pdf(&self, shell: usize) -> &[f64] {
        &self.shell_log_pdf[shell]
    }

    /// Score `d/dy log(f(y)/y^{N-1})` on the grid nodes.
    pub fn score(&self) -> &[f64] {
        &self.score
    }

    fn check_rho(&self, rho: f64) -> Result<()> {
        if !(rho >= 0.0) || rho > self.params.amplitude() * (1.0 + 1e-12) {
            return Err(Error::Domain("rho must lie in [0, A]"));
        }
        Ok(())
    }

    /// Node index range where `χ²(ρ²)` laws centred at `rho` carry mass.
    fn support_range(&self, rho: f64) -> (usize, usize) {
        let lo = (rho - SQRT_SPREAD).max(0.0).powi(2);
        let hi = (rho + SQRT_SPREAD).powi(2);
        let nodes = self.grid.nodes();
        (nodes.partition_point(|&y| y < lo), nodes.partition_point(|&y| y <= hi))
    }

    /// `∫ f_law(y) v(y) dy` on the grid, restricted to the support of `law`.
    fn weighted_sum(&self, law: Chi2Params, rho: f64, values: &[f64]) -> f64 {
        let (a, b) = self.support_range(rho);
        let nodes = &self.grid.nodes()[a..b];
        let weights = &self.grid.weights()[a..b];
        nodes
            .iter()
            .zip(weights)
            .zip(&values[a..b])
            .map(|((&y, &w), &v)| {
                let d = law.pdf(y);
                if d == 0.0 {
                    0.0
                } else {
                    w * d * v
                }
            })
            .sum()
    }

    /// `i(ρ; F)` in nats.
    pub fn info_density(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        Ok(self.info_density_unchecked(rho))
    }

    pub(crate) fn info_density_unchecked(&self, rho: f64) -> f64 {
        self.weighted_sum(self.params.output_law(rho), rho, &self.kernel) - self.offset
    }

    /// `i′(ρ; F)`; zero at `ρ = 0`.
    pub fn info_density_derivative(&self, rho: f64) -> Result<f64> {
        self.check_rho(rho)?;
        if rho == 0.0 {
            return Ok(0.0);
        }
        let law = Chi2Params::new(2 * self.params.n_dim() + 2, rho * rho)?;
        Ok(-2.0 * rho * self.weighted_sum(law, rho, &self.score))
    }

    /// `I(X;Y) = Σ p_i i(ρ_i)` evaluated from the cached shell rows.
    pub fn mutual_information(&self) -> f64 {
        let mut total = 0.0;
        for (p, row) in self.pmf.probs().iter().zip(&self.shell_log_pdf) {
            let inner: f64 = self
                .grid
                .weights()
                .iter()
                .zip(row)
                .zip(&self.kernel)
                .map(|((w, lf), k)| if *lf == f64::NEG_INFINITY { 0.0 } else { w * lf.exp() * k })
                .sum();
            total += p * inner;
        }
        total - self.offset
    }

    /// `∂I/∂(ρ_i²) = (p_i/2) ∫ (f_{χ²_{2N+2}(ρ_i²)} − f_{χ²_{2N}(ρ_i²)}) (log(r_i y^{N-1}) − log f_i) dy`
    /// where `log(r_i y^{N-1}) − log f_i = log p_i + (N−1) log y − log f`.
    pub fn mi_gradient(&self, shell: usize) -> Result<f64> {
        if shell >= self.pmf.len() {
            return Err(Error::Domain("shell index out of range"));
        }
        let rho = self.pmf.radii()[shell];
        let p = self.pmf.probs()[shell];
        let lambda = rho * rho;
        let up = Chi2Params::new(2 * self.params.n_dim() + 2, lambda)?;
        let (a, b) = self.support_range(rho);
        let ln_p = p.ln();
        let row = &self.shell_log_pdf[shell];
        let mut acc = 0.0;
        for g in a..b {
            let y = self.grid.nodes()[g];
            let diff = up.pdf(y) - row[g].exp();
            if diff != 0.0 {
                acc += self.grid.weights()[g] * diff * (ln_p + self.kernel[g]);
            }
        }
        Ok(0.5 * p * acc)
    }
}

/// `½ (ρ/√q) I_{N-2}(ρ√q) / I_{N-1}(ρ√q)`, with `I_{-1} = I_1` at `N = 1`.
fn half_bessel_term(n_dim: u32, rho: f64, q: f64) -> f64 {
    let sq = q.sqrt();
    let z = rho * sq;
    if n_dim == 1 {
        return 0.5 * (rho / sq) * bessel_ratio_unchecked(1.0, z);
    }
    let nm1 = n_dim as f64 - 1.0;
    if z == 0.0 {
        return nm1 / q;
    }
    0.5 * (rho / sq) / bessel_ratio_unchecked(nm1, z)
}

/// `i(ρ; F)` for a prepared context.
pub fn info_density(ctx: &InfoDensityContext, rho: f64) -> Result<f64> {
    ctx.info_density(rho)
}

/// `i′(ρ; F)` for a prepared context.
pub fn info_density_derivative(ctx: &InfoDensityContext, rho: f64) -> Result<f64> {
    ctx.info_density_derivative(rho)
}

/// Lower bound on `i′(ρ)` for inputs supported on `[0, c]`:
/// `ρ / (1 + c²(2N + ρ²) / (4(N − ½)²))`.
pub fn derivative_lower_bound(c: f64, rho: f64, params: &ChannelParams) -> Result<f64> {
    if !(c >= 0.0) || !(rho > c) {
        return Err(Error::Domain("need 0 <= c < rho"));
    }
    let n = params.n_dim() as f64;
    let h = n - 0.5;
    Ok(rho / (1.0 + c * c * (2.0 * n + rho * rho) / (4.0 * h * h)))
}

/// Auxiliary density `f_Q(y; ρ₁, ρ₂) = (F_{ρ₂²}(y) − F_{ρ₁²}(y)) / (ρ₁² − ρ₂²)`
/// built from two `χ²_{2N}` CDFs, `ρ₁ > ρ₂`.
pub fn aux_density(y: f64, rho1: f64, rho2: f64, params: &ChannelParams) -> Result<f64> {
    if !(rho1 > rho2) || !(rho2 >= 0.0) {
        return Err(Error::Domain("need rho1 > rho2 >= 0"));
    }
    if !(y > 0.0) {
        return Err(Error::Domain("aux density argument must be positive"));
    }
    let lower = params.output_law(rho2).cdf(y);
    let upper = params.output_law(rho1).cdf(y);
    Ok((lower - upper) / (rho1 * rho1 - rho2 * rho2))
}

/// `|f_Q(y; ρ+h, ρ) − f_{χ²_{2(N+1)}(ρ²)}(y)|`, which vanishes as `O(h)`.
pub fn aux_density_limit_check(rho: f64, h: f64, y: f64, params: &ChannelParams) -> Result<f64> {
    if !(rho > 0.0) || !(h > 0.0 && h <= rho / 10.0) {
        return Err(Error::Domain("need rho > 0 and 0 < h <= rho/10"));
    }
    let fq = aux_density(y, rho + h, rho, params)?;
    let limit = Chi2Params::new(2 * params.n_dim() + 2, rho * rho)?.pdf(y);
    Ok((fq - limit).abs())
}

/// `∫₀^∞ f_Q(y; ρ₁, ρ₂) dy`, which equals one.
pub fn aux_density_integral(
    rho1: f64,
    rho2: f64,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if !(rho1 > rho2) || !(rho2 >= 0.0) {
        return Err(Error::Domain("need rho1 > rho2 >= 0"));
    }
    let hi_law = params.output_law(rho1);
    let (_, y_hi) = truncation_window(hi_law, spec.tail_mass);
    let lo_law = params.output_law(rho2);
    let norm = rho1 * rho1 - rho2 * rho2;
    let mut breaks = alloc::vec![0.0];
    for m in [lo_law.mean(), hi_law.mean()] {
        if m < y_hi {
            breaks.push(m);
        }
    }
    breaks.push(y_hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let est = integrate_adaptive(
        |y| if y > 0.0 { (lo_law.cdf(y) - hi_law.cdf(y)) / norm } else { 0.0 },
        &breaks,
        spec.abs_tol,
        spec.max_panels,
    )?;
    Ok(est.value)
}
