//! Nested capacity solver.
//!
//! The inner layer is a Blahut–Arimoto iteration over the shell
//! probabilities with the radii held fixed; its objective `𝓛` is a lower
//! bound on capacity and never decreases. The outer layer adds a shell at
//! the origin when `i(0)` dominates `i(ρ)` on `(0, A]`, moves the radii by
//! gradient ascent in `ρ²` (the outer shell stays at `ρ = A`), and brackets
//! capacity with the dual bound `max_ρ i(ρ)`. It stops once the bracket is
//! narrower than `eps2`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::infodensity::InfoDensityContext;
use crate::model::{capacity_offset, kappa_lower_bound, log_sum_exp, ChannelParams, InputPmf};
use crate::quadrature::{Grid, QuadratureSpec};
use crate::{bits_to_nats, nats_to_bits, Error, Result};

/// Slack (nats) in the test `i(0) ≥ max_{(0,A]} i`.
const INSERTION_SLACK: f64 = 1e-9;

/// Stopping rule of the inner layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Tolerance on successive objective values, nats.
    pub eps1: f64,
    /// Number of trailing iterations that must agree within `eps1`.
    pub m_window: usize,
    pub max_iters: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig { eps1: 1e-6, m_window: 5, max_iters: 20_000 }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > 0.0) {
            return Err(Error::InvalidConfig("eps1 must be positive"));
        }
        if self.m_window == 0 {
            return Err(Error::InvalidConfig("m_window must be at least 1"));
        }
        if self.max_iters < self.m_window {
            return Err(Error::InvalidConfig("max_iters must be at least m_window"));
        }
        Ok(())
    }
}

/// Stopping rule and step control of the outer layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterConfig {
    /// Target width of the capacity bracket, nats.
    pub eps2: f64,
    /// Gradient step in `ρ²`; `None` selects `0.1 (A/K)²`.
    pub mu: Option<f64>,
    /// Factor applied to the step after each accepted move.
    pub mu_growth: f64,
    /// Minimum number of `ρ` points in the upper-bound scan; the scan uses
    /// `max(grid_points, 64 K)`.
    pub grid_points: usize,
    pub max_outer_iters: usize,
    /// Radii closer than `merge_tol · A` are merged.
    pub merge_tol: f64,
    /// Shells lighter than this are dropped after each inner run.
    pub prune_threshold: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            eps2: bits_to_nats(1e-2),
            mu: None,
            mu_growth: 1.5,
            grid_points: 512,
            max_outer_iters: 5000,
            merge_tol: 1e-6,
            prune_threshold: 1e-9,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps2 > 0.0) {
            return Err(Error::InvalidConfig("eps2 must be positive"));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) {
                return Err(Error::InvalidConfig("mu must be positive"));
            }
        }
        if !(self.mu_growth >= 1.0) {
            return Err(Error::InvalidConfig("mu_growth must be at least 1"));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidConfig("grid_points must be at least 2"));
        }
        if !(self.merge_tol >= 0.0) || !(self.prune_threshold >= 0.0) {
            return Err(Error::InvalidConfig("merge and prune thresholds must be nonnegative"));
        }
        Ok(())
    }
}

/// Output of one inner-layer run.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub pmf: InputPmf,
    /// `𝓛 − log((2e)^N Γ(N))`, nats.
    pub lower_nats: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest drop of `𝓛` between successive iterations (0 if monotone).
    pub max_decrease: f64,
}

/// One outer iteration as recorded in the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterRecord {
    pub shells: usize,
    pub lower_nats: f64,
    pub upper_nats: f64,
    pub argmax: f64,
    pub mu: f64,
    /// Inner iterations spent in this outer iteration.
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub insertions: usize,
    pub merges: usize,
    pub prunes: usize,
    pub backtracks: usize,
    /// Largest `𝓛` decrease seen in any inner run.
    pub max_inner_decrease: f64,
    pub inner_not_converged: usize,
    pub final_mu: f64,
    pub history: Vec<OuterRecord>,
}

/// Capacity bracket with the PMF that attains the lower end.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub lower_nats: f64,
    pub upper_nats: f64,
    pub pmf: InputPmf,
    /// Location of `max_ρ i(ρ)`.
    pub upper_argmax: f64,
    pub diagnostics: Diagnostics,
    pub converged: bool,
    /// Set when the run ended because the step size collapsed.
    pub step_collapsed: bool,
}

impl CapacityResult {
    pub fn lower_bits(&self) -> f64 {
        nats_to_bits(self.lower_nats)
    }

    pub fn upper_bits(&self) -> f64 {
        nats_to_bits(self.upper_nats)
    }

    pub fn k_hat(&self) -> usize {
        self.pmf.len()
    }
}

/// Shell log-densities on the shared grid for a fixed set of radii.
struct ShellCache<'g> {
    grid: &'g Grid,
    params: ChannelParams,
    radii: Vec<f64>,
    log_rows: Vec<Vec<f64>>,
    pdf_rows: Vec<Vec<f64>>,
    /// `(N−1) log y_g`
    log_y_term: Vec<f64>,
}

impl<'g> ShellCache<'g> {
    fn new(grid: &'g Grid, params: ChannelParams, radii: &[f64]) -> Self {
        let nm1 = params.n_dim() as f64 - 1.0;
        let log_y_term = grid.nodes().iter().map(|y| nm1 * y.ln()).collect();
        let mut cache = ShellCache {
            grid,
            params,
            radii: Vec::new(),
            log_rows: Vec::new(),
            pdf_rows: Vec::new(),
            log_y_term,
        };
        cache.set_radii(radii);
        cache
    }

    fn set_radii(&mut self, radii: &[f64]) {
        let mut log_rows = Vec::with_capacity(radii.len());
        let mut pdf_rows = Vec::with_capacity(radii.len());
        for &r in radii {
            // reuse rows of unchanged shells
            if let Some(j) = self.radii.iter().position(|&old| old == r) {
                log_rows.push(self.log_rows[j].clone());
                pdf_rows.push(self.pdf_rows[j].clone());
                continue;
            }
            let law = self.params.output_law(r);
            let row: Vec<f64> = self.grid.nodes().iter().map(|&y| law.log_pdf(y)).collect();
            pdf_rows.push(row.iter().map(|v| v.exp()).collect());
            log_rows.push(row);
        }
        self.radii = radii.to_vec();
        self.log_rows = log_rows;
        self.pdf_rows = pdf_rows;
    }

    fn context(&self, pmf: InputPmf) -> InfoDensityContext {
        InfoDensityContext::from_shell_logs(pmf, self.params, self.grid.clone(), self.log_rows.clone())
    }
}

/// Blahut–Arimoto iteration on the cached shells.
///
/// With a finite `support_tol` the run continues past the usual stopping
/// rule until every shell heavier than `floor` has `i(ρ_j) ≥ 𝓛 − offset −
/// support_tol`. Off-support shells lose probability only geometrically, so
/// the objective can settle long before they do.
fn run_inner(
    cache: &ShellCache<'_>,
    probs: &[f64],
    cfg: &InnerConfig,
    support_tol: f64,
    floor: f64,
) -> InnerOutcome {
    let k = cache.radii.len();
    let g_len = cache.grid.len();
    let offset = capacity_offset(&cache.params);
    let weights = cache.grid.weights();
    let mut log_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut log_mix = vec![0.0; g_len];
    let mut history: Vec<f64> = Vec::new();
    let mut max_decrease = 0.0f64;
    let mut converged = false;
    let mut scratch = vec![0.0; k];

    for q in 1..=cfg.max_iters {
        for g in 0..g_len {
            for i in 0..k {
                scratch[i] = log_p[i] + cache.log_rows[i][g];
            }
            log_mix[g] = log_sum_exp(scratch.iter().copied());
        }
        // a_i = log p_i + ∫ f_i log(y^{N-1}/f)
        let a: Vec<f64> = (0..k)
            .map(|i| {
                let d: f64 = (0..g_len)
                    .map(|g| {
                        let f = cache.pdf_rows[i][g];
                        if f == 0.0 {
                            0.0
                        } else {
                            weights[g] * f * (cache.log_y_term[g] - log_mix[g])
                        }
                    })
                    .sum();
                log_p[i] + d
            })
            .collect();
        let lse = log_sum_exp(a.iter().copied());
        let new_log_p: Vec<f64> = a.iter().map(|ai| ai - lse).collect();
        // 𝓛(p', r) = Σ p'_i (log r_i-part − log p'_i)
        let objective: f64 = new_log_p
            .iter()
            .zip(&a)
            .map(|(lp, ai)| lp.exp() * (ai - lp))
            .sum();
        let old_log_p = core::mem::replace(&mut log_p, new_log_p);
        if let Some(&prev) = history.last() {
            max_decrease = max_decrease.max(prev - objective);
        }
        history.push(objective);

        if k == 1 {
            converged = true;
            break;
        }
        if q > cfg.m_window {
            let n = history.len();
            let last = history[n - 1];
            if (1..=cfg.m_window).all(|m| (last - history[n - 1 - m]).abs() < cfg.eps1) {
                converged = true;
                // a_i − log p_i is the information density at shell i (plus offset)
                let lagging = a.iter().zip(&old_log_p).any(|(ai, lp)| {
                    lp.exp() >= floor && ai - lp < objective - support_tol
                });
                if !lagging {
                    break;
                }
            }
        }
    }

    // underflowed weights stay positive so the PMF remains valid until pruned
    let weights = log_p.iter().map(|lp| lp.exp().max(f64::MIN_POSITIVE)).collect();
    let pmf = InputPmf::from_weights(cache.radii.clone(), weights).expect("positive weights");
    InnerOutcome {
        pmf,
        lower_nats: history.last().copied().unwrap_or(f64::NEG_INFINITY) - offset,
        iterations: history.len(),
        converged,
        max_decrease: max_decrease.max(0.0),
    }
}

/// Runs the inner layer on `pmf` with its radii fixed. Hitting
/// `max_iters` is not an error: the last (best) iterate comes back with
/// `converged` unset.
pub fn inner_layer(
    pmf: &InputPmf,
    params: &ChannelParams,
    quad: &QuadratureSpec,
    cfg: &InnerConfig,
) -> Result<InnerOutcome> {
    cfg.validate()?;
    pmf.check_against(params)?;
    let grid = Grid::for_channel(params.n_dim(), params.amplitude(), quad)?;
    let cache = ShellCache::new(&grid, *params, pmf.radii());
    Ok(run_inner(&cache, pmf.probs(), cfg, f64::INFINITY, 0.0))
}

/// `∂I/∂(ρ_i²)` for shell `shell` of `pmf`.
pub fn mi_gradient(
    pmf: &InputPmf,
    params: &ChannelParams,
    quad: &QuadratureSpec,
    shell: usize,
) -> Result<f64> {
    let ctx = InfoDensityContext::new(pmf.clone(), *params, quad)?;
    ctx.mi_gradient(shell)
}

/// `K̲` shells evenly spaced on `[0, A]` (just `{A}` when `K̲ = 1`) with
/// uniform probabilities.
pub fn initial_pmf(params: &ChannelParams) -> InputPmf {
    let k = kappa_lower_bound(params) as usize;
    let a = params.amplitude();
    let radii: Vec<f64> = if k == 1 {
        vec![a]
    } else {
        (0..k).map(|i| a * ((k - 1 - i) as f64 / (k - 1) as f64)).collect()
    };
    InputPmf::uniform(radii).expect("nonempty")
}

/// Maximum of `i(ρ)` over `(0, A]`: a uniform scan plus the support radii,
/// refined by golden-section search around the best scan point.
fn upper_scan(ctx: &InfoDensityContext, points: usize) -> (f64, f64) {
    let a = ctx.params().amplitude();
    let mut best = (a, ctx.info_density_unchecked(a));
    let mut best_idx: Option<usize> = Some(points);
    for m in 1..points {
        let rho = a * m as f64 / points as f64;
        let v = ctx.info_density_unchecked(rho);
        if v > best.1 {
            best = (rho, v);
            best_idx = Some(m);
        }
    }
    for &r in ctx.pmf().radii() {
        if r > 0.0 {
            let v = ctx.info_density_unchecked(r);
            if v > best.1 {
                best = (r, v);
                best_idx = None;
            }
        }
    }
    if let Some(m) = best_idx {
        let step = a / points as f64;
        let lo = (m as f64 - 1.0) * step;
        let hi = ((m as f64 + 1.0) * step).min(a);
        let (r, v) = golden_max(|r| ctx.info_density_unchecked(r), lo.max(1e-300), hi);
        if v > best.1 {
            best = (r, v);
        }
    }
    best
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if hi - lo <= 1e-10 * hi.max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Moves every shell but the outermost along `ρ_j² ← ρ_j² + μ ∂I/∂ρ_j²`,
/// clamping to `[0, A]`, then merges collisions.
fn gradient_step(pmf: &InputPmf, grads: &[f64], mu: f64, amplitude: f64, merge_tol: f64) -> InputPmf {
    let radii: Vec<f64> = pmf
        .radii()
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            if j == 0 {
                r
            } else {
                (r * r + mu * grads[j]).max(0.0).sqrt().min(amplitude)
            }
        })
        .collect();
    InputPmf::new(radii, pmf.probs().to_vec())
        .expect("probabilities unchanged")
        .canonical(merge_tol * amplitude)
}

/// Runs the outer layer from the cold-start PMF of [`initial_pmf`].
pub fn outer_layer(
    params: &ChannelParams,
    quad: &QuadratureSpec,
    inner_cfg: &InnerConfig,
    outer_cfg: &OuterConfig,
) -> Result<CapacityResult> {
    outer_layer_from(initial_pmf(params), params, quad, inner_cfg, outer_cfg)
}

struct Accepted {
    pmf: InputPmf,
    lower: f64,
    grads: Vec<f64>,
}

/// Runs the outer layer from `start`. The outermost radius is forced to
/// `A`; the rest are kept in `[0, A]`.
pub fn outer_layer_from(
    start: InputPmf,
    params: &ChannelParams,
    quad: &QuadratureSpec,
    inner_cfg: &InnerConfig,
    outer_cfg: &OuterConfig,
) -> Result<CapacityResult> {
    outer_layer_observed(start, params, quad, inner_cfg, outer_cfg, &mut |_| {})
}

/// As [`outer_layer_from`], calling `observer` after every completed outer
/// iteration (backtracked steps are not reported).
pub fn outer_layer_observed(
    start: InputPmf,
    params: &ChannelParams,
    quad: &QuadratureSpec,
    inner_cfg: &InnerConfig,
    outer_cfg: &OuterConfig,
    observer: &mut dyn FnMut(&OuterRecord),
) -> Result<CapacityResult> {
    inner_cfg.validate()?;
    outer_cfg.validate()?;
    quad.validate()?;
    let a = params.amplitude();
    let merge_tol = outer_cfg.merge_tol * a;

    // pin the outer shell at A
    let mut radii: Vec<f64> = start.radii().iter().map(|&r| r.clamp(0.0, a)).collect();
    let top = radii
        .iter()
        .enumerate()
        .fold(0, |b, (i, &r)| if r > radii[b] { i } else { b });
    radii[top] = a;
    let mut pmf = InputPmf::new(radii, start.probs().to_vec())?.canonical(merge_tol);

    let grid = Grid::for_channel(params.n_dim(), a, quad)?;
    let mut cache = ShellCache::new(&grid, *params, pmf.radii());
    let mut diag = Diagnostics::default();
    let mut mu = outer_cfg.mu.unwrap_or_else(|| 0.1 * (a / pmf.len() as f64).powi(2));
    let mu_floor = mu * 1e-12;
    let mut accepted: Option<Accepted> = None;
    let mut best: Option<CapacityResult> = None;
    let support_tol = 0.5 * outer_cfg.eps2;

    for _ in 0..outer_cfg.max_outer_iters {
        diag.outer_iterations += 1;
        cache.set_radii(pmf.radii());
        let mut inner = run_inner(&cache, pmf.probs(), inner_cfg, support_tol, outer_cfg.prune_threshold);
        record_inner(&mut diag, &inner);
        let mut inner_iterations = inner.iterations;

        if let Some(prev) = &accepted {
            if inner.lower_nats < prev.lower - inner_cfg.eps1 {
                diag.backtracks += 1;
                mu *= 0.5;
                if mu < mu_floor {
                    diag.final_mu = mu;
                    let mut res = best.ok_or(Error::StepCollapse { mu })?;
                    res.diagnostics = diag;
                    res.step_collapsed = true;
                    return Ok(res);
                }
                pmf = gradient_step(&prev.pmf, &prev.grads, mu, a, outer_cfg.merge_tol);
                continue;
            }
            mu *= outer_cfg.mu_growth;
        }

        let before = inner.pmf.len();
        pmf = inner.pmf.pruned(outer_cfg.prune_threshold);
        diag.prunes += before - pmf.len();
        if pmf.len() != before {
            cache.set_radii(pmf.radii());
        }
        let mut ctx = cache.context(pmf.clone());
        let scan_points = |k: usize| outer_cfg.grid_points.max(64 * k);
        let mut scan = upper_scan(&ctx, scan_points(pmf.len()));

        let has_origin_shell = pmf.radii().last().is_some_and(|&r| r <= merge_tol);
        // i(0) and i(0⁺) come from different Bessel branches, so a tie at the
        // origin is decided up to rounding
        if !has_origin_shell && ctx.info_density_unchecked(0.0) >= scan.1 - INSERTION_SLACK {
            diag.insertions += 1;
            let mut radii = pmf.radii().to_vec();
            radii.push(0.0);
            pmf = InputPmf::uniform(radii)?;
            cache.set_radii(pmf.radii());
            inner = run_inner(&cache, pmf.probs(), inner_cfg, support_tol, outer_cfg.prune_threshold);
            record_inner(&mut diag, &inner);
            inner_iterations += inner.iterations;
            let before = inner.pmf.len();
            pmf = inner.pmf.pruned(outer_cfg.prune_threshold);
            diag.prunes += before - pmf.len();
            if pmf.len() != before {
                cache.set_radii(pmf.radii());
            }
            ctx = cache.context(pmf.clone());
            scan = upper_scan(&ctx, scan_points(pmf.len()));
        }

        let lower = inner.lower_nats;
        let upper = scan.1.max(lower);
        let record = OuterRecord {
            shells: pmf.len(),
            lower_nats: lower,
            upper_nats: upper,
            argmax: scan.0,
            mu,
            inner_iterations,
        };
        observer(&record);
        diag.history.push(record);
        let current = CapacityResult {
            lower_nats: lower,
            upper_nats: upper,
            pmf: pmf.clone(),
            upper_argmax: scan.0,
            diagnostics: Diagnostics::default(),
            converged: false,
            step_collapsed: false,
        };
        if best.as_ref().is_none_or(|b| upper - lower < b.upper_nats - b.lower_nats) {
            best = Some(current.clone());
        }
        if upper - lower < outer_cfg.eps2 {
            diag.final_mu = mu;
            return Ok(CapacityResult { diagnostics: diag, converged: true, ..current });
        }

        let grads: Vec<f64> = (0..pmf.len())
            .map(|j| if j == 0 { Ok(0.0) } else { ctx.mi_gradient(j) })
            .collect::<Result<_>>()?;
        let before = pmf.len();
        let next = gradient_step(&pmf, &grads, mu, a, outer_cfg.merge_tol);
        diag.merges += before - next.len();
        accepted = Some(Accepted { pmf, lower, grads });
        pmf = next;
    }

    diag.final_mu = mu;
    let mut res = best.ok_or(Error::MaxItersExceeded { iterations: outer_cfg.max_outer_iters })?;
    res.diagnostics = diag;
    Ok(res)
}

fn record_inner(diag: &mut Diagnostics, inner: &InnerOutcome) {
    diag.inner_iterations += inner.iterations;
    diag.max_inner_decrease = diag.max_inner_decrease.max(inner.max_decrease);
    if !inner.converged {
        diag.inner_not_converged += 1;
    }
}
