//! Integrals over `y ∈ (0, ∞)` against chi-squared weights.
//!
//! Two routes are provided. [`integrate_weighted`] is a global adaptive
//! 15-point Gauss–Kronrod integrator on the window returned by
//! [`truncation_window`], with an error estimate and a panel budget. [`Grid`]
//! is a fixed composite Gauss–Kronrod rule whose panel widths follow the
//! local spread of `χ²_{2N}(λ)` around `y ≈ λ`; it lets the solver cache
//! every shell density on one set of nodes and reuse it across iterations.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::specfun::Chi2Params;
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Seven-point Gauss weights, paired with `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Truncation and refinement policy for integrals over `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute error target per integral.
    pub abs_tol: f64,
    /// Chi-squared mass allowed outside the truncated window.
    pub tail_mass: f64,
    /// Cap on adaptive subdivisions.
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-9, tail_mass: 1e-12, max_panels: 2000 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig("abs_tol must be positive"));
        }
        if !(self.tail_mass > 0.0 && self.tail_mass < 1e-6) {
            return Err(Error::InvalidConfig("tail_mass must lie in (0, 1e-6)"));
        }
        if self.max_panels < 64 {
            return Err(Error::InvalidConfig("max_panels must be at least 64"));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One Gauss–Kronrod 15 panel, with QUADPACK's error rescaling.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0f64; 15];
    fv[7] = f(center);
    for j in 0..7 {
        let dx = half * XGK[j];
        fv[j] = f(center - dx);
        fv[14 - j] = f(center + dx);
    }
    if fv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("integrand is not finite on the window"));
    }
    let mut kronrod = WGK[7] * fv[7];
    let mut gauss = WG[3] * fv[7];
    let mut resabs = WGK[7] * fv[7].abs();
    for j in 0..7 {
        let pair = fv[j] + fv[14 - j];
        kronrod += WGK[j] * pair;
        resabs += WGK[j] * (fv[j].abs() + fv[14 - j].abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * (fv[7] - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let value = kronrod * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Panel { a, b, value, error })
}

/// Global adaptive Gauss–Kronrod integration over the partition `breaks`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<Estimate> {
    let mut panels = Vec::with_capacity(max_panels.min(4096));
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            panels.push(gk15(&mut f, w[0], w[1])?);
        }
    }
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= abs_tol {
            return Ok(Estimate { value, error, panels: panels.len() });
        }
        if panels.len() >= max_panels {
            return Err(Error::NonConvergent { achieved: error, panels: panels.len() });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::NonConvergent { achieved: error, panels: panels.len() + 1 });
        }
        panels.push(gk15(&mut f, p.a, mid)?);
        panels.push(gk15(&mut f, mid, p.b)?);
    }
}

/// Window `[y_lo, y_hi]` holding all but `tail_mass` of the weight, split
/// evenly between the two tails.
pub fn truncation_window(weight: Chi2Params, tail_mass: f64) -> (f64, f64) {
    let half = 0.5 * tail_mass;
    let mean = weight.mean();
    let sd = weight.variance().sqrt();

    // lower edge: keep cdf(lo) <= half < cdf(hi)
    let (mut lo, mut hi) = (0.0, mean);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if weight.cdf(mid) <= half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * mean {
            break;
        }
    }
    let y_lo = lo;

    // upper edge: keep sf(lo) > half >= sf(hi)
    let mut hi = mean + 8.0 * sd;
    for _ in 0..64 {
        if weight.sf(hi) <= half {
            break;
        }
        hi = mean + 2.0 * (hi - mean);
    }
    let mut lo = mean;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if weight.sf(mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * mean {
            break;
        }
    }
    (y_lo, hi)
}

/// Adaptive estimate of `∫ g(y) f_{χ²}(y) dy` over the truncation window.
pub fn integrate_weighted_estimate<G: FnMut(f64) -> f64>(
    mut g: G,
    weight: Chi2Params,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    spec.validate()?;
    let (lo, hi) = truncation_window(weight, spec.tail_mass);
    let mean = weight.mean();
    let sd = weight.variance().sqrt();
    let mut breaks: Vec<f64> = Vec::with_capacity(9);
    breaks.push(lo);
    for s in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
        let y = mean + s * sd;
        if y > lo && y < hi {
            breaks.push(y);
        }
    }
    breaks.push(hi);
    integrate_adaptive(
        |y| {
            let d = weight.pdf(y);
            if d == 0.0 {
                0.0
            } else {
                g(y) * d
            }
        },
        &breaks,
        spec.abs_tol,
        spec.max_panels,
    )
}

/// `∫ g(y) f_{χ²}(y) dy` to `spec.abs_tol`, ignoring the truncated tails.
pub fn integrate_weighted<G: FnMut(f64) -> f64>(
    g: G,
    weight: Chi2Params,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_weighted_estimate(g, weight, spec).map(|e| e.value)
}

/// Composite Gauss–Kronrod nodes on `(0, y_hi]`.
///
/// Panels have width `scale · √max(y, floor)`, which tracks the standard
/// deviation `2√y` of a chi-squared law centred near `y`. The first panel
/// is split geometrically towards the origin so that integrands carrying a
/// `log y` factor are resolved.
#[derive(Debug, Clone)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

impl Grid {
    pub fn new(y_hi: f64, floor: f64, scale: f64) -> Result<Self> {
        if !(y_hi > 0.0 && floor > 0.0 && scale > 0.0) {
            return Err(Error::Domain("grid needs positive extent, floor and scale"));
        }
        let mut breaks = Vec::new();
        let first = (scale * floor.sqrt()).min(y_hi);
        breaks.push(0.0);
        for j in (1..=24).rev() {
            breaks.push(first * 0.5f64.powi(j));
        }
        let mut y = first;
        breaks.push(y);
        while y < y_hi {
            let w = scale * y.max(floor).sqrt();
            y = if y + 1.25 * w >= y_hi { y_hi } else { y + w };
            breaks.push(y);
        }
        let mut nodes = Vec::with_capacity(15 * breaks.len());
        let mut weights = Vec::with_capacity(15 * breaks.len());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for j in 0..7 {
                nodes.push(c - h * XGK[j]);
                weights.push(h * WGK[j]);
            }
            nodes.push(c);
            weights.push(h * WGK[7]);
            for j in (0..7).rev() {
                nodes.push(c + h * XGK[j]);
                weights.push(h * WGK[j]);
            }
        }
        Ok(Grid { nodes, weights, panels: breaks.len() - 1 })
    }

    /// Grid covering every `χ²_{2N}(ρ²)` and `χ²_{2N+2}(ρ²)` with `ρ ≤ A`.
    pub fn for_channel(n_dim: u32, amplitude: f64, spec: &QuadratureSpec) -> Result<Self> {
        Self::for_channel_scaled(n_dim, amplitude, spec, 1.0)
    }

    /// As [`Grid::for_channel`], with panel widths multiplied by `scale`.
    pub fn for_channel_scaled(
        n_dim: u32,
        amplitude: f64,
        spec: &QuadratureSpec,
        scale: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let lambda = amplitude * amplitude;
        let top = Chi2Params::new(2 * n_dim + 2, lambda)?;
        let (_, y_hi) = truncation_window(top, spec.tail_mass);
        Grid::new(y_hi, 2.0 * n_dim as f64, scale)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn upper(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(0.0)
    }

    /// `Σ_g w_g v_g`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `Σ_g w_g f(y_g)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| w * f(y)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chi2(k: u32, l: f64) -> Chi2Params {
        Chi2Params::new(k, l).unwrap()
    }

    #[test]
    fn kronrod_weights_are_consistent() {
        let sum_k: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let sum_g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((sum_k - 2.0).abs() < 1e-15);
        assert!((sum_g - 2.0).abs() < 1e-15);
        // K15 integrates x^22 exactly on [-1,1]
        let e = integrate_adaptive(|x| x.powi(22), &[-1.0, 1.0], 1.0, 1);
        let v = e.unwrap().value;
        assert!((v - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec { max_panels: 10, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec { tail_mass: 1e-3, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec { abs_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn normalization_and_mean() {
        let spec = QuadratureSpec::default();
        for &(k, l) in &[(2, 0.0), (4, 3.0), (6, 1000.0)] {
            let w = chi2(k, l);
            let one = integrate_weighted(|_| 1.0, w, &spec).unwrap();
            assert!((one - 1.0).abs() <= spec.tail_mass + spec.abs_tol);
            let m = integrate_weighted(|y| y, w, &spec).unwrap();
            assert!((m - w.mean()).abs() <= 1e-6 * w.mean());
        }
    }

    #[test]
    fn expected_log_central() {
        // E[log χ²_4] = ψ(2) + ln 2
        let v = integrate_weighted(|y| y.ln(), chi2(4, 0.0), &QuadratureSpec::default()).unwrap();
        assert!((v - 1.1159315156584124).abs() < 1e-8);
    }

    #[test]
    fn window_examples() {
        let (lo, hi) = truncation_window(chi2(2, 0.0), 1e-12);
        assert!(hi >= 2.0 * (2e12f64).ln() - 1e-6);
        assert!(lo < 2.0 && 2.0 < hi);
        for &(k, l) in &[(2, 0.0), (4, 100.0), (8, 4000.0), (6, 0.5)] {
            let w = chi2(k, l);
            let (lo, hi) = truncation_window(w, 1e-12);
            assert!(lo < w.mean() && w.mean() < hi);
            assert!(w.cdf(lo) <= 0.5e-12);
            assert!(w.sf(hi) <= 0.5e-12);
        }
    }

    #[test]
    fn window_is_tight_against_bisection_oracle() {
        // independent bracket: scan the CDF on a fine lattice
        let w = chi2(4, 100.0);
        let (lo, hi) = truncation_window(w, 1e-12);
        let step = 1e-3;
        let mut y = step;
        let mut last_below = 0.0;
        while y < w.mean() {
            if w.cdf(y) <= 0.5e-12 {
                last_below = y;
            }
            y += step;
        }
        assert!((lo - last_below).abs() < 2.0 * step, "{lo} vs {last_below}");
        let mut y = w.mean();
        while w.sf(y) > 0.5e-12 {
            y += step;
        }
        assert!((hi - y).abs() < 2.0 * step, "{hi} vs {y}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let spec = QuadratureSpec { abs_tol: 1e-300, max_panels: 64, ..Default::default() };
        let err = integrate_weighted(|y| (1.0 / y).sin(), chi2(2, 0.0), &spec).unwrap_err();
        assert!(matches!(err, Error::NonConvergent { panels: 64, .. }));
    }

    #[test]
    fn grid_integrates_shell_densities() {
        let spec = QuadratureSpec::default();
        let grid = Grid::for_channel(2, 4000f64.sqrt(), &spec).unwrap();
        for &l in &[0.0, 1.0, 250.0, 4000.0] {
            let w = chi2(4, l);
            let one = grid.integrate(|y| w.pdf(y));
            assert!((one - 1.0).abs() < 1e-10, "λ={l}: {one}");
            let m = grid.integrate(|y| y * w.pdf(y));
            assert!((m - w.mean()).abs() < 1e-8 * w.mean());
        }
    }

    #[test]
    fn doubling_panels_is_stable() {
        let spec = QuadratureSpec::default();
        let w = chi2(4, 30.0);
        let a = integrate_weighted(|y| y.ln() * y.sqrt(), w, &spec).unwrap();
        let wide = QuadratureSpec { max_panels: 2 * spec.max_panels, ..spec };
        let b = integrate_weighted(|y| y.ln() * y.sqrt(), w, &wide).unwrap();
        assert!((a - b).abs() <= 2.0 * spec.abs_tol);
    }
}
