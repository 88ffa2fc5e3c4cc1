//! Monte-Carlo estimates built from direct channel simulation, used to
//! cross-check the quadrature results.
//!
//! Samples are drawn in fixed-size batches; batch `b` uses ChaCha8 stream
//! `b` under the configured seed, and batch statistics are merged in batch
//! order. Results are therefore bit-identical for a given seed whatever the
//! thread count.

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use shellcap_core::model::output_log_density;
use shellcap_core::specfun::ln_gamma;
use shellcap_core::{ChannelParams, InputPmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: usize,
    pub rng_seed: u64,
    pub batch: usize,
}

impl McConfig {
    pub fn new(n_samples: usize, rng_seed: u64) -> Self {
        McConfig { n_samples, rng_seed, batch: 1 << 14 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_samples >= 10_000, "at least 10000 samples are required");
        ensure!(self.batch >= 1, "batch size must be positive");
        Ok(())
    }

    fn batches(&self) -> impl IndexedParallelIterator<Item = (u64, usize)> + '_ {
        let full = self.n_samples / self.batch;
        let rest = self.n_samples % self.batch;
        let count = full + usize::from(rest > 0);
        (0..count).into_par_iter().map(move |b| {
            let len = if b < full { self.batch } else { rest };
            (b as u64, len)
        })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

/// One channel use: the chosen shell's radius and `(|Y|², |W|²)`.
fn draw<R: Rng>(rng: &mut R, cum: &[f64], radii: &[f64], n_dim: u32) -> (f64, f64) {
    let u: f64 = rng.random();
    let shell = cum.iter().position(|&c| u < c).unwrap_or(radii.len() - 1);
    // the input sits on the first real axis; rotation invariance does the rest
    let g: f64 = rng.sample(StandardNormal);
    let mut w2 = g * g;
    let mut s = (radii[shell] + g) * (radii[shell] + g);
    for _ in 1..2 * n_dim {
        let g: f64 = rng.sample(StandardNormal);
        w2 += g * g;
        s += g * g;
    }
    (s, w2)
}

fn cumulative(pmf: &InputPmf) -> Vec<f64> {
    let mut acc = 0.0;
    pmf.probs()
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Estimates `I(X;Y)` in nats by averaging the information density
/// `log p(y|x) − log p(y)` over simulated channel uses. In terms of
/// `s = |y|²` and `w = |y − x|²` that is
/// `(N−1) log s − log f(s) − w/2 − N log 2 − log Γ(N)`.
pub fn mc_mutual_information(
    pmf: &InputPmf,
    params: &ChannelParams,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    pmf.check_against(params)?;
    let n = params.n_dim();
    let nf = n as f64;
    let constant = nf * std::f64::consts::LN_2 + ln_gamma(nf);
    let cum = cumulative(pmf);
    let radii = pmf.radii();

    let parts: Vec<Result<Moments>> = cfg
        .batches()
        .map(|(b, len)| {
            let mut rng = cfg.rng(b);
            let mut m = Moments::default();
            for _ in 0..len {
                let (s, w2) = draw(&mut rng, &cum, radii, n);
                let log_f = output_log_density(pmf, params, s)?;
                m.push((nf - 1.0) * s.ln() - log_f - 0.5 * w2 - constant);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::default();
    for part in parts {
        total = total.merge(part?);
    }
    let var = total.m2 / (total.n - 1.0);
    Ok(McEstimate {
        mean: total.mean,
        std_error: (var / total.n).sqrt(),
        n_samples: cfg.n_samples,
    })
}

/// Simulated `|Y|²` counts against the exact mixture probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Expected counts `n · P(edge_j < |Y|² ≤ edge_{j+1})`.
    pub expected: Vec<f64>,
    pub below: u64,
    pub above: u64,
    pub n_samples: usize,
}

impl Histogram {
    /// Largest `|count − expected| / √max(expected, 1)` over the bins.
    pub fn max_deviation(&self) -> f64 {
        self.counts
            .iter()
            .zip(&self.expected)
            .map(|(&c, &e)| (c as f64 - e).abs() / e.max(1.0).sqrt())
            .fold(0.0, f64::max)
    }

    /// Empirical density in each bin.
    pub fn density(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| c as f64 / (self.n_samples as f64 * (w[1] - w[0])))
            .collect()
    }
}

/// Bins simulated `|Y|²` on the increasing `edges`.
pub fn mc_output_histogram(
    pmf: &InputPmf,
    params: &ChannelParams,
    cfg: &McConfig,
    edges: &[f64],
) -> Result<Histogram> {
    cfg.validate()?;
    pmf.check_against(params)?;
    ensure!(edges.len() >= 2, "need at least one bin");
    ensure!(edges.windows(2).all(|w| w[0] < w[1]), "bin edges must increase");
    ensure!(edges[0] >= 0.0, "bin edges must be nonnegative");
    let n = params.n_dim();
    let cum = cumulative(pmf);
    let radii = pmf.radii();
    let bins = edges.len() - 1;

    let parts: Vec<(Vec<u64>, u64, u64)> = cfg
        .batches()
        .map(|(b, len)| {
            let mut rng = cfg.rng(b);
            let mut counts = vec![0u64; bins];
            let (mut below, mut above) = (0, 0);
            for _ in 0..len {
                let (s, _) = draw(&mut rng, &cum, radii, n);
                if s <= edges[0] {
                    below += 1;
                } else if s > edges[bins] {
                    above += 1;
                } else {
                    let j = edges.partition_point(|&e| e < s) - 1;
                    counts[j] += 1;
                }
            }
            (counts, below, above)
        })
        .collect();
    let mut counts = vec![0u64; bins];
    let (mut below, mut above) = (0, 0);
    for (c, lo, hi) in parts {
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        below += lo;
        above += hi;
    }

    let mixture_cdf = |y: f64| -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        pmf.radii()
            .iter()
            .zip(pmf.probs())
            .map(|(&r, &p)| p * params.output_law(r).cdf(y))
            .sum()
    };
    let total = cfg.n_samples as f64;
    let expected = edges
        .windows(2)
        .map(|w| total * (mixture_cdf(w[1]) - mixture_cdf(w[0])))
        .collect();
    Ok(Histogram { edges: edges.to_vec(), counts, expected, below, above, n_samples: cfg.n_samples })
}
