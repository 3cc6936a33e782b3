//! Achievable information rates with the mismatched AWGN decoding metric.
//!
//! The auxiliary channel `y = h x + n`, `n ~ CN(0, σ²)`, is fitted to the
//! transmitted/received pairs (pooled over both polarizations) and defines the
//! decoding metric `q(y|c) ∝ exp(-|y - h c|² / σ²)`. All rates are in bits per
//! 2D symbol per polarization.
//!
//! Monte-Carlo standard errors come from a block bootstrap over symbol blocks,
//! the correlation unit after selection.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::{Constellation, ConstellationKind, SymbolSequence};
use crate::{Error, Result};

/// Fitted AWGN auxiliary channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxChannel {
    pub h: C64,
    /// Noise variance per complex dimension, per polarization.
    pub sigma2: f64,
}

impl AuxChannel {
    fn checked(h: C64, sigma2: f64, signal: f64) -> Result<Self> {
        // anything cleaner than ~120 dB SNR is treated as a noiseless fit
        if !(sigma2 > 1e-12 * h.norm_sqr() * signal) || !sigma2.is_finite() {
            return Err(Error::DegenerateChannel(sigma2));
        }
        Ok(AuxChannel { h, sigma2 })
    }

    /// `|h|² E / σ²` for signal energy `E` per symbol.
    pub fn snr(&self, signal_energy: f64) -> f64 {
        self.h.norm_sqr() * signal_energy / self.sigma2
    }
}

fn pairs<'a>(x: &'a SymbolSequence, y: &'a SymbolSequence) -> impl Iterator<Item = (&'a C64, &'a C64)> {
    x.x().iter().zip(y.x()).chain(x.y().iter().zip(y.y()))
}

fn check_lengths(x: &SymbolSequence, y: &SymbolSequence) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

/// `h = E[x* y] / E[|x|²]`, `σ² = E[|y - h x|²]`, pooled over both polarizations.
pub fn fit_aux_channel(x: &SymbolSequence, y: &SymbolSequence) -> Result<AuxChannel> {
    check_lengths(x, y)?;
    let n = 2 * x.len();
    if n < 2 {
        return Err(Error::Config("need at least two symbols".into()));
    }
    let (sxy, sxx) = pairs(x, y).fold((C64::new(0.0, 0.0), 0.0), |(a, b), (u, v)| {
        (a + u.conj() * v, b + u.norm_sqr())
    });
    if sxx == 0.0 {
        return Err(Error::UndefinedGain);
    }
    let h = sxy / sxx;
    let sigma2 = pairs(x, y).map(|(u, v)| (v - h * u).norm_sqr()).sum::<f64>() / n as f64;
    AuxChannel::checked(h, sigma2, sxx / n as f64)
}

/// Separate fits for the x and y polarizations.
pub fn fit_aux_channel_per_pol(x: &SymbolSequence, y: &SymbolSequence) -> Result<[AuxChannel; 2]> {
    check_lengths(x, y)?;
    let fit = |p: usize| -> Result<AuxChannel> {
        let single = |s: &SymbolSequence| SymbolSequence::new(s.pol(p).to_vec(), s.pol(p).to_vec());
        fit_aux_channel(&single(x)?, &single(y)?)
    };
    Ok([fit(0)?, fit(1)?])
}

/// `log2(1 + |h|² E / σ²)`.
pub fn awgn_rate(aux: &AuxChannel, signal_energy: f64) -> f64 {
    (1.0 + aux.snr(signal_energy)).log2()
}

/// Gaussian-input rate with the Gaussian metric: `log2(1 + SNR_aux)` per
/// polarization, averaged over the two.
pub fn air_symbolwise(x: &SymbolSequence, y: &SymbolSequence, aux: &AuxChannel) -> Result<f64> {
    check_lengths(x, y)?;
    let n = x.len() as f64;
    let rates: Vec<f64> = (0..2)
        .map(|p| {
            let e = x.pol(p).iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
            awgn_rate(aux, e)
        })
        .collect();
    Ok(0.5 * (rates[0] + rates[1]))
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_discrete(constellation: &Constellation) -> Result<()> {
    if constellation.kind() != ConstellationKind::Discrete {
        return Err(Error::Config("bit-wise rates need a discrete constellation".into()));
    }
    if constellation.labels().len() != constellation.size()
        || constellation.probabilities().len() != constellation.size()
    {
        return Err(Error::Config("labeling/probability vector does not match the points".into()));
    }
    Ok(())
}

/// Per-symbol decoding terms shared by the bit-wise and symbol-wise discrete metrics.
struct DiscreteMetric<'a> {
    constellation: &'a Constellation,
    log_p: Vec<f64>,
    aux: AuxChannel,
    scratch: Vec<f64>,
}

impl<'a> DiscreteMetric<'a> {
    fn new(constellation: &'a Constellation, aux: AuxChannel) -> Self {
        let log_p = constellation
            .probabilities()
            .iter()
            .map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        DiscreteMetric {
            constellation,
            log_p,
            aux,
            scratch: vec![0.0; constellation.size()],
        }
    }

    fn fill(&mut self, y: C64) {
        let h = self.aux.h;
        let s2 = self.aux.sigma2;
        for ((w, c), lp) in self.scratch.iter_mut().zip(self.constellation.points()).zip(&self.log_p) {
            *w = lp - (y - h * c).norm_sqr() / s2;
        }
    }

    /// `Σ_i log2( Σ_c p q / Σ_{c: b_i(c) = b_i(x)} p q )` for one received sample.
    fn bit_penalty(&mut self, sent: usize, y: C64) -> f64 {
        self.fill(y);
        let all = log_sum_exp(self.scratch.iter().copied());
        let labels = self.constellation.labels();
        let own = labels[sent];
        let mut total = 0.0;
        for i in 0..self.constellation.bits_per_symbol() {
            let bit = (own >> i) & 1;
            let matching = self
                .scratch
                .iter()
                .zip(labels)
                .filter(move |(_, l)| (*l >> i) & 1 == bit)
                .map(|(w, _)| *w);
            total += all - log_sum_exp(matching);
        }
        total / std::f64::consts::LN_2
    }

    /// `log2 q(y|x) - log2 Σ_c p(c) q(y|c)`.
    fn symbol_density(&mut self, sent: usize, y: C64) -> f64 {
        self.fill(y);
        let all = log_sum_exp(self.scratch.iter().copied());
        (self.scratch[sent] - self.log_p[sent] - all) / std::f64::consts::LN_2
    }
}

/// Bit-wise AIR (GMI) of shaped discrete inputs: `H(X) - Σ_i E[...]`.
///
/// The raw Monte-Carlo estimate is returned; it may be slightly negative at
/// very low SNR.
pub fn air_bitwise(
    x: &SymbolSequence,
    y: &SymbolSequence,
    aux: &AuxChannel,
    constellation: &Constellation,
) -> Result<f64> {
    Ok(constellation.entropy() - mean_bit_penalty(x, y, aux, constellation)?)
}

fn mean_bit_penalty(
    x: &SymbolSequence,
    y: &SymbolSequence,
    aux: &AuxChannel,
    constellation: &Constellation,
) -> Result<f64> {
    check_lengths(x, y)?;
    check_discrete(constellation)?;
    let mut metric = DiscreteMetric::new(constellation, *aux);
    let mut acc = 0.0;
    for (s, r) in pairs(x, y) {
        acc += metric.bit_penalty(constellation.index_of(*s), *r);
    }
    Ok(acc / (2 * x.len()) as f64)
}

/// Symbol-wise (non-binary) AIR of discrete inputs with the same metric.
pub fn air_symbolwise_discrete(
    x: &SymbolSequence,
    y: &SymbolSequence,
    aux: &AuxChannel,
    constellation: &Constellation,
) -> Result<f64> {
    check_lengths(x, y)?;
    check_discrete(constellation)?;
    let mut metric = DiscreteMetric::new(constellation, *aux);
    let acc: f64 = pairs(x, y)
        .map(|(s, r)| metric.symbol_density(constellation.index_of(*s), *r))
        .sum();
    Ok(acc / (2 * x.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_symbols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Bootstrap {
            resamples: 200,
            seed: 0x5eed,
        }
    }
}

fn resample_indices(rng: &mut ChaCha8Rng, n: usize) -> impl Iterator<Item = usize> + '_ {
    (0..n).map(move |_| rng.random_range(0..n))
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Per-block sufficient statistics of the symbol-wise estimator.
#[derive(Debug, Clone, Copy, Default)]
struct BlockStats {
    sxy: C64,
    sxx: [f64; 2],
    syy: f64,
    n: usize,
}

impl BlockStats {
    fn of(x: &SymbolSequence, y: &SymbolSequence) -> Self {
        let mut s = BlockStats {
            n: x.len(),
            ..Default::default()
        };
        for p in 0..2 {
            for (u, v) in x.pol(p).iter().zip(y.pol(p)) {
                s.sxy += u.conj() * v;
                s.sxx[p] += u.norm_sqr();
                s.syy += v.norm_sqr();
            }
        }
        s
    }

    fn add(&mut self, o: &BlockStats) {
        self.sxy += o.sxy;
        self.sxx[0] += o.sxx[0];
        self.sxx[1] += o.sxx[1];
        self.syy += o.syy;
        self.n += o.n;
    }

    fn rate(&self) -> Result<f64> {
        let sxx = self.sxx[0] + self.sxx[1];
        if sxx == 0.0 {
            return Err(Error::UndefinedGain);
        }
        let h = self.sxy / sxx;
        let count = (2 * self.n) as f64;
        let sigma2 = (self.syy - self.sxy.norm_sqr() / sxx) / count;
        let aux = AuxChannel::checked(h, sigma2, sxx / count)?;
        let n = self.n as f64;
        Ok(0.5 * (awgn_rate(&aux, self.sxx[0] / n) + awgn_rate(&aux, self.sxx[1] / n)))
    }
}

fn check_blocks(x: &[SymbolSequence], y: &[SymbolSequence]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Config("no blocks to estimate from".into()));
    }
    x.iter().zip(y).try_for_each(|(a, b)| check_lengths(a, b))
}

/// Maps arbitrary group labels to dense bootstrap-unit indices.
fn bootstrap_units(groups: &[usize], blocks: usize) -> Result<(Vec<usize>, usize)> {
    if groups.len() != blocks {
        return Err(Error::LengthMismatch {
            expected: blocks,
            got: groups.len(),
        });
    }
    let mut dense = std::collections::BTreeMap::new();
    let units = groups
        .iter()
        .map(|g| {
            let next = dense.len();
            *dense.entry(*g).or_insert(next)
        })
        .collect();
    Ok((units, dense.len()))
}

/// Symbol-wise AIR over blocks with bootstrap standard error; every block is
/// its own bootstrap unit.
pub fn estimate_symbolwise(
    x: &[SymbolSequence],
    y: &[SymbolSequence],
    bootstrap: &Bootstrap,
) -> Result<RateEstimate> {
    let groups: Vec<usize> = (0..x.len()).collect();
    estimate_symbolwise_grouped(x, y, &groups, bootstrap)
}

/// As [`estimate_symbolwise`], but blocks sharing a group label (e.g. repeated
/// transmissions of one source block) are resampled together.
pub fn estimate_symbolwise_grouped(
    x: &[SymbolSequence],
    y: &[SymbolSequence],
    groups: &[usize],
    bootstrap: &Bootstrap,
) -> Result<RateEstimate> {
    check_blocks(x, y)?;
    let (units, n_units) = bootstrap_units(groups, x.len())?;
    let mut stats = vec![BlockStats::default(); n_units];
    for ((a, b), u) in x.iter().zip(y).zip(&units) {
        stats[*u].add(&BlockStats::of(a, b));
    }
    let mut total = BlockStats::default();
    stats.iter().for_each(|s| total.add(s));
    let value = total.rate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap.seed);
    let mut draws = Vec::with_capacity(bootstrap.resamples);
    for _ in 0..bootstrap.resamples {
        let mut acc = BlockStats::default();
        for i in resample_indices(&mut rng, n_units).collect::<Vec<_>>() {
            acc.add(&stats[i]);
        }
        draws.push(acc.rate()?);
    }
    Ok(RateEstimate {
        value,
        stderr: std_dev(&draws),
        n_symbols: total.n,
    })
}

/// Bit-wise AIR over blocks with bootstrap standard error (metric fitted once
/// on all blocks).
pub fn estimate_bitwise(
    x: &[SymbolSequence],
    y: &[SymbolSequence],
    constellation: &Constellation,
    bootstrap: &Bootstrap,
) -> Result<RateEstimate> {
    let groups: Vec<usize> = (0..x.len()).collect();
    estimate_bitwise_grouped(x, y, constellation, &groups, bootstrap)
}

/// As [`estimate_bitwise`] with grouped bootstrap units.
pub fn estimate_bitwise_grouped(
    x: &[SymbolSequence],
    y: &[SymbolSequence],
    constellation: &Constellation,
    groups: &[usize],
    bootstrap: &Bootstrap,
) -> Result<RateEstimate> {
    check_blocks(x, y)?;
    let (units, n_units) = bootstrap_units(groups, x.len())?;
    let aux = fit_aux_channel(&SymbolSequence::concat(x)?, &SymbolSequence::concat(y)?)?;
    // per unit: sum of per-symbol penalties and symbol count
    let mut sums = vec![(0.0, 0.0); n_units];
    for ((a, b), u) in x.iter().zip(y).zip(&units) {
        let w = (2 * a.len()) as f64;
        sums[*u].0 += mean_bit_penalty(a, b, &aux, constellation)? * w;
        sums[*u].1 += w;
    }
    let mean = |idx: &mut dyn Iterator<Item = usize>| {
        let (s, w) = idx.fold((0.0, 0.0), |(s, w), i| (s + sums[i].0, w + sums[i].1));
        s / w
    };
    let h = constellation.entropy();
    let value = h - mean(&mut (0..n_units));
    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap.seed);
    let draws: Vec<f64> = (0..bootstrap.resamples)
        .map(|_| {
            let idx: Vec<usize> = resample_indices(&mut rng, n_units).collect();
            h - mean(&mut idx.into_iter())
        })
        .collect();
    Ok(RateEstimate {
        value,
        stderr: std_dev(&draws),
        n_symbols: x.iter().map(|b| b.len()).sum(),
    })
}

/// AIR lower bound for a selected source: unbiased rate plus selection penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirEstimate {
    pub air_unbiased: f64,
    /// `log2(η) / (2N)`, never positive.
    pub selection_penalty: f64,
    pub air_bound: f64,
    pub mc_stderr: f64,
    pub n_symbols_used: usize,
}

/// `AIR ≥ AIR^(u) + log2(η) / (2N)`: a selected block of `N` 2-pol symbols
/// loses at most `log2(1/η)` bits.
pub fn selection_bound(air_unbiased: f64, eta: f64, block_length: usize) -> Result<AirEstimate> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidRate(eta));
    }
    if block_length == 0 {
        return Err(Error::Config("block length must be >= 1".into()));
    }
    let selection_penalty = eta.log2() / (2 * block_length) as f64;
    Ok(AirEstimate {
        air_unbiased,
        selection_penalty,
        air_bound: air_unbiased + selection_penalty,
        mc_stderr: 0.0,
        n_symbols_used: 0,
    })
}

impl AirEstimate {
    pub fn from_rate(rate: &RateEstimate, eta: f64, block_length: usize) -> Result<Self> {
        let mut est = selection_bound(rate.value, eta, block_length)?;
        est.mc_stderr = rate.stderr;
        est.n_symbols_used = rate.n_symbols;
        Ok(est)
    }
}
