//! Constellations, symbol sources, Nyquist-sinc modulation and WDM multiplexing.
//!
//! Symbol sequences are dimensionless with unit mean energy per polarization.
//! [`modulate`] applies the launch power; [`crate::dsp::matched_filter_sample`]
//! removes it again, so a back-to-back chain returns the transmitted symbols.

use num_complex::Complex64 as C64;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::fft::{bin, signed_index, FftPair};
use crate::units::dbm_to_watt;
use crate::{Error, Result};

/// Block of `N` dual-polarization complex symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSequence {
    x: Vec<C64>,
    y: Vec<C64>,
}

impl SymbolSequence {
    pub fn new(x: Vec<C64>, y: Vec<C64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::Config("a symbol sequence needs N >= 1".into()));
        }
        Ok(SymbolSequence { x, y })
    }

    pub fn zeros(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n.max(1)];
        SymbolSequence { x: z.clone(), y: z }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[C64] {
        &self.x
    }

    pub fn y(&self) -> &[C64] {
        &self.y
    }

    /// Polarization `p` (0 = x, 1 = y).
    pub fn pol(&self, p: usize) -> &[C64] {
        match p {
            0 => &self.x,
            _ => &self.y,
        }
    }

    pub fn pol_mut(&mut self, p: usize) -> &mut [C64] {
        match p {
            0 => &mut self.x,
            _ => &mut self.y,
        }
    }

    pub fn pols(&self) -> [&[C64]; 2] {
        [&self.x, &self.y]
    }

    pub fn into_pols(self) -> (Vec<C64>, Vec<C64>) {
        (self.x, self.y)
    }

    /// Sum of |s|² over both polarizations.
    pub fn energy(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|s| s.norm_sqr()).sum()
    }

    pub fn mean_energy_per_pol(&self) -> f64 {
        self.energy() / (2 * self.len()) as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SymbolSequence {
            x: self.x.iter().map(|s| s * factor).collect(),
            y: self.y.iter().map(|s| s * factor).collect(),
        }
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let r = C64::from_polar(1.0, theta);
        SymbolSequence {
            x: self.x.iter().map(|s| s * r).collect(),
            y: self.y.iter().map(|s| s * r).collect(),
        }
    }

    pub fn concat(blocks: &[SymbolSequence]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Config("cannot concatenate zero blocks".into()));
        }
        let n: usize = blocks.iter().map(|b| b.len()).sum();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for b in blocks {
            x.extend_from_slice(&b.x);
            y.extend_from_slice(&b.y);
        }
        Ok(SymbolSequence { x, y })
    }

    /// Splits into consecutive blocks of `block_len` symbols.
    pub fn split(&self, block_len: usize) -> Result<Vec<SymbolSequence>> {
        if block_len == 0 || !self.len().is_multiple_of(block_len) {
            return Err(Error::Config(format!(
                "sequence of {} symbols does not split into blocks of {}",
                self.len(),
                block_len
            )));
        }
        Ok(self
            .x
            .chunks(block_len)
            .zip(self.y.chunks(block_len))
            .map(|(x, y)| SymbolSequence {
                x: x.to_vec(),
                y: y.to_vec(),
            })
            .collect())
    }
}

/// Error vector magnitude of `received` against `reference`, in dB.
pub fn evm_db(reference: &SymbolSequence, received: &SymbolSequence) -> f64 {
    let err: f64 = reference
        .pols()
        .iter()
        .zip(received.pols())
        .flat_map(|(a, b)| a.iter().zip(b.iter()))
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    10.0 * (err / reference.energy()).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationKind {
    Discrete,
    Gaussian,
}

/// Symbol alphabet with point probabilities and bit labels.
///
/// Points are normalized to unit mean energy under `probabilities`. The
/// Gaussian kind carries no points; it only tags a continuous source.
#[derive(Debug, Clone)]
pub struct Constellation {
    points: Vec<C64>,
    probabilities: Vec<f64>,
    labels: Vec<u32>,
    bits_per_symbol: u32,
    kind: ConstellationKind,
    /// PAM levels per real dimension for square QAM.
    pam_levels: Option<usize>,
    /// Factor mapping the odd-integer grid onto normalized points.
    grid_scale: f64,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn gaussian() -> Self {
        Constellation {
            points: Vec::new(),
            probabilities: Vec::new(),
            labels: Vec::new(),
            bits_per_symbol: 0,
            kind: ConstellationKind::Gaussian,
            pam_levels: None,
            grid_scale: 1.0,
        }
    }

    /// Uniform square M-QAM with binary-reflected Gray labeling.
    ///
    /// Point `i * L + q` sits at `(2i - L + 1) + j (2q - L + 1)` before scaling,
    /// with `L = sqrt(M)`.
    pub fn square_qam(order: usize) -> Result<Self> {
        let levels = (order as f64).sqrt().round() as usize;
        if order < 4 || levels * levels != order || !levels.is_power_of_two() {
            return Err(Error::Config(format!(
                "{order}-QAM is not a square power-of-four constellation"
            )));
        }
        let half_bits = levels.trailing_zeros();
        let mut points = Vec::with_capacity(order);
        let mut labels = Vec::with_capacity(order);
        for i in 0..levels {
            for q in 0..levels {
                let re = (2 * i) as f64 - (levels - 1) as f64;
                let im = (2 * q) as f64 - (levels - 1) as f64;
                points.push(C64::new(re, im));
                labels.push((gray(i as u32) << half_bits) | gray(q as u32));
            }
        }
        let probabilities = vec![1.0 / order as f64; order];
        let mut c = Constellation {
            points,
            probabilities,
            labels,
            bits_per_symbol: 2 * half_bits,
            kind: ConstellationKind::Discrete,
            pam_levels: Some(levels),
            grid_scale: 1.0,
        };
        c.normalize();
        Ok(c)
    }

    /// Same points and labels under new probabilities, renormalized to unit energy.
    pub fn with_probabilities(&self, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got: probabilities.len(),
            });
        }
        let total: f64 = probabilities.iter().sum();
        if !(total > 0.0) || probabilities.iter().any(|p| *p < 0.0) {
            return Err(Error::Config("invalid probability vector".into()));
        }
        let mut c = self.clone();
        c.probabilities = probabilities.into_iter().map(|p| p / total).collect();
        // back to the integer grid, then renormalize under the new weights
        c.points.iter_mut().for_each(|p| *p /= self.grid_scale);
        c.grid_scale = 1.0;
        c.normalize();
        Ok(c)
    }

    fn normalize(&mut self) {
        let e: f64 = self
            .points
            .iter()
            .zip(&self.probabilities)
            .map(|(c, p)| p * c.norm_sqr())
            .sum();
        let s = 1.0 / e.sqrt();
        self.points.iter_mut().for_each(|c| *c *= s);
        self.grid_scale *= s;
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn pam_levels(&self) -> Option<usize> {
        self.pam_levels
    }

    /// Scale from the odd-integer amplitude grid to the normalized points.
    pub fn grid_scale(&self) -> f64 {
        self.grid_scale
    }

    /// Entropy of the point distribution in bits.
    pub fn entropy(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }

    /// Index of the nearest point.
    pub fn index_of(&self, s: C64) -> usize {
        if let Some(levels) = self.pam_levels {
            let to_index = |v: f64| -> usize {
                let i = ((v / self.grid_scale + (levels - 1) as f64) / 2.0).round();
                i.clamp(0.0, (levels - 1) as f64) as usize
            };
            return to_index(s.re) * levels + to_index(s.im);
        }
        self.points
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - s).norm_sqr().total_cmp(&(b.1 - s).norm_sqr()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Point index of the square-QAM point with odd-integer coordinates `(re, im)`.
    pub fn grid_index(&self, re: i32, im: i32) -> Option<usize> {
        let levels = self.pam_levels? as i32;
        let i = (re + levels - 1) / 2;
        let q = (im + levels - 1) / 2;
        if (re + levels - 1) % 2 != 0 || !(0..levels).contains(&i) || !(0..levels).contains(&q) {
            return None;
        }
        Some((i * levels + q) as usize)
    }
}

/// A generator of i.i.d. symbol blocks.
pub trait SymbolSource {
    fn draw_block(&self, rng: &mut dyn RngCore, n: usize) -> Result<SymbolSequence>;

    /// Point alphabet used by the bit-wise rate estimator, if discrete.
    fn constellation(&self) -> Option<&Constellation> {
        None
    }
}

/// Circular complex Gaussian symbols with unit energy per polarization.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianSource;

impl SymbolSource for GaussianSource {
    fn draw_block(&self, rng: &mut dyn RngCore, n: usize) -> Result<SymbolSequence> {
        if n == 0 {
            return Err(Error::Config("a symbol block needs n >= 1".into()));
        }
        Ok(gaussian_source(rng, n))
    }
}

pub fn gaussian_source(rng: &mut dyn RngCore, n: usize) -> SymbolSequence {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = || {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    };
    let x: Vec<C64> = (0..n).map(|_| draw()).collect();
    let y: Vec<C64> = (0..n).map(|_| draw()).collect();
    SymbolSequence { x, y }
}

/// WDM grid and transmitter sampling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WdmConfig {
    pub num_channels: usize,
    /// Hz
    pub symbol_rate: f64,
    /// Hz
    pub channel_spacing: f64,
    pub samples_per_symbol: usize,
    /// Per channel, split equally over the two polarizations.
    pub launch_power_dbm: f64,
    /// Oversampling kept by [`demultiplex`].
    pub rx_samples_per_symbol: usize,
}

impl Default for WdmConfig {
    fn default() -> Self {
        WdmConfig {
            num_channels: 5,
            symbol_rate: 50e9,
            channel_spacing: 50e9,
            samples_per_symbol: 16,
            launch_power_dbm: 1.0,
            rx_samples_per_symbol: 4,
        }
    }
}

impl WdmConfig {
    pub fn single_channel(samples_per_symbol: usize, launch_power_dbm: f64) -> Self {
        WdmConfig {
            num_channels: 1,
            samples_per_symbol,
            launch_power_dbm,
            rx_samples_per_symbol: samples_per_symbol,
            ..WdmConfig::default()
        }
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0 || self.samples_per_symbol == 0 {
            return Err(Error::Config("need at least one channel and one sample/symbol".into()));
        }
        if !(self.symbol_rate > 0.0) {
            return Err(Error::Config("symbol rate must be positive".into()));
        }
        let needed =
            self.num_channels as f64 * self.channel_spacing + 2.0 * self.symbol_rate;
        if self.sample_rate() < needed * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "simulation bandwidth {:.3e} Hz does not cover the WDM spectrum plus guard band ({:.3e} Hz)",
                self.sample_rate(),
                needed
            )));
        }
        if self.rx_samples_per_symbol < 2 || self.rx_samples_per_symbol > self.samples_per_symbol {
            return Err(Error::Config(
                "receiver oversampling must lie in [2, samples_per_symbol]".into(),
            ));
        }
        Ok(())
    }

    /// Carrier offset of channel `c` from the grid center, Hz.
    pub fn channel_offset(&self, c: usize) -> f64 {
        (c as f64 - (self.num_channels as f64 - 1.0) / 2.0) * self.channel_spacing
    }

    pub fn center_channel(&self) -> usize {
        self.num_channels / 2
    }

    /// Field amplitude per polarization of a unit-energy symbol.
    pub fn amplitude_per_pol(&self) -> f64 {
        (dbm_to_watt(self.launch_power_dbm) / 2.0).sqrt()
    }

    fn offset_bins(&self, c: usize, n_symbols: usize) -> Result<i64> {
        let df = self.symbol_rate / n_symbols as f64;
        let bins = self.channel_offset(c) / df;
        if (bins - bins.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "channel {c} offset is not an integer number of FFT bins"
            )));
        }
        Ok(bins.round() as i64)
    }
}

/// Dual-polarization complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    /// `[x, y]` polarizations in √W.
    pub samples: [Vec<C64>; 2],
    /// Hz
    pub sample_rate: f64,
    /// Hz, relative to the WDM grid center.
    pub center_frequency_offset: f64,
}

impl SampledField {
    pub fn new(x: Vec<C64>, y: Vec<C64>, sample_rate: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if !x.len().is_power_of_two() {
            return Err(Error::Config(format!(
                "field length {} is not a power of two",
                x.len()
            )));
        }
        Ok(SampledField {
            samples: [x, y],
            sample_rate,
            center_frequency_offset: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples[0].is_empty()
    }

    /// Σ|E|² over samples and polarizations (W·samples).
    pub fn energy(&self) -> f64 {
        self.samples.iter().flatten().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power summed over polarizations, W.
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.len() as f64
    }
}

fn check_power_of_two(n: usize) -> Result<()> {
    if !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "sample count {n} is not a power of two; pick power-of-two block and burst lengths"
        )));
    }
    Ok(())
}

/// Nyquist-sinc shaping of every channel, shifted to its grid slot and summed.
///
/// The sinc pulse is realized as a rectangular mask of width `symbol_rate` on the
/// FFT grid, so the waveform is periodic over the burst.
pub fn modulate(seq_per_channel: &[SymbolSequence], cfg: &WdmConfig) -> Result<SampledField> {
    cfg.validate()?;
    if seq_per_channel.len() != cfg.num_channels {
        return Err(Error::LengthMismatch {
            expected: cfg.num_channels,
            got: seq_per_channel.len(),
        });
    }
    let n = seq_per_channel[0].len();
    if let Some(bad) = seq_per_channel.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let m = n * cfg.samples_per_symbol;
    check_power_of_two(m)?;
    let gain = cfg.amplitude_per_pol() * (m as f64 / n as f64);

    let mut small = FftPair::new(n);
    let mut big = FftPair::new(m);
    let mut out: [Vec<C64>; 2] = [vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); m]];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (c, seq) in seq_per_channel.iter().enumerate() {
        let offset = cfg.offset_bins(c, n)?;
        for (p, spectrum) in out.iter_mut().enumerate() {
            buf.copy_from_slice(seq.pol(p));
            small.forward(&mut buf);
            for (i, v) in buf.iter().enumerate() {
                let k = signed_index(i, n) + offset;
                spectrum[bin(k, m)] += v * gain;
            }
        }
    }
    for pol in out.iter_mut() {
        big.inverse(pol);
    }
    let [x, y] = out;
    SampledField::new(x, y, cfg.sample_rate())
}

/// Shifts channel `channel_index` to baseband, brick-wall filters it to
/// `symbol_rate` and decimates to `rx_samples_per_symbol`.
pub fn demultiplex(field: &SampledField, cfg: &WdmConfig, channel_index: usize) -> Result<SampledField> {
    if channel_index >= cfg.num_channels {
        return Err(Error::Config(format!(
            "channel {channel_index} outside the {}-channel grid",
            cfg.num_channels
        )));
    }
    let m = field.len();
    let n = (m as f64 * cfg.symbol_rate / field.sample_rate).round() as usize;
    let m_out = n * cfg.rx_samples_per_symbol;
    check_power_of_two(m_out)?;
    if m_out > m {
        return Err(Error::Config("cannot demultiplex to a higher sample rate".into()));
    }
    let df = field.sample_rate / m as f64;
    let offset = (cfg.channel_offset(channel_index) - field.center_frequency_offset) / df;
    let offset = offset.round() as i64;

    let mut fft_in = FftPair::new(m);
    let mut fft_out = FftPair::new(m_out);
    let scale = m_out as f64 / m as f64;
    let mut samples: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
    for (p, out) in samples.iter_mut().enumerate() {
        let mut spec = field.samples[p].clone();
        fft_in.forward(&mut spec);
        let mut narrow = vec![C64::new(0.0, 0.0); m_out];
        for i in 0..n {
            let k = signed_index(i, n);
            narrow[bin(k, m_out)] = spec[bin(k + offset, m)] * scale;
        }
        fft_out.inverse(&mut narrow);
        *out = narrow;
    }
    let [x, y] = samples;
    Ok(SampledField {
        samples: [x, y],
        sample_rate: cfg.symbol_rate * cfg.rx_samples_per_symbol as f64,
        center_frequency_offset: cfg.channel_offset(channel_index),
    })
}
