//! Receiver processing: dispersion compensation, digital backpropagation,
//! matched filtering with symbol-rate sampling, and mean phase removal.

use num_complex::Complex64 as C64;

use crate::fft::{bin, signed_index, FftPair};
use crate::fiber::{LinkConfig, Propagator};
use crate::signal::{demultiplex, SampledField, SymbolSequence, WdmConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equalization {
    Cdc,
    Dbp,
}

impl std::fmt::Display for Equalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Equalization::Cdc => write!(f, "cdc"),
            Equalization::Dbp => write!(f, "dbp"),
        }
    }
}

/// DBP always acts on the demultiplexed channel only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    pub equalization: Equalization,
    pub dbp_steps_per_span: usize,
    pub channel_index: usize,
}

/// Inverse of the link's accumulated dispersion.
pub fn cdc(field: &SampledField, link: &LinkConfig) -> SampledField {
    let mut out = field.clone();
    if link.num_spans > 0 {
        Propagator::for_field(field).disperse(&mut out, link.fiber.beta2(), -link.total_length_km());
    }
    out
}

/// Single-channel digital backpropagation: the link run in reverse with
/// negated dispersion, Kerr coefficient and loss.
pub fn dbp(field: &SampledField, link: &LinkConfig, steps_per_span: usize) -> Result<SampledField> {
    let mut out = field.clone();
    Propagator::for_field(field).backpropagate(&mut out, link, steps_per_span)?;
    Ok(out)
}

/// Brick-wall filter of width `symbol_rate` and sampling at `t = k / R_s`,
/// scaled so a back-to-back link returns the transmitted unit-energy symbols.
pub fn matched_filter_sample(field: &SampledField, cfg: &WdmConfig) -> Result<SymbolSequence> {
    let m = field.len();
    let n = (m as f64 * cfg.symbol_rate / field.sample_rate).round() as usize;
    if n == 0 || n > m {
        return Err(Error::Config("field is shorter than one symbol".into()));
    }
    let mut fft_m = FftPair::new(m);
    let mut fft_n = FftPair::new(n);
    let scale = n as f64 / m as f64 / cfg.amplitude_per_pol();
    let mut pols: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
    for (p, out) in pols.iter_mut().enumerate() {
        let mut spec = field.samples[p].clone();
        fft_m.forward(&mut spec);
        let mut sym: Vec<C64> = (0..n)
            .map(|i| spec[bin(signed_index(i, n), m)] * scale)
            .collect();
        fft_n.inverse(&mut sym);
        *out = sym;
    }
    let [x, y] = pols;
    SymbolSequence::new(x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCompensation {
    pub symbols: SymbolSequence,
    /// Removed rotation, rad.
    pub theta: f64,
    /// Set when Σ⟨x, y⟩ vanished and `y` was returned unchanged.
    pub degenerate: bool,
}

/// Removes the common rotation `θ = arg Σ_k ⟨x_k, y_k⟩` (both polarizations) from `y`.
pub fn mean_phase_compensate(x: &SymbolSequence, y: &SymbolSequence) -> Result<PhaseCompensation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let corr: C64 = x
        .pols()
        .iter()
        .zip(y.pols())
        .flat_map(|(a, b)| a.iter().zip(b.iter()))
        .map(|(a, b)| a.conj() * b)
        .sum();
    if corr.norm() == 0.0 || !corr.norm().is_finite() {
        return Ok(PhaseCompensation {
            symbols: y.clone(),
            theta: 0.0,
            degenerate: true,
        });
    }
    let theta = corr.arg();
    Ok(PhaseCompensation {
        symbols: y.rotated(-theta),
        theta,
        degenerate: false,
    })
}

/// Demultiplex, equalize and sample one channel of a received WDM field.
pub fn receive(
    field: &SampledField,
    wdm: &WdmConfig,
    link: &LinkConfig,
    rx: &ReceiverConfig,
) -> Result<SymbolSequence> {
    let ch = demultiplex(field, wdm, rx.channel_index)?;
    let eq = match rx.equalization {
        Equalization::Cdc => cdc(&ch, link),
        Equalization::Dbp => dbp(&ch, link, rx.dbp_steps_per_span)?,
    };
    matched_filter_sample(&eq, wdm)
}

/// Per-block mean phase removal of a received burst against the transmitted blocks.
pub fn compensate_blocks(
    sent: &[SymbolSequence],
    received: &SymbolSequence,
) -> Result<Vec<SymbolSequence>> {
    let n = sent.first().map(|b| b.len()).unwrap_or(0);
    let blocks = received.split(n.max(1))?;
    if blocks.len() != sent.len() {
        return Err(Error::LengthMismatch {
            expected: sent.len(),
            got: blocks.len(),
        });
    }
    sent.iter()
        .zip(&blocks)
        .map(|(x, y)| mean_phase_compensate(x, y).map(|c| c.symbols))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{propagate_link, FiberParams, SsfmConfig};
    use crate::signal::{evm_db, gaussian_source, modulate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn linear_link(spans: usize) -> LinkConfig {
        LinkConfig {
            fiber: FiberParams {
                gamma_per_w_km: 0.0,
                ..FiberParams::default()
            },
            num_spans: spans,
            noise_enabled: false,
            ..LinkConfig::default()
        }
    }

    fn rel(a: &SampledField, b: &SampledField) -> f64 {
        let mut num = 0.0;
        for p in 0..2 {
            for (u, v) in a.samples[p].iter().zip(&b.samples[p]) {
                num += (u - v).norm_sqr();
            }
        }
        (num / b.energy()).sqrt()
    }

    fn field(n: usize, seed: u64, p_dbm: f64) -> (SymbolSequence, SampledField, WdmConfig) {
        let cfg = WdmConfig::single_channel(4, p_dbm);
        let s = gaussian_source(&mut rng(seed), n);
        let f = modulate(std::slice::from_ref(&s), &cfg).unwrap();
        (s, f, cfg)
    }

    #[test]
    fn cdc_zero_length_is_identity() {
        let (_, f, _) = field(64, 1, 0.0);
        assert_eq!(cdc(&f, &linear_link(0)), f);
    }

    #[test]
    fn cdc_inverts_linear_link() {
        let (_, f, _) = field(256, 2, 0.0);
        let link = linear_link(3);
        let out = propagate_link(&f, &link, &SsfmConfig::fixed(10.0), &mut rng(0)).unwrap();
        assert!(rel(&cdc(&out, &link), &f) < 1e-9);
    }

    #[test]
    fn cdc_twice_is_anomalous_overcompensation() {
        // cdc applied to a back-to-back field adds -L of dispersion, i.e. the
        // analytic filter exp(+j β2/2 ω² L)
        let (_, f, _) = field(256, 3, 0.0);
        let link = linear_link(2);
        let once = cdc(&f, &link);
        assert!(rel(&once, &f) > 1e-2);
        let mut spec = f.samples[0].clone();
        let mut got = once.samples[0].clone();
        let mut fft = FftPair::new(spec.len());
        fft.forward(&mut spec);
        fft.forward(&mut got);
        let w = crate::fft::angular_frequencies(spec.len(), f.sample_rate);
        let beta2 = link.fiber.beta2();
        let l = link.total_length_km();
        let scale = spec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..spec.len() {
            let expect = spec[i] * C64::from_polar(1.0, beta2 / 2.0 * w[i] * w[i] * l);
            assert!((expect - got[i]).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn dbp_without_kerr_equals_cdc() {
        let (_, f, _) = field(256, 4, 0.0);
        let link = linear_link(2);
        let out = propagate_link(&f, &link, &SsfmConfig::fixed(10.0), &mut rng(0)).unwrap();
        let a = cdc(&out, &link);
        let b = dbp(&out, &link, 10).unwrap();
        assert!(rel(&b, &a) < 1e-9);
    }

    #[test]
    fn dbp_inverts_noiseless_single_channel_link() {
        let (s, f, cfg) = field(1024, 5, 4.0);
        let link = LinkConfig {
            num_spans: 2,
            noise_enabled: false,
            ..LinkConfig::default()
        };
        let out = propagate_link(&f, &link, &SsfmConfig::fixed(1.0), &mut rng(0)).unwrap();
        let rx = ReceiverConfig {
            equalization: Equalization::Dbp,
            dbp_steps_per_span: 100,
            channel_index: 0,
        };
        let y = receive(&out, &cfg, &link, &rx).unwrap();
        let y = mean_phase_compensate(&s, &y).unwrap().symbols;
        assert!(evm_db(&s, &y) < -40.0, "{}", evm_db(&s, &y));
        // CDC alone leaves the Kerr distortion in place
        let rx_cdc = ReceiverConfig {
            equalization: Equalization::Cdc,
            ..rx
        };
        let y_cdc = receive(&out, &cfg, &link, &rx_cdc).unwrap();
        let y_cdc = mean_phase_compensate(&s, &y_cdc).unwrap().symbols;
        assert!(evm_db(&s, &y_cdc) > evm_db(&s, &y) + 10.0);
    }

    #[test]
    fn matched_filter_back_to_back() {
        let (s, f, cfg) = field(512, 6, -3.0);
        let y = matched_filter_sample(&f, &cfg).unwrap();
        for p in 0..2 {
            for (a, b) in s.pol(p).iter().zip(y.pol(p)) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn matched_filter_rejects_out_of_band_tone() {
        let cfg = WdmConfig::single_channel(4, 0.0);
        let m = 256;
        let fs = cfg.sample_rate();
        // on-grid tone at ~0.8 R_s, outside the [-R_s/2, R_s/2) band
        let f0 = 52.0 * fs / m as f64;
        let x: Vec<C64> = (0..m)
            .map(|i| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f0 * i as f64 / fs))
            .collect();
        let f = SampledField::new(x, vec![C64::new(0.0, 0.0); m], fs).unwrap();
        let y = matched_filter_sample(&f, &cfg).unwrap();
        let leak = y.x().iter().map(|v| v.norm()).fold(0.0, f64::max) * cfg.amplitude_per_pol();
        assert!(20.0 * (leak + 1e-300).log10() < -60.0);
    }

    #[test]
    fn matched_filter_noise_bandwidth() {
        let cfg = WdmConfig::single_channel(8, 0.0);
        let m = 1024;
        let fs = cfg.sample_rate();
        let n0 = 1e-15;
        let sigma = (n0 * fs / 2.0).sqrt();
        let mut r = rng(7);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..200 {
            let mut noise = || -> Vec<C64> {
                (0..m)
                    .map(|_| {
                        let a: f64 = StandardNormal.sample(&mut r);
                        let b: f64 = StandardNormal.sample(&mut r);
                        C64::new(a * sigma, b * sigma)
                    })
                    .collect()
            };
            let x = noise();
            let y = noise();
            let f = SampledField::new(x, y, fs).unwrap();
            let s = matched_filter_sample(&f, &cfg).unwrap();
            acc += s.energy() * cfg.amplitude_per_pol().powi(2);
            count += 2 * s.len();
        }
        let var = acc / count as f64;
        let expected = n0 * cfg.symbol_rate;
        assert!((var / expected - 1.0).abs() < 0.02, "{}", var / expected);
    }

    #[test]
    fn phase_compensation_cases() {
        let x = gaussian_source(&mut rng(8), 128);
        let c = mean_phase_compensate(&x, &x.rotated(0.3)).unwrap();
        assert!((c.theta - 0.3).abs() < 1e-12);
        for p in 0..2 {
            for (a, b) in x.pol(p).iter().zip(c.symbols.pol(p)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        let same = mean_phase_compensate(&x, &x).unwrap();
        assert!(same.theta.abs() < 1e-15);
        assert_eq!(same.symbols, x);

        let zero = SymbolSequence::zeros(128);
        let d = mean_phase_compensate(&zero, &x).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.symbols, x);

        assert!(mean_phase_compensate(&x, &SymbolSequence::zeros(4)).is_err());
    }

    #[test]
    fn phase_estimate_under_noise_is_unbiased() {
        let mut r = rng(9);
        let n = 256;
        let trials = 400;
        let thetas: Vec<f64> = (0..trials)
            .map(|_| {
                let x = gaussian_source(&mut r, n);
                let noise = gaussian_source(&mut r, n).scaled(1.0);
                let y = SymbolSequence::new(
                    x.x().iter().zip(noise.x()).map(|(a, b)| a + b).collect(),
                    x.y().iter().zip(noise.y()).map(|(a, b)| a + b).collect(),
                )
                .unwrap();
                mean_phase_compensate(&x, &y).unwrap().theta
            })
            .collect();
        let mean = thetas.iter().sum::<f64>() / trials as f64;
        let sd = (thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * sd / (trials as f64).sqrt());
        for t in &thetas {
            assert!(t.abs() < 6.0 * sd);
        }
    }

    #[test]
    fn phase_compensation_preserves_magnitudes() {
        let x = gaussian_source(&mut rng(10), 64);
        let y = gaussian_source(&mut rng(11), 64);
        let c = mean_phase_compensate(&x, &y).unwrap();
        for p in 0..2 {
            for (a, b) in y.pol(p).iter().zip(c.symbols.pol(p)) {
                assert!((a.norm() - b.norm()).abs() < 1e-14);
            }
        }
    }
}
