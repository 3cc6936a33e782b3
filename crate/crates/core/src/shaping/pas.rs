//! Probabilistic amplitude shaping on square QAM.
//!
//! Each real dimension carries a shaped amplitude and a uniform sign. The
//! amplitude stream of a symbol block is distributed round-robin over the four
//! real dimensions `(x.re, x.im, y.re, y.im)` of consecutive 2-pol symbols.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, RngCore};

use super::ess::EssCode;
use super::mb::MbDistribution;
use crate::signal::{Constellation, SymbolSequence, SymbolSource};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum AmplitudeShaper {
    /// i.i.d. amplitudes from the MB marginal.
    Mb(Vec<f64>),
    /// ESS blocks driven by uniform input bits.
    Ess(Arc<EssCode>),
}

#[derive(Debug, Clone)]
pub struct PasSource {
    shaper: AmplitudeShaper,
    /// Square QAM carrying the induced point probabilities, unit energy.
    constellation: Constellation,
}

impl PasSource {
    pub fn mb(dist: &MbDistribution) -> Result<Self> {
        let amplitudes = dist
            .amplitude_distribution()
            .ok_or_else(|| Error::Config("PAS needs a square QAM constellation".into()))?;
        Ok(PasSource {
            shaper: AmplitudeShaper::Mb(amplitudes),
            constellation: dist.constellation().clone(),
        })
    }

    /// ESS-driven PAS on square `qam_order`-QAM; the code alphabet must be
    /// the full amplitude set `{1, 3, ..., sqrt(M) - 1}`.
    pub fn ess(code: Arc<EssCode>, qam_order: usize) -> Result<Self> {
        let base = Constellation::square_qam(qam_order)?;
        let levels = base.pam_levels().unwrap();
        let expected: Vec<u32> = (0..levels as u32 / 2).map(|i| 2 * i + 1).collect();
        if code.alphabet() != expected.as_slice() {
            return Err(Error::Config(format!(
                "ESS alphabet {:?} does not match {qam_order}-QAM amplitudes {expected:?}",
                code.alphabet()
            )));
        }
        let amp = code.amplitude_distribution();
        let probabilities: Vec<f64> = base
            .points()
            .iter()
            .map(|c| {
                let idx = |v: f64| (((v / base.grid_scale()).abs() - 1.0) / 2.0).round() as usize;
                amp[idx(c.re)] * amp[idx(c.im)] / 4.0
            })
            .collect();
        Ok(PasSource {
            shaper: AmplitudeShaper::Ess(code),
            constellation: base.with_probabilities(probabilities)?,
        })
    }

    pub fn shaper(&self) -> &AmplitudeShaper {
        &self.shaper
    }

    /// Entropy of the induced point distribution, bits per 2D symbol per pol.
    pub fn entropy(&self) -> f64 {
        self.constellation.entropy()
    }

    /// Amplitude stream of `count` amplitudes (odd integers).
    fn amplitudes(&self, rng: &mut dyn RngCore, count: usize) -> Result<Vec<u32>> {
        match &self.shaper {
            AmplitudeShaper::Mb(p) => {
                let cdf: Vec<f64> = p
                    .iter()
                    .scan(0.0, |acc, v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect();
                Ok((0..count)
                    .map(|_| {
                        let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                        let j = cdf.partition_point(|c| *c <= u).min(cdf.len() - 1);
                        2 * j as u32 + 1
                    })
                    .collect())
            }
            AmplitudeShaper::Ess(code) => {
                let l = code.block_length();
                if !count.is_multiple_of(l) {
                    return Err(Error::Config(format!(
                        "{count} amplitudes per block do not fill whole ESS blocks of {l}"
                    )));
                }
                let mut out = Vec::with_capacity(count);
                for _ in 0..count / l {
                    let idx = code.random_index(rng);
                    out.extend(code.encode(&idx)?);
                }
                Ok(out)
            }
        }
    }
}

impl SymbolSource for PasSource {
    fn draw_block(&self, rng: &mut dyn RngCore, n: usize) -> Result<SymbolSequence> {
        if n == 0 {
            return Err(Error::Config("a symbol block needs n >= 1".into()));
        }
        let amps = self.amplitudes(rng, 4 * n)?;
        let scale = self.constellation.grid_scale();
        let mut dims = amps.iter().map(|a| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * *a as f64 * scale
        });
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let (xr, xi, yr, yi) = (
                dims.next().unwrap(),
                dims.next().unwrap(),
                dims.next().unwrap(),
                dims.next().unwrap(),
            );
            x.push(C64::new(xr, xi));
            y.push(C64::new(yr, yi));
        }
        SymbolSequence::new(x, y)
    }

    fn constellation(&self) -> Option<&Constellation> {
        Some(&self.constellation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shaping::mb::{mb_distribution, mb_fit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plug_in_entropy(counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        counts
            .iter()
            .filter(|c| **c > 0)
            .map(|c| {
                let p = *c as f64 / n as f64;
                -p * p.log2()
            })
            .sum()
    }

    fn point_counts(src: &PasSource, blocks: usize, n: usize, seed: u64) -> Vec<usize> {
        let c = src.constellation().unwrap();
        let mut counts = vec![0usize; c.size()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..blocks {
            let b = src.draw_block(&mut rng, n).unwrap();
            for s in b.x().iter().chain(b.y()) {
                let i = c.index_of(*s);
                assert!((c.points()[i] - s).norm() < 1e-12);
                counts[i] += 1;
            }
        }
        counts
    }

    #[test]
    fn uniform_mb_gives_uniform_qam() {
        let base = Constellation::square_qam(256).unwrap();
        let src = PasSource::mb(&mb_distribution(&base, 0.0).unwrap()).unwrap();
        let counts = point_counts(&src, 200, 1024, 1);
        let n: usize = counts.iter().sum();
        let expect = n as f64 / 256.0;
        let sd = (expect * (1.0 - 1.0 / 256.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn mb_source_entropy_at_6_4_bits() {
        let base = Constellation::square_qam(256).unwrap();
        let src = PasSource::mb(&mb_fit(&base, 6.4).unwrap()).unwrap();
        assert!((src.entropy() - 6.4).abs() < 1e-9);
        // 10^6 2D symbols
        let counts = point_counts(&src, 1000, 500, 2);
        let h = plug_in_entropy(&counts);
        assert!((h - 6.4).abs() < 0.02, "{h}");
    }

    #[test]
    fn source_has_unit_energy() {
        let base = Constellation::square_qam(64).unwrap();
        let src = PasSource::mb(&mb_fit(&base, 5.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = src.draw_block(&mut rng, 1 << 16).unwrap();
        assert!((b.mean_energy_per_pol() - 1.0).abs() < 0.01);
    }

    #[test]
    fn ess_source_respects_block_energy() {
        let code = Arc::new(EssCode::for_rate(&[1, 3, 5, 7], 32, 1.5).unwrap());
        let src = PasSource::ess(code.clone(), 64).unwrap();
        let scale = src.constellation().unwrap().grid_scale();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let b = src.draw_block(&mut rng, 16).unwrap();
            // 16 symbols x 4 dims = 64 amplitudes = 2 ESS blocks, interleaved
            let dims: Vec<f64> = b
                .x()
                .iter()
                .zip(b.y())
                .flat_map(|(x, y)| [x.re, x.im, y.re, y.im])
                .collect();
            for chunk in dims.chunks(32) {
                let e: f64 = chunk.iter().map(|v| (v / scale).powi(2)).sum();
                assert!(e <= code.max_energy() as f64 + 1e-6);
            }
        }
        assert!(src.draw_block(&mut rng, 5).is_err());
        let e: f64 = src
            .constellation()
            .unwrap()
            .points()
            .iter()
            .zip(src.constellation().unwrap().probabilities())
            .map(|(c, p)| p * c.norm_sqr())
            .sum();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ess_alphabet_must_match_qam() {
        let code = Arc::new(EssCode::new(&[1, 3], 4, 20).unwrap());
        assert!(PasSource::ess(code, 64).is_err());
    }
}
