//! Screening, transmission of the (selected) source and AIR sweeps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, SourceKind};
use crate::air::{
    estimate_bitwise_grouped, estimate_symbolwise_grouped, AirEstimate, Bootstrap, RateEstimate,
};
use crate::dsp::{receive, Equalization, ReceiverConfig};
use crate::fiber::{LinkConfig, Propagator};
use crate::selection::{
    draw_test_blocks, screen_metrics, SelectionConfig, SelectionCriterion, SelectionResult,
    SsfmScreening,
};
use crate::shaping::{mb_fit, EssCode, PasSource};
use crate::signal::{modulate, Constellation, GaussianSource, SymbolSequence, SymbolSource};
use crate::{Error, Result};

/// Purpose tags of the per-job random streams.
const STREAM_SCREEN: u64 = 1;
const STREAM_PICK: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Generator for one job: the master seed selects the key, the job the stream,
/// so results do not depend on the order in which jobs run.
pub fn job_rng(master_seed: u64, purpose: u64, power_index: usize, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((purpose << 56) | ((power_index as u64) << 28) | realization as u64);
    rng
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub power_dbm: f64,
    /// Requested acceptance rate.
    pub eta_target: f64,
    /// Achieved acceptance rate `N_s / N_t` (the target if screening failed).
    pub eta_hat: f64,
    pub equalization: Equalization,
    /// `Err` carries the reason a point could not be evaluated.
    pub outcome: std::result::Result<AirEstimate, String>,
}

/// A configured experiment with its symbol source.
pub struct Experiment {
    cfg: ExperimentConfig,
    link: LinkConfig,
    source: Box<dyn SymbolSource>,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment").field("cfg", &self.cfg).finish()
    }
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let source: Box<dyn SymbolSource> = match cfg.source.kind {
            SourceKind::Gaussian => Box::new(GaussianSource),
            SourceKind::PasMb => {
                let base = Constellation::square_qam(cfg.source.qam_order)?;
                Box::new(PasSource::mb(&mb_fit(&base, cfg.source.rate_bits)?)?)
            }
            SourceKind::PasEss => {
                let levels = (cfg.source.qam_order as f64).sqrt().round() as u32;
                let alphabet: Vec<u32> = (0..levels / 2).map(|i| 2 * i + 1).collect();
                // two sign bits per 2D symbol, the rest split over two amplitudes
                let per_amplitude = (cfg.source.rate_bits - 2.0) / 2.0;
                let code =
                    EssCode::for_rate(&alphabet, cfg.source.ess_block_length, per_amplitude)?;
                Box::new(PasSource::ess(std::sync::Arc::new(code), cfg.source.qam_order)?)
            }
        };
        Ok(Experiment {
            link: cfg.link(),
            cfg,
            source,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn source(&self) -> &dyn SymbolSource {
        self.source.as_ref()
    }

    pub fn selection_config(&self, criterion: SelectionCriterion) -> SelectionConfig {
        SelectionConfig {
            num_test_sequences: self.cfg.selection.num_test_sequences,
            block_length: self.cfg.selection.block_length,
            criterion,
        }
    }

    /// The `N_t` candidate blocks of this experiment (regenerable from the seed).
    pub fn test_blocks(&self) -> Result<Vec<SymbolSequence>> {
        let mut rng = job_rng(self.cfg.run.master_seed, STREAM_SCREEN, 0, 0);
        draw_test_blocks(
            self.source(),
            &self.selection_config(SelectionCriterion::Threshold(f64::INFINITY)),
            &mut rng,
        )
    }

    /// Screens all candidate blocks at `power_dbm`; nothing is rejected yet,
    /// use [`SelectionResult::with_target_rate`] for each η.
    pub fn screen(&self, power_dbm: f64) -> Result<SelectionResult> {
        let blocks = self.test_blocks()?;
        let channel = SsfmScreening::new(
            &self.link,
            self.cfg.wdm.samples_per_symbol,
            power_dbm,
            self.cfg.ssfm(),
        )?;
        let metrics = screen_metrics(&blocks, &channel)?;
        SelectionResult::from_metrics(blocks, metrics, SelectionCriterion::Threshold(f64::INFINITY))
    }

    /// Transmits bursts built from `pool` over the noisy link at `power_dbm` and
    /// estimates the unbiased AIR. The pool is cycled through fresh random
    /// permutations; noise and block picks depend only on the power index and
    /// realization, so all η and equalizations share the same random numbers.
    pub fn evaluate(
        &self,
        pool: &[SymbolSequence],
        power_index: usize,
        power_dbm: f64,
        equalization: Equalization,
    ) -> Result<RateEstimate> {
        if pool.is_empty() {
            return Err(Error::EmptySelection);
        }
        let sw = &self.cfg.sweep;
        let seed = self.cfg.run.master_seed;
        let wdm = self.cfg.wdm(power_dbm);
        let per_burst = sw.symbols_per_burst / self.cfg.selection.block_length;
        let rx = ReceiverConfig {
            equalization,
            dbp_steps_per_span: sw.dbp_steps_per_span,
            channel_index: wdm.center_channel(),
        };
        let mut sent = Vec::new();
        let mut received = Vec::new();
        let mut groups = Vec::new();
        for r in 0..sw.realizations {
            let mut pick = job_rng(seed, STREAM_PICK, power_index, r);
            let mut order: Vec<usize> = Vec::new();
            let mut next = || {
                if order.is_empty() {
                    order = (0..pool.len()).collect();
                    order.shuffle(&mut pick);
                }
                order.pop().unwrap()
            };
            let picks: Vec<Vec<usize>> = (0..wdm.num_channels)
                .map(|_| (0..per_burst).map(|_| next()).collect())
                .collect();
            let channels: Vec<SymbolSequence> = picks
                .iter()
                .map(|idx| {
                    let blocks: Vec<SymbolSequence> = idx.iter().map(|&i| pool[i].clone()).collect();
                    SymbolSequence::concat(&blocks)
                })
                .collect::<Result<_>>()?;
            let mut field = modulate(&channels, &wdm)?;
            let mut noise = job_rng(seed, STREAM_NOISE, power_index, r);
            Propagator::for_field(&field).link(&mut field, &self.link, &self.cfg.ssfm(), &mut noise)?;
            let y = receive(&field, &wdm, &self.link, &rx)?;
            let center = rx.channel_index;
            sent.extend(channels[center].split(self.cfg.selection.block_length)?);
            received.extend(y.split(self.cfg.selection.block_length)?);
            groups.extend(picks[center].iter().copied());
        }
        let bootstrap = Bootstrap {
            resamples: sw.bootstrap_resamples,
            seed: seed ^ 0xb007,
        };
        match self.cfg.source.kind {
            SourceKind::Gaussian => estimate_symbolwise_grouped(&sent, &received, &groups, &bootstrap),
            SourceKind::PasMb | SourceKind::PasEss => {
                let constellation = self
                    .source
                    .constellation()
                    .ok_or_else(|| Error::Config("PAS source without constellation".into()))?;
                estimate_bitwise_grouped(&sent, &received, constellation, &groups, &bootstrap)
            }
        }
    }

    /// Blocks to transmit, rescaled to unit mean energy per polarization
    /// when the configuration asks for power normalization.
    pub fn transmit_pool(&self, blocks: Vec<SymbolSequence>) -> Vec<SymbolSequence> {
        if !self.cfg.selection.normalize_power || blocks.is_empty() {
            return blocks;
        }
        let mean = blocks.iter().map(|b| b.mean_energy_per_pol()).sum::<f64>() / blocks.len() as f64;
        if !(mean > 0.0) {
            return blocks;
        }
        let c = mean.sqrt().recip();
        blocks.iter().map(|b| b.scaled(c)).collect()
    }

    /// Unselected (bypass) AIR at every sweep power.
    pub fn power_sweep(&self, equalization: Equalization) -> Result<Vec<(f64, RateEstimate)>> {
        let pool = self.transmit_pool(self.test_blocks()?);
        self.cfg
            .sweep
            .power_dbm
            .iter()
            .enumerate()
            .map(|(i, p)| Ok((*p, self.evaluate(&pool, i, *p, equalization)?)))
            .collect()
    }

    /// Launch power maximizing the unselected AIR with the first configured
    /// equalization; ties go to the lower power.
    pub fn find_optimal_power(&self) -> Result<f64> {
        let sweep = self.power_sweep(self.cfg.sweep.equalization[0])?;
        let values: Vec<(f64, f64)> = sweep.iter().map(|(p, r)| (*p, r.value)).collect();
        Ok(argmax_power(&values))
    }

    /// Screening power from the config, or the unselected optimum.
    pub fn screening_power(&self) -> Result<f64> {
        match self.cfg.selection.screening_power_dbm {
            Some(p) => Ok(p),
            None => self.find_optimal_power(),
        }
    }

    /// Every (power, equalization, η) point. `selection` is a screening run of
    /// this experiment; it is produced on demand when absent.
    pub fn run_sweep(&self, selection: Option<&SelectionResult>) -> Result<Vec<SweepRow>> {
        let owned;
        let selection = match selection {
            Some(s) => s,
            None => {
                owned = self.screen(self.screening_power()?)?;
                &owned
            }
        };
        let n = self.cfg.selection.block_length;
        let pools: Vec<(f64, std::result::Result<(Vec<SymbolSequence>, f64), String>)> = self
            .cfg
            .selection
            .eta
            .iter()
            .map(|&eta| {
                let pool = selection
                    .with_target_rate(eta)
                    .map(|s| (self.transmit_pool(s.accepted_blocks()), s.eta_hat()))
                    .map_err(|e| e.to_string());
                (eta, pool)
            })
            .collect();
        let mut rows = Vec::new();
        for (pi, &power) in self.cfg.sweep.power_dbm.iter().enumerate() {
            for &eq in &self.cfg.sweep.equalization {
                for (eta, pool) in &pools {
                    let eta_hat = pool.as_ref().map(|p| p.1).unwrap_or(*eta);
                    let outcome = match pool {
                        Ok((blocks, eta_hat)) => self
                            .evaluate(blocks, pi, power, eq)
                            .and_then(|r| AirEstimate::from_rate(&r, *eta_hat, n))
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(e.clone()),
                    };
                    rows.push(SweepRow {
                        power_dbm: power,
                        eta_target: *eta,
                        eta_hat,
                        equalization: eq,
                        outcome,
                    });
                }
            }
        }
        Ok(rows)
    }
}

/// Index of the best value; ties broken toward the lower power.
pub fn argmax_power(values: &[(f64, f64)]) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for &(p, v) in values {
        best = match best {
            Some((bp, bv)) if bv > v || (bv == v && bp <= p) => Some((bp, bv)),
            _ => Some((p, v)),
        };
    }
    best.map(|b| b.0).unwrap_or(f64::NAN)
}
