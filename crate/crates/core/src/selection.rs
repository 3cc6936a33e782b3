//! Sequence selection by rejection sampling.
//!
//! `N_t` candidate blocks are drawn from a source, concatenated into one burst
//! and sent once through a noiseless single-channel screening link with CDC.
//! Each received block is phase-aligned to its transmitted block and scored by
//! `e(x) = ||x - y||`; blocks below a threshold `γ_E` form the biased source.
//! Since accepted blocks keep their original probabilities renormalized by the
//! acceptance rate `η`, every block's probability grows by at most `1/η`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{compensate_blocks, receive, Equalization, ReceiverConfig};
use crate::fiber::{LinkConfig, Propagator, SsfmConfig};
use crate::signal::{modulate, SymbolSequence, SymbolSource, WdmConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionCriterion {
    /// Accept blocks with metric strictly below `γ_E` (may be `+∞`).
    Threshold(f64),
    /// Accept the `ceil(η N_t)` lowest-metric blocks.
    TargetRate(f64),
}

impl SelectionCriterion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionCriterion::Threshold(g) if !(g > 0.0) => Err(Error::Config(format!(
                "selection threshold must be positive, got {g}"
            ))),
            SelectionCriterion::TargetRate(eta) if !(eta > 0.0 && eta <= 1.0) => {
                Err(Error::InvalidRate(eta))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub num_test_sequences: usize,
    /// 2-pol symbols per block.
    pub block_length: usize,
    pub criterion: SelectionCriterion,
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_test_sequences == 0 || self.block_length == 0 {
            return Err(Error::Config(
                "need at least one test sequence of at least one symbol".into(),
            ));
        }
        self.criterion.validate()
    }
}

/// Outcome of one screening run. All tested blocks and their metrics are kept
/// so the same run can be re-thresholded for any `γ_E` or `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    blocks: Vec<SymbolSequence>,
    all_metrics: Vec<f64>,
    accepted: Vec<usize>,
    gamma_e: f64,
    eta_hat: f64,
}

impl SelectionResult {
    /// Applies `criterion` to a set of tested blocks and their metrics.
    pub fn from_metrics(
        blocks: Vec<SymbolSequence>,
        all_metrics: Vec<f64>,
        criterion: SelectionCriterion,
    ) -> Result<Self> {
        if blocks.len() != all_metrics.len() {
            return Err(Error::LengthMismatch {
                expected: blocks.len(),
                got: all_metrics.len(),
            });
        }
        if blocks.is_empty() {
            return Err(Error::EmptySelection);
        }
        if let Some(m) = all_metrics.iter().find(|m| m.is_nan()) {
            return Err(Error::Config(format!("invalid selection metric {m}")));
        }
        criterion.validate()?;
        let n_t = all_metrics.len();
        let (accepted, gamma_e) = match criterion {
            SelectionCriterion::Threshold(g) => {
                let acc: Vec<usize> = (0..n_t).filter(|&i| all_metrics[i] < g).collect();
                (acc, g)
            }
            SelectionCriterion::TargetRate(eta) => {
                let n_acc = ((eta * n_t as f64).ceil() as usize).clamp(1, n_t);
                let mut order: Vec<usize> = (0..n_t).collect();
                order.sort_by(|&a, &b| all_metrics[a].total_cmp(&all_metrics[b]).then(a.cmp(&b)));
                let gamma = if n_acc == n_t {
                    f64::INFINITY
                } else {
                    0.5 * (all_metrics[order[n_acc - 1]] + all_metrics[order[n_acc]])
                };
                let mut acc = order[..n_acc].to_vec();
                acc.sort_unstable();
                (acc, gamma)
            }
        };
        if accepted.is_empty() {
            return Err(Error::EmptySelection);
        }
        let eta_hat = accepted.len() as f64 / n_t as f64;
        Ok(SelectionResult {
            blocks,
            all_metrics,
            accepted,
            gamma_e,
            eta_hat,
        })
    }

    /// Reassembles a stored result, checking that `accepted` and `gamma_e`
    /// are consistent with the metrics.
    pub fn from_parts(
        blocks: Vec<SymbolSequence>,
        all_metrics: Vec<f64>,
        accepted: Vec<usize>,
        gamma_e: f64,
    ) -> Result<Self> {
        if blocks.len() != all_metrics.len() {
            return Err(Error::LengthMismatch {
                expected: blocks.len(),
                got: all_metrics.len(),
            });
        }
        if accepted.is_empty() {
            return Err(Error::EmptySelection);
        }
        if accepted.windows(2).any(|w| w[0] >= w[1]) || accepted[accepted.len() - 1] >= blocks.len() {
            return Err(Error::Format("accepted indices must be ascending and in range".into()));
        }
        let mut is_accepted = vec![false; blocks.len()];
        accepted.iter().for_each(|&i| is_accepted[i] = true);
        let consistent = all_metrics
            .iter()
            .zip(&is_accepted)
            .all(|(m, acc)| if *acc { *m <= gamma_e } else { *m >= gamma_e });
        if !consistent {
            return Err(Error::Format("accepted set does not match the threshold".into()));
        }
        let eta_hat = accepted.len() as f64 / blocks.len() as f64;
        Ok(SelectionResult {
            blocks,
            all_metrics,
            accepted,
            gamma_e,
            eta_hat,
        })
    }

    /// Same tested blocks, new threshold.
    pub fn rethreshold(&self, gamma_e: f64) -> Result<Self> {
        Self::from_metrics(
            self.blocks.clone(),
            self.all_metrics.clone(),
            SelectionCriterion::Threshold(gamma_e),
        )
    }

    /// Same tested blocks, new target acceptance rate.
    pub fn with_target_rate(&self, eta: f64) -> Result<Self> {
        Self::from_metrics(
            self.blocks.clone(),
            self.all_metrics.clone(),
            SelectionCriterion::TargetRate(eta),
        )
    }

    pub fn num_tested(&self) -> usize {
        self.all_metrics.len()
    }

    pub fn tested_blocks(&self) -> &[SymbolSequence] {
        &self.blocks
    }

    pub fn all_metrics(&self) -> &[f64] {
        &self.all_metrics
    }

    /// Indices of accepted blocks, ascending.
    pub fn accepted_indices(&self) -> &[usize] {
        &self.accepted
    }

    pub fn accepted(&self) -> impl Iterator<Item = (&SymbolSequence, f64)> + '_ {
        self.accepted.iter().map(|&i| (&self.blocks[i], self.all_metrics[i]))
    }

    pub fn accepted_blocks(&self) -> Vec<SymbolSequence> {
        self.accepted.iter().map(|&i| self.blocks[i].clone()).collect()
    }

    pub fn gamma_e(&self) -> f64 {
        self.gamma_e
    }

    /// `N_s / N_t`.
    pub fn eta_hat(&self) -> f64 {
        self.eta_hat
    }

    pub fn block_length(&self) -> usize {
        self.blocks[0].len()
    }
}

/// Euclidean distance over all `4N` real components.
pub fn sequence_metric(x: &SymbolSequence, y: &SymbolSequence) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let sum: f64 = (0..2)
        .flat_map(|p| x.pol(p).iter().zip(y.pol(p)))
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(sum.sqrt())
}

/// Largest ratio `P_b(x) / P(x)` of the selected source.
pub fn biased_probability_factor(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidRate(eta));
    }
    Ok(1.0 / eta)
}

/// Symbol-level channel used for screening the concatenated burst.
pub trait ScreeningChannel {
    fn transmit(&self, burst: &SymbolSequence) -> Result<SymbolSequence>;
}

impl<F> ScreeningChannel for F
where
    F: Fn(&SymbolSequence) -> Result<SymbolSequence>,
{
    fn transmit(&self, burst: &SymbolSequence) -> Result<SymbolSequence> {
        self(burst)
    }
}

/// Noiseless single-channel SSFM link followed by CDC and matched filtering.
#[derive(Debug, Clone)]
pub struct SsfmScreening {
    link: LinkConfig,
    wdm: WdmConfig,
    ssfm: SsfmConfig,
}

impl SsfmScreening {
    pub fn new(
        link: &LinkConfig,
        samples_per_symbol: usize,
        screening_power_dbm: f64,
        ssfm: SsfmConfig,
    ) -> Result<Self> {
        let wdm = WdmConfig::single_channel(samples_per_symbol, screening_power_dbm);
        wdm.validate()?;
        Ok(SsfmScreening {
            link: link.noiseless(),
            wdm,
            ssfm,
        })
    }

    pub fn wdm(&self) -> &WdmConfig {
        &self.wdm
    }
}

impl ScreeningChannel for SsfmScreening {
    fn transmit(&self, burst: &SymbolSequence) -> Result<SymbolSequence> {
        let mut field = modulate(std::slice::from_ref(burst), &self.wdm)?;
        // the noiseless link never draws from the generator
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        Propagator::for_field(&field).link(&mut field, &self.link, &self.ssfm, &mut unused)?;
        let rx = ReceiverConfig {
            equalization: Equalization::Cdc,
            dbp_steps_per_span: 1,
            channel_index: 0,
        };
        receive(&field, &self.wdm, &self.link, &rx)
    }
}

/// Metrics of `blocks` after one pass of their concatenation through `channel`.
pub fn screen_metrics(blocks: &[SymbolSequence], channel: &dyn ScreeningChannel) -> Result<Vec<f64>> {
    let burst = SymbolSequence::concat(blocks)?;
    let received = channel.transmit(&burst)?;
    if received.len() != burst.len() {
        return Err(Error::LengthMismatch {
            expected: burst.len(),
            got: received.len(),
        });
    }
    let aligned = compensate_blocks(blocks, &received)?;
    blocks
        .iter()
        .zip(&aligned)
        .map(|(x, y)| sequence_metric(x, y))
        .collect()
}

/// Draws `N_t` blocks from `source`, screens them and applies the criterion.
pub fn screen(
    source: &dyn SymbolSource,
    cfg: &SelectionConfig,
    channel: &dyn ScreeningChannel,
    rng: &mut dyn RngCore,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let blocks = draw_test_blocks(source, cfg, rng)?;
    let metrics = screen_metrics(&blocks, channel)?;
    SelectionResult::from_metrics(blocks, metrics, cfg.criterion)
}

/// The `N_t` test blocks `screen` would draw from the same generator state.
pub fn draw_test_blocks(
    source: &dyn SymbolSource,
    cfg: &SelectionConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<SymbolSequence>> {
    (0..cfg.num_test_sequences)
        .map(|_| source.draw_block(rng, cfg.block_length))
        .collect()
}
