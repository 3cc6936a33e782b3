//! Experiment description, read from a sectioned `key = value` (TOML) file.
//!
//! Physical quantities use the customary optical units: ps/(nm·km), 1/(W·km),
//! dB/km, km, GBd, GHz and dBm.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::Equalization;
use crate::fiber::{Amplification, FiberParams, LinkConfig, SsfmConfig};
use crate::signal::WdmConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub dispersion_ps_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub alpha_db_km: f64,
    pub span_length_km: f64,
    pub num_spans: usize,
    pub amplification: Amplification,
    pub n_sp: f64,
    pub noise: bool,
    pub reference_wavelength_nm: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let link = LinkConfig::default();
        LinkSection {
            dispersion_ps_nm_km: link.fiber.dispersion_ps_nm_km,
            gamma_per_w_km: link.fiber.gamma_per_w_km,
            alpha_db_km: link.fiber.alpha_db_km,
            span_length_km: link.fiber.span_length_km,
            num_spans: link.num_spans,
            amplification: link.amplification,
            n_sp: link.n_sp,
            noise: link.noise_enabled,
            reference_wavelength_nm: link.fiber.reference_wavelength_nm,
        }
    }
}

impl LinkSection {
    pub fn to_link(&self) -> LinkConfig {
        LinkConfig {
            fiber: FiberParams {
                dispersion_ps_nm_km: self.dispersion_ps_nm_km,
                gamma_per_w_km: self.gamma_per_w_km,
                alpha_db_km: self.alpha_db_km,
                span_length_km: self.span_length_km,
                reference_wavelength_nm: self.reference_wavelength_nm,
            },
            num_spans: self.num_spans,
            amplification: self.amplification,
            n_sp: self.n_sp,
            noise_enabled: self.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WdmSection {
    pub num_channels: usize,
    pub symbol_rate_gbd: f64,
    pub channel_spacing_ghz: f64,
    pub samples_per_symbol: usize,
    pub rx_samples_per_symbol: usize,
}

impl Default for WdmSection {
    fn default() -> Self {
        let w = WdmConfig::default();
        WdmSection {
            num_channels: w.num_channels,
            symbol_rate_gbd: w.symbol_rate / 1e9,
            channel_spacing_ghz: w.channel_spacing / 1e9,
            samples_per_symbol: w.samples_per_symbol,
            rx_samples_per_symbol: w.rx_samples_per_symbol,
        }
    }
}

impl WdmSection {
    pub fn to_wdm(&self, launch_power_dbm: f64) -> WdmConfig {
        WdmConfig {
            num_channels: self.num_channels,
            symbol_rate: self.symbol_rate_gbd * 1e9,
            channel_spacing: self.channel_spacing_ghz * 1e9,
            samples_per_symbol: self.samples_per_symbol,
            launch_power_dbm,
            rx_samples_per_symbol: self.rx_samples_per_symbol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Gaussian,
    PasMb,
    PasEss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub qam_order: usize,
    /// Target entropy (MB) or rate (ESS), bits per 2D symbol per pol.
    pub rate_bits: f64,
    /// Amplitudes per ESS block.
    pub ess_block_length: usize,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            kind: SourceKind::Gaussian,
            qam_order: 256,
            rate_bits: 6.4,
            ess_block_length: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub num_test_sequences: usize,
    /// 2-pol symbols per block.
    pub block_length: usize,
    /// Target acceptance rates of the sweep.
    pub eta: Vec<f64>,
    /// Screening launch power; the unselected optimum is searched when absent.
    pub screening_power_dbm: Option<f64>,
    /// Rescale every transmitted pool to unit mean energy, so the launch
    /// power is the actual power of the (biased) source.
    pub normalize_power: bool,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            num_test_sequences: 1 << 16,
            block_length: 256,
            eta: vec![1.0],
            screening_power_dbm: None,
            normalize_power: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub power_dbm: Vec<f64>,
    pub equalization: Vec<Equalization>,
    pub dbp_steps_per_span: usize,
    pub ssfm_step_km: f64,
    /// Independent noise realizations per (power, η, equalization) point.
    pub realizations: usize,
    /// 2-pol symbols per transmitted burst and channel.
    pub symbols_per_burst: usize,
    pub bootstrap_resamples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            power_dbm: vec![1.0],
            equalization: vec![Equalization::Cdc],
            dbp_steps_per_span: 10,
            ssfm_step_km: 0.1,
            realizations: 4,
            symbols_per_burst: 1 << 14,
            bootstrap_resamples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub master_seed: u64,
    pub csv_path: Option<PathBuf>,
    pub selection_path: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            master_seed: 1,
            csv_path: None,
            selection_path: None,
        }
    }
}

/// Complete, reproducible description of one experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub link: LinkSection,
    pub wdm: WdmSection,
    pub source: SourceSection,
    pub selection: SelectionSection,
    pub sweep: SweepSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn link(&self) -> LinkConfig {
        self.link.to_link()
    }

    pub fn wdm(&self, launch_power_dbm: f64) -> WdmConfig {
        self.wdm.to_wdm(launch_power_dbm)
    }

    pub fn ssfm(&self) -> SsfmConfig {
        SsfmConfig::fixed(self.sweep.ssfm_step_km)
    }

    pub fn validate(&self) -> Result<()> {
        let sel = &self.selection;
        let sw = &self.sweep;
        if sel.block_length == 0 || sel.num_test_sequences == 0 {
            return Err(Error::Config("selection needs N >= 1 and N_t >= 1".into()));
        }
        if sel.eta.is_empty() {
            return Err(Error::Config("eta list is empty".into()));
        }
        if let Some(e) = sel.eta.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::InvalidRate(*e));
        }
        if sw.power_dbm.is_empty() || sw.equalization.is_empty() {
            return Err(Error::Config("power and equalization lists must be nonempty".into()));
        }
        if sw.realizations == 0 {
            return Err(Error::Config("need at least one noise realization".into()));
        }
        if sw.symbols_per_burst == 0 || !sw.symbols_per_burst.is_multiple_of(sel.block_length) {
            return Err(Error::Config(format!(
                "burst of {} symbols is not a whole number of {}-symbol blocks",
                sw.symbols_per_burst, sel.block_length
            )));
        }
        let pow2 = |n: usize| n.is_power_of_two();
        if !pow2(sw.symbols_per_burst * self.wdm.samples_per_symbol)
            || !pow2(sel.block_length * sel.num_test_sequences * self.wdm.samples_per_symbol)
        {
            return Err(Error::Config(
                "burst and screening sample counts must be powers of two".into(),
            ));
        }
        if self.source.kind == SourceKind::PasEss
            && !(4 * sel.block_length).is_multiple_of(self.source.ess_block_length)
        {
            return Err(Error::Config(
                "4 N amplitudes per block must fill whole ESS blocks".into(),
            ));
        }
        self.wdm(0.0).validate()?;
        if self.link.num_spans > 0 {
            self.ssfm().span_steps(self.link.span_length_km, 0.0, 0.0)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.link(), LinkConfig::default());
        assert_eq!(cfg.wdm(1.0), WdmConfig::default());
    }

    #[test]
    fn sectioned_file_parses() {
        let text = r#"
            [link]
            span_length_km = 80
            num_spans = 4
            amplification = "idra"

            [wdm]
            num_channels = 1
            samples_per_symbol = 4
            rx_samples_per_symbol = 4

            [source]
            kind = "pas-mb"

            [selection]
            num_test_sequences = 4096
            block_length = 64
            eta = [1.0, 0.1, 0.01]

            [sweep]
            power_dbm = [0.0, 2.0]
            equalization = ["cdc", "dbp"]
            ssfm_step_km = 0.5

            [run]
            master_seed = 42
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.link().total_length_km(), 320.0);
        assert_eq!(cfg.link().amplification, Amplification::Idra);
        assert_eq!(cfg.source.kind, SourceKind::PasMb);
        assert_eq!(cfg.sweep.equalization, vec![Equalization::Cdc, Equalization::Dbp]);
        assert_eq!(cfg.run.master_seed, 42);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            "[selection]\neta = [0.0]",
            "[selection]\neta = []",
            "[sweep]\nsymbols_per_burst = 1000",
            "[sweep]\nssfm_step_km = 0.3",
            "[link]\nunknown_key = 1",
            "[wdm]\nsamples_per_symbol = 2\nrx_samples_per_symbol = 2",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }
}
