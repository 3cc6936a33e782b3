//! Experiment orchestration behind the `seqsel` command line tool.

pub mod config;
pub mod output;
pub mod persist;
pub mod run;
pub mod validate;

pub use config::{ExperimentConfig, SourceKind};
pub use output::{read_csv, write_csv, CsvRecord, CSV_COLUMNS};
pub use persist::{block_digest, SelectionArchive};
pub use run::{argmax_power, job_rng, Experiment, SweepRow};

use crate::selection::SelectionResult;
use crate::{Error, Result};

impl Experiment {
    /// Archive record of a screening run of this experiment.
    pub fn archive(&self, selection: &SelectionResult, screening_power_dbm: f64) -> SelectionArchive {
        let cfg = self.config();
        SelectionArchive {
            block_length: cfg.selection.block_length,
            num_test_sequences: cfg.selection.num_test_sequences,
            master_seed: cfg.run.master_seed,
            samples_per_symbol: cfg.wdm.samples_per_symbol,
            link: cfg.link().noiseless(),
            screening_power_dbm,
            gamma_e: selection.gamma_e(),
            source: source_description(cfg),
            block_digest: block_digest(selection.tested_blocks()),
            metrics: selection.all_metrics().to_vec(),
            accepted: selection.accepted_indices().to_vec(),
        }
    }

    /// Restores a stored screening run, refusing archives made with a
    /// different source, seed, block shape or link.
    pub fn load_selection(&self, archive: &SelectionArchive) -> Result<SelectionResult> {
        let cfg = self.config();
        let mismatch = |what: &str| Err(Error::Format(format!("archive {what} differs from the configuration")));
        if archive.block_length != cfg.selection.block_length
            || archive.num_test_sequences != cfg.selection.num_test_sequences
        {
            return mismatch("block shape");
        }
        if archive.master_seed != cfg.run.master_seed {
            return mismatch("master seed");
        }
        if archive.source != source_description(cfg) {
            return mismatch("source");
        }
        if archive.link != cfg.link().noiseless() || archive.samples_per_symbol != cfg.wdm.samples_per_symbol {
            return mismatch("link");
        }
        archive.restore(self.test_blocks()?)
    }
}

fn source_description(cfg: &ExperimentConfig) -> String {
    toml::to_string(&cfg.source).expect("source section is serializable")
}
