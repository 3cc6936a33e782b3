//! Binary archive of a screening run.
//!
//! Only the metrics and the accepted set are stored; the tested blocks are
//! regenerated from the master seed and checked against a stored digest.
//!
//! Layout (little endian): magic `SQSL`, format version `u32`, `N`, `N_t`,
//! master seed, samples per symbol (`u64`); link parameters (five `f64`,
//! span count `u64`, amplification `u8`, `n_sp` `f64`); screening power,
//! `γ_E` (`f64`); source description (length-prefixed UTF-8); block digest
//! (`u64`); `N_t` metrics (`f64`); accepted count and indices (`u64`).

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::fiber::{Amplification, FiberParams, LinkConfig};
use crate::selection::SelectionResult;
use crate::signal::SymbolSequence;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SQSL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionArchive {
    pub block_length: usize,
    pub num_test_sequences: usize,
    pub master_seed: u64,
    pub samples_per_symbol: usize,
    pub link: LinkConfig,
    pub screening_power_dbm: f64,
    pub gamma_e: f64,
    /// Serialized source section, compared on load.
    pub source: String,
    pub block_digest: u64,
    pub metrics: Vec<f64>,
    pub accepted: Vec<usize>,
}

/// FNV-1a over the bit patterns of all symbol components.
pub fn block_digest(blocks: &[SymbolSequence]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in blocks {
        for v in b.x().iter().chain(b.y()) {
            for w in [v.re.to_bits(), v.im.to_bits()] {
                for byte in w.to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
    }
    h
}

impl SelectionArchive {
    pub fn write(&self, out: &mut dyn Write) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LE>(FORMAT_VERSION)?;
        for v in [
            self.block_length as u64,
            self.num_test_sequences as u64,
            self.master_seed,
            self.samples_per_symbol as u64,
        ] {
            out.write_u64::<LE>(v)?;
        }
        let f = &self.link.fiber;
        for v in [
            f.dispersion_ps_nm_km,
            f.gamma_per_w_km,
            f.alpha_db_km,
            f.span_length_km,
            f.reference_wavelength_nm,
        ] {
            out.write_f64::<LE>(v)?;
        }
        out.write_u64::<LE>(self.link.num_spans as u64)?;
        out.write_u8(match self.link.amplification {
            Amplification::Edfa => 0,
            Amplification::Idra => 1,
        })?;
        out.write_f64::<LE>(self.link.n_sp)?;
        out.write_f64::<LE>(self.screening_power_dbm)?;
        out.write_f64::<LE>(self.gamma_e)?;
        out.write_u64::<LE>(self.source.len() as u64)?;
        out.write_all(self.source.as_bytes())?;
        out.write_u64::<LE>(self.block_digest)?;
        if self.metrics.len() != self.num_test_sequences {
            return Err(Error::LengthMismatch {
                expected: self.num_test_sequences,
                got: self.metrics.len(),
            });
        }
        for m in &self.metrics {
            out.write_f64::<LE>(*m)?;
        }
        out.write_u64::<LE>(self.accepted.len() as u64)?;
        for i in &self.accepted {
            out.write_u64::<LE>(*i as u64)?;
        }
        Ok(())
    }

    pub fn read(input: &mut dyn Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a selection archive".into()));
        }
        let version = input.read_u32::<LE>()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "archive format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let block_length = input.read_u64::<LE>()? as usize;
        let num_test_sequences = input.read_u64::<LE>()? as usize;
        let master_seed = input.read_u64::<LE>()?;
        let samples_per_symbol = input.read_u64::<LE>()? as usize;
        let mut f = [0.0; 5];
        for v in f.iter_mut() {
            *v = input.read_f64::<LE>()?;
        }
        let num_spans = input.read_u64::<LE>()? as usize;
        let amplification = match input.read_u8()? {
            0 => Amplification::Edfa,
            1 => Amplification::Idra,
            other => return Err(Error::Format(format!("unknown amplification tag {other}"))),
        };
        let n_sp = input.read_f64::<LE>()?;
        let screening_power_dbm = input.read_f64::<LE>()?;
        let gamma_e = input.read_f64::<LE>()?;
        let len = input.read_u64::<LE>()? as usize;
        if len > 1 << 20 {
            return Err(Error::Format("source description too long".into()));
        }
        let mut text = vec![0u8; len];
        input.read_exact(&mut text)?;
        let source = String::from_utf8(text).map_err(|e| Error::Format(e.to_string()))?;
        let block_digest = input.read_u64::<LE>()?;
        if num_test_sequences > 1 << 32 {
            return Err(Error::Format("implausible N_t".into()));
        }
        let metrics = (0..num_test_sequences)
            .map(|_| input.read_f64::<LE>())
            .collect::<std::io::Result<Vec<_>>>()?;
        let n_acc = input.read_u64::<LE>()? as usize;
        if n_acc > num_test_sequences {
            return Err(Error::Format("more accepted than tested sequences".into()));
        }
        let accepted = (0..n_acc)
            .map(|_| input.read_u64::<LE>().map(|v| v as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(SelectionArchive {
            block_length,
            num_test_sequences,
            master_seed,
            samples_per_symbol,
            link: LinkConfig {
                fiber: FiberParams {
                    dispersion_ps_nm_km: f[0],
                    gamma_per_w_km: f[1],
                    alpha_db_km: f[2],
                    span_length_km: f[3],
                    reference_wavelength_nm: f[4],
                },
                num_spans,
                amplification,
                n_sp,
                noise_enabled: false,
            },
            screening_power_dbm,
            gamma_e,
            source,
            block_digest,
            metrics,
            accepted,
        })
    }

    /// Rebuilds the selection from regenerated test blocks.
    pub fn restore(&self, blocks: Vec<SymbolSequence>) -> Result<SelectionResult> {
        if blocks.len() != self.num_test_sequences
            || blocks.iter().any(|b| b.len() != self.block_length)
        {
            return Err(Error::Format("regenerated blocks do not match the archive shape".into()));
        }
        if block_digest(&blocks) != self.block_digest {
            return Err(Error::Format(
                "regenerated test blocks differ from the screened ones".into(),
            ));
        }
        SelectionResult::from_parts(blocks, self.metrics.clone(), self.accepted.clone(), self.gamma_e)
    }
}
