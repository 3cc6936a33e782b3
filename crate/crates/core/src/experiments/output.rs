//! CSV result tables.
//!
//! Header lines start with `#` and carry the code version and the full
//! configuration; a point that could not be evaluated is preceded by a
//! `# error` line and written with `NaN` rates.

use std::io::{BufRead, Write};

use super::config::ExperimentConfig;
use super::run::SweepRow;
use crate::dsp::Equalization;
use crate::{Error, Result};

pub const CSV_COLUMNS: [&str; 9] = [
    "power_dBm",
    "eta",
    "equalization",
    "air_unbiased",
    "penalty",
    "air_bound",
    "mc_stderr",
    "n_symbols",
    "seed",
];

pub fn write_csv(out: &mut dyn Write, cfg: &ExperimentConfig, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "# seqsel {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(
        out,
        "# noise realizations per point: {}",
        cfg.sweep.realizations
    )?;
    for line in cfg.to_toml().lines() {
        writeln!(out, "# config: {line}")?;
    }
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    let seed = cfg.run.master_seed;
    for row in rows {
        match &row.outcome {
            Ok(est) => writeln!(
                out,
                "{},{:e},{},{:.12},{:.12e},{:.12},{:.6e},{},{}",
                row.power_dbm,
                row.eta_hat,
                row.equalization,
                est.air_unbiased,
                est.selection_penalty,
                est.air_bound,
                est.mc_stderr,
                est.n_symbols_used,
                seed
            )?,
            Err(msg) => {
                writeln!(
                    out,
                    "# error: power_dBm={} eta={} equalization={}: {msg}",
                    row.power_dbm, row.eta_target, row.equalization
                )?;
                writeln!(
                    out,
                    "{},{:e},{},NaN,NaN,NaN,NaN,0,{}",
                    row.power_dbm, row.eta_target, row.equalization, seed
                )?;
            }
        }
    }
    Ok(())
}

/// Parsed data row of a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub power_dbm: f64,
    pub eta: f64,
    pub equalization: Equalization,
    pub air_unbiased: f64,
    pub penalty: f64,
    pub air_bound: f64,
    pub mc_stderr: f64,
    pub n_symbols: usize,
    pub seed: u64,
}

pub fn read_csv(input: &mut dyn BufRead) -> Result<Vec<CsvRecord>> {
    let mut records = Vec::new();
    let mut header_seen = false;
    for line in input.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if !header_seen {
            if fields != CSV_COLUMNS {
                return Err(Error::Format(format!("unexpected CSV header: {line}")));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != CSV_COLUMNS.len() {
            return Err(Error::Format(format!("malformed row: {line}")));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("column {}: {:?}", CSV_COLUMNS[i], fields[i])))
        };
        let equalization = match fields[2] {
            "cdc" => Equalization::Cdc,
            "dbp" => Equalization::Dbp,
            other => return Err(Error::Format(format!("unknown equalization {other}"))),
        };
        records.push(CsvRecord {
            power_dbm: num(0)?,
            eta: num(1)?,
            equalization,
            air_unbiased: num(3)?,
            penalty: num(4)?,
            air_bound: num(5)?,
            mc_stderr: num(6)?,
            n_symbols: fields[7]
                .parse()
                .map_err(|_| Error::Format(format!("n_symbols: {:?}", fields[7])))?,
            seed: fields[8]
                .parse()
                .map_err(|_| Error::Format(format!("seed: {:?}", fields[8])))?,
        });
    }
    if !header_seen {
        return Err(Error::Format("missing CSV header".into()));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::selection_bound;

    #[test]
    fn rows_round_trip() {
        let cfg = ExperimentConfig::default();
        let mut est = selection_bound(5.25, 0.125, 256).unwrap();
        est.mc_stderr = 0.003;
        est.n_symbols_used = 65536;
        let rows = vec![
            SweepRow {
                power_dbm: 1.0,
                eta_target: 0.125,
                eta_hat: 0.125,
                equalization: Equalization::Dbp,
                outcome: Ok(est),
            },
            SweepRow {
                power_dbm: 1.0,
                eta_target: 1e-9,
                eta_hat: 1e-9,
                equalization: Equalization::Cdc,
                outcome: Err("no sequence was accepted".into()),
            },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &cfg, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seqsel "));
        assert!(text.contains("# error: "));
        let back = read_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].equalization, Equalization::Dbp);
        assert!((back[0].air_bound - est.air_bound).abs() < 1e-11);
        assert!((back[0].penalty - est.selection_penalty).abs() < 1e-15);
        assert_eq!(back[0].n_symbols, 65536);
        assert!(back[1].air_unbiased.is_nan());
        assert_eq!(back[1].seed, cfg.run.master_seed);
    }

    #[test]
    fn bad_header_is_rejected() {
        let mut input = "a,b,c\n1,2,3\n".as_bytes();
        assert!(read_csv(&mut input).is_err());
    }
}
