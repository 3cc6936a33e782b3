//! Quick self-checks of the simulation chain, run by the `validate` command.
//!
//! Each check compares the implementation against a closed-form or
//! brute-force reference on a small instance.

use num_bigint::BigUint;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::air::{air_symbolwise, fit_aux_channel, selection_bound};
use crate::dsp::{cdc, matched_filter_sample};
use crate::fiber::{amplify_edfa, FiberParams, LinkConfig, Propagator, SsfmConfig, MANAKOV_FACTOR};
use crate::shaping::EssCode;
use crate::signal::{evm_db, gaussian_source, modulate, SampledField, SymbolSequence, WdmConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn linear_round_trip() -> Result<Check> {
    let link = LinkConfig {
        fiber: FiberParams {
            gamma_per_w_km: 0.0,
            ..FiberParams::default()
        },
        num_spans: 10,
        noise_enabled: false,
        ..LinkConfig::default()
    };
    let wdm = WdmConfig::single_channel(4, 0.0);
    let s = gaussian_source(&mut ChaCha8Rng::seed_from_u64(1), 1024);
    let mut f = modulate(std::slice::from_ref(&s), &wdm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    Propagator::for_field(&f).link(&mut f, &link, &SsfmConfig::fixed(100.0), &mut rng)?;
    let y = matched_filter_sample(&cdc(&f, &link), &wdm)?;
    let evm = evm_db(&s, &y);
    Ok(check("linear round trip EVM < -80 dB", evm < -80.0, format!("{evm:.1} dB")))
}

fn cw_phase() -> Result<Check> {
    let (px, py) = (0.01f64, 0.004f64);
    let m = 64;
    let x = vec![C64::new(px.sqrt(), 0.0); m];
    let y = vec![C64::new(0.0, py.sqrt()); m];
    let mut f = SampledField::new(x, y, 1e11)?;
    let fiber = FiberParams {
        dispersion_ps_nm_km: 0.0,
        alpha_db_km: 0.0,
        gamma_per_w_km: 1.3,
        span_length_km: 100.0,
        ..FiberParams::default()
    };
    let link = LinkConfig {
        fiber,
        num_spans: 1,
        noise_enabled: false,
        ..LinkConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Propagator::for_field(&f).link(&mut f, &link, &SsfmConfig::fixed(10.0), &mut rng)?;
    let want = -MANAKOV_FACTOR * 1.3 * (px + py) * 100.0;
    let got = f.samples[0][0].arg();
    let rel = ((got - want) / want).abs();
    Ok(check("CW Manakov phase", rel < 1e-9, format!("relative error {rel:.2e}")))
}

fn ase_psd() -> Check {
    let (g, fs, m) = (100.0, 1e11, 1024);
    let h_nu = FiberParams::default().photon_energy();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let zero = SampledField::new(vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); m], fs)
        .expect("power-of-two grid");
    let trials = 200;
    let mut acc = 0.0;
    for _ in 0..trials {
        acc += amplify_edfa(&zero, g, 1.0, h_nu, &mut rng).mean_power() / 2.0;
    }
    let psd = acc / trials as f64 / fs;
    let want = (g - 1.0) * h_nu;
    let rel = (psd / want - 1.0).abs();
    check("EDFA ASE PSD", rel < 0.02, format!("relative error {rel:.2e}"))
}

fn awgn_air() -> Result<Check> {
    let n = 200_000;
    let x = gaussian_source(&mut ChaCha8Rng::seed_from_u64(5), n);
    let snr = 10f64.powf(1.5);
    let s = (0.5 / snr).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut noisy = |v: &C64| {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        v + C64::new(a * s, b * s)
    };
    let y = SymbolSequence::new(x.x().iter().map(&mut noisy).collect(), x.y().iter().map(&mut noisy).collect())?;
    let r = air_symbolwise(&x, &y, &fit_aux_channel(&x, &y)?)?;
    let err = (r - (1.0 + snr).log2()).abs();
    Ok(check("AWGN AIR at 15 dB", err < 0.02, format!("{r:.4} bits, error {err:.4}")))
}

fn ess_enumeration() -> Result<Check> {
    let alphabet = [1u32, 3, 5, 7];
    let l = 4;
    let mut ok = true;
    for e_max in [4u64, 20, 60, 100, 196] {
        let code = EssCode::new(&alphabet, l, e_max)?;
        let mut brute = 0u64;
        for i in 0..4usize.pow(l as u32) {
            let seq: Vec<u32> = (0..l).map(|k| alphabet[(i >> (2 * k)) & 3]).collect();
            if seq.iter().map(|a| (*a as u64).pow(2)).sum::<u64>() <= e_max {
                brute += 1;
            }
        }
        ok &= *code.num_sequences() == BigUint::from(brute);
        for idx in 0..(1u64 << code.input_bits()) {
            let idx = BigUint::from(idx);
            ok &= code.decode(&code.encode(&idx)?)? == idx;
        }
    }
    Ok(check("ESS counts and bijection (L = 4)", ok, String::new()))
}

fn bound_arithmetic() -> Result<Check> {
    let a = selection_bound(1.0, 1.0, 256)?.selection_penalty;
    let b = selection_bound(1.0, 2f64.powi(-512), 256)?.selection_penalty;
    let c = selection_bound(1.0, 0.0019, 256)?.selection_penalty;
    let ok = a == 0.0 && b == -1.0 && (c + 0.01766).abs() < 5e-6;
    Ok(check("selection penalty arithmetic", ok, format!("{a}, {b}, {c:.5}")))
}

/// Runs all checks; individual failures are reported, not raised.
pub fn run_checks() -> Result<Vec<Check>> {
    Ok(vec![
        linear_round_trip()?,
        cw_phase()?,
        ase_psd(),
        awgn_air()?,
        ess_enumeration()?,
        bound_arithmetic()?,
    ])
}
