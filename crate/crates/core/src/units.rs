//! Physical constants and unit conversions.
//!
//! Internally the simulator works in seconds, hertz, watts and kilometres.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Reference carrier wavelength, nm.
pub const REFERENCE_WAVELENGTH_NM: f64 = 1550.0;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * (watt / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Photon energy hν at the given wavelength in nm.
pub fn photon_energy(wavelength_nm: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        for p in [-10.0, 0.0, 1.0, 7.5] {
            assert!((watt_to_dbm(dbm_to_watt(p)) - p).abs() < 1e-12);
        }
        assert!((dbm_to_watt(0.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn photon_energy_at_1550() {
        // 193.4 THz carrier
        let nu = SPEED_OF_LIGHT / 1550e-9;
        assert!((nu - 193.414e12).abs() < 1e9);
        assert!((photon_energy(1550.0) - PLANCK * nu).abs() < 1e-30);
    }
}
