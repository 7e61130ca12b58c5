//! Hartree atomic units (hbar = m0 = |q| = 1) and SI conversions.
//!
//! All physics in this crate runs in atomic units. SI values appear only at
//! the command-line boundary.

use std::f64::consts::PI;

/// Speed of light, 1/alpha (CODATA 2018).
pub const SPEED_OF_LIGHT: f64 = 137.035999084;
/// Fine-structure constant.
pub const FINE_STRUCTURE: f64 = 1.0 / SPEED_OF_LIGHT;
/// Electron rest mass.
pub const ELECTRON_MASS: f64 = 1.0;
/// Electron charge.
pub const ELECTRON_CHARGE: f64 = -1.0;
/// Vacuum permittivity, 1/(4 pi) in atomic units.
pub const EPSILON_0: f64 = 1.0 / (4.0 * PI);

/// Bohr radius in metres.
pub const BOHR_RADIUS_M: f64 = 5.29177210903e-11;
/// Hartree energy in joules.
pub const HARTREE_J: f64 = 4.3597447222071e-18;
/// Reduced Planck constant in J s.
pub const HBAR_JS: f64 = 1.054571817e-34;
/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE_C: f64 = 1.602176634e-19;

/// Atomic unit of electric field in V/m.
pub fn field_unit_v_per_m() -> f64 {
    HARTREE_J / (ELEMENTARY_CHARGE_C * BOHR_RADIUS_M)
}

/// Atomic unit of time in seconds.
pub fn time_unit_s() -> f64 {
    HBAR_JS / HARTREE_J
}

/// Atomic unit of intensity (power per area) in W/cm^2.
pub fn intensity_unit_w_per_cm2() -> f64 {
    HARTREE_J / time_unit_s() / (BOHR_RADIUS_M * BOHR_RADIUS_M) * 1e-4
}

pub fn field_from_si(v_per_m: f64) -> f64 {
    v_per_m / field_unit_v_per_m()
}

pub fn field_to_si(au: f64) -> f64 {
    au * field_unit_v_per_m()
}

pub fn length_from_si(m: f64) -> f64 {
    m / BOHR_RADIUS_M
}

pub fn length_to_si(au: f64) -> f64 {
    au * BOHR_RADIUS_M
}

pub fn intensity_to_w_per_cm2(au: f64) -> f64 {
    au * intensity_unit_w_per_cm2()
}
