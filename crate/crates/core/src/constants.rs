//! Physical constants (CODATA 2018).

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Elementary charge (C).
pub const Q_E: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Free-space wave impedance (Ω).
pub fn eta0() -> f64 {
    (MU0 / EPS0).sqrt()
}

/// Design frequency of the antenna (Hz).
pub const F_DESIGN: f64 = 5.5e9;
