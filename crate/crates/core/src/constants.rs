//! Physical constants (SI units).

/// Speed of light in vacuum, m/s (exact).
pub const C0: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Vacuum wave impedance, Ohm.
pub fn eta0() -> f64 {
    (MU0 / EPS0).sqrt()
}
