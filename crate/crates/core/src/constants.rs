//! SI physical constants (CODATA 2018 exact or recommended values).

use crate::error::{invalid, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
pub const PROTON_MASS: f64 = 1.672_621_923_69e-27;
pub const NEUTRON_MASS: f64 = 1.674_927_498_04e-27;
pub const FINE_STRUCTURE: f64 = 7.297_352_569_3e-3;
pub const PLANCK_LENGTH: f64 = 1.616_255e-35;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// J·s
    pub hbar: f64,
    /// kg
    pub mass: f64,
    /// C
    pub elementary_charge: f64,
    /// C²N⁻¹m⁻²
    pub vacuum_permittivity: f64,
    /// m/s
    pub speed_of_light: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: HBAR,
            mass: ELECTRON_MASS,
            elementary_charge: ELEMENTARY_CHARGE,
            vacuum_permittivity: VACUUM_PERMITTIVITY,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("elementary_charge", self.elementary_charge),
            ("vacuum_permittivity", self.vacuum_permittivity),
            ("speed_of_light", self.speed_of_light),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be strictly positive"));
            }
        }
        Ok(())
    }

    pub fn with_mass(self, mass: f64) -> Self {
        Self { mass, ..self }
    }

    /// Fine-structure constant implied by these constants.
    pub fn alpha(&self) -> f64 {
        self.elementary_charge.powi(2)
            / (4.0 * std::f64::consts::PI * self.vacuum_permittivity * self.hbar * self.speed_of_light)
    }
}
