//! Gaussian-integer ring arithmetic with componentwise modular reduction.
//!
//! Elements live in `Z_p[i]`: in-phase and quadrature components are integers
//! in `{0, ..., p-1}` and addition/subtraction reduce each component mod `p`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RingError {
    #[error("ring modulus must be at least 2, got {0}")]
    InvalidModulus(u32),
    #[error("component {0} is outside {{0, ..., {1}}}")]
    ComponentOutOfRange(u32, u32),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),
}

/// Element of `Z_p[i]` with `p = modulus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RingElement {
    re: u32,
    im: u32,
    modulus: u32,
}

impl RingElement {
    pub fn new(re: u32, im: u32, modulus: u32) -> Result<Self, RingError> {
        if modulus < 2 {
            return Err(RingError::InvalidModulus(modulus));
        }
        for c in [re, im] {
            if c >= modulus {
                return Err(RingError::ComponentOutOfRange(c, modulus - 1));
            }
        }
        Ok(Self { re, im, modulus })
    }

    pub fn zero(modulus: u32) -> Result<Self, RingError> {
        Self::new(0, 0, modulus)
    }

    pub fn re(&self) -> u32 {
        self.re
    }

    pub fn im(&self) -> u32 {
        self.im
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    fn check_same_modulus(&self, other: &Self) -> Result<(), RingError> {
        if self.modulus != other.modulus {
            return Err(RingError::ModulusMismatch(self.modulus, other.modulus));
        }
        Ok(())
    }

    /// Componentwise addition mod `p`.
    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        self.check_same_modulus(other)?;
        Ok(Self {
            re: (self.re + other.re) % self.modulus,
            im: (self.im + other.im) % self.modulus,
            modulus: self.modulus,
        })
    }

    /// Componentwise subtraction mod `p`.
    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.check_same_modulus(other)?;
        Ok(Self {
            re: (self.re + self.modulus - other.re) % self.modulus,
            im: (self.im + self.modulus - other.im) % self.modulus,
            modulus: self.modulus,
        })
    }
}
