use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Linear dipole orientation in cylindrical coordinates around the fiber axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Along the fiber axis.
    Z,
    /// Azimuthal, tangent to the fiber surface and normal to the axis.
    Phi,
    /// Radial, normal to the fiber surface.
    R,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::Z, Orientation::Phi, Orientation::R];

    pub fn index(self) -> usize {
        match self {
            Orientation::Z => 0,
            Orientation::Phi => 1,
            Orientation::R => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Z => "z",
            Orientation::Phi => "phi",
            Orientation::R => "r",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Orientation::Z),
            "phi" | "φ" => Ok(Orientation::Phi),
            "r" => Ok(Orientation::R),
            other => Err(format!("unknown orientation '{other}' (expected z, phi or r)")),
        }
    }
}

/// Values indexed by orientation, stored in `z, phi, r` order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerOrientation<T> {
    pub z: T,
    pub phi: T,
    pub r: T,
}

impl<T> PerOrientation<T> {
    pub fn new(z: T, phi: T, r: T) -> Self {
        Self { z, phi, r }
    }

    pub fn get_ref(&self, o: Orientation) -> &T {
        match o {
            Orientation::Z => &self.z,
            Orientation::Phi => &self.phi,
            Orientation::R => &self.r,
        }
    }

    pub fn map<U, F: FnMut(T) -> U>(self, mut f: F) -> PerOrientation<U> {
        PerOrientation { z: f(self.z), phi: f(self.phi), r: f(self.r) }
    }
}

impl<T: Copy> PerOrientation<T> {
    pub fn get(&self, o: Orientation) -> T {
        match o {
            Orientation::Z => self.z,
            Orientation::Phi => self.phi,
            Orientation::R => self.r,
        }
    }
}
