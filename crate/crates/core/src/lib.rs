pub mod atom_env;
pub mod averaging;
pub mod cache;
pub mod dipole;
pub mod fdtd;
pub mod fiber;
pub mod numerics;
pub mod tcspc;

pub use dipole::{Orientation, PerOrientation};
