//! Simulator and gate compiler for a single transmon addressing the
//! eigenmodes of a coupled-resonator array through parametric sidebands.

pub mod device;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod numerics;
pub mod pulses;
pub mod tomo;

pub use device::{DeviceModel, LoadMode};
pub use error::{Error, Result};
