//! Heralded parity measurements with chiral emitters in a Mach-Zehnder
//! interferometer, and the network protocols built from them.
//!
//! The crate is organised bottom-up:
//!
//! - [`qstate`]: exact pure states and density matrices on up to five qubits.
//! - [`scatter`]: single-photon transmission and the interferometer map.
//! - [`parity`]: one- and two-click parity protocols and their
//!   Choi-Jamiolkowski fidelities.
//! - [`pulse`]: finite-bandwidth Lorentzian photons.
//! - [`dephase`]: incoherent (phase-randomising) scattering.
//! - [`protocols`]: purification, Bell analysis, swapping, teleported CZ.
//! - [`netsim`]: Monte Carlo repeater chains.

pub mod dephase;
pub mod error;
pub mod netsim;
pub mod parity;
pub mod protocols;
pub mod pulse;
pub mod qstate;
pub mod scatter;

pub use error::{Error, Result};
