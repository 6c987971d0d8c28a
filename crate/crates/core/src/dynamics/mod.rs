//! Time evolution of the cavity amplitude `A(t)` in the frame rotating at
//! the cavity frequency.
//!
//! Two independent routes are provided: [`integrate_ode`] steps the
//! discretized cavity + spin-bin system, [`solve_volterra`] solves the
//! equivalent integral equation with a memory kernel built from the
//! continuous density.

mod drive;
mod kernel;
mod metrics;
mod ode;
mod trajectory;
mod volterra;

pub use drive::{rectangular_drive, DriveSignal, Pulse};
pub use kernel::{volterra_kernel, volterra_kernel_discrete, Kernel, KernelNodes};
pub use metrics::{pulse_metrics, single_photon_occupation, PulseMetrics};
#[cfg(test)]
pub(crate) use ode::Rk4;
pub use ode::{integrate_ode, OdeOptions};
pub use trajectory::{Excitation, Solver, TimeGrid, Trajectory};
pub use volterra::{solve_volterra, solve_volterra_with_kernel};

use crate::{params, units, Error, Result};

/// Loss rates and frequencies of the cavity-spin system (rad/μs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cavity field loss κ (HWHM).
    pub kappa: f64,
    /// Spin loss γ (HWHM).
    pub gamma: f64,
    pub cavity: f64,
    /// Drive carrier ω_p.
    pub carrier: f64,
}

impl SystemParams {
    pub fn reference() -> Self {
        let cavity = units::ghz(params::CAVITY_GHZ);
        Self {
            kappa: units::mhz(params::KAPPA_MHZ),
            gamma: units::mhz(params::GAMMA_MHZ),
            cavity,
            carrier: cavity,
        }
    }

    /// Zero losses are accepted; they give the conservative limit.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::param(format!(
                "κ must be non-negative, got {}",
                self.kappa
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::param(format!(
                "γ must be non-negative, got {}",
                self.gamma
            )));
        }
        if !self.cavity.is_finite() || !self.carrier.is_finite() {
            return Err(Error::param(
                "cavity and carrier frequencies must be finite",
            ));
        }
        Ok(())
    }

    /// ω_p − ω_c.
    pub fn carrier_detuning(&self) -> f64 {
        self.carrier - self.cavity
    }

    /// Checks that a density or ensemble was built for the same cavity.
    pub(crate) fn check_cavity(&self, cavity: f64) -> Result<()> {
        if (self.cavity - cavity).abs() > 1e-9 * self.cavity.abs().max(1.0) {
            return Err(Error::param(format!(
                "cavity frequency mismatch: system {} GHz, spin density {} GHz",
                units::to_ghz(self.cavity),
                units::to_ghz(cavity)
            )));
        }
        Ok(())
    }

    /// The same system with every frequency moved by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            cavity: self.cavity + shift,
            carrier: self.carrier + shift,
            ..*self
        }
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::reference()
    }
}
