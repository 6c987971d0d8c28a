//! The reference parameter card. Every scenario default is read from here so
//! that built-in scenarios cannot drift apart.
//!
//! Values are stored in configuration units (MHz, GHz, ns).

/// Version tag of the parameter card, written into run reports.
pub const CARD_VERSION: &str = "nv-comb-1";

/// Number of spin sub-ensembles in the comb.
pub const ENSEMBLES: usize = 7;
/// Spacing between neighbouring sub-ensembles, Δω/2π.
pub const SPACING_MHZ: f64 = 40.0;
/// Width of the Gaussian envelope of the ensemble weights, σ_G/2π.
pub const WEIGHT_WIDTH_MHZ: f64 = 150.0;
/// FWHM of each sub-ensemble, γ_q/2π.
pub const ENSEMBLE_FWHM_MHZ: f64 = 9.4;
/// Shape parameter of the q-Gaussian line.
pub const Q_SHAPE: f64 = 1.39;
/// Cavity frequency ω_c/2π.
pub const CAVITY_GHZ: f64 = 2.6915;
/// Cavity loss κ/2π (HWHM).
pub const KAPPA_MHZ: f64 = 0.4;
/// Individual spin loss γ/2π (HWHM).
pub const GAMMA_MHZ: f64 = 0.01;
/// Collective coupling of the central ensemble in the single-mode regime.
pub const COUPLING_STRONG_MHZ: f64 = 8.0;
/// Collective coupling of the central ensemble in the multimode regime.
pub const COUPLING_MULTIMODE_MHZ: f64 = 26.0;
/// Number of discrete spin bins in the eigenproblem and the ODE route.
pub const BINS: usize = 1200;
/// Duration of the rectangular probe pulse.
pub const PULSE_NS: f64 = 6.0;
/// FWHM of every burnt hole, Δ_h/2π.
pub const HOLE_FWHM_MHZ: f64 = 0.47;
/// Number of holes burnt in the multimode regime.
pub const HOLE_COUNT: usize = 8;
/// Output time step.
pub const STEP_NS: f64 = 0.05;

/// Relative tail mass allowed outside the truncation window.
pub const TAIL_MASS: f64 = 1e-6;
/// Minimum half-width of the truncation window, /2π.
pub const WINDOW_FLOOR_MHZ: f64 = 300.0;

/// Half-width of the detuning sweep, /2π.
pub const SWEEP_SPAN_MHZ: f64 = 150.0;
/// Number of points in the detuning sweep.
pub const SWEEP_POINTS: usize = 301;

/// Bin width used to smooth cavity content over eigenfrequency, /2π.
pub const PEAK_BIN_MHZ: f64 = 0.2;
/// A peak is dominant when its prominence exceeds this multiple of the
/// median bin value.
pub const PEAK_PROMINENCE_FACTOR: f64 = 10.0;
/// A prominent peak is dominant when the cavity weight of its basin is at
/// least this fraction of the heaviest peak's.
pub const PEAK_WEIGHT_FRACTION: f64 = 0.2;
