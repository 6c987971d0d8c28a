use num_complex::Complex64;

use crate::{Error, Result};

/// One rectangular pulse, `amplitude` on `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub start: f64,
    pub duration: f64,
    pub amplitude: Complex64,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Slowly varying drive envelope η(t), as a sum of rectangular pulses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriveSignal {
    pulses: Vec<Pulse>,
}

impl DriveSignal {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn is_zero(&self) -> bool {
        self.pulses
            .iter()
            .all(|p| p.amplitude == Complex64::new(0.0, 0.0))
    }

    /// η(t).
    pub fn eval(&self, t: f64) -> Complex64 {
        self.pulses
            .iter()
            .filter(|p| t >= p.start && t < p.end())
            .map(|p| p.amplitude)
            .sum()
    }

    /// Times where η jumps, sorted.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .pulses
            .iter()
            .filter(|p| p.amplitude != Complex64::new(0.0, 0.0))
            .flat_map(|p| [p.start, p.end()])
            .collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    /// Superposition of two drives.
    pub fn plus(&self, other: &DriveSignal) -> DriveSignal {
        let mut pulses = self.pulses.clone();
        pulses.extend_from_slice(&other.pulses);
        DriveSignal { pulses }
    }

    pub fn scaled(&self, factor: Complex64) -> DriveSignal {
        DriveSignal {
            pulses: self
                .pulses
                .iter()
                .map(|p| Pulse {
                    amplitude: p.amplitude * factor,
                    ..*p
                })
                .collect(),
        }
    }

    /// `∫₀ᵗ η(τ) e^{−iΔτ} e^{−κ(t−τ)} dτ` in closed form.
    pub(crate) fn filtered(&self, t: f64, kappa: f64, detuning: f64) -> Complex64 {
        let z = Complex64::new(kappa, -detuning);
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &self.pulses {
            let lo = p.start.max(0.0);
            let hi = p.end().min(t);
            if hi <= lo {
                continue;
            }
            // e^{−κt}·∫_lo^hi e^{zτ} dτ, written to stay finite for large κt
            let len = hi - lo;
            let decay = (-kappa * (t - hi)).exp();
            let phase = Complex64::new(0.0, -detuning * hi).exp();
            acc += p.amplitude * decay * phase * len * exprel_neg(z * len);
        }
        acc
    }
}

/// `(1 − e^{−x})/x`, accurate near zero.
pub(crate) fn exprel_neg(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..30 {
            term *= -x / k as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (1.0 - (-x).exp()) / x
    }
}

/// A single rectangular pulse of the given complex amplitude.
pub fn rectangular_drive(start: f64, duration: f64, amplitude: Complex64) -> Result<DriveSignal> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::param(format!(
            "pulse duration must be positive, got {duration}"
        )));
    }
    if !start.is_finite() || !amplitude.re.is_finite() || !amplitude.im.is_finite() {
        return Err(Error::param("pulse start and amplitude must be finite"));
    }
    Ok(DriveSignal {
        pulses: vec![Pulse {
            start,
            duration,
            amplitude,
        }],
    })
}
