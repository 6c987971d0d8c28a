use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid `t_i = i·step`, `i = 0..=steps`, in μs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(step: f64, steps: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::param(format!(
                "time step must be positive, got {step}"
            )));
        }
        Ok(Self { step, steps })
    }

    /// Smallest grid with the given step reaching at least `end`.
    pub fn until(step: f64, end: f64) -> Result<Self> {
        if !(end >= 0.0) || !end.is_finite() {
            return Err(Error::param(format!(
                "time window must be non-negative, got {end}"
            )));
        }
        let n = (end / step * (1.0 - 1e-12)).ceil().max(0.0) as usize;
        Self::new(step, n)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of intervals; the grid has `steps + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|i| self.time(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Ode,
    Volterra,
    Laplace,
}

impl Solver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::Ode => "ode",
            Solver::Volterra => "volterra",
            Solver::Laplace => "laplace",
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What set the system in motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Excitation {
    /// A(0) = 1, spins unexcited, no drive.
    SinglePhoton,
    /// A nonzero drive.
    Driven,
    /// Any other undriven initial state.
    Free,
}

impl Excitation {
    pub(crate) fn classify(a0: Complex64, spins_excited: bool, driven: bool) -> Self {
        if driven {
            Excitation::Driven
        } else if a0 == Complex64::new(1.0, 0.0) && !spins_excited {
            Excitation::SinglePhoton
        } else {
            Excitation::Free
        }
    }
}

/// Cavity amplitude on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub amplitude: Vec<Complex64>,
    /// Σ_l |B_l(t_i)|², when the route tracks spin bins.
    pub spin_population: Option<Vec<f64>>,
    /// B_l(t_i), row per time point, when requested.
    pub spins: Option<Vec<Vec<Complex64>>>,
    pub solver: Solver,
    pub excitation: Excitation,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times().collect()
    }

    /// |A(t_i)|².
    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Largest |A| over the trajectory.
    pub fn max_abs(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// `max_t |A − B| / max_t |A|` over the first `points` samples. Grids must
    /// share the step.
    pub fn deviation(&self, other: &Trajectory, points: usize) -> Result<f64> {
        if (self.grid.step() - other.grid.step()).abs() > 1e-12 * self.grid.step() {
            return Err(Error::param("trajectories use different time steps"));
        }
        let n = points.min(self.amplitude.len()).min(other.amplitude.len());
        let scale = self.amplitude[..n]
            .iter()
            .map(|a| a.norm())
            .fold(0.0, f64::max);
        let diff = self.amplitude[..n]
            .iter()
            .zip(&other.amplitude[..n])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_reaches_end() {
        let g = TimeGrid::until(5e-5, 0.4).unwrap();
        assert_eq!(g.steps(), 8000);
        assert!((g.end() - 0.4).abs() < 1e-12);
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn excitation_classification() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(
            Excitation::classify(one, false, false),
            Excitation::SinglePhoton
        );
        assert_eq!(Excitation::classify(one, false, true), Excitation::Driven);
        assert_eq!(
            Excitation::classify(one * 2.0, false, false),
            Excitation::Free
        );
        assert_eq!(Excitation::classify(one, true, false), Excitation::Free);
    }
}
