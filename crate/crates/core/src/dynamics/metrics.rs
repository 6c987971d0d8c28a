use super::trajectory::{Excitation, Trajectory};
use crate::{Error, Result};

/// N(t) = |A(t)|² for a single-photon trajectory.
pub fn single_photon_occupation(traj: &Trajectory) -> Result<Vec<f64>> {
    match traj.excitation {
        Excitation::SinglePhoton => Ok(traj.intensity()),
        Excitation::Driven => Err(Error::Contract(
            "photon occupation is defined for the undriven single-photon problem, not a driven run"
                .into(),
        )),
        Excitation::Free => Err(Error::Contract(
            "photon occupation needs A(0) = 1 with unexcited spins".into(),
        )),
    }
}

/// Pulses in |A(t)|², normalized to the global maximum.
#[derive(Debug, Clone, Default)]
pub struct PulseMetrics {
    pub times: Vec<f64>,
    /// Normalized peak heights.
    pub peaks: Vec<f64>,
    pub above_barrier: Vec<bool>,
    pub count_above: usize,
    /// Normalization applied to |A|².
    pub scale: f64,
    kappa: f64,
}

impl PulseMetrics {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Envelope through the pulse peaks, interpolated linearly in log scale.
    /// `None` outside the span of detected pulses.
    pub fn envelope(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return None;
        }
        if i == self.times.len() {
            return (self.times[i - 1] == t).then(|| self.peaks[i - 1]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (l0, l1) = (self.peaks[i - 1].ln(), self.peaks[i].ln());
        Some((l0 + (l1 - l0) * (t - t0) / (t1 - t0)).exp())
    }

    /// Envelope relative to the barrier e^{−κt}.
    pub fn envelope_ratio(&self, t: f64) -> Option<f64> {
        self.envelope(t).map(|e| e / (-self.kappa * t).exp())
    }

    /// Mean spacing of the first `count` pulses.
    pub fn mean_spacing(&self, count: usize) -> Option<f64> {
        let n = count.min(self.times.len());
        (n >= 2).then(|| (self.times[n - 1] - self.times[0]) / (n - 1) as f64)
    }

    /// Mean of the envelope ratio over pulses later than `after`.
    pub fn late_ratio(&self, after: f64) -> Option<f64> {
        let late: Vec<f64> = self
            .times
            .iter()
            .zip(&self.peaks)
            .filter(|(&t, _)| t > after)
            .map(|(&t, &p)| p / (-self.kappa * t).exp())
            .collect();
        (!late.is_empty()).then(|| late.iter().sum::<f64>() / late.len() as f64)
    }
}

/// Finds revival pulses: interior local maxima of |A|² that dominate a window
/// of ± half the nominal spacing. Heights are normalized by max |A|², and a
/// pulse is above the barrier when its height exceeds e^{−κt}.
pub fn pulse_metrics(traj: &Trajectory, kappa: f64, nominal_spacing: f64) -> Result<PulseMetrics> {
    let y = traj.intensity();
    if y.len() < 3 {
        return Err(Error::param("trajectory too short for pulse detection"));
    }
    if !(nominal_spacing > 0.0) {
        return Err(Error::param("nominal pulse spacing must be positive"));
    }
    let scale = y.iter().copied().fold(0.0, f64::max);
    let mut out = PulseMetrics {
        scale,
        kappa,
        ..Default::default()
    };
    if scale == 0.0 {
        return Ok(out);
    }
    let h = traj.grid.step();
    let half = ((0.5 * nominal_spacing / h).round() as usize).max(1);
    let n = y.len();
    for i in 1..n - 1 {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        // strict on the left so a flat top yields one pulse
        if y[lo..i].iter().any(|&v| v >= y[i]) || y[i + 1..=hi].iter().any(|&v| v > y[i]) {
            continue;
        }
        let t = traj.grid.time(i);
        let peak = y[i] / scale;
        let above = peak > (-kappa * t).exp();
        out.times.push(t);
        out.peaks.push(peak);
        out.above_barrier.push(above);
        out.count_above += above as usize;
    }
    Ok(out)
}
