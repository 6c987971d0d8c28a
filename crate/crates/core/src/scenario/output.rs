//! CSV artifacts. Numbers are written in their shortest round-trip form, so
//! identical results give identical bytes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use csv::Writer;

use super::run::SensitivityRow;
use crate::dynamics::{PulseMetrics, Trajectory};
use crate::laplace::LaplaceSpectrum;
use crate::modes::{DetuningPoint, ModeSet, PolaritonPeak};
use crate::spectral::SpectralFunction;
use crate::{units, Result};

/// Spacing of the spectrum.csv grid, /2π.
const SPECTRUM_STEP_MHZ: f64 = 0.05;

pub(super) fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn writer(path: &Path) -> Result<Writer<BufWriter<File>>> {
    Ok(Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// `omega_minus_omega_c_over_2pi_mhz, F` with F per MHz of ordinary
/// frequency, over the truncation window.
pub(super) fn spectrum(path: &Path, f: &SpectralFunction) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["omega_minus_omega_c_over_2pi_mhz", "F"])?;
    let (a, b) = f.window();
    let lo = (units::to_mhz(a - f.cavity()) / SPECTRUM_STEP_MHZ).ceil() as i64;
    let hi = (units::to_mhz(b - f.cavity()) / SPECTRUM_STEP_MHZ).floor() as i64;
    for i in lo..=hi {
        let nu = i as f64 * SPECTRUM_STEP_MHZ;
        let density = f.eval(f.cavity() + units::mhz(nu)) * units::mhz(1.0);
        w.write_record([num(nu), num(density)])?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn trajectory(path: &Path, traj: &Trajectory, kappa: f64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "t_ns",
        "re_A",
        "im_A",
        "abs2_A",
        "abs2_A_normalized",
        "barrier_exp_minus_kappa_t",
    ])?;
    let intensity = traj.intensity();
    let peak = intensity.iter().copied().fold(0.0, f64::max);
    for ((t, a), i) in traj.grid.times().zip(&traj.amplitude).zip(&intensity) {
        let norm = if peak > 0.0 { i / peak } else { 0.0 };
        w.write_record([
            num(units::to_ns(t)),
            num(a.re),
            num(a.im),
            num(*i),
            num(norm),
            num((-kappa * t).exp()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Peak heights are raw |A|²; the barrier comparison uses the normalized ones.
pub(super) fn pulses(path: &Path, m: &PulseMetrics) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["pulse_index", "t_ns", "peak_abs2", "above_barrier"])?;
    for (i, ((t, p), above)) in m
        .times
        .iter()
        .zip(&m.peaks)
        .zip(&m.above_barrier)
        .enumerate()
    {
        w.write_record([
            i.to_string(),
            num(units::to_ns(*t)),
            num(p * m.scale),
            above.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One block of rows per comb center.
pub(super) fn modes<'a>(
    path: &Path,
    sets: impl IntoIterator<Item = (f64, &'a ModeSet)>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "omega_s_over_2pi_ghz",
        "im_lambda_over_2pi_mhz",
        "re_lambda_over_2pi_mhz",
        "cavity_content",
    ])?;
    for (center, set) in sets {
        let c = num(units::to_ghz(center));
        for (l, content) in set.eigenvalues.iter().zip(&set.contents) {
            w.write_record([
                c.clone(),
                num(units::to_mhz(l.im)),
                num(units::to_mhz(l.re)),
                num(*content),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(super) fn sweep(path: &Path, points: &[DetuningPoint]) -> Result<()> {
    modes(path, points.iter().map(|p| (p.center, &p.modes)))
}

pub(super) fn peaks(path: &Path, peaks: &[PolaritonPeak], cavity: f64) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "peak_index",
        "omega_minus_omega_c_over_2pi_mhz",
        "cavity_content",
    ])?;
    for (i, p) in peaks.iter().enumerate() {
        w.write_record([
            i.to_string(),
            num(units::to_mhz(p.frequency - cavity)),
            num(p.content),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `resonance_flag` is `resonant` or `nonresonant` at the grid point nearest
/// a root of δ(ω) = (ω − ω_c)/Ω², empty elsewhere.
pub(super) fn laplace(path: &Path, s: &LaplaceSpectrum) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "omega_minus_omega_c_over_2pi_mhz",
        "delta",
        "U",
        "resonance_flag",
    ])?;
    let flags = s.flags();
    for (((omega, delta), u), flag) in s.omega.iter().zip(&s.delta).zip(&s.u).zip(flags) {
        let flag = match flag {
            Some(r) if r.resonant => "resonant",
            Some(_) => "nonresonant",
            None => "",
        };
        w.write_record([
            num(units::to_mhz(omega - s.cavity)),
            num(*delta),
            num(*u),
            flag.into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn sensitivity(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "shift_fraction",
        "late_envelope_ratio",
        "relative_to_unshifted",
    ])?;
    for r in rows {
        w.write_record([num(r.shift), num(r.late_ratio), num(r.relative)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [
            0.0,
            1.0,
            -2.5,
            1e-9,
            3.14159e12,
            0.123456789012345,
            -7.5e-300,
        ] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(400.0), "400");
        assert_eq!(num(2e-7), "2e-7");
    }
}
