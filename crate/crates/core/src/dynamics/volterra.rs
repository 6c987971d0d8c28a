//! Product integration of
//!
//! ```text
//! A(t) = ∫₀ᵗ K(t−τ) A(τ) dτ + D(t),
//! D(t) = A₀e^{−κt} − ∫₀ᵗ η(τ) e^{−iΔ_pτ} e^{−κ(t−τ)} dτ
//! ```
//!
//! The history integral uses fourth-order Gregory weights, restarted at every
//! drive edge because A has a derivative jump there. K(0) = 0 removes the
//! weight on the unknown A(t_n). A segment that is a single step long uses a
//! Hermite rule with the known end slope `−K'(0)·A(t_n)` of the integrand,
//! which leaves a scalar linear equation for A(t_n).

use num_complex::Complex64;

use super::drive::DriveSignal;
use super::kernel::{volterra_kernel, Kernel};
use super::trajectory::{Excitation, Solver, TimeGrid, Trajectory};
use super::SystemParams;
use crate::spectral::SpectralFunction;
use crate::{Error, Result};

/// Gregory end weights minus one, applied at each end of a segment.
const GREGORY_END: [f64; 3] = [-5.0 / 8.0, 1.0 / 6.0, -1.0 / 24.0];

/// Solves the single-cavity Volterra equation for a continuous density.
pub fn solve_volterra(
    f: &SpectralFunction,
    p: &SystemParams,
    drive: &DriveSignal,
    a0: Complex64,
    b0: Option<&[Complex64]>,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if b0.is_some_and(|b| b.iter().any(|x| x.norm_sqr() > 0.0)) {
        return Err(Error::Unsupported(
            "the integral equation assumes unexcited spins at t = 0; use the ODE route for excited spins"
                .into(),
        ));
    }
    p.validate()?;
    p.check_cavity(f.cavity())?;
    let kernel = volterra_kernel(f, p, grid)?;
    solve_volterra_with_kernel(&kernel, p, drive, a0, grid)
}

/// Solves with precomputed kernel samples on the same step as `grid`.
pub fn solve_volterra_with_kernel(
    kernel: &Kernel,
    p: &SystemParams,
    drive: &DriveSignal,
    a0: Complex64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    p.validate()?;
    let h = grid.step();
    let total = grid.steps();
    if (kernel.step - h).abs() > 1e-12 * h || kernel.len() < total + 1 {
        return Err(Error::param(format!(
            "kernel covers {} lags of {} μs; need {} lags of {h} μs",
            kernel.len(),
            kernel.step,
            total + 1
        )));
    }
    let breaks = grid_breakpoints(drive, grid)?;

    // reversed kernel so the history sum is a contiguous dot product
    let mut krev_re = vec![0.0; total + 1];
    let mut krev_im = vec![0.0; total + 1];
    for m in 0..=total {
        let k = kernel.samples[total - m];
        krev_re[m] = k.re;
        krev_im[m] = k.im;
    }
    let mut a_re = vec![0.0; total + 1];
    let mut a_im = vec![0.0; total + 1];
    a_re[0] = a0.re;
    a_im[0] = a0.im;

    let det_p = p.carrier_detuning();
    let forcing = |t: f64| a0 * (-p.kappa * t).exp() - drive.filtered(t, p.kappa, det_p);

    let mut corrections: Vec<(usize, f64)> = Vec::new();
    for n in 1..=total {
        let off = total - n;
        // Σ_{k<n} K_{n−k} A_k; the k = n term has K_0 = 0
        let mut sum = dot(
            &krev_re[off..off + n],
            &krev_im[off..off + n],
            &a_re[..n],
            &a_im[..n],
        );

        segment_corrections(&breaks, n, &mut corrections);
        for &(k, c) in &corrections {
            if k < n {
                let kk = kernel.samples[n - k];
                sum += c * kk * Complex64::new(a_re[k], a_im[k]);
            }
        }
        let single = n == 1 || breaks.binary_search(&(n - 1)).is_ok();
        let a = if single {
            // ∫ over the last step ≈ h·f₀/3 − h²·f'(t_n)/6, f'(t_n) = −K'(0)·A_n
            (h * sum + forcing(grid.time(n))) / (1.0 - h * h * kernel.initial_slope / 6.0)
        } else {
            h * sum + forcing(grid.time(n))
        };
        if !a.re.is_finite() || !a.im.is_finite() {
            return Err(Error::Numeric {
                index: Some(n),
                message: "Volterra solution diverged".into(),
            });
        }
        a_re[n] = a.re;
        a_im[n] = a.im;
    }

    let amplitude = a_re
        .iter()
        .zip(&a_im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    Ok(Trajectory {
        grid: *grid,
        amplitude,
        spin_population: None,
        spins: None,
        solver: Solver::Volterra,
        excitation: Excitation::classify(a0, false, !drive.is_zero()),
    })
}

/// Grid indices of drive edges strictly inside the grid. Edges must lie on
/// grid points so each segment is smooth.
fn grid_breakpoints(drive: &DriveSignal, grid: &TimeGrid) -> Result<Vec<usize>> {
    let h = grid.step();
    let mut out = Vec::new();
    for e in drive.edges() {
        if e <= 0.0 || e >= grid.end() {
            continue;
        }
        let k = (e / h).round();
        if (e - k * h).abs() > 1e-6 * h {
            return Err(Error::param(format!(
                "drive edge at {:.6} ns is not on the {:.6} ns time grid",
                e * 1e3,
                h * 1e3
            )));
        }
        out.push(k as usize);
    }
    out.dedup();
    Ok(out)
}

/// Weight corrections (relative to 1) for integrating over `[0, t_n]` with
/// segments split at `breaks`.
fn segment_corrections(breaks: &[usize], n: usize, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let mut lo = 0;
    let inner = breaks.iter().copied().filter(|&b| b > 0 && b < n);
    for hi in inner.chain(std::iter::once(n)) {
        segment_weights(lo, hi, out);
        lo = hi;
    }
    // a shared breakpoint got two segment weights but only one unit of bulk
    out.sort_by_key(|&(k, _)| k);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
    for &(k, w) in out.iter() {
        match merged.last_mut() {
            Some((j, acc)) if *j == k => *acc += w,
            _ => merged.push((k, w)),
        }
    }
    out.clear();
    out.extend(
        merged
            .into_iter()
            .map(|(k, w)| (k, w - 1.0))
            .filter(|&(_, c)| c != 0.0),
    );
}

/// Pushes the full weights of the nodes of segment `[lo, hi]` whose weight
/// differs from one.
fn segment_weights(lo: usize, hi: usize, out: &mut Vec<(usize, f64)>) {
    let m = hi - lo;
    match m {
        0 => {}
        // the slope term at `hi` is applied by the solver
        1 => out.extend([(lo, 1.0 / 3.0), (hi, 2.0 / 3.0)]),
        2 => out.extend([(lo, 1.0 / 3.0), (lo + 1, 4.0 / 3.0), (hi, 1.0 / 3.0)]),
        3 => out.extend([
            (lo, 3.0 / 8.0),
            (lo + 1, 9.0 / 8.0),
            (lo + 2, 9.0 / 8.0),
            (hi, 3.0 / 8.0),
        ]),
        _ => {
            let mut w = [1.0; 6];
            let zone: Vec<usize> = if m >= 5 {
                vec![lo, lo + 1, lo + 2, hi - 2, hi - 1, hi]
            } else {
                vec![lo, lo + 1, lo + 2, hi - 1, hi]
            };
            for (i, &k) in zone.iter().enumerate() {
                let from_lo = k - lo;
                let from_hi = hi - k;
                let mut v = 1.0;
                if from_lo < 3 {
                    v += GREGORY_END[from_lo];
                }
                if from_hi < 3 {
                    v += GREGORY_END[from_hi];
                }
                w[i] = v;
            }
            out.extend(zone.into_iter().zip(w));
        }
    }
}

/// Complex dot product on split real/imaginary arrays.
#[inline]
fn dot(xr: &[f64], xi: &[f64], yr: &[f64], yi: &[f64]) -> Complex64 {
    const LANES: usize = 8;
    let n = xr.len();
    let full = n - n % LANES;
    let mut re = [0.0f64; LANES];
    let mut im = [0.0f64; LANES];
    let mut j = 0;
    while j < full {
        for l in 0..LANES {
            let (a, b, c, d) = (xr[j + l], xi[j + l], yr[j + l], yi[j + l]);
            re[l] += a * c - b * d;
            im[l] += a * d + b * c;
        }
        j += LANES;
    }
    for j in full..n {
        re[0] += xr[j] * yr[j] - xi[j] * yi[j];
        im[0] += xr[j] * yi[j] + xi[j] * yr[j];
    }
    Complex64::new(re.iter().sum(), im.iter().sum())
}
