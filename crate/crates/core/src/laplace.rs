//! Frequency-domain view of the single-photon problem: the nonlinear Lamb
//! shift
//!
//! ```text
//! δ(ω) = P∫ F(ω̃) / (ω − ω̃) dω̃
//! ```
//!
//! the branch-cut kernel U(ω), the graphical resonance condition
//! `δ(ω) = (ω − ω_c)/Ω²`, and the reconstruction of A(t) from the cut.
//!
//! With `X = ω − ω_c − Ω²δ(ω)`, the Laplace transform of A jumps across the
//! cut `Re s = −γ` by `2πΩ²·U_c(ω)` where
//!
//! ```text
//! U_c(ω) = F / [π²Ω⁴F² − (κ − γ − iX)²]
//! ```
//!
//! For κ = γ this is the real kernel `F / (X² + π²Ω⁴F²)`. The reported U uses
//! the real grouping `F / (X² + (κ − γ + πΩ²F)²)`; A(t) uses `U_c` so that it
//! is exact for any κ, γ when the transform has no poles.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dynamics::{DriveSignal, Excitation, Solver, SystemParams, TimeGrid, Trajectory};
use crate::quadrature::{GaussLegendre, NodeSet, NodeSetOptions};
use crate::spectral::SpectralFunction;
use crate::{units, Error, Result};

/// Panel order of the principal-value rule.
const ORDER: usize = 12;
/// Maximum distance between a root of the resonance condition and a maximum
/// of U for the root to count as resonant, /2π.
const RESONANCE_MATCH_MHZ: f64 = 1.0;

/// Principal-value integrals against F, on a composite Gauss-Legendre rule
/// adapted to F once.
#[derive(Debug, Clone)]
pub struct LambShift {
    f: SpectralFunction,
    rule: GaussLegendre,
    panels: Vec<(f64, f64)>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl LambShift {
    pub fn new(f: &SpectralFunction) -> Result<Self> {
        let (a, b) = f.window();
        let opts = NodeSetOptions {
            order: ORDER,
            max_width: (4.0 * f.finest_scale()).min((b - a) / 64.0),
            abs_tol: 1e-13 * f.total_weight(),
            breakpoints: f.features(),
            ..Default::default()
        };
        let set = NodeSet::adaptive(|w| f.eval(w), a, b, &opts)?;
        let values = set.nodes.iter().map(|&w| f.eval(w)).collect();
        Ok(Self {
            f: f.clone(),
            rule: GaussLegendre::new(ORDER),
            panels: set.panels,
            nodes: set.nodes,
            weights: set.weights,
            values,
        })
    }

    pub fn spectral(&self) -> &SpectralFunction {
        &self.f
    }

    /// δ(ω). Inside the window the singularity is subtracted,
    /// `∫[F(ω̃) − F(ω)]/(ω − ω̃) dω̃ + F(ω)·ln|(ω − a)/(b − ω)|`, and the panel
    /// holding ω is split there. Outside the window the integral is regular.
    pub fn eval(&self, omega: f64) -> f64 {
        let (a, b) = self.f.window();
        if !(omega > a && omega < b) {
            return self
                .nodes
                .iter()
                .zip(&self.weights)
                .zip(&self.values)
                .map(|((&x, &w), &v)| w * v / (omega - x))
                .sum();
        }
        let f0 = self.f.eval(omega);
        let q = |x: f64, v: f64| (v - f0) / (omega - x);
        let p = self
            .panels
            .partition_point(|&(_, r)| r <= omega)
            .min(self.panels.len() - 1);
        let (l, r) = self.panels[p];
        let per = self.rule.len();
        let mut sum = 0.0;
        for (k, (&x, (&w, &v))) in self
            .nodes
            .iter()
            .zip(self.weights.iter().zip(&self.values))
            .enumerate()
        {
            if k / per != p {
                sum += w * q(x, v);
            }
        }
        for (lo, hi) in [(l, omega), (omega, r)] {
            // a sliver next to a panel edge contributes ~F'·width
            if hi - lo > 1e-9 * (r - l) {
                sum += self.rule.integrate(lo, hi, |x| q(x, self.f.eval(x)));
            }
        }
        sum + f0 * ((omega - a) / (b - omega)).abs().ln()
    }
}

/// δ(ω) for a single frequency. Builds the quadrature rule each call; use
/// [`LambShift`] for many frequencies.
pub fn lamb_shift(f: &SpectralFunction, omega: f64) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::param("Lamb shift frequency must be finite"));
    }
    Ok(LambShift::new(f)?.eval(omega))
}

/// Real kernel `U = F / [(ω − ω_c − Ω²δ)² + (κ − γ + πΩ²F)²]` from known
/// F(ω) and δ(ω).
fn u_real(offset: f64, fw: f64, delta: f64, coupling_sq: f64, p: &SystemParams) -> f64 {
    if fw == 0.0 {
        return 0.0;
    }
    let x = offset - coupling_sq * delta;
    let y = p.kappa - p.gamma + PI * coupling_sq * fw;
    fw / (x * x + y * y)
}

/// Complex kernel `U_c` whose transform gives A(t) exactly.
fn u_complex(offset: f64, fw: f64, delta: f64, coupling_sq: f64, p: &SystemParams) -> Complex64 {
    if fw == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let x = offset - coupling_sq * delta;
    let z = Complex64::new(p.kappa - p.gamma, -x);
    let pf = PI * coupling_sq * fw;
    fw / (pf * pf - z * z)
}

/// U(ω) with the real grouping; non-negative.
pub fn kernel_u(f: &SpectralFunction, p: &SystemParams, omega: f64) -> Result<f64> {
    p.validate()?;
    p.check_cavity(f.cavity())?;
    let delta = lamb_shift(f, omega)?;
    Ok(u_real(
        omega - p.cavity,
        f.eval(omega),
        delta,
        f.coupling().powi(2),
        p,
    ))
}

/// A root of `δ(ω) − (ω − ω_c)/Ω²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub frequency: f64,
    /// U has a local maximum within 1 MHz of the root.
    pub resonant: bool,
}

/// δ, U and the resonance roots sampled on a frequency grid.
#[derive(Debug, Clone)]
pub struct LaplaceSpectrum {
    pub omega: Vec<f64>,
    pub delta: Vec<f64>,
    pub u: Vec<f64>,
    pub resonances: Vec<Resonance>,
    pub cavity: f64,
    pub coupling: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl LaplaceSpectrum {
    /// Grid frequencies at interior local maxima of U.
    pub fn u_maxima(&self) -> Vec<f64> {
        local_maxima(&self.u)
            .into_iter()
            .map(|i| self.omega[i])
            .collect()
    }

    pub fn resonant_count(&self) -> usize {
        self.resonances.iter().filter(|r| r.resonant).count()
    }

    /// Per grid point: the resonance whose root is closest to this point,
    /// if the root lies within half a grid cell.
    pub fn flags(&self) -> Vec<Option<Resonance>> {
        let mut out = vec![None; self.omega.len()];
        for r in &self.resonances {
            let i = self.omega.partition_point(|&w| w < r.frequency);
            let best = [i.saturating_sub(1), i.min(self.omega.len() - 1)]
                .into_iter()
                .min_by(|&x, &y| {
                    (self.omega[x] - r.frequency)
                        .abs()
                        .total_cmp(&(self.omega[y] - r.frequency).abs())
                });
            if let Some(j) = best {
                out[j] = Some(*r);
            }
        }
        out
    }
}

fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect()
}

/// Default spectrum grid: the truncation window sampled every 0.02 MHz.
pub fn default_frequency_grid(f: &SpectralFunction) -> Vec<f64> {
    let (a, b) = f.window();
    let h = units::mhz(0.02);
    let n = ((b - a) / h).ceil() as usize;
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Samples δ and U on `grid` and locates the resonance roots.
pub fn laplace_spectrum(
    f: &SpectralFunction,
    p: &SystemParams,
    grid: &[f64],
) -> Result<LaplaceSpectrum> {
    p.validate()?;
    p.check_cavity(f.cavity())?;
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param(
            "frequency grid needs at least three increasing points",
        ));
    }
    let ls = LambShift::new(f)?;
    let omega2 = f.coupling().powi(2);
    let delta: Vec<f64> = grid.iter().map(|&w| ls.eval(w)).collect();
    let u: Vec<f64> = grid
        .iter()
        .zip(&delta)
        .map(|(&w, &d)| u_real(w - p.cavity, f.eval(w), d, omega2, p))
        .collect();
    if let Some(i) = delta.iter().chain(&u).position(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            index: Some(i % grid.len()),
            message: "Lamb shift or kernel is not finite".into(),
        });
    }
    let mut spec = LaplaceSpectrum {
        omega: grid.to_vec(),
        delta,
        u,
        resonances: Vec::new(),
        cavity: p.cavity,
        coupling: f.coupling(),
        kappa: p.kappa,
        gamma: p.gamma,
    };
    spec.resonances = roots(&ls, &spec)?;
    Ok(spec)
}

fn roots(ls: &LambShift, spec: &LaplaceSpectrum) -> Result<Vec<Resonance>> {
    let omega2 = spec.coupling * spec.coupling;
    if omega2 == 0.0 {
        return Err(Error::Regime(
            "no coupling: the resonance line is vertical and only the bare cavity remains".into(),
        ));
    }
    let h = |w: f64, d: f64| d - (w - spec.cavity) / omega2;
    let maxima = spec.u_maxima();
    let reach = units::mhz(RESONANCE_MATCH_MHZ);
    let mut out = Vec::new();
    let vals: Vec<f64> = spec
        .omega
        .iter()
        .zip(&spec.delta)
        .map(|(&w, &d)| h(w, d))
        .collect();
    for i in 0..vals.len() - 1 {
        let (mut lo, mut hi) = (spec.omega[i], spec.omega[i + 1]);
        let (h0, h1) = (vals[i], vals[i + 1]);
        let root = if h0 == 0.0 {
            lo
        } else if h0 * h1 < 0.0 {
            let mut hlo = h0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let hm = h(mid, ls.eval(mid));
                if hm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (hm < 0.0) == (hlo < 0.0) {
                    lo = mid;
                    hlo = hm;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        } else {
            continue;
        };
        let resonant = maxima.iter().any(|&m| (m - root).abs() <= reach);
        out.push(Resonance {
            frequency: root,
            resonant,
        });
    }
    if out.is_empty() {
        return Err(Error::Regime(
            "the resonance condition has no root on the sampled grid".into(),
        ));
    }
    Ok(out)
}

/// Roots of the resonance condition with their classification.
pub fn find_resonances(f: &SpectralFunction, p: &SystemParams) -> Result<Vec<Resonance>> {
    Ok(laplace_spectrum(f, p, &default_frequency_grid(f))?.resonances)
}

/// `(∫₀¹(1−s)e^{cs}ds, ∫₀¹ s e^{cs}ds)` for `c = −iθ`.
fn filon_weights(theta: f64) -> (Complex64, Complex64) {
    let c = Complex64::new(0.0, -theta);
    if theta.abs() < 0.5 {
        // Σ cⁿ/(n+2)! and Σ cⁿ/(n!(n+2))
        let (mut a, mut b) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for n in 0..14 {
            if n > 0 {
                pow *= c;
                fact *= n as f64;
            }
            a += pow / (fact * (n as f64 + 1.0) * (n as f64 + 2.0));
            b += pow / (fact * (n as f64 + 2.0));
        }
        (a, b)
    } else {
        let e = c.exp();
        let b = (e * (c - 1.0) + 1.0) / (c * c);
        let a = (e - 1.0) / c - b;
        (a, b)
    }
}

/// A(t) = Ω² e^{−γt} ∫ U_c(ω) e^{−i(ω−ω_c)t} dω for A(0) = 1, unexcited
/// spins and no drive.
pub fn amplitude_from_laplace(
    f: &SpectralFunction,
    p: &SystemParams,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    laplace_response(f, p, &DriveSignal::zero(), Complex64::new(1.0, 0.0), grid)
}

/// Branch-cut solution for initial amplitude `a0`, unexcited spins and a
/// rectangular drive.
///
/// The drive enters through the transform of `V = U_c / (γ + i(ω − ω_p))`:
/// a pulse of amplitude η on `[t₀, t₁]` contributes
/// `−η[e^{−iΔ_pτ} e^{−γ(t−τ)} T_V(t−τ)]` evaluated between `τ = t₀` and
/// `τ = min(t, t₁)`, with `T_V(s) = Ω²∫V e^{−i(ω−ω_c)s} dω`.
///
/// Kernels are sampled on an adaptive piecewise-linear grid and the time
/// integrals use Filon weights on each interval, so any t is exact up to
/// the interpolation error.
pub fn laplace_response(
    f: &SpectralFunction,
    p: &SystemParams,
    drive: &DriveSignal,
    a0: Complex64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if f.has_holes() {
        return Err(Error::Unsupported(
            "the branch-cut reconstruction omits pole contributions, which holes create; use the ode or volterra solver"
                .into(),
        ));
    }
    p.validate()?;
    p.check_cavity(f.cavity())?;
    let driven = !drive.is_zero();
    if driven && p.gamma == 0.0 {
        return Err(Error::Unsupported(
            "the driven branch-cut response needs γ > 0; use the ode or volterra solver".into(),
        ));
    }
    let omega2 = f.coupling().powi(2);
    let det_p = p.carrier_detuning();
    if omega2 == 0.0 {
        // no cut: the bare cavity
        let amplitude = grid
            .times()
            .map(|t| a0 * (-p.kappa * t).exp() - drive.filtered(t, p.kappa, det_p))
            .collect();
        return Ok(response(grid, amplitude, a0, driven));
    }

    let cut = CutSamples::new(f, p, grid.end(), driven)?;
    // T_U and T_V at every grid lag s_j = j·h
    let lags = cut.transforms(grid, driven);
    let h = grid.step();
    let transform = |which: usize, s: f64| -> Complex64 {
        let j = (s / h).round();
        if (s - j * h).abs() <= 1e-9 * h && (j as usize) < grid.len() {
            lags[which][j as usize]
        } else {
            omega2 * cut.filon(if which == 0 { &cut.u } else { &cut.v }, s)
        }
    };
    let mut amplitude = Vec::with_capacity(grid.len());
    for (n, t) in grid.times().enumerate() {
        let mut a = Complex64::new(0.0, 0.0);
        if a0 != Complex64::new(0.0, 0.0) {
            a += a0 * (-p.gamma * t).exp() * lags[0][n];
        }
        for pulse in drive.pulses() {
            if t <= pulse.start {
                continue;
            }
            let term = |tau: f64| {
                let s = t - tau;
                Complex64::from_polar(1.0, -det_p * tau) * (-p.gamma * s).exp() * transform(1, s)
            };
            a -= pulse.amplitude * (term(t.min(pulse.end())) - term(pulse.start));
        }
        if !a.re.is_finite() || !a.im.is_finite() {
            return Err(Error::Numeric {
                index: Some(n),
                message: format!("branch-cut integral is not finite at t = {t} μs"),
            });
        }
        amplitude.push(a);
    }
    Ok(response(grid, amplitude, a0, driven))
}

fn response(grid: &TimeGrid, amplitude: Vec<Complex64>, a0: Complex64, driven: bool) -> Trajectory {
    Trajectory {
        grid: *grid,
        amplitude,
        spin_population: None,
        spins: None,
        solver: Solver::Laplace,
        excitation: Excitation::classify(a0, false, driven),
    }
}

/// U_c, and V when driven, sampled on a shared piecewise-linear grid.
struct CutSamples {
    xs: Vec<f64>,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    cavity: f64,
    coupling_sq: f64,
}

impl CutSamples {
    /// Uniform start grid with at least 20 points per period of e^{−iωt_max},
    /// bisected until linear interpolation reproduces each midpoint to 1e−7
    /// of the sampled maximum.
    fn new(f: &SpectralFunction, p: &SystemParams, t_max: f64, driven: bool) -> Result<Self> {
        let ls = LambShift::new(f)?;
        let omega2 = f.coupling().powi(2);
        let det_p = p.carrier_detuning();
        let sample = |w: f64| {
            let u = u_complex(w - p.cavity, f.eval(w), ls.eval(w), omega2, p);
            let v = if driven {
                u / Complex64::new(p.gamma, w - p.cavity - det_p)
            } else {
                Complex64::new(0.0, 0.0)
            };
            (u, v)
        };
        let (a, b) = f.window();
        let mut h = units::mhz(0.1);
        if t_max > 0.0 {
            h = h.min(2.0 * PI / (20.0 * t_max));
        }
        let n = ((b - a) / h).ceil() as usize;
        let mut xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let mut vals: Vec<(Complex64, Complex64)> = xs.iter().map(|&w| sample(w)).collect();
        let min_width = units::mhz(1e-5);

        for _ in 0..40 {
            let su = vals.iter().map(|x| x.0.norm()).fold(0.0, f64::max);
            let sv = vals.iter().map(|x| x.1.norm()).fold(0.0, f64::max);
            let mut nx = Vec::with_capacity(xs.len() * 2);
            let mut nv = Vec::with_capacity(xs.len() * 2);
            let mut refined = false;
            for k in 0..xs.len() - 1 {
                nx.push(xs[k]);
                nv.push(vals[k]);
                if xs[k + 1] - xs[k] <= min_width {
                    continue;
                }
                let mid = 0.5 * (xs[k] + xs[k + 1]);
                let m = sample(mid);
                let eu = (m.0 - 0.5 * (vals[k].0 + vals[k + 1].0)).norm();
                let ev = (m.1 - 0.5 * (vals[k].1 + vals[k + 1].1)).norm();
                if eu > 1e-7 * su || ev > 1e-7 * sv {
                    nx.push(mid);
                    nv.push(m);
                    refined = true;
                }
            }
            nx.push(xs[xs.len() - 1]);
            nv.push(vals[vals.len() - 1]);
            xs = nx;
            vals = nv;
            if !refined {
                let (u, v) = vals.into_iter().unzip();
                return Ok(Self {
                    xs,
                    u,
                    v,
                    cavity: p.cavity,
                    coupling_sq: omega2,
                });
            }
        }
        Err(Error::Accuracy {
            achieved: f64::NAN,
            requested: 1e-7,
        })
    }

    /// ∫ y(ω) e^{−i(ω−ω_c)s} dω for the linear interpolant of `y`.
    fn filon(&self, y: &[Complex64], s: f64) -> Complex64 {
        let xs = &self.xs;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut phase = Complex64::from_polar(1.0, -(xs[0] - self.cavity) * s);
        for k in 0..xs.len() - 1 {
            let h = xs[k + 1] - xs[k];
            let (wa, wb) = filon_weights(h * s);
            acc += h * phase * (y[k] * wa + y[k + 1] * wb);
            phase = Complex64::from_polar(1.0, -(xs[k + 1] - self.cavity) * s);
        }
        acc
    }

    /// `Ω²·filon` of U (and V when `driven`) at every lag `j·h` of `grid`.
    /// Node phasors advance by a fixed rotation per step and are recomputed
    /// exactly every 256 steps.
    fn transforms(&self, grid: &TimeGrid, driven: bool) -> [Vec<Complex64>; 2] {
        let omega2 = self.coupling_sq;
        let xs = &self.xs;
        let h = grid.step();
        let offsets: Vec<f64> = xs.iter().map(|x| x - self.cavity).collect();
        let rot: Vec<Complex64> = offsets
            .iter()
            .map(|&d| Complex64::from_polar(1.0, -d * h))
            .collect();
        let mut ph: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); xs.len()];
        let mut out_u = Vec::with_capacity(grid.len());
        let mut out_v = Vec::with_capacity(if driven { grid.len() } else { 0 });
        for j in 0..grid.len() {
            let s = grid.time(j);
            if j % 256 == 0 {
                for (p, &d) in ph.iter_mut().zip(&offsets) {
                    *p = Complex64::from_polar(1.0, -d * s);
                }
            }
            let (mut au, mut av) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for k in 0..xs.len() - 1 {
                let w = xs[k + 1] - xs[k];
                let theta = w * s;
                // P_k·a and P_k·b, the Filon weights times the left phasor
                let (pa, pb) = if theta.abs() < 0.5 {
                    let (a, b) = filon_weights(theta);
                    (ph[k] * a, ph[k] * b)
                } else {
                    let c = Complex64::new(0.0, -theta);
                    let pb = -(ph[k + 1] * (c - 1.0) + ph[k]) / (theta * theta);
                    let pa = Complex64::new(0.0, 1.0 / theta) * (ph[k + 1] - ph[k]) - pb;
                    (pa, pb)
                };
                au += w * (self.u[k] * pa + self.u[k + 1] * pb);
                if driven {
                    av += w * (self.v[k] * pa + self.v[k + 1] * pb);
                }
            }
            out_u.push(omega2 * au);
            if driven {
                out_v.push(omega2 * av);
            }
            for (p, r) in ph.iter_mut().zip(&rot) {
                *p *= r;
            }
        }
        [out_u, out_v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{apply_holes, build_spectral_function, CombConfig, HoleSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn comb(coupling_mhz: f64) -> SpectralFunction {
        build_spectral_function(&CombConfig::reference(coupling_mhz)).unwrap()
    }

    fn single_line() -> SpectralFunction {
        let mut cfg = CombConfig::reference(8.0);
        cfg.ensembles = 1;
        build_spectral_function(&cfg).unwrap()
    }

    /// Brute-force PV: paired midpoint sum over `[ε, R]` of
    /// `[F(ω−u) − F(ω+u)]/u`, plus the unpaired remainder, extrapolated to
    /// ε → 0 (odd powers of ε).
    pub(crate) fn brute_force_pv(f: &SpectralFunction, omega: f64, h: f64) -> f64 {
        let (a, b) = f.window();
        let r = (omega - a).min(b - omega);
        let paired = |lo: f64| {
            let n = ((r - lo) / h).floor() as usize;
            let mut s = 0.0;
            for k in 0..n {
                let u = lo + (k as f64 + 0.5) * h;
                s += (f.eval(omega - u) - f.eval(omega + u)) / u;
            }
            // leftover sliver up to R
            let tail_lo = lo + n as f64 * h;
            if r > tail_lo {
                let u = 0.5 * (tail_lo + r);
                s += (f.eval(omega - u) - f.eval(omega + u)) / u * (r - tail_lo) / h;
            }
            s * h
        };
        let (ra, rb) = if omega - a > b - omega {
            (a, omega - r)
        } else {
            (omega + r, b)
        };
        let n = ((rb - ra) / h).ceil() as usize;
        let hh = (rb - ra) / n as f64;
        let rest: f64 = (0..n)
            .map(|k| {
                let x = ra + (k as f64 + 0.5) * hh;
                f.eval(x) / (omega - x)
            })
            .sum::<f64>()
            * hh;
        let eps = [64.0 * h, 32.0 * h, 16.0 * h];
        let i: Vec<f64> = eps.iter().map(|&e| paired(e)).collect();
        let r1 = [2.0 * i[1] - i[0], 2.0 * i[2] - i[1]];
        let r2 = (8.0 * r1[1] - r1[0]) / 7.0;
        r2 + rest
    }

    #[test]
    fn symmetric_comb_has_odd_lamb_shift() {
        let f = comb(26.0);
        let ls = LambShift::new(&f).unwrap();
        let c = f.cavity();
        let scale = ls.eval(c + units::mhz(5.0)).abs();
        assert!(ls.eval(c).abs() < 1e-8 * scale);
        for x in [0.3, 7.0, 33.3, 95.0, 250.0] {
            let (p, m) = (ls.eval(c + units::mhz(x)), ls.eval(c - units::mhz(x)));
            assert!((p + m).abs() < 1e-8 * p.abs().max(scale), "{x}: {p} {m}");
        }
    }

    #[test]
    fn far_field_is_a_monopole() {
        let f = comb(26.0);
        let ls = LambShift::new(&f).unwrap();
        // five comb half-widths away, outside the window
        for x in [-625.0, 625.0] {
            let w = f.cavity() + units::mhz(x);
            let want = f.total_weight() / (w - f.cavity());
            assert!((ls.eval(w) / want - 1.0).abs() < 0.05);
        }
        // a single line far in its tail
        let g = single_line();
        let ls = LambShift::new(&g).unwrap();
        let w = g.cavity() + units::mhz(250.0);
        assert!((ls.eval(w) * (w - g.cavity()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn matches_brute_force_on_random_frequencies() {
        let f = comb(26.0);
        let ls = LambShift::new(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scale = (0..200)
            .map(|i| {
                ls.eval(f.cavity() + units::mhz(-150.0 + 1.5 * i as f64))
                    .abs()
            })
            .fold(0.0, f64::max);
        for _ in 0..5 {
            let w = f.cavity() + units::mhz(rng.random_range(-150.0..150.0));
            let bf = brute_force_pv(&f, w, units::mhz(0.002));
            let d = ls.eval(w);
            assert!(
                (d - bf).abs() < 1e-6 * bf.abs().max(1e-2 * scale),
                "{d} vs {bf}"
            );
        }
    }

    #[test]
    fn matches_fft_hilbert_transform() {
        use rustfft::FftPlanner;
        let f = comb(26.0);
        let ls = LambShift::new(&f).unwrap();
        let (a, b) = f.window();
        let n = 1 << 14;
        let h = (b - a) / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| a + (i as f64 + 0.5) * h).collect();
        // δ_i = 2 Σ_{j: i−j odd} F_j h / (x_i − x_j), as a linear convolution
        let m = 2 * n;
        let mut sig: Vec<Complex64> = (0..m)
            .map(|i| Complex64::new(if i < n { f.eval(xs[i]) } else { 0.0 }, 0.0))
            .collect();
        let mut ker: Vec<Complex64> = (0..m)
            .map(|i| {
                let k = if i < n { i as i64 } else { i as i64 - m as i64 };
                let v = if k % 2 != 0 { 2.0 / k as f64 } else { 0.0 };
                Complex64::new(v, 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        fwd.process(&mut sig);
        fwd.process(&mut ker);
        let mut conv: Vec<Complex64> = sig.iter().zip(&ker).map(|(s, k)| s * k).collect();
        inv.process(&mut conv);
        let scale = conv
            .iter()
            .take(n)
            .map(|c| c.re.abs() / m as f64)
            .fold(0.0, f64::max);
        for i in (n / 8..7 * n / 8).step_by(97) {
            let oracle = conv[i].re / m as f64;
            let d = ls.eval(xs[i]);
            assert!(
                (d - oracle).abs() < 1e-4 * oracle.abs().max(1e-2 * scale),
                "{i}: {d} vs {oracle}"
            );
        }
    }

    #[test]
    fn kernel_is_nonnegative_and_vanishes_in_full_holes() {
        let p = SystemParams::reference();
        let f = comb(26.0);
        let hole = f.cavity() + units::mhz(17.5);
        let burnt = apply_holes(&f, &HoleSpec::new(vec![hole], units::mhz(0.47))).unwrap();
        assert_eq!(kernel_u(&burnt, &p, hole).unwrap(), 0.0);
        let grid: Vec<f64> = (0..400)
            .map(|i| f.cavity() + units::mhz(-200.0 + i as f64))
            .collect();
        let s = laplace_spectrum(&burnt, &p, &grid).unwrap();
        assert!(s.u.iter().all(|&u| u >= 0.0));
    }

    #[test]
    fn weak_coupling_has_one_resonance() {
        let p = SystemParams::reference();
        let r = find_resonances(&comb(1.0), &p).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].resonant);
        assert!((r[0].frequency - p.cavity).abs() < units::mhz(0.01));
    }

    #[test]
    fn rabi_pair_has_two_resonances() {
        let p = SystemParams::reference();
        let r = find_resonances(&comb(8.0), &p).unwrap();
        let resonant: Vec<f64> = r
            .iter()
            .filter(|x| x.resonant)
            .map(|x| units::to_mhz(x.frequency - p.cavity))
            .collect();
        assert_eq!(r.len(), 3);
        assert_eq!(resonant.len(), 2);
        assert!((resonant[0] + resonant[1]).abs() < 1e-6);
    }

    #[test]
    fn driven_response_tracks_the_ode() {
        use crate::dynamics::{integrate_ode, rectangular_drive, OdeOptions};
        use crate::spectral::discretize_full;
        let p = SystemParams::reference();
        let f = comb(8.0);
        let grid = TimeGrid::until(units::ns(0.5), 0.08).unwrap();
        let drive =
            rectangular_drive(units::ns(2.0), units::ns(6.0), Complex64::new(1.0, 0.0)).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let lap = laplace_response(&f, &p, &drive, zero, &grid).unwrap();
        assert_eq!(lap.excitation, Excitation::Driven);
        assert_eq!(lap.amplitude[0], zero);
        let ens = discretize_full(&f, 1200).unwrap();
        let ode =
            integrate_ode(&ens, &p, &drive, zero, None, &grid, &OdeOptions::default()).unwrap();
        let dev = ode.deviation(&lap, grid.len()).unwrap();
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn filon_weights_are_continuous() {
        for theta in [0.4999999, 0.5, -0.5000001] {
            let (a, b) = filon_weights(theta);
            let c = Complex64::new(0.0, -theta);
            let e = c.exp();
            let bx = (e * (c - 1.0) + 1.0) / (c * c);
            let ax = (e - 1.0) / c - bx;
            assert!((a - ax).norm() < 1e-12 && (b - bx).norm() < 1e-12);
        }
        let (a, b) = filon_weights(0.0);
        assert!((a.re - 0.5).abs() < 1e-15 && (b.re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn holes_are_rejected() {
        let f = comb(26.0);
        let burnt = apply_holes(&f, &HoleSpec::new(vec![f.cavity()], units::mhz(0.47))).unwrap();
        let grid = TimeGrid::new(1e-3, 10).unwrap();
        let p = SystemParams::reference();
        assert!(matches!(
            amplitude_from_laplace(&burnt, &p, &grid),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn starts_at_one_and_tracks_the_ode() {
        use crate::dynamics::{integrate_ode, DriveSignal, OdeOptions};
        use crate::spectral::discretize_full;
        let p = SystemParams::reference();
        let f = comb(8.0);
        let grid = TimeGrid::until(units::ns(0.5), 0.1).unwrap();
        let lap = amplitude_from_laplace(&f, &p, &grid).unwrap();
        assert!(
            (lap.amplitude[0] - 1.0).norm() < 1e-4,
            "{}",
            lap.amplitude[0]
        );
        let ens = discretize_full(&f, 1200).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let ode = integrate_ode(
            &ens,
            &p,
            &DriveSignal::zero(),
            one,
            None,
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        let dev = ode.deviation(&lap, grid.len()).unwrap();
        assert!(dev < 1e-3, "{dev}");
    }
}
