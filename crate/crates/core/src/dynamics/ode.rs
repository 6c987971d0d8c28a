use num_complex::Complex64;

use super::drive::DriveSignal;
use super::trajectory::{Excitation, Solver, TimeGrid, Trajectory};
use super::SystemParams;
use crate::spectral::DiscreteEnsemble;
use crate::{Error, Result};

/// Phase advance per internal step targeted by the automatic substep choice.
const AUTO_PHASE_STEP: f64 = 0.01;
/// Stability limit on h·max|ω_l − ω_c| for a user-fixed internal step.
const MAX_PHASE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct OdeOptions {
    /// RK4 steps per output interval. `None` picks enough that each step
    /// advances the fastest bin phase by at most 0.01 rad.
    pub substeps: Option<usize>,
    /// Keep every B_l(t_i) in the trajectory.
    pub record_spins: bool,
}

/// Integrates
///
/// ```text
/// Ȧ   = −κA + Σ_l g_l B_l − η(t)
/// Ḃ_l = −(γ + i(ω_l − ω_c)) B_l − g_l A
/// ```
///
/// with classical RK4. Output intervals containing a drive edge are split at
/// the edge so the piecewise-constant envelope is integrated exactly.
pub fn integrate_ode(
    ens: &DiscreteEnsemble,
    p: &SystemParams,
    drive: &DriveSignal,
    a0: Complex64,
    b0: Option<&[Complex64]>,
    grid: &TimeGrid,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    p.validate()?;
    p.check_cavity(ens.cavity())?;
    let n = ens.len();
    let mut b = match b0 {
        Some(v) if v.len() != n => {
            return Err(Error::param(format!(
                "initial spin state has {} entries for {n} bins",
                v.len()
            )))
        }
        Some(v) => v.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); n],
    };
    let spins_excited = b.iter().any(|x| x.norm_sqr() > 0.0);

    let h = grid.step();
    let max_det = ens.max_detuning();
    let substeps = match opts.substeps {
        Some(0) => return Err(Error::param("substeps must be at least 1")),
        Some(m) => {
            let res = h / m as f64 * max_det;
            if res >= MAX_PHASE_STEP {
                return Err(Error::StepSize {
                    resolution: res,
                    limit: MAX_PHASE_STEP,
                    hint: format!(
                        "use at least {} substeps or a smaller output step",
                        (h * max_det / MAX_PHASE_STEP).floor() as usize + 1
                    ),
                });
            }
            m
        }
        None => {
            let rate = max_det + ens.coupling_sq_total().sqrt() + p.kappa + p.gamma;
            ((h * rate / AUTO_PHASE_STEP).ceil() as usize).max(1)
        }
    };
    let h_int = h / substeps as f64;

    let decay: Vec<Complex64> = ens
        .detunings()
        .iter()
        .map(|d| Complex64::new(p.gamma, *d))
        .collect();
    let g = ens.couplings();
    let mut rk = Rk4::new(n);
    let edges = drive.edges();
    let det_p = p.carrier_detuning();

    let mut a = a0;
    let mut amplitude = Vec::with_capacity(grid.len());
    let mut population = Vec::with_capacity(grid.len());
    let mut spins = opts.record_spins.then(|| Vec::with_capacity(grid.len()));
    let record = |a: Complex64,
                  b: &[Complex64],
                  amplitude: &mut Vec<Complex64>,
                  population: &mut Vec<f64>,
                  spins: &mut Option<Vec<Vec<Complex64>>>| {
        amplitude.push(a);
        population.push(b.iter().map(|x| x.norm_sqr()).sum());
        if let Some(s) = spins {
            s.push(b.to_vec());
        }
    };
    record(a, &b, &mut amplitude, &mut population, &mut spins);

    let mut cuts = Vec::new();
    for i in 0..grid.steps() {
        let (t0, t1) = (grid.time(i), grid.time(i + 1));
        cuts.clear();
        cuts.push(t0);
        cuts.extend(edges.iter().copied().filter(|&e| e > t0 && e < t1));
        cuts.push(t1);
        for piece in cuts.windows(2) {
            let (lo, hi) = (piece[0], piece[1]);
            let len = hi - lo;
            let m = if len < h * (1.0 - 1e-12) {
                ((len / h_int).ceil() as usize).max(1)
            } else {
                substeps
            };
            let dt = len / m as f64;
            let envelope = drive.eval(0.5 * (lo + hi));
            for k in 0..m {
                let t = lo + k as f64 * dt;
                let eta = |s: f64| envelope * Complex64::new(0.0, -det_p * s).exp();
                let forcing = [eta(t), eta(t + 0.5 * dt), eta(t + dt)];
                rk.step(&mut a, &mut b, &decay, g, p.kappa, dt, forcing);
            }
        }
        if !a.re.is_finite() || !a.im.is_finite() {
            return Err(Error::Numeric {
                index: Some(i + 1),
                message: "cavity amplitude diverged".into(),
            });
        }
        record(a, &b, &mut amplitude, &mut population, &mut spins);
    }

    Ok(Trajectory {
        grid: *grid,
        amplitude,
        spin_population: Some(population),
        spins,
        solver: Solver::Ode,
        excitation: Excitation::classify(a0, spins_excited, !drive.is_zero()),
    })
}

/// Scratch buffers for one RK4 step of the cavity + bins system.
pub(crate) struct Rk4 {
    stage: Vec<Complex64>,
    acc: Vec<Complex64>,
    k: Vec<Complex64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            stage: vec![z; n],
            acc: vec![z; n],
            k: vec![z; n],
        }
    }

    /// Writes dB into `out` and returns dA.
    pub(crate) fn deriv(
        a: Complex64,
        b: &[Complex64],
        decay: &[Complex64],
        g: &[f64],
        kappa: f64,
        eta: Complex64,
        out: &mut [Complex64],
    ) -> Complex64 {
        let mut coupled = Complex64::new(0.0, 0.0);
        for l in 0..b.len() {
            coupled += g[l] * b[l];
            out[l] = -decay[l] * b[l] - g[l] * a;
        }
        -kappa * a + coupled - eta
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        a: &mut Complex64,
        b: &mut [Complex64],
        decay: &[Complex64],
        g: &[f64],
        kappa: f64,
        dt: f64,
        eta: [Complex64; 3],
    ) {
        let n = b.len();
        let half = 0.5 * dt;

        let ka1 = Self::deriv(*a, b, decay, g, kappa, eta[0], &mut self.k);
        for l in 0..n {
            self.acc[l] = self.k[l];
            self.stage[l] = b[l] + half * self.k[l];
        }
        let a2 = *a + half * ka1;

        let ka2 = Self::deriv(a2, &self.stage, decay, g, kappa, eta[1], &mut self.k);
        for l in 0..n {
            self.acc[l] += 2.0 * self.k[l];
            self.stage[l] = b[l] + half * self.k[l];
        }
        let a3 = *a + half * ka2;

        let ka3 = Self::deriv(a3, &self.stage, decay, g, kappa, eta[1], &mut self.k);
        for l in 0..n {
            self.acc[l] += 2.0 * self.k[l];
            self.stage[l] = b[l] + dt * self.k[l];
        }
        let a4 = *a + dt * ka3;

        let ka4 = Self::deriv(a4, &self.stage, decay, g, kappa, eta[2], &mut self.k);
        let sixth = dt / 6.0;
        for l in 0..n {
            b[l] += sixth * (self.acc[l] + self.k[l]);
        }
        *a += sixth * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rectangular_drive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const C0: Complex64 = Complex64::new(0.0, 0.0);
    const C1: Complex64 = Complex64::new(1.0, 0.0);

    fn params(kappa: f64, gamma: f64) -> SystemParams {
        SystemParams {
            kappa,
            gamma,
            cavity: 100.0,
            carrier: 100.0,
        }
    }

    fn two_level(detuning: f64, g: f64) -> DiscreteEnsemble {
        DiscreteEnsemble::from_bins(100.0, vec![100.0 + detuning], vec![g]).unwrap()
    }

    /// A(t) for one resonant bin with κ = γ: e^{−κt}·cos(gt).
    #[test]
    fn resonant_two_level_matches_closed_form() {
        let (kappa, g) = (2.0, 50.0);
        let grid = TimeGrid::until(1e-3, 0.5).unwrap();
        let tr = integrate_ode(
            &two_level(0.0, g),
            &params(kappa, kappa),
            &DriveSignal::zero(),
            C1,
            None,
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        for (i, t) in grid.times().enumerate() {
            let want = (-kappa * t).exp() * (g * t).cos();
            assert!((tr.amplitude[i] - want).norm() < 1e-9, "t={t}");
        }
    }

    /// Closed-form 2×2 propagator for a detuned bin with unequal losses.
    fn two_level_exact(kappa: f64, gamma: f64, det: f64, g: f64, t: f64) -> Complex64 {
        // ẏ = M y, M = [[−κ, g], [−g, −(γ + iδ)]]; A(0)=1, B(0)=0
        let m11 = Complex64::new(-kappa, 0.0);
        let m22 = Complex64::new(-gamma, -det);
        let tr = m11 + m22;
        let det_m = m11 * m22 + g * g;
        let disc = (tr * tr / 4.0 - det_m).sqrt();
        let l1 = tr / 2.0 + disc;
        let l2 = tr / 2.0 - disc;
        // A(t) = [(m11 − l2)e^{l1 t} − (m11 − l1)e^{l2 t}]/(l1 − l2)
        ((m11 - l2) * (l1 * t).exp() - (m11 - l1) * (l2 * t).exp()) / (l1 - l2)
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let (kappa, gamma, det, g) = (2.5, 0.06, 300.0, 80.0);
        let grid = TimeGrid::until(1e-3, 0.2).unwrap();
        let err = |m: usize| {
            let tr = integrate_ode(
                &two_level(det, g),
                &params(kappa, gamma),
                &DriveSignal::zero(),
                C1,
                None,
                &grid,
                &OdeOptions {
                    substeps: Some(m),
                    record_spins: false,
                },
            )
            .unwrap();
            grid.times()
                .enumerate()
                .map(|(i, t)| (tr.amplitude[i] - two_level_exact(kappa, gamma, det, g, t)).norm())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(4), err(8));
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order} ({e1:e}, {e2:e})");
        assert!(err(40) < 1e-9);
    }

    #[test]
    fn bare_cavity_decays_exponentially() {
        let ens = two_level(20.0, 0.0);
        let kappa = crate::units::mhz(0.4);
        let grid = TimeGrid::until(5e-5, 1.0).unwrap();
        let tr = integrate_ode(
            &ens,
            &params(kappa, 0.1),
            &DriveSignal::zero(),
            C1,
            None,
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        for (i, t) in grid.times().enumerate() {
            assert!((tr.amplitude[i].norm_sqr() - (-2.0 * kappa * t).exp()).abs() < 1e-8);
        }
        // half-life of |A|² is ln2/(2κ) ≈ 138 ns
        let half = std::f64::consts::LN_2 / (2.0 * kappa);
        assert!((crate::units::to_ns(half) - 138.0).abs() < 0.5);
    }

    #[test]
    fn lossless_system_conserves_excitation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 64;
        let freqs: Vec<f64> = (0..n)
            .map(|l| 100.0 - 1800.0 + 3600.0 * l as f64 / n as f64)
            .collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..40.0)).collect();
        let ens = DiscreteEnsemble::from_bins(100.0, freqs, g).unwrap();
        let b0: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let a0 = Complex64::new(0.3, -0.7);
        let grid = TimeGrid::until(5e-5, 0.1).unwrap();
        let tr = integrate_ode(
            &ens,
            &params(0.0, 0.0),
            &DriveSignal::zero(),
            a0,
            Some(&b0),
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        let pop = tr.spin_population.as_ref().unwrap();
        let total = |i: usize| tr.amplitude[i].norm_sqr() + pop[i];
        let e0 = total(0);
        let drift = (0..grid.len())
            .map(|i| (total(i) - e0).abs())
            .fold(0.0, f64::max)
            / e0;
        assert!(drift < 1e-9, "{drift:e}");
        assert_eq!(tr.excitation, Excitation::Free);
    }

    #[test]
    fn driven_empty_cavity_is_the_filtered_pulse() {
        // edges deliberately off the output grid
        let drive = rectangular_drive(0.0123, 0.0061, Complex64::new(0.7, 0.2)).unwrap();
        let p = SystemParams {
            carrier: 100.0 + 40.0,
            ..params(2.5, 0.06)
        };
        let grid = TimeGrid::until(1e-3, 0.1).unwrap();
        let tr = integrate_ode(
            &two_level(10.0, 0.0),
            &p,
            &drive,
            C0,
            None,
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        for (i, t) in grid.times().enumerate() {
            let want = -drive.filtered(t, p.kappa, p.carrier_detuning());
            assert!((tr.amplitude[i] - want).norm() < 1e-12, "t={t}");
        }
        assert_eq!(tr.excitation, Excitation::Driven);
    }

    #[test]
    fn response_is_linear_in_the_drive() {
        let ens = DiscreteEnsemble::from_bins(
            100.0,
            vec![60.0, 90.0, 110.0, 150.0],
            vec![10.0, 20.0, 15.0, 5.0],
        )
        .unwrap();
        let p = params(2.5, 0.06);
        let grid = TimeGrid::until(1e-3, 0.2).unwrap();
        let d1 = rectangular_drive(0.0, 0.006, C1).unwrap();
        let d2 = rectangular_drive(0.05, 0.01, Complex64::new(0.0, 2.0)).unwrap();
        let run = |d: &DriveSignal| {
            integrate_ode(&ens, &p, d, C0, None, &grid, &OdeOptions::default())
                .unwrap()
                .amplitude
        };
        let (a1, a2) = (run(&d1), run(&d2));
        let doubled = run(&d1.scaled(Complex64::new(2.0, 0.0)));
        let both = run(&d1.plus(&d2));
        for i in 0..grid.len() {
            assert!((doubled[i] - 2.0 * a1[i]).norm() <= 1e-14 * (1.0 + a1[i].norm()));
            assert!(
                (both[i] - a1[i] - a2[i]).norm() <= 1e-13 * (1.0 + a1[i].norm() + a2[i].norm())
            );
        }
    }

    #[test]
    fn coarse_fixed_step_is_rejected() {
        let ens = two_level(2000.0, 1.0);
        let grid = TimeGrid::until(1e-4, 0.01).unwrap();
        let err = integrate_ode(
            &ens,
            &params(1.0, 1.0),
            &DriveSignal::zero(),
            C1,
            None,
            &grid,
            &OdeOptions {
                substeps: Some(1),
                record_spins: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }), "{err}");
    }

    #[test]
    fn records_spins_on_request() {
        let grid = TimeGrid::until(1e-3, 0.01).unwrap();
        let tr = integrate_ode(
            &two_level(0.0, 5.0),
            &params(1.0, 1.0),
            &DriveSignal::zero(),
            C1,
            None,
            &grid,
            &OdeOptions {
                substeps: None,
                record_spins: true,
            },
        )
        .unwrap();
        let spins = tr.spins.unwrap();
        assert_eq!(spins.len(), grid.len());
        let t = grid.end();
        let want = -(-t).exp() * (5.0 * t).sin();
        assert!((spins[grid.steps()][0] - want).norm() < 1e-10);
    }
}
