//! The memory kernel
//!
//! ```text
//! K(s) = −∫ dω Ω²F(ω) · (e^{−(γ+iδ)s} − e^{−κs}) / (κ − γ − iδ),   δ = ω − ω_c
//! ```
//!
//! which vanishes at `s = 0`. The ω-integral is a fixed weighted sum over
//! quadrature nodes (or over the bins of a discrete ensemble), so each lag
//! costs one pass over the nodes with a per-node phasor recurrence.

use num_complex::Complex64;
use rayon::prelude::*;

use super::drive::exprel_neg;
use super::trajectory::TimeGrid;
use super::SystemParams;
use crate::quadrature::{NodeSet, NodeSetOptions};
use crate::spectral::{DiscreteEnsemble, SpectralFunction};
use crate::Result;

/// Lags per block; each block starts from exact phasors.
const BLOCK: usize = 1024;
/// Nodes with |κ − γ − iδ| below this are evaluated directly, not through the
/// split form whose 1/z weight would blow up.
const NEAR: f64 = 1.0;
/// Largest phase change of `e^{−iδs}` across one quadrature panel at the
/// longest lag.
const PANEL_PHASE: f64 = 6.0;

/// Integration nodes for the kernel: detunings δ_j and coupling masses
/// `m_j = Ω²·W_j·F(ω_j)` (or g_l² for a discrete ensemble).
#[derive(Debug, Clone)]
pub struct KernelNodes {
    pub detuning: Vec<f64>,
    pub mass: Vec<f64>,
}

impl KernelNodes {
    /// Composite Gauss-Legendre nodes adapted to F and fine enough for the
    /// oscillation `e^{−iδs}` up to `max_lag`.
    pub fn from_spectral(f: &SpectralFunction, max_lag: f64) -> Result<Self> {
        let (a, b) = f.window();
        let total = f.total_weight();
        let opts = NodeSetOptions {
            order: 12,
            max_width: (PANEL_PHASE / max_lag.max(1e-6)).min(4.0 * f.finest_scale()),
            abs_tol: 1e-12 * total,
            min_width: 1e-6 * f.finest_scale(),
            breakpoints: f.features(),
        };
        let set = NodeSet::adaptive(|w| f.eval(w), a, b, &opts)?;
        let omega2 = f.coupling().powi(2);
        let cavity = f.cavity();
        let (detuning, mass) = set
            .nodes
            .iter()
            .zip(&set.weights)
            .map(|(&w, &wt)| (w - cavity, omega2 * wt * f.eval(w)))
            .filter(|&(_, m)| m > 0.0)
            .unzip();
        Ok(Self { detuning, mass })
    }

    pub fn from_ensemble(ens: &DiscreteEnsemble) -> Self {
        let (detuning, mass) = ens
            .detunings()
            .into_iter()
            .zip(ens.couplings())
            .map(|(d, g)| (d, g * g))
            .filter(|&(_, m)| m > 0.0)
            .unzip();
        Self { detuning, mass }
    }

    pub fn len(&self) -> usize {
        self.detuning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detuning.is_empty()
    }

    /// Σ m_j, which approximates Ω²∫F.
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Kernel samples `K(n·step)`, `n = 0..len`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub step: f64,
    pub samples: Vec<Complex64>,
    /// K'(0) = −Σ m_j.
    pub initial_slope: f64,
}

impl Kernel {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|n| n as f64 * self.step)
    }
}

/// Kernel of a continuous density on the lag grid `lags`.
pub fn volterra_kernel(f: &SpectralFunction, p: &SystemParams, lags: &TimeGrid) -> Result<Kernel> {
    p.validate()?;
    p.check_cavity(f.cavity())?;
    let nodes = KernelNodes::from_spectral(f, lags.end())?;
    Ok(evaluate(&nodes, p, lags))
}

/// Kernel of a discrete ensemble; a Volterra solve with it reproduces the
/// ODE route for the same bins.
pub fn volterra_kernel_discrete(
    ens: &DiscreteEnsemble,
    p: &SystemParams,
    lags: &TimeGrid,
) -> Result<Kernel> {
    p.validate()?;
    p.check_cavity(ens.cavity())?;
    Ok(evaluate(&KernelNodes::from_ensemble(ens), p, lags))
}

/// Far nodes in split form, structure-of-arrays.
struct Far {
    rate_re: f64,
    rate_im: Vec<f64>,
    step_re: Vec<f64>,
    step_im: Vec<f64>,
    c_re: Vec<f64>,
    c_im: Vec<f64>,
    c_total: Complex64,
}

pub(crate) fn evaluate(nodes: &KernelNodes, p: &SystemParams, lags: &TimeGrid) -> Kernel {
    let h = lags.step();
    let kappa = p.kappa;
    let mut far = Far {
        rate_re: p.gamma,
        rate_im: Vec::new(),
        step_re: Vec::new(),
        step_im: Vec::new(),
        c_re: Vec::new(),
        c_im: Vec::new(),
        c_total: Complex64::new(0.0, 0.0),
    };
    let mut near = Vec::new();
    for (&d, &m) in nodes.detuning.iter().zip(&nodes.mass) {
        let z = Complex64::new(kappa - p.gamma, -d);
        if z.norm() < NEAR {
            near.push((z, m));
            continue;
        }
        let c = m / z;
        let r = Complex64::new(-p.gamma * h, -d * h).exp();
        far.rate_im.push(d);
        far.step_re.push(r.re);
        far.step_im.push(r.im);
        far.c_re.push(c.re);
        far.c_im.push(c.im);
    }
    // fixed summation order so the result does not depend on the split
    far.c_total = far
        .c_re
        .iter()
        .zip(&far.c_im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .sum();

    let mut samples = vec![Complex64::new(0.0, 0.0); lags.len()];
    samples
        .par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(blk, out)| fill_block(&far, &near, kappa, h, blk * BLOCK, out));
    samples[0] = Complex64::new(0.0, 0.0);
    Kernel {
        step: h,
        samples,
        initial_slope: -nodes.total_mass(),
    }
}

fn fill_block(
    far: &Far,
    near: &[(Complex64, f64)],
    kappa: f64,
    h: f64,
    first: usize,
    out: &mut [Complex64],
) {
    let n = far.rate_im.len();
    let s0 = first as f64 * h;
    let mut p_re = Vec::with_capacity(n);
    let mut p_im = Vec::with_capacity(n);
    for &d in &far.rate_im {
        let p = Complex64::new(-far.rate_re * s0, -d * s0).exp();
        p_re.push(p.re);
        p_im.push(p.im);
    }
    for (k, slot) in out.iter_mut().enumerate() {
        let s = (first + k) as f64 * h;
        let damp = (-kappa * s).exp();
        let phased = advance(&mut p_re, &mut p_im, far);
        let mut sum = phased - damp * far.c_total;
        for &(z, m) in near {
            let zs = z * s;
            // s·(e^{zs} − 1)/(zs) · e^{−κs}
            let term = if zs.norm() < 0.5 {
                s * exprel_neg(-zs) * damp
            } else {
                ((zs - kappa * s).exp() - damp) / z
            };
            sum += m * term;
        }
        *slot = -sum;
    }
}

/// Returns Σ_j c_j p_j and advances every phasor by one lag.
#[inline]
fn advance(p_re: &mut [f64], p_im: &mut [f64], far: &Far) -> Complex64 {
    const LANES: usize = 8;
    let mut acc_re = [0.0f64; LANES];
    let mut acc_im = [0.0f64; LANES];
    let n = p_re.len();
    let full = n - n % LANES;
    let (sr, si, cr, ci) = (&far.step_re, &far.step_im, &far.c_re, &far.c_im);
    let mut j = 0;
    while j < full {
        for l in 0..LANES {
            let (a, b) = (p_re[j + l], p_im[j + l]);
            acc_re[l] += cr[j + l] * a - ci[j + l] * b;
            acc_im[l] += cr[j + l] * b + ci[j + l] * a;
            p_re[j + l] = a * sr[j + l] - b * si[j + l];
            p_im[j + l] = a * si[j + l] + b * sr[j + l];
        }
        j += LANES;
    }
    for j in full..n {
        let (a, b) = (p_re[j], p_im[j]);
        acc_re[0] += cr[j] * a - ci[j] * b;
        acc_im[0] += cr[j] * b + ci[j] * a;
        p_re[j] = a * sr[j] - b * si[j];
        p_im[j] = a * si[j] + b * sr[j];
    }
    Complex64::new(acc_re.iter().sum(), acc_im.iter().sum())
}

/// Direct evaluation at one lag.
#[cfg(test)]
pub(crate) fn kernel_at(nodes: &KernelNodes, p: &SystemParams, s: f64) -> Result<Complex64> {
    if s < 0.0 {
        return Err(crate::Error::param("kernel lags must be non-negative"));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (&d, &m) in nodes.detuning.iter().zip(&nodes.mass) {
        let z = Complex64::new(p.kappa - p.gamma, -d);
        sum += m * (-p.kappa * s).exp() * s * exprel_neg(-z * s);
    }
    Ok(-sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::spectral::{apply_holes, build_spectral_function, CombConfig, HoleSpec};
    use crate::units;

    fn reference(coupling_mhz: f64) -> (SpectralFunction, SystemParams) {
        let f = build_spectral_function(&CombConfig::reference(coupling_mhz)).unwrap();
        (f, SystemParams::reference())
    }

    #[test]
    fn vanishes_at_zero_lag() {
        let (f, p) = reference(26.0);
        let k = volterra_kernel(&f, &p, &TimeGrid::until(5e-5, 0.01).unwrap()).unwrap();
        assert_eq!(k.samples[0], Complex64::new(0.0, 0.0));
        // small-lag slope is −Ω²∫F
        let slope = k.samples[1] / k.step;
        let want = -f.coupling().powi(2) * f.total_weight();
        assert!((slope.re / want - 1.0).abs() < 1e-3, "{slope}");
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let (f, p) = reference(26.0);
        let g = apply_holes(
            &f,
            &HoleSpec::new(vec![f.cavity() + 90.0], units::mhz(0.47)),
        )
        .unwrap();
        let grid = TimeGrid::new(0.0137, 40).unwrap();
        let k = volterra_kernel(&g, &p, &grid).unwrap();
        let (a, b) = g.window();
        let omega2 = g.coupling().powi(2);
        for n in [1usize, 7, 23, 40] {
            let s = grid.time(n);
            let integrand = |w: f64| {
                let z = Complex64::new(p.kappa - p.gamma, -(w - g.cavity()));
                let v = ((-Complex64::new(p.gamma, w - g.cavity()) * s).exp()
                    - (-p.kappa * s).exp())
                    / z;
                -omega2 * g.eval(w) * v
            };
            // split at the comb lines and the hole so the brute force sees them
            let mut cuts = g.features();
            cuts.insert(0, a);
            cuts.push(b);
            let mut want = Complex64::new(0.0, 0.0);
            for seg in cuts.windows(2) {
                let re = integrate(|w| integrand(w).re, seg[0], seg[1], 1e-9).unwrap();
                let im = integrate(|w| integrand(w).im, seg[0], seg[1], 1e-9).unwrap();
                want += Complex64::new(re, im);
            }
            let scale = omega2 * g.total_weight() * s;
            assert!(
                (k.samples[n] - want).norm() < 1e-9 * scale,
                "n={n}: {} vs {want}",
                k.samples[n]
            );
        }
    }

    #[test]
    fn recurrence_matches_direct_sum() {
        let ens = crate::spectral::discretize_full(&reference(8.0).0, 300).unwrap();
        let p = SystemParams::reference();
        let grid = TimeGrid::new(5e-5, 3000).unwrap();
        let k = volterra_kernel_discrete(&ens, &p, &grid).unwrap();
        let nodes = KernelNodes::from_ensemble(&ens);
        for n in [1, 2, 1023, 1024, 1025, 2999, 3000] {
            let want = kernel_at(&nodes, &p, grid.time(n)).unwrap();
            assert!(
                (k.samples[n] - want).norm() < 1e-11 * want.norm().max(1.0),
                "n={n}"
            );
        }
    }

    #[test]
    fn symmetric_density_with_equal_losses_gives_real_kernel() {
        let (f, mut p) = reference(26.0);
        p.gamma = p.kappa;
        let k = volterra_kernel(&f, &p, &TimeGrid::new(1e-3, 300).unwrap()).unwrap();
        for (n, v) in k.samples.iter().enumerate() {
            let scaled = v * (p.kappa * n as f64 * k.step).exp();
            assert!(
                scaled.im.abs() <= 1e-9 * scaled.norm().max(1.0),
                "n={n}: {scaled}"
            );
        }
    }

    #[test]
    fn multimode_kernel_recurs_with_comb_period() {
        let (f, p) = reference(26.0);
        let grid = TimeGrid::until(1e-4, 0.11).unwrap();
        let k = volterra_kernel(&f, &p, &grid).unwrap();
        // the kernel is −∫M; its derivative −M(s) carries the revivals
        let m: Vec<f64> = k.samples.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let window = (units::ns(12.5) / grid.step()) as usize;
        let peaks: Vec<f64> = (window..m.len() - window)
            .filter(|&i| m[i - window..=i + window].iter().all(|&x| x <= m[i]))
            .map(|i| grid.time(i))
            .collect();
        assert!(peaks.len() >= 3, "{peaks:?}");
        for pair in peaks.windows(2) {
            let gap = units::to_ns(pair[1] - pair[0]);
            assert!((gap - 25.0).abs() < 0.5, "{gap}");
        }
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let (f, p) = reference(26.0);
        let grid = TimeGrid::new(5e-5, 5000).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| volterra_kernel(&f, &p, &grid).unwrap().samples)
        };
        assert_eq!(run(1), run(3));
    }
}
