//! Normal modes of the discretized cavity + spin-bin system.
//!
//! The generator `L` acts on `ψ = (A, B_1, …, B_N)` with `ψ̇ = −Lψ`:
//!
//! ```text
//! L = | κ      −g_1  …  −g_N          |
//!     | g_1    γ+iδ_1                 |
//!     | ⋮              ⋱              |
//!     | g_N                  γ+iδ_N   |
//! ```
//!
//! with `δ_k = ω_k − ω_c`. An eigenvalue `λ` is a mode with decay rate `Re λ`
//! at frequency `ω_c + Im λ`.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::SystemParams;
use crate::spectral::{build_spectral_function, discretize_full, CombConfig, DiscreteEnsemble};
use crate::{params, units, Error, Result};

/// Relative residual accepted for an eigenpair.
const RESIDUAL_TOL: f64 = 1e-8;
/// Relative mismatch accepted between Σλ and trace(L).
const TRACE_TOL: f64 = 1e-8;

/// The arrowhead generator, stored by its nonzero parts.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    kappa: f64,
    gamma: f64,
    cavity: f64,
    couplings: Vec<f64>,
    detunings: Vec<f64>,
}

impl GeneratorMatrix {
    /// N + 1.
    pub fn dim(&self) -> usize {
        self.couplings.len() + 1
    }

    pub fn cavity(&self) -> f64 {
        self.cavity
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Diagonal entry of spin bin `k` (1-based, as in the matrix).
    fn spin_diag(&self, k: usize) -> Complex64 {
        Complex64::new(self.gamma, self.detunings[k - 1])
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let z = Complex64::new(0.0, 0.0);
        match (i, j) {
            (0, 0) => Complex64::new(self.kappa, 0.0),
            (0, k) => Complex64::new(-self.couplings[k - 1], 0.0),
            (k, 0) => Complex64::new(self.couplings[k - 1], 0.0),
            (k, l) if k == l => self.spin_diag(k),
            _ => z,
        }
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.entry(i, j))
    }

    pub fn trace(&self) -> Complex64 {
        let spins: Complex64 = (1..self.dim()).map(|k| self.spin_diag(k)).sum();
        Complex64::new(self.kappa, 0.0) + spins
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let off: f64 = self.couplings.iter().map(|g| 2.0 * g * g).sum();
        let diag: f64 = (1..self.dim()).map(|k| self.spin_diag(k).norm_sqr()).sum();
        (self.kappa * self.kappa + off + diag).sqrt()
    }

    /// `L·x` in O(N).
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim(), "state length must match the generator");
        let mut out = Vec::with_capacity(x.len());
        let coupled: Complex64 = self.couplings.iter().zip(&x[1..]).map(|(g, b)| g * b).sum();
        out.push(self.kappa * x[0] - coupled);
        for k in 1..self.dim() {
            out.push(self.couplings[k - 1] * x[0] + self.spin_diag(k) * x[k]);
        }
        out
    }

    /// Cavity weight |A|² of the unit-norm eigenvector for eigenvalue `λ`.
    ///
    /// Rows k ≥ 1 give `B_k = g_k A / (λ − γ − iδ_k)`, so
    /// `|A|² = 1 / (1 + Σ g_k² / |λ − γ − iδ_k|²)`.
    pub fn cavity_content(&self, lambda: Complex64) -> f64 {
        let mut s = 0.0;
        for (k, g) in self.couplings.iter().enumerate() {
            let d = (lambda - self.spin_diag(k + 1)).norm_sqr();
            if d == 0.0 {
                if *g != 0.0 {
                    return 0.0;
                }
                continue;
            }
            s += g * g / d;
        }
        1.0 / (1.0 + s)
    }
}

pub fn build_generator_matrix(ens: &DiscreteEnsemble, p: &SystemParams) -> Result<GeneratorMatrix> {
    p.validate()?;
    p.check_cavity(ens.cavity())?;
    if ens.is_empty() {
        return Err(Error::param("generator needs at least one spin bin"));
    }
    Ok(GeneratorMatrix {
        kappa: p.kappa,
        gamma: p.gamma,
        cavity: ens.cavity(),
        couplings: ens.couplings().to_vec(),
        detunings: ens.detunings(),
    })
}

/// Eigenpairs of a generator, ordered by ascending `Im λ`.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm `(A, B_1, …, B_N)` per mode, when computed.
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    /// |A_l|².
    pub contents: Vec<f64>,
    pub cavity: f64,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Absolute mode frequencies `ω_c + Im λ_l`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|l| self.cavity + l.im)
            .collect()
    }
}

fn check_finite(l: &GeneratorMatrix) -> Result<()> {
    let bad = l
        .couplings
        .iter()
        .chain(&l.detunings)
        .chain([&l.kappa, &l.gamma])
        .any(|x| !x.is_finite());
    if bad {
        return Err(Error::param("generator has non-finite entries"));
    }
    Ok(())
}

fn check_trace(l: &GeneratorMatrix, eigenvalues: &[Complex64]) -> Result<()> {
    let sum: Complex64 = eigenvalues.iter().sum();
    let tr = l.trace();
    let scale = l.norm() * (l.dim() as f64).sqrt();
    if (sum - tr).norm() > TRACE_TOL * scale {
        return Err(Error::Numeric {
            index: None,
            message: format!("eigenvalue sum {sum} differs from the trace {tr}"),
        });
    }
    Ok(())
}

fn sort_by_frequency(order: &mut [usize], eigenvalues: &[Complex64]) {
    order.sort_by(|&a, &b| {
        eigenvalues[a]
            .im
            .total_cmp(&eigenvalues[b].im)
            .then(eigenvalues[a].re.total_cmp(&eigenvalues[b].re))
    });
}

/// All eigenpairs from the dense solver, with unit-norm eigenvectors and a
/// residual check on each pair.
pub fn solve_modes(l: &GeneratorMatrix) -> Result<ModeSet> {
    check_finite(l)?;
    let n = l.dim();
    let evd = l.to_dense().eigen().map_err(|e| Error::Numeric {
        index: None,
        message: format!("dense eigensolver did not converge: {e:?}"),
    })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let raw: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    check_trace(l, &raw)?;

    let mut order: Vec<usize> = (0..n).collect();
    sort_by_frequency(&mut order, &raw);

    let limit = RESIDUAL_TOL * l.norm();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut contents = Vec::with_capacity(n);
    for (rank, &j) in order.iter().enumerate() {
        let lambda = raw[j];
        let mut v: Vec<Complex64> = (0..n).map(|i| u[(i, j)]).collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numeric {
                index: Some(rank),
                message: "eigenvector has zero or non-finite norm".into(),
            });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let res = l
            .apply(&v)
            .iter()
            .zip(&v)
            .map(|(lv, x)| (lv - lambda * x).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(res < limit) {
            return Err(Error::Numeric {
                index: Some(rank),
                message: format!("residual {res:.3e} exceeds {limit:.3e}"),
            });
        }
        contents.push(v[0].norm_sqr());
        eigenvalues.push(lambda);
        vectors.push(v);
    }
    Ok(ModeSet {
        eigenvalues,
        eigenvectors: Some(vectors),
        contents,
        cavity: l.cavity,
    })
}

/// Eigenvalues only, with cavity contents from the closed form. About twice
/// as fast as [`solve_modes`]; used for sweeps.
pub fn solve_eigenvalues(l: &GeneratorMatrix) -> Result<ModeSet> {
    check_finite(l)?;
    let raw = l.to_dense().eigenvalues().map_err(|e| Error::Numeric {
        index: None,
        message: format!("dense eigensolver did not converge: {e:?}"),
    })?;
    check_trace(l, &raw)?;
    let mut order: Vec<usize> = (0..raw.len()).collect();
    sort_by_frequency(&mut order, &raw);
    let eigenvalues: Vec<Complex64> = order.iter().map(|&j| raw[j]).collect();
    let contents = eigenvalues.iter().map(|&x| l.cavity_content(x)).collect();
    Ok(ModeSet {
        eigenvalues,
        eigenvectors: None,
        contents,
        cavity: l.cavity,
    })
}

/// Modes at one comb position of a detuning sweep.
#[derive(Debug, Clone)]
pub struct DetuningPoint {
    /// Comb center ω_s.
    pub center: f64,
    pub modes: ModeSet,
}

#[derive(Debug, Clone)]
pub struct DetuningMap {
    pub points: Vec<DetuningPoint>,
}

/// The default sweep: ω_s within ±150 MHz of the cavity, 301 points.
pub fn default_sweep_grid(cavity: f64) -> Vec<f64> {
    linear_grid(
        cavity - units::mhz(params::SWEEP_SPAN_MHZ),
        cavity + units::mhz(params::SWEEP_SPAN_MHZ),
        params::SWEEP_POINTS,
    )
}

/// `points` equally spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Solves the eigenproblem at each comb center in `centers`, translating
/// the comb and rediscretizing with `bins` bins over its window.
pub fn sweep_detuning(
    cfg: &CombConfig,
    p: &SystemParams,
    centers: &[f64],
    bins: usize,
) -> Result<DetuningMap> {
    if centers.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("sweep grid must be strictly increasing"));
    }
    let points = centers
        .par_iter()
        .enumerate()
        .map(|(i, &center)| {
            let f = build_spectral_function(&cfg.detuned(center))?;
            let ens = discretize_full(&f, bins)?;
            let l = build_generator_matrix(&ens, p)?;
            let modes = solve_eigenvalues(&l).map_err(|e| match e {
                Error::Numeric { message, .. } => Error::Numeric {
                    index: Some(i),
                    message: format!("sweep point {i}: {message}"),
                },
                e => e,
            })?;
            Ok(DetuningPoint { center, modes })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetuningMap { points })
}

/// A maximum of cavity content over mode frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonPeak {
    /// Absolute frequency `ω_c + Im λ` of the strongest mode in the peak bin.
    pub frequency: f64,
    pub content: f64,
    pub prominence: f64,
    /// Σ|A_l|² over the modes in the peak's basin.
    pub weight: f64,
    /// Decay rate `Re λ` of that mode.
    pub decay: f64,
}

/// Cavity content binned over `Im λ`: occupied bins only, in ascending
/// frequency, each holding the index of its strongest mode.
fn binned(modes: &ModeSet) -> Vec<usize> {
    let width = units::mhz(params::PEAK_BIN_MHZ);
    let mut out: Vec<(i64, usize)> = Vec::new();
    for (j, lambda) in modes.eigenvalues.iter().enumerate() {
        let bin = (lambda.im / width).round() as i64;
        match out.last_mut() {
            Some((b, best)) if *b == bin => {
                if modes.contents[j] > modes.contents[*best] {
                    *best = j;
                }
            }
            _ => out.push((bin, j)),
        }
    }
    out.into_iter().map(|(_, j)| j).collect()
}

/// Topographic prominence of every interior local maximum of `y`.
fn prominences(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        let mut left_min = y[i];
        let mut j = i;
        while j > 0 && y[j - 1] < y[i] {
            j -= 1;
            left_min = left_min.min(y[j]);
        }
        let mut right_min = y[i];
        let mut j = i;
        while j + 1 < n && y[j + 1] <= y[i] {
            j += 1;
            right_min = right_min.min(y[j]);
        }
        let base = left_min.max(right_min);
        out.push((i, y[i] - base));
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// All dominant cavity-content peaks, ascending in frequency.
///
/// Contents are binned over `Im λ` in 0.2 MHz bins (strongest mode per bin).
/// A local maximum of the binned series is a candidate when its prominence
/// is at least ten times the median over occupied bins. Modes are then split
/// into basins at the lowest content between neighbouring candidates, and a
/// candidate is dominant when its basin carries at least a fifth of the
/// cavity weight Σ|A_l|² of the heaviest basin.
pub fn dominant_peaks(modes: &ModeSet) -> Vec<PolaritonPeak> {
    let bins = binned(modes);
    let y: Vec<f64> = bins.iter().map(|&j| modes.contents[j]).collect();
    let threshold = params::PEAK_PROMINENCE_FACTOR * median(y.clone());
    let candidates: Vec<(usize, f64)> = prominences(&y)
        .into_iter()
        .filter(|&(_, p)| p >= threshold && p > 0.0)
        .map(|(i, p)| (bins[i], p))
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }

    // basin edges: valley modes between consecutive candidates
    let c = &modes.contents;
    let mut edges = vec![0];
    for pair in candidates.windows(2) {
        let (a, b) = (pair[0].0, pair[1].0);
        let valley = (a..=b).min_by(|&x, &y| c[x].total_cmp(&c[y])).unwrap_or(a);
        edges.push(valley);
    }
    edges.push(c.len());
    let weights: Vec<f64> = edges
        .windows(2)
        .map(|w| c[w[0]..w[1]].iter().sum())
        .collect();
    let heaviest = weights.iter().copied().fold(0.0, f64::max);

    candidates
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w >= params::PEAK_WEIGHT_FRACTION * heaviest)
        .map(|(&(j, prominence), &weight)| PolaritonPeak {
            frequency: modes.cavity + modes.eigenvalues[j].im,
            content: c[j],
            prominence,
            weight,
            decay: modes.eigenvalues[j].re,
        })
        .collect()
}

/// The `k` heaviest dominant peaks, ascending in frequency.
pub fn find_polariton_peaks(modes: &ModeSet, k: usize) -> Result<Vec<PolaritonPeak>> {
    let mut peaks = dominant_peaks(modes);
    if peaks.len() < k {
        return Err(Error::Regime(format!(
            "found {} dominant cavity-content peaks, need {k}; the coupling is too weak for multimode operation",
            peaks.len()
        )));
    }
    peaks.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    peaks.truncate(k);
    peaks.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(peaks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Rk4;
    use crate::spectral::discretize_full;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small(n: usize, seed: u64) -> (DiscreteEnsemble, SystemParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = SystemParams::reference();
        let mut freqs: Vec<f64> = (0..n)
            .map(|_| p.cavity + rng.random_range(-200.0..200.0))
            .collect();
        freqs.sort_by(f64::total_cmp);
        let g = (0..n).map(|_| rng.random_range(0.0..40.0)).collect();
        (DiscreteEnsemble::from_bins(p.cavity, freqs, g).unwrap(), p)
    }

    #[test]
    fn matrix_layout_and_hermitian_part() {
        let (ens, p) = small(5, 1);
        let l = build_generator_matrix(&ens, &p).unwrap();
        assert_eq!(l.dim(), 6);
        assert_eq!(l.entry(0, 0), c(p.kappa, 0.0));
        for k in 1..6 {
            let g = ens.couplings()[k - 1];
            assert_eq!(l.entry(0, k), c(-g, 0.0));
            assert_eq!(l.entry(k, 0), c(g, 0.0));
            assert_eq!(
                l.entry(k, k),
                c(p.gamma, ens.frequencies()[k - 1] - p.cavity)
            );
        }
        for i in 0..6 {
            for j in 0..6 {
                let h = 0.5 * (l.entry(i, j) + l.entry(j, i).conj());
                let want = match (i, j) {
                    (0, 0) => p.kappa,
                    (a, b) if a == b => p.gamma,
                    _ => 0.0,
                };
                assert!((h - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn generator_is_minus_the_ode_right_hand_side() {
        let (ens, p) = small(40, 2);
        let l = build_generator_matrix(&ens, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Complex64> = (0..l.dim())
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let decay: Vec<Complex64> = l.detunings().iter().map(|&d| c(p.gamma, d)).collect();
        let mut db = vec![c(0.0, 0.0); 40];
        let da = Rk4::deriv(
            x[0],
            &x[1..],
            &decay,
            ens.couplings(),
            p.kappa,
            c(0.0, 0.0),
            &mut db,
        );
        let lx = l.apply(&x);
        let scale = l.norm();
        assert!((lx[0] + da).norm() < 1e-12 * scale);
        for k in 0..40 {
            assert!((lx[k + 1] + db[k]).norm() < 1e-12 * scale);
        }
        // dense and O(N) products agree
        let dense = l.to_dense();
        for i in 0..l.dim() {
            let row: Complex64 = (0..l.dim()).map(|j| dense[(i, j)] * x[j]).sum();
            assert!((row - lx[i]).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn uncoupled_single_bin_is_diagonal() {
        let p = SystemParams::reference();
        let ens = DiscreteEnsemble::from_bins(p.cavity, vec![p.cavity + 30.0], vec![0.0]).unwrap();
        let m = solve_modes(&build_generator_matrix(&ens, &p).unwrap()).unwrap();
        assert!((m.eigenvalues[0] - c(p.kappa, 0.0)).norm() < 1e-12);
        assert!((m.eigenvalues[1] - c(p.gamma, 30.0)).norm() < 1e-12);
        assert!((m.contents[0] - 1.0).abs() < 1e-12);
        assert!(m.contents[1] < 1e-24);
    }

    #[test]
    fn resonant_pair_with_equal_losses() {
        let mut p = SystemParams::reference();
        p.gamma = p.kappa;
        let g = 5.0;
        let ens = DiscreteEnsemble::from_bins(p.cavity, vec![p.cavity], vec![g]).unwrap();
        let m = solve_modes(&build_generator_matrix(&ens, &p).unwrap()).unwrap();
        // det(L − λ) = (κ − λ)² + g²
        assert!((m.eigenvalues[0] - c(p.kappa, -g)).norm() < 1e-12);
        assert!((m.eigenvalues[1] - c(p.kappa, g)).norm() < 1e-12);
        for w in &m.contents {
            assert!((w - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rayleigh_identity_bounds_and_closed_form_content() {
        for seed in 0..4 {
            let (ens, p) = small(60, 10 + seed);
            let l = build_generator_matrix(&ens, &p).unwrap();
            let m = solve_modes(&l).unwrap();
            let fast = solve_eigenvalues(&l).unwrap();
            assert_eq!(m.len(), 61);
            let eps = 1e-9 * p.kappa;
            for (j, lambda) in m.eigenvalues.iter().enumerate() {
                let a2 = m.contents[j];
                let rhs = p.kappa * a2 + p.gamma * (1.0 - a2);
                assert!((lambda.re - rhs).abs() < 1e-9, "{} vs {rhs}", lambda.re);
                assert!(lambda.re >= p.gamma - eps && lambda.re <= p.kappa + eps);
                assert!((l.cavity_content(*lambda) - a2).abs() < 1e-9);
                assert!((fast.eigenvalues[j] - lambda).norm() < 1e-9 * l.norm());
            }
            let sum: Complex64 = m.eigenvalues.iter().sum();
            assert!((sum - l.trace()).norm() < 1e-8 * l.trace().norm());
        }
    }

    #[test]
    fn spectrum_is_translation_covariant() {
        let (ens, p) = small(30, 7);
        let shift = 1234.5;
        let a = solve_eigenvalues(&build_generator_matrix(&ens, &p).unwrap()).unwrap();
        let b = solve_eigenvalues(
            &build_generator_matrix(&ens.shifted(shift), &p.shifted(shift)).unwrap(),
        )
        .unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).norm() < 1e-9 * p.kappa.max(1.0));
        }
    }

    #[test]
    fn prominence_of_simple_profiles() {
        let y = [0.0, 1.0, 0.2, 3.0, 0.5, 0.6, 0.1];
        let p = prominences(&y);
        let want = [(1, 0.8), (3, 2.9), (5, 0.1)];
        assert_eq!(p.len(), 3);
        for ((i, v), (j, w)) in p.iter().zip(want) {
            assert_eq!(*i, j);
            assert!((v - w).abs() < 1e-12);
        }
        assert_eq!(median(vec![3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn light_side_peaks_are_not_dominant() {
        // two heavy Lorentzian clusters, two light ones, and a faint bump
        let spacing = units::mhz(0.5);
        let bump = |x: f64, c: f64, w: f64, h: f64| h / (1.0 + ((x - c) / w).powi(2));
        let mut eigenvalues = Vec::new();
        let mut contents = Vec::new();
        for i in -400..=400 {
            let x = i as f64 * spacing;
            let y = 1e-7
                + bump(x, units::mhz(-10.0), units::mhz(1.0), 0.04)
                + bump(x, units::mhz(10.0), units::mhz(1.0), 0.04)
                + bump(x, units::mhz(-60.0), units::mhz(1.0), 0.002)
                + bump(x, units::mhz(60.0), units::mhz(1.0), 0.002)
                + bump(x, 0.0, units::mhz(0.5), 1e-5);
            eigenvalues.push(c(0.1, x));
            contents.push(y);
        }
        let m = ModeSet {
            eigenvalues,
            eigenvectors: None,
            contents,
            cavity: 100.0,
        };
        let peaks = dominant_peaks(&m);
        assert_eq!(peaks.len(), 2);
        assert!((units::to_mhz(peaks[0].frequency - 100.0) + 10.0).abs() < 1e-9);
        assert!((peaks[0].weight - peaks[1].weight).abs() < 1e-3);
        let two = find_polariton_peaks(&m, 2).unwrap();
        assert_eq!(two, peaks);
        assert!(matches!(find_polariton_peaks(&m, 3), Err(Error::Regime(_))));
    }

    #[test]
    fn weak_coupling_has_too_few_peaks() {
        let f = build_spectral_function(&CombConfig::reference(0.5)).unwrap();
        let p = SystemParams::reference();
        let ens = discretize_full(&f, 300).unwrap();
        let m = solve_eigenvalues(&build_generator_matrix(&ens, &p).unwrap()).unwrap();
        assert!(matches!(find_polariton_peaks(&m, 8), Err(Error::Regime(_))));
    }

    #[test]
    fn sweep_grid_is_increasing() {
        let g = default_sweep_grid(100.0);
        assert_eq!(g.len(), 301);
        assert!((g[150] - 100.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let p = SystemParams::reference();
        let cfg = CombConfig::reference(8.0);
        assert!(sweep_detuning(&cfg, &p, &[2.0, 1.0], 50).is_err());
        let map = sweep_detuning(&cfg, &p, &[cfg.center - 10.0, cfg.center + 10.0], 50).unwrap();
        assert_eq!(map.points.len(), 2);
        assert_eq!(map.points[1].modes.len(), 51);
    }
}
