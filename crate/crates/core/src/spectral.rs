//! Spin spectral density: a comb of q-Gaussian sub-ensembles, Gaussian hole
//! burning, and discretization into frequency bins.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::{params, units, Error, Result};

/// A hole factor whose Gaussian exponent exceeds this is exactly 1 in f64.
const HOLE_CUTOFF: f64 = 1500.0;

/// One sub-ensemble line shape,
/// `C·[1 + (q−1)(ω−ω_s)²/Δ²]^{−1/(q−1)}`.
///
/// For `1 < q < 3` this is a Student-t density with `ν = (3−q)/(q−1)` degrees
/// of freedom and scale `Δ/√(3−q)`, which gives closed-form tail masses.
#[derive(Debug, Clone, PartialEq)]
pub struct QGaussian {
    center: f64,
    fwhm: f64,
    q: f64,
    width: f64,
    norm: f64,
    window: Option<(f64, f64)>,
}

impl QGaussian {
    /// Unit-normalized over the whole real line.
    pub fn new(center: f64, fwhm: f64, q: f64) -> Result<Self> {
        if !(q > 1.0 && q < 3.0) {
            return Err(Error::param(format!(
                "q-Gaussian shape q = {q} must lie in (1, 3)"
            )));
        }
        if !(fwhm > 0.0) || !fwhm.is_finite() {
            return Err(Error::param(format!(
                "q-Gaussian FWHM must be positive, got {fwhm}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::param("q-Gaussian center must be finite"));
        }
        let width = fwhm / (2.0 * ((2f64.powf(q) - 2.0) / (2.0 * q - 2.0)).sqrt());
        let mut g = Self {
            center,
            fwhm,
            q,
            width,
            norm: 0.0,
            window: None,
        };
        g.norm = 1.0 / g.shape_integral();
        Ok(g)
    }

    /// Renormalized so that the density integrates to one over `[lo, hi]`.
    pub fn truncated(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::param(format!(
                "empty truncation window [{lo}, {hi}]"
            )));
        }
        let mass = self.mass_within(lo, hi);
        if !(mass > 0.0) {
            return Err(Error::Degenerate(format!(
                "q-Gaussian at {} has no mass in [{lo}, {hi}]",
                self.center
            )));
        }
        self.norm = 1.0 / (self.shape_integral() * mass);
        self.window = Some((lo, hi));
        Ok(self)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The width parameter Δ.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Peak value C.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    /// Unnormalized shape, equal to 1 at the center.
    pub fn shape(&self, omega: f64) -> f64 {
        let x = (omega - self.center) / self.width;
        (1.0 + (self.q - 1.0) * x * x).powf(-1.0 / (self.q - 1.0))
    }

    pub fn density(&self, omega: f64) -> f64 {
        self.norm * self.shape(omega)
    }

    fn dof(&self) -> f64 {
        (3.0 - self.q) / (self.q - 1.0)
    }

    fn scale(&self) -> f64 {
        self.width / (3.0 - self.q).sqrt()
    }

    fn student(&self) -> StudentsT {
        StudentsT::new(0.0, 1.0, self.dof()).expect("dof is positive for 1 < q < 3")
    }

    /// ∫ shape dω over the real line.
    fn shape_integral(&self) -> f64 {
        let nu = self.dof();
        let log_beta = ln_gamma(nu / 2.0) - ln_gamma((nu + 1.0) / 2.0);
        self.scale() * (nu * PI).sqrt() * log_beta.exp()
    }

    /// Fraction of the untruncated mass inside `[lo, hi]`.
    pub fn mass_within(&self, lo: f64, hi: f64) -> f64 {
        1.0 - self.mass_outside(lo, hi)
    }

    /// Fraction of the untruncated mass outside `[lo, hi]`, computed from
    /// both tails directly so it stays accurate when tiny.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        let t = self.student();
        let s = self.scale();
        t.cdf((lo - self.center) / s) + t.sf((hi - self.center) / s)
    }
}

/// Density of a single sub-ensemble at `omega`.
pub fn q_gaussian_density(omega: f64, params: &QGaussian) -> f64 {
    params.density(omega)
}

/// Comb layout and coupling. All frequencies in rad/μs.
#[derive(Debug, Clone, PartialEq)]
pub struct CombConfig {
    pub ensembles: usize,
    pub spacing: f64,
    /// Mean frequency of the central ensemble, ω_s.
    pub center: f64,
    pub cavity: f64,
    pub weight_width: f64,
    /// Collective coupling Ω of the central ensemble.
    pub coupling: f64,
    pub fwhm: f64,
    pub q: f64,
}

impl CombConfig {
    /// The reference comb at resonance with the given coupling Ω/2π in MHz.
    pub fn reference(coupling_mhz: f64) -> Self {
        let cavity = units::ghz(params::CAVITY_GHZ);
        Self {
            ensembles: params::ENSEMBLES,
            spacing: units::mhz(params::SPACING_MHZ),
            center: cavity,
            cavity,
            weight_width: units::mhz(params::WEIGHT_WIDTH_MHZ),
            coupling: units::mhz(coupling_mhz),
            fwhm: units::mhz(params::ENSEMBLE_FWHM_MHZ),
            q: params::Q_SHAPE,
        }
    }

    /// Offsets n_μ from the central ensemble, ascending.
    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        let half = (self.ensembles / 2) as i64;
        -half..=half
    }

    pub fn centers(&self) -> Vec<f64> {
        self.offsets()
            .map(|n| self.center + n as f64 * self.spacing)
            .collect()
    }

    /// Relative coupling weights Ω_μ²/Ω². The envelope is anchored to the comb
    /// so that detuning the comb translates F without reshaping it.
    pub fn weights(&self) -> Vec<f64> {
        self.offsets()
            .map(|n| {
                let d = n as f64 * self.spacing;
                (-d * d / (2.0 * self.weight_width * self.weight_width)).exp()
            })
            .collect()
    }

    /// The same comb with its center moved to `center`.
    pub fn detuned(&self, center: f64) -> Self {
        Self {
            center,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ensembles == 0 || self.ensembles.is_multiple_of(2) {
            return Err(Error::param(format!(
                "ensemble count must be odd so the comb has a central ensemble, got {}",
                self.ensembles
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::param(format!(
                "comb spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !(self.weight_width > 0.0) {
            return Err(Error::param(format!(
                "weight envelope width must be positive, got {}",
                self.weight_width
            )));
        }
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::param(format!(
                "coupling must be non-negative, got {}",
                self.coupling
            )));
        }
        if !self.center.is_finite() || !self.cavity.is_finite() {
            return Err(Error::param("comb and cavity frequencies must be finite"));
        }
        Ok(())
    }
}

impl Default for CombConfig {
    fn default() -> Self {
        Self::reference(params::COUPLING_MULTIMODE_MHZ)
    }
}

/// Gaussian notches to burn into F.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleSpec {
    pub centers: Vec<f64>,
    pub fwhm: f64,
    pub depths: Vec<f64>,
}

impl HoleSpec {
    /// Full-depth holes.
    pub fn new(centers: Vec<f64>, fwhm: f64) -> Self {
        let depths = vec![1.0; centers.len()];
        Self {
            centers,
            fwhm,
            depths,
        }
    }

    pub fn with_depths(mut self, depths: Vec<f64>) -> Self {
        self.depths = depths;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// A single burnt notch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hole {
    pub center: f64,
    /// Gaussian standard deviation.
    pub sigma: f64,
    pub depth: f64,
}

impl Hole {
    pub fn factor(&self, omega: f64) -> f64 {
        let x = (omega - self.center) / self.sigma;
        let e = 0.5 * x * x;
        if e > HOLE_CUTOFF {
            1.0
        } else {
            1.0 - self.depth * (-e).exp()
        }
    }

    pub fn fwhm(&self) -> f64 {
        self.sigma * 2.0 * (2.0 * LN_2).sqrt()
    }
}

/// The spin density F(ω), truncated to a finite window.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    comb: CombConfig,
    lines: Vec<QGaussian>,
    weights: Vec<f64>,
    window: (f64, f64),
    holes: Vec<Hole>,
}

impl SpectralFunction {
    /// F(ω), zero outside the truncation window.
    pub fn eval(&self, omega: f64) -> f64 {
        let bare = self.eval_bare(omega);
        if bare == 0.0 {
            return 0.0;
        }
        bare * self.hole_factor(omega)
    }

    /// F(ω) without any burnt holes.
    pub fn eval_bare(&self, omega: f64) -> f64 {
        if omega < self.window.0 || omega > self.window.1 {
            return 0.0;
        }
        self.lines
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| w * g.density(omega))
            .sum()
    }

    /// Product of all hole factors at ω, in `[0, 1]`.
    pub fn hole_factor(&self, omega: f64) -> f64 {
        self.holes.iter().map(|h| h.factor(omega)).product()
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn comb(&self) -> &CombConfig {
        &self.comb
    }

    pub fn lines(&self) -> &[QGaussian] {
        &self.lines
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn holes(&self) -> &[Hole] {
        &self.holes
    }

    pub fn has_holes(&self) -> bool {
        !self.holes.is_empty()
    }

    /// Σ_μ w_μ, the integral of F before any holes are burnt.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn cavity(&self) -> f64 {
        self.comb.cavity
    }

    pub fn coupling(&self) -> f64 {
        self.comb.coupling
    }

    /// Frequencies that should be panel edges in any quadrature over F:
    /// ensemble centers and a few hole widths around each hole.
    pub fn features(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.lines.iter().map(|g| g.center()).collect();
        for h in &self.holes {
            for k in [-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0] {
                pts.push(h.center + k * h.sigma);
            }
        }
        let (a, b) = self.window;
        pts.retain(|&x| x > a && x < b);
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// Narrowest structure in F, for sizing quadrature panels.
    pub fn finest_scale(&self) -> f64 {
        let line = self
            .lines
            .iter()
            .map(|g| g.width())
            .fold(f64::INFINITY, f64::min);
        self.holes.iter().map(|h| h.sigma).fold(line, f64::min)
    }

    /// The same density with every frequency (comb, cavity, holes) moved by
    /// `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut comb = self.comb.clone();
        comb.center += shift;
        comb.cavity += shift;
        let mut f = build_spectral_function(&comb)?;
        f.holes = self
            .holes
            .iter()
            .map(|h| Hole {
                center: h.center + shift,
                ..*h
            })
            .collect();
        Ok(f)
    }
}

/// Builds F(ω) = Σ_μ w_μ ρ_μ(ω) for a comb.
pub fn build_spectral_function(cfg: &CombConfig) -> Result<SpectralFunction> {
    cfg.validate()?;
    let weights = cfg.weights();
    let raw: Vec<QGaussian> = cfg
        .centers()
        .into_iter()
        .map(|c| QGaussian::new(c, cfg.fwhm, cfg.q))
        .collect::<Result<_>>()?;

    let half = window_half_width(cfg, &raw, &weights);
    let window = (cfg.center - half, cfg.center + half);
    let lines = raw
        .into_iter()
        .map(|g| g.truncated(window.0, window.1))
        .collect::<Result<_>>()?;
    Ok(SpectralFunction {
        comb: cfg.clone(),
        lines,
        weights,
        window,
        holes: Vec::new(),
    })
}

/// Smallest half-width, at least the configured floor, whose discarded tail
/// mass is below the allowed fraction of Σw.
fn window_half_width(cfg: &CombConfig, lines: &[QGaussian], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let tail = |w: f64| -> f64 {
        lines
            .iter()
            .zip(weights)
            .map(|(g, wt)| wt * g.mass_outside(cfg.center - w, cfg.center + w))
            .sum::<f64>()
            / total
    };
    let floor = units::mhz(params::WINDOW_FLOOR_MHZ)
        .max(cfg.spacing * (cfg.ensembles / 2) as f64 + 10.0 * cfg.fwhm);
    if tail(floor) < params::TAIL_MASS {
        return floor;
    }
    let mut lo = floor;
    let mut hi = 2.0 * floor;
    while tail(hi) >= params::TAIL_MASS {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if tail(mid) < params::TAIL_MASS {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Burns Gaussian notches into F. No renormalization follows, so the
/// integral of F drops.
///
/// A hole at a center that is already burnt with the same width is merged
/// into it (depths combine as `1 − (1−d₁)(1−d₂)`), so burning a full-depth
/// hole twice is a no-op.
pub fn apply_holes(f: &SpectralFunction, holes: &HoleSpec) -> Result<SpectralFunction> {
    if holes.is_empty() {
        return Ok(f.clone());
    }
    if !(holes.fwhm > 0.0) || !holes.fwhm.is_finite() {
        return Err(Error::param(format!(
            "hole FWHM must be positive, got {}",
            holes.fwhm
        )));
    }
    if holes.depths.len() != holes.centers.len() {
        return Err(Error::param(format!(
            "{} hole centers but {} depths",
            holes.centers.len(),
            holes.depths.len()
        )));
    }
    let sigma = holes.fwhm / (2.0 * (2.0 * LN_2).sqrt());
    let (a, b) = f.window;
    let mut out = f.clone();
    for (&center, &depth) in holes.centers.iter().zip(&holes.depths) {
        if !(0.0..=1.0).contains(&depth) {
            return Err(Error::param(format!(
                "hole depth must lie in [0, 1], got {depth}"
            )));
        }
        if !(center >= a && center <= b) {
            return Err(Error::param(format!(
                "hole center {:.3} MHz from the cavity lies outside the truncation window",
                units::to_mhz(center - f.comb.cavity)
            )));
        }
        match out
            .holes
            .iter_mut()
            .find(|h| h.center == center && h.sigma == sigma)
        {
            Some(h) => h.depth = 1.0 - (1.0 - h.depth) * (1.0 - depth),
            None => out.holes.push(Hole {
                center,
                sigma,
                depth,
            }),
        }
    }
    Ok(out)
}

/// N frequency bins with couplings g_l, shared by the ODE route and the
/// eigenproblem.
#[derive(Debug, Clone)]
pub struct DiscreteEnsemble {
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
    cavity: f64,
    source: Option<Arc<SpectralFunction>>,
}

impl DiscreteEnsemble {
    /// An ensemble given bin by bin.
    pub fn from_bins(cavity: f64, frequencies: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() || frequencies.len() != couplings.len() {
            return Err(Error::param(format!(
                "need matching, non-empty frequency and coupling lists (got {} and {})",
                frequencies.len(),
                couplings.len()
            )));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("bin frequencies must be strictly increasing"));
        }
        if couplings.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::param("couplings must be finite and non-negative"));
        }
        Ok(Self {
            frequencies,
            couplings,
            cavity,
            source: None,
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn cavity(&self) -> f64 {
        self.cavity
    }

    /// ω_l − ω_c.
    pub fn detunings(&self) -> Vec<f64> {
        self.frequencies.iter().map(|w| w - self.cavity).collect()
    }

    pub fn max_detuning(&self) -> f64 {
        self.frequencies
            .iter()
            .map(|w| (w - self.cavity).abs())
            .fold(0.0, f64::max)
    }

    /// Σ g_l².
    pub fn coupling_sq_total(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }

    pub fn source(&self) -> Option<&SpectralFunction> {
        self.source.as_deref()
    }

    /// The same ensemble in a frame moved by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            frequencies: self.frequencies.iter().map(|w| w + shift).collect(),
            couplings: self.couplings.clone(),
            cavity: self.cavity + shift,
            source: None,
        }
    }
}

/// Discretizes F onto `n` equal bins over `window` (bin midpoints), with
/// `g_l² = F(ω_l)·Ω²Σw / Σ_m F_bare(ω_m)`.
///
/// The normalizing sum uses the hole-free density, so Σg² equals Ω²Σw
/// exactly without holes and drops by the burnt fraction with them.
pub fn discretize_ensemble(
    f: &SpectralFunction,
    n: usize,
    window: (f64, f64),
) -> Result<DiscreteEnsemble> {
    if n < 2 {
        return Err(Error::param(format!("need at least two bins, got {n}")));
    }
    let (a, b) = window;
    let (wa, wb) = f.window;
    if !(b > a) || a < wa || b > wb {
        return Err(Error::param(format!(
            "discretization window [{:.3}, {:.3}] MHz must be a non-empty part of the truncation window [{:.3}, {:.3}] MHz",
            units::to_mhz(a - f.cavity()),
            units::to_mhz(b - f.cavity()),
            units::to_mhz(wa - f.cavity()),
            units::to_mhz(wb - f.cavity()),
        )));
    }
    let h = (b - a) / n as f64;
    let frequencies: Vec<f64> = (0..n).map(|l| a + (l as f64 + 0.5) * h).collect();
    let bare: Vec<f64> = frequencies.iter().map(|&w| f.eval_bare(w)).collect();
    let burnt: Vec<f64> = frequencies
        .iter()
        .zip(&bare)
        .map(|(&w, &fb)| fb * f.hole_factor(w))
        .collect();
    let bare_sum: f64 = bare.iter().sum();
    let burnt_sum: f64 = burnt.iter().sum();
    if !(burnt_sum > 0.0) || !bare_sum.is_finite() {
        return Err(Error::Degenerate(
            "spectral function vanishes on every discretization bin".into(),
        ));
    }
    let total = f.coupling().powi(2) * f.total_weight();
    let couplings = burnt
        .iter()
        .map(|&x| (x * total / bare_sum).sqrt())
        .collect();
    Ok(DiscreteEnsemble {
        frequencies,
        couplings,
        cavity: f.cavity(),
        source: Some(Arc::new(f.clone())),
    })
}

/// Discretizes over the full truncation window.
pub fn discretize_full(f: &SpectralFunction, n: usize) -> Result<DiscreteEnsemble> {
    discretize_ensemble(f, n, f.window())
}
