use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{output, HolePolicy, Scenario, SolverChoice};
use crate::dynamics::{
    integrate_ode, pulse_metrics, solve_volterra, DriveSignal, OdeOptions, PulseMetrics, Solver,
    SystemParams, TimeGrid, Trajectory,
};
use crate::error::StageExt;
use crate::laplace::{default_frequency_grid, laplace_response, laplace_spectrum};
use crate::modes::{
    build_generator_matrix, dominant_peaks, find_polariton_peaks, linear_grid, solve_eigenvalues,
    sweep_detuning, ModeSet, PolaritonPeak,
};
use crate::spectral::{
    apply_holes, build_spectral_function, discretize_full, HoleSpec, SpectralFunction,
};
use crate::{params, units, Complex64, Error, Result};

/// ODE/Volterra deviation above which an `all` run fails.
const CROSS_CHECK_LIMIT: f64 = 1e-5;
/// Late-time window for the sensitivity comparison, μs.
const LATE_AFTER_US: f64 = 2.0;
/// Pulses averaged for the reported revival spacing.
const SPACING_PULSES: usize = 20;
/// Time at which the envelope/barrier ratio is reported, μs.
const RATIO_AT_US: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub solver: Solver,
    pub path: PathBuf,
    pub seconds: f64,
    pub max_abs: f64,
}

/// `max_t |A_other − A_reference| / max_t |A_reference|`.
#[derive(Debug, Clone, Serialize)]
pub struct Deviation {
    pub reference: Solver,
    pub other: Solver,
    pub max_relative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PulseSummary {
    pub solver: Solver,
    pub count: usize,
    pub count_above_barrier: usize,
    pub mean_spacing_ns: Option<f64>,
    pub envelope_ratio_at_3us: Option<f64>,
    pub late_ratio_after_2us: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakRecord {
    pub omega_minus_omega_c_over_2pi_mhz: f64,
    pub cavity_content: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceCount {
    pub coupling_mhz: f64,
    pub roots: usize,
    pub resonant: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub card_version: &'static str,
    pub out_dir: PathBuf,
    pub solver: SolverChoice,
    pub hole_centers_mhz: Vec<f64>,
    pub peaks: Vec<PeakRecord>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub deviations: Vec<Deviation>,
    pub pulses: Option<PulseSummary>,
    pub resonances: Vec<ResonanceCount>,
    pub files: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub files: Vec<String>,
    pub couplings_mhz: Vec<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityRow {
    /// Fractional displacement of every hole from the cavity.
    pub shift: f64,
    /// Mean pulse peak over e^{−κt} for t > 2 μs.
    pub late_ratio: f64,
    /// `late_ratio` relative to the unshifted holes.
    pub relative: f64,
}

/// The spin density and everything the dynamics needs.
struct Prepared {
    f: SpectralFunction,
    p: SystemParams,
    drive: DriveSignal,
    a0: Complex64,
    grid: TimeGrid,
    /// Modes and dominant peaks of the hole-free comb, when computed.
    modes: Option<(ModeSet, Vec<PolaritonPeak>)>,
    holes: Vec<HoleSpec>,
}

fn hole_free_modes(s: &Scenario, bare: &SpectralFunction, p: &SystemParams) -> Result<ModeSet> {
    let ens = discretize_full(bare, s.bins)?;
    solve_eigenvalues(&build_generator_matrix(&ens, p)?)
}

/// Hole specs for the scenario; auto holes take the strongest peaks.
fn hole_specs(s: &Scenario, modes: Option<&ModeSet>) -> Result<Vec<HoleSpec>> {
    match (&s.comb.holes, s.explicit_holes()) {
        (_, Some(v)) => Ok(v),
        (HolePolicy::Auto(a), None) => {
            let modes =
                modes.ok_or_else(|| Error::Contract("auto holes need the mode set".into()))?;
            let centers = find_polariton_peaks(modes, a.k)?
                .iter()
                .map(|pk| pk.frequency)
                .collect::<Vec<_>>();
            let n = centers.len();
            Ok(vec![
                HoleSpec::new(centers, units::mhz(a.fwhm_mhz)).with_depths(vec![a.depth; n])
            ])
        }
        _ => unreachable!("explicit_holes is None only for the auto policy"),
    }
}

fn burn(f: &SpectralFunction, holes: &[HoleSpec]) -> Result<SpectralFunction> {
    holes
        .iter()
        .try_fold(f.clone(), |acc, h| apply_holes(&acc, h))
}

fn prepare(s: &Scenario, timings: &mut BTreeMap<String, f64>) -> Result<Prepared> {
    let p = s.system_params();
    p.validate().stage("system")?;
    let t = Instant::now();
    let bare = build_spectral_function(&s.comb.config()).stage("spectral")?;
    timings.insert("spectral".into(), t.elapsed().as_secs_f64());
    let needs_modes = s.modes || matches!(s.comb.holes, HolePolicy::Auto(_));
    let modes = if needs_modes {
        let t = Instant::now();
        let m = hole_free_modes(s, &bare, &p).stage("modes")?;
        let peaks = dominant_peaks(&m);
        timings.insert("modes".into(), t.elapsed().as_secs_f64());
        Some((m, peaks))
    } else {
        None
    };
    let holes = hole_specs(s, modes.as_ref().map(|m| &m.0)).stage("holes")?;
    let f = burn(&bare, &holes).stage("holes")?;
    Ok(Prepared {
        f,
        p,
        drive: s.drive_signal().stage("drive")?,
        a0: Complex64::new(s.a0(), 0.0),
        grid: s.time_grid().stage("time")?,
        modes,
        holes,
    })
}

fn simulate(
    solver: Solver,
    prep: &Prepared,
    f: &SpectralFunction,
    bins: usize,
) -> Result<Trajectory> {
    let (p, drive, a0, grid) = (&prep.p, &prep.drive, prep.a0, &prep.grid);
    match solver {
        Solver::Ode => {
            let ens = discretize_full(f, bins)?;
            integrate_ode(&ens, p, drive, a0, None, grid, &OdeOptions::default())
        }
        Solver::Volterra => solve_volterra(f, p, drive, a0, None, grid),
        Solver::Laplace => laplace_response(f, p, drive, a0, grid),
    }
    .stage(solver.as_str())
}

/// Nominal revival period 2π/Δω in μs.
fn revival_period(s: &Scenario) -> f64 {
    TAU / units::mhz(s.comb.delta_omega_mhz)
}

fn metrics(s: &Scenario, traj: &Trajectory, kappa: f64) -> Result<PulseMetrics> {
    pulse_metrics(traj, kappa, revival_period(s)).stage("metrics")
}

fn coupling_tag(c: f64) -> String {
    format!("omega{c}mhz")
}

/// Runs the whole pipeline and writes its artifacts to
/// [`Scenario::output_dir`].
///
/// CSV outputs are byte-identical across runs. An `all` run whose ODE and
/// Volterra trajectories differ by more than 1e-5 relative writes its files
/// and then fails with a validation error.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    s.validate()?;
    let out = s.output_dir();
    std::fs::create_dir_all(&out).stage("output")?;
    let mut timings = BTreeMap::new();
    let mut files = Vec::new();
    let prep = prepare(s, &mut timings)?;
    let cavity = prep.p.cavity;

    output::spectrum(&out.join("spectrum.csv"), &prep.f).stage("output")?;
    files.push("spectrum.csv".to_string());

    let mut peaks = Vec::new();
    if let Some((m, pk)) = &prep.modes {
        output::modes(
            &out.join("modes.csv"),
            [(units::ghz(s.comb.omega_s_ghz), m)],
        )
        .stage("output")?;
        output::peaks(&out.join("peaks.csv"), pk, cavity).stage("output")?;
        files.extend(["modes.csv".to_string(), "peaks.csv".to_string()]);
        peaks = pk
            .iter()
            .map(|x| PeakRecord {
                omega_minus_omega_c_over_2pi_mhz: units::to_mhz(x.frequency - cavity),
                cavity_content: x.content,
                weight: x.weight,
            })
            .collect();
    }
    let hole_centers_mhz = prep
        .holes
        .iter()
        .flat_map(|h| h.centers.iter().map(|c| units::to_mhz(c - cavity)))
        .collect();

    let mut resonances = Vec::new();
    if let Some(l) = &s.laplace {
        let t = Instant::now();
        let own = l.couplings_mhz.is_empty();
        let couplings = if own {
            vec![s.comb.omega_over_2pi_mhz]
        } else {
            l.couplings_mhz.clone()
        };
        for c in couplings {
            let f = build_spectral_function(&s.comb.config_with_coupling(c))
                .and_then(|f| burn(&f, &prep.holes))
                .stage("laplace")?;
            let spec =
                laplace_spectrum(&f, &prep.p, &default_frequency_grid(&f)).stage("laplace")?;
            let name = if own {
                "laplace.csv".to_string()
            } else {
                format!("laplace_{}.csv", coupling_tag(c))
            };
            output::laplace(&out.join(&name), &spec).stage("output")?;
            files.push(name);
            resonances.push(ResonanceCount {
                coupling_mhz: c,
                roots: spec.resonances.len(),
                resonant: spec.resonant_count(),
            });
        }
        timings.insert("laplace".into(), t.elapsed().as_secs_f64());
    }

    if let Some(sw) = run_sweep_into(s, &out)? {
        files.extend(sw.files);
    }

    let choice = s.solver();
    let solvers = choice.solvers(!prep.holes.iter().all(HoleSpec::is_empty));
    let mut trajectories = Vec::new();
    let mut runs: Vec<Trajectory> = Vec::new();
    for (i, &solver) in solvers.iter().enumerate() {
        let t = Instant::now();
        let traj = simulate(solver, &prep, &prep.f, s.bins)?;
        let seconds = t.elapsed().as_secs_f64();
        timings.insert(solver.as_str().into(), seconds);
        let name = if i == 0 {
            "trajectory.csv".to_string()
        } else {
            format!("trajectory_{solver}.csv")
        };
        output::trajectory(&out.join(&name), &traj, prep.p.kappa).stage("output")?;
        trajectories.push(TrajectoryRecord {
            solver,
            path: out.join(&name),
            seconds,
            max_abs: traj.max_abs(),
        });
        files.push(name);
        runs.push(traj);
    }

    let mut pulses = None;
    if let Some(primary) = runs.first() {
        let m = metrics(s, primary, prep.p.kappa)?;
        output::pulses(&out.join("pulses.csv"), &m).stage("output")?;
        files.push("pulses.csv".into());
        pulses = Some(PulseSummary {
            solver: primary.solver,
            count: m.len(),
            count_above_barrier: m.count_above,
            mean_spacing_ns: m.mean_spacing(SPACING_PULSES).map(units::to_ns),
            envelope_ratio_at_3us: m.envelope_ratio(RATIO_AT_US),
            late_ratio_after_2us: m.late_ratio(LATE_AFTER_US),
        });
    }

    let mut deviations = Vec::new();
    if let Some((reference, rest)) = runs.split_first() {
        for other in rest {
            deviations.push(Deviation {
                reference: reference.solver,
                other: other.solver,
                max_relative: reference
                    .deviation(other, prep.grid.len())
                    .stage("validation")?,
            });
        }
    }

    files.push("report.json".into());
    let report = RunReport {
        name: s.name.clone(),
        card_version: params::CARD_VERSION,
        out_dir: out.clone(),
        solver: choice,
        hole_centers_mhz,
        peaks,
        trajectories,
        deviations,
        pulses,
        resonances,
        files,
        timings,
    };
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )
    .stage("output")?;

    if choice == SolverChoice::All {
        let gate = report
            .deviations
            .iter()
            .find(|d| d.reference == Solver::Ode && d.other == Solver::Volterra);
        if let Some(d) = gate.filter(|d| !(d.max_relative <= CROSS_CHECK_LIMIT)) {
            return Err(Error::Validation(format!(
                "ODE and Volterra trajectories differ by {:.3e} relative (limit {CROSS_CHECK_LIMIT:e})",
                d.max_relative
            ))
            .at("validation"));
        }
    }
    Ok(report)
}

fn run_sweep_into(s: &Scenario, out: &Path) -> Result<Option<SweepReport>> {
    let Some(sw) = &s.sweep else { return Ok(None) };
    let p = s.system_params();
    let mut files = Vec::new();
    for &c in &sw.couplings_mhz {
        let cfg = s.comb.config_with_coupling(c);
        let span = units::mhz(sw.span_mhz);
        let centers = linear_grid(cfg.center - span, cfg.center + span, sw.points);
        let map = sweep_detuning(&cfg, &p, &centers, s.bins).stage("sweep")?;
        let name = format!("sweep_{}.csv", coupling_tag(c));
        output::sweep(&out.join(&name), &map.points).stage("output")?;
        files.push(name);
    }
    Ok(Some(SweepReport {
        files,
        couplings_mhz: sw.couplings_mhz.clone(),
        points: sw.points,
    }))
}

/// Detuning maps for the scenario's sweep spec (the default spec when it
/// has none), one `sweep_omega<Ω>mhz.csv` per coupling.
pub fn run_sweep(s: &Scenario) -> Result<SweepReport> {
    let mut s = s.clone();
    s.sweep.get_or_insert_with(Default::default);
    s.validate()?;
    let out = s.output_dir();
    std::fs::create_dir_all(&out).stage("output")?;
    Ok(run_sweep_into(&s, &out)?.expect("sweep spec is set"))
}

/// Displaces every automatic hole by `shift · (center − ω_c)` and compares
/// the late-time (t > 2 μs) pulse envelope with the unshifted holes.
pub fn sensitivity_study(s: &Scenario, shifts: &[f64]) -> Result<Vec<SensitivityRow>> {
    s.validate()?;
    let HolePolicy::Auto(auto) = &s.comb.holes else {
        return Err(Error::Config(format!(
            "scenario \"{}\": the sensitivity study needs automatic holes",
            s.name
        )));
    };
    if !(s.time.t_max_ns > units::to_ns(LATE_AFTER_US)) {
        return Err(Error::Config(format!(
            "scenario \"{}\": the sensitivity study needs t_max_ns > {}",
            s.name,
            units::to_ns(LATE_AFTER_US)
        )));
    }
    let solver = *s
        .solver()
        .solvers(true)
        .first()
        .ok_or_else(|| Error::Config("the sensitivity study needs a solver".into()))?;
    let mut timings = BTreeMap::new();
    let prep = prepare(s, &mut timings)?;
    let cavity = prep.p.cavity;
    let optimal = prep.holes[0].centers.clone();
    let bare = build_spectral_function(&s.comb.config()).stage("spectral")?;

    let late = |shift: f64| -> Result<f64> {
        let centers: Vec<f64> = optimal
            .iter()
            .map(|c| cavity + (c - cavity) * (1.0 + shift))
            .collect();
        let n = centers.len();
        let spec =
            HoleSpec::new(centers, units::mhz(auto.fwhm_mhz)).with_depths(vec![auto.depth; n]);
        let f = apply_holes(&bare, &spec).stage("holes")?;
        let traj = simulate(solver, &prep, &f, s.bins)?;
        metrics(s, &traj, prep.p.kappa)?
            .late_ratio(LATE_AFTER_US)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "no pulses after {LATE_AFTER_US} μs at shift {shift}"
                ))
                .at("sensitivity")
            })
    };
    let base = late(0.0)?;
    shifts
        .par_iter()
        .map(|&shift| {
            let value = if shift == 0.0 { base } else { late(shift)? };
            Ok(SensitivityRow {
                shift,
                late_ratio: value,
                relative: value / base,
            })
        })
        .collect()
}

/// Writes `shift_fraction, late_envelope_ratio, relative_to_unshifted`.
pub fn write_sensitivity_csv(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    output::sensitivity(path, rows)
}
