//! Scenarios compiled into the library, one per reproduced figure.

use super::{
    AutoHoles, CombSection, DriveSpec, HolePolicy, LaplaceSection, Scenario, SolverChoice,
    SweepSpec, TimeSection,
};
use crate::params;

const NAMES: &[&str] = &[
    "fig1a",
    "fig1b",
    "fig2a",
    "fig2b",
    "fig2c",
    "fig2d",
    "fig3sweep",
    "fig4",
    "figs2",
    "long_pulse",
];

pub fn builtin_names() -> &'static [&'static str] {
    NAMES
}

fn base(name: &str, coupling_mhz: f64) -> Scenario {
    Scenario {
        name: name.into(),
        comb: CombSection {
            omega_over_2pi_mhz: coupling_mhz,
            ..CombSection::default()
        },
        ..Scenario::default()
    }
}

fn with_time(mut s: Scenario, t_max_ns: f64) -> Scenario {
    s.time = TimeSection {
        t_max_ns,
        step_ns: params::STEP_NS,
    };
    s
}

fn pulsed(mut s: Scenario, duration_ns: f64) -> Scenario {
    s.drive = Some(DriveSpec {
        duration_ns,
        ..DriveSpec::default()
    });
    s
}

/// A built-in scenario by name, fully resolved.
pub fn builtin(name: &str) -> Option<Scenario> {
    let strong = params::COUPLING_STRONG_MHZ;
    let multi = params::COUPLING_MULTIMODE_MHZ;
    let s = match name {
        "fig1a" => {
            let mut s = base(name, multi);
            s.solver = Some(SolverChoice::None);
            s
        }
        "fig1b" => {
            let mut s = base(name, multi);
            s.comb.holes = HolePolicy::Auto(AutoHoles::default());
            s.solver = Some(SolverChoice::None);
            s.modes = true;
            s
        }
        "fig2a" => {
            let mut s = with_time(base(name, strong), 400.0);
            s.modes = true;
            s
        }
        "fig2b" => pulsed(with_time(base(name, strong), 400.0), params::PULSE_NS),
        "fig2c" => with_time(base(name, multi), 600.0),
        "fig2d" => pulsed(with_time(base(name, multi), 600.0), params::PULSE_NS),
        "fig3sweep" => {
            let mut s = base(name, multi);
            s.solver = Some(SolverChoice::None);
            s.sweep = Some(SweepSpec::default());
            s
        }
        "fig4" => {
            let mut s = pulsed(with_time(base(name, multi), 3050.0), params::PULSE_NS);
            s.comb.holes = HolePolicy::Auto(AutoHoles::default());
            s.solver = Some(SolverChoice::Volterra);
            s
        }
        "figs2" => {
            let mut s = base(name, multi);
            s.solver = Some(SolverChoice::None);
            s.laplace = Some(LaplaceSection {
                couplings_mhz: vec![strong, multi],
            });
            s
        }
        // longer drive: irregular dynamics, no quantitative target
        "long_pulse" => pulsed(with_time(base(name, multi), 600.0), 60.0),
        _ => return None,
    };
    Some(s.resolved().expect("built-in scenarios are valid"))
}
