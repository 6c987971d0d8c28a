//! Key validation on the raw JSON, so that typos and unit mistakes are
//! reported by name before deserialization.

use serde_json::{Map, Value};

use crate::{Error, Result};

const TOP: &[&str] = &[
    "name", "comb", "system", "drive", "a0", "solver", "bins", "time", "modes", "laplace", "sweep",
    "out_dir",
];
const COMB: &[&str] = &[
    "m",
    "delta_omega_mhz",
    "sigma_g_mhz",
    "gamma_q_mhz",
    "q",
    "omega_c_ghz",
    "omega_s_ghz",
    "omega_over_2pi_mhz",
    "holes",
];
const SYSTEM: &[&str] = &["kappa_mhz", "gamma_mhz", "omega_p_ghz"];
const DRIVE: &[&str] = &["start_ns", "duration_ns", "amplitude"];
const TIME: &[&str] = &["t_max_ns", "step_ns"];
const SWEEP: &[&str] = &["couplings_mhz", "span_mhz", "points"];
const LAPLACE: &[&str] = &["couplings_mhz"];
const HOLE: &[&str] = &["center_mhz_rel_cavity", "fwhm_mhz", "depth"];
const AUTO: &[&str] = &["k", "fwhm_mhz", "depth"];

const UNITS: &[&str] = &["hz", "khz", "mhz", "ghz", "s", "ms", "us", "ns", "ps"];

pub(super) fn check(v: &Value) -> Result<()> {
    let top = object(v, "scenario")?;
    keys(top, TOP, "scenario")?;
    for (key, known) in [
        ("system", SYSTEM),
        ("time", TIME),
        ("sweep", SWEEP),
        ("laplace", LAPLACE),
    ] {
        if let Some(section) = top.get(key).filter(|s| !s.is_null()) {
            keys(object(section, key)?, known, key)?;
        }
    }
    if let Some(d) = top.get("drive").filter(|d| d.is_object()) {
        keys(object(d, "drive")?, DRIVE, "drive")?;
    }
    if let Some(comb) = top.get("comb") {
        let comb = object(comb, "comb")?;
        keys(comb, COMB, "comb")?;
        match comb.get("holes") {
            Some(Value::Array(list)) => {
                for (i, h) in list.iter().enumerate() {
                    let path = format!("comb.holes[{i}]");
                    keys(object(h, &path)?, HOLE, &path)?;
                }
            }
            Some(Value::Object(o)) => {
                keys(o, &["auto"], "comb.holes")?;
                if let Some(a) = o.get("auto") {
                    keys(object(a, "comb.holes.auto")?, AUTO, "comb.holes.auto")?;
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Config(format!("{path} must be a JSON object")))
}

/// Splits a key into its unit-free stem and its unit tokens.
fn split_units(key: &str) -> (String, Vec<&str>) {
    let mut stem = Vec::new();
    let mut units = Vec::new();
    for tok in key.split('_') {
        if UNITS.contains(&tok) {
            units.push(tok);
        } else {
            stem.push(tok);
        }
    }
    (stem.join("_"), units)
}

fn keys(obj: &Map<String, Value>, known: &[&str], path: &str) -> Result<()> {
    for key in obj.keys() {
        if known.contains(&key.as_str()) {
            continue;
        }
        let (stem, _) = split_units(key);
        if let Some(expected) = known.iter().find(|k| split_units(k).0 == stem) {
            return Err(Error::Config(format!(
                "key \"{key}\" in {path} has the wrong unit; expected \"{expected}\""
            )));
        }
        return Err(Error::Config(format!(
            "unknown key \"{key}\" in {path}; allowed keys: {}",
            known.join(", ")
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unit_tokens_anywhere_in_the_key() {
        assert_eq!(
            split_units("center_mhz_rel_cavity"),
            ("center_rel_cavity".into(), vec!["mhz"])
        );
        assert_eq!(split_units("omega_over_2pi_mhz").0, "omega_over_2pi");
        assert_eq!(split_units("q").0, "q");
    }

    #[test]
    fn missing_unit_counts_as_a_unit_mismatch() {
        let e = check(&json!({"time": {"t_max": 400}})).unwrap_err();
        assert!(e.to_string().contains("wrong unit"), "{e}");
    }

    #[test]
    fn nested_paths_are_reported() {
        let e = check(&json!({"comb": {"holes": {"auto": {"count": 8}}}})).unwrap_err();
        assert!(e.to_string().contains("comb.holes.auto"), "{e}");
        let e = check(&json!({"comb": {"holes": [{}, {"width": 1}]}})).unwrap_err();
        assert!(e.to_string().contains("comb.holes[1]"), "{e}");
        assert!(check(&json!({"system": 3})).is_err());
        assert!(check(&json!({"drive": "none", "laplace": null})).is_ok());
    }
}
