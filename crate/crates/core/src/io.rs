//! Key–value configuration files and CSV data files.
//!
//! Frequencies in files are plain Hz; they are converted to rad/s on reading.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::coherent::CoherentTrace;
use crate::error::{Error, Result};
use crate::params::{hz, to_hz, SystemParams};
use crate::spectra::Spectrum;
use crate::timedomain::{PulseSpec, TimeTrace};

/// Parameter keys in file order.
pub const PARAM_KEYS: [&str; 14] = [
    "omega_m_hz",
    "gamma_m_hz",
    "kappa_ex_hz",
    "kappa_0_hz",
    "g0_hz",
    "detuning_hz",
    "abar0",
    "g_pte_hz",
    "g_ptr_hz",
    "nbar_bath",
    "eta_cryo",
    "bs_ratio",
    "phi_lo_rad",
    "s_lo_amp",
];

const OPTIONAL_DEFAULTS: [(&str, f64); 6] = [
    ("g_pte_hz", 0.0),
    ("g_ptr_hz", 0.0),
    ("eta_cryo", 1.0),
    ("bs_ratio", 0.5),
    ("phi_lo_rad", 0.0),
    ("s_lo_amp", 1.0),
];

/// Pulse keys in file order.
pub const PULSE_KEYS: [&str; 8] = [
    "u0_v",
    "tau_s",
    "t0_s",
    "omega_mod_hz",
    "phi0_rad",
    "v_pi_v",
    "p_carrier_w",
    "wavelength_nm",
];

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: SystemParams,
    pub pulse: Option<PulseSpec>,
    /// `*_sigma` and `fit_*` entries, as written in fit reports.
    pub extra: BTreeMap<String, f64>,
}

fn parse_value(line: usize, key: &str, text: &str) -> Result<f64> {
    let v = match text {
        "true" => 1.0,
        "false" => 0.0,
        _ => text.parse::<f64>().map_err(|_| Error::Parse {
            line,
            reason: format!("value of `{key}` is not a number: `{text}`"),
        })?,
    };
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            reason: format!("value of `{key}` is not finite"),
        });
    }
    Ok(v)
}

/// Parses the flat `key = value` dialect with `#` comments.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, (usize, f64)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(Error::Parse {
                line,
                reason: format!("expected `key = value`, got `{body}`"),
            });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                reason: "empty key".into(),
            });
        }
        let value = parse_value(line, &key, v.trim())?;
        if out.insert(key.clone(), (line, value)).is_some() {
            return Err(Error::Parse {
                line,
                reason: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

fn is_extra(key: &str) -> bool {
    key.ends_with("_sigma") || key.starts_with("fit_")
}

pub fn parse_config(text: &str) -> Result<Config> {
    let kv = parse_key_values(text)?;
    for (key, (line, _)) in &kv {
        if !PARAM_KEYS.contains(&key.as_str()) && !PULSE_KEYS.contains(&key.as_str()) && !is_extra(key) {
            return Err(Error::Parse {
                line: *line,
                reason: format!("unknown key `{key}`"),
            });
        }
    }
    let get = |key: &str| -> Result<f64> {
        if let Some((_, v)) = kv.get(key) {
            return Ok(*v);
        }
        OPTIONAL_DEFAULTS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("missing required key `{key}`"),
            })
    };
    let params = SystemParams {
        omega_m: hz(get("omega_m_hz")?),
        gamma_m: hz(get("gamma_m_hz")?),
        kappa_ex: hz(get("kappa_ex_hz")?),
        kappa_0: hz(get("kappa_0_hz")?),
        g0: hz(get("g0_hz")?),
        detuning: hz(get("detuning_hz")?),
        abar0: get("abar0")?,
        g_pte: hz(get("g_pte_hz")?),
        g_ptr: hz(get("g_ptr_hz")?),
        nbar_bath: get("nbar_bath")?,
        eta_cryo: get("eta_cryo")?,
        bs_ratio: get("bs_ratio")?,
        phi_lo: get("phi_lo_rad")?,
        s_lo_amp: get("s_lo_amp")?,
    };
    params.validate()?;

    let pulse = if PULSE_KEYS.iter().any(|k| kv.contains_key(*k)) {
        let req = |key: &str| -> Result<f64> {
            kv.get(key).map(|(_, v)| *v).ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("pulse configuration is missing `{key}`"),
            })
        };
        let p = PulseSpec {
            u0: req("u0_v")?,
            tau: req("tau_s")?,
            t0: req("t0_s")?,
            omega_mod: hz(req("omega_mod_hz")?),
            phi0: kv.get("phi0_rad").map(|(_, v)| *v).unwrap_or(0.0),
            v_pi: req("v_pi_v")?,
            p_carrier: req("p_carrier_w")?,
            omega_optical: PulseSpec::omega_from_wavelength(req("wavelength_nm")? * 1e-9),
        };
        p.validate()?;
        Some(p)
    } else {
        None
    };
    let extra = kv
        .iter()
        .filter(|(k, _)| is_extra(k))
        .map(|(k, (_, v))| (k.clone(), *v))
        .collect();
    Ok(Config { params, pulse, extra })
}

/// Number formatting shared by every output file: 15 significant digits in
/// shortest form, which hides Hz to rad/s round-off.
pub fn fmt_num(v: f64) -> String {
    let v: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    let a = v.abs();
    if v == 0.0 || (1e-3..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Parameter values as `(key, value)` pairs in file units.
pub fn param_entries(p: &SystemParams) -> Vec<(&'static str, f64)> {
    vec![
        ("omega_m_hz", to_hz(p.omega_m)),
        ("gamma_m_hz", to_hz(p.gamma_m)),
        ("kappa_ex_hz", to_hz(p.kappa_ex)),
        ("kappa_0_hz", to_hz(p.kappa_0)),
        ("g0_hz", to_hz(p.g0)),
        ("detuning_hz", to_hz(p.detuning)),
        ("abar0", p.abar0),
        ("g_pte_hz", to_hz(p.g_pte)),
        ("g_ptr_hz", to_hz(p.g_ptr)),
        ("nbar_bath", p.nbar_bath),
        ("eta_cryo", p.eta_cryo),
        ("bs_ratio", p.bs_ratio),
        ("phi_lo_rad", p.phi_lo),
        ("s_lo_amp", p.s_lo_amp),
    ]
}

pub fn pulse_entries(p: &PulseSpec) -> Vec<(&'static str, f64)> {
    vec![
        ("u0_v", p.u0),
        ("tau_s", p.tau),
        ("t0_s", p.t0),
        ("omega_mod_hz", to_hz(p.omega_mod)),
        ("phi0_rad", p.phi0),
        ("v_pi_v", p.v_pi),
        ("p_carrier_w", p.p_carrier),
        (
            "wavelength_nm",
            crate::params::TWO_PI * crate::timedomain::SPEED_OF_LIGHT / p.omega_optical * 1e9,
        ),
    ]
}

/// Configuration text that [`parse_config`] reads back.
pub fn format_config(config: &Config) -> String {
    let mut s = String::new();
    for (k, v) in param_entries(&config.params) {
        s.push_str(&format!("{k} = {}\n", fmt_num(v)));
    }
    if let Some(p) = &config.pulse {
        for (k, v) in pulse_entries(p) {
            s.push_str(&format!("{k} = {}\n", fmt_num(v)));
        }
    }
    for (k, v) in &config.extra {
        s.push_str(&format!("{k} = {}\n", fmt_num(*v)));
    }
    s
}

fn comment_block(comments: &[String]) -> String {
    comments.iter().map(|c| format!("# {c}\n")).collect()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_row(line: usize, row: &str, n: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = row.split(',').map(str::trim).collect();
    if fields.len() != n {
        return Err(Error::Parse {
            line,
            reason: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line,
                reason: format!("not a finite number: `{f}`"),
            })
        })
        .collect()
}

fn read_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = data_lines(text);
    let Some((line, first)) = lines.next() else {
        return Err(Error::Parse {
            line: 0,
            reason: format!("missing header `{header}`"),
        });
    };
    if first.replace(' ', "") != header {
        return Err(Error::Parse {
            line,
            reason: format!("expected header `{header}`, found `{first}`"),
        });
    }
    let n = header.split(',').count();
    lines.map(|(line, row)| parse_row(line, row, n)).collect()
}

pub const SPECTRUM_HEADER: &str = "freq_hz,value";
pub const COHERENT_HEADER: &str = "freq_hz,re,im";
pub const TIME_HEADER: &str = "t_s,drive,homodyne,displacement";

pub fn write_spectrum_csv(spectrum: &Spectrum, comments: &[String]) -> String {
    let mut s = comment_block(comments);
    s.push_str(&format!("# values: {}\n", spectrum.unit_label));
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    for (w, v) in spectrum.grid.iter().zip(&spectrum.values) {
        s.push_str(&format!("{},{}\n", fmt_num(to_hz(*w)), fmt_num(*v)));
    }
    s
}

pub fn read_spectrum_csv(text: &str) -> Result<Spectrum> {
    let rows = read_table(text, SPECTRUM_HEADER)?;
    let label = text
        .lines()
        .find_map(|l| l.strip_prefix("# values: "))
        .unwrap_or("")
        .to_string();
    Spectrum::new(rows.iter().map(|r| hz(r[0])).collect(), rows.iter().map(|r| r[1]).collect(), label)
}

pub fn write_coherent_csv(trace: &CoherentTrace, comments: &[String]) -> String {
    let mut s = comment_block(comments);
    s.push_str(COHERENT_HEADER);
    s.push('\n');
    for (w, z) in trace.grid.iter().zip(&trace.response) {
        s.push_str(&format!("{},{},{}\n", fmt_num(to_hz(*w)), fmt_num(z.re), fmt_num(z.im)));
    }
    s
}

pub fn read_coherent_csv(text: &str) -> Result<CoherentTrace> {
    let rows = read_table(text, COHERENT_HEADER)?;
    CoherentTrace::new(
        rows.iter().map(|r| hz(r[0])).collect(),
        rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
    )
}

pub fn write_time_trace_csv(trace: &TimeTrace, comments: &[String]) -> String {
    let mut s = comment_block(comments);
    s.push_str(TIME_HEADER);
    s.push('\n');
    for k in 0..trace.times.len() {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_num(trace.times[k]),
            fmt_num(trace.drive[k]),
            fmt_num(trace.homodyne[k]),
            fmt_num(trace.displacement[k])
        ));
    }
    s
}

pub fn read_time_trace_csv(text: &str) -> Result<TimeTrace> {
    let rows = read_table(text, TIME_HEADER)?;
    Ok(TimeTrace {
        times: rows.iter().map(|r| r[0]).collect(),
        drive: rows.iter().map(|r| r[1]).collect(),
        homodyne: rows.iter().map(|r| r[2]).collect(),
        displacement: rows.iter().map(|r| r[3]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::presets;

    const MINIMAL: &str = "\
# cooling run
omega_m_hz = 78.226e6
gamma_m_hz = 3600
kappa_ex_hz = 3.02e6
kappa_0_hz = 3.02e6
g0_hz = 3400
detuning_hz = -78.226e6
abar0 = 14200
nbar_bath = 611.1
";

    #[test]
    fn defaults_for_optional_keys() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.params.g_pte, 0.0);
        assert_eq!(c.params.eta_cryo, 1.0);
        assert_eq!(c.params.bs_ratio, 0.5);
        assert_eq!(c.params.s_lo_amp, 1.0);
        assert!((c.params.omega_m - hz(78.226e6)).abs() < 1e-3);
        assert!(c.pulse.is_none());
    }

    #[test]
    fn round_trip_preserves_values() {
        let cfg = Config {
            params: presets::cooling_run(),
            pulse: None,
            extra: [("omega_m_sigma".to_string(), 700.0)].into_iter().collect(),
        };
        let back = parse_config(&format_config(&cfg)).unwrap();
        for ((k, a), (_, b)) in param_entries(&cfg.params).iter().zip(param_entries(&back.params)) {
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{k}");
        }
        assert_eq!(back.extra, cfg.extra);
    }

    #[test]
    fn reports_bad_lines() {
        let bad = format!("{MINIMAL}bogus = 1\n");
        assert!(matches!(parse_config(&bad), Err(Error::Parse { line: 10, .. })));
        let bad = MINIMAL.replace("3600", "fast");
        assert!(matches!(parse_config(&bad), Err(Error::Parse { line: 3, .. })));
        let missing = MINIMAL.replace("abar0 = 14200\n", "");
        assert!(matches!(parse_config(&missing), Err(Error::Parse { .. })));
        let dup = format!("{MINIMAL}abar0 = 1\n");
        assert!(parse_config(&dup).is_err());
    }

    #[test]
    fn invalid_parameter_is_named() {
        let bad = MINIMAL.replace("gamma_m_hz = 3600", "gamma_m_hz = -1");
        assert!(matches!(
            parse_config(&bad),
            Err(Error::InvalidParameter { field: "gamma_m", .. })
        ));
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let s = Spectrum::new(vec![hz(1e6), hz(2e6)], vec![0.5, 1.25], "x").unwrap();
        let text = write_spectrum_csv(&s, &["a = 1".into()]);
        assert!(text.starts_with("# a = 1\n"));
        let back = read_spectrum_csv(&text).unwrap();
        assert_eq!(back.values, s.values);
        assert!((back.grid[1] - s.grid[1]).abs() < 1e-6);
        assert!(read_spectrum_csv("freq,value\n1,2\n").is_err());
    }
}
