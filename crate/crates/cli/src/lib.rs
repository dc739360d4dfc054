//! Batch front-end: argument parsing, dispatch and output files.

// Negated comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use optomech::coherent::{self, CoherentTrace};
use optomech::fitting::{self, FitOptions, McCalibration, NoiseFitOptions, Scatter, SharedParam, UncertaintyBudget};
use optomech::io::{self, fmt_num, Config};
use optomech::response::normal_mode_frequencies;
use optomech::spectra::{self, CalibrationRef, ForceModel, NoiseModel, Spectrum};
use optomech::timedomain::{self, PulseOptions};
use optomech::{derive, hz, to_hz, Error, SystemParams};
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(name = "optomech", version, about = "Cavity optomechanics simulation and spectral fitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Key-value parameter file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Lower edge of the frequency grid, Hz.
    #[arg(long, global = true)]
    pub fmin: Option<f64>,
    /// Upper edge of the frequency grid, Hz.
    #[arg(long, global = true)]
    pub fmax: Option<f64>,
    /// Grid points (samples for simulate-pulse).
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Also write a gnuplot script next to each data file.
    #[arg(long, global = true)]
    pub gnuplot: bool,
    /// Thermal force 4(n̄+½)Γ_m instead of 4n̄Γ_m.
    #[arg(long, global = true)]
    pub quantum_force: bool,
    /// Thermorefractive noise table (CSV `freq_hz,value`).
    #[arg(long, global = true)]
    pub trn_table: Option<PathBuf>,
    /// Fiber-noise reference spectrum subtracted before fitting.
    #[arg(long, global = true)]
    pub gawbs_ref: Option<PathBuf>,
    /// Output file tag: `<command>_<tag>.*`.
    #[arg(long, global = true, default_value = "run")]
    pub tag: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived rates.
    Derive,
    /// Coherent homodyne response to phase modulation.
    SimulateCoherent,
    /// Homodyne and mechanical noise spectra.
    SimulateNoise {
        /// Write the homodyne spectrum in shot-noise units.
        #[arg(long)]
        normalized: bool,
    },
    /// Response to a Gaussian modulation pulse.
    SimulatePulse {
        /// Sample rate, Hz.
        #[arg(long, default_value_t = 1e9)]
        sample_rate: f64,
        /// Apply the 25-125 MHz detection band to the homodyne trace.
        #[arg(long)]
        detection_band: bool,
    },
    /// Global fit of a detuning series of coherent-response traces.
    FitCoherent {
        /// Trace files (CSV `freq_hz,re,im`).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Comma-separated free shared parameters; `kappa` keeps the κ_ex/κ_0 ratio of the config.
        #[arg(long, default_value = "omega_m,kappa,abar0,g_pte,g_ptr")]
        free: String,
        /// Fit the complex response instead of its magnitude.
        #[arg(long)]
        complex: bool,
        /// Report per-parameter scatter as the `_sigma` keys.
        #[arg(long)]
        scatter: bool,
    },
    /// Amplitude fit of a noise spectrum.
    FitNoise {
        /// Spectrum file (CSV `freq_hz,value`).
        input: PathBuf,
        /// Detection gain, raw units per model unit.
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
    },
    /// Monte-Carlo model errors of γ and n̄ and the total budget.
    McErrors {
        /// Spectrum file (CSV `freq_hz,value`).
        input: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        /// Key-value file with `<param>_sigma` entries; defaults to the config.
        #[arg(long)]
        scatter: Option<PathBuf>,
        /// Calibration tone, Hz; defaults to halfway between Ω_m and the band top.
        #[arg(long, conflicts_with = "unity_calibration")]
        tone_hz: Option<f64>,
        /// Keep the spectrum in model units for every draw.
        #[arg(long)]
        unity_calibration: bool,
        #[arg(long, default_value_t = fitting::DEFAULT_CALIB_REL)]
        calib_rel: f64,
        #[arg(long, default_value_t = 0.0)]
        gawbs_gamma_rel: f64,
        #[arg(long, default_value_t = 0.0)]
        gawbs_nbar_rel: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::SimulateCoherent => "simulate-coherent",
            Command::SimulateNoise { .. } => "simulate-noise",
            Command::SimulatePulse { .. } => "simulate-pulse",
            Command::FitCoherent { .. } => "fit-coherent",
            Command::FitNoise { .. } => "fit-noise",
            Command::McErrors { .. } => "mc-errors",
        }
    }
}

/// Failure of a CLI run with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 1.
    Validation(String),
    /// Numerical failure: exit code 2.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a command needs beyond its own flags.
struct Context<'a> {
    command: &'a Command,
    common: &'a Common,
    config: Config,
    config_hash: String,
    inputs: Vec<(PathBuf, String)>,
    grid: Option<(f64, f64, usize)>,
    written: Vec<PathBuf>,
}

impl Context<'_> {
    fn params(&self) -> SystemParams {
        self.config.params
    }

    fn noise_model(&self) -> CliResult<NoiseModel> {
        let trn_table = match &self.common.trn_table {
            Some(p) => Some(io::read_spectrum_csv(&read_text(p)?)?),
            None => None,
        };
        Ok(NoiseModel {
            force: if self.common.quantum_force {
                ForceModel::Quantum
            } else {
                ForceModel::Classical
            },
            trn_table,
        })
    }

    /// Frequency grid in rad/s from the flags or a band around the resonances.
    fn grid(&mut self, default_points: usize) -> CliResult<Vec<f64>> {
        let p = self.params();
        let lo_f = p.omega_m.min(p.detuning.abs());
        let hi_f = p.omega_m.max(p.detuning.abs());
        let reach = 3.0 * p.kappa();
        let fmin = self.common.fmin.unwrap_or_else(|| to_hz((lo_f - reach).max(hz(1e3))));
        let fmax = self.common.fmax.unwrap_or_else(|| to_hz(hi_f + reach));
        let n = self.common.points.unwrap_or(default_points);
        if !(fmin > 0.0) || !fmin.is_finite() {
            return Err(invalid(format!("--fmin must be > 0 Hz, got {fmin}")));
        }
        if !(fmax > fmin) || !fmax.is_finite() {
            return Err(invalid(format!("--fmax must exceed --fmin, got {fmax}")));
        }
        if n < 16 {
            return Err(invalid(format!("--points must be >= 16, got {n}")));
        }
        self.grid = Some((fmin, fmax, n));
        Ok(optomech::grid::uniform(hz(fmin), hz(fmax), n)?)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec![
            format!("optomech {} {}", optomech::VERSION, self.command.name()),
            "frequencies in Hz (angular rate / 2pi)".to_string(),
        ];
        h.extend(io::format_config(&self.config).lines().map(|l| l.to_string()));
        h.extend(self.option_lines());
        h
    }

    fn option_lines(&self) -> Vec<String> {
        let c = self.common;
        let mut v = vec![format!("seed = {}", c.seed)];
        if let Some((a, b, n)) = self.grid {
            v.push(format!("fmin_hz = {}", fmt_num(a)));
            v.push(format!("fmax_hz = {}", fmt_num(b)));
            v.push(format!("points = {n}"));
        }
        v.push(format!("quantum_force = {}", c.quantum_force));
        for (flag, path) in [("trn_table", &c.trn_table), ("gawbs_ref", &c.gawbs_ref)] {
            if let Some(p) = path {
                v.push(format!("{flag} = {}", p.display()));
            }
        }
        v
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.common
            .out
            .join(format!("{}_{}{suffix}", self.command.name(), self.common.tag))
    }

    fn write(&mut self, suffix: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(suffix);
        fs::write(&path, contents).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn gnuplot(&mut self, suffix: &str, data: &Path, columns: &[(&str, &str)], xlabel: &str) -> CliResult<()> {
        if !self.common.gnuplot {
            return Ok(());
        }
        let file = data.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set xlabel '{xlabel}'");
        let _ = writeln!(s, "set key top right");
        let plots: Vec<String> = columns
            .iter()
            .map(|(col, title)| format!("'{file}' using 1:{col} every ::1 with lines title '{title}'"))
            .collect();
        let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        let _ = writeln!(s, "pause -1");
        self.write(suffix, &s)?;
        Ok(())
    }

    fn provenance(&mut self) -> CliResult<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# run provenance");
        let _ = writeln!(s, "command = {}", self.command.name());
        let _ = writeln!(s, "version = {}", optomech::VERSION);
        if let Some(p) = &self.common.config {
            let _ = writeln!(s, "config = {}", p.display());
        }
        let _ = writeln!(s, "config_sha256 = {}", self.config_hash);
        for (i, (p, h)) in self.inputs.iter().enumerate() {
            let _ = writeln!(s, "input_{i} = {}", p.display());
            let _ = writeln!(s, "input_{i}_sha256 = {h}");
        }
        for line in self.option_lines() {
            let _ = writeln!(s, "{line}");
        }
        for (i, p) in self.written.iter().enumerate() {
            let name = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(s, "output_{i} = {name}");
        }
        let path = self.path(".provenance.txt");
        fs::write(&path, s).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn add_input(&mut self, path: &Path) -> CliResult<String> {
        let text = read_text(path)?;
        self.inputs.push((path.to_path_buf(), sha256_hex(text.as_bytes())));
        Ok(text)
    }
}

/// Result of a successful run.
#[derive(Debug)]
pub struct Outcome {
    /// Text for standard output.
    pub stdout: String,
    pub written: Vec<PathBuf>,
}

/// Caps the global thread pool from `OPTOMECH_THREADS`.
pub fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("OPTOMECH_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| invalid(format!("OPTOMECH_THREADS must be a positive integer, got `{v}`")))?;
        // A pool built earlier in the same process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let config_path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| invalid("--config is required"))?;
    let text = read_text(config_path)?;
    let config = io::parse_config(&text)?;
    fs::create_dir_all(&cli.common.out).map_err(|e| invalid(format!("{}: {e}", cli.common.out.display())))?;
    let mut ctx = Context {
        command: &cli.command,
        common: &cli.common,
        config,
        config_hash: sha256_hex(text.as_bytes()),
        inputs: Vec::new(),
        grid: None,
        written: Vec::new(),
    };
    let stdout = match &cli.command {
        Command::Derive => derive_cmd(&mut ctx)?,
        Command::SimulateCoherent => simulate_coherent(&mut ctx)?,
        Command::SimulateNoise { normalized } => simulate_noise(&mut ctx, *normalized)?,
        Command::SimulatePulse {
            sample_rate,
            detection_band,
        } => simulate_pulse(&mut ctx, *sample_rate, *detection_band)?,
        Command::FitCoherent {
            inputs,
            free,
            complex,
            scatter,
        } => fit_coherent(&mut ctx, inputs, free, *complex, *scatter)?,
        Command::FitNoise { input, gain } => fit_noise(&mut ctx, input, *gain)?,
        Command::McErrors {
            input,
            draws,
            scatter,
            tone_hz,
            unity_calibration,
            calib_rel,
            gawbs_gamma_rel,
            gawbs_nbar_rel,
        } => {
            let calibration = if *unity_calibration {
                None
            } else {
                Some(tone_hz.map(hz))
            };
            mc_errors(
                &mut ctx,
                input,
                *draws,
                scatter.as_deref(),
                calibration,
                *calib_rel,
                (*gawbs_gamma_rel, *gawbs_nbar_rel),
            )?
        }
    };
    ctx.provenance()?;
    Ok(Outcome {
        stdout,
        written: ctx.written,
    })
}

fn key_values(header: &[String], entries: &[(String, String)]) -> String {
    let mut s: String = header.iter().map(|h| format!("# {h}\n")).collect();
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn derive_cmd(ctx: &mut Context) -> CliResult<String> {
    let p = ctx.params();
    let d = derive(&p)?;
    let w = coherent::omit_dip_width(&p);
    let modes = normal_mode_frequencies(&p);
    let entries: Vec<(String, String)> = vec![
        ("kappa_hz", fmt_num(to_hz(d.kappa))),
        ("abar_re", fmt_num(d.abar.re)),
        ("abar_im", fmt_num(d.abar.im)),
        ("abar_abs", fmt_num(d.abar.norm())),
        ("nbar_cavity", fmt_num(d.nbar_cavity)),
        ("omega_c_hz", fmt_num(to_hz(d.omega_c))),
        ("gamma_cool_hz", fmt_num(to_hz(d.gamma_cool))),
        ("nbar_min", fmt_num(d.nbar_min)),
        ("gamma_decoherence_hz", fmt_num(to_hz(d.gamma_decoherence))),
        ("dip_width_hz", fmt_num(to_hz(w.width))),
        ("beyond_weak_coupling", w.beyond_weak_coupling.to_string()),
        ("normal_mode_splitting_hz", fmt_num(to_hz(modes.splitting()))),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let text = key_values(&ctx.header(), &entries);
    ctx.write(".txt", &text)?;
    Ok(text)
}

fn simulate_coherent(ctx: &mut Context) -> CliResult<String> {
    let g = ctx.grid(2001)?;
    let trace = coherent::coherent_response(&ctx.params(), &g)?;
    let data = ctx.write(".csv", &io::write_coherent_csv(&trace, &ctx.header()))?;
    ctx.gnuplot(".gp", &data, &[("(sqrt($2**2+$3**2))", "|R|")], "modulation frequency (Hz)")?;
    Ok(String::new())
}

fn simulate_noise(ctx: &mut Context, normalized: bool) -> CliResult<String> {
    let g = ctx.grid(2001)?;
    let p = ctx.params();
    let model = ctx.noise_model()?;
    let (hh, qq) = spectra::output_spectra_with(&p, &g, &model)?;
    let hh = if normalized {
        spectra::normalize_to_shot_noise(&p, &hh)
    } else {
        hh
    };
    let header = ctx.header();
    let data = ctx.write(".csv", &io::write_spectrum_csv(&hh, &header))?;
    let qq_data = ctx.write("_qq.csv", &io::write_spectrum_csv(&qq, &header))?;
    ctx.gnuplot(".gp", &data, &[("2", "s_hh")], "frequency (Hz)")?;
    ctx.gnuplot("_qq.gp", &qq_data, &[("2", "s_qq")], "frequency (Hz)")?;
    Ok(String::new())
}

fn simulate_pulse(ctx: &mut Context, sample_rate: f64, detection_band: bool) -> CliResult<String> {
    let pulse = ctx
        .config
        .pulse
        .ok_or_else(|| invalid("simulate-pulse needs the pulse keys in the config"))?;
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(invalid(format!("--sample-rate must be > 0, got {sample_rate}")));
    }
    let n = ctx.common.points.unwrap_or(4000);
    if n < 16 {
        return Err(invalid(format!("--points must be >= 16, got {n}")));
    }
    let times = timedomain::sample_times(0.0, sample_rate, n);
    let opts = if detection_band {
        PulseOptions::with_detection_band()
    } else {
        PulseOptions::default()
    };
    let trace = timedomain::pulse_response(&ctx.params(), &pulse, &times, &opts)?;
    let mut header = ctx.header();
    header.push(format!("sample_rate_hz = {}", fmt_num(sample_rate)));
    header.push(format!("samples = {n}"));
    header.push(format!("detection_band = {detection_band}"));
    header.push(format!("pulse_photons = {}", fmt_num(timedomain::pulse_photons(&pulse))));
    let data = ctx.write(".csv", &io::write_time_trace_csv(&trace, &header))?;
    ctx.gnuplot(".gp", &data, &[("3", "homodyne"), ("4", "displacement")], "time (s)")?;
    Ok(String::new())
}

fn parse_free(list: &str) -> CliResult<Vec<SharedParam>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            SharedParam::ALL
                .into_iter()
                .find(|p| p.name() == s)
                .ok_or_else(|| invalid(format!("unknown shared parameter `{s}`")))
        })
        .collect()
}

fn sigma_key(which: SharedParam) -> String {
    if which.is_frequency() {
        format!("{}_hz_sigma", which.name())
    } else {
        format!("{}_sigma", which.name())
    }
}

fn in_file_units(which: SharedParam, v: f64) -> f64 {
    if which.is_frequency() {
        to_hz(v)
    } else {
        v
    }
}

fn fit_coherent(ctx: &mut Context, inputs: &[PathBuf], free: &str, complex: bool, scatter: bool) -> CliResult<String> {
    let mut traces: Vec<CoherentTrace> = Vec::new();
    for path in inputs {
        let text = ctx.add_input(path)?;
        traces.push(io::read_coherent_csv(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?);
    }
    let opts = FitOptions {
        free: parse_free(free)?,
        complex,
        ..FitOptions::default()
    };
    let init = ctx.params();
    let fit = fitting::fit_coherent_series_with(&traces, &init, &opts)?;
    let sigmas: Scatter = if scatter {
        fitting::per_parameter_scatter_with(&traces, &init, &opts)?
    } else {
        fit.sigma.clone()
    };
    let mut entries: Vec<(String, String)> = io::param_entries(&fit.params)
        .into_iter()
        .map(|(k, v)| (k.to_string(), fmt_num(v)))
        .collect();
    for (which, s) in &sigmas {
        entries.push((sigma_key(*which), fmt_num(in_file_units(*which, *s))));
    }
    entries.push(("fit_sigma_kind".into(), if scatter { "2" } else { "1" }.into()));
    entries.push(("fit_converged".into(), fit.converged.to_string()));
    entries.push(("fit_iterations".into(), fit.iterations.to_string()));
    entries.push(("fit_residual_norm".into(), fmt_num(fit.residual_norm)));
    entries.push(("fit_data_norm".into(), fmt_num(fit.data_norm)));
    for (i, d) in fit.detunings.iter().enumerate() {
        entries.push((format!("fit_detuning_hz_{i}"), fmt_num(to_hz(*d))));
    }
    let mut header = ctx.header();
    header.push("fit_sigma_kind: 1 = linearized standard error, 2 = per-parameter scatter".into());
    let text = key_values(&header, &entries);
    ctx.write(".txt", &text)?;
    Ok(text)
}

fn load_spectrum(ctx: &mut Context, input: &Path) -> CliResult<Spectrum> {
    let text = ctx.add_input(input)?;
    let mut spectrum = io::read_spectrum_csv(&text).map_err(|e| invalid(format!("{}: {e}", input.display())))?;
    if let Some(r) = ctx.common.gawbs_ref.clone() {
        let rtext = ctx.add_input(&r)?;
        let reference = io::read_spectrum_csv(&rtext).map_err(|e| invalid(format!("{}: {e}", r.display())))?;
        spectrum = spectra::gawbs_subtract(&spectrum, &reference)?.spectrum;
    }
    Ok(spectrum)
}

fn fit_noise(ctx: &mut Context, input: &Path, gain: f64) -> CliResult<String> {
    let spectrum = load_spectrum(ctx, input)?;
    let p = ctx.params();
    let model = ctx.noise_model()?;
    let calib = CalibrationRef {
        gain,
        ..CalibrationRef::unity()
    };
    let opts = NoiseFitOptions {
        trn_table: model.trn_table.clone(),
        occupancy_grid: None,
    };
    let fit = fitting::fit_noise_amplitude_with(&spectrum, &p, &calib, &opts)?;
    // The fitted force PSD is 4(n̄+½)Γ_m under the quantum model.
    let gamma = match model.force {
        ForceModel::Classical => fit.gamma,
        ForceModel::Quantum => fit.gamma - 0.5 * p.gamma_m,
    };
    let entries: Vec<(String, String)> = vec![
        ("gamma_hz".to_string(), fmt_num(to_hz(gamma))),
        ("nbar".to_string(), fmt_num(fit.nbar)),
        ("force_psd".to_string(), fmt_num(fit.force_psd)),
        ("floored".to_string(), fit.floored.to_string()),
        ("gain".to_string(), fmt_num(gain)),
    ];
    let text = key_values(&ctx.header(), &entries);
    ctx.write(".txt", &text)?;
    Ok(text)
}

fn load_scatter(ctx: &mut Context, path: Option<&Path>) -> CliResult<Scatter> {
    let values = match path {
        Some(p) => {
            let text = ctx.add_input(p)?;
            io::parse_key_values(&text)?
                .into_iter()
                .map(|(k, (_, v))| (k, v))
                .collect::<std::collections::BTreeMap<_, _>>()
        }
        None => ctx.config.extra.clone(),
    };
    let mut scatter = Scatter::new();
    for which in SharedParam::ALL {
        if let Some(v) = values.get(&sigma_key(which)) {
            if !(*v >= 0.0) {
                return Err(invalid(format!("{} must be >= 0", sigma_key(which))));
            }
            let internal = if which.is_frequency() { hz(*v) } else { *v };
            scatter.insert(which, internal);
        }
    }
    if scatter.is_empty() {
        return Err(invalid("no `<param>_sigma` entries for the Monte-Carlo scatter"));
    }
    Ok(scatter)
}

#[allow(clippy::too_many_arguments)]
fn mc_errors(
    ctx: &mut Context,
    input: &Path,
    draws: usize,
    scatter_path: Option<&Path>,
    calibration: Option<Option<f64>>,
    calib_rel: f64,
    gawbs: (f64, f64),
) -> CliResult<String> {
    let spectrum = load_spectrum(ctx, input)?;
    let scatter = load_scatter(ctx, scatter_path)?;
    let p = ctx.params();
    let calibration = match calibration {
        None => McCalibration::Unity,
        Some(None) => McCalibration::default_tone(&p, &spectrum),
        Some(Some(w)) => McCalibration::Tone(w),
    };
    let mc = fitting::monte_carlo_errors_with(&p, &scatter, &spectrum, draws, ctx.common.seed, calibration)?;
    let budget = UncertaintyBudget::new(scatter.clone(), mc.gamma_model_rel, mc.nbar_model_rel, calib_rel, gawbs);

    let mut csv: String = ctx.header().iter().map(|h| format!("# {h}\n")).collect();
    csv.push_str("draw,gamma_hz,nbar\n");
    for d in &mc.draws {
        let _ = writeln!(csv, "{},{},{}", d.index, fmt_num(to_hz(d.gamma)), fmt_num(d.nbar));
    }
    ctx.write(".csv", &csv)?;

    let mut entries: Vec<(String, String)> = scatter
        .iter()
        .map(|(w, s)| (sigma_key(*w), fmt_num(in_file_units(*w, *s))))
        .collect();
    let tone = match calibration {
        McCalibration::Unity => "none".to_string(),
        McCalibration::Tone(w) => fmt_num(to_hz(w)),
    };
    entries.extend(
        [
            ("draws", draws.to_string()),
            ("failed_draws", mc.failed.to_string()),
            ("resampled_draws", mc.resampled.to_string()),
            ("truncation", "positivity of omega_m, kappa, abar0 (redrawn)".to_string()),
            ("calibration_tone_hz", tone),
            ("gamma_model_rel", fmt_num(budget.gamma_model_rel)),
            ("nbar_model_rel", fmt_num(budget.nbar_model_rel)),
            ("calib_rel", fmt_num(budget.calib_rel)),
            ("gawbs_gamma_rel", fmt_num(budget.gawbs_gamma_rel)),
            ("gawbs_nbar_rel", fmt_num(budget.gawbs_nbar_rel)),
            ("gamma_total_rel", fmt_num(budget.gamma_total_rel)),
            ("nbar_total_rel", fmt_num(budget.nbar_total_rel)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v)),
    );
    let text = key_values(&ctx.header(), &entries);
    ctx.write(".txt", &text)?;
    Ok(text)
}
