//! Two-stage inference: a global fit of coherent-response series, then a
//! one-parameter amplitude fit of noise spectra, with the Monte-Carlo and
//! quadrature error budget.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::coherent::{response_at, CoherentTrace};
use crate::error::{Error, Result};
use crate::grid;
use crate::lm::{self, LmOptions};
use crate::params::{hz, SystemParams};
use crate::response::LinearModel;
use crate::spectra::{self, CalibrationRef, Spectrum};

/// Parameters shared by every trace of a detuning series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SharedParam {
    OmegaM,
    Kappa,
    Abar0,
    GPte,
    GPtr,
}

impl SharedParam {
    pub const ALL: [SharedParam; 5] = [
        SharedParam::OmegaM,
        SharedParam::Kappa,
        SharedParam::Abar0,
        SharedParam::GPte,
        SharedParam::GPtr,
    ];

    /// Config key stem; frequencies carry an `_hz` suffix in files.
    pub fn name(self) -> &'static str {
        match self {
            SharedParam::OmegaM => "omega_m",
            SharedParam::Kappa => "kappa",
            SharedParam::Abar0 => "abar0",
            SharedParam::GPte => "g_pte",
            SharedParam::GPtr => "g_ptr",
        }
    }

    /// True for angular quantities that are written in Hz.
    pub fn is_frequency(self) -> bool {
        !matches!(self, SharedParam::Abar0)
    }

    pub fn get(self, p: &SystemParams) -> f64 {
        match self {
            SharedParam::OmegaM => p.omega_m,
            SharedParam::Kappa => p.kappa(),
            SharedParam::Abar0 => p.abar0,
            SharedParam::GPte => p.g_pte,
            SharedParam::GPtr => p.g_ptr,
        }
    }

    /// Sets the parameter; κ is rescaled with κ_ex/κ held fixed.
    pub fn set(self, p: SystemParams, v: f64) -> SystemParams {
        match self {
            SharedParam::OmegaM => SystemParams { omega_m: v, ..p },
            SharedParam::Kappa => p.with_kappa(v),
            SharedParam::Abar0 => SystemParams { abar0: v, ..p },
            SharedParam::GPte => SystemParams { g_pte: v, ..p },
            SharedParam::GPtr => SystemParams { g_ptr: v, ..p },
        }
    }

    /// Positive parameters are fitted as `ln(X/X_init)`.
    fn log_scaled(self) -> bool {
        matches!(self, SharedParam::OmegaM | SharedParam::Kappa | SharedParam::Abar0)
    }

    /// Smallest scale of a linearly fitted parameter.
    fn scale_floor(self) -> f64 {
        match self {
            SharedParam::GPte => hz(10.0),
            SharedParam::GPtr => hz(0.1),
            _ => 1.0,
        }
    }

    /// Lower physical bound used when drawing perturbed values.
    fn lower_bound(self) -> Option<f64> {
        match self {
            SharedParam::OmegaM | SharedParam::Kappa => Some(0.0),
            SharedParam::Abar0 => Some(0.0),
            SharedParam::GPte | SharedParam::GPtr => None,
        }
    }
}

/// Map from shared parameter to its uncertainty, in internal units.
pub type Scatter = BTreeMap<SharedParam, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Shared parameters that are fitted; the others stay at their initial values.
    pub free: Vec<SharedParam>,
    /// One parameter fitted independently per trace instead of globally.
    pub per_trace: Option<SharedParam>,
    /// Fit the complex response instead of its magnitude.
    pub complex: bool,
    /// Initial detunings per trace; taken from the response peaks when absent.
    pub detuning_guesses: Option<Vec<f64>>,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            free: SharedParam::ALL.to_vec(),
            per_trace: None,
            complex: false,
            detuning_guesses: None,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted shared parameters (and the fixed ones) on top of `init`.
    pub params: SystemParams,
    /// Fitted detuning per trace.
    pub detunings: Vec<f64>,
    /// Per-trace values of [`FitOptions::per_trace`], if requested.
    pub per_trace: Option<(SharedParam, Vec<f64>)>,
    /// ‖model − data‖ over all residuals.
    pub residual_norm: f64,
    pub data_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Linearized standard errors of the free shared parameters.
    pub sigma: Scatter,
}

impl FitResult {
    pub fn shared(&self, which: SharedParam) -> f64 {
        which.get(&self.params)
    }

    /// Parameters describing trace `i`.
    pub fn trace_params(&self, i: usize) -> SystemParams {
        let mut p = self.params.with_detuning(self.detunings[i]);
        if let Some((which, values)) = &self.per_trace {
            p = which.set(p, values[i]);
        }
        p
    }
}

struct Layout {
    init: SystemParams,
    global: Vec<SharedParam>,
    per_trace: Option<SharedParam>,
    n_traces: usize,
    detuning_scale: f64,
    detuning_init: Vec<f64>,
}

impl Layout {
    fn len(&self) -> usize {
        self.global.len() + self.n_traces * (1 + usize::from(self.per_trace.is_some()))
    }

    fn decode(which: SharedParam, init: f64, x: f64) -> f64 {
        if which.log_scaled() {
            init * x.exp()
        } else {
            init + x * init.abs().max(which.scale_floor())
        }
    }

    fn trace_params(&self, x: &[f64], i: usize) -> SystemParams {
        let mut p = self.init;
        for (k, which) in self.global.iter().enumerate() {
            p = which.set(p, Self::decode(*which, which.get(&self.init), x[k]));
        }
        let mut off = self.global.len();
        if let Some(which) = self.per_trace {
            p = which.set(p, Self::decode(which, which.get(&self.init), x[off + i]));
            off += self.n_traces;
        }
        p.with_detuning(self.detuning_init[i] + x[off + i] * self.detuning_scale)
    }

    fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.global.iter().map(|w| w.name().to_string()).collect();
        if let Some(w) = self.per_trace {
            v.extend((0..self.n_traces).map(|i| format!("{}[{i}]", w.name())));
        }
        v.extend((0..self.n_traces).map(|i| format!("detuning[{i}]")));
        v
    }
}

fn distinct_count(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    1 + v.windows(2).filter(|w| w[1] - w[0] > 1e-9 * scale).count()
}

/// Detuning guess from the peak of `|R|`, with the sign of `init.detuning`.
fn detuning_guess(trace: &CoherentTrace, init: &SystemParams) -> f64 {
    let mags = trace.magnitudes();
    let k = (0..mags.len())
        .max_by(|a, b| mags[*a].total_cmp(&mags[*b]))
        .unwrap_or(0);
    let sign = if init.detuning > 0.0 { 1.0 } else { -1.0 };
    sign * trace.grid[k].abs()
}

/// Global least-squares fit of a coherent-response series with default options.
pub fn fit_coherent_series(traces: &[CoherentTrace], init: &SystemParams) -> Result<FitResult> {
    fit_coherent_series_with(traces, init, &FitOptions::default())
}

pub fn fit_coherent_series_with(
    traces: &[CoherentTrace],
    init: &SystemParams,
    options: &FitOptions,
) -> Result<FitResult> {
    init.validate()?;
    if traces.is_empty() {
        return Err(Error::Domain("no traces to fit".into()));
    }
    for which in &options.free {
        if which.log_scaled() && !(which.get(init) > 0.0) {
            return Err(Error::InvalidParameter {
                field: which.name(),
                reason: "initial value must be > 0 to be fitted".into(),
            });
        }
    }
    let guesses = match &options.detuning_guesses {
        Some(g) if g.len() == traces.len() => g.clone(),
        Some(g) => {
            return Err(Error::Shape(format!(
                "{} detuning guesses for {} traces",
                g.len(),
                traces.len()
            )))
        }
        None => traces.iter().map(|t| detuning_guess(t, init)).collect(),
    };
    let photothermal_free = options
        .free
        .iter()
        .any(|w| matches!(w, SharedParam::GPte | SharedParam::GPtr));
    if (photothermal_free || options.per_trace.is_some()) && distinct_count(&guesses) < 3 {
        return Err(Error::Degenerate(
            "the full model needs at least 3 traces at distinct detunings".into(),
        ));
    }
    let global: Vec<SharedParam> = options
        .free
        .iter()
        .copied()
        .filter(|w| Some(*w) != options.per_trace)
        .collect();
    let layout = Layout {
        init: *init,
        global,
        per_trace: options.per_trace,
        n_traces: traces.len(),
        detuning_scale: init.kappa(),
        detuning_init: guesses,
    };

    let data: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            if options.complex {
                t.response.iter().flat_map(|z| [z.re, z.im]).collect()
            } else {
                t.magnitudes()
            }
        })
        .collect();
    let data_norm = data.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if !(data_norm > 0.0) {
        return Err(Error::Domain("coherent data are identically zero".into()));
    }
    let inv = 1.0 / data_norm;
    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (i, t) in traces.iter().enumerate() {
            let model = LinearModel::new(&layout.trace_params(x, i))?;
            for (k, &w) in t.grid.iter().enumerate() {
                let z: Complex64 = response_at(&model, w)?;
                if options.complex {
                    out.push((z.re - data[i][2 * k]) * inv);
                    out.push((z.im - data[i][2 * k + 1]) * inv);
                } else {
                    out.push((z.norm() - data[i][k]) * inv);
                }
            }
        }
        Ok(out)
    };
    let mut lm_opts = options.lm;
    lm_opts.reference_norm = 1.0;
    let x0 = vec![0.0; layout.len()];
    let report = lm::minimize(residuals, &x0, &layout.names(), &lm_opts)?;
    let x = &report.x;

    let mut params = *init;
    for (k, which) in layout.global.iter().enumerate() {
        params = which.set(params, Layout::decode(*which, which.get(init), x[k]));
    }
    let detunings: Vec<f64> = (0..traces.len()).map(|i| layout.trace_params(x, i).detuning).collect();
    let per_trace = options
        .per_trace
        .map(|w| (w, (0..traces.len()).map(|i| w.get(&layout.trace_params(x, i))).collect()));

    // Linearized covariance σ²(JᵀJ)⁻¹ with σ² from the residual.
    let mut sigma = Scatter::new();
    let rows = report.jacobian.nrows();
    let dof = rows.saturating_sub(layout.len()).max(1) as f64;
    let s2 = (report.residual_norm * data_norm).powi(2) / dof;
    let jtj = report.jacobian.transpose() * &report.jacobian * (data_norm * data_norm);
    if let Some(cov) = jtj.try_inverse() {
        for (k, which) in layout.global.iter().enumerate() {
            let var_x = (s2 * cov[(k, k)]).max(0.0);
            let v = which.get(&params);
            let d = if which.log_scaled() {
                v * var_x.sqrt()
            } else {
                var_x.sqrt() * which.get(init).abs().max(which.scale_floor())
            };
            sigma.insert(*which, d);
        }
    }
    Ok(FitResult {
        params,
        detunings,
        per_trace,
        residual_norm: report.residual_norm * data_norm,
        data_norm,
        converged: report.converged,
        iterations: report.iterations,
        sigma,
    })
}

/// Scatter of each free shared parameter when it is allowed to vary per trace.
///
/// `ΔX = √⟨(X_i − X₀)²⟩` with `X₀` from the all-global fit.
pub fn per_parameter_scatter(traces: &[CoherentTrace], init: &SystemParams) -> Result<Scatter> {
    per_parameter_scatter_with(traces, init, &FitOptions::default())
}

pub fn per_parameter_scatter_with(
    traces: &[CoherentTrace],
    init: &SystemParams,
    options: &FitOptions,
) -> Result<Scatter> {
    let base = fit_coherent_series_with(traces, init, options)?;
    let start = FitOptions {
        detuning_guesses: Some(base.detunings.clone()),
        ..options.clone()
    };
    let rows: Result<Vec<(SharedParam, f64)>> = options
        .free
        .par_iter()
        .map(|&which| {
            let opts = FitOptions {
                per_trace: Some(which),
                ..start.clone()
            };
            let fit = fit_coherent_series_with(traces, &base.params, &opts)?;
            let x0 = which.get(&base.params);
            let values = &fit.per_trace.as_ref().expect("per-trace values").1;
            let ms = values.iter().map(|v| (v - x0).powi(2)).sum::<f64>() / values.len() as f64;
            Ok((which, ms.sqrt()))
        })
        .collect();
    Ok(rows?.into_iter().collect())
}

/// Result of the noise-amplitude fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFit {
    /// Decoherence rate γ = Γ_m·n̄_m, rad/s.
    pub gamma: f64,
    /// Mechanical occupancy at the fitted amplitude.
    pub nbar: f64,
    /// Fitted Langevin-force PSD 4n̄_mΓ_m.
    pub force_psd: f64,
    /// Set when the unconstrained amplitude was negative and clamped to 0.
    pub floored: bool,
}

#[derive(Debug, Clone, Default)]
pub struct NoiseFitOptions {
    pub trn_table: Option<Spectrum>,
    /// Grid for the occupancy integral; a resolved grid is built when absent.
    pub occupancy_grid: Option<Vec<f64>>,
}

pub fn fit_noise_amplitude(spectrum: &Spectrum, params: &SystemParams, calib: &CalibrationRef) -> Result<NoiseFit> {
    fit_noise_amplitude_with(spectrum, params, calib, &NoiseFitOptions::default())
}

/// Least-squares fit of the Langevin-force amplitude with the spectral shape frozen.
pub fn fit_noise_amplitude_with(
    spectrum: &Spectrum,
    params: &SystemParams,
    calib: &CalibrationRef,
    options: &NoiseFitOptions,
) -> Result<NoiseFit> {
    if !(calib.gain > 0.0) {
        return Err(Error::Calibration("gain must be > 0".into()));
    }
    let d = spectra::decompose(params, &spectrum.grid, options.trn_table.as_ref())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..spectrum.len() {
        let data = spectrum.values[k] / calib.gain;
        num += (data - d.hh_base[k]) * d.hh_per_force[k];
        den += d.hh_per_force[k] * d.hh_per_force[k];
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate("spectrum carries no thermal-force contribution".into()));
    }
    let raw = num / den;
    let (force_psd, floored) = if raw < 0.0 { (0.0, true) } else { (raw, false) };
    let occ_grid = match &options.occupancy_grid {
        Some(g) => g.clone(),
        None => grid::resolved_symmetric(params),
    };
    let q = spectra::decompose(params, &occ_grid, options.trn_table.as_ref())?;
    let qq: Vec<f64> = q
        .qq_base
        .iter()
        .zip(&q.qq_per_force)
        .map(|(b, f)| b + force_psd * f)
        .collect();
    let nbar = spectra::occupancy_from_qq(params.omega_m, &Spectrum::new(occ_grid, qq, spectra::QQ_LABEL)?)?;
    Ok(NoiseFit {
        gamma: force_psd / 4.0,
        nbar,
        force_psd,
        floored,
    })
}

/// Grid used for the occupancy of each Monte-Carlo draw.
pub fn monte_carlo_occupancy_grid(params: &SystemParams) -> Vec<f64> {
    grid::resolved_symmetric_with(params, 1.0 / 6.0, 0.03, 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McDraw {
    pub index: usize,
    pub gamma: f64,
    pub nbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub gamma_model_rel: f64,
    pub nbar_model_rel: f64,
    /// Successful draws in draw order.
    pub draws: Vec<McDraw>,
    pub failed: usize,
    /// Normal samples rejected by the positivity bounds and redrawn.
    pub resampled: usize,
}

/// Largest tolerated fraction of failed draws.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

/// How each Monte-Carlo draw converts the spectrum to model units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McCalibration {
    /// The spectrum is already in model units for every draw.
    Unity,
    /// The gain is referenced to a phase-modulation tone at this angular
    /// frequency: the measured tone response is the one predicted by the
    /// central parameters, and each draw rescales by `|R_centre/R_draw|²`.
    Tone(f64),
}

impl McCalibration {
    /// Tone halfway between Ω_m and the upper edge of the spectrum band.
    pub fn default_tone(params: &SystemParams, spectrum: &Spectrum) -> McCalibration {
        let top = *spectrum.grid.last().expect("validated spectrum is non-empty");
        let bottom = spectrum.grid[0];
        let anchor = params.omega_m.clamp(bottom, top);
        McCalibration::Tone(0.5 * (anchor + top))
    }
}

/// Monte-Carlo run with the default tone calibration.
pub fn monte_carlo_errors(
    params: &SystemParams,
    scatter: &Scatter,
    spectrum: &Spectrum,
    n_draws: usize,
    seed: u64,
) -> Result<McSummary> {
    let calibration = McCalibration::default_tone(params, spectrum);
    monte_carlo_errors_with(params, scatter, spectrum, n_draws, seed, calibration)
}

/// Relative standard deviation of γ and n̄ when the shared parameters are
/// drawn from independent normal distributions of width `scatter`.
///
/// Draw `k` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, so results do
/// not depend on scheduling.
pub fn monte_carlo_errors_with(
    params: &SystemParams,
    scatter: &Scatter,
    spectrum: &Spectrum,
    n_draws: usize,
    seed: u64,
    calibration: McCalibration,
) -> Result<McSummary> {
    if n_draws < 100 {
        return Err(Error::Domain(format!("need at least 100 draws, got {n_draws}")));
    }
    if scatter.values().any(|s| !(*s >= 0.0)) {
        return Err(Error::Domain("scatter entries must be >= 0".into()));
    }
    params.validate()?;
    let tone_response = |p: &SystemParams, w: f64| -> Result<f64> { Ok(response_at(&LinearModel::new(p)?, w)?.norm()) };
    let centre_tone = match calibration {
        McCalibration::Unity => None,
        McCalibration::Tone(w) => {
            let r = tone_response(params, w)?;
            if !(r > 0.0) {
                return Err(Error::Calibration("no coherent response at the calibration tone".into()));
            }
            Some((w, r))
        }
    };
    let outcomes: Vec<(Option<McDraw>, usize)> = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut p = *params;
            let mut resampled = 0;
            for (&which, &sigma) in scatter {
                if sigma == 0.0 {
                    continue;
                }
                let center = which.get(params);
                let normal = Normal::new(center, sigma).expect("finite sigma");
                let mut v = normal.sample(&mut rng);
                let mut tries = 0;
                while which.lower_bound().is_some_and(|lo| v <= lo) && tries < 1000 {
                    v = normal.sample(&mut rng);
                    resampled += 1;
                    tries += 1;
                }
                p = which.set(p, v);
            }
            // Keep the stream position independent of the number of resamples.
            let _: u64 = rng.random();
            let opts = NoiseFitOptions {
                trn_table: None,
                occupancy_grid: Some(monte_carlo_occupancy_grid(&p)),
            };
            let gain = match centre_tone {
                None => Ok(1.0),
                Some((w, r)) => tone_response(&p, w).map(|d| (r / d).powi(2)),
            };
            let fit = gain.ok().and_then(|gain| {
                let calib = CalibrationRef {
                    gain,
                    ..CalibrationRef::unity()
                };
                fit_noise_amplitude_with(spectrum, &p, &calib, &opts).ok()
            });
            (
                fit.map(|f| McDraw {
                    index: k,
                    gamma: f.gamma,
                    nbar: f.nbar,
                }),
                resampled,
            )
        })
        .collect();
    let resampled = outcomes.iter().map(|o| o.1).sum();
    let draws: Vec<McDraw> = outcomes.iter().filter_map(|o| o.0).collect();
    let failed = n_draws - draws.len();
    if failed as f64 > MAX_FAILED_FRACTION * n_draws as f64 {
        return Err(Error::Instability {
            failed,
            total: n_draws,
        });
    }
    let g: Vec<f64> = draws.iter().map(|d| d.gamma).collect();
    let n: Vec<f64> = draws.iter().map(|d| d.nbar).collect();
    Ok(McSummary {
        gamma_model_rel: relative_std(&g),
        nbar_model_rel: relative_std(&n),
        draws,
        failed,
        resampled,
    })
}

/// Standard deviation over |mean|, computed about the first sample so that
/// identical samples give exactly zero.
fn relative_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let x0 = v[0];
    let n = v.len() as f64;
    let m1 = v.iter().map(|x| x - x0).sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - x0).powi(2)).sum::<f64>() / n;
    let var = (m2 - m1 * m1).max(0.0);
    let mean = x0 + m1;
    if var == 0.0 {
        0.0
    } else {
        var.sqrt() / mean.abs()
    }
}

/// Root-sum-square of independent relative errors.
pub fn combine_errors(model_rel: f64, calib_rel: f64, gawbs_rel: f64) -> f64 {
    (model_rel * model_rel + calib_rel * calib_rel + gawbs_rel * gawbs_rel).sqrt()
}

/// Default relative uncertainty of the thermal calibration.
pub const DEFAULT_CALIB_REL: f64 = 0.03;

/// Relative errors on γ and n̄ from fiber noise before the cavity (γ, n̄).
pub const GAWBS_BEFORE_CAVITY_REL: (f64, f64) = (0.07, 0.05);

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyBudget {
    pub per_parameter: Scatter,
    pub gamma_model_rel: f64,
    pub nbar_model_rel: f64,
    pub calib_rel: f64,
    pub gawbs_gamma_rel: f64,
    pub gawbs_nbar_rel: f64,
    pub gamma_total_rel: f64,
    pub nbar_total_rel: f64,
}

impl UncertaintyBudget {
    pub fn new(
        per_parameter: Scatter,
        gamma_model_rel: f64,
        nbar_model_rel: f64,
        calib_rel: f64,
        gawbs: (f64, f64),
    ) -> UncertaintyBudget {
        UncertaintyBudget {
            per_parameter,
            gamma_model_rel,
            nbar_model_rel,
            calib_rel,
            gawbs_gamma_rel: gawbs.0,
            gawbs_nbar_rel: gawbs.1,
            gamma_total_rel: combine_errors(gamma_model_rel, calib_rel, gawbs.0),
            nbar_total_rel: combine_errors(nbar_model_rel, calib_rel, gawbs.1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::coherent_response;
    use crate::params::presets;
    use approx::assert_relative_eq;

    fn series(p: &SystemParams, ratios: &[f64], n: usize) -> Vec<CoherentTrace> {
        ratios
            .iter()
            .map(|r| {
                let q = p.with_detuning(r * p.omega_m);
                let c = q.detuning.abs();
                let g = grid::uniform(c - 2.0 * p.kappa(), c + 2.0 * p.kappa(), n).unwrap();
                coherent_response(&q, &g).unwrap()
            })
            .collect()
    }

    #[test]
    fn combine_errors_examples() {
        assert!((combine_errors(0.06, 0.03, 0.07) - 0.0970).abs() < 5e-4);
        assert!((combine_errors(0.04, 0.03, 0.05) - 0.0707).abs() < 5e-4);
        assert_eq!(combine_errors(0.123, 0.0, 0.0), 0.123);
    }

    #[test]
    fn identical_detunings_are_degenerate() {
        let p = presets::cooling_run();
        let t = series(&p, &[-1.0, -1.0, -1.0], 64);
        assert!(matches!(fit_coherent_series(&t, &p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn noiseless_reduced_single_trace_fit() {
        let truth = SystemParams {
            g_pte: 0.0,
            g_ptr: 0.0,
            ..presets::cooling_run()
        };
        let t = series(&truth, &[-0.9], 400);
        let init = SystemParams {
            omega_m: truth.omega_m * (1.0 + 2e-5),
            abar0: truth.abar0 * 1.1,
            ..truth.with_kappa(truth.kappa() * 0.9)
        };
        let opts = FitOptions {
            free: vec![SharedParam::OmegaM, SharedParam::Kappa, SharedParam::Abar0],
            ..FitOptions::default()
        };
        let fit = fit_coherent_series_with(&t, &init, &opts).unwrap();
        assert!(fit.converged);
        assert!(fit.residual_norm < 1e-8 * fit.data_norm, "{}", fit.residual_norm / fit.data_norm);
        assert_relative_eq!(fit.params.omega_m, truth.omega_m, max_relative = 1e-9);
        assert_relative_eq!(fit.params.kappa(), truth.kappa(), max_relative = 1e-7);
        assert_relative_eq!(fit.params.abar0, truth.abar0, max_relative = 1e-7);
    }

    #[test]
    fn noise_amplitude_round_trip_and_floor() {
        let p = presets::cooling_run();
        let g = grid::uniform(hz(70e6), hz(86e6), 161).unwrap();
        let (hh, _) = spectra::output_spectra(&p, &g).unwrap();
        let fit = fit_noise_amplitude(&hh, &p, &CalibrationRef::unity()).unwrap();
        assert_relative_eq!(fit.gamma, p.gamma_m * p.nbar_bath, max_relative = 1e-9);
        assert!(!fit.floored);

        let shot = spectra::shot_noise_level(&p);
        let flat = Spectrum::new(g.clone(), vec![shot; g.len()], "x").unwrap();
        let fit = fit_noise_amplitude(&flat, &p, &CalibrationRef::unity()).unwrap();
        assert_eq!(fit.gamma, 0.0);
        assert!(fit.floored);
    }

    #[test]
    fn relative_std_of_constant_is_zero() {
        assert_eq!(relative_std(&[0.1; 7]), 0.0);
        assert_relative_eq!(relative_std(&[1.0, 3.0]), 0.5, max_relative = 1e-15);
    }
}
