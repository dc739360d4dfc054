//! Noise covariance propagation `N_out = M(+Ω)·N_in·M(−Ω)ᵀ`, occupancy
//! extraction, fiber-noise subtraction, and gain calibration.

use nalgebra::SMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid;
use crate::params::SystemParams;
use crate::response::{Channel, LinearModel, ResponseMatrix, N_CHANNELS};

/// Normalization of the thermal Langevin force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceModel {
    /// `4 n̄_m Γ_m`, valid for n̄_m ≫ 1.
    #[default]
    Classical,
    /// `4 (n̄_m + ½) Γ_m`, including the mechanical zero-point force.
    Quantum,
}

/// Symmetrized spectral density sampled on a frequency grid (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub unit_label: String,
}

impl Spectrum {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, unit_label: impl Into<String>) -> Result<Spectrum> {
        if grid.len() != values.len() {
            return Err(Error::Shape(format!(
                "grid has {} points but values has {}",
                grid.len(),
                values.len()
            )));
        }
        for w in grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Domain("spectrum grid must be strictly increasing".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("spectrum values must be finite".into()));
        }
        Ok(Spectrum {
            grid,
            values,
            unit_label: unit_label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Linear interpolation at `omega`, clamped to the end values.
    pub fn interpolate(&self, omega: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() {
            return 0.0;
        }
        if omega <= g[0] {
            return self.values[0];
        }
        if omega >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let k = g.partition_point(|x| *x <= omega);
        let (x0, x1) = (g[k - 1], g[k]);
        let t = (omega - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    pub fn scaled(&self, factor: f64, unit_label: impl Into<String>) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            unit_label: unit_label.into(),
        }
    }

    /// Trapezoidal area ∫ S dΩ/2π.
    pub fn area(&self) -> f64 {
        grid::trapezoid(&self.grid, &self.values) / crate::params::TWO_PI
    }
}

/// Noise sources beyond the vacuum inputs.
#[derive(Debug, Clone, Default)]
pub struct NoiseModel {
    pub force: ForceModel,
    /// Thermorefractive frequency-noise PSD, looked up at |Ω|; zero when absent.
    pub trn_table: Option<Spectrum>,
}

impl NoiseModel {
    pub fn quantum() -> NoiseModel {
        NoiseModel {
            force: ForceModel::Quantum,
            trn_table: None,
        }
    }

    fn force_psd(&self, params: &SystemParams) -> f64 {
        match self.force {
            ForceModel::Classical => 4.0 * params.nbar_bath * params.gamma_m,
            ForceModel::Quantum => 4.0 * (params.nbar_bath + 0.5) * params.gamma_m,
        }
    }
}

/// Input covariance matrix in [`Channel::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct InputCovariance {
    pub omega: f64,
    pub n: SMatrix<f64, N_CHANNELS, N_CHANNELS>,
}

impl InputCovariance {
    fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..N_CHANNELS)
            .flat_map(move |j| (0..N_CHANNELS).map(move |k| (j, k, self.n[(j, k)])))
            .filter(|(_, _, v)| *v != 0.0)
    }
}

const VACUUM_PAIRS: [(Channel, Channel); 4] = [
    (Channel::Laser, Channel::LaserDag),
    (Channel::Beamsplitter, Channel::BeamsplitterDag),
    (Channel::Cavity, Channel::CavityDag),
    (Channel::Cryo, Channel::CryoDag),
];

/// Input covariance with the classical force normalization.
pub fn input_covariance(params: &SystemParams, omega: f64, trn_table: Option<&Spectrum>) -> InputCovariance {
    let model = NoiseModel {
        force: ForceModel::Classical,
        trn_table: trn_table.cloned(),
    };
    input_covariance_with(params, omega, &model)
}

pub fn input_covariance_with(params: &SystemParams, omega: f64, model: &NoiseModel) -> InputCovariance {
    let mut n = SMatrix::<f64, N_CHANNELS, N_CHANNELS>::zeros();
    for (a, b) in VACUUM_PAIRS {
        n[(a.index(), b.index())] = 0.5;
        n[(b.index(), a.index())] = 0.5;
    }
    let f = Channel::ThermalForce.index();
    n[(f, f)] = model.force_psd(params);
    let t = Channel::Thermorefractive.index();
    n[(t, t)] = model
        .trn_table
        .as_ref()
        .map(|s| s.interpolate(omega.abs()).max(0.0))
        .unwrap_or(0.0);
    InputCovariance { omega, n }
}

/// `[M(+Ω)·N·M(−Ω)ᵀ]_{row,row}`, checked to be real.
fn sandwich(plus: &ResponseMatrix, minus: &ResponseMatrix, n: &InputCovariance, row: usize) -> Result<f64> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (j, k, v) in n.nonzero() {
        let term = plus.m[(row, j)] * v * minus.m[(row, k)];
        scale += term.norm();
        acc += term;
    }
    if acc.im.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Consistency(format!(
            "auto-spectrum row {row} at omega = {:e} has imaginary part {:e} (real {:e})",
            plus.omega, acc.im, acc.re
        )));
    }
    Ok(acc.re)
}

/// Homodyne and displacement auto-spectra at one frequency.
pub fn point_spectra(model: &LinearModel, omega: f64, noise: &NoiseModel) -> Result<(f64, f64)> {
    let plus = model.matrix(omega)?;
    let minus = model.matrix(-omega)?;
    let n = input_covariance_with(model.params(), omega, noise);
    Ok((sandwich(&plus, &minus, &n, 0)?, sandwich(&plus, &minus, &n, 1)?))
}

pub const HH_LABEL: &str = "homodyne PSD (model units)";
pub const HH_NORM_LABEL: &str = "homodyne PSD / shot noise";
pub const QQ_LABEL: &str = "S_qq (dimensionless quadrature)";

/// Homodyne (`s_hh`) and mechanical quadrature (`s_qq`) spectra on `grid`.
pub fn output_spectra(params: &SystemParams, grid: &[f64]) -> Result<(Spectrum, Spectrum)> {
    output_spectra_with(params, grid, &NoiseModel::default())
}

pub fn output_spectra_with(params: &SystemParams, grid_pts: &[f64], noise: &NoiseModel) -> Result<(Spectrum, Spectrum)> {
    grid::check(grid_pts)?;
    let model = LinearModel::new(params)?;
    let pairs: Result<Vec<(f64, f64)>> = grid_pts
        .par_iter()
        .map(|&om| point_spectra(&model, om, noise))
        .collect();
    let (hh, qq): (Vec<f64>, Vec<f64>) = pairs?.into_iter().unzip();
    Ok((
        Spectrum::new(grid_pts.to_vec(), hh, HH_LABEL)?,
        Spectrum::new(grid_pts.to_vec(), qq, QQ_LABEL)?,
    ))
}

/// Shot-noise floor of the homodyne spectrum: the flat level obtained with
/// all couplings switched off and the same detection settings.
pub fn shot_noise_level(params: &SystemParams) -> f64 {
    crate::response::MeanFields::new(params).shot_noise_level()
}

/// Homodyne spectrum in units of the shot-noise floor.
pub fn normalize_to_shot_noise(params: &SystemParams, s_hh: &Spectrum) -> Spectrum {
    let level = shot_noise_level(params);
    let factor = if level > 0.0 { 1.0 / level } else { 0.0 };
    s_hh.scaled(factor, HH_NORM_LABEL)
}

/// Spectra split into the part independent of the thermal force and the
/// part per unit force PSD: `S = base + F·per_force`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDecomposition {
    pub grid: Vec<f64>,
    pub hh_base: Vec<f64>,
    pub hh_per_force: Vec<f64>,
    pub qq_base: Vec<f64>,
    pub qq_per_force: Vec<f64>,
}

pub fn decompose(params: &SystemParams, grid_pts: &[f64], trn_table: Option<&Spectrum>) -> Result<NoiseDecomposition> {
    grid::check(grid_pts)?;
    let model = LinearModel::new(params)?;
    let f = Channel::ThermalForce.index();
    let rows: Result<Vec<[f64; 4]>> = grid_pts
        .par_iter()
        .map(|&om| {
            let plus = model.matrix(om)?;
            let minus = model.matrix(-om)?;
            let mut n = input_covariance(params, om, trn_table);
            n.n[(f, f)] = 0.0;
            let hb = sandwich(&plus, &minus, &n, 0)?;
            let qb = sandwich(&plus, &minus, &n, 1)?;
            let hf = (plus.m[(0, f)] * minus.m[(0, f)]).re;
            let qf = (plus.m[(1, f)] * minus.m[(1, f)]).re;
            Ok([hb, hf, qb, qf])
        })
        .collect();
    let rows = rows?;
    Ok(NoiseDecomposition {
        grid: grid_pts.to_vec(),
        hh_base: rows.iter().map(|r| r[0]).collect(),
        hh_per_force: rows.iter().map(|r| r[1]).collect(),
        qq_base: rows.iter().map(|r| r[2]).collect(),
        qq_per_force: rows.iter().map(|r| r[3]).collect(),
    })
}

/// Fraction of the integrand allowed in the outer 10% of the band.
pub const TAIL_TOLERANCE: f64 = 1e-3;

/// `(⟨δq²⟩ + ⟨δp²⟩)/4 − ½` from a symmetric `s_qq` on its grid.
pub fn occupancy_from_qq(omega_m: f64, s_qq: &Spectrum) -> Result<f64> {
    let g = &s_qq.grid;
    let q2: Vec<f64> = s_qq.values.clone();
    let p2: Vec<f64> = g.iter().zip(&s_qq.values).map(|(w, s)| (w / omega_m).powi(2) * s).collect();
    let total: Vec<f64> = q2.iter().zip(&p2).map(|(a, b)| a + b).collect();
    let edge = g.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let outer: Vec<f64> = g
        .iter()
        .zip(&total)
        .map(|(w, v)| if w.abs() >= 0.9 * edge { *v } else { 0.0 })
        .collect();
    let all = grid::trapezoid(g, &total);
    let tail = grid::trapezoid(g, &outer);
    if !(all > 0.0) || tail > TAIL_TOLERANCE * all {
        return Err(Error::Bandwidth(format!(
            "outer 10% of the band carries {:.3e} of the fluctuation integral; widen the grid",
            if all > 0.0 { tail / all } else { f64::NAN }
        )));
    }
    let tp = crate::params::TWO_PI;
    let q = grid::trapezoid(g, &q2) / tp;
    let p = grid::trapezoid(g, &p2) / tp;
    Ok((q + p) / 4.0 - 0.5)
}

/// Mechanical occupancy from spectral integration of `s_qq` over `grid`.
pub fn occupancy(params: &SystemParams, grid_pts: &[f64]) -> Result<f64> {
    occupancy_with(params, grid_pts, &NoiseModel::default())
}

pub fn occupancy_with(params: &SystemParams, grid_pts: &[f64], noise: &NoiseModel) -> Result<f64> {
    let (_, qq) = output_spectra_with(params, grid_pts, noise)?;
    occupancy_from_qq(params.omega_m, &qq)
}

/// Result of subtracting an independently measured fiber-noise reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Subtracted {
    pub spectrum: Spectrum,
    pub floored_fraction: f64,
}

/// Pointwise `signal − reference`, floored at zero.
pub fn gawbs_subtract(signal: &Spectrum, reference: &Spectrum) -> Result<Subtracted> {
    if signal.grid != reference.grid {
        return Err(Error::Shape(format!(
            "signal grid ({} points) differs from reference grid ({} points)",
            signal.len(),
            reference.len()
        )));
    }
    let mut floored = 0usize;
    let values = signal
        .values
        .iter()
        .zip(&reference.values)
        .map(|(s, r)| {
            let d = s - r;
            if d <= 0.0 && *r > 0.0 {
                floored += 1;
                0.0
            } else {
                d.max(0.0)
            }
        })
        .collect();
    let n = signal.len().max(1);
    Ok(Subtracted {
        spectrum: Spectrum {
            grid: signal.grid.clone(),
            values,
            unit_label: signal.unit_label.clone(),
        },
        floored_fraction: floored as f64 / n as f64,
    })
}

/// Phase-modulation tone applied during the reference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTone {
    /// Tone frequency, rad/s.
    pub omega: f64,
    /// Peak phase-modulation depth δφ, rad.
    pub depth: f64,
}

/// Gain calibration from a thermalized reference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRef {
    /// `4 n̄_m Γ_m` at the reference condition.
    pub known_force_psd: f64,
    /// Measured coherent response at the tone in raw amplitude units per radian.
    pub reference_modulation_response: Option<f64>,
    /// Model coherent response `|H(Ω_tone)|` at the reference condition.
    pub model_modulation_response: Option<f64>,
    /// Raw PSD units per model PSD unit.
    pub gain: f64,
}

impl CalibrationRef {
    pub fn unity() -> CalibrationRef {
        CalibrationRef {
            known_force_psd: 0.0,
            reference_modulation_response: None,
            model_modulation_response: None,
            gain: 1.0,
        }
    }

    /// Gain for another run whose tone response was measured as
    /// `measured_response` (raw amplitude per radian) while the model predicts
    /// `model_response` at that run's operating point.
    pub fn transfer(&self, measured_response: f64, model_response: f64) -> Result<CalibrationRef> {
        let (Some(raw_ref), Some(model_ref)) = (self.reference_modulation_response, self.model_modulation_response)
        else {
            return Err(Error::Calibration("reference carries no modulation tone".into()));
        };
        if !(measured_response > 0.0 && model_response > 0.0 && raw_ref > 0.0 && model_ref > 0.0) {
            return Err(Error::Calibration("tone responses must be positive".into()));
        }
        let ratio = (measured_response / model_response) / (raw_ref / model_ref);
        Ok(CalibrationRef {
            gain: self.gain * ratio * ratio,
            reference_modulation_response: Some(measured_response),
            model_modulation_response: Some(model_response),
            ..*self
        })
    }
}

/// Bins on each side of the nominal tone frequency searched for the tone.
pub const TONE_SEARCH_BINS: usize = 3;

/// Calibrates the detection gain against a thermalized reference spectrum.
///
/// The gain is the ratio of the raw spectral area to the model area over the
/// band (tone bins excluded). With a tone, its line area also yields the raw
/// coherent response used to transfer the gain to other runs.
pub fn calibrate(
    raw_reference: &Spectrum,
    params_at_reference: &SystemParams,
    tone: Option<&CalibrationTone>,
) -> Result<CalibrationRef> {
    let g = &raw_reference.grid;
    if g.len() < 8 {
        return Err(Error::Calibration("reference spectrum too short".into()));
    }
    let (model_hh, _) = output_spectra(params_at_reference, g)?;
    let mut exclude = vec![false; g.len()];
    let mut tone_result = None;
    if let Some(t) = tone {
        let nominal = g.partition_point(|x| *x < t.omega).min(g.len() - 1);
        let nominal = if nominal > 0 && (g[nominal - 1] - t.omega).abs() < (g[nominal] - t.omega).abs() {
            nominal - 1
        } else {
            nominal
        };
        let ring = 20usize;
        let lo = nominal.saturating_sub(ring);
        let hi = (nominal + ring).min(g.len() - 1);
        let peak = (lo..=hi)
            .max_by(|a, b| raw_reference.values[*a].total_cmp(&raw_reference.values[*b]))
            .unwrap();
        let mut ring_vals: Vec<f64> = (lo..=hi)
            .filter(|k| k.abs_diff(peak) > TONE_SEARCH_BINS)
            .map(|k| raw_reference.values[k])
            .collect();
        ring_vals.sort_by(f64::total_cmp);
        let background = ring_vals.get(ring_vals.len() / 2).copied().unwrap_or(0.0);
        if peak.abs_diff(nominal) > TONE_SEARCH_BINS || raw_reference.values[peak] <= 1.5 * background {
            return Err(Error::Calibration(format!(
                "tone not found within {TONE_SEARCH_BINS} bins of {:e} rad/s",
                t.omega
            )));
        }
        let a = peak.saturating_sub(TONE_SEARCH_BINS);
        let b = (peak + TONE_SEARCH_BINS).min(g.len() - 1);
        let (va, vb) = (raw_reference.values[a], raw_reference.values[b]);
        let excess: Vec<f64> = (a..=b)
            .map(|k| {
                let s = (g[k] - g[a]) / (g[b] - g[a]);
                raw_reference.values[k] - (va * (1.0 - s) + vb * s)
            })
            .collect();
        let area = grid::trapezoid(&g[a..=b], &excess) / crate::params::TWO_PI;
        for e in exclude.iter_mut().take(b).skip(a + 1) {
            *e = true;
        }
        // A tone δφ·cos(Ω_t t) puts d²|H|²/4 into the positive-frequency line.
        let raw_amp = (4.0 * area.max(0.0)).sqrt() / t.depth;
        let model = LinearModel::new(params_at_reference)?;
        let h = crate::coherent::response_at(&model, t.omega)?.norm();
        tone_result = Some((raw_amp, h));
    }
    let mut raw_area = 0.0;
    let mut model_area = 0.0;
    for k in 0..g.len() - 1 {
        if exclude[k] || exclude[k + 1] {
            continue;
        }
        let dx = g[k + 1] - g[k];
        raw_area += 0.5 * dx * (raw_reference.values[k] + raw_reference.values[k + 1]);
        model_area += 0.5 * dx * (model_hh.values[k] + model_hh.values[k + 1]);
    }
    if !(model_area > 0.0) || !(raw_area > 0.0) {
        return Err(Error::Calibration("non-positive spectral area".into()));
    }
    Ok(CalibrationRef {
        known_force_psd: 4.0 * params_at_reference.nbar_bath * params_at_reference.gamma_m,
        reference_modulation_response: tone_result.map(|t| t.0),
        model_modulation_response: tone_result.map(|t| t.1),
        gain: raw_area / model_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{hz, presets};
    use approx::assert_relative_eq;

    #[test]
    fn zero_temperature_covariance_has_only_vacuum() {
        let p = presets::cooling_run().with_decoherence_rate(0.0);
        let n = input_covariance(&p, hz(78e6), None);
        let nz: Vec<_> = n.nonzero().collect();
        assert_eq!(nz.len(), 8);
        assert!(nz.iter().all(|(_, _, v)| *v == 0.5));
    }

    #[test]
    fn thermal_entry_from_decoherence_rate() {
        let p = presets::cooling_run();
        let n = input_covariance(&p, hz(78e6), None);
        let f = Channel::ThermalForce.index();
        assert_relative_eq!(n.n[(f, f)], 4.0 * hz(2.2e6), max_relative = 1e-12);
    }

    #[test]
    fn trn_table_passthrough() {
        let p = presets::cooling_run();
        let table = Spectrum::new(vec![hz(1e6), hz(500e6)], vec![1e-3, 1e-3], "trn").unwrap();
        let t = Channel::Thermorefractive.index();
        for f in [-300e6, 0.5e6, 78e6, 900e6] {
            let n = input_covariance(&p, hz(f), Some(&table));
            assert_eq!(n.n[(t, t)], 1e-3);
        }
    }

    #[test]
    fn shot_noise_only_without_coupling() {
        let p = presets::cooling_run().decoupled();
        let g = grid::uniform(hz(50e6), hz(110e6), 61).unwrap();
        let (hh, _) = output_spectra(&p, &g).unwrap();
        let level = shot_noise_level(&p);
        for v in &hh.values {
            assert_relative_eq!(*v, level, max_relative = 1e-9);
        }
    }

    #[test]
    fn gawbs_cases() {
        let g = vec![1.0, 2.0, 3.0];
        let sig = Spectrum::new(g.clone(), vec![1.0, 1.0, 1.0], "x").unwrap();
        let zero = Spectrum::new(g.clone(), vec![0.0; 3], "x").unwrap();
        let out = gawbs_subtract(&sig, &zero).unwrap();
        assert_eq!(out.spectrum.values, sig.values);
        assert_eq!(out.floored_fraction, 0.0);
        let out = gawbs_subtract(&sig, &sig).unwrap();
        assert_eq!(out.spectrum.values, vec![0.0; 3]);
        assert_eq!(out.floored_fraction, 1.0);
        let fiber = Spectrum::new(g.clone(), vec![0.0, 0.02, 0.0], "x").unwrap();
        let out = gawbs_subtract(&sig, &fiber).unwrap();
        assert_relative_eq!(out.spectrum.values[1], 0.98, epsilon = 1e-15);
        let other = Spectrum::new(vec![1.0, 2.0], vec![0.0; 2], "x").unwrap();
        assert!(matches!(gawbs_subtract(&sig, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn interpolation_clamps() {
        let s = Spectrum::new(vec![1.0, 3.0], vec![2.0, 4.0], "x").unwrap();
        assert_eq!(s.interpolate(0.0), 2.0);
        assert_eq!(s.interpolate(2.0), 3.0);
        assert_eq!(s.interpolate(9.0), 4.0);
    }
}
