//! Gaussian phase-modulation pulses and their time-domain response.
//!
//! The pulse enters as a phase modulation `δφ(t) = β(t) sin(Ω_mod t + φ₀)`
//! and is propagated with the coherent transfer functions on an FFT grid.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::coherent::response_pair;
use crate::error::{Error, Result};
use crate::params::{PhysicalConstants, SystemParams, TWO_PI};
use crate::response::{normal_mode_frequencies, LinearModel};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Modulation depth `π U₀/V_π` above which the small-angle expansion is doubtful.
pub const WEAK_MODULATION_LIMIT: f64 = 0.3;

/// Pass band of the homodyne detection chain, Hz.
pub const DETECTION_BAND_HZ: (f64, f64) = (25.0e6, 125.0e6);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    /// Peak electro-optic drive voltage U₀, V.
    pub u0: f64,
    /// Gaussian envelope parameter τ, s.
    pub tau: f64,
    /// Envelope center t₀, s.
    pub t0: f64,
    /// Modulation carrier Ω_mod, rad/s.
    pub omega_mod: f64,
    /// Carrier phase φ₀, rad.
    pub phi0: f64,
    /// Half-wave voltage V_π, V.
    pub v_pi: f64,
    /// Optical carrier power P_c, W.
    pub p_carrier: f64,
    /// Laser angular frequency ω, rad/s.
    pub omega_optical: f64,
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidParameter {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be > 0");
        }
        if !(self.v_pi > 0.0 && self.v_pi.is_finite()) {
            return bad("v_pi", "must be > 0");
        }
        if !(self.p_carrier >= 0.0 && self.p_carrier.is_finite()) {
            return bad("p_carrier", "must be >= 0");
        }
        if !(self.omega_optical > 0.0 && self.omega_optical.is_finite()) {
            return bad("omega_optical", "must be > 0");
        }
        for (field, v) in [("u0", self.u0), ("t0", self.t0), ("omega_mod", self.omega_mod), ("phi0", self.phi0)] {
            if !v.is_finite() {
                return bad(field, "must be finite");
            }
        }
        Ok(())
    }

    /// Laser angular frequency for a vacuum wavelength in meters.
    pub fn omega_from_wavelength(wavelength: f64) -> f64 {
        TWO_PI * SPEED_OF_LIGHT / wavelength
    }

    /// Peak modulation depth `π U₀/V_π`.
    pub fn peak_depth(&self) -> f64 {
        std::f64::consts::PI * self.u0 / self.v_pi
    }

    /// True when the peak depth exceeds [`WEAK_MODULATION_LIMIT`].
    pub fn beyond_weak_modulation(&self) -> bool {
        self.peak_depth().abs() > WEAK_MODULATION_LIMIT
    }

    /// Full width at half maximum of the envelope, `2τ√ln2`.
    pub fn fwhm(&self) -> f64 {
        2.0 * self.tau * std::f64::consts::LN_2.sqrt()
    }

    /// Equivalent phase-modulation waveform δφ(t).
    pub fn phase(&self, t: f64) -> f64 {
        modulation_depth(self, t) * (self.omega_mod * t + self.phi0).sin()
    }
}

/// `β(t) = π U₀ exp(−((t−t₀)/τ)²)/V_π`.
pub fn modulation_depth(pulse: &PulseSpec, t: f64) -> f64 {
    let x = (t - pulse.t0) / pulse.tau;
    pulse.peak_depth() * (-x * x).exp()
}

/// Mean photon number in one pulse, `(π^{5/2}/4√2)·(τP_c/ħω)·(U₀/V_π)²`.
pub fn pulse_photons(pulse: &PulseSpec) -> f64 {
    let hbar = PhysicalConstants::CODATA.hbar;
    let pi = std::f64::consts::PI;
    pi.powf(2.5) / (4.0 * std::f64::consts::SQRT_2) * pulse.tau * pulse.p_carrier / (hbar * pulse.omega_optical)
        * (pulse.u0 / pulse.v_pi).powi(2)
}

/// `∫ P_c (β(t)/2)² dt / ħω` by composite Simpson quadrature over t₀ ± 8τ.
pub fn pulse_photons_quadrature(pulse: &PulseSpec) -> f64 {
    let hbar = PhysicalConstants::CODATA.hbar;
    let n = 4000usize;
    let a = pulse.t0 - 8.0 * pulse.tau;
    let h = 16.0 * pulse.tau / n as f64;
    let f = |t: f64| (modulation_depth(pulse, t) / 2.0).powi(2);
    let mut sum = f(a) + f(a + n as f64 * h);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    pulse.p_carrier * sum * h / 3.0 / (hbar * pulse.omega_optical)
}

/// Uniformly sampled pulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    /// Modulation envelope β(t).
    pub drive: Vec<f64>,
    pub homodyne: Vec<f64>,
    /// Mechanical quadrature δq.
    pub displacement: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOptions {
    /// Brick-wall pass band applied to the homodyne trace, rad/s.
    pub bandpass: Option<(f64, f64)>,
    /// Fraction of the peak the responses must fall below by the window end.
    pub decay_tolerance: f64,
}

impl Default for PulseOptions {
    fn default() -> Self {
        PulseOptions {
            bandpass: None,
            decay_tolerance: 1e-3,
        }
    }
}

impl PulseOptions {
    pub fn with_detection_band() -> PulseOptions {
        PulseOptions {
            bandpass: Some((TWO_PI * DETECTION_BAND_HZ.0, TWO_PI * DETECTION_BAND_HZ.1)),
            ..PulseOptions::default()
        }
    }
}

/// Uniform sample times `start + k/sample_rate`.
pub fn sample_times(start: f64, sample_rate: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + k as f64 / sample_rate).collect()
}

/// Default acquisition: 1 GS/s over 4 µs starting at 0.
pub fn default_times() -> Vec<f64> {
    sample_times(0.0, 1.0e9, 4000)
}

fn sample_interval(times: &[f64]) -> Result<f64> {
    if times.len() < 16 {
        return Err(Error::Sampling("need at least 16 samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::Sampling("times must increase".into()));
    }
    for (k, t) in times.iter().enumerate() {
        if (t - (times[0] + k as f64 * dt)).abs() > 1e-6 * dt {
            return Err(Error::Sampling(format!("non-uniform sampling at index {k}")));
        }
    }
    Ok(dt)
}

/// Longest relevant memory of the linear response, s.
fn memory_time(params: &SystemParams) -> f64 {
    let nm = normal_mode_frequencies(params);
    let slowest = nm
        .energy_decay_rates()
        .iter()
        .cloned()
        .chain([params.kappa()])
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    10.0 / slowest
}

/// Time-domain homodyne and displacement response to `pulse`.
pub fn pulse_response(
    params: &SystemParams,
    pulse: &PulseSpec,
    times: &[f64],
    options: &PulseOptions,
) -> Result<TimeTrace> {
    pulse.validate()?;
    let model = LinearModel::new(params)?;
    let dt = sample_interval(times)?;
    let fs = 1.0 / dt;
    let needed = 4.0 * (params.omega_m + params.kappa()) / TWO_PI;
    if fs <= needed {
        return Err(Error::Sampling(format!(
            "sample rate {fs:e} Hz must exceed {needed:e} Hz"
        )));
    }
    let n = times.len();
    // Zero padding beyond the window absorbs the circular wrap-around.
    let memory = (memory_time(params) / dt).ceil() as usize;
    let m = (n + memory.max(n)).next_power_of_two();

    let drive: Vec<f64> = times.iter().map(|t| modulation_depth(pulse, *t)).collect();
    let mut phi: Vec<Complex64> = times.iter().map(|t| Complex64::new(pulse.phase(*t), 0.0)).collect();
    phi.resize(m, Complex64::new(0.0, 0.0));

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);
    // x(Ω) = ∫ x(t) e^{+iΩt} dt is an unnormalized inverse DFT.
    inverse.process(&mut phi);

    let mut yh = vec![Complex64::new(0.0, 0.0); m];
    let mut yq = vec![Complex64::new(0.0, 0.0); m];
    for j in 1..m / 2 {
        let omega = TWO_PI * j as f64 * fs / m as f64;
        let (h, q) = response_pair(&model, omega)?;
        let pass = options
            .bandpass
            .map(|(lo, hi)| omega >= lo && omega <= hi)
            .unwrap_or(true);
        let hh = if pass { h } else { Complex64::new(0.0, 0.0) };
        yh[j] = hh * phi[j];
        yq[j] = q * phi[j];
        yh[m - j] = hh.conj() * phi[m - j];
        yq[m - j] = q.conj() * phi[m - j];
    }
    forward.process(&mut yh);
    forward.process(&mut yq);
    let scale = 1.0 / m as f64;
    let homodyne: Vec<f64> = yh[..n].iter().map(|z| z.re * scale).collect();
    let displacement: Vec<f64> = yq[..n].iter().map(|z| z.re * scale).collect();

    let tol = options.decay_tolerance;
    for (name, trace) in [("homodyne", &homodyne), ("displacement", &displacement)] {
        let peak = trace.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let tail_start = n - (n / 20).max(1);
        let tail = trace[tail_start..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if tail > tol * peak {
            let suggest = (pulse.t0 - times[0]).max(0.0) + 5.0 * pulse.tau + memory_time(params);
            return Err(Error::Truncation(format!(
                "{name} response is {:.2e} of its peak at the window end; use a window of at least {suggest:.3e} s",
                tail / peak
            )));
        }
    }
    Ok(TimeTrace {
        times: times.to_vec(),
        drive,
        homodyne,
        displacement,
    })
}

/// Magnitude of the analytic signal (one-sided spectrum).
pub fn envelope(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = signal.iter().map(|x| Complex64::new(*x, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= w;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.norm() / n as f64).collect()
}

/// Exponential decay `A e^{−rate·t}` fitted to an envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Amplitude decay rate, 1/s.
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of the log-linear fit.
    pub log_residual: f64,
    /// Number of points used in the regression.
    pub points: usize,
}

/// Log-linear decay fit of `env` over `[t_start, t_end]`.
///
/// When the envelope beats (three or more local maxima in the window), the
/// regression uses the local maxima only so that the beat does not bias it.
pub fn fit_decay(times: &[f64], env: &[f64], t_start: f64, t_end: f64) -> Result<DecayFit> {
    let idx: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] >= t_start && times[k] <= t_end && env[k] > 0.0)
        .collect();
    if idx.len() < 3 {
        return Err(Error::Domain("decay window holds fewer than 3 samples".into()));
    }
    let maxima: Vec<usize> = idx
        .windows(3)
        .filter(|w| env[w[1]] > env[w[0]] && env[w[1]] >= env[w[2]])
        .map(|w| w[1])
        .collect();
    let pts = if maxima.len() >= 3 { maxima } else { idx };
    let nf = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let t_ref = times[pts[0]];
    for &k in &pts {
        let x = times[k] - t_ref;
        let y = env[k].ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = nf * sxx - sx * sx;
    if !(denom > 0.0) {
        return Err(Error::Domain("degenerate decay window".into()));
    }
    let slope = (nf * sxy - sx * sy) / denom;
    let icpt = (sy - slope * sx) / nf;
    let rss: f64 = pts
        .iter()
        .map(|&k| (env[k].ln() - (icpt + slope * (times[k] - t_ref))).powi(2))
        .sum();
    Ok(DecayFit {
        rate: -slope,
        amplitude: (icpt + slope * (-t_ref)).exp(),
        log_residual: (rss / nf).sqrt(),
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{hz, presets};
    use approx::assert_relative_eq;

    pub(crate) fn pulse() -> PulseSpec {
        PulseSpec {
            u0: 0.05,
            tau: 32e-9,
            t0: 0.4e-6,
            omega_mod: hz(78.226e6),
            phi0: 0.0,
            v_pi: 4.0,
            p_carrier: 1e-6,
            omega_optical: PulseSpec::omega_from_wavelength(780e-9),
        }
    }

    #[test]
    fn depth_and_fwhm() {
        let p = pulse();
        assert_relative_eq!(modulation_depth(&p, p.t0), std::f64::consts::PI * 0.05 / 4.0);
        assert_eq!(modulation_depth(&PulseSpec { u0: 0.0, ..p }, 0.1e-6), 0.0);
        assert!((p.fwhm() * 1e9 - 53.3).abs() < 0.05);
        let half = modulation_depth(&p, p.t0 + p.fwhm() / 2.0) / modulation_depth(&p, p.t0);
        assert_relative_eq!(half, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn photons_closed_form_matches_quadrature() {
        let p = pulse();
        let a = pulse_photons(&p);
        let b = pulse_photons_quadrature(&p);
        assert!((a / b - 1.0).abs() < 1e-6, "{a} {b}");
        assert_eq!(pulse_photons(&PulseSpec { u0: 0.0, ..p }), 0.0);
    }

    #[test]
    fn ten_photon_pulse() {
        let base = pulse();
        let unit = pulse_photons(&PulseSpec { p_carrier: 1.0, ..base });
        let p = PulseSpec {
            p_carrier: 10.0 / unit,
            ..base
        };
        assert_relative_eq!(pulse_photons_quadrature(&p), 10.0, max_relative = 1e-6);
    }

    #[test]
    fn zero_drive_gives_zero_traces() {
        let p = presets::strong_coupling_run();
        let t = sample_times(0.0, 1e9, 2048);
        let tr = pulse_response(&p, &PulseSpec { u0: 0.0, ..pulse() }, &t, &PulseOptions::default()).unwrap();
        assert!(tr.homodyne.iter().all(|v| *v == 0.0));
        assert!(tr.displacement.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sampling_errors() {
        let p = presets::strong_coupling_run();
        let slow = sample_times(0.0, 2e8, 2048);
        assert!(matches!(
            pulse_response(&p, &pulse(), &slow, &PulseOptions::default()),
            Err(Error::Sampling(_))
        ));
        let short = sample_times(0.0, 1e9, 600);
        assert!(matches!(
            pulse_response(&p, &pulse(), &short, &PulseOptions::default()),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn linear_in_drive_voltage() {
        let p = presets::strong_coupling_run();
        let t = sample_times(0.0, 1e9, 4096);
        let a = pulse_response(&p, &pulse(), &t, &PulseOptions::default()).unwrap();
        let b = pulse_response(&p, &PulseSpec { u0: 0.1, ..pulse() }, &t, &PulseOptions::default()).unwrap();
        let peak = a.homodyne.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.homodyne.iter().zip(&b.homodyne) {
            assert!((2.0 * x - y).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn envelope_of_pure_tone() {
        let n = 1024;
        let s: Vec<f64> = (0..n).map(|k| 3.0 * (TWO_PI * 64.0 * k as f64 / n as f64).cos()).collect();
        for v in envelope(&s) {
            assert_relative_eq!(v, 3.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn decay_fit_exact_exponential() {
        let t = sample_times(0.0, 1e9, 2000);
        let env: Vec<f64> = t.iter().map(|x| 2.0 * (-3e6 * x).exp()).collect();
        let f = fit_decay(&t, &env, 0.1e-6, 1.5e-6).unwrap();
        assert_relative_eq!(f.rate, 3e6, max_relative = 1e-9);
        assert_relative_eq!(f.amplitude, 2.0, max_relative = 1e-9);
    }
}
