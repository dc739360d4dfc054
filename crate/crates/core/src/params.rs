//! Physical parameters of one operating point and the rates derived from them.
//!
//! Every frequency and rate is stored in angular units (rad/s). Conversion to
//! and from plain Hz happens only at the file and CLI boundary.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// CODATA 2018 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_boltzmann: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: 1.054_571_817e-34,
        k_boltzmann: 1.380_649e-23,
    };
}

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Converts a plain frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Converts an angular frequency in rad/s to plain Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

/// All rates and detection settings that define one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Mechanical resonance frequency, rad/s.
    pub omega_m: f64,
    /// Intrinsic mechanical damping rate, rad/s.
    pub gamma_m: f64,
    /// Coupling rate to the waveguide, rad/s.
    pub kappa_ex: f64,
    /// All other optical losses, rad/s.
    pub kappa_0: f64,
    /// Vacuum optomechanical coupling rate, rad/s.
    pub g0: f64,
    /// Effective laser detuning from the (shifted) cavity resonance, rad/s.
    pub detuning: f64,
    /// Detuning-normalized intracavity amplitude.
    pub abar0: f64,
    /// Photothermoelastic coupling strength, rad/s.
    pub g_pte: f64,
    /// Photothermorefractive coupling strength, rad/s.
    pub g_ptr: f64,
    /// Thermal bath occupancy of the mechanical mode.
    pub nbar_bath: f64,
    /// Power transmission from the cavity output to the homodyne detector.
    pub eta_cryo: f64,
    /// Reflectivity of the beamsplitter feeding the local oscillator arm.
    pub bs_ratio: f64,
    /// Local oscillator phase relative to the DC-nulled (phase-quadrature) lock point, rad.
    pub phi_lo: f64,
    /// Mean local oscillator amplitude, sqrt(photons/s).
    pub s_lo_amp: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            omega_m: hz(78.226e6),
            gamma_m: hz(3.6e3),
            kappa_ex: hz(3.02e6),
            kappa_0: hz(3.02e6),
            g0: hz(3.4e3),
            detuning: -hz(78.226e6),
            abar0: 0.0,
            g_pte: 0.0,
            g_ptr: 0.0,
            nbar_bath: 0.0,
            eta_cryo: 1.0,
            bs_ratio: 0.5,
            phi_lo: 0.0,
            s_lo_amp: 1.0,
        }
    }
}

fn check(cond: bool, field: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: reason.to_string(),
        })
    }
}

impl SystemParams {
    /// Checks every invariant and names the first offending field.
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 14] = [
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("kappa_ex", self.kappa_ex),
            ("kappa_0", self.kappa_0),
            ("g0", self.g0),
            ("detuning", self.detuning),
            ("abar0", self.abar0),
            ("g_pte", self.g_pte),
            ("g_ptr", self.g_ptr),
            ("nbar_bath", self.nbar_bath),
            ("eta_cryo", self.eta_cryo),
            ("bs_ratio", self.bs_ratio),
            ("phi_lo", self.phi_lo),
            ("s_lo_amp", self.s_lo_amp),
        ];
        for (name, v) in fields {
            check(v.is_finite(), name, "must be finite")?;
        }
        check(self.omega_m > 0.0, "omega_m", "must be > 0")?;
        check(self.gamma_m > 0.0, "gamma_m", "must be > 0")?;
        check(self.kappa_ex >= 0.0, "kappa_ex", "must be >= 0")?;
        check(self.kappa_0 >= 0.0, "kappa_0", "must be >= 0")?;
        check(
            self.kappa_ex + self.kappa_0 > 0.0,
            "kappa_0",
            "kappa_ex + kappa_0 must be > 0",
        )?;
        check(self.abar0 >= 0.0, "abar0", "must be >= 0")?;
        check(self.nbar_bath >= 0.0, "nbar_bath", "must be >= 0")?;
        check(
            (0.0..=1.0).contains(&self.eta_cryo),
            "eta_cryo",
            "must lie in [0, 1]",
        )?;
        // r = 0 leaves no local oscillator and no way to reference the mean fields.
        check(
            self.bs_ratio > 0.0 && self.bs_ratio <= 1.0,
            "bs_ratio",
            "must lie in (0, 1]",
        )?;
        check(self.s_lo_amp >= 0.0, "s_lo_amp", "must be >= 0")?;
        Ok(())
    }

    /// Total optical decay rate.
    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa_0 + self.kappa_ex
    }

    /// Mean intracavity amplitude at the configured detuning.
    pub fn abar(&self) -> Complex64 {
        let half = Complex64::new(self.kappa() / 2.0, 0.0);
        let denom = Complex64::new(self.kappa() / 2.0, -self.detuning);
        self.abar0 * half / denom
    }

    /// Field-enhanced coupling rate 2 g0 |ā|.
    pub fn omega_c(&self) -> f64 {
        2.0 * self.g0 * self.abar().norm()
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    /// Sets `abar0` so that the coupling rate equals `omega_c` at the current detuning.
    pub fn with_coupling_rate(mut self, omega_c: f64) -> Self {
        let k2 = self.kappa() / 2.0;
        let lorentz = k2 / (k2 * k2 + self.detuning * self.detuning).sqrt();
        self.abar0 = if self.g0 > 0.0 {
            omega_c / (2.0 * self.g0 * lorentz)
        } else {
            0.0
        };
        self
    }

    /// Sets the bath occupancy so that Γ_m·n̄_m equals `gamma`.
    pub fn with_decoherence_rate(mut self, gamma: f64) -> Self {
        self.nbar_bath = gamma / self.gamma_m;
        self
    }

    /// Scales κ while keeping the ratio κ_ex/κ fixed.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        let k = self.kappa();
        let frac = if k > 0.0 { self.kappa_ex / k } else { 0.5 };
        self.kappa_ex = frac * kappa;
        self.kappa_0 = (1.0 - frac) * kappa;
        self
    }

    /// Copy with every optomechanical and photothermal coupling removed.
    pub fn decoupled(mut self) -> Self {
        self.g0 = 0.0;
        self.g_pte = 0.0;
        self.g_ptr = 0.0;
        self
    }

    /// True when either photothermal term (with its 1/Ω pole) is active.
    pub fn has_photothermal(&self) -> bool {
        self.g_pte != 0.0 || self.g_ptr != 0.0
    }
}

/// Rates derived from a [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub kappa: f64,
    pub abar: Complex64,
    pub nbar_cavity: f64,
    pub omega_c: f64,
    pub gamma_cool: f64,
    pub nbar_min: f64,
    pub gamma_decoherence: f64,
}

/// Computes the intracavity field, coupling rate, cooling rate, and decoherence rate.
pub fn derive(params: &SystemParams) -> Result<DerivedRates> {
    params.validate()?;
    let kappa = params.kappa();
    let abar = params.abar();
    let nbar_cavity = abar.norm_sqr();
    let omega_c = 2.0 * params.g0 * abar.norm();
    Ok(DerivedRates {
        kappa,
        abar,
        nbar_cavity,
        omega_c,
        gamma_cool: omega_c * omega_c / kappa,
        nbar_min: kappa * kappa / (16.0 * params.omega_m * params.omega_m),
        gamma_decoherence: params.gamma_m * params.nbar_bath,
    })
}

/// Relative weight of the anti-Stokes to Stokes sideband deficit, 1 − n̄/(n̄+1).
pub fn sideband_asymmetry(nbar: f64) -> Result<f64> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("occupancy must be finite and >= 0, got {nbar}")));
    }
    Ok(1.0 / (nbar + 1.0))
}

/// High-temperature bath occupancy k_B T / ħΩ_m.
pub fn bath_occupancy(temperature: f64, omega_m: f64) -> Result<f64> {
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature must be >= 0, got {temperature}")));
    }
    if !(omega_m > 0.0) {
        return Err(Error::Domain(format!("omega_m must be > 0, got {omega_m}")));
    }
    let c = PhysicalConstants::CODATA;
    Ok(c.k_boltzmann * temperature / (c.hbar * omega_m))
}

/// Named operating points used throughout the examples and tests.
pub mod presets {
    use super::{hz, SystemParams};

    /// Low-occupancy cooling run on the lower sideband: Ω_c ≈ 2π·3.7 MHz,
    /// γ = 2π·2.2 MHz, with the globally fitted photothermal strengths.
    pub fn cooling_run() -> SystemParams {
        let gamma_m = hz(3.6e3);
        SystemParams {
            omega_m: hz(78.226e6),
            gamma_m,
            kappa_ex: hz(3.02e6),
            kappa_0: hz(3.02e6),
            g0: hz(3.4e3),
            detuning: -hz(78.226e6),
            abar0: 14.2e3,
            g_pte: -hz(122.0),
            g_ptr: hz(0.32),
            nbar_bath: hz(2.2e6) / gamma_m,
            eta_cryo: 1.0,
            bs_ratio: 0.5,
            phi_lo: 0.0,
            s_lo_amp: 1.0,
        }
    }

    /// Strong-coupling point: Ω_c = 2π·11.4 MHz, κ = 2π·7.1 MHz, lower sideband.
    pub fn strong_coupling_run() -> SystemParams {
        let base = SystemParams {
            kappa_ex: hz(3.55e6),
            kappa_0: hz(3.55e6),
            g_pte: 0.0,
            g_ptr: 0.0,
            ..cooling_run()
        };
        base.with_coupling_rate(hz(11.4e6))
    }
}
