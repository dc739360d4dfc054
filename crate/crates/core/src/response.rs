//! Linearized frequency-domain equations of motion and the homodyne detection chain.
//!
//! Fourier convention: `x(Ω) = ∫ x(t) e^{+iΩt} dt`, so `d/dt → −iΩ`, and
//! `δa†(Ω)` denotes `[δa(−Ω)]†`.
//!
//! The unknowns `(δa, δa†, δq)` at one Fourier frequency satisfy a 3×3 complex
//! linear system. The cavity row carries the photothermorefractive term
//! `+ā g_ptr (Ω_m/Ω)(ā* δa + ā δa†)`, the conjugate row is the same equation
//! taken at `−Ω` and daggered, and the mechanical row carries
//! `−2(g0 + i g_pte Ω_m/Ω)(ā δa† + ā* δa)`.

use nalgebra::{Matrix3, SMatrix, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::SystemParams;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Number of input fluctuation channels.
pub const N_CHANNELS: usize = 10;

/// The ten input fluctuation channels in their fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Laser,
    LaserDag,
    Beamsplitter,
    BeamsplitterDag,
    Cavity,
    CavityDag,
    Cryo,
    CryoDag,
    Thermorefractive,
    ThermalForce,
}

impl Channel {
    /// Basis order shared by the transfer matrix and the input covariance.
    pub const ALL: [Channel; N_CHANNELS] = [
        Channel::Laser,
        Channel::LaserDag,
        Channel::Beamsplitter,
        Channel::BeamsplitterDag,
        Channel::Cavity,
        Channel::CavityDag,
        Channel::Cryo,
        Channel::CryoDag,
        Channel::Thermorefractive,
        Channel::ThermalForce,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// The hermitian-conjugate partner; the two real channels are self-partnered.
    pub fn partner(self) -> Channel {
        use Channel::*;
        match self {
            Laser => LaserDag,
            LaserDag => Laser,
            Beamsplitter => BeamsplitterDag,
            BeamsplitterDag => Beamsplitter,
            Cavity => CavityDag,
            CavityDag => Cavity,
            Cryo => CryoDag,
            CryoDag => Cryo,
            Thermorefractive => Thermorefractive,
            ThermalForce => ThermalForce,
        }
    }

    pub fn label(self) -> &'static str {
        use Channel::*;
        match self {
            Laser => "ds_las",
            LaserDag => "ds_las_dag",
            Beamsplitter => "ds_bs",
            BeamsplitterDag => "ds_bs_dag",
            Cavity => "ds_cav",
            CavityDag => "ds_cav_dag",
            Cryo => "ds_cryo",
            CryoDag => "ds_cryo_dag",
            Thermorefractive => "dw_tr",
            ThermalForce => "df_th",
        }
    }
}

/// Input vector in [`Channel::ALL`] order.
pub type InputVector = [Complex64; N_CHANNELS];

/// Solution of the internal equations at one Fourier frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalState {
    pub delta_a: Complex64,
    pub delta_a_dag: Complex64,
    pub delta_q: Complex64,
}

/// Transfer matrix from the ten input channels to `(δh, δq)` at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    pub omega: f64,
    /// Row 0 is the homodyne signal δh, row 1 the mechanical quadrature δq.
    pub m: SMatrix<Complex64, 2, N_CHANNELS>,
}

impl ResponseMatrix {
    /// Applies the matrix to an input vector, returning `(δh, δq)`.
    pub fn apply(&self, inputs: &InputVector) -> (Complex64, Complex64) {
        let mut h = ZERO;
        let mut q = ZERO;
        for (j, x) in inputs.iter().enumerate() {
            h += self.m[(0, j)] * x;
            q += self.m[(1, j)] * x;
        }
        (h, q)
    }

    #[inline]
    pub fn h(&self, c: Channel) -> Complex64 {
        self.m[(0, c.index())]
    }

    #[inline]
    pub fn q(&self, c: Channel) -> Complex64 {
        self.m[(1, c.index())]
    }
}

/// Mean fields along the detection chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFields {
    pub s_las: Complex64,
    pub s_in: Complex64,
    pub s_out: Complex64,
    pub s_sig: Complex64,
    pub s_lo: Complex64,
    /// Total homodyne phase: DC-nulling lock point plus the configured offset.
    pub phi: f64,
}

impl MeanFields {
    pub fn new(params: &SystemParams) -> MeanFields {
        let r = params.bs_ratio;
        let s_las = Complex64::new(params.s_lo_amp / r.sqrt(), 0.0);
        let s_in = (1.0 - r).sqrt() * s_las;
        let k2 = params.kappa() / 2.0;
        let cavity = Complex64::new(k2, -params.detuning);
        let s_out = s_in * (1.0 - params.kappa_ex / cavity);
        let s_sig = params.eta_cryo.sqrt() * s_out;
        let s_lo = r.sqrt() * s_las;
        // h̄ = 2 Re(s̄_lo* s̄_sig e^{−iφ}) vanishes at φ = arg s̄_sig − arg s̄_lo − π/2.
        let lock = if s_sig.norm() > 0.0 && s_lo.norm() > 0.0 {
            s_sig.arg() - s_lo.arg() - std::f64::consts::FRAC_PI_2
        } else {
            0.0
        };
        MeanFields {
            s_las,
            s_in,
            s_out,
            s_sig,
            s_lo,
            phi: lock + params.phi_lo,
        }
    }

    /// Mean homodyne signal; zero when `phi_lo = 0`.
    pub fn dc_signal(&self) -> f64 {
        2.0 * (self.s_lo.conj() * self.s_sig * Complex64::from_polar(1.0, -self.phi)).re
    }

    /// Homodyne shot-noise floor `|s̄_lo|² + |s̄_sig|²` of the symmetrized δh spectrum.
    pub fn shot_noise_level(&self) -> f64 {
        self.s_lo.norm_sqr() + self.s_sig.norm_sqr()
    }
}

/// Precomputed model for repeated evaluation at many Fourier frequencies.
#[derive(Debug, Clone)]
pub struct LinearModel {
    params: SystemParams,
    abar: Complex64,
    mean: MeanFields,
}

impl LinearModel {
    pub fn new(params: &SystemParams) -> Result<LinearModel> {
        params.validate()?;
        Ok(LinearModel {
            params: *params,
            abar: params.abar(),
            mean: MeanFields::new(params),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn mean_fields(&self) -> &MeanFields {
        &self.mean
    }

    fn check_omega(&self, omega: f64) -> Result<()> {
        if !omega.is_finite() {
            return Err(Error::Domain(format!("non-finite Fourier frequency {omega}")));
        }
        if omega == 0.0 && self.params.has_photothermal() {
            return Err(Error::Domain(
                "omega = 0 with photothermal terms (1/omega pole)".into(),
            ));
        }
        Ok(())
    }

    /// Coefficient matrix of the internal system.
    fn system(&self, omega: f64) -> Matrix3<Complex64> {
        let p = &self.params;
        let a = self.abar;
        let kappa = p.kappa();
        let (ptr, pte) = if p.has_photothermal() {
            (p.g_ptr * p.omega_m / omega, p.g_pte * p.omega_m / omega)
        } else {
            (0.0, 0.0)
        };
        let n = a.norm_sqr();
        let cav = Complex64::new(kappa / 2.0, -(p.detuning + omega));
        let cav_dag = Complex64::new(kappa / 2.0, -(omega - p.detuning));
        let mech = Complex64::new(
            (p.omega_m * p.omega_m - omega * omega) / p.omega_m,
            -omega * p.gamma_m / p.omega_m,
        );
        let force = 2.0 * Complex64::new(p.g0, pte);
        Matrix3::new(
            cav - ptr * n,
            -ptr * a * a,
            I * p.g0 * a,
            ptr * (a * a).conj(),
            cav_dag + ptr * n,
            -I * p.g0 * a.conj(),
            force * a.conj(),
            force * a,
            mech,
        )
    }

    /// Input coupling: right-hand side of the internal system per unit channel.
    fn input_coupling(&self) -> SMatrix<Complex64, 3, N_CHANNELS> {
        let p = &self.params;
        let a = self.abar;
        let r = p.bs_ratio;
        let sk = p.kappa_ex.sqrt();
        let mut b = SMatrix::<Complex64, 3, N_CHANNELS>::zeros();
        let c = |v: f64| Complex64::new(v, 0.0);
        b[(0, Channel::Laser.index())] = c(sk * (1.0 - r).sqrt());
        b[(0, Channel::Beamsplitter.index())] = c(-sk * r.sqrt());
        b[(0, Channel::Cavity.index())] = c(p.kappa_0.sqrt());
        b[(0, Channel::Thermorefractive.index())] = -I * a;
        b[(1, Channel::LaserDag.index())] = c(sk * (1.0 - r).sqrt());
        b[(1, Channel::BeamsplitterDag.index())] = c(-sk * r.sqrt());
        b[(1, Channel::CavityDag.index())] = c(p.kappa_0.sqrt());
        b[(1, Channel::Thermorefractive.index())] = I * a.conj();
        b[(2, Channel::ThermalForce.index())] = c(1.0);
        b
    }

    fn solve(&self, omega: f64, rhs: &SMatrix<Complex64, 3, N_CHANNELS>) -> Result<SMatrix<Complex64, 3, N_CHANNELS>> {
        self.check_omega(omega)?;
        let a = self.system(omega);
        let scale: f64 = (0..3)
            .map(|i| a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .product();
        let det = a.determinant();
        if !det.is_finite() || det.norm() <= 1e-13 * scale {
            return Err(Error::Singular { omega });
        }
        let lu = a.lu();
        lu.solve(rhs).ok_or(Error::Singular { omega })
    }

    /// Solves for `(δa, δa†, δq)` driven by an arbitrary input vector.
    pub fn solve_internal(&self, omega: f64, inputs: &InputVector) -> Result<InternalState> {
        self.check_omega(omega)?;
        let b = self.input_coupling();
        let x = SMatrix::<Complex64, N_CHANNELS, 1>::from_column_slice(inputs);
        let rhs: Vector3<Complex64> = b * x;
        let a = self.system(omega);
        let scale: f64 = (0..3)
            .map(|i| a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .product();
        let det = a.determinant();
        if !det.is_finite() || det.norm() <= 1e-13 * scale {
            return Err(Error::Singular { omega });
        }
        let sol = a.lu().solve(&rhs).ok_or(Error::Singular { omega })?;
        Ok(InternalState {
            delta_a: sol[0],
            delta_a_dag: sol[1],
            delta_q: sol[2],
        })
    }

    /// Builds the 2×10 transfer matrix at `omega`.
    pub fn matrix(&self, omega: f64) -> Result<ResponseMatrix> {
        let b = self.input_coupling();
        let x = self.solve(omega, &b)?;
        let p = &self.params;
        let r = p.bs_ratio;
        let eta = p.eta_cryo;
        let sk = p.kappa_ex.sqrt();
        let mf = &self.mean;
        let e_plus = Complex64::from_polar(1.0, mf.phi);
        let c_sig_dag = mf.s_lo * e_plus;
        let c_sig = (mf.s_lo * e_plus).conj();
        let c_lo_dag = mf.s_sig * e_plus.conj();
        let c_lo = (mf.s_sig * e_plus.conj()).conj();

        let mut m = SMatrix::<Complex64, 2, N_CHANNELS>::zeros();
        for ch in Channel::ALL {
            let j = ch.index();
            let (da, da_dag, dq) = (x[(0, j)], x[(1, j)], x[(2, j)]);
            let unit = |c: Channel| if c == ch { 1.0 } else { 0.0 };
            let s_in = (1.0 - r).sqrt() * unit(Channel::Laser) - r.sqrt() * unit(Channel::Beamsplitter);
            let s_in_dag =
                (1.0 - r).sqrt() * unit(Channel::LaserDag) - r.sqrt() * unit(Channel::BeamsplitterDag);
            let s_sig = eta.sqrt() * (s_in - sk * da) + (1.0 - eta).sqrt() * unit(Channel::Cryo);
            let s_sig_dag =
                eta.sqrt() * (s_in_dag - sk * da_dag) + (1.0 - eta).sqrt() * unit(Channel::CryoDag);
            let s_lo = r.sqrt() * unit(Channel::Laser) + (1.0 - r).sqrt() * unit(Channel::Beamsplitter);
            let s_lo_dag =
                r.sqrt() * unit(Channel::LaserDag) + (1.0 - r).sqrt() * unit(Channel::BeamsplitterDag);
            m[(0, j)] = c_sig_dag * s_sig_dag + c_sig * s_sig + c_lo_dag * s_lo_dag + c_lo * s_lo;
            m[(1, j)] = dq;
        }
        Ok(ResponseMatrix { omega, m })
    }
}

/// Solves the internal equations for one input vector.
pub fn solve_internal(params: &SystemParams, omega: f64, inputs: &InputVector) -> Result<InternalState> {
    LinearModel::new(params)?.solve_internal(omega, inputs)
}

/// Transfer matrix `M(Ω)` from the ten input channels to `(δh, δq)`.
pub fn transfer_matrix(params: &SystemParams, omega: f64) -> Result<ResponseMatrix> {
    LinearModel::new(params)?.matrix(omega)
}

/// Eigenvalues of the rotating-wave two-mode dynamical matrix.
///
/// Eigenvalues are sorted by imaginary part (most negative first). A mode's
/// frequency is `−Im λ`, its energy decay rate is `−2 Re λ`, and the splitting
/// is the absolute difference of the imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModes {
    pub eigenvalues: [Complex64; 2],
}

impl NormalModes {
    pub fn frequencies(&self) -> [f64; 2] {
        [-self.eigenvalues[0].im, -self.eigenvalues[1].im]
    }

    pub fn energy_decay_rates(&self) -> [f64; 2] {
        [-2.0 * self.eigenvalues[0].re, -2.0 * self.eigenvalues[1].re]
    }

    pub fn splitting(&self) -> f64 {
        (self.eigenvalues[0].im - self.eigenvalues[1].im).abs()
    }
}

/// Normal modes of the displaced cavity mode coupled to the mechanics with g = Ω_c/2.
/// Photothermal terms are ignored.
pub fn normal_mode_frequencies(params: &SystemParams) -> NormalModes {
    let g = params.omega_c() / 2.0;
    let a = Complex64::new(-params.kappa() / 2.0, params.detuning);
    let d = Complex64::new(-params.gamma_m / 2.0, -params.omega_m);
    let b = -I * g;
    let mean = (a + d) / 2.0;
    let half = (a - d) / 2.0;
    let root = (half * half + b * b).sqrt();
    let mut ev = [mean + root, mean - root];
    ev.sort_by(|x, y| x.im.total_cmp(&y.im));
    NormalModes { eigenvalues: ev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{hz, presets};
    use approx::assert_relative_eq;

    fn unit(c: Channel) -> InputVector {
        let mut v = [ZERO; N_CHANNELS];
        v[c.index()] = Complex64::new(1.0, 0.0);
        v
    }

    /// Cramer's rule on the same 3×3 system, built independently of LinearModel.
    fn cramer(a: [[Complex64; 3]; 3], b: [Complex64; 3]) -> [Complex64; 3] {
        let det3 = |m: [[Complex64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det3(a);
        let mut out = [ZERO; 3];
        for k in 0..3 {
            let mut m = a;
            for i in 0..3 {
                m[i][k] = b[i];
            }
            out[k] = det3(m) / d;
        }
        out
    }

    /// Literal transcription of the three equations with all inputs as one vector.
    fn brute_force(p: &SystemParams, om: f64, x: &InputVector) -> [Complex64; 3] {
        let a = p.abar();
        let k = p.kappa();
        let r = p.bs_ratio;
        let ptr = p.g_ptr * p.omega_m / om;
        let coupling = -2.0 * (p.g0 + I * p.g_pte * p.omega_m / om);
        // (−i(Δ+Ω)+κ/2)δa − ā g_ptr (Ω_m/Ω)(ā* δa + ā δa†) + i g0 ā δq = rhs0
        let m = [
            [
                -I * (p.detuning + om) + k / 2.0 - a * ptr * a.conj(),
                -a * ptr * a,
                I * p.g0 * a,
            ],
            [
                -a.conj() * (-ptr) * a.conj(),
                -I * (-p.detuning + om) + k / 2.0 - a.conj() * (-ptr) * a,
                -I * p.g0 * a.conj(),
            ],
            [
                -coupling * a.conj(),
                -coupling * a,
                (p.omega_m * p.omega_m - om * om - I * om * p.gamma_m) / p.omega_m,
            ],
        ];
        let s_in = (1.0 - r).sqrt() * x[0] - r.sqrt() * x[2];
        let s_in_dag = (1.0 - r).sqrt() * x[1] - r.sqrt() * x[3];
        let b = [
            -I * a * x[8] + p.kappa_ex.sqrt() * s_in + p.kappa_0.sqrt() * x[4],
            I * a.conj() * x[8] + p.kappa_ex.sqrt() * s_in_dag + p.kappa_0.sqrt() * x[5],
            x[9],
        ];
        cramer(m, b)
    }

    #[test]
    fn bare_mechanical_susceptibility() {
        let p = presets::cooling_run().decoupled();
        let om = hz(77.9e6);
        let s = solve_internal(&p, om, &unit(Channel::ThermalForce)).unwrap();
        let chi = p.omega_m / Complex64::new(p.omega_m.powi(2) - om * om, -om * p.gamma_m);
        assert_relative_eq!(s.delta_q.re, chi.re, max_relative = 1e-13);
        assert_relative_eq!(s.delta_q.im, chi.im, max_relative = 1e-13);
        assert_eq!(s.delta_a, ZERO);
        assert_eq!(s.delta_a_dag, ZERO);
    }

    #[test]
    fn bare_cavity_lorentzian() {
        let p = presets::cooling_run().decoupled();
        let om = hz(75.0e6);
        let s = solve_internal(&p, om, &unit(Channel::Laser)).unwrap();
        let expect = p.kappa_ex.sqrt() * (1.0 - p.bs_ratio).sqrt()
            / Complex64::new(p.kappa() / 2.0, -(p.detuning + om));
        assert_relative_eq!(s.delta_a.re, expect.re, max_relative = 1e-13);
        assert_relative_eq!(s.delta_a.im, expect.im, max_relative = 1e-13);
        assert_eq!(s.delta_q, ZERO);
    }

    #[test]
    fn sideband_cooling_suppresses_response() {
        let p = SystemParams {
            g_pte: 0.0,
            g_ptr: 0.0,
            ..presets::cooling_run()
        };
        let om = p.omega_m;
        let coupled = solve_internal(&p, om, &unit(Channel::ThermalForce)).unwrap();
        let bare = solve_internal(&p.decoupled(), om, &unit(Channel::ThermalForce)).unwrap();
        // On resonance the effective susceptibility is the bare one with Γ_m → Γ_m + Ω_c²/κ.
        let oc = p.omega_c();
        let factor = 1.0 / (1.0 + oc * oc / (p.kappa() * p.gamma_m));
        let ratio = coupled.delta_q.norm() / bare.delta_q.norm();
        assert!((ratio / factor - 1.0).abs() < 0.02, "ratio {ratio} factor {factor}");
    }

    #[test]
    fn agrees_with_cramer_solution() {
        let p = presets::cooling_run();
        let mut x = [ZERO; N_CHANNELS];
        for (j, v) in x.iter_mut().enumerate() {
            *v = Complex64::new(0.3 + j as f64, 1.0 - 0.2 * j as f64);
        }
        for f in [1.0e6, 40.0e6, 77.0e6, 78.226e6, 80.0e6, -78.0e6, 300.0e6] {
            let om = hz(f);
            let s = solve_internal(&p, om, &x).unwrap();
            let o = brute_force(&p, om, &x);
            for (got, want) in [s.delta_a, s.delta_a_dag, s.delta_q].iter().zip(o.iter()) {
                assert!((got - want).norm() <= 1e-12 * want.norm(), "{f}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_frequency_with_photothermal_is_domain_error() {
        let p = presets::cooling_run();
        assert!(matches!(
            solve_internal(&p, 0.0, &unit(Channel::Laser)),
            Err(Error::Domain(_))
        ));
        let plain = SystemParams {
            g_pte: 0.0,
            g_ptr: 0.0,
            ..p
        };
        assert!(solve_internal(&plain, 0.0, &unit(Channel::Laser)).is_ok());
    }

    #[test]
    fn uncoupled_port_leaves_no_homodyne_trace() {
        let p = SystemParams {
            kappa_ex: 0.0,
            eta_cryo: 1.0,
            ..presets::cooling_run()
        };
        for f in [10.0e6, 78.0e6, 150.0e6] {
            let m = transfer_matrix(&p, hz(f)).unwrap();
            for c in [Channel::Cavity, Channel::CavityDag, Channel::ThermalForce] {
                assert_eq!(m.h(c), ZERO, "{c:?}");
            }
        }
    }

    #[test]
    fn cryo_vacuum_never_moves_the_mechanics() {
        let p = SystemParams {
            eta_cryo: 0.4,
            ..presets::cooling_run()
        };
        for f in [-90.0e6, -1.0e6, 5.0e6, 78.226e6] {
            let m = transfer_matrix(&p, hz(f)).unwrap();
            assert_eq!(m.q(Channel::Cryo), ZERO);
            assert_eq!(m.q(Channel::CryoDag), ZERO);
        }
    }

    #[test]
    fn conjugation_symmetry_of_columns() {
        let p = SystemParams {
            eta_cryo: 0.7,
            phi_lo: 0.3,
            ..presets::cooling_run()
        };
        let model = LinearModel::new(&p).unwrap();
        for f in [3.0e6, 70.0e6, 78.3e6, 91.0e6] {
            let plus = model.matrix(hz(f)).unwrap();
            let minus = model.matrix(-hz(f)).unwrap();
            for c in Channel::ALL {
                let pc = c.partner();
                for row in 0..2 {
                    let a = minus.m[(row, pc.index())];
                    let b = plus.m[(row, c.index())].conj();
                    assert!((a - b).norm() <= 1e-12 * (b.norm() + 1e-300), "{row} {c:?}");
                }
            }
        }
    }

    #[test]
    fn dc_is_nulled_at_default_phase() {
        let p = presets::cooling_run();
        let mf = MeanFields::new(&p);
        assert!(mf.dc_signal().abs() < 1e-12 * mf.shot_noise_level());
    }

    #[test]
    fn normal_modes_decoupled() {
        let p = presets::cooling_run().decoupled();
        let nm = normal_mode_frequencies(&p);
        let cav = Complex64::new(-p.kappa() / 2.0, p.detuning);
        let mech = Complex64::new(-p.gamma_m / 2.0, -p.omega_m);
        let has = |z: Complex64| nm.eigenvalues.iter().any(|e| (e - z).norm() < 1e-6);
        assert!(has(cav) && has(mech));
    }

    #[test]
    fn normal_mode_splitting_closed_form() {
        let p = presets::strong_coupling_run();
        let nm = normal_mode_frequencies(&p);
        let oc = hz(11.4e6);
        let k = hz(7.1e6);
        let expect = (oc * oc - (k - p.gamma_m).powi(2) / 4.0).sqrt();
        assert_relative_eq!(nm.splitting(), expect, max_relative = 1e-9);
        assert!((nm.splitting() / hz(1e6) - 10.83).abs() < 0.01);
        for rate in nm.energy_decay_rates() {
            assert_relative_eq!(rate, (k + p.gamma_m) / 2.0, max_relative = 1e-9);
        }
        let strong = p.with_coupling_rate(hz(500e6));
        let nm = normal_mode_frequencies(&strong);
        assert!((nm.splitting() / hz(500e6) - 1.0).abs() < 1e-3);
    }
}
