//! Steady-state covariance of `(δa, δa†, δq, δp)` from the continuous-time
//! Lyapunov equation `A V + V Aᵀ + D = 0`.
//!
//! Used as an independent check of the spectral integration in
//! [`crate::spectra::occupancy`]. Photothermal terms are not representable
//! here (their 1/Ω kernels have no finite-dimensional state) and are rejected.

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::SystemParams;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Symmetrized steady-state covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub v: Matrix4<Complex64>,
}

impl SteadyState {
    pub fn q_variance(&self) -> f64 {
        self.v[(2, 2)].re
    }

    pub fn p_variance(&self) -> f64 {
        self.v[(3, 3)].re
    }

    /// `(⟨δq²⟩ + ⟨δp²⟩)/4 − ½`.
    pub fn occupancy(&self) -> f64 {
        (self.q_variance() + self.p_variance()) / 4.0 - 0.5
    }
}

/// Drift matrix of the linearized dynamics.
pub fn drift_matrix(params: &SystemParams) -> Matrix4<Complex64> {
    let a = params.abar();
    let k2 = params.kappa() / 2.0;
    let g = params.g0;
    let c = |x: f64| Complex64::new(x, 0.0);
    let zero = c(0.0);
    Matrix4::new(
        Complex64::new(-k2, params.detuning),
        zero,
        -I * g * a,
        zero,
        zero,
        Complex64::new(-k2, -params.detuning),
        I * g * a.conj(),
        zero,
        zero,
        zero,
        zero,
        c(params.omega_m),
        -2.0 * g * a.conj(),
        -2.0 * g * a,
        c(-params.omega_m),
        c(-params.gamma_m),
    )
}

/// Solves for the steady state with thermal force PSD `force_psd`.
pub fn steady_state(params: &SystemParams, force_psd: f64) -> Result<SteadyState> {
    params.validate()?;
    if params.has_photothermal() {
        return Err(Error::Domain(
            "the Lyapunov oracle requires g_pte = g_ptr = 0".into(),
        ));
    }
    let a = drift_matrix(params);
    let eig = a
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Consistency("Schur form did not converge".into()))?;
    if eig.iter().any(|l| l.re >= 0.0) {
        return Err(Error::Domain("dynamics are not stable (drift matrix not Hurwitz)".into()));
    }
    let mut d = Matrix4::<Complex64>::zeros();
    let half_kappa = Complex64::new(params.kappa() / 2.0, 0.0);
    d[(0, 1)] = half_kappa;
    d[(1, 0)] = half_kappa;
    d[(3, 3)] = Complex64::new(force_psd, 0.0);

    // (I ⊗ A + A ⊗ I) vec(V) = −vec(D), column-major vec.
    let mut big = SMatrix::<Complex64, 16, 16>::zeros();
    let mut rhs = SVector::<Complex64, 16>::zeros();
    for col in 0..4 {
        for row in 0..4 {
            let r = col * 4 + row;
            rhs[r] = -d[(row, col)];
            for k in 0..4 {
                big[(r, col * 4 + k)] += a[(row, k)];
                big[(r, k * 4 + row)] += a[(col, k)];
            }
        }
    }
    let x = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Consistency("singular Lyapunov operator".into()))?;
    let v = Matrix4::from_fn(|row, col| x[col * 4 + row]);
    Ok(SteadyState { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::presets;
    use approx::assert_relative_eq;

    #[test]
    fn free_oscillator_equipartition() {
        let p = presets::cooling_run().decoupled();
        let force = 4.0 * (p.nbar_bath + 0.5) * p.gamma_m;
        let s = steady_state(&p, force).unwrap();
        assert_relative_eq!(s.q_variance(), 2.0 * p.nbar_bath + 1.0, max_relative = 1e-9);
        assert_relative_eq!(s.occupancy(), p.nbar_bath, max_relative = 1e-9);
    }

    #[test]
    fn vacuum_cavity_is_half() {
        let p = presets::cooling_run().decoupled();
        let s = steady_state(&p, 0.0).unwrap();
        assert_relative_eq!(s.v[(0, 1)].re, 0.5, max_relative = 1e-12);
        assert!(s.v[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn cooling_lowers_occupancy() {
        let p = SystemParams {
            g_pte: 0.0,
            g_ptr: 0.0,
            ..presets::cooling_run()
        };
        let force = 4.0 * p.nbar_bath * p.gamma_m;
        let s = steady_state(&p, force).unwrap();
        let n = s.occupancy();
        assert!(n > 0.5 && n < 3.0, "{n}");
    }

    #[test]
    fn rejects_photothermal() {
        assert!(steady_state(&presets::cooling_run(), 0.0).is_err());
    }
}
