//! Coherent homodyne response to a weak phase modulation of the laser.
//!
//! A modulation δφ enters as `δs_las = i s̄_las δφ` and, by the conjugation
//! rule, `δs_las† = −i s̄_las* δφ`; every other input is zero.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid;
use crate::params::SystemParams;
use crate::response::{Channel, LinearModel};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Complex homodyne response per unit δφ on a modulation-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentTrace {
    pub grid: Vec<f64>,
    pub response: Vec<Complex64>,
}

impl CoherentTrace {
    pub fn new(grid: Vec<f64>, response: Vec<Complex64>) -> Result<CoherentTrace> {
        grid::check(&grid)?;
        if grid.len() != response.len() {
            return Err(Error::Shape(format!(
                "grid has {} points but response has {}",
                grid.len(),
                response.len()
            )));
        }
        if response.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("coherent response must be finite".into()));
        }
        Ok(CoherentTrace { grid, response })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.response.iter().map(|z| z.norm()).collect()
    }

    /// Copy scaled so that the largest magnitude is 1.
    pub fn max_normalized(&self) -> CoherentTrace {
        let peak = self.response.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let s = if peak > 0.0 { 1.0 / peak } else { 0.0 };
        CoherentTrace {
            grid: self.grid.clone(),
            response: self.response.iter().map(|z| z * s).collect(),
        }
    }
}

/// Homodyne and mechanical responses `(δh/δφ, δq/δφ)` at one modulation frequency.
pub fn response_pair(model: &LinearModel, omega: f64) -> Result<(Complex64, Complex64)> {
    let m = model.matrix(omega)?;
    let s = model.mean_fields().s_las;
    let up = I * s;
    let down = -I * s.conj();
    Ok((
        m.h(Channel::Laser) * up + m.h(Channel::LaserDag) * down,
        m.q(Channel::Laser) * up + m.q(Channel::LaserDag) * down,
    ))
}

/// Homodyne response `δh/δφ` at one modulation frequency.
pub fn response_at(model: &LinearModel, omega: f64) -> Result<Complex64> {
    response_pair(model, omega).map(|p| p.0)
}

pub fn coherent_response(params: &SystemParams, grid_pts: &[f64]) -> Result<CoherentTrace> {
    grid::check(grid_pts)?;
    let model = LinearModel::new(params)?;
    let response: Result<Vec<Complex64>> = grid_pts.par_iter().map(|&w| response_at(&model, w)).collect();
    CoherentTrace::new(grid_pts.to_vec(), response?)
}

/// Closed-form dip width and whether the weak-coupling formula applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipWidth {
    pub width: f64,
    /// Set when Ω_c > κ/2, where the dip turns into a normal-mode splitting.
    pub beyond_weak_coupling: bool,
}

/// `Γ_m + Ω_c²κ/(κ² + 4(Δ+Ω_m)²)`.
pub fn omit_dip_width(params: &SystemParams) -> DipWidth {
    let k = params.kappa();
    let oc = params.omega_c();
    let d = params.detuning + params.omega_m;
    DipWidth {
        width: params.gamma_m + oc * oc * k / (k * k + 4.0 * d * d),
        beyond_weak_coupling: oc > k / 2.0,
    }
}

/// Full width at half depth of the transparency dip in `|response|²`.
///
/// The dip is located as the minimum within `±10·approx_width` of `center`.
/// A smooth background is removed by fitting a quadratic to `1/|response|²`
/// over the outer part of that window (`|δ| ≥ 6·approx_width`), and the
/// width is read off the normalized dip at the level halfway between its
/// floor and 1.
pub fn measure_dip_width(trace: &CoherentTrace, center: f64, approx_width: f64) -> Result<f64> {
    if !(approx_width > 0.0) {
        return Err(Error::Domain("approximate width must be positive".into()));
    }
    let half = 10.0 * approx_width;
    let power: Vec<f64> = trace.response.iter().map(|z| z.norm_sqr()).collect();
    let idx: Vec<usize> = (0..trace.grid.len())
        .filter(|&k| (trace.grid[k] - center).abs() <= half)
        .collect();
    if idx.len() < 20 {
        return Err(Error::Domain("too few grid points across the dip window".into()));
    }
    let kmin = *idx
        .iter()
        .min_by(|a, b| power[**a].total_cmp(&power[**b]))
        .unwrap();
    let x0 = trace.grid[kmin];
    let window: Vec<usize> = (0..trace.grid.len())
        .filter(|&k| (trace.grid[k] - x0).abs() <= half)
        .collect();
    let outer: Vec<usize> = window
        .iter()
        .copied()
        .filter(|&k| (trace.grid[k] - x0).abs() >= 0.6 * half)
        .collect();
    if outer.len() < 6 {
        return Err(Error::Domain("too few background points around the dip".into()));
    }
    let xs: Vec<f64> = outer.iter().map(|&k| (trace.grid[k] - x0) / half).collect();
    let ys: Vec<f64> = outer.iter().map(|&k| 1.0 / power[k]).collect();
    let coef = quadratic_fit(&xs, &ys)?;
    let norm = |k: usize| {
        let x = (trace.grid[k] - x0) / half;
        power[k] * (coef[0] + coef[1] * x + coef[2] * x * x)
    };
    let floor = norm(kmin);
    let level = 0.5 * (1.0 + floor);
    let pos = window.iter().position(|&k| k == kmin).unwrap();
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = kmin;
        for k in range {
            if norm(k) >= level {
                let (ya, yb) = (norm(prev), norm(k));
                let (xa, xb) = (trace.grid[prev], trace.grid[k]);
                return Some(xa + (level - ya) * (xb - xa) / (yb - ya));
            }
            prev = k;
        }
        None
    };
    let right = crossing(&mut window[pos + 1..].iter().copied());
    let left = crossing(&mut window[..pos].iter().rev().copied());
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Domain("dip does not recover to half depth inside the window".into())),
    }
}

/// Least-squares `y ≈ c0 + c1 x + c2 x²`.
fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (x, y) in xs.iter().zip(ys) {
        let row = [1.0, *x, x * x];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[(i, j)] += row[i] * row[j];
            }
        }
    }
    let c = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::Consistency("singular background fit".into()))?;
    Ok([c[0], c[1], c[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{hz, presets};
    use approx::assert_relative_eq;

    #[test]
    fn bare_cavity_lorentzian_response() {
        let p = presets::cooling_run().decoupled();
        let g = crate::grid::uniform(hz(60e6), hz(96e6), 36001).unwrap();
        let t = coherent_response(&p, &g).unwrap();
        let pw: Vec<f64> = t.response.iter().map(|z| z.norm_sqr()).collect();
        let k = (0..pw.len()).max_by(|a, b| pw[*a].total_cmp(&pw[*b])).unwrap();
        // The far-detuned image sideband pulls the peak by about 1% of κ.
        assert!((g[k] - p.detuning.abs()).abs() < p.kappa() / 50.0);
        let left = (0..k).rev().find(|&i| pw[i] < pw[k] / 2.0).unwrap();
        let right = (k..pw.len()).find(|&i| pw[i] < pw[k] / 2.0).unwrap();
        assert!(((g[right] - g[left]) / p.kappa() - 1.0).abs() < 0.01);
    }

    #[test]
    fn linear_in_laser_amplitude() {
        let p = presets::cooling_run();
        let q = SystemParams {
            s_lo_amp: 3.0 * p.s_lo_amp,
            ..p
        };
        let g = [hz(70e6), hz(78.2e6), hz(80e6)];
        let a = coherent_response(&p, &g).unwrap();
        let b = coherent_response(&q, &g).unwrap();
        // δh scales with s̄_las through the drive and with the mean fields in the
        // detection chain, so it scales with the square of the amplitude.
        for (x, y) in a.response.iter().zip(&b.response) {
            assert_relative_eq!((y / x).re, 9.0, max_relative = 1e-12);
            assert!((y / x).im.abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_width_cases() {
        let p = presets::cooling_run();
        assert_eq!(omit_dip_width(&p.decoupled()).width, p.gamma_m);
        let oc = p.omega_c();
        let k = p.kappa();
        assert_relative_eq!(omit_dip_width(&p).width, p.gamma_m + oc * oc / k, max_relative = 1e-14);
        let off = p.with_detuning(-p.omega_m - k / 2.0);
        let oc = off.omega_c();
        assert_relative_eq!(
            omit_dip_width(&off).width,
            off.gamma_m + oc * oc / (2.0 * k),
            max_relative = 1e-14
        );
        assert!(omit_dip_width(&presets::strong_coupling_run()).beyond_weak_coupling);
    }

    #[test]
    fn cooling_point_dip_width_scale() {
        let p = presets::cooling_run();
        let oc = hz(3.7e6);
        assert!((oc * oc / p.kappa() / hz(1e6) - 2.27).abs() < 0.01);
    }

    #[test]
    fn weak_coupling_dip_width_matches_closed_form() {
        let p = SystemParams {
            g_pte: 0.0,
            g_ptr: 0.0,
            ..presets::cooling_run()
        }
        .with_coupling_rate(hz(0.5e6));
        let w = omit_dip_width(&p);
        let g = crate::grid::uniform(p.omega_m - 12.0 * w.width, p.omega_m + 12.0 * w.width, 4801).unwrap();
        let t = coherent_response(&p, &g).unwrap();
        let measured = measure_dip_width(&t, p.omega_m, w.width).unwrap();
        assert!((measured / w.width - 1.0).abs() < 0.05, "{} vs {}", measured, w.width);
    }

    #[test]
    fn photothermorefractive_raises_cavity_peak() {
        for d in [-30e6, -40e6, -50e6, -60e6, -70e6, -78.226e6] {
            let with = presets::cooling_run().with_detuning(hz(d));
            let without = SystemParams { g_ptr: 0.0, ..with };
            let g = crate::grid::uniform(hz(-d) - 2.0 * with.kappa(), hz(-d) + 2.0 * with.kappa(), 201).unwrap();
            let peak = |p: &SystemParams| coherent_response(p, &g).unwrap().magnitudes().into_iter().fold(0.0, f64::max);
            assert!(peak(&with) > peak(&without), "{d}");
        }
    }

    #[test]
    fn photothermorefractive_suppresses_slow_modulation() {
        let with = presets::cooling_run().with_detuning(-hz(3e6));
        let without = SystemParams { g_ptr: 0.0, ..with };
        let a = response_at(&LinearModel::new(&with).unwrap(), hz(0.2e6)).unwrap().norm();
        let b = response_at(&LinearModel::new(&without).unwrap(), hz(0.2e6)).unwrap().norm();
        assert!(a < 0.1 * b);
    }
}
