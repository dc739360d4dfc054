//! Fourier-frequency grids.
//!
//! Grids never contain Ω = 0: symmetric grids are offset by half a bin.

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::response::normal_mode_frequencies;

/// Default number of points of a symmetric spectral grid.
pub const DEFAULT_POINTS: usize = 1 << 14;

/// Half-width of the default band around Ω_m, in units of `max(κ, Ω_c, 100Γ_m)`.
pub const DEFAULT_SPAN: f64 = 40.0;

/// Uniform grid over `[lo, hi]` (both > 0) with `n` points.
pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(Error::Domain(format!("bad grid [{lo}, {hi}] with {n} points")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| lo + step * k as f64).collect())
}

/// Mirrors a strictly increasing positive grid to negative frequencies.
pub fn mirrored(positive: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = positive.iter().rev().map(|x| -x).collect();
    out.extend_from_slice(positive);
    out
}

/// Symmetric uniform grid with `n` points (even) spanning
/// `Ω_m ± 40·max(κ, Ω_c, 100Γ_m)` on the positive side and its mirror image.
pub fn default_symmetric(params: &SystemParams, n: usize) -> Vec<f64> {
    let width = DEFAULT_SPAN * params.kappa().max(params.omega_c()).max(100.0 * params.gamma_m);
    let hi = params.omega_m + width;
    let lo = params.omega_m - width;
    let half = (n / 2).max(1);
    let positive: Vec<f64> = if lo <= 0.0 {
        let h = hi / half as f64;
        (0..half).map(|k| (k as f64 + 0.5) * h).collect()
    } else {
        let h = (hi - lo) / half as f64;
        (0..half).map(|k| lo + (k as f64 + 0.5) * h).collect()
    };
    mirrored(&positive)
}

/// Symmetric non-uniform grid resolving every spectral feature of `params`.
///
/// Spacing is `resolution` of the narrowest normal-mode linewidth near the mechanical,
/// optical, and normal-mode frequencies and grows geometrically (ratio
/// `1 + growth`) away from them, out to `reach`·(Ω_m + |Δ̄| + κ).
pub fn resolved_symmetric(params: &SystemParams) -> Vec<f64> {
    resolved_symmetric_with(params, 1.0 / 12.0, 0.01, 2.0e3)
}

pub fn resolved_symmetric_with(params: &SystemParams, resolution: f64, growth: f64, reach: f64) -> Vec<f64> {
    let nm = normal_mode_frequencies(params);
    let mut centers = vec![params.omega_m, params.detuning.abs()];
    centers.extend(nm.frequencies().iter().map(|f| f.abs()));
    let kappa = params.kappa();
    // The normal-mode rates already include Γ_m and the optical damping.
    let widths = [kappa, nm.energy_decay_rates()[0], nm.energy_decay_rates()[1]];
    let narrowest = widths.iter().cloned().filter(|w| *w > 0.0).fold(f64::INFINITY, f64::min);
    let h_min = narrowest * resolution;
    let top = reach * (params.omega_m + params.detuning.abs() + kappa);
    let h_max = growth * top;
    let spacing = |x: f64| {
        let d = centers.iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
        (growth * d).clamp(h_min, h_max)
    };
    let mut positive = Vec::new();
    let mut x = 0.5 * spacing(0.0);
    while x < top {
        positive.push(x);
        // Midpoint rule for the step keeps the spacing smooth across centers.
        let s = spacing(x);
        let s2 = spacing(x + 0.5 * s);
        x += s.min(s2);
    }
    mirrored(&positive)
}

/// Checks that a grid is strictly increasing, finite, and excludes zero.
pub fn check(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty frequency grid".into()));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
    }
    if grid.iter().any(|x| !x.is_finite() || *x == 0.0) {
        return Err(Error::Domain("grid must be finite and exclude 0".into()));
    }
    Ok(())
}

/// Trapezoidal integral of `values` over `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::presets;

    #[test]
    fn default_grid_is_symmetric_and_excludes_zero() {
        let g = default_symmetric(&presets::cooling_run(), DEFAULT_POINTS);
        assert_eq!(g.len(), DEFAULT_POINTS);
        check(&g).unwrap();
        for k in 0..g.len() {
            assert_eq!(g[k], -g[g.len() - 1 - k]);
        }
    }

    #[test]
    fn resolved_grid_is_fine_near_resonance() {
        let p = presets::cooling_run();
        let g = resolved_symmetric(&p);
        check(&g).unwrap();
        let near = g
            .windows(2)
            .filter(|w| (w[0] - p.omega_m).abs() < p.kappa())
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let narrowest = crate::response::normal_mode_frequencies(&p)
            .energy_decay_rates()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(near <= narrowest / 10.0);
        assert!(g.len() < 200_000, "{}", g.len());
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let g = uniform(1.0, 3.0, 11).unwrap();
        let v: Vec<f64> = g.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&g, &v) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(check(&[1.0, 1.0]).is_err());
        assert!(check(&[-1.0, 0.0, 1.0]).is_err());
        assert!(uniform(2.0, 1.0, 10).is_err());
    }
}
