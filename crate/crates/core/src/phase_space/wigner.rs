use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_pieces, uniform_breaks};
use crate::numerics::{GridSpec, QuadratureConfig};
use crate::phase_space::{FieldKind, PhaseSpaceField};
use crate::state::State;

/// `w(x,p) = (1/h) ∫dy e^{ipy/ħ} ψ(x - y/2) ψ*(x + y/2)` at a single point.
pub fn wigner_point(state: &State, x: f64, p: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let c = state.constants();
    let (lo, hi) = state.position_support(t);
    if x <= lo || x >= hi {
        return Ok(0.0);
    }
    let ymax = 2.0 * (x - lo).min(hi - x);
    let v = integrate_pieces(
        |y: f64| state.psi_x(x - y / 2.0, t) * state.psi_x(x + y / 2.0, t).conj() * Complex64::from_polar(1.0, p * y / c.hbar),
        &uniform_breaks(-ymax, ymax, 8),
        cfg,
    )?;
    Ok(v.value.re / c.h())
}

/// Rejects output grids whose spacing exceeds the narrowest feature of the field
/// (trapezoid marginals on such grids would be off by more than ~1e-4).
pub(crate) fn check_resolution(state: &State, t: f64, x_grid: &GridSpec, p_grid: &GridSpec, smoothing_sigma: f64) -> Result<()> {
    x_grid.validate("x_grid")?;
    p_grid.validate("p_grid")?;
    let c = state.constants();
    let d = (state.min_delta().powi(2) + smoothing_sigma.powi(2)).sqrt();
    let fx = d / std::f64::consts::SQRT_2;
    let v = c.hbar * t / c.mass;
    let fp = 1.0 / (2.0 * v * v / (c.hbar * c.hbar * d * d) + d * d / (2.0 * c.hbar * c.hbar)).sqrt();
    if x_grid.spacing() > fx {
        return Err(Error::GridTooCoarse(format!(
            "x spacing {:.3e} exceeds the field's feature width {fx:.3e}",
            x_grid.spacing()
        )));
    }
    if p_grid.spacing() > fp {
        return Err(Error::GridTooCoarse(format!(
            "p spacing {:.3e} exceeds the field's feature width {fp:.3e}",
            p_grid.spacing()
        )));
    }
    Ok(())
}

/// Wigner function of `ψ(t)` on a grid (trapezoid rule in `y`, exact up to
/// `1e-16`-level aliasing for the band-limited Gaussian integrands used here).
pub fn wigner(state: &State, t: f64, x_grid: &GridSpec, p_grid: &GridSpec) -> Result<PhaseSpaceField> {
    check_resolution(state, t, x_grid, p_grid, 0.0)?;
    let c = state.constants();
    let (lo, hi) = state.position_support(t);
    let (pl, ph) = state.momentum_support();
    let omega = (pl.abs().max(ph.abs()) + p_grid.min.abs().max(p_grid.max.abs())) / c.hbar;
    let wy = 2.0 * state.min_position_width(t);
    let dy = 2.0 * std::f64::consts::PI / (omega + 12.0 / wy);
    let ps = p_grid.points();
    let rows: Vec<Vec<Complex64>> = x_grid
        .points()
        .par_iter()
        .map(|&x| {
            let mut row = vec![Complex64::new(0.0, 0.0); ps.len()];
            if x <= lo || x >= hi {
                return row;
            }
            let ymax = 2.0 * (x - lo).min(hi - x);
            let half = (ymax / dy).ceil() as i64;
            let f: Vec<(f64, Complex64)> = (-half..=half)
                .map(|j| {
                    let y = j as f64 * dy;
                    (y, state.psi_x(x - y / 2.0, t) * state.psi_x(x + y / 2.0, t).conj())
                })
                .collect();
            for (r, &p) in row.iter_mut().zip(&ps) {
                let s: Complex64 = f.iter().map(|&(y, v)| v * Complex64::from_polar(1.0, p * y / c.hbar)).sum();
                *r = Complex64::new(s.re * dy / c.h(), 0.0);
            }
            row
        })
        .collect();
    Ok(PhaseSpaceField {
        x_grid: *x_grid,
        p_grid: *p_grid,
        values: rows.into_iter().flatten().collect(),
        kind: FieldKind::Wigner,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::trapezoid;
    use crate::state::GaussianPacket;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_peak_value_and_positivity() {
        let s = State::gaussian(-2.5, 10.0, 0.1).unwrap();
        let v = wigner_point(&s, -2.5, 10.0, 0.0, &QuadratureConfig::default()).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-10);
        let xg = GridSpec::centered(-2.5, 0.4, 129).unwrap();
        let pg = GridSpec::centered(10.0, 80.0, 129).unwrap();
        let f = wigner(&s, 0.0, &xg, &pg).unwrap();
        assert!(f.min_real() >= -1e-10);
        assert!((f.value(64, 64).re - 1.0 / PI).abs() < 1e-10);
    }

    #[test]
    fn marginals_of_spreading_packet() {
        let s = State::gaussian(0.5, 2.0, 1.0).unwrap();
        let t = 0.6;
        let xg = GridSpec::centered(1.7, 8.0, 321).unwrap();
        let pg = GridSpec::centered(2.0, 8.0, 321).unwrap();
        let f = wigner(&s, t, &xg, &pg).unwrap();
        let mx = f.marginal_x();
        for (i, x) in xg.points().into_iter().enumerate().step_by(16) {
            assert!((mx[i] - s.psi_x(x, t).norm_sqr()).abs() < 1e-6, "x={x}");
        }
        let mp = f.marginal_p();
        for (i, p) in pg.points().into_iter().enumerate().step_by(16) {
            assert!((mp[i] - s.psi_p(p, t).norm_sqr()).abs() < 1e-6, "p={p}");
        }
        assert!((trapezoid(&mx, xg.spacing()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn separated_pair_has_negative_fringes() {
        let a = GaussianPacket::new(-2.0, 1.0, 0.5).unwrap();
        let b = GaussianPacket::new(2.0, 1.0, 0.5).unwrap();
        let s = State::superposition(vec![(Complex64::new(1.0, 0.0), a), (Complex64::new(1.0, 0.0), b)]).unwrap();
        // midpoint fringes oscillate like cos(4p/ħ + ...): some p gives a negative value
        let cfg = QuadratureConfig::default();
        let vals: Vec<f64> = (0..40).map(|i| wigner_point(&s, 0.0, 1.0 + 0.05 * i as f64, 0.0, &cfg).unwrap()).collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < -0.1, "{min}");
        let xg = GridSpec::centered(0.0, 4.0, 161).unwrap();
        let pg = GridSpec::centered(1.0, 12.0, 161).unwrap();
        assert!(wigner(&s, 0.0, &xg, &pg).unwrap().min_real() < -0.1);
    }

    #[test]
    fn coarse_grid_rejected() {
        let s = State::gaussian(-2.5, 10.0, 0.1).unwrap();
        let xg = GridSpec::centered(-2.5, 10.0, 11).unwrap();
        let pg = GridSpec::centered(10.0, 80.0, 129).unwrap();
        assert!(matches!(wigner(&s, 0.0, &xg, &pg), Err(Error::GridTooCoarse(_))));
    }
}
