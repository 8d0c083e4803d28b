use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_pieces, uniform_breaks};
use crate::numerics::{GridSpec, QuadratureConfig, GAUSSIAN_CUTOFF};
use crate::phase_space::wigner::check_resolution;
use crate::phase_space::{ApparatusWindow1D, FieldKind, PhaseSpaceField};
use crate::state::{GaussianPacket, PhysicalConstants, State};

/// Range of `x'` where both the window `φ(μX - x')` and `ψ(x', t)` are non-negligible.
fn overlap_range(state: &State, window: &ApparatusWindow1D, mu_x: f64, t: f64) -> Option<(f64, f64)> {
    let (lo, hi) = state.position_support(t);
    let c = mu_x - window.center;
    let r = GAUSSIAN_CUTOFF * window.sigma;
    let (a, b) = ((c - r).max(lo), (c + r).min(hi));
    (a < b).then_some((a, b))
}

/// `ρ(μX,μP) = (1/h) |∫dx' φ*(μX - x') ψ(x',t) e^{-iμP x'/ħ}|²` at one point.
pub fn spectrogram_point(
    state: &State,
    window: &ApparatusWindow1D,
    mu_x: f64,
    mu_p: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let c = state.constants();
    let Some((a, b)) = overlap_range(state, window, mu_x, t) else {
        return Ok(0.0);
    };
    let amp = integrate_pieces(
        |x: f64| state.psi_x(x, t) * window.phi(mu_x - x) * Complex64::from_polar(1.0, -mu_p * x / c.hbar),
        &uniform_breaks(a, b, 8),
        cfg,
    )?;
    Ok(amp.value.norm_sqr() / c.h())
}

/// Spectrogram on a grid (trapezoid rule in `x'` on a band-limit-adapted spacing).
pub fn spectrogram(
    state: &State,
    window: &ApparatusWindow1D,
    t: f64,
    x_grid: &GridSpec,
    p_grid: &GridSpec,
) -> Result<PhaseSpaceField> {
    check_resolution(state, t, x_grid, p_grid, window.sigma)?;
    let c = state.constants();
    let (pl, ph) = state.momentum_support();
    let omega = (pl.abs().max(ph.abs()) + p_grid.min.abs().max(p_grid.max.abs())) / c.hbar;
    let w = window.sigma.min(state.min_position_width(t));
    let dx = 2.0 * PI / (omega + 12.0 / w);
    let ps = p_grid.points();
    let rows: Vec<Vec<Complex64>> = x_grid
        .points()
        .par_iter()
        .map(|&mu_x| {
            let mut row = vec![Complex64::new(0.0, 0.0); ps.len()];
            let Some((a, b)) = overlap_range(state, window, mu_x, t) else {
                return row;
            };
            let n = ((b - a) / dx).ceil() as usize + 1;
            let h = (b - a) / (n - 1) as f64;
            let g: Vec<(f64, Complex64)> = (0..n)
                .map(|j| {
                    let x = a + j as f64 * h;
                    let wgt = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    (x, state.psi_x(x, t) * window.phi(mu_x - x) * wgt)
                })
                .collect();
            for (r, &p) in row.iter_mut().zip(&ps) {
                let s: Complex64 = g.iter().map(|&(x, v)| v * Complex64::from_polar(1.0, -p * x / c.hbar)).sum();
                *r = Complex64::new((s * h).norm_sqr() / c.h(), 0.0);
            }
            row
        })
        .collect();
    Ok(PhaseSpaceField {
        x_grid: *x_grid,
        p_grid: *p_grid,
        values: rows.into_iter().flatten().collect(),
        kind: FieldKind::Spectrogram,
        t,
    })
}

/// Parameters of the Gaussian packet / Gaussian window pair with a closed-form readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AkParams {
    pub x0: f64,
    pub k0: f64,
    pub delta: f64,
    pub sigma: f64,
    pub constants: PhysicalConstants,
}

impl AkParams {
    /// Atomic-unit parameters.
    pub fn new(x0: f64, k0: f64, delta: f64, sigma: f64) -> Result<Self> {
        Self::from_parts(&GaussianPacket::new(x0, k0, delta)?, &ApparatusWindow1D::unbiased(sigma)?)
    }

    /// Requires a centred window.
    pub fn from_parts(packet: &GaussianPacket, window: &ApparatusWindow1D) -> Result<Self> {
        if window.center != 0.0 {
            return Err(Error::Unsupported("closed forms assume a centred window".into()));
        }
        Ok(AkParams {
            x0: packet.x0,
            k0: packet.k0,
            delta: packet.delta,
            sigma: window.sigma,
            constants: packet.constants,
        })
    }

    pub fn packet(&self) -> GaussianPacket {
        GaussianPacket {
            x0: self.x0,
            k0: self.k0,
            delta: self.delta,
            constants: self.constants,
        }
    }

    pub fn window(&self) -> ApparatusWindow1D {
        ApparatusWindow1D {
            sigma: self.sigma,
            center: 0.0,
        }
    }

    /// `4t²ħ²/m² + (δ² + σ²)²`
    pub(crate) fn spread(&self, t: f64) -> f64 {
        let v = 2.0 * t * self.constants.hbar / self.constants.mass;
        let s = self.delta * self.delta + self.sigma * self.sigma;
        v * v + s * s
    }
}

/// Closed-form readout density for a Gaussian packet measured with a centred
/// Gaussian window:
/// `ρ = σδ/(πħ√D) exp(-δ²σ²(δ²+σ²)(μP-ħk0)²/(2ħ²D)) exp(-2[δ²(x0+ħk0t/m-μX)² + σ²(x0+μPt/m-μX)²]/D)`
/// with `D = 4t²ħ²/m² + (δ²+σ²)²`.
pub fn ak_closed_form(params: &AkParams, t: f64, mu_x: f64, mu_p: f64) -> f64 {
    let AkParams { x0, k0, delta, sigma, constants } = *params;
    let (hbar, m) = (constants.hbar, constants.mass);
    let (d2, s2) = (delta * delta, sigma * sigma);
    let big_d = params.spread(t);
    let dp = mu_p - hbar * k0;
    let a = x0 + hbar * k0 * t / m - mu_x;
    let b = x0 + mu_p * t / m - mu_x;
    let e1 = -d2 * s2 * (d2 + s2) * dp * dp / (2.0 * hbar * hbar * big_d);
    let e2 = -2.0 * (d2 * a * a + s2 * b * b) / big_d;
    sigma * delta / (PI * hbar * big_d.sqrt()) * (e1 + e2).exp()
}

pub fn ak_closed_form_field(params: &AkParams, t: f64, x_grid: &GridSpec, p_grid: &GridSpec) -> Result<PhaseSpaceField> {
    x_grid.validate("x_grid")?;
    p_grid.validate("p_grid")?;
    let ps = p_grid.points();
    let values = x_grid
        .points()
        .iter()
        .flat_map(|&x| ps.iter().map(move |&p| Complex64::new(ak_closed_form(params, t, x, p), 0.0)))
        .collect();
    Ok(PhaseSpaceField {
        x_grid: *x_grid,
        p_grid: *p_grid,
        values,
        kind: FieldKind::AkClosedForm,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::trapezoid;

    fn fig1() -> AkParams {
        AkParams::new(-2.5, 10.0, 0.1, 0.1).unwrap()
    }

    #[test]
    fn closed_form_matches_direct_transform_at_the_mean() {
        let p = fig1();
        let s = State::Gaussian(p.packet());
        let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-12);
        for (t, mx, mp) in [(0.0, -2.5, 10.0), (0.0, -2.45, 12.0), (-0.2, -4.4, 9.0), (0.3, 0.7, 11.0)] {
            let direct = spectrogram_point(&s, &p.window(), mx, mp, t, &cfg).unwrap();
            let closed = ak_closed_form(&p, t, mx, mp);
            assert!((direct - closed).abs() < 1e-8, "t={t}: {direct} vs {closed}");
        }
    }

    #[test]
    fn closed_form_holds_for_general_units() {
        let c = PhysicalConstants::new(0.6, 2.3).unwrap();
        let packet = GaussianPacket::with_constants(0.4, -1.5, 0.8, c).unwrap();
        let w = ApparatusWindow1D::unbiased(0.5).unwrap();
        let p = AkParams::from_parts(&packet, &w).unwrap();
        let s = State::Gaussian(packet);
        let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-12);
        for (t, mx, mp) in [(0.0, 0.4, -0.9), (0.7, -0.3, -1.2), (-1.1, 1.5, 0.1)] {
            let direct = spectrogram_point(&s, &w, mx, mp, t, &cfg).unwrap();
            assert!((direct - ak_closed_form(&p, t, mx, mp)).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_spectrogram_matches_closed_form_and_is_normalized() {
        let p = fig1();
        let s = State::Gaussian(p.packet());
        let xg = GridSpec::centered(-2.5, 0.6, 121).unwrap();
        let pg = GridSpec::centered(10.0, 130.0, 521).unwrap();
        let f = spectrogram(&s, &p.window(), 0.0, &xg, &pg).unwrap();
        let g = ak_closed_form_field(&p, 0.0, &xg, &pg).unwrap();
        let worst = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
        assert!(f.min_real() >= 0.0);
        assert!((f.total_mass() - 1.0).abs() < 1e-6);
        assert!((g.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pointer_mean_tracks_particle_and_marginal_is_broadened() {
        let p = AkParams::new(0.3, 1.0, 0.1, 0.1).unwrap();
        let t = 0.05;
        let xg = GridSpec::centered(0.35, 4.0, 801).unwrap();
        let pg = GridSpec::centered(1.0, 130.0, 521).unwrap();
        let f = ak_closed_form_field(&p, t, &xg, &pg).unwrap();
        let mx = f.marginal_x();
        let xs = xg.points();
        let mean = trapezoid(&xs.iter().zip(&mx).map(|(x, v)| x * v).collect::<Vec<_>>(), xg.spacing());
        assert!((mean - (0.3 + 1.0 * t)).abs() < 1e-8);
        let var_pointer = trapezoid(&xs.iter().zip(&mx).map(|(x, v)| (x - mean).powi(2) * v).collect::<Vec<_>>(), xg.spacing());
        let packet = p.packet();
        let var_particle = packet.position_envelope(t).1.powi(2) / 4.0;
        assert!(var_pointer > var_particle + 0.01 * p.sigma * p.sigma);
    }

    #[test]
    fn parity_and_wide_window_limit() {
        let p = fig1();
        let q = AkParams::new(2.5, -10.0, 0.1, 0.1).unwrap();
        for (t, mx, mp) in [(0.1, -1.0, 8.0), (-0.2, -4.0, 11.0)] {
            let a = ak_closed_form(&p, t, mx, mp);
            let b = ak_closed_form(&q, t, -mx, -mp);
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
        }
        // peak value falls off like 1/σ for very wide windows
        let peak = |sigma: f64| {
            let p = AkParams::new(-2.5, 10.0, 0.1, sigma).unwrap();
            ak_closed_form(&p, 0.0, -2.5, 10.0)
        };
        let r = peak(1e3) / peak(2e3);
        assert!((r - 2.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn spectrogram_is_wigner_convolved_with_window_wigner() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-12);
        for _ in 0..5 {
            let s = State::gaussian(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.6..1.4)).unwrap();
            let w = ApparatusWindow1D::new(rng.gen_range(0.6..1.4), rng.gen_range(-0.3..0.3)).unwrap();
            let t = 0.3;
            let (xg, pg) = crate::phase_space::default_grids(&s, t).unwrap();
            let wig = crate::phase_space::wigner(&s, t, &xg, &pg).unwrap();
            let (xs, ps) = (xg.points(), pg.points());
            let (mx, mp) = (xs[256] + 0.2, ps[256] - 0.3);
            let rows: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let row: Vec<f64> = ps.iter().enumerate().map(|(j, &p)| wig.value(i, j).re * w.wigner(mx - x, mp - p, 1.0)).collect();
                    trapezoid(&row, pg.spacing())
                })
                .collect();
            let conv = trapezoid(&rows, xg.spacing());
            let direct = spectrogram_point(&s, &w, mx, mp, t, &cfg).unwrap();
            assert!((conv - direct).abs() < 1e-6, "{conv} vs {direct}");
        }
    }
}
