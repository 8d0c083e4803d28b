//! Kijowski's arrival-time distribution at the origin, its smoothed
//! (von Neumann) measurement, and the check that no Cohen kernel quantizes
//! `δ(mx/p + T)` into it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_fallible, integrate_pieces, uniform_breaks};
use crate::numerics::{GridSpec, QuadratureConfig, SingularityHint, GAUSSIAN_CUTOFF};
use crate::phase_space::{delta_operator_element, ApparatusWindow1D, CohenKernel};
use crate::state::{energy_amplitude, PhysicalConstants, State};
use crate::toa::{ToaDistribution, ToaKind};

/// Eigenfunction `|T,α⟩` of the symmetrized arrival-time operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbEigenfunction {
    pub t_arrival: f64,
    /// `+1` or `-1`.
    pub alpha: i8,
}

impl AbEigenfunction {
    pub fn new(t_arrival: f64, alpha: i8) -> Result<Self> {
        if alpha != 1 && alpha != -1 {
            return Err(Error::invalid("alpha must be +1 or -1"));
        }
        Ok(AbEigenfunction { t_arrival, alpha })
    }

    /// `⟨p|T,α⟩ = (|p|/(mh))^{1/2} e^{ip²T/(2mħ)} Θ(αp)`.
    pub fn momentum_rep(&self, p: f64, c: &PhysicalConstants) -> Complex64 {
        if p * self.alpha as f64 <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mag = (p.abs() / (c.mass * c.h())).sqrt();
        Complex64::from_polar(mag, p * p * self.t_arrival / (2.0 * c.mass * c.hbar))
    }
}

fn tight() -> QuadratureConfig {
    QuadratureConfig::default().with_tol(1e-14, 1e-12)
}

/// `⟨T,α|ψ(t)⟩ = ∫dp ⟨T,α|p⟩ ψ̃(p,t)`, integrated in `u = √|p|` so the
/// `|p|^{1/2}` factor is smooth.
pub fn kijowski_amplitude(state: &State, eig: &AbEigenfunction, t: f64) -> Result<Complex64> {
    let c = state.constants();
    let (pl, ph) = state.momentum_support();
    let a = eig.alpha as f64;
    // range of |p| on the α side of the support
    let (lo, hi) = if a > 0.0 { (pl.max(0.0), ph) } else { ((-ph).max(0.0), -pl) };
    if lo >= hi {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let f = |u: f64| {
        let p = a * u * u;
        eig.momentum_rep(p, &c).conj() * state.psi_p(p, t) * (2.0 * u)
    };
    let phase = (eig.t_arrival.abs() + t.abs()) * (hi * hi - lo * lo) / (2.0 * c.mass * c.hbar);
    let pieces = 16 + (phase / (4.0 * std::f64::consts::PI)).ceil() as usize;
    let cfg = QuadratureConfig::default().with_tol(1e-12, 1e-11);
    Ok(integrate_pieces(f, &uniform_breaks(lo.sqrt(), hi.sqrt(), pieces), &cfg)?.value)
}

/// `Π_K(T;t) = Σ_α |⟨T,α|ψ(t)⟩|²`.
pub fn pi_k(state: &State, t_arrival: f64, t: f64) -> Result<f64> {
    let mut total = 0.0;
    for alpha in [1, -1] {
        total += kijowski_amplitude(state, &AbEigenfunction::new(t_arrival, alpha)?, t)?.norm_sqr();
    }
    Ok(total)
}

/// `Π_K` through the energy representation,
/// `⟨T,α|ψ⟩ = h^{-1/2} ∫_0^∞ dE e^{-iET/ħ} ⟨E,α|ψ⟩`.
pub fn pi_k_energy_route(state: &State, t_arrival: f64, t: f64) -> Result<f64> {
    let c = state.constants();
    let (pl, ph) = state.momentum_support();
    let mut total = 0.0;
    for alpha in [1.0, -1.0] {
        let (lo, hi) = if alpha > 0.0 { (pl.max(0.0), ph) } else { ((-ph).max(0.0), -pl) };
        if lo >= hi {
            continue;
        }
        let (elo, ehi) = (lo * lo / (2.0 * c.mass), hi * hi / (2.0 * c.mass));
        let f = |e: f64| {
            if e <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            energy_amplitude(state, e, alpha, t) * Complex64::from_polar(1.0, -e * t_arrival / c.hbar)
        };
        // E^{-1/4} at the threshold: substitute u² = E - E_lo there
        let hint = if elo == 0.0 { SingularityHint::InvSqrtAtA } else { SingularityHint::None };
        let mut amp = Complex64::new(0.0, 0.0);
        let edges = uniform_breaks(elo, ehi, 16);
        for (i, w) in edges.windows(2).enumerate() {
            let h = if i == 0 { hint } else { SingularityHint::None };
            amp += crate::numerics::integrate_1d(f, w[0], w[1], h, &tight())?;
        }
        total += amp.norm_sqr() / c.h();
    }
    Ok(total)
}

pub fn pi_k_distribution(state: &State, t: f64, t_grid: &GridSpec) -> Result<ToaDistribution> {
    ToaDistribution::tabulate(ToaKind::Kijowski, t, t_grid, |tt| pi_k(state, tt, t))
}

/// `P(μT;t) = ∫dT |φ(μT - T)|² Π_K(T;t)`: Kijowski's distribution seen through a
/// pointer window.
pub fn von_neumann_t(state: &State, window: &ApparatusWindow1D, mu_t: f64, t: f64) -> Result<f64> {
    let centre = mu_t - window.center;
    let r = GAUSSIAN_CUTOFF * window.sigma;
    let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-11);
    let f = |tt: f64| Ok(window.phi(mu_t - tt).powi(2) * pi_k(state, tt, t)?);
    Ok(integrate_fallible(f, &uniform_breaks(centre - r, centre + r, 8), &cfg)?.value)
}

pub fn von_neumann_distribution(state: &State, window: &ApparatusWindow1D, t: f64, grid: &GridSpec) -> Result<ToaDistribution> {
    ToaDistribution::tabulate(ToaKind::VonNeumann, t, grid, |mu| von_neumann_t(state, window, mu, t))
}

/// `Θ(p'p'') (p'p'')^{1/2} / (mh)`: the momentum matrix elements of
/// Kijowski's arrival-time density operator at `T = 0`.
pub fn kijowski_target_element(p1: f64, p2: f64, c: &PhysicalConstants) -> f64 {
    if p1 * p2 > 0.0 {
        (p1 * p2).sqrt() / (c.mass * c.h())
    } else {
        0.0
    }
}

/// Best achievable agreement between a kernel's `δ̂_χ(0)` and Kijowski's operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NogoResult {
    /// `min_λ max_{p',p''} |λ ⟨p'|δ̂_χ(0)|p''⟩ - target(p',p'')|`
    pub residual: f64,
    pub lambda: f64,
    /// `max |target|` over the grid.
    pub target_scale: f64,
}

/// Compares `⟨p'|δ̂_χ(0)|p''⟩` with Kijowski's matrix elements on `p_grid²`,
/// minimizing over a real normalization `λ` of the kernel.
pub fn kijowski_nogo_residual(kernel: &CohenKernel, constants: &PhysicalConstants, p_grid: &GridSpec) -> Result<NogoResult> {
    p_grid.validate("p_grid")?;
    let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-11);
    let ps = p_grid.points();
    let mut pairs = Vec::with_capacity(ps.len() * ps.len());
    for &p1 in &ps {
        for &p2 in &ps {
            let m = delta_operator_element(kernel, constants, 0.0, p1, p2, &cfg)?;
            pairs.push((m, kijowski_target_element(p1, p2, constants)));
        }
    }
    let target_scale = pairs.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
    let dev = |lambda: f64| pairs.iter().map(|(m, b)| (m * lambda - b).norm()).fold(0.0, f64::max);
    // max of convex functions of λ is convex: golden-section search
    let mscale = pairs.iter().map(|(m, _)| m.norm()).fold(0.0, f64::max);
    let bound = if mscale > 0.0 { 4.0 * target_scale.max(mscale) / mscale } else { 1.0 };
    let (mut a, mut b) = (-bound, bound);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (dev(x1), dev(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = dev(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = dev(x2);
        }
    }
    let lambda = 0.5 * (a + b);
    Ok(NogoResult {
        residual: dev(lambda),
        lambda,
        target_scale,
    })
}

/// The fixed kernel set used for the no-go check: `χ ≡ 1`, spectrogram
/// windows `σ ∈ {0.05, 0.1, 0.5}`, both orderings and `cos(ħθτ/2)`.
pub fn nogo_kernel_set(hbar: f64) -> Result<Vec<CohenKernel>> {
    let mut v = vec![CohenKernel::wigner()];
    for s in [0.05, 0.1, 0.5] {
        v.push(CohenKernel::spectrogram(ApparatusWindow1D::unbiased(s)?, hbar));
    }
    v.push(CohenKernel::ordering(1, hbar)?);
    v.push(CohenKernel::ordering(-1, hbar)?);
    v.push(CohenKernel::cosine(hbar));
    Ok(v)
}

/// Mean and variance of a density known only through point evaluations.
#[cfg(test)]
pub(crate) fn moments<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
    let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-11);
    let b = uniform_breaks(lo, hi, 32);
    let m0 = integrate_pieces(&f, &b, &cfg)?.value;
    let m1 = integrate_pieces(|x: f64| x * f(x), &b, &cfg)?.value / m0;
    let m2 = integrate_pieces(|x: f64| (x - m1).powi(2) * f(x), &b, &cfg)?.value / m0;
    Ok((m0, m1, m2))
}
