//! Momentum-representation matrix elements of the arrival-time operator
//! `δ̂_χ(T)` obtained by `χ`-quantizing `δ(mx/p + T)`.

use num_complex::Complex64;

use crate::error::Result;
use crate::numerics::quadrature::integrate_pieces;
use crate::numerics::{GridSpec, QuadratureConfig, GAUSSIAN_CUTOFF};
use crate::phase_space::kernel::{CohenKernel, KForm};
use crate::state::PhysicalConstants;

/// `⟨p'|δ̂_χ(T)|p''⟩ = (1/(2πhm)) ∫dk |k| K(ν/ħ, η-k) e^{iTνk/(mħ)}`
/// with `ν = p'-p''`, `η = (p'+p'')/2` and `K(θ,k) = ∫dτ χ(θ,τ) e^{iτk}`.
pub fn delta_operator_element(
    kernel: &CohenKernel,
    constants: &PhysicalConstants,
    t_arrival: f64,
    p1: f64,
    p2: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    kernel.check_hbar(constants.hbar)?;
    let (hbar, m) = (constants.hbar, constants.mass);
    let nu = p1 - p2;
    let eta = 0.5 * (p1 + p2);
    let theta = nu / hbar;
    let pref = 1.0 / (constants.h() * m);
    let phase = |k: f64| Complex64::from_polar(1.0, t_arrival * nu * k / (m * hbar));
    match kernel.k_form()? {
        KForm::Deltas(terms) => Ok(terms
            .iter()
            .map(|&(a, w)| {
                let k = eta - a * theta;
                pref * w * k.abs() * phase(k)
            })
            .sum()),
        KForm::Weighted(chi) => Ok(pref * chi(theta, 0.0) * eta.abs() * phase(eta)),
        KForm::Smooth { k, width } => {
            let r = GAUSSIAN_CUTOFF * width;
            let (lo, hi) = (eta - r, eta + r);
            let mut breaks = vec![lo];
            if lo < 0.0 && hi > 0.0 {
                breaks.push(0.0);
            }
            breaks.push(hi);
            let v = integrate_pieces(|kk: f64| k(theta, eta - kk) * kk.abs() * phase(kk), &breaks, cfg)?;
            Ok(pref * v.value / (2.0 * std::f64::consts::PI))
        }
    }
}

/// `⟨p'|e^{iĤt'/ħ} δ̂_χ(T-t') e^{-iĤt'/ħ}|p''⟩ = e^{i(p'²-p''²)t'/(2mħ)} ⟨p'|δ̂_χ(T-t')|p''⟩`.
pub fn shifted_delta_operator_element(
    kernel: &CohenKernel,
    constants: &PhysicalConstants,
    t_arrival: f64,
    t_shift: f64,
    p1: f64,
    p2: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let free = Complex64::from_polar(1.0, (p1 * p1 - p2 * p2) * t_shift / (2.0 * constants.mass * constants.hbar));
    Ok(free * delta_operator_element(kernel, constants, t_arrival - t_shift, p1, p2, cfg)?)
}

/// Largest deviation between `δ̂_χ(T)` and its time-translated counterpart
/// over `p_grid × p_grid`. Vanishes exactly when `χ` does not depend on `τ`.
pub fn kernel_covariance_residual(
    kernel: &CohenKernel,
    constants: &PhysicalConstants,
    t_arrival: f64,
    t_shift: f64,
    p_grid: &GridSpec,
) -> Result<f64> {
    p_grid.validate("p_grid")?;
    let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-11);
    let ps = p_grid.points();
    let mut worst = 0.0f64;
    for &p1 in &ps {
        for &p2 in &ps {
            let a = delta_operator_element(kernel, constants, t_arrival, p1, p2, &cfg)?;
            let b = shifted_delta_operator_element(kernel, constants, t_arrival, t_shift, p1, p2, &cfg)?;
            worst = worst.max((a - b).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::integrate_complex;
    use crate::phase_space::ApparatusWindow1D;

    fn grid() -> GridSpec {
        GridSpec::new(-4.0, 4.0, 17).unwrap()
    }

    #[test]
    fn unit_kernel_is_covariant() {
        let c = PhysicalConstants::default();
        for (t, s) in [(0.3, 0.1), (-1.2, 0.7), (2.0, -1.5)] {
            let r = kernel_covariance_residual(&CohenKernel::wigner(), &c, t, s, &grid()).unwrap();
            assert!(r <= 1e-8, "{r}");
        }
    }

    #[test]
    fn tau_independent_custom_kernel_is_covariant() {
        let c = PhysicalConstants::default();
        let chi: crate::phase_space::KernelFn = std::sync::Arc::new(|th: f64, _| Complex64::new((-th * th / 4.0).exp(), 0.0));
        let flags = crate::phase_space::KernelFlags {
            preserves_norm: true,
            marginal_p: true,
            tau_independent: true,
            ..Default::default()
        };
        let k = CohenKernel::custom("gauss-theta", chi, None, (3.0, 0.0), flags, 1.0).unwrap();
        assert!(kernel_covariance_residual(&k, &c, 0.3, 0.1, &grid()).unwrap() <= 1e-8);
    }

    #[test]
    fn spectrogram_kernel_is_not_covariant() {
        let c = PhysicalConstants::default();
        let k = CohenKernel::spectrogram(ApparatusWindow1D::unbiased(0.1).unwrap(), 1.0);
        let r = kernel_covariance_residual(&k, &c, 0.3, 0.1, &grid()).unwrap();
        assert!(r > 1e-3, "{r}");
        let ord = CohenKernel::ordering(1, 1.0).unwrap();
        assert!(kernel_covariance_residual(&ord, &c, 0.3, 0.1, &grid()).unwrap() > 1e-3);
    }

    #[test]
    fn zero_shift_is_identity() {
        let c = PhysicalConstants::default();
        let w = ApparatusWindow1D::new(0.1, 0.0).unwrap();
        for k in [CohenKernel::wigner(), CohenKernel::spectrogram(w, 1.0), CohenKernel::cosine(1.0)] {
            assert!(kernel_covariance_residual(&k, &c, 0.4, 0.0, &grid()).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn spectrogram_element_matches_double_integral() {
        // direct τ and k integrals of the defining expression
        let c = PhysicalConstants::default();
        let w = ApparatusWindow1D::new(1.3, 0.0).unwrap();
        let k = CohenKernel::spectrogram(w, 1.0);
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-11);
        let (t, p1, p2) = (0.4, 0.9, -0.3);
        let nu = p1 - p2;
        let eta = 0.5 * (p1 + p2);
        let inner = |p: f64| {
            integrate_complex(
                |tau| k.eval(nu, tau) * Complex64::from_polar(1.0, -p * tau + tau * eta),
                -12.0,
                12.0,
                8,
                &cfg,
            )
            .unwrap()
        };
        let outer = integrate_complex(
            |p| inner(p) * p.abs() * Complex64::from_polar(1.0, p * t * nu),
            -8.0,
            8.0,
            16,
            &cfg,
        )
        .unwrap();
        let direct = outer / (2.0 * std::f64::consts::PI * c.h());
        let v = delta_operator_element(&k, &c, t, p1, p2, &cfg).unwrap();
        assert!((v - direct).norm() < 1e-9, "{v} vs {direct}");
    }
}
