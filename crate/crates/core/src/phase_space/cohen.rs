use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::GridSpec;
use crate::phase_space::kernel::{CohenKernel, KForm};
use crate::phase_space::wigner::check_resolution;
use crate::phase_space::{FieldKind, PhaseSpaceField};
use crate::state::State;

/// Evaluates a Cohen-class distribution through the momentum representation
///
/// `F(x,p) = (1/4π²) ∫dθ e^{-iθx} ∫dq K(θ,q-p) ψ̃(q-ħθ/2,t) ψ̃*(q+ħθ/2,t)`
///
/// with `K(θ,k) = ∫dτ χ(θ,τ) e^{iτk}`. The `θ` integral is a trapezoid sum whose
/// spacing keeps the periodic images of `F` outside the distribution's
/// `x`-support, so values are only returned inside that support.
pub struct CohenEvaluator<'a> {
    state: &'a State,
    t: f64,
    hbar: f64,
    form: KForm,
    thetas: Vec<f64>,
    dtheta: f64,
    x_support: (f64, f64),
    p_support: (f64, f64),
    q_step: f64,
}

impl<'a> CohenEvaluator<'a> {
    pub fn new(state: &'a State, kernel: &CohenKernel, t: f64) -> Result<Self> {
        let c = state.constants();
        kernel.check_hbar(c.hbar)?;
        if !t.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        let form = kernel.k_form()?;
        let (sx, sp) = kernel.smoothing();
        let (xl, xh) = state.position_support(t);
        let (pl, ph) = state.momentum_support();
        let x_support = (xl - sx, xh + sx);
        let p_support = (pl - sp, ph + sp);
        let mut theta_max = (ph - pl) / c.hbar;
        if let Some(cut) = kernel.theta_cutoff() {
            theta_max = theta_max.min(cut);
        }
        let dtheta = 2.0 * PI / (1.1 * (x_support.1 - x_support.0));
        let half = (theta_max / dtheta).ceil() as i64;
        let thetas = (-half..=half).map(|j| j as f64 * dtheta).collect();
        let q_step = match &form {
            KForm::Deltas(_) | KForm::Weighted(_) => 0.0,
            KForm::Smooth { width, .. } => {
                let omega = theta_max * t.abs() / c.mass + state.x0_spread() / c.hbar;
                let w = width.min(state.min_momentum_width() / std::f64::consts::SQRT_2);
                2.0 * PI / (omega + 12.0 / w)
            }
        };
        Ok(CohenEvaluator {
            state,
            t,
            hbar: c.hbar,
            form,
            thetas,
            dtheta,
            x_support,
            p_support,
            q_step,
        })
    }

    /// Interval outside which `F(·,p)` vanishes.
    pub fn x_support(&self) -> (f64, f64) {
        self.x_support
    }

    /// Interval outside which `F(x,·)` vanishes.
    pub fn p_support(&self) -> (f64, f64) {
        self.p_support
    }

    pub fn theta_nodes(&self) -> usize {
        self.thetas.len()
    }

    /// `ψ̃(q-ħθ/2,t) ψ̃*(q+ħθ/2,t)`
    fn product(&self, q: f64, theta: f64) -> Complex64 {
        let d = self.hbar * theta / 2.0;
        self.state.psi_p(q - d, self.t) * self.state.psi_p(q + d, self.t).conj()
    }

    /// `G(θ,p)/(2π)` on the `θ` nodes.
    fn g_column(&self, p: f64) -> Vec<Complex64> {
        match &self.form {
            KForm::Deltas(terms) => self
                .thetas
                .iter()
                .map(|&th| terms.iter().map(|&(a, w)| w * self.product(p + a * th, th)).sum())
                .collect(),
            KForm::Weighted(chi) => self.thetas.iter().map(|&th| chi(th, 0.0) * self.product(p, th)).collect(),
            KForm::Smooth { k, width } => {
                let (pl, ph) = self.state.momentum_support();
                let reach = crate::numerics::GAUSSIAN_CUTOFF * width;
                self.thetas
                    .iter()
                    .map(|&th| {
                        let d = self.hbar * th.abs() / 2.0;
                        let lo = (pl + d).max(p - reach);
                        let hi = (ph - d).min(p + reach);
                        if lo >= hi {
                            return Complex64::new(0.0, 0.0);
                        }
                        let n = ((hi - lo) / self.q_step).ceil() as usize + 1;
                        let h = (hi - lo) / (n - 1) as f64;
                        let s: Complex64 = (0..n)
                            .map(|j| {
                                let q = lo + j as f64 * h;
                                let wgt = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                                k(th, q - p) * self.product(q, th) * wgt
                            })
                            .sum();
                        s * h / (2.0 * PI)
                    })
                    .collect()
            }
        }
    }

    /// `(1/2π) Σ_j dθ e^{-iθ_j x} g_j` for each `x` (zero outside the support).
    fn sum_theta(&self, g: &[Complex64], xs: &[f64]) -> Vec<Complex64> {
        xs.iter()
            .map(|&x| {
                if x <= self.x_support.0 || x >= self.x_support.1 {
                    return Complex64::new(0.0, 0.0);
                }
                let step = Complex64::from_polar(1.0, -self.dtheta * x);
                let mut ph = Complex64::from_polar(1.0, -self.thetas[0] * x);
                let mut s = Complex64::new(0.0, 0.0);
                for (j, gj) in g.iter().enumerate() {
                    if j % 256 == 0 {
                        ph = Complex64::from_polar(1.0, -self.thetas[j] * x);
                    }
                    s += gj * ph;
                    ph *= step;
                }
                s * self.dtheta / (2.0 * PI)
            })
            .collect()
    }

    /// `F(x,p)`.
    pub fn value(&self, x: f64, p: f64) -> Complex64 {
        if p <= self.p_support.0 || p >= self.p_support.1 {
            return Complex64::new(0.0, 0.0);
        }
        if x <= self.x_support.0 || x >= self.x_support.1 {
            return Complex64::new(0.0, 0.0);
        }
        self.sum_theta(&self.g_column(p), &[x])[0]
    }

    /// `F(x,p)` at fixed `p` for many `x`.
    pub fn column(&self, p: f64, xs: &[f64]) -> Vec<Complex64> {
        if p <= self.p_support.0 || p >= self.p_support.1 {
            return vec![Complex64::new(0.0, 0.0); xs.len()];
        }
        self.sum_theta(&self.g_column(p), xs)
    }
}

/// Cohen-class distribution of `ψ(t)` for `kernel` on a grid.
pub fn cohen_distribution(
    state: &State,
    kernel: &CohenKernel,
    t: f64,
    x_grid: &GridSpec,
    p_grid: &GridSpec,
) -> Result<PhaseSpaceField> {
    check_resolution(state, t, x_grid, p_grid, 0.0)?;
    let ev = CohenEvaluator::new(state, kernel, t)?;
    let xs = x_grid.points();
    let cols: Vec<Vec<Complex64>> = p_grid.points().par_iter().map(|&p| ev.column(p, &xs)).collect();
    let np = p_grid.n;
    let mut values = vec![Complex64::new(0.0, 0.0); x_grid.n * np];
    for (ip, col) in cols.iter().enumerate() {
        for (ix, v) in col.iter().enumerate() {
            values[ix * np + ip] = *v;
        }
    }
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { at: t });
    }
    Ok(PhaseSpaceField {
        x_grid: *x_grid,
        p_grid: *p_grid,
        values,
        kind: FieldKind::Cohen(kernel.id()),
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::QuadratureConfig;
    use crate::phase_space::{spectrogram_point, wigner, wigner_point, ApparatusWindow1D};
    use crate::state::GaussianPacket;

    fn pair() -> State {
        let a = GaussianPacket::new(-1.5, 1.0, 0.7).unwrap();
        let b = GaussianPacket::new(1.0, -0.5, 1.1).unwrap();
        State::superposition(vec![(Complex64::new(1.0, 0.0), a), (Complex64::new(0.3, 0.8), b)]).unwrap()
    }

    #[test]
    fn unit_kernel_reproduces_wigner() {
        let s = pair();
        let k = CohenKernel::wigner();
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-12);
        for t in [0.0, 0.8] {
            let ev = CohenEvaluator::new(&s, &k, t).unwrap();
            for (x, p) in [(0.0, 0.2), (-1.4, 1.1), (1.3, -0.7), (2.5, 0.5)] {
                let a = ev.value(x, p);
                let b = wigner_point(&s, x, p, t, &cfg).unwrap();
                assert!((a.re - b).abs() < 1e-8 && a.im.abs() < 1e-8, "t={t} ({x},{p}): {a} vs {b}");
            }
        }
        let xg = GridSpec::centered(0.0, 4.0, 81).unwrap();
        let pg = GridSpec::centered(0.0, 4.0, 81).unwrap();
        let f = cohen_distribution(&s, &k, 0.4, &xg, &pg).unwrap();
        let w = wigner(&s, 0.4, &xg, &pg).unwrap();
        let worst = f.values.iter().zip(&w.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn spectrogram_kernel_reproduces_spectrogram() {
        let s = State::gaussian(0.3, 1.2, 1.0).unwrap();
        let w = ApparatusWindow1D::new(0.9, 0.2).unwrap();
        let k = CohenKernel::spectrogram(w, 1.0);
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-12);
        let t = 0.5;
        let ev = CohenEvaluator::new(&s, &k, t).unwrap();
        for (x, p) in [(0.7, 1.2), (0.0, 0.5), (1.9, 2.4), (-1.0, 0.0)] {
            let a = ev.value(x, p);
            let b = spectrogram_point(&s, &w, x, p, t, &cfg).unwrap();
            assert!((a.re - b).abs() < 1e-6 && a.im.abs() < 1e-6, "({x},{p}): {a} vs {b}");
        }
    }

    #[test]
    fn ordering_kernels_keep_marginals_and_are_conjugate() {
        let s = pair();
        let t = 0.3;
        let xg = GridSpec::centered(0.0, 7.0, 141).unwrap();
        let pg = GridSpec::centered(0.3, 10.0, 201).unwrap();
        let plus = cohen_distribution(&s, &CohenKernel::ordering(1, 1.0).unwrap(), t, &xg, &pg).unwrap();
        let minus = cohen_distribution(&s, &CohenKernel::ordering(-1, 1.0).unwrap(), t, &xg, &pg).unwrap();
        assert!(plus.max_imag() > 1e-3);
        for (a, b) in plus.values.iter().zip(&minus.values) {
            assert!((a - b.conj()).norm() < 1e-10);
        }
        let mx = plus.marginal_x();
        for (i, x) in xg.points().into_iter().enumerate().step_by(10) {
            assert!((mx[i] - s.psi_x(x, t).norm_sqr()).abs() < 1e-6, "x={x}");
        }
        let mp = plus.marginal_p();
        for (i, p) in pg.points().into_iter().enumerate().step_by(10) {
            assert!((mp[i] - s.psi_p(p, t).norm_sqr()).abs() < 1e-6, "p={p}");
        }
        // the symmetrized kernel is the real part
        let cos = cohen_distribution(&s, &CohenKernel::cosine(1.0), t, &xg, &pg).unwrap();
        for (a, b) in plus.values.iter().zip(&cos.values) {
            assert!((a.re - b.re).abs() < 1e-10 && b.im.abs() < 1e-10);
        }
    }

    #[test]
    fn custom_kernel_without_transform_is_unsupported() {
        let s = pair();
        let mix = CohenKernel::custom(
            "mix",
            std::sync::Arc::new(|th: f64, ta: f64| 0.25 * Complex64::from_polar(1.0, th * ta / 2.0) + 0.75),
            None,
            (0.0, 0.0),
            Default::default(),
            1.0,
        )
        .unwrap();
        assert!(matches!(CohenEvaluator::new(&s, &mix, 0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cosine_kernel_is_the_mean_of_the_orderings() {
        let s = pair();
        let t = -0.2;
        let kp = CohenKernel::ordering(1, 1.0).unwrap();
        let km = CohenKernel::ordering(-1, 1.0).unwrap();
        let kc = CohenKernel::cosine(1.0);
        let (a, b, c) = (
            CohenEvaluator::new(&s, &kp, t).unwrap(),
            CohenEvaluator::new(&s, &km, t).unwrap(),
            CohenEvaluator::new(&s, &kc, t).unwrap(),
        );
        for (x, p) in [(0.1, 0.0), (-1.0, 1.0), (2.0, -0.6)] {
            assert!((0.5 * (a.value(x, p) + b.value(x, p)) - c.value(x, p)).norm() < 1e-12);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
        #[test]
        fn distribution_scales_with_the_kernel(lambda in -3.0f64..3.0, x in -1.5f64..1.5, p in -0.5f64..1.5) {
            let s = State::gaussian(0.0, 0.5, 1.0).unwrap();
            let w = ApparatusWindow1D::new(0.8, 0.0).unwrap();
            let base = CohenKernel::spectrogram(w, 1.0);
            let KForm::Smooth { k, .. } = base.k_form().unwrap() else { unreachable!() };
            let b2 = base.clone();
            let scaled = CohenKernel::custom(
                "scaled",
                std::sync::Arc::new(move |th: f64, ta: f64| lambda * b2.eval(th, ta)),
                Some(std::sync::Arc::new(move |th: f64, kk: f64| lambda * k(th, kk))),
                base.smoothing(),
                Default::default(),
                1.0,
            );
            if lambda.abs() < 1e-6 {
                proptest::prop_assert!(scaled.is_err());
            } else {
                let scaled = scaled.unwrap();
                let f1 = CohenEvaluator::new(&s, &base, 0.3).unwrap().value(x, p);
                let f2 = CohenEvaluator::new(&s, &scaled, 0.3).unwrap().value(x, p);
                proptest::prop_assert!((f2 - lambda * f1).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn distribution_is_linear_in_the_density_operator() {
        // |a+b⟩⟨a+b| + |a-b⟩⟨a-b| = 2|a⟩⟨a| + 2|b⟩⟨b|
        use crate::state::StateSuperposition;
        let a = GaussianPacket::new(-1.0, 0.5, 0.8).unwrap();
        let b = GaussianPacket::new(1.2, -0.4, 1.2).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let sum = State::Superposition(StateSuperposition::new(vec![(one, a), (one, b)]).unwrap());
        let diff = State::Superposition(StateSuperposition::new(vec![(one, a), (-one, b)]).unwrap());
        let (sa, sb) = (State::Gaussian(a), State::Gaussian(b));
        let w = ApparatusWindow1D::new(0.9, 0.0).unwrap();
        for k in [CohenKernel::ordering(1, 1.0).unwrap(), CohenKernel::spectrogram(w, 1.0)] {
            let t = 0.2;
            let ev = |s: &State, x: f64, p: f64| CohenEvaluator::new(s, &k, t).unwrap().value(x, p);
            for (x, p) in [(0.0, 0.0), (-0.8, 0.6), (1.1, -0.5)] {
                let lhs = ev(&sum, x, p) + ev(&diff, x, p);
                let rhs = 2.0 * (ev(&sa, x, p) + ev(&sb, x, p));
                assert!((lhs - rhs).norm() < 1e-9, "{}: {lhs} vs {rhs}", k.id());
            }
        }
    }
}
