//! Arrival-time distributions at the origin built from position-momentum
//! quasi-distributions.
//!
//! `T` is the interval from the reference time `t` to the arrival instant `t + T`.

use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::numerics::erf::ln_one_plus_scaled_erf_product;
use crate::numerics::quadrature::{integrate_fallible, integrate_pieces, uniform_breaks};
use crate::numerics::{trapezoid, GridSpec, QuadratureConfig, GAUSSIAN_CUTOFF};
use crate::phase_space::{ak_closed_form, spectrogram_point, AkParams, ApparatusWindow1D, CohenEvaluator, CohenKernel, KernelKind};
use crate::state::State;

/// Which construction produced a [`ToaDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum ToaKind {
    Kw,
    DeltaCohen(String),
    DeltaWigner,
    JTilde(String),
    Kijowski,
    VonNeumann,
    EtMarginal,
}

impl ToaKind {
    pub fn label(&self) -> String {
        match self {
            ToaKind::Kw => "kw".into(),
            ToaKind::DeltaCohen(id) => format!("delta_cohen({id})"),
            ToaKind::DeltaWigner => "delta_wigner".into(),
            ToaKind::JTilde(id) => format!("j_tilde({id})"),
            ToaKind::Kijowski => "kijowski".into(),
            ToaKind::VonNeumann => "von_neumann".into(),
            ToaKind::EtMarginal => "et_marginal".into(),
        }
    }
}

/// Arrival-time density sampled on a grid of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaDistribution {
    pub t_grid: GridSpec,
    pub values: Vec<f64>,
    pub kind: ToaKind,
    /// Reference time.
    pub t: f64,
    /// Trapezoid mass over the grid.
    pub norm_estimate: f64,
}

impl ToaDistribution {
    pub fn new(kind: ToaKind, t: f64, t_grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        t_grid.validate("T_grid")?;
        if values.len() != t_grid.n {
            return Err(Error::invalid(format!("{} values for a grid of {} points", values.len(), t_grid.n)));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: t_grid.point(i) });
        }
        let norm_estimate = trapezoid(&values, t_grid.spacing());
        Ok(ToaDistribution {
            t_grid,
            values,
            kind,
            t,
            norm_estimate,
        })
    }

    /// Evaluates `f(T)` at every grid point in parallel.
    pub fn tabulate<F>(kind: ToaKind, t: f64, t_grid: &GridSpec, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        t_grid.validate("T_grid")?;
        let values = t_grid.points().par_iter().map(|&tt| f(tt)).collect::<Result<Vec<f64>>>()?;
        Self::new(kind, t, *t_grid, values)
    }

    pub fn points(&self) -> Vec<f64> {
        self.t_grid.points()
    }

    /// `(T, value)` at the largest value.
    pub fn peak(&self) -> (f64, f64) {
        let (i, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        (self.t_grid.point(i), v)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        let w: Vec<f64> = self.points().iter().zip(&self.values).map(|(tt, v)| tt * v).collect();
        trapezoid(&w, self.t_grid.spacing()) / self.norm_estimate
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let w: Vec<f64> = self.points().iter().zip(&self.values).map(|(tt, v)| (tt - m).powi(2) * v).collect();
        trapezoid(&w, self.t_grid.spacing()) / self.norm_estimate
    }

    /// CSV with columns `T,value,kind,t` after a `#` header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let kind = self.kind.label();
        writeln!(
            w,
            "# kind={kind} t={:.16e} norm_estimate={:.16e} grid={}",
            self.t, self.norm_estimate, self.t_grid
        )?;
        writeln!(w, "T,value,kind,t")?;
        for (tt, v) in self.points().iter().zip(&self.values) {
            writeln!(w, "{tt:.16e},{v:.16e},{kind},{:.16e}", self.t)?;
        }
        Ok(())
    }
}

fn tight() -> QuadratureConfig {
    QuadratureConfig::default().with_tol(1e-13, 1e-11)
}

/// Sorted, de-duplicated breakpoints in `[lo, hi]` including the interior `extra` points.
fn breaks_with(lo: f64, hi: f64, extra: &[f64], pieces: usize) -> Vec<f64> {
    let mut b: Vec<f64> = extra.iter().cloned().filter(|&x| x > lo && x < hi).collect();
    b.push(lo);
    b.push(hi);
    b.sort_by(|a, c| a.partial_cmp(c).expect("finite breaks"));
    b.dedup();
    let mut out = vec![b[0]];
    for w in b.windows(2) {
        out.extend_from_slice(&uniform_breaks(w[0], w[1], pieces)[1..]);
    }
    out
}

/// Readout density feeding `Π_KW`.
#[derive(Debug, Clone, Copy)]
pub enum KwSource<'a> {
    /// Spectrogram of `state` with `window`, evaluated by quadrature.
    Measured { state: &'a State, window: ApparatusWindow1D },
    /// Closed-form Gaussian readout density.
    Model(AkParams),
}

/// `Π_KW(T;t) = ∫dμP (|μP|/m) ρ(-TμP/m, μP, t)`: the readout density averaged
/// against `δ(mμX/μP + T)`, with the delta resolved in `μX`.
pub fn pi_kw(source: &KwSource, t_arrival: f64, t: f64) -> Result<f64> {
    let cfg = tight();
    match *source {
        KwSource::Model(params) => {
            let c = params.constants;
            let (hbar, m) = (c.hbar, c.mass);
            let (d2, s2) = (params.delta.powi(2), params.sigma.powi(2));
            let big_d = params.spread(t);
            let w = hbar * (2.0 * big_d / (d2 * s2 * (d2 + s2))).sqrt();
            let centre = hbar * params.k0;
            let (lo, hi) = (centre - GAUSSIAN_CUTOFF * w, centre + GAUSSIAN_CUTOFF * w);
            // momenta where the line μX = -TμP/m crosses the two Gaussian ridges
            let mut extra = vec![0.0, centre];
            if t_arrival != 0.0 {
                extra.push(-(params.x0 + centre * t / m) * m / t_arrival);
            }
            if t + t_arrival != 0.0 {
                extra.push(-params.x0 * m / (t + t_arrival));
            }
            let f = |p: f64| p.abs() / m * ak_closed_form(&params, t, -t_arrival * p / m, p);
            Ok(integrate_pieces(f, &breaks_with(lo, hi, &extra, 4), &cfg)?.value)
        }
        KwSource::Measured { state, window } => {
            let c = state.constants();
            let (pl, ph) = state.momentum_support();
            let sp = GAUSSIAN_CUTOFF * 2.0 * c.hbar / window.sigma;
            let (lo, hi) = (pl - sp, ph + sp);
            let inner = QuadratureConfig::default().with_tol(1e-15, 1e-13);
            let f = |p: f64| Ok(p.abs() / c.mass * spectrogram_point(state, &window, -t_arrival * p / c.mass, p, t, &inner)?);
            Ok(integrate_fallible(f, &breaks_with(lo, hi, &[0.0], 8), &cfg)?.value)
        }
    }
}

pub fn pi_kw_distribution(source: &KwSource, t: f64, t_grid: &GridSpec) -> Result<ToaDistribution> {
    ToaDistribution::tabulate(ToaKind::Kw, t, t_grid, |tt| pi_kw(source, tt, t))
}

/// `Δ(T,t) = σ²(T+t)² + δ²T² + δ²σ²(δ²+σ²)/4`
fn big_delta(p: &AkParams, t_arrival: f64, t: f64) -> f64 {
    let (d2, s2) = (p.delta.powi(2), p.sigma.powi(2));
    s2 * (t_arrival + t).powi(2) + d2 * t_arrival * t_arrival + 0.25 * d2 * s2 * (d2 + s2)
}

/// Closed form of `Π_KW` for a Gaussian packet and centred Gaussian window
/// (atomic units):
///
/// `Π = δσ√D/(2πΔ) exp(-2[δ²(x0+k0t)² + σ²x0² + k0²Δ(0,0)]/D) (1 + √π ξ e^{ξ²} erf ξ)`,
/// `ξ = 2[k0Δ(0,0) - σ²(T+t)x0 - δ²T(x0+k0t)] / (√(2Δ(T,t)) √D)`.
pub fn pi_kw_closed_form(params: &AkParams, t_arrival: f64, t: f64) -> Result<f64> {
    params.constants.require_atomic("the closed-form arrival-time density")?;
    let AkParams { x0, k0, delta, sigma, .. } = *params;
    let (d2, s2) = (delta * delta, sigma * sigma);
    let big_d = params.spread(t);
    let dl = big_delta(params, t_arrival, t);
    let d00 = big_delta(params, 0.0, 0.0);
    let xt = x0 + k0 * t;
    let xi = 2.0 * (k0 * d00 - s2 * (t_arrival + t) * x0 - d2 * t_arrival * xt) / ((2.0 * dl).sqrt() * big_d.sqrt());
    let expo = -2.0 * (d2 * xt * xt + s2 * x0 * x0 + k0 * k0 * d00) / big_d;
    Ok(delta * sigma * big_d.sqrt() / (2.0 * PI * dl) * (expo + ln_one_plus_scaled_erf_product(xi)).exp())
}

/// `Π_δ(T;t;[χ]) = ∫dp (|p|/m) F(-Tp/m, p, t; [χ])`.
///
/// The spectrogram kernel's distribution is the measured readout density, so
/// that kernel goes through [`pi_kw`]; every other kernel goes through
/// [`pi_delta_cohen`].
pub fn pi_delta(state: &State, kernel: &CohenKernel, t_arrival: f64, t: f64) -> Result<f64> {
    kernel.require_normalized()?;
    match kernel.kind() {
        KernelKind::Spectrogram(w) => {
            kernel_hbar_matches(state, kernel)?;
            pi_kw(&KwSource::Measured { state, window: *w }, t_arrival, t)
        }
        _ => pi_delta_cohen(state, kernel, t_arrival, t),
    }
}

fn kernel_hbar_matches(state: &State, kernel: &CohenKernel) -> Result<()> {
    CohenEvaluator::new(state, kernel, 0.0).map(|_| ())
}

/// `Π_δ` through the momentum-representation Cohen evaluator. Returns the real
/// part; for ordering kernels that is the value of the symmetrized
/// (`cos(ħθτ/2)`) kernel.
pub fn pi_delta_cohen(state: &State, kernel: &CohenKernel, t_arrival: f64, t: f64) -> Result<f64> {
    kernel.require_normalized()?;
    let ev = CohenEvaluator::new(state, kernel, t)?;
    pi_delta_with(&ev, state.constants().mass, t_arrival)
}

pub(crate) fn pi_delta_with(ev: &CohenEvaluator, mass: f64, t_arrival: f64) -> Result<f64> {
    let (xl, xh) = ev.x_support();
    let (mut lo, mut hi) = ev.p_support();
    if t_arrival == 0.0 {
        if !(xl < 0.0 && xh > 0.0) {
            return Ok(0.0);
        }
    } else {
        // p with -Tp/m inside (xl, xh)
        let (a, b) = (-mass * xh / t_arrival, -mass * xl / t_arrival);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
        if lo >= hi {
            return Ok(0.0);
        }
    }
    let f = |p: f64| p.abs() / mass * ev.value(-t_arrival * p / mass, p).re;
    Ok(integrate_pieces(f, &breaks_with(lo, hi, &[0.0], 4), &tight())?.value)
}

/// Covariant arrival-time density of the Wigner function,
/// `(1/(hm)) ∬dp'dp'' |(p'+p'')/2| ψ̃(p',t+T) ψ̃*(p'',t+T)`, integrated in
/// `η = (p'+p'')/2` and `ν = p'-p''`. The `ν` integrand at `-ν` is the
/// conjugate of that at `ν`, so the result is `2 Re ∫_0 dν`.
pub fn pi_delta_wigner(state: &State, t_arrival: f64, t: f64) -> Result<f64> {
    let c = state.constants();
    let tau = t + t_arrival;
    let (pl, ph) = state.momentum_support();
    let inner_cfg = QuadratureConfig::default().with_tol(1e-14, 1e-12);
    let inner = |eta: f64| -> Result<f64> {
        let v = 2.0 * (eta - pl).min(ph - eta);
        if v <= 0.0 {
            return Ok(0.0);
        }
        let g = |nu: f64| state.psi_p(eta + nu / 2.0, tau) * state.psi_p(eta - nu / 2.0, tau).conj();
        Ok(2.0 * integrate_pieces(g, &uniform_breaks(0.0, v, 8), &inner_cfg)?.value.re)
    };
    let v = integrate_fallible(|eta: f64| Ok(eta.abs() * inner(eta)?), &breaks_with(pl, ph, &[0.0], 8), &tight())?.value;
    Ok(v / (c.h() * c.mass))
}

/// `Π_J̃(T;t;[χ]) = ∫dp |p/m| F(0, p, t+T; [χ]) = Π_δ(0; t+T; [χ])`.
pub fn pi_j_tilde(state: &State, kernel: &CohenKernel, t_arrival: f64, t: f64) -> Result<f64> {
    pi_delta(state, kernel, 0.0, t + t_arrival)
}

/// Closed form of `Π_J̃` for the Gaussian packet with the spectrogram kernel.
pub fn pi_j_tilde_closed_form(params: &AkParams, t_arrival: f64, t: f64) -> Result<f64> {
    pi_kw_closed_form(params, 0.0, t + t_arrival)
}

/// `max_T |Π(T;t) - Π(T-t';t+t')|` over `t_grid`.
pub fn covariance_residual<F>(f: F, t: f64, t_shift: f64, t_grid: &GridSpec) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    t_grid.validate("T_grid")?;
    let diffs = t_grid
        .points()
        .par_iter()
        .map(|&tt| Ok((f(tt, t)? - f(tt - t_shift, t + t_shift)?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(diffs.into_iter().fold(0.0, f64::max))
}

/// `∫_{-R}^{R} f(T) dT`.
pub fn windowed_mass<F: Fn(f64) -> f64>(f: F, radius: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("window radius must be positive and finite"));
    }
    let mut breaks = uniform_breaks(-radius.min(1.0), radius.min(1.0), 16);
    let mut r = 1.0;
    while r < radius {
        r = (r * 2.0).min(radius);
        breaks.insert(0, -r);
        breaks.push(r);
    }
    Ok(integrate_pieces(f, &breaks, cfg)?.value)
}

/// Least-squares fit `M(R) ≈ a + b ln R` of windowed masses.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMassFit {
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    pub intercept: f64,
    pub slope: f64,
    /// Largest `|fit - M| / M`.
    pub max_relative_residual: f64,
}

pub fn log_mass_fit<F: Fn(f64) -> f64>(f: F, radii: &[f64]) -> Result<LogMassFit> {
    if radii.len() < 2 {
        return Err(Error::invalid("a log fit needs at least two radii"));
    }
    let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-10);
    let masses = radii.iter().map(|&r| windowed_mass(&f, r, &cfg)).collect::<Result<Vec<f64>>>()?;
    let ls: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let n = radii.len() as f64;
    let (sl, sm) = (ls.iter().sum::<f64>() / n, masses.iter().sum::<f64>() / n);
    let cov: f64 = ls.iter().zip(&masses).map(|(l, m)| (l - sl) * (m - sm)).sum();
    let var: f64 = ls.iter().map(|l| (l - sl).powi(2)).sum();
    let slope = cov / var;
    let intercept = sm - slope * sl;
    let max_relative_residual = ls
        .iter()
        .zip(&masses)
        .map(|(l, m)| ((intercept + slope * l - m) / m).abs())
        .fold(0.0, f64::max);
    Ok(LogMassFit {
        radii: radii.to_vec(),
        masses,
        intercept,
        slope,
        max_relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{find_backflow_state, flux_at_origin, GaussianPacket};

    fn fig1() -> AkParams {
        AkParams::new(-2.5, 10.0, 0.1, 0.1).unwrap()
    }

    #[test]
    fn closed_form_matches_delta_reduced_quadrature() {
        let p = fig1();
        for t in [-0.2, -0.1] {
            let g = GridSpec::new(-1.5, 1.5, 61).unwrap();
            let num = pi_kw_distribution(&KwSource::Model(p), t, &g).unwrap();
            let peak = num.peak().1;
            for (tt, v) in num.points().iter().zip(&num.values) {
                let cf = pi_kw_closed_form(&p, *tt, t).unwrap();
                assert!((cf - v).abs() <= 1e-6 * peak, "t={t} T={tt}: {cf} vs {v}");
            }
        }
    }

    #[test]
    fn closed_form_is_normalized_positive_and_parity_symmetric() {
        let p = fig1();
        let q = AkParams::new(2.5, -10.0, 0.1, 0.1).unwrap();
        let cfg = QuadratureConfig::default().with_tol(1e-13, 1e-10);
        for t in [-0.2, -0.1] {
            let n = windowed_mass(|tt| pi_kw_closed_form(&p, tt, t).unwrap(), 1e4, &cfg).unwrap();
            // the 1/T² tails beyond 1e4 carry ~1e-6
            assert!((n - 1.0).abs() < 1e-4, "{n}");
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let (tt, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let a = pi_kw_closed_form(&p, tt, t).unwrap();
            assert!(a >= 0.0 && a.is_finite());
            let b = pi_kw_closed_form(&q, tt, t).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn kw_is_not_covariant() {
        let p = fig1();
        let g = GridSpec::new(-1.5, 1.5, 301).unwrap();
        let f = |tt: f64, t: f64| pi_kw_closed_form(&p, tt, t);
        let peak = ToaDistribution::tabulate(ToaKind::Kw, -0.2, &g, |tt| f(tt, -0.2)).unwrap().peak().1;
        let r = covariance_residual(f, -0.2, 0.1, &g).unwrap();
        assert!(r > 0.1 * peak, "{r} vs {peak}");
    }

    #[test]
    fn measured_route_matches_model_route() {
        let p = AkParams::new(-1.0, 2.0, 0.8, 0.6).unwrap();
        let s = State::Gaussian(p.packet());
        let src = KwSource::Measured { state: &s, window: p.window() };
        for (tt, t) in [(0.4, 0.1), (0.8, -0.3), (-0.5, 0.2)] {
            let a = pi_kw(&src, tt, t).unwrap();
            let b = pi_kw_closed_form(&p, tt, t).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn wigner_delta_matches_cohen_route_and_flux() {
        let s = State::gaussian(-2.5, 10.0, 0.1).unwrap();
        let k = CohenKernel::wigner();
        for (tt, t) in [(0.25, -0.2), (0.05, 0.0), (0.4, -0.1)] {
            let a = pi_delta_wigner(&s, tt, t).unwrap();
            let b = pi_delta_cohen(&s, &k, tt, t).unwrap();
            assert!((a - b).abs() < 1e-6, "T={tt}: {a} vs {b}");
        }
        let incoming = State::gaussian(-5.0, 10.0, 1.0).unwrap();
        let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-12);
        for tau in [0.3, 0.5, 0.7] {
            let a = pi_delta_wigner(&incoming, tau, 0.0).unwrap();
            let j = flux_at_origin(&incoming, tau, &cfg).unwrap();
            assert!((a - j).abs() < 1e-6, "{a} vs {j}");
        }
    }

    #[test]
    fn wigner_delta_is_covariant_and_can_be_negative() {
        let s = State::gaussian(0.3, -1.0, 0.9).unwrap();
        let g = GridSpec::new(-1.0, 1.0, 9).unwrap();
        let r = covariance_residual(|tt, t| pi_delta_wigner(&s, tt, t), 0.2, -0.35, &g).unwrap();
        assert!(r <= 1e-8, "{r}");
        let a = GaussianPacket::new(0.0, 4.0, 2.0).unwrap();
        let b = GaussianPacket::new(0.0, 10.0, 2.0).unwrap();
        let bf = find_backflow_state(a, b, 0.0).unwrap();
        let v = pi_delta_wigner(&bf.state, 0.0, 0.0).unwrap();
        assert!(v < 0.0, "{v}");
    }

    #[test]
    fn j_tilde_closed_form_matches_spectrogram_route_and_is_covariant() {
        let p = AkParams::new(-1.0, 1.5, 0.9, 0.7).unwrap();
        let s = State::Gaussian(p.packet());
        let k = CohenKernel::spectrogram(p.window(), 1.0);
        for (tt, t) in [(0.2, 0.1), (0.9, -0.4)] {
            let a = pi_j_tilde(&s, &k, tt, t).unwrap();
            let b = pi_j_tilde_closed_form(&p, tt, t).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            assert!((pi_j_tilde(&s, &k, tt - 0.3, t + 0.3).unwrap() - a).abs() <= 1e-8);
        }
        // the spectrogram kernel through the general Cohen route
        let a = pi_delta_cohen(&s, &k, 0.5, 0.1).unwrap();
        let b = pi_kw_closed_form(&p, 0.5, 0.1).unwrap();
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        assert!((pi_delta(&s, &k, 0.0, 0.4).unwrap() - pi_j_tilde(&s, &k, 0.3, 0.1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn j_tilde_decays_like_inverse_time_and_mass_grows_logarithmically() {
        let p = fig1();
        let f = |tt: f64| pi_j_tilde_closed_form(&p, tt, 0.0).unwrap();
        let tail: Vec<f64> = [50.0, 100.0, 200.0].iter().map(|&tt| tt * f(tt)).collect();
        assert!(tail[0] > 0.0 && ((tail[2] - tail[0]) / tail[0]).abs() < 0.05);
        let fit = log_mass_fit(f, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(fit.slope > 0.1 && fit.max_relative_residual < 0.05, "{fit:?}");
    }

    #[test]
    fn csv_layout() {
        let d = ToaDistribution::new(ToaKind::Kijowski, 0.5, GridSpec::new(0.0, 1.0, 3).unwrap(), vec![0.0, 2.0, 0.0]).unwrap();
        assert!((d.norm_estimate - 1.0).abs() < 1e-15);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# kind=kijowski"));
        assert_eq!(lines[1], "T,value,kind,t");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].ends_with(",kijowski,5.0000000000000000e-1"));
    }
}
