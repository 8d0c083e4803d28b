//! Free Gaussian wave packets and their superpositions in position, momentum
//! and energy representation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_pieces, uniform_breaks};
use crate::numerics::{GridSpec, QuadratureConfig, GAUSSIAN_CUTOFF};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::invalid(format!("hbar must be positive and finite (got {hbar})")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be positive and finite (got {mass})")));
        }
        Ok(PhysicalConstants { hbar, mass })
    }

    /// Planck's constant `h = 2πħ`.
    pub fn h(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    pub fn is_atomic(&self) -> bool {
        self.hbar == 1.0 && self.mass == 1.0
    }

    pub(crate) fn require_atomic(&self, what: &str) -> Result<()> {
        if self.is_atomic() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} is only defined for hbar = mass = 1")))
        }
    }
}

/// Minimum-uncertainty packet at `t = 0`:
/// `ψ(x,0) ∝ e^{ik0(x-x0)} e^{-(x-x0)²/δ²}`, so `|ψ|²` has standard deviation `δ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub x0: f64,
    pub k0: f64,
    pub delta: f64,
    pub constants: PhysicalConstants,
}

impl GaussianPacket {
    pub fn new(x0: f64, k0: f64, delta: f64) -> Result<Self> {
        Self::with_constants(x0, k0, delta, PhysicalConstants::default())
    }

    pub fn with_constants(x0: f64, k0: f64, delta: f64, constants: PhysicalConstants) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive and finite (got {delta})")));
        }
        if !(x0.is_finite() && k0.is_finite()) {
            return Err(Error::invalid("x0 and k0 must be finite"));
        }
        PhysicalConstants::new(constants.hbar, constants.mass)?;
        Ok(GaussianPacket { x0, k0, delta, constants })
    }

    fn a_t(&self, t: f64) -> Complex64 {
        Complex64::new(self.delta * self.delta, 2.0 * self.constants.hbar * t / self.constants.mass)
    }

    /// `(2δ²/π)^{1/4} e^{-k0²δ²/4} a_t^{-1/2} exp([k0δ²/2 + i(x-x0)]² / a_t)`, `a_t = δ² + 2iħt/m`.
    pub fn psi_x(&self, x: f64, t: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let a = self.a_t(t);
        let b = Complex64::new(self.k0 * d2 / 2.0, x - self.x0);
        let pref = (2.0 * d2 / PI).powf(0.25) * (-self.k0 * self.k0 * d2 / 4.0).exp();
        pref / a.sqrt() * (b * b / a).exp()
    }

    /// `∂ψ/∂x`.
    pub fn dpsi_x(&self, x: f64, t: f64) -> Complex64 {
        let d2 = self.delta * self.delta;
        let b = Complex64::new(self.k0 * d2 / 2.0, x - self.x0);
        self.psi_x(x, t) * 2.0 * I * b / self.a_t(t)
    }

    /// `ψ̃(p,t) = (2πħ)^{-1/2} ∫ e^{-ipx/ħ} ψ(x,t) dx`.
    pub fn psi_p(&self, p: f64, t: f64) -> Complex64 {
        let hbar = self.constants.hbar;
        let d2 = self.delta * self.delta;
        let q = p / hbar - self.k0;
        let mag = (2.0 * PI * hbar).powf(-0.5) * (2.0 / (PI * d2)).powf(0.25) * (PI * d2).sqrt() * (-d2 * q * q / 4.0).exp();
        let phase = -p * self.x0 / hbar - p * p * t / (2.0 * self.constants.mass * hbar);
        Complex64::from_polar(mag, phase)
    }

    /// Centre and 1/e half-width of `|ψ(x,t)|`.
    pub fn position_envelope(&self, t: f64) -> (f64, f64) {
        let c = &self.constants;
        let d2 = self.delta * self.delta;
        let v = c.hbar * t / c.mass;
        (self.x0 + self.k0 * v, (d2 * d2 + 4.0 * v * v).sqrt() / self.delta)
    }

    /// Centre and 1/e half-width of `|ψ̃(p)|`.
    pub fn momentum_envelope(&self) -> (f64, f64) {
        let hbar = self.constants.hbar;
        (hbar * self.k0, 2.0 * hbar / self.delta)
    }
}

/// `Σ c_i ψ_i` with packets sharing physical constants.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSuperposition {
    pub terms: Vec<(Complex64, GaussianPacket)>,
}

impl StateSuperposition {
    pub fn new(terms: Vec<(Complex64, GaussianPacket)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("superposition needs at least one term"));
        }
        let c0 = terms[0].1.constants;
        if terms.iter().any(|(_, p)| p.constants != c0) {
            return Err(Error::invalid("all superposed packets must share hbar and mass"));
        }
        if terms.iter().any(|(c, _)| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(StateSuperposition { terms })
    }

    /// `⟨ψ|ψ⟩` from the analytic pairwise overlaps.
    pub fn norm_squared(&self) -> f64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (ci, pi) in &self.terms {
            for (cj, pj) in &self.terms {
                s += ci.conj() * cj * overlap(pi, pj);
            }
        }
        s.re
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n2 = self.norm_squared();
        if n2.is_nan() || n2 <= 1e-300 {
            return Err(Error::invalid("superposition has zero norm"));
        }
        let s = 1.0 / n2.sqrt();
        for (c, _) in self.terms.iter_mut() {
            *c *= s;
        }
        Ok(self)
    }
}

/// `⟨a|b⟩` for two packets at equal times (time independent under free motion).
pub fn overlap(a: &GaussianPacket, b: &GaussianPacket) -> Complex64 {
    // Gaussian integral in momentum space: ψ̃_a* ψ̃_b is exp of a quadratic in p
    let hbar = a.constants.hbar;
    let (da2, db2) = (a.delta * a.delta, b.delta * b.delta);
    let amp = |d2: f64| (2.0 * PI * hbar).powf(-0.5) * (2.0 / (PI * d2)).powf(0.25) * (PI * d2).sqrt();
    // exponent = -α p² + β p + γ in units of k = p/ħ
    let alpha = (da2 + db2) / 4.0;
    let beta = Complex64::new((da2 * a.k0 + db2 * b.k0) / 2.0, a.x0 - b.x0);
    let gamma = -(da2 * a.k0 * a.k0 + db2 * b.k0 * b.k0) / 4.0;
    let integral = (PI / alpha).sqrt() * (beta * beta / (4.0 * alpha) + gamma).exp() * hbar;
    amp(da2) * amp(db2) * integral
}

/// A particle state: a single packet or a superposition of packets.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Gaussian(GaussianPacket),
    Superposition(StateSuperposition),
}

impl From<GaussianPacket> for State {
    fn from(p: GaussianPacket) -> Self {
        State::Gaussian(p)
    }
}

impl State {
    pub fn gaussian(x0: f64, k0: f64, delta: f64) -> Result<Self> {
        Ok(State::Gaussian(GaussianPacket::new(x0, k0, delta)?))
    }

    /// Normalized superposition.
    pub fn superposition(terms: Vec<(Complex64, GaussianPacket)>) -> Result<Self> {
        Ok(State::Superposition(StateSuperposition::new(terms)?.normalize()?))
    }

    pub fn constants(&self) -> PhysicalConstants {
        match self {
            State::Gaussian(p) => p.constants,
            State::Superposition(s) => s.terms[0].1.constants,
        }
    }

    fn packets(&self) -> Vec<(Complex64, GaussianPacket)> {
        match self {
            State::Gaussian(p) => vec![(Complex64::new(1.0, 0.0), *p)],
            State::Superposition(s) => s.terms.clone(),
        }
    }

    pub fn psi_x(&self, x: f64, t: f64) -> Complex64 {
        match self {
            State::Gaussian(p) => p.psi_x(x, t),
            State::Superposition(s) => s.terms.iter().map(|(c, p)| c * p.psi_x(x, t)).sum(),
        }
    }

    pub fn dpsi_x(&self, x: f64, t: f64) -> Complex64 {
        match self {
            State::Gaussian(p) => p.dpsi_x(x, t),
            State::Superposition(s) => s.terms.iter().map(|(c, p)| c * p.dpsi_x(x, t)).sum(),
        }
    }

    pub fn psi_p(&self, p: f64, t: f64) -> Complex64 {
        match self {
            State::Gaussian(g) => g.psi_p(p, t),
            State::Superposition(s) => s.terms.iter().map(|(c, g)| c * g.psi_p(p, t)).sum(),
        }
    }

    /// Interval outside which `|ψ(x,t)|` is below `1e-16` of each term's peak.
    pub fn position_support(&self, t: f64) -> (f64, f64) {
        envelope_union(self.packets().iter().map(|(_, p)| p.position_envelope(t)))
    }

    /// Interval outside which `|ψ̃(p)|` is below `1e-16` of each term's peak.
    pub fn momentum_support(&self) -> (f64, f64) {
        envelope_union(self.packets().iter().map(|(_, p)| p.momentum_envelope()))
    }

    /// Interval outside which `|ψ̃(p)|` is below `1e-16` of each term's peak, so
    /// that products with the peak amplitude are negligible too.
    pub(crate) fn momentum_density_support(&self) -> (f64, f64) {
        let r = GAUSSIAN_CUTOFF / std::f64::consts::SQRT_2;
        self.packets().iter().map(|(_, p)| p.momentum_envelope()).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), (c, w)| (lo.min(c - r * w), hi.max(c + r * w)),
        )
    }

    /// Narrowest position-amplitude width among the terms at time `t`.
    pub fn min_position_width(&self, t: f64) -> f64 {
        self.packets().iter().map(|(_, p)| p.position_envelope(t).1).fold(f64::INFINITY, f64::min)
    }

    /// Smallest packet width `δ` among the terms.
    pub fn min_delta(&self) -> f64 {
        self.packets().iter().map(|(_, p)| p.delta).fold(f64::INFINITY, f64::min)
    }

    /// Narrowest momentum-amplitude width among the terms.
    pub fn min_momentum_width(&self) -> f64 {
        self.packets().iter().map(|(_, p)| p.momentum_envelope().1).fold(f64::INFINITY, f64::min)
    }

    /// Largest distance between the initial centres of two terms.
    pub(crate) fn x0_spread(&self) -> f64 {
        let xs: Vec<f64> = self.packets().iter().map(|(_, p)| p.x0).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    pub fn norm_squared(&self) -> f64 {
        match self {
            State::Gaussian(_) => 1.0,
            State::Superposition(s) => s.norm_squared(),
        }
    }

    /// `⟨x⟩(t)` from the analytic moments of each term (single packets only).
    pub fn mean_position(&self, t: f64) -> Option<f64> {
        match self {
            State::Gaussian(p) => Some(p.position_envelope(t).0),
            State::Superposition(_) => None,
        }
    }

    /// `∫_{-∞}^{0} |ψ̃(p)|² dp` (free motion conserves it).
    pub fn negative_momentum_mass(&self, cfg: &QuadratureConfig) -> Result<f64> {
        let (lo, hi) = self.momentum_support();
        if lo >= 0.0 {
            return Ok(0.0);
        }
        let hi = hi.min(0.0);
        integrate_pieces(|p: f64| self.psi_p(p, 0.0).norm_sqr(), &uniform_breaks(lo, hi, 8), cfg).map(|e| e.value)
    }

    /// Parses the JSON state descriptor.
    pub fn from_json(text: &str) -> Result<Self> {
        let d: StateDescriptor = serde_json::from_str(text).map_err(|e| Error::invalid(format!("state descriptor: {e}")))?;
        d.build()
    }

    pub fn to_descriptor(&self) -> StateDescriptor {
        let c = self.constants();
        match self {
            State::Gaussian(p) => StateDescriptor {
                kind: StateKind::Gaussian,
                x0: Some(p.x0),
                k0: Some(p.k0),
                delta: Some(p.delta),
                terms: Vec::new(),
                hbar: c.hbar,
                mass: c.mass,
            },
            State::Superposition(s) => StateDescriptor {
                kind: StateKind::Superposition,
                x0: None,
                k0: None,
                delta: None,
                terms: s
                    .terms
                    .iter()
                    .map(|(c, p)| TermDescriptor {
                        coefficient: [c.re, c.im],
                        x0: p.x0,
                        k0: p.k0,
                        delta: p.delta,
                    })
                    .collect(),
                hbar: c.hbar,
                mass: c.mass,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_descriptor()).expect("descriptor serializes")
    }
}

fn envelope_union(envs: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    envs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (c, w)| {
        (lo.min(c - GAUSSIAN_CUTOFF * w), hi.max(c + GAUSSIAN_CUTOFF * w))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Gaussian,
    Superposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDescriptor {
    /// `[re, im]`
    pub coefficient: [f64; 2],
    pub x0: f64,
    pub k0: f64,
    pub delta: f64,
}

/// JSON form: `{"type":"gaussian","x0":…,"k0":…,"delta":…,"hbar":1,"mass":1}` or
/// `{"type":"superposition","terms":[{"coefficient":[re,im],"x0":…,"k0":…,"delta":…}],…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDescriptor {
    #[serde(rename = "type")]
    pub kind: StateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermDescriptor>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl StateDescriptor {
    pub fn build(&self) -> Result<State> {
        let c = PhysicalConstants::new(self.hbar, self.mass)?;
        match self.kind {
            StateKind::Gaussian => {
                let get = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::invalid(format!("gaussian state needs `{name}`")));
                let p = GaussianPacket::with_constants(get(self.x0, "x0")?, get(self.k0, "k0")?, get(self.delta, "delta")?, c)?;
                Ok(State::Gaussian(p))
            }
            StateKind::Superposition => {
                let terms = self
                    .terms
                    .iter()
                    .map(|t| Ok((Complex64::new(t.coefficient[0], t.coefficient[1]), GaussianPacket::with_constants(t.x0, t.k0, t.delta, c)?)))
                    .collect::<Result<Vec<_>>>()?;
                State::superposition(terms)
            }
        }
    }
}

/// `⟨E,α|ψ(t)⟩ = (m/p_E)^{1/2} ψ̃(α p_E, t)` sampled on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAmplitudes {
    pub grid: GridSpec,
    pub amps_plus: Vec<Complex64>,
    pub amps_minus: Vec<Complex64>,
    mass: f64,
}

/// `⟨E,α|ψ(t)⟩` for `α = ±1`. Diverges like `E^{-1/4}` at `E = 0` unless `ψ̃(0) = 0`.
pub fn energy_amplitude(state: &State, energy: f64, alpha: f64, t: f64) -> Complex64 {
    let m = state.constants().mass;
    let p = (2.0 * m * energy).sqrt();
    state.psi_p(alpha.signum() * p, t) * (m / p).sqrt()
}

/// Samples the energy amplitudes on `grid`. The `E = 0` node stores the
/// (divergent) value as zero; [`EnergyAmplitudes::norm_estimate`] integrates in
/// `p = √(2mE)` where the Jacobian cancels that divergence.
pub fn energy_amplitudes(state: &State, t: f64, grid: &GridSpec) -> Result<EnergyAmplitudes> {
    grid.validate("energy grid")?;
    if grid.min < 0.0 {
        return Err(Error::InvalidGrid {
            field: "energy grid".into(),
            reason: format!("min must be >= 0 (got {})", grid.min),
        });
    }
    let m = state.constants().mass;
    let ps: Vec<f64> = grid.points().iter().map(|e| (2.0 * m * e).sqrt()).collect();
    let max_dp = ps.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let width = state.min_momentum_width();
    if max_dp > 0.5 * width {
        return Err(Error::GridTooCoarse(format!(
            "momentum spacing {max_dp:.3e} exceeds half the packet's momentum width {width:.3e}"
        )));
    }
    let amp = |alpha: f64| -> Vec<Complex64> {
        grid.points()
            .iter()
            .map(|&e| if e == 0.0 { Complex64::new(0.0, 0.0) } else { energy_amplitude(state, e, alpha, t) })
            .collect()
    };
    Ok(EnergyAmplitudes {
        grid: *grid,
        amps_plus: amp(1.0),
        amps_minus: amp(-1.0),
        mass: m,
    })
}

impl EnergyAmplitudes {
    /// `Σ_α ∫ dE |⟨E,α|ψ⟩|²` by the trapezoid rule in `p = √(2mE)`.
    pub fn norm_estimate(&self) -> f64 {
        let pts = self.grid.points();
        let ps: Vec<f64> = pts.iter().map(|e| (2.0 * self.mass * e).sqrt()).collect();
        let dens = |amps: &[Complex64]| -> Vec<f64> {
            // |ψ̃(p)|² = (p/m) |⟨E|ψ⟩|²
            amps.iter().zip(&ps).map(|(a, p)| a.norm_sqr() * p / self.mass).collect()
        };
        let mut total = 0.0;
        for amps in [&self.amps_plus, &self.amps_minus] {
            let d = dens(amps);
            for i in 1..ps.len() {
                total += 0.5 * (d[i] + d[i - 1]) * (ps[i] - ps[i - 1]);
            }
        }
        total
    }

    /// Grid energy with the largest `|⟨E,+|ψ⟩|²`.
    pub fn argmax_plus(&self) -> f64 {
        let (i, _) = self
            .amps_plus
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bv), (i, a)| if a.norm_sqr() > bv { (i, a.norm_sqr()) } else { (bi, bv) });
        self.grid.point(i)
    }
}

/// Probability current at `x = 0` from the momentum double integral
/// `(1/hm) ∬ dp′dp″ (p′+p″)/2 ψ̃(p′)ψ̃*(p″)`, which factorizes into
/// `(1/hm) Re[(∫ p ψ̃ dp) (∫ ψ̃ dp)*]`.
pub fn flux_at_origin(state: &State, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let c = state.constants();
    let (lo, hi) = state.momentum_support();
    let breaks = uniform_breaks(lo, hi, 16);
    let s0 = integrate_pieces(|p: f64| state.psi_p(p, t), &breaks, cfg)?.value;
    let s1 = integrate_pieces(|p: f64| state.psi_p(p, t) * p, &breaks, cfg)?.value;
    Ok((s1 * s0.conj()).re / (c.h() * c.mass))
}

/// `(ħ/m) Im(ψ* ∂ψ/∂x)` at `x = 0` from the analytic derivative.
pub fn flux_at_origin_position_space(state: &State, t: f64) -> f64 {
    let c = state.constants();
    c.hbar / c.mass * (state.psi_x(0.0, t).conj() * state.dpsi_x(0.0, t)).im
}

/// Outcome of the backflow search.
#[derive(Debug, Clone)]
pub struct BackflowState {
    pub state: State,
    pub phase: f64,
    pub ratio: f64,
    /// Flux at the origin at `t` (negative when backflow was found).
    pub flux: f64,
}

/// Scans `ψ_1 + r e^{iφ} ψ_2` over `φ ∈ [0, 2π)` and log-spaced `r ∈ [0.1, 10]`
/// (64 × 64) for the most negative normalized current at the origin at time `t`.
pub fn find_backflow_state(first: GaussianPacket, second: GaussianPacket, t: f64) -> Result<BackflowState> {
    let n = 64;
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..n {
        let phase = 2.0 * PI * i as f64 / n as f64;
        for j in 0..n {
            let ratio = 10f64.powf(-1.0 + 2.0 * j as f64 / (n - 1) as f64);
            let st = StateSuperposition::new(vec![(Complex64::new(1.0, 0.0), first), (Complex64::from_polar(ratio, phase), second)])?;
            let norm = st.norm_squared();
            let j_val = flux_at_origin_position_space(&State::Superposition(st), t) / norm;
            if best.is_none_or(|(_, _, b)| j_val < b) {
                best = Some((phase, ratio, j_val));
            }
        }
    }
    let (phase, ratio, flux) = best.expect("non-empty scan");
    let state = State::superposition(vec![(Complex64::new(1.0, 0.0), first), (Complex64::from_polar(ratio, phase), second)])?;
    Ok(BackflowState { state, phase, ratio, flux })
}
