//! Energy and time-of-arrival measured jointly by two pointers coupled to the
//! free particle: the joint reading `ρ(μE,μT)`, its factorization into an
//! apparatus window `W_{μE}` and the energy-time Wigner matrix `w_{αα'}`, and
//! the time marginal.
//!
//! The apparatus amplitude `ψ_ap(a,b)` is written in the retrodictive
//! (`a = ε_Ei`) and predictive (`b = ε_Ef`) energy-error basis. It vanishes for
//! `a < b`, which keeps the pointer momentum `π_T = a - b` non-negative.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::numerics::dft::{dft_forward, dft_inverse};
use crate::numerics::erf::erfc;
use crate::numerics::quadrature::{gauss_legendre, integrate_fallible, integrate_pieces, uniform_breaks};
use crate::numerics::{trapezoid, GridSpec, QuadratureConfig, GAUSSIAN_CUTOFF};
use crate::state::{energy_amplitude, State};
use crate::toa::{ToaDistribution, ToaKind};

/// `ψ_ap(a,b) = N g_i(a) g_f(b) Θ(a-b)` with Gaussian `g` of amplitude width
/// `2·spread` (so `|g|²` has standard deviation `spread`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtApparatusState {
    pub spread_i: f64,
    pub spread_f: f64,
    #[serde(default)]
    pub center_i: f64,
    #[serde(default)]
    pub center_f: f64,
}

impl EtApparatusState {
    /// Gaussians centred at the origin.
    pub fn new(spread_i: f64, spread_f: f64) -> Result<Self> {
        Self::with_centers(spread_i, spread_f, 0.0, 0.0)
    }

    pub fn with_centers(spread_i: f64, spread_f: f64, center_i: f64, center_f: f64) -> Result<Self> {
        let s = EtApparatusState {
            spread_i,
            spread_f,
            center_i,
            center_f,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("spread_i", self.spread_i), ("spread_f", self.spread_f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0 (got {v})")));
            }
        }
        if !(self.center_i.is_finite() && self.center_f.is_finite()) {
            return Err(Error::invalid("apparatus centres must be finite"));
        }
        if self.kept_mass() < 1e-12 {
            return Err(Error::invalid("apparatus has no weight on a >= b"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: EtApparatusState =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("apparatus descriptor: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("apparatus serializes")
    }

    /// Weight of the untruncated product on `a ≥ b`.
    pub fn kept_mass(&self) -> f64 {
        let s = (self.spread_i.powi(2) + self.spread_f.powi(2)).sqrt();
        0.5 * erfc(-(self.center_i - self.center_f) / (std::f64::consts::SQRT_2 * s))
    }

    fn norm_sq(&self) -> f64 {
        1.0 / self.kept_mass()
    }

    fn gauss(x: f64, c: f64, s: f64) -> f64 {
        (2.0 * PI * s * s).powf(-0.25) * (-(x - c).powi(2) / (4.0 * s * s)).exp()
    }

    pub(crate) fn g_i(&self, a: f64) -> f64 {
        Self::gauss(a, self.center_i, self.spread_i)
    }

    pub(crate) fn g_f(&self, b: f64) -> f64 {
        Self::gauss(b, self.center_f, self.spread_f)
    }

    /// `∫_{-∞}^{z} g_f(b)² db`.
    fn cumulative_f(&self, z: f64) -> f64 {
        0.5 * erfc(-(z - self.center_f) / (std::f64::consts::SQRT_2 * self.spread_f))
    }

    /// `ψ_ap(a,b)`.
    pub fn amplitude(&self, a: f64, b: f64) -> Complex64 {
        if a < b {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(self.norm_sq().sqrt() * self.g_i(a) * self.g_f(b), 0.0)
    }

    /// Distance from the centre beyond which `g_i` is below `1e-16` of its peak.
    fn radius_i(&self) -> f64 {
        2.0 * GAUSSIAN_CUTOFF * self.spread_i
    }

    fn radius_f(&self) -> f64 {
        2.0 * GAUSSIAN_CUTOFF * self.spread_f
    }
}

/// Upper energy limit covering the state's energy support plus the largest
/// upward shift the apparatus imparts.
pub fn default_energy_cutoff(state: &State, app: &EtApparatusState) -> f64 {
    let (pl, ph) = state.momentum_support();
    let es = pl.abs().max(ph.abs()).powi(2) / (2.0 * state.constants().mass);
    es + app.radius_i() + app.radius_f() + app.center_i.abs() + app.center_f.abs()
}

/// Probability that the particle's energy exceeds `e_max`.
pub fn energy_tail_mass(state: &State, e_max: f64) -> Result<f64> {
    let pc = (2.0 * state.constants().mass * e_max.max(0.0)).sqrt();
    let (pl, ph) = state.momentum_support();
    let cfg = QuadratureConfig::default().with_tol(1e-16, 1e-8);
    let mut tail = 0.0;
    if ph > pc {
        tail += integrate_pieces(|p: f64| state.psi_p(p, 0.0).norm_sqr(), &uniform_breaks(pc.max(pl), ph, 8), &cfg)?.value;
    }
    if pl < -pc {
        tail += integrate_pieces(|p: f64| state.psi_p(p, 0.0).norm_sqr(), &uniform_breaks(pl, (-pc).min(ph), 8), &cfg)?.value;
    }
    Ok(tail)
}

fn check_cutoff(state: &State, e_max: f64) -> Result<()> {
    let tail_mass = energy_tail_mass(state, e_max)?;
    if tail_mass > 1e-8 {
        return Err(Error::EnergyCutoffTooLow { tail_mass });
    }
    Ok(())
}

/// `⟨a|ϱ_ap(μE)|b⟩ = ∫_0^{E_max} dE ψ_ap(a, μE-E) ψ_ap*(b, μE-E) Θ(E-μE+a) Θ(E-μE+b)`.
pub fn rho_ap_window(app: &EtApparatusState, mu_e: f64, a: f64, b: f64, e_max: f64) -> Complex64 {
    // b' = μE - E runs over [μE - E_max, μE] and must not exceed a or b
    let hi = app.cumulative_f(a.min(b).min(mu_e));
    let lo = app.cumulative_f(mu_e - e_max);
    let f = (hi - lo).max(0.0);
    Complex64::new(app.norm_sq() * app.g_i(a) * app.g_i(b) * f, 0.0)
}

/// `W_{μE}(ε,τ) = (1/h) ∫dy e^{-iτy/ħ} ⟨ε-y/2|ϱ_ap(μE)|ε+y/2⟩`.
pub fn apparatus_window(app: &EtApparatusState, hbar: f64, mu_e: f64, eps: f64, tau: f64, e_max: f64) -> Result<f64> {
    let r = 2.0 * app.radius_i();
    let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-11);
    let f = |y: f64| rho_ap_window(app, mu_e, eps - 0.5 * y, eps + 0.5 * y, e_max) * Complex64::from_polar(1.0, -tau * y / hbar);
    let breaks: Vec<f64> = uniform_breaks(-r, 0.0, 16).into_iter().chain(uniform_breaks(0.0, r, 16).into_iter().skip(1)).collect();
    let v = integrate_pieces(f, &breaks, &cfg)?.value;
    Ok(v.re / (2.0 * PI * hbar))
}

fn amp(state: &State, e: f64, alpha: i8, t: f64) -> Complex64 {
    if e <= 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        energy_amplitude(state, e, alpha as f64, t)
    }
}

fn check_alpha(alpha: i8) -> Result<()> {
    if alpha == 1 || alpha == -1 {
        Ok(())
    } else {
        Err(Error::invalid(format!("degeneracy index must be +1 or -1 (got {alpha})")))
    }
}

/// Largest energy at which the state's energy amplitudes are above `1e-16` of their peak.
fn energy_support(state: &State) -> f64 {
    let (pl, ph) = state.momentum_support();
    pl.abs().max(ph.abs()).powi(2) / (2.0 * state.constants().mass)
}

/// Largest energy at which the state's energy density is above `1e-16` of its peak.
fn energy_density_support(state: &State) -> f64 {
    let (pl, ph) = state.momentum_density_support();
    pl.abs().max(ph.abs()).powi(2) / (2.0 * state.constants().mass)
}

/// `w_{αα'}(E,T) = (1/h) ∫dy e^{iTy/ħ} ⟨E-y/2,α|ψ(t)⟩⟨ψ(t)|E+y/2,α'⟩ Θ(E-y/2) Θ(E+y/2)`.
///
/// The two halves of the `y` range are integrated in `v = (2mE')^{1/4}`
/// (`E'` the argument that reaches zero), which makes the integrand smooth.
pub fn et_wigner_matrix(state: &State, alpha: i8, alpha_p: i8, e: f64, t_arrival: f64, t: f64) -> Result<Complex64> {
    check_alpha(alpha)?;
    check_alpha(alpha_p)?;
    if e < 0.0 {
        return Err(Error::invalid(format!("energy must be >= 0 (got {e})")));
    }
    let c = state.constants();
    let (hbar, m) = (c.hbar, c.mass);
    let e_s = energy_density_support(state);
    if e == 0.0 || e >= e_s {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // both E' and 2E - E' must lie below e_s
    let e_floor = (2.0 * e - e_s).max(0.0);
    let to_v = |x: f64| (2.0 * m * x).powf(0.25);
    let (v_lo, v_e) = (to_v(e_floor), to_v(e));
    let (xl, xh) = state.position_support(0.0);
    let phase_span = 2.0 * (t_arrival.abs() + t.abs()) * (e - e_floor) / hbar
        + xl.abs().max(xh.abs()) * ((2.0 * m * e).sqrt() - (2.0 * m * e_floor).sqrt()) / hbar;
    let pieces = 4 + (phase_span / (6.0 * PI)).ceil() as usize;
    let cfg = QuadratureConfig::default().with_tol(1e-10, 1e-7);
    // a(E') dE' = (2v²/√m) ψ̃(αv²) dv with E' = v⁴/(2m)
    let jac = |v: f64, a: i8| 2.0 * v * v / m.sqrt() * state.psi_p(a as f64 * v * v, t);
    let first = |v: f64| {
        let e1 = v.powi(4) / (2.0 * m);
        jac(v, alpha) * amp(state, 2.0 * e - e1, alpha_p, t).conj() * Complex64::from_polar(1.0, 2.0 * t_arrival * (e - e1) / hbar)
    };
    let second = |v: f64| {
        let e2 = v.powi(4) / (2.0 * m);
        amp(state, 2.0 * e - e2, alpha, t) * jac(v, alpha_p).conj() * Complex64::from_polar(1.0, 2.0 * t_arrival * (e2 - e) / hbar)
    };
    let breaks = uniform_breaks(v_lo, v_e, pieces);
    let i1 = integrate_pieces(first, &breaks, &cfg)?.value;
    let i2 = integrate_pieces(second, &breaks, &cfg)?.value;
    Ok((i1 + i2) * 2.0 / c.h())
}

/// `Σ_α ∫_0^∞ dE w_{αα}(E,T)`, integrated in `u = √E`.
pub fn et_wigner_time_marginal(state: &State, t_arrival: f64, t: f64) -> Result<f64> {
    let u_max = energy_density_support(state).sqrt();
    let cfg = QuadratureConfig::default().with_tol(1e-8, 1e-7);
    let f = |u: f64| -> Result<f64> {
        let e = u * u;
        let mut s = 0.0;
        for alpha in [1i8, -1] {
            s += et_wigner_matrix(state, alpha, alpha, e, t_arrival, t)?.re;
        }
        Ok(2.0 * u * s)
    };
    Ok(integrate_fallible(f, &uniform_breaks(0.0, u_max, 16), &cfg)?.value)
}

/// `S_kl = ∫_{-1}^{z_k} L_l(z) dz` for the Lagrange basis on the Gauss-Legendre
/// nodes `z`: partial integrals from the panel start to each node.
fn integration_matrix(z: &[f64]) -> Vec<Vec<f64>> {
    let q = z.len();
    let (zz, ww) = gauss_legendre(q);
    let lagrange = |l: usize, x: f64| {
        (0..q).filter(|&j| j != l).map(|j| (x - z[j]) / (z[l] - z[j])).product::<f64>()
    };
    (0..q)
        .map(|k| {
            let h = 0.5 * (z[k] + 1.0);
            (0..q)
                .map(|l| (0..q).map(|i| h * ww[i] * lagrange(l, -1.0 + h * (zz[i] + 1.0))).sum())
                .collect()
        })
        .collect()
}

/// Quadrature nodes for the direct evaluation at fixed `μE`; only the phase
/// `e^{-iμT E/ħ}` changes with `μT`.
struct DirectNodes {
    hbar: f64,
    pref: f64,
    half_width: f64,
    weights: Vec<f64>,
    partial: Vec<Vec<f64>>,
    /// Per panel: node energies, `g_f²·dE/dv` times the node weight, and the
    /// inner integrand without its phase for `α = ±1`.
    panels: Vec<Panel>,
}

type Panel = (Vec<f64>, Vec<f64>, [Vec<Complex64>; 2]);

const DIRECT_ORDER: usize = 12;

impl DirectNodes {
    fn build(state: &State, app: &EtApparatusState, mu_e: f64, t: f64, e_max: f64, panels: usize) -> Option<Self> {
        let c = state.constants();
        let m = c.mass;
        let e_lo = (mu_e - app.center_i - app.radius_i()).max(0.0);
        let e_hi = (mu_e - app.center_f + app.radius_f()).min(e_max);
        if e_lo >= e_hi {
            return None;
        }
        // E = v⁴/(2m), p = ±v²: a(E) dE = (2v²/√m) ψ̃(±v²) dv
        let to_v = |e: f64| (2.0 * m * e).powf(0.25);
        let (v0, v1) = (to_v(e_lo), to_v(e_hi));
        let (z, w) = gauss_legendre(DIRECT_ORDER);
        let dv = (v1 - v0) / panels as f64;
        let half_width = 0.5 * dv;
        let built = (0..panels)
            .map(|pi| {
                let a = v0 + pi as f64 * dv;
                let mut es = Vec::with_capacity(DIRECT_ORDER);
                let mut ow = Vec::with_capacity(DIRECT_ORDER);
                let mut f: [Vec<Complex64>; 2] = [Vec::with_capacity(DIRECT_ORDER), Vec::with_capacity(DIRECT_ORDER)];
                for k in 0..DIRECT_ORDER {
                    let v = a + half_width * (z[k] + 1.0);
                    let e = v.powi(4) / (2.0 * m);
                    es.push(e);
                    ow.push(half_width * w[k] * app.g_f(mu_e - e).powi(2) * 2.0 * v.powi(3) / m);
                    let common = app.g_i(mu_e - e) * 2.0 * v * v / m.sqrt();
                    f[0].push(common * state.psi_p(v * v, t));
                    f[1].push(common * state.psi_p(-v * v, t));
                }
                (es, ow, f)
            })
            .collect();
        Some(DirectNodes {
            hbar: c.hbar,
            pref: app.norm_sq() / c.h(),
            half_width,
            weights: w,
            partial: integration_matrix(&z),
            panels: built,
        })
    }

    fn eval(&self, mu_t: f64) -> f64 {
        let mut acc = 0.0;
        let mut g = vec![Complex64::new(0.0, 0.0); DIRECT_ORDER];
        let mut running = [Complex64::new(0.0, 0.0); 2];
        for (es, ow, f) in &self.panels {
            let ph: Vec<Complex64> = es.iter().map(|&e| Complex64::from_polar(1.0, -mu_t * e / self.hbar)).collect();
            for bi in 0..2 {
                for ((gk, p), fk) in g.iter_mut().zip(&ph).zip(&f[bi]) {
                    *gk = p * fk;
                }
                for (row, w) in self.partial.iter().zip(ow) {
                    let partial: Complex64 = row.iter().zip(&g).map(|(s, x)| s * x).sum();
                    acc += w * (running[bi] + self.half_width * partial).norm_sqr();
                }
                running[bi] += self.half_width * self.weights.iter().zip(&g).map(|(w, x)| w * x).sum::<Complex64>();
            }
        }
        self.pref * acc
    }
}

/// Builds converged direct-route nodes for one `μE`, checking the `μT` values in `probes`.
fn converged_nodes(
    state: &State,
    app: &EtApparatusState,
    mu_e: f64,
    t: f64,
    e_max: f64,
    probes: &[f64],
) -> Result<Option<DirectNodes>> {
    let mut panels = 16;
    let Some(mut prev) = DirectNodes::build(state, app, mu_e, t, e_max, panels) else {
        return Ok(None);
    };
    while panels < 4096 {
        panels *= 2;
        let next = DirectNodes::build(state, app, mu_e, t, e_max, panels).expect("non-empty range");
        let ok = probes.iter().all(|&mt| {
            let (a, b) = (prev.eval(mt), next.eval(mt));
            (a - b).abs() <= 1e-13 + 1e-10 * b.abs()
        });
        if ok {
            return Ok(Some(next));
        }
        prev = next;
    }
    Err(Error::GridTooCoarse(format!(
        "direct energy-time quadrature did not settle at μE={mu_e} with {panels} panels"
    )))
}

/// `ρ(μE,μT) = (1/h) Σ_α ∫_0^{E_max} dE |∫_0^E dE' e^{-iμT E'/ħ} ψ_ap(μE-E', μE-E) ⟨E',α|ψ(t)⟩|²`.
pub fn rho_et_direct(state: &State, app: &EtApparatusState, mu_e: f64, mu_t: f64, t: f64, e_max: f64) -> Result<f64> {
    app.validate()?;
    check_cutoff(state, e_max)?;
    Ok(converged_nodes(state, app, mu_e, t, e_max, &[mu_t])?.map_or(0.0, |n| n.eval(mu_t)))
}

/// Direct route on a `μE × μT` grid (row-major in `μE`).
pub fn rho_et_direct_grid(
    state: &State,
    app: &EtApparatusState,
    t: f64,
    mu_e_grid: &GridSpec,
    mu_t_grid: &GridSpec,
    e_max: f64,
) -> Result<Vec<f64>> {
    app.validate()?;
    mu_e_grid.validate("muE_grid")?;
    mu_t_grid.validate("muT_grid")?;
    check_cutoff(state, e_max)?;
    let mts = mu_t_grid.points();
    let probes = [mu_t_grid.min, mu_t_grid.max];
    let rows = mu_e_grid
        .points()
        .par_iter()
        .map(|&me| -> Result<Vec<f64>> {
            Ok(match converged_nodes(state, app, me, t, e_max, &probes)? {
                Some(n) => mts.iter().map(|&mt| n.eval(mt)).collect(),
                None => vec![0.0; mts.len()],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.concat())
}

/// Lattice for the window factorization: `y_n = (n - N/2) dy`, `T_l = μT_0 + l dT`,
/// with `dT dy = 2πħ/N`.
struct Lattice {
    n: usize,
    dy: f64,
    dt: f64,
    /// `μT_j` sits at lattice index `j·stride`.
    stride: usize,
}

impl Lattice {
    fn new(y_max: f64, dy_target: f64, hbar: f64, mu_t_step: Option<f64>) -> Self {
        let mut n = ((4.0 * y_max / dy_target).ceil() as usize).next_power_of_two().max(64);
        let dt0 = |n: usize| 2.0 * PI * hbar / (n as f64 * dy_target);
        let (dt, stride) = match mu_t_step {
            Some(step) => {
                while step < dt0(n) {
                    n *= 2;
                }
                let stride = (step / dt0(n)).floor() as usize;
                (step / stride as f64, stride)
            }
            None => (dt0(n), 1),
        };
        Lattice {
            n,
            dy: 2.0 * PI * hbar / (n as f64 * dt),
            dt,
            stride,
        }
    }

    /// Halves `dy` by doubling the period in `T`.
    fn refined(&self, hbar: f64) -> Self {
        let n = 2 * self.n;
        Lattice {
            n,
            dy: 2.0 * PI * hbar / (n as f64 * self.dt),
            dt: self.dt,
            stride: self.stride,
        }
    }

    fn y(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.dy
    }
}

fn alternate(v: &mut [Complex64]) {
    for (i, x) in v.iter_mut().enumerate() {
        if i % 2 == 1 {
            *x = -*x;
        }
    }
}

/// `Σ_α w_{αα}(E, T_l)` on the lattice.
fn wigner_diagonal_row(state: &State, e: f64, t: f64, mu_t0: f64, lat: &Lattice) -> Vec<Complex64> {
    let c = state.constants();
    let mut b: Vec<Complex64> = (0..lat.n)
        .map(|i| {
            let y = lat.y(i);
            let (e1, e2) = (e - 0.5 * y, e + 0.5 * y);
            if e1 <= 0.0 || e2 <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let s: Complex64 = [1i8, -1].iter().map(|&al| amp(state, e1, al, t) * amp(state, e2, al, t).conj()).sum();
            s * Complex64::from_polar(1.0, mu_t0 * y / c.hbar)
        })
        .collect();
    dft_inverse(&mut b);
    let s = lat.dy / c.h() * lat.n as f64;
    alternate(&mut b);
    b.iter_mut().for_each(|x| *x *= s);
    b
}

/// `W_{μE}(ε, τ_m)` on the lattice `τ_m = m dT` (periodic in `m`).
fn window_row(app: &EtApparatusState, hbar: f64, mu_e: f64, eps: f64, e_max: f64, lat: &Lattice) -> Vec<Complex64> {
    let mut r: Vec<Complex64> = (0..lat.n)
        .map(|i| {
            let y = lat.y(i);
            rho_ap_window(app, mu_e, eps - 0.5 * y, eps + 0.5 * y, e_max)
        })
        .collect();
    dft_forward(&mut r);
    alternate(&mut r);
    let s = lat.dy / (2.0 * PI * hbar);
    r.iter_mut().for_each(|x| *x *= s);
    r
}

#[allow(clippy::too_many_arguments)]
fn factored_on_lattice(
    state: &State,
    app: &EtApparatusState,
    t: f64,
    mu_es: &[f64],
    mu_t0: f64,
    n_t: usize,
    e_max: f64,
    lat: &Lattice,
    de: f64,
) -> Vec<f64> {
    let hbar = state.constants().hbar;
    let r = app.radius_i();
    let e_lo = (mu_es.iter().cloned().fold(f64::INFINITY, f64::min) - app.center_i - r).max(0.0);
    let e_hi = (mu_es.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - app.center_i + r).min(energy_support(state));
    if e_lo >= e_hi {
        return vec![0.0; mu_es.len() * n_t];
    }
    let n_e = ((e_hi - e_lo) / de).ceil() as usize + 1;
    let partials: Vec<Vec<f64>> = (0..n_e)
        .into_par_iter()
        .map(|k| {
            let e = e_lo + k as f64 * de;
            let mut out = vec![0.0; mu_es.len() * n_t];
            let active: Vec<usize> = (0..mu_es.len()).filter(|&i| (mu_es[i] - e - app.center_i).abs() <= r).collect();
            if active.is_empty() {
                return out;
            }
            let mut w = wigner_diagonal_row(state, e, t, mu_t0, lat);
            dft_forward(&mut w);
            for i in active {
                let mut win = window_row(app, hbar, mu_es[i], mu_es[i] - e, e_max, lat);
                dft_forward(&mut win);
                let mut conv: Vec<Complex64> = win.iter().zip(&w).map(|(a, b)| a * b).collect();
                dft_inverse(&mut conv);
                for j in 0..n_t {
                    out[i * n_t + j] = de * lat.dt * conv[(j * lat.stride) % lat.n].re;
                }
            }
            out
        })
        .collect();
    let mut total = vec![0.0; mu_es.len() * n_t];
    for p in partials {
        for (a, b) in total.iter_mut().zip(p) {
            *a += b;
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn factored_impl(
    state: &State,
    app: &EtApparatusState,
    t: f64,
    mu_es: &[f64],
    mu_t0: f64,
    mu_t_step: Option<f64>,
    n_t: usize,
    e_max: f64,
) -> Result<Vec<f64>> {
    app.validate()?;
    check_cutoff(state, e_max)?;
    let c = state.constants();
    // the Θ(E ± y/2) edges of w are only harmless when ⟨E≈0|ψ⟩ vanishes
    let (pl, ph) = state.momentum_support();
    if pl < 0.0 && ph > 0.0 {
        let peak = state.psi_p(0.5 * (pl + ph), t).norm();
        let at_zero = state.psi_p(0.0, t).norm();
        if at_zero > 1e-10 * peak.max(1e-300) {
            return Err(Error::Unsupported(
                "window factorization needs an energy amplitude that vanishes at E = 0".into(),
            ));
        }
    }
    let mu_t_max = mu_t0.abs().max((mu_t0 + mu_t_step.unwrap_or(0.0) * (n_t as f64 - 1.0)).abs());
    let (xl, xh) = state.position_support(t);
    let p_ref = 0.25 * pl.abs().max(ph.abs());
    let s_min = app.spread_i.min(app.spread_f);
    let t_scale = mu_t_max + xl.abs().max(xh.abs()) * c.mass / p_ref + 4.0 * c.hbar / s_min;
    let dy = (PI * c.hbar / (2.0 * t_scale)).min(0.25 * s_min);
    let y_max = energy_support(state).max(2.0 * app.radius_i());
    let de = (app.spread_i / 6.0).min(PI * c.hbar / (2.0 * t_scale));
    let coarse = Lattice::new(y_max, dy, c.hbar, mu_t_step);
    let fine = coarse.refined(c.hbar);
    let a = factored_on_lattice(state, app, t, mu_es, mu_t0, n_t, e_max, &coarse, de);
    let b = factored_on_lattice(state, app, t, mu_es, mu_t0, n_t, e_max, &fine, de);
    // the kink of ϱ_ap along a = b leaves an O(dy²) trapezoid error
    Ok(a.iter().zip(&b).map(|(x, y)| (4.0 * y - x) / 3.0).collect())
}

/// `ρ(μE,μT) = Σ_α ∫_0^∞dE ∫dT W_{μE}(μE-E, μT-T) w_{αα}(E,T)`. Only the diagonal
/// `α = α'` blocks of the Wigner matrix enter.
pub fn rho_et_factored(state: &State, app: &EtApparatusState, mu_e: f64, mu_t: f64, t: f64) -> Result<f64> {
    let e_max = default_energy_cutoff(state, app);
    Ok(factored_impl(state, app, t, &[mu_e], mu_t, None, 1, e_max)?[0])
}

/// Window route on a `μE × μT` grid (row-major in `μE`).
pub fn rho_et_factored_grid(
    state: &State,
    app: &EtApparatusState,
    t: f64,
    mu_e_grid: &GridSpec,
    mu_t_grid: &GridSpec,
) -> Result<Vec<f64>> {
    mu_e_grid.validate("muE_grid")?;
    mu_t_grid.validate("muT_grid")?;
    let e_max = default_energy_cutoff(state, app);
    factored_impl(
        state,
        app,
        t,
        &mu_e_grid.points(),
        mu_t_grid.min,
        Some(mu_t_grid.spacing()),
        mu_t_grid.n,
        e_max,
    )
}

/// Tabulated `ρ(μE,μT)` with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EtJointDistribution {
    pub mu_e_grid: GridSpec,
    pub mu_t_grid: GridSpec,
    /// Row-major in `μE`.
    pub values: Vec<f64>,
    pub state_descriptor: String,
    pub apparatus_descriptor: String,
    pub t: f64,
}

/// `μE` marginal of an [`EtJointDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMarginal {
    pub mu_e_grid: GridSpec,
    pub values: Vec<f64>,
    pub norm_estimate: f64,
}

/// Joint distribution on a grid through the direct route.
pub fn et_joint_distribution(
    state: &State,
    app: &EtApparatusState,
    t: f64,
    mu_e_grid: &GridSpec,
    mu_t_grid: &GridSpec,
) -> Result<EtJointDistribution> {
    let e_max = default_energy_cutoff(state, app);
    let values = rho_et_direct_grid(state, app, t, mu_e_grid, mu_t_grid, e_max)?;
    Ok(EtJointDistribution {
        mu_e_grid: *mu_e_grid,
        mu_t_grid: *mu_t_grid,
        values,
        state_descriptor: state.to_json(),
        apparatus_descriptor: app.to_json(),
        t,
    })
}

impl EtJointDistribution {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.mu_t_grid.n + j]
    }

    /// Trapezoid mass over both grids.
    pub fn mass(&self) -> f64 {
        self.energy_marginal().norm_estimate
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn energy_marginal(&self) -> EnergyMarginal {
        let n_t = self.mu_t_grid.n;
        let values: Vec<f64> = self
            .values
            .chunks(n_t)
            .map(|row| trapezoid(row, self.mu_t_grid.spacing()))
            .collect();
        let norm_estimate = trapezoid(&values, self.mu_e_grid.spacing());
        EnergyMarginal {
            mu_e_grid: self.mu_e_grid,
            values,
            norm_estimate,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# kind=et_joint t={:.16e} mass={:.16e} muE_grid={} muT_grid={} state={} apparatus={}",
            self.t,
            self.mass(),
            self.mu_e_grid,
            self.mu_t_grid,
            self.state_descriptor,
            self.apparatus_descriptor
        )?;
        writeln!(w, "mu_E,mu_T,value")?;
        let mts = self.mu_t_grid.points();
        for (i, me) in self.mu_e_grid.points().into_iter().enumerate() {
            for (j, mt) in mts.iter().enumerate() {
                writeln!(w, "{me:.16e},{mt:.16e},{:.16e}", self.value(i, j))?;
            }
        }
        Ok(())
    }
}

impl EnergyMarginal {
    pub fn mean(&self) -> f64 {
        let pts = self.mu_e_grid.points();
        let m: Vec<f64> = pts.iter().zip(&self.values).map(|(e, v)| e * v).collect();
        trapezoid(&m, self.mu_e_grid.spacing()) / self.norm_estimate
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# kind=et_energy_marginal norm_estimate={:.16e} grid={}", self.norm_estimate, self.mu_e_grid)?;
        writeln!(w, "mu_E,value")?;
        for (e, v) in self.mu_e_grid.points().iter().zip(&self.values) {
            writeln!(w, "{e:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// `Ā` in `∫dμE ρ(μE,μT) ≈ Ā/μT²` for large `|μT|`: the sharp edge of `ψ_ap`
/// at `a = b` leaves the boundary term `ħ ψ_ap(μE-E,μE-E)⟨E,α|ψ⟩/μT` in the
/// inner energy integral, so `Ā = N²ħ²/h ∫db g_i(b)² g_f(b)²`.
pub fn time_tail_coefficient(app: &EtApparatusState, hbar: f64) -> f64 {
    let v = app.spread_i.powi(2) + app.spread_f.powi(2);
    let overlap = (-(app.center_i - app.center_f).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
    app.norm_sq() * hbar / (2.0 * PI) * overlap
}

/// `∫dμE ρ(μE,μT)` as a distribution over the pointer time.
pub fn toa_marginal_et(joint: &EtJointDistribution) -> Result<ToaDistribution> {
    let n_t = joint.mu_t_grid.n;
    let de = joint.mu_e_grid.spacing();
    let values: Vec<f64> = (0..n_t)
        .map(|j| {
            let col: Vec<f64> = (0..joint.mu_e_grid.n).map(|i| joint.value(i, j)).collect();
            trapezoid(&col, de)
        })
        .collect();
    ToaDistribution::new(ToaKind::EtMarginal, joint.t, joint.mu_t_grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kijowski::pi_k;
    use crate::numerics::quadrature::integrate_complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn incoming() -> State {
        State::gaussian(-5.0, 10.0, 1.0).unwrap()
    }

    fn figure1() -> State {
        State::gaussian(-2.5, 10.0, 0.1).unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default().with_tol(1e-14, 1e-12)
    }

    #[test]
    fn apparatus_is_normalized_on_its_support() {
        for app in [
            EtApparatusState::new(2.0, 2.0).unwrap(),
            EtApparatusState::new(0.5, 1.5).unwrap(),
            EtApparatusState::with_centers(1.0, 0.7, 0.4, -0.3).unwrap(),
        ] {
            let inner = |a: f64| {
                integrate_complex(|b| app.amplitude(a, b) * app.amplitude(a, b), a - 20.0, a, 8, &cfg())
                    .unwrap()
                    .re
            };
            let total = integrate_complex(|a| Complex64::new(inner(a), 0.0), -20.0, 20.0, 32, &cfg()).unwrap().re;
            assert!((total - 1.0).abs() < 1e-10, "{total}");
            assert_eq!(app.amplitude(0.1, 0.2), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn window_matches_its_defining_integral() {
        let app = EtApparatusState::new(1.0, 1.3).unwrap();
        let e_max = 40.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let (me, a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let f = |e: f64| {
                if e - me + a >= 0.0 && e - me + b >= 0.0 {
                    app.amplitude(a, me - e) * app.amplitude(b, me - e).conj()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            };
            let kink = (me - a.min(b)).max(0.0);
            let direct = integrate_complex(f, 0.0, kink, 4, &cfg()).unwrap() + integrate_complex(f, kink, e_max, 64, &cfg()).unwrap();
            let v = rho_ap_window(&app, me, a, b, e_max);
            assert!((v - direct).norm() < 1e-12, "{v} vs {direct}");
            assert_eq!(v, rho_ap_window(&app, me, b, a, e_max).conj());
            assert!(rho_ap_window(&app, me, a, a, e_max).re >= 0.0);
        }
    }

    #[test]
    fn window_far_above_the_apparatus_is_the_reduced_density() {
        let app = EtApparatusState::new(1.0, 1.0).unwrap();
        for (a, b) in [(0.3f64, -0.2f64), (1.1, 0.9), (-0.5, 0.4)] {
            let reduced = integrate_complex(
                |bp| app.amplitude(a, bp) * app.amplitude(b, bp).conj(),
                -30.0,
                a.min(b),
                32,
                &cfg(),
            )
            .unwrap();
            let v = rho_ap_window(&app, 50.0, a, b, 200.0);
            assert!((v - reduced).norm() < 1e-8, "{v} vs {reduced}");
            // far below, every admissible b' = μE - E lies in the tail
            assert!(rho_ap_window(&app, -50.0, a, b, 200.0).norm() < 1e-100);
        }
    }

    #[test]
    fn lattice_window_matches_pointwise_window() {
        let app = EtApparatusState::new(2.0, 2.0).unwrap();
        let hbar = 1.0;
        let lat = Lattice::new(60.0, 0.05, hbar, Some(0.1));
        let row = window_row(&app, hbar, 30.0, 0.7, 100.0, &lat);
        for m in [0usize, 1, 3, 10, 25] {
            let tau = m as f64 * lat.dt;
            let w = apparatus_window(&app, hbar, 30.0, 0.7, tau, 100.0).unwrap();
            // trapezoid across the kink at y = 0 is second order
            assert!((row[m].re - w).abs() < 1e-4 * w.abs().max(1e-3), "m={m}: {} vs {w}", row[m].re);
            let back = row[(lat.n - m) % lat.n].re;
            assert!((back - row[m].re).abs() < 1e-12, "window is even in τ");
        }
    }

    #[test]
    fn wigner_matrix_is_hermitian_and_empty_for_missing_branch() {
        let s = State::gaussian(-1.0, 1.0, 0.5).unwrap();
        for (e, tt) in [(0.4, 0.3), (1.2, -0.5), (3.0, 1.1)] {
            let a = et_wigner_matrix(&s, 1, -1, e, tt, 0.0).unwrap();
            let b = et_wigner_matrix(&s, -1, 1, e, tt, 0.0).unwrap();
            assert!((a - b.conj()).norm() < 1e-12);
            let d = et_wigner_matrix(&s, 1, 1, e, tt, 0.0).unwrap();
            assert!(d.im.abs() < 1e-12 * d.norm().max(1.0));
        }
        let inc = incoming();
        for e in [20.0, 50.0, 80.0] {
            assert!(et_wigner_matrix(&inc, -1, -1, e, 0.5, 0.0).unwrap().norm() <= 1e-10);
        }
    }

    #[test]
    fn wigner_marginal_is_kijowski() {
        let s = figure1();
        for tt in [0.05, 0.3] {
            let m = et_wigner_time_marginal(&s, tt, 0.0).unwrap();
            let k = pi_k(&s, tt, 0.0).unwrap();
            assert!((m - k).abs() < 1e-6, "T={tt}: {m} vs {k}");
        }
    }

    /// Nested adaptive quadrature of the direct-route definition in `E`.
    fn direct_oracle(state: &State, app: &EtApparatusState, me: f64, mt: f64, t: f64) -> f64 {
        let c = state.constants();
        let q = QuadratureConfig::default().with_tol(1e-13, 1e-10);
        let lo = (me - app.radius_i()).max(0.0);
        let hi = me + app.radius_f();
        let mut total = 0.0;
        for alpha in [1i8, -1] {
            // in v = (2mE)^{1/4} the inner integrand is smooth
            let inner = |e: f64| -> Complex64 {
                let (v0, v1) = ((2.0 * lo).powf(0.25), (2.0 * e.min(hi)).powf(0.25));
                if v1 <= v0 {
                    return Complex64::new(0.0, 0.0);
                }
                integrate_complex(
                    |v| {
                        let ep = v.powi(4) / 2.0;
                        app.amplitude(me - ep, me - e)
                            * 2.0
                            * v
                            * v
                            * state.psi_p(alpha as f64 * v * v, t)
                            * Complex64::from_polar(1.0, -mt * ep)
                    },
                    v0,
                    v1,
                    8,
                    &q,
                )
                .unwrap()
            };
            total += integrate_real(|e| inner(e).norm_sqr(), lo, hi, 24, &q).unwrap();
        }
        total / c.h()
    }

    use crate::numerics::quadrature::integrate_real;

    #[test]
    fn direct_route_matches_nested_quadrature() {
        let s = incoming();
        let app = EtApparatusState::new(2.0, 2.0).unwrap();
        let e_max = default_energy_cutoff(&s, &app);
        for (me, mt) in [(50.0f64, 0.5f64), (45.0, 0.8), (62.0, 0.2)] {
            let v = rho_et_direct(&s, &app, me, mt, 0.0, e_max).unwrap();
            let o = direct_oracle(&s, &app, me, mt, 0.0);
            assert!((v - o).abs() < 1e-8 * o.abs().max(1e-3), "({me},{mt}): {v} vs {o}");
        }
    }

    #[test]
    fn direct_route_is_covariant_and_positive() {
        let s = figure1();
        let app = EtApparatusState::new(2.0, 2.0).unwrap();
        let e_max = default_energy_cutoff(&s, &app);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for tshift in [0.3, -0.5] {
            for _ in 0..3 {
                let (me, mt) = (rng.gen_range(5.0..120.0), rng.gen_range(-0.5..1.0));
                let a = rho_et_direct(&s, &app, me, mt - tshift, tshift, e_max).unwrap();
                let b = rho_et_direct(&s, &app, me, mt, 0.0, e_max).unwrap();
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
                assert!(b >= 0.0);
            }
        }
    }

    #[test]
    fn low_cutoff_is_reported() {
        let s = incoming();
        let app = EtApparatusState::new(2.0, 2.0).unwrap();
        assert!(matches!(rho_et_direct(&s, &app, 50.0, 0.5, 0.0, 40.0), Err(Error::EnergyCutoffTooLow { .. })));
    }

    #[test]
    fn factored_route_matches_direct_route() {
        let s = incoming();
        let app = EtApparatusState::new(2.0, 2.0).unwrap();
        let me = GridSpec::new(35.0, 65.0, 4).unwrap();
        let mt = GridSpec::new(0.2, 0.8, 4).unwrap();
        let e_max = default_energy_cutoff(&s, &app);
        let d = rho_et_direct_grid(&s, &app, 0.0, &me, &mt, e_max).unwrap();
        let f = rho_et_factored_grid(&s, &app, 0.0, &me, &mt).unwrap();
        let peak = d.iter().cloned().fold(0.0, f64::max);
        for (a, b) in d.iter().zip(&f) {
            assert!((a - b).abs() <= 1e-5 * peak, "{a} vs {b}");
        }
        let single = rho_et_factored(&s, &app, 50.0, 0.5, 0.0).unwrap();
        let dd = rho_et_direct(&s, &app, 50.0, 0.5, 0.0, e_max).unwrap();
        assert!((single - dd).abs() <= 1e-5 * peak, "{single} vs {dd}");
    }

    #[test]
    fn factored_route_rejects_states_reaching_zero_energy() {
        let app = EtApparatusState::new(2.0, 2.0).unwrap();
        assert!(matches!(rho_et_factored(&figure1(), &app, 50.0, 0.5, 0.0), Err(Error::Unsupported(_))));
    }
}
