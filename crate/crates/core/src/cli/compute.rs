use serde_json::{json, Value};

use super::{CliError, Format, Kind, RunConfig, VERSION};
use crate::error::Result;
use crate::et::{et_joint_distribution, time_tail_coefficient, toa_marginal_et, EtJointDistribution};
use crate::kijowski::{pi_k_distribution, von_neumann_distribution};
use crate::numerics::quadrature::{integrate_pieces, uniform_breaks};
use crate::numerics::{GridSpec, QuadratureConfig};
use crate::phase_space::{spectrogram, wigner, AkParams, ApparatusWindow1D, CohenKernel, PhaseSpaceField};
use crate::state::State;
use crate::toa::{
    pi_delta_wigner, pi_j_tilde, pi_j_tilde_closed_form, pi_kw_closed_form, pi_kw_distribution, KwSource, ToaDistribution, ToaKind,
};

/// Closed-form parameters when `state` is a single atomic-unit packet and the window is centred.
pub(super) fn closed_form_params(state: &State, window: &ApparatusWindow1D) -> Option<AkParams> {
    match state {
        State::Gaussian(p) if p.constants.is_atomic() => AkParams::from_parts(p, window).ok(),
        _ => None,
    }
}

pub(super) fn kw_distribution(state: &State, window: &ApparatusWindow1D, t: f64, grid: &GridSpec) -> Result<ToaDistribution> {
    match closed_form_params(state, window) {
        Some(p) => ToaDistribution::tabulate(ToaKind::Kw, t, grid, |tt| pi_kw_closed_form(&p, tt, t)),
        None => pi_kw_distribution(&KwSource::Measured { state, window: *window }, t, grid),
    }
}

pub(super) fn j_tilde_distribution(state: &State, window: &ApparatusWindow1D, t: f64, grid: &GridSpec) -> Result<ToaDistribution> {
    let kernel = CohenKernel::spectrogram(*window, state.constants().hbar);
    let kind = ToaKind::JTilde(kernel.id());
    match closed_form_params(state, window) {
        Some(p) => ToaDistribution::tabulate(kind, t, grid, |tt| pi_j_tilde_closed_form(&p, tt, t)),
        None => ToaDistribution::tabulate(kind, t, grid, |tt| pi_j_tilde(state, &kernel, tt, t)),
    }
}

/// `Σ_α ∫dp |ψ̃(±p)|²`, which equals `∫Π_K dT` by completeness of the arrival-time eigenfunctions.
pub(super) fn kijowski_total_mass(state: &State) -> Result<f64> {
    let (lo, hi) = state.momentum_support();
    let mut breaks = uniform_breaks(lo, hi, 16);
    if lo < 0.0 && hi > 0.0 {
        breaks.push(0.0);
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    }
    let cfg = QuadratureConfig::default().with_tol(1e-14, 1e-12);
    Ok(integrate_pieces(|p: f64| state.psi_p(p, 0.0).norm_sqr(), &breaks, &cfg)?.value)
}

enum Table {
    Toa(ToaDistribution, Vec<(String, f64)>),
    Joint(EtJointDistribution),
    Energy(EtJointDistribution),
    Field(PhaseSpaceField),
}

fn tabulate(cfg: &RunConfig, kind: Kind) -> Result<Table> {
    let s = &cfg.state;
    let t = cfg.t;
    let g = &cfg.grids;
    let window = || cfg.window.as_ref().expect("validated");
    let et = || cfg.et_apparatus.as_ref().expect("validated");
    Ok(match kind {
        Kind::Kw => Table::Toa(kw_distribution(s, window(), t, &g[0])?, vec![]),
        Kind::DeltaWigner => Table::Toa(
            ToaDistribution::tabulate(ToaKind::DeltaWigner, t, &g[0], |tt| pi_delta_wigner(s, tt, t))?,
            vec![],
        ),
        Kind::JTilde => Table::Toa(j_tilde_distribution(s, window(), t, &g[0])?, vec![]),
        Kind::Kijowski => Table::Toa(pi_k_distribution(s, t, &g[0])?, vec![("total_mass".into(), kijowski_total_mass(s)?)]),
        Kind::VonNeumann => Table::Toa(von_neumann_distribution(s, window(), t, &g[0])?, vec![]),
        Kind::EtJoint => Table::Joint(et_joint_distribution(s, et(), t, &g[0], &g[1])?),
        Kind::EtEnergy => Table::Energy(et_joint_distribution(s, et(), t, &g[0], &g[1])?),
        Kind::EtMarginal => {
            let joint = et_joint_distribution(s, et(), t, &g[0], &g[1])?;
            let m = toa_marginal_et(&joint)?;
            let a = time_tail_coefficient(et(), s.constants().hbar);
            let extra = vec![
                ("time_tail_coefficient".into(), a),
                ("mass_with_tails".into(), m.norm_estimate + tail_mass(a, &g[1])),
            ];
            Table::Toa(m, extra)
        }
        Kind::Wigner => Table::Field(wigner(s, t, &g[0], &g[1])?),
        Kind::Spectrogram => Table::Field(spectrogram(s, window(), t, &g[0], &g[1])?),
    })
}

/// `∫ Ā/μT² dμT` outside the grid; infinite when the grid does not straddle `μT = 0`.
fn tail_mass(a: f64, g: &GridSpec) -> f64 {
    let side = |edge: f64| if edge > 0.0 { a / edge } else { f64::INFINITY };
    side(-g.min) + side(g.max)
}

fn grid_json(g: &GridSpec) -> Value {
    json!({"min": g.min, "max": g.max, "n": g.n})
}

fn to_json(cfg: &RunConfig, kind: Kind, table: &Table) -> Value {
    let mut v = json!({
        "schema": 1,
        "version": VERSION,
        "kind": kind.label(),
        "t": cfg.t,
        "state": serde_json::from_str::<Value>(&cfg.state.to_json()).expect("state json"),
    });
    if let Some(p) = cfg.preset {
        v["preset"] = json!(p.name());
    }
    match table {
        Table::Toa(d, extra) => {
            v["grids"] = json!([grid_json(&d.t_grid)]);
            v["norm_estimate"] = json!(d.norm_estimate);
            v["values"] = json!(d.values);
            for (k, x) in extra {
                v[k.as_str()] = json!(x);
            }
        }
        Table::Joint(j) => {
            v["grids"] = json!([grid_json(&j.mu_e_grid), grid_json(&j.mu_t_grid)]);
            v["norm_estimate"] = json!(j.mass());
            v["values"] = json!(j.values);
        }
        Table::Energy(j) => {
            let e = j.energy_marginal();
            v["grids"] = json!([grid_json(&e.mu_e_grid)]);
            v["norm_estimate"] = json!(e.norm_estimate);
            v["values"] = json!(e.values);
        }
        Table::Field(f) => {
            v["grids"] = json!([grid_json(&f.x_grid), grid_json(&f.p_grid)]);
            v["norm_estimate"] = json!(f.total_mass());
            v["values"] = json!(f.values.iter().map(|c| c.re).collect::<Vec<f64>>());
            if f.max_imag() > 0.0 {
                v["values_im"] = json!(f.values.iter().map(|c| c.im).collect::<Vec<f64>>());
            }
        }
    }
    if kind.needs_window() {
        let w = cfg.window.expect("validated");
        v["apparatus"] = json!({"sigma": w.sigma, "center": w.center});
    }
    if kind.needs_et() {
        v["apparatus"] = serde_json::from_str(&cfg.et_apparatus.as_ref().expect("validated").to_json()).expect("apparatus json");
    }
    v
}

fn to_csv(cfg: &RunConfig, table: &Table) -> std::io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    for line in cfg.provenance() {
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    match table {
        Table::Toa(d, extra) => {
            for (k, x) in extra {
                buf.extend_from_slice(format!("# {k}={x:.16e}\n").as_bytes());
            }
            d.write_csv(&mut buf)?;
        }
        Table::Joint(j) => j.write_csv(&mut buf)?,
        Table::Energy(j) => j.energy_marginal().write_csv(&mut buf)?,
        Table::Field(f) => f.write_csv(&mut buf)?,
    }
    Ok(buf)
}

/// Computes the configured distribution and writes it; nothing is written on failure.
pub fn run_compute(cfg: &RunConfig) -> std::result::Result<(), CliError> {
    let kind = cfg.kind.ok_or_else(|| CliError::Config("kind: missing".into()))?;
    let table = tabulate(cfg, kind)?;
    let bytes = match cfg.format {
        Format::Csv => to_csv(cfg, &table)?,
        Format::Json => {
            let mut s = serde_json::to_string(&to_json(cfg, kind, &table)).expect("json serializes");
            s.push('\n');
            s.into_bytes()
        }
    };
    cfg.emit(&bytes)
}
