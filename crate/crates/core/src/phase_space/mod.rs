//! Position-momentum quasi-distributions: Wigner function, windowed
//! (spectrogram) readout of a joint position-momentum measurement, its closed
//! Gaussian form, and the general Cohen class.

mod cohen;
mod covariance;
mod kernel;
mod spectrogram;
mod wigner;

pub use cohen::{cohen_distribution, CohenEvaluator};
pub use covariance::{delta_operator_element, kernel_covariance_residual, shifted_delta_operator_element};
pub use kernel::{CohenKernel, KernelFlags, KernelFn, KernelKind};
pub use spectrogram::{ak_closed_form, ak_closed_form_field, spectrogram, spectrogram_point, AkParams};
pub use wigner::{wigner, wigner_point};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use crate::error::{Error, Result};
use crate::numerics::GridSpec;

/// Gaussian pointer window `φ(ε) = (2/(πσ²))^{1/4} e^{-(ε-c)²/σ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApparatusWindow1D {
    pub sigma: f64,
    #[serde(default)]
    pub center: f64,
}

impl ApparatusWindow1D {
    pub fn new(sigma: f64, center: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("window sigma must be positive and finite (got {sigma})")));
        }
        if !center.is_finite() {
            return Err(Error::invalid("window center must be finite"));
        }
        Ok(ApparatusWindow1D { sigma, center })
    }

    /// Centred window of width `sigma`.
    pub fn unbiased(sigma: f64) -> Result<Self> {
        Self::new(sigma, 0.0)
    }

    pub fn phi(&self, eps: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (2.0 / (PI * s2)).powf(0.25) * (-(eps - self.center).powi(2) / s2).exp()
    }

    /// Wigner function of the window, `W_φ(ε, π)`.
    pub fn wigner(&self, eps: f64, pi: f64, hbar: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-2.0 * (eps - self.center).powi(2) / s2 - s2 * pi * pi / (2.0 * hbar * hbar)).exp() / (PI * hbar)
    }
}

/// What a [`PhaseSpaceField`] holds.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Wigner,
    Spectrogram,
    Cohen(String),
    AkClosedForm,
}

impl FieldKind {
    pub fn label(&self) -> String {
        match self {
            FieldKind::Wigner => "wigner".into(),
            FieldKind::Spectrogram => "spectrogram".into(),
            FieldKind::Cohen(id) => format!("cohen:{id}"),
            FieldKind::AkClosedForm => "ak_closed_form".into(),
        }
    }

    fn parse(s: &str) -> Self {
        match s {
            "wigner" => FieldKind::Wigner,
            "spectrogram" => FieldKind::Spectrogram,
            "ak_closed_form" => FieldKind::AkClosedForm,
            other => FieldKind::Cohen(other.strip_prefix("cohen:").unwrap_or(other).to_string()),
        }
    }
}

/// Values on an `x_grid × p_grid` lattice, stored row-major with `x` as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField {
    pub x_grid: GridSpec,
    pub p_grid: GridSpec,
    pub values: Vec<Complex64>,
    pub kind: FieldKind,
    pub t: f64,
}

impl PhaseSpaceField {
    pub fn value(&self, ix: usize, ip: usize) -> Complex64 {
        self.values[ix * self.p_grid.n + ip]
    }

    /// `∬ Re F dx dp` by the trapezoid rule.
    pub fn total_mass(&self) -> f64 {
        let mx = self.marginal_x();
        crate::numerics::trapezoid(&mx, self.x_grid.spacing())
    }

    /// `∫ Re F dp` at each grid `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let np = self.p_grid.n;
        (0..self.x_grid.n)
            .map(|ix| {
                let row: Vec<f64> = self.values[ix * np..(ix + 1) * np].iter().map(|v| v.re).collect();
                crate::numerics::trapezoid(&row, self.p_grid.spacing())
            })
            .collect()
    }

    /// `∫ Re F dx` at each grid `p`.
    pub fn marginal_p(&self) -> Vec<f64> {
        let np = self.p_grid.n;
        (0..np)
            .map(|ip| {
                let col: Vec<f64> = (0..self.x_grid.n).map(|ix| self.values[ix * np + ip].re).collect();
                crate::numerics::trapezoid(&col, self.x_grid.spacing())
            })
            .collect()
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// CSV with header `x,p,value` (plus `value_im` when any value is complex).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let complex = self.max_imag() > 0.0;
        writeln!(w, "# kind={} t={:.16e}", self.kind.label(), self.t)?;
        writeln!(w, "{}", if complex { "x,p,value,value_im" } else { "x,p,value" })?;
        for (ix, x) in self.x_grid.points().into_iter().enumerate() {
            for (ip, p) in self.p_grid.points().into_iter().enumerate() {
                let v = self.value(ix, ip);
                if complex {
                    writeln!(w, "{x:.16e},{p:.16e},{:.16e},{:.16e}", v.re, v.im)?;
                } else {
                    writeln!(w, "{x:.16e},{p:.16e},{:.16e}", v.re)?;
                }
            }
        }
        Ok(())
    }

    /// Binary dump: one ASCII header line with eight space-separated fields
    /// `x_min x_max x_n p_min p_max p_n kind t`, then `(re, im)` little-endian
    /// `f64` pairs in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "{:e} {:e} {} {:e} {:e} {} {} {:e}",
            self.x_grid.min,
            self.x_grid.max,
            self.x_grid.n,
            self.p_grid.min,
            self.p_grid.max,
            self.p_grid.n,
            self.kind.label().replace(' ', "_"),
            self.t
        )?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header).map_err(|e| Error::invalid(format!("field header: {e}")))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 8 {
            return Err(Error::invalid(format!("field header needs 8 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("field header `{s}`: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::invalid(format!("field header `{s}`: {e}")));
        let x_grid = GridSpec::new(num(f[0])?, num(f[1])?, int(f[2])?)?;
        let p_grid = GridSpec::new(num(f[3])?, num(f[4])?, int(f[5])?)?;
        let kind = FieldKind::parse(f[6]);
        let t = num(f[7])?;
        let n = x_grid.n * p_grid.n;
        let mut buf = vec![0u8; 16 * n];
        r.read_exact(&mut buf).map_err(|e| Error::invalid(format!("field body: {e}")))?;
        let values = buf
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Ok(PhaseSpaceField { x_grid, p_grid, values, kind, t })
    }
}

/// Default 512 × 512 grids covering `mean ± 8` standard deviations of `|ψ(x,t)|²` and `|ψ̃(p)|²`.
pub fn default_grids(state: &crate::state::State, t: f64) -> Result<(GridSpec, GridSpec)> {
    // the supports extend GAUSSIAN_CUTOFF amplitude widths; one std of the density is w/2
    let scale = 8.0 / (2.0 * crate::numerics::GAUSSIAN_CUTOFF);
    let (xl, xh) = state.position_support(t);
    let (pl, ph) = state.momentum_support();
    let (xc, pc) = (0.5 * (xl + xh), 0.5 * (pl + ph));
    Ok((
        GridSpec::centered(xc, 0.5 * (xh - xl) * scale, 512)?,
        GridSpec::centered(pc, 0.5 * (ph - pl) * scale, 512)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_normalized() {
        let w = ApparatusWindow1D::new(0.1, 0.0).unwrap();
        let n = crate::numerics::quadrature::integrate_real(|e| w.phi(e).powi(2), -1.0, 1.0, 4, &Default::default()).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(ApparatusWindow1D::new(0.0, 0.0).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let f = PhaseSpaceField {
            x_grid: GridSpec::new(-1.0, 1.0, 3).unwrap(),
            p_grid: GridSpec::new(0.0, 2.0, 2).unwrap(),
            values: (0..6).map(|i| Complex64::new(i as f64 * 0.1, -(i as f64))).collect(),
            kind: FieldKind::Cohen("ordering(+1)".into()),
            t: -0.2,
        };
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
        let header = std::str::from_utf8(&buf[..header_end]).unwrap();
        assert_eq!(header.split_whitespace().count(), 8);
        let back = PhaseSpaceField::read_binary(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let f = PhaseSpaceField {
            x_grid: GridSpec::new(-1.0, 1.0, 3).unwrap(),
            p_grid: GridSpec::new(0.0, 2.0, 2).unwrap(),
            values: vec![Complex64::new(1.0, 0.0); 6],
            kind: FieldKind::Wigner,
            t: 0.0,
        };
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 6);
        assert!(text.lines().nth(1).unwrap() == "x,p,value");
    }
}
