use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::compute::closed_form_params;
use super::{CliError, Preset, VERSION};
use crate::error::{Error, Result};
use crate::numerics::GridSpec;
use crate::toa::{pi_j_tilde_closed_form, pi_kw_closed_form};

/// Reference times of the two `Π_KW` traces.
pub const FIGURE1_TIMES: [f64; 2] = [-0.2, -0.1];

/// One curve sampled against the arrival instant `t + T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Trace {
    /// File stem.
    pub name: String,
    /// `kw` or `j_tilde`.
    pub kind: &'static str,
    /// Reference time used to evaluate the trace.
    pub t: f64,
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

fn instants() -> GridSpec {
    GridSpec::new(-1.5, 1.5, 601).expect("fixed grid")
}

/// `Π_KW(T-t;t)` for `t ∈ {-0.2,-0.1}` and `Π_J̃(T-t;t)` (evaluated at `t=-0.2`)
/// against the arrival instant `T ∈ [-1.5,1.5]`.
pub fn figure1_traces(preset: Preset) -> Result<Vec<Figure1Trace>> {
    let p = closed_form_params(&preset.state(), &preset.window())
        .ok_or_else(|| Error::Unsupported("figure-1 traces need a single packet in atomic units".into()))?;
    let grid = instants();
    let pts = grid.points();
    let mut traces = Vec::with_capacity(3);
    for t in FIGURE1_TIMES {
        let values = pts.iter().map(|&tt| pi_kw_closed_form(&p, tt - t, t)).collect::<Result<Vec<f64>>>()?;
        traces.push(Figure1Trace {
            name: format!("kw_t{t}"),
            kind: "kw",
            t,
            grid,
            values,
        });
    }
    let t = FIGURE1_TIMES[0];
    let values = pts.iter().map(|&tt| pi_j_tilde_closed_form(&p, tt - t, t)).collect::<Result<Vec<f64>>>()?;
    traces.push(Figure1Trace {
        name: "j_tilde".into(),
        kind: "j_tilde",
        t,
        grid,
        values,
    });
    Ok(traces)
}

impl Figure1Trace {
    pub fn write_csv<W: Write>(&self, preset: Preset, mut w: W) -> std::io::Result<()> {
        let win = preset.window();
        writeln!(w, "# toa-lab {VERSION}")?;
        writeln!(
            w,
            "# figure1 preset={} trace={} t={:.16e} grid={} state={} apparatus={{\"sigma\":{:?},\"center\":{:?}}}",
            preset.name(),
            self.kind,
            self.t,
            self.grid,
            preset.state().to_json(),
            win.sigma,
            win.center
        )?;
        writeln!(w, "# T is the arrival instant t+T; value is the density at T-t")?;
        writeln!(w, "T,value")?;
        for (tt, v) in self.grid.points().iter().zip(&self.values) {
            writeln!(w, "{tt:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Writes the three traces of `preset` as `<dir>/<name>.csv`.
pub fn write_figure1(preset: Preset, dir: &Path) -> std::result::Result<Vec<PathBuf>, CliError> {
    let traces = figure1_traces(preset)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("out: cannot create {}: {e}", dir.display())))?;
    let mut paths = Vec::with_capacity(traces.len());
    for tr in &traces {
        let mut buf = Vec::new();
        tr.write_csv(preset, &mut buf)?;
        let path = dir.join(format!("{}.csv", tr.name));
        fs::write(&path, buf).map_err(|e| CliError::Config(format!("out: cannot write {}: {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}
