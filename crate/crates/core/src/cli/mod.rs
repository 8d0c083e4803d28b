//! Command-line front end: `compute`, `audit` and `figure1`.

mod audit;
mod compute;
mod figure1;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::et::EtApparatusState;
use crate::numerics::GridSpec;
use crate::phase_space::ApparatusWindow1D;
use crate::state::State;

pub use audit::{run_audit, AuditCheck, AuditReport, Bound, Expectation};
pub use compute::run_compute;
pub use figure1::{figure1_traces, write_figure1, Figure1Trace, FIGURE1_TIMES};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "toa-lab", version, about = "Quantum arrival-time distributions from joint position-momentum and energy-time measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate one distribution on a grid.
    Compute {
        #[arg(long, value_enum)]
        kind: Kind,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run the covariance, positivity, normalization and marginal checks.
    Audit {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Write the three Figure-1 traces into a directory.
    Figure1 {
        #[arg(long, value_enum, default_value_t = Preset::Figure1)]
        preset: Preset,
        /// Output directory.
        #[arg(long, default_value = "figure1")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// JSON state descriptor.
    #[arg(long, value_name = "FILE")]
    pub state: Option<PathBuf>,
    /// JSON apparatus descriptor: `{"sigma":…}` or `{"spread_i":…,"spread_f":…}`.
    #[arg(long, value_name = "FILE")]
    pub apparatus: Option<PathBuf>,
    /// Reference time.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t: f64,
    /// Grid; give twice for two-dimensional kinds (x then p, or μE then μT).
    #[arg(long, value_name = "MIN:MAX:N", allow_hyphen_values = true)]
    pub grid: Vec<GridSpec>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Π_KW from the position-momentum readout.
    Kw,
    /// Covariant arrival-time density of the Wigner function.
    DeltaWigner,
    /// Π_J̃ with the spectrogram kernel.
    JTilde,
    /// Kijowski ideal arrival-time density Π_K.
    Kijowski,
    /// Pointer-time density of a von Neumann time measurement.
    VonNeumann,
    /// Energy-time joint density ρ(μE,μT).
    EtJoint,
    /// μT marginal of ρ(μE,μT).
    EtMarginal,
    /// μE marginal of ρ(μE,μT).
    EtEnergy,
    /// Wigner function on an x-p grid.
    Wigner,
    /// Joint pointer density ρ(μX,μP) of the position-momentum readout.
    Spectrogram,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Kw => "kw",
            Kind::DeltaWigner => "delta-wigner",
            Kind::JTilde => "j-tilde",
            Kind::Kijowski => "kijowski",
            Kind::VonNeumann => "von-neumann",
            Kind::EtJoint => "et-joint",
            Kind::EtMarginal => "et-marginal",
            Kind::EtEnergy => "et-energy",
            Kind::Wigner => "wigner",
            Kind::Spectrogram => "spectrogram",
        }
    }

    fn needs_window(self) -> bool {
        matches!(self, Kind::Kw | Kind::JTilde | Kind::VonNeumann | Kind::Spectrogram)
    }

    fn needs_et(self) -> bool {
        matches!(self, Kind::EtJoint | Kind::EtMarginal | Kind::EtEnergy)
    }

    fn grid_count(self) -> usize {
        match self {
            Kind::EtJoint | Kind::EtMarginal | Kind::EtEnergy | Kind::Wigner | Kind::Spectrogram => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Built-in parameter sets.
///
/// * `figure1`: `x0=-2.5, k0=10, δ=σ=0.1`.
/// * `figure1-symmetric`: the same packet at rest (`k0=0`), whose momentum
///   distribution is symmetric, so `Π_J̃` has one bump on each side of `T=0`.
/// * `incoming`: `x0=-5, k0=10, δ=1`, with negligible weight at `p ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Figure1,
    Figure1Symmetric,
    Incoming,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Figure1 => "figure1",
            Preset::Figure1Symmetric => "figure1-symmetric",
            Preset::Incoming => "incoming",
        }
    }

    pub fn state(self) -> State {
        let (x0, k0, delta) = match self {
            Preset::Figure1 => (-2.5, 10.0, 0.1),
            Preset::Figure1Symmetric => (-2.5, 0.0, 0.1),
            Preset::Incoming => (-5.0, 10.0, 1.0),
        };
        State::gaussian(x0, k0, delta).expect("preset state is valid")
    }

    pub fn window(self) -> ApparatusWindow1D {
        let sigma = match self {
            Preset::Figure1 | Preset::Figure1Symmetric => 0.1,
            Preset::Incoming => 1.0,
        };
        ApparatusWindow1D::unbiased(sigma).expect("preset window is valid")
    }

    pub fn et_apparatus(self) -> EtApparatusState {
        EtApparatusState::new(1.0, 1.0).expect("preset apparatus is valid")
    }

    /// Default grids for `kind`.
    fn grids(self, kind: Kind, state: &State, t: f64) -> Result<Vec<GridSpec>, CliError> {
        let g = |a: f64, b: f64, n: usize| GridSpec::new(a, b, n).map_err(CliError::from);
        match kind {
            Kind::EtJoint | Kind::EtMarginal | Kind::EtEnergy => match self {
                Preset::Incoming => Ok(vec![g(0.0, 120.0, 121)?, g(-10.0, 10.0, 401)?]),
                _ => Ok(vec![g(0.0, 2000.0, 401)?, g(-5.0, 5.0, 201)?]),
            },
            Kind::Wigner | Kind::Spectrogram => {
                let (x, p) = crate::phase_space::default_grids(state, t)?;
                Ok(vec![x, p])
            }
            _ => match self {
                Preset::Incoming => Ok(vec![g(-1.0, 2.0, 301)?]),
                _ => Ok(vec![g(-1.5, 1.5, 601)?]),
            },
        }
    }

    /// Arrival-time probes used by `audit`.
    fn audit_grid(self) -> GridSpec {
        let (a, b) = match self {
            Preset::Figure1 => (0.0, 0.5),
            Preset::Figure1Symmetric => (-0.5, 0.5),
            Preset::Incoming => (0.0, 1.0),
        };
        GridSpec::new(a, b, 11).expect("preset grid is valid")
    }
}

/// A failure of the front end, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration (exit 2).
    Config(String),
    /// Numerical failure (exit 3).
    Numeric(String),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid { .. } | Error::InvalidInput(_) | Error::Unsupported(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Apparatus read from a descriptor file.
#[derive(Debug, Clone, PartialEq)]
pub enum Apparatus {
    Window(ApparatusWindow1D),
    Et(EtApparatusState),
}

impl Apparatus {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("apparatus: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| CliError::Config("apparatus: expected a JSON object".into()))?;
        if obj.contains_key("spread_i") || obj.contains_key("spread_f") {
            Ok(Apparatus::Et(EtApparatusState::from_json(text).map_err(|e| CliError::Config(format!("apparatus: {e}")))?))
        } else if obj.contains_key("sigma") {
            if let Some(k) = obj.keys().find(|k| *k != "sigma" && *k != "center") {
                return Err(CliError::Config(format!("apparatus: unknown field `{k}`")));
            }
            let w: ApparatusWindow1D = serde_json::from_value(v).map_err(|e| CliError::Config(format!("apparatus: {e}")))?;
            Ok(Apparatus::Window(
                ApparatusWindow1D::new(w.sigma, w.center).map_err(|e| CliError::Config(format!("apparatus.sigma: {e}")))?,
            ))
        } else {
            Err(CliError::Config("apparatus: expected `sigma` (window) or `spread_i`/`spread_f` (energy-time)".into()))
        }
    }
}

/// Everything a command needs, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub state: State,
    pub window: Option<ApparatusWindow1D>,
    pub et_apparatus: Option<EtApparatusState>,
    pub kind: Option<Kind>,
    pub grids: Vec<GridSpec>,
    pub t: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub preset: Option<Preset>,
}

fn read_file(path: &Path, field: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{field}: cannot read {}: {e}", path.display())))
}

impl RunConfig {
    /// Merges a preset with explicit files and checks that `kind` has what it needs.
    pub fn build(kind: Option<Kind>, input: &InputArgs) -> Result<Self, CliError> {
        if !input.t.is_finite() {
            return Err(CliError::Config("t: must be finite".into()));
        }
        let state = match (&input.state, input.preset) {
            (Some(p), _) => State::from_json(&read_file(p, "state")?).map_err(|e| CliError::Config(format!("state: {e}")))?,
            (None, Some(pr)) => pr.state(),
            (None, None) => return Err(CliError::Config("state: give --state FILE or --preset".into())),
        };
        let mut window = input.preset.map(Preset::window);
        let mut et_apparatus = input.preset.map(Preset::et_apparatus);
        if let Some(p) = &input.apparatus {
            match Apparatus::from_json(&read_file(p, "apparatus")?)? {
                Apparatus::Window(w) => window = Some(w),
                Apparatus::Et(a) => et_apparatus = Some(a),
            }
        }
        if let Some(k) = kind {
            if k.needs_window() && window.is_none() {
                return Err(CliError::Config(format!("apparatus: kind `{}` needs a window apparatus `{{\"sigma\":…}}`", k.label())));
            }
            if k.needs_et() && et_apparatus.is_none() {
                return Err(CliError::Config(format!(
                    "apparatus: kind `{}` needs an energy-time apparatus `{{\"spread_i\":…,\"spread_f\":…}}`",
                    k.label()
                )));
            }
        }
        for (i, g) in input.grid.iter().enumerate() {
            g.validate(&format!("grid[{i}]"))?;
        }
        let grids = match kind {
            Some(k) if input.grid.is_empty() => match input.preset {
                Some(pr) => pr.grids(k, &state, input.t)?,
                None => return Err(CliError::Config(format!("grid: kind `{}` needs --grid without a preset", k.label()))),
            },
            Some(k) => {
                if input.grid.len() != k.grid_count() {
                    return Err(CliError::Config(format!(
                        "grid: kind `{}` takes {} grid(s), got {}",
                        k.label(),
                        k.grid_count(),
                        input.grid.len()
                    )));
                }
                input.grid.clone()
            }
            None => match (input.grid.len(), input.preset) {
                (0, Some(pr)) => vec![pr.audit_grid()],
                (0, None) => return Err(CliError::Config("grid: audit needs --grid without a preset".into())),
                (1, _) => input.grid.clone(),
                (n, _) => return Err(CliError::Config(format!("grid: audit takes one arrival-time grid, got {n}"))),
            },
        };
        Ok(RunConfig {
            state,
            window,
            et_apparatus,
            kind,
            grids,
            t: input.t,
            out: input.out.clone(),
            format: input.format,
            preset: input.preset,
        })
    }

    /// Common `#` header lines.
    fn provenance(&self) -> Vec<String> {
        let mut v = vec![format!("# toa-lab {VERSION}")];
        if let Some(p) = self.preset {
            v.push(format!("# preset={}", p.name()));
        }
        v.push(format!("# state={}", self.state.to_json()));
        if let Some(k) = self.kind {
            if k.needs_window() {
                let w = self.window.expect("validated");
                v.push(format!("# apparatus={{\"sigma\":{:?},\"center\":{:?}}}", w.sigma, w.center));
            }
            if k.needs_et() {
                v.push(format!("# apparatus={}", self.et_apparatus.as_ref().expect("validated").to_json()));
            }
        }
        v
    }

    /// Writes `bytes` to `--out` or stdout.
    fn emit(&self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out {
            Some(p) => fs::write(p, bytes).map_err(|e| CliError::Config(format!("out: cannot write {}: {e}", p.display()))),
            None => {
                let mut o = io::stdout().lock();
                o.write_all(bytes)?;
                o.flush()?;
                Ok(())
            }
        }
    }
}

/// Applies `TOA_LAB_THREADS` to the global thread pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TOA_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TOA_LAB_THREADS: expected a positive integer, got `{v}`")))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Compute { kind, input } => {
            let cfg = RunConfig::build(Some(kind), &input)?;
            run_compute(&cfg)?;
            Ok(exit::OK)
        }
        Command::Audit { input } => {
            let cfg = RunConfig::build(None, &input)?;
            let report = run_audit(&cfg)?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            cfg.emit(text.as_bytes())?;
            Ok(if report.pass { exit::OK } else { exit::CHECK_FAILED })
        }
        Command::Figure1 { preset, out } => {
            for p in write_figure1(preset, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(exit::OK)
        }
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("toa-lab: {e}");
            e.exit_code()
        }
    }
}
