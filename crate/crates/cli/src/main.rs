//! `legendre`: periods, sections, heights and Nevanlinna functions of the Legendre scheme from
//! the command line. Reports are JSON (schemas under `schemas/`), series are CSV on request.

mod commands;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use legendre_core::nevanlinna::Divisor;
use legendre_core::sections::TorsionName;
use legendre_core::C64;

/// Version of every JSON report layout; bumped on incompatible changes.
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Parser, Debug)]
#[command(name = "legendre", version, about = "Numerics for the Legendre elliptic scheme")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunOptions,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command. Tolerances can also come from `LEGENDRE_*` variables.
#[derive(Args, Debug, Clone)]
pub struct RunOptions {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Gauss–Legendre order of the cell rule.
    #[arg(long, global = true, env = "LEGENDRE_QUAD_ORDER")]
    pub quad_order: Option<usize>,
    /// Absolute quadrature tolerance per unit chart area.
    #[arg(long, global = true, env = "LEGENDRE_ABS_TOL")]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true, env = "LEGENDRE_REL_TOL")]
    pub rel_tol: Option<f64>,
    /// Subdivision depth limit of adaptive cells.
    #[arg(long, global = true, env = "LEGENDRE_MAX_DEPTH")]
    pub max_depth: Option<u32>,
    /// Allowed relative spread of the fitted first-main-theorem slopes across the two halves
    /// of the radius range.
    #[arg(long, global = true, env = "LEGENDRE_FMT_SLOPE_TOL", default_value_t = 0.25)]
    pub fmt_slope_tol: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Period basis, period ratio and lattice volume at λ.
    Periods {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: C64,
        /// Continuation path from ½ to λ, `;`-separated complex numbers.
        #[arg(long, value_delimiter = ';', value_parser = parse_complex, allow_hyphen_values = true)]
        path: Option<Vec<C64>>,
    },
    /// Point of the fiber over λ with elliptic logarithm z.
    Exp {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: C64,
    },
    /// Elliptic logarithm and Betti coordinates of (x, y) over λ.
    Log {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: C64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        y: C64,
    },
    /// Betti coordinates of a section at λ and the density of the pulled-back form.
    Betti {
        #[arg(long)]
        section: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: C64,
    },
    /// Néron–Tate height of an algebraic section.
    Height {
        #[arg(long)]
        section: PathBuf,
        #[arg(long, value_enum, default_value_t = HeightEstimator::Quadrature)]
        method: HeightEstimator,
        /// Coarsest excision radius around the punctures.
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
        /// Largest multiple counted by the torsion-count estimator.
        #[arg(long, default_value_t = 24)]
        n_max: u32,
    },
    /// Height of the family itself, under each curvature normalization.
    SchemeHeight {
        #[arg(long, value_enum, default_value_t = FamilyArg::Legendre)]
        family: FamilyArg,
        /// Period ratio of the constant family.
        #[arg(long, value_parser = parse_complex, default_value = "0+1i", allow_hyphen_values = true)]
        tau: C64,
        #[arg(long, default_value_t = 1e-2)]
        delta: f64,
    },
    /// A Nevanlinna characteristic series of a section.
    Tchar {
        #[arg(long)]
        section: PathBuf,
        #[arg(long, value_enum)]
        kind: SeriesArg,
        #[command(flatten)]
        radii: Radii,
        /// `q`, `p1`, `p2`, `p3` or `x=<c>`.
        #[arg(long, value_parser = parse_divisor, default_value = "q")]
        divisor: Divisor,
        #[arg(long, value_enum, default_value_t = MetricArg::Neron)]
        metric: MetricArg,
        /// Scale `a` of the Fubini–Study form on the x-line.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Truncation level of the counting function.
        #[arg(long)]
        truncation: Option<u32>,
    },
    /// Checks that `T - N - m` grows at most like `C log r` with a stable `C`.
    FmtCheck {
        #[arg(long)]
        section: PathBuf,
        #[command(flatten)]
        radii: Radii,
        #[arg(long, value_parser = parse_divisor, default_value = "q")]
        divisor: Divisor,
        #[arg(long, value_enum, default_value_t = MetricArg::Neron)]
        metric: MetricArg,
    },
    /// Rational or transcendental growth of the height characteristic.
    Rationality {
        #[arg(long)]
        section: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        r0: f64,
        #[arg(long, default_value_t = 10.0)]
        r_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        r_max: f64,
        #[arg(long, default_value_t = 7)]
        points: usize,
    },
    /// Runs every invariant check with seeded sampling.
    VerifyAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Radii {
    /// Inner radius of the exhaustion.
    #[arg(long, default_value_t = 2.0)]
    pub r0: f64,
    #[arg(long, default_value_t = 2.5)]
    pub r_min: f64,
    #[arg(long, default_value_t = 50.0)]
    pub r_max: f64,
    /// Number of log-spaced radii.
    #[arg(long, default_value_t = 8)]
    pub points: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeightEstimator {
    Quadrature,
    TorsionCount,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyArg {
    Legendre,
    ConstantTau,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesArg {
    Order,
    Counting,
    Proximity,
    HeightChar,
}

/// `neron` pairs the Betti form with the Néron function, `fubini-study` works on the x-line.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricArg {
    Neron,
    FubiniStudy,
}

fn parse_complex(s: &str) -> Result<C64, String> {
    s.trim()
        .parse::<C64>()
        .map_err(|_| format!("`{s}` is not a complex number (examples: 0.5, -1+2i, 3.5-0.25i)"))
}

fn parse_divisor(s: &str) -> Result<Divisor, String> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "q" => Ok(Divisor::ZeroSectionQ),
        "p1" => Ok(Divisor::TorsionTranslate { point: TorsionName::P1 }),
        "p2" => Ok(Divisor::TorsionTranslate { point: TorsionName::P2 }),
        "p3" => Ok(Divisor::TorsionTranslate { point: TorsionName::P3 }),
        _ => match t.strip_prefix("x=") {
            Some(c) => Ok(Divisor::XEquals { c: parse_complex(c)? }),
            None => Err(format!("`{s}` is not a divisor (q, p1, p2, p3 or x=<c>)")),
        },
    }
}

/// Why a run stopped; each maps to an exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl From<legendre_core::Error> for Failure {
    fn from(e: legendre_core::Error) -> Self {
        match e {
            legendre_core::Error::Numeric { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

/// A finished report, and whether the checks it carries passed.
pub struct Outcome {
    pub body: String,
    pub failed: Option<String>,
}

fn write_output(opts: &RunOptions, body: &str) -> Result<(), Failure> {
    match &opts.output {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Usage(format!("cannot write to stdout: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = commands::run(&cli).and_then(|outcome| {
        write_output(&cli.run, &outcome.body)?;
        match outcome.failed {
            Some(msg) => Err(Failure::Verification(msg)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (label, msg) = match &f {
                Failure::Verification(m) => ("verification failed", m),
                Failure::Usage(m) | Failure::Numeric(m) => ("error", m),
            };
            eprintln!("{label}: {msg}");
            ExitCode::from(f.code())
        }
    }
}
