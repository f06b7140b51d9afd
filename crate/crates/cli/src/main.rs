//! `umf`: check setups, run verification suites, benchmark transforms and export functions.
//!
//! Exit codes: 0 pass, 1 input error, 2 mathematical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use umf_core::extension::{builtin, synthesize, uep_check_tol, validate_setup, Diagnostics, IdentityReport, BUILTIN_NAMES};
use umf_core::frames::FRAME_DIM_CAP;
use umf_core::funcspace::{inverse_fast, transform_fast_counted, transform_naive_counted, MAX_GRID_DIM};
use umf_core::sampling::gaussian_test_function;
use umf_core::verify::{verify, VerifyConfig, REPORT_SCHEMA};
use umf_core::{FieldParams, FreqFn, GaloisField, GridSpec, Setup, SetupRepr, TimeFn};

const EXIT_INPUT: u8 = 1;
const EXIT_MATH: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "umf", version, about = "Wavelet frames on local fields of positive characteristic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the unitary mask identity of a setup.
    UepCheck {
        setup: PathBuf,
        /// Check every grid cell, not only the support of the low-pass.
        #[arg(long)]
        strict_uep: bool,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report every setup invariant with offending cells.
    Validate {
        setup: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frame bounds and seeded energy checks for the synthesized system.
    Verify {
        setup: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, requires = "j_max", allow_negative_numbers = true)]
        j_min: Option<i32>,
        #[arg(long, requires = "j_min", allow_negative_numbers = true)]
        j_max: Option<i32>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        strict_uep: bool,
        /// Allow test grids above 4096 cells.
        #[arg(long)]
        unsafe_large: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiply counts and timings of the naive and fast transforms.
    Bench {
        /// Comma-separated grid sizes, each a power of q.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        q: u32,
        #[arg(long)]
        unsafe_large: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump generators or time samples in canonical cell order.
    Export {
        setup: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the built-in setups as JSON.
    Builtin {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(BUILTIN_NAMES))]
        name: String,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        c: u32,
        #[arg(long, default_value_t = 0)]
        nu: u32,
        #[arg(long, default_value_t = 1)]
        r: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    /// The synthesized high-pass generators.
    Psi,
    /// The low-pass generator.
    Psi0,
    /// Inverse transform of the low-pass generator.
    TimeSamples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
struct UepOutput<'a> {
    schema: u32,
    strict: bool,
    tol: f64,
    #[serde(flatten)]
    detail: &'a IdentityReport,
    diagnostics: &'a Diagnostics,
}

fn read_setup(path: &Path) -> anyhow::Result<Setup> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let repr: SetupRepr = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Setup::from_repr(&repr)?)
}

/// Writes to `out` through a temporary file in the same directory, or to stdout.
fn emit(out: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating output in {}", dir.display()))?;
            tmp.write_all(content.as_bytes())?;
            tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn json(value: &impl Serialize) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn threads_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var("UMF_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("UMF_THREADS={v:?} is not a thread count"))?;
            Ok(Some(n.max(1)))
        }
        Err(_) => Ok(None),
    }
}

fn positive(name: &str, tol: f64) -> anyhow::Result<()> {
    if !(tol > 0.0) {
        bail!("--{name} must be positive, got {tol}");
    }
    Ok(())
}

fn values_csv(columns: &[(&str, &[Complex64])]) -> String {
    let mut out = String::from("idx");
    for (name, _) in columns {
        out += &format!(",{name}_re,{name}_im");
    }
    out.push('\n');
    let rows = columns.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    for i in 0..rows {
        out += &i.to_string();
        for (_, v) in columns {
            let z = v.get(i).copied().unwrap_or_default();
            out += &format!(",{},{}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::UepCheck { setup, strict_uep, tol, out } => {
            positive("tol", tol)?;
            let setup = read_setup(&setup)?;
            let report = uep_check_tol(&setup, strict_uep, tol)?;
            let diagnostics = validate_setup(&setup);
            let output = UepOutput { schema: REPORT_SCHEMA, strict: strict_uep, tol, detail: &report, diagnostics: &diagnostics };
            emit(out.as_deref(), &json(&output)?)?;
            Ok(if report.pass { 0 } else { EXIT_MATH })
        }
        Command::Validate { setup, out } => {
            let diagnostics = validate_setup(&read_setup(&setup)?);
            emit(out.as_deref(), &json(&diagnostics)?)?;
            Ok(if diagnostics.pass() { 0 } else { EXIT_MATH })
        }
        Command::Verify { setup, trials, seed, j_min, j_max, tol, strict_uep, unsafe_large, out } => {
            positive("tol", tol)?;
            let setup = read_setup(&setup)?;
            let cfg = VerifyConfig {
                trials,
                seed,
                j_range: j_min.zip(j_max),
                tol,
                strict_uep,
                dim_cap: if unsafe_large { MAX_GRID_DIM } else { FRAME_DIM_CAP },
                threads: threads_from_env()?,
            };
            let report = verify(&setup, &cfg)?;
            emit(out.as_deref(), &json(&report)?)?;
            Ok(if report.parseval_failure(tol) { EXIT_MATH } else { 0 })
        }
        Command::Bench { dims, q, unsafe_large, out } => {
            let field = GaloisField::new(field_for_q(q)?)?;
            let cap = if unsafe_large { MAX_GRID_DIM } else { FRAME_DIM_CAP };
            let mut csv = String::from("dim,naive_mults,fast_mults,naive_ns,fast_ns\n");
            for dim in dims {
                if dim > cap {
                    bail!("dim {dim} exceeds the cap {cap}; pass --unsafe-large to allow it");
                }
                let digits = digits_of(dim, q as usize).with_context(|| format!("dim {dim} is not a positive power of q = {q}"))?;
                let grid = GridSpec::new((digits / 2) as i32, (digits - digits / 2) as i32)?;
                let cells: Vec<usize> = (0..dim).collect();
                let sample = gaussian_test_function(&field, grid, &cells, dim as u64)?;
                let f = TimeFn::from_values(&field, grid, sample.into_values())?;
                let t0 = Instant::now();
                let (_, naive) = transform_naive_counted(&f)?;
                let naive_ns = t0.elapsed().as_nanos();
                let t1 = Instant::now();
                let (_, fast) = transform_fast_counted(&f)?;
                let fast_ns = t1.elapsed().as_nanos();
                csv += &format!("{dim},{},{},{naive_ns},{fast_ns}\n", naive.0, fast.0);
            }
            emit(out.as_deref(), &csv)?;
            Ok(0)
        }
        Command::Export { setup, what, format, out } => {
            let setup = read_setup(&setup)?;
            let text = match what {
                What::Psi0 => export_one(&setup.psi0_hat, "psi0", format)?,
                What::TimeSamples => {
                    let t = inverse_fast(&setup.psi0_hat)?;
                    match format {
                        Format::Json => json(&t.to_repr())?,
                        Format::Csv => values_csv(&[("psi0", t.values())]),
                    }
                }
                What::Psi => {
                    let sys = synthesize(&setup, Some((0, 0)))?;
                    match format {
                        Format::Json => json(&sys.psi_hat.iter().map(FreqFn::to_repr).collect::<Vec<_>>())?,
                        Format::Csv => {
                            let grid = sys.psi_hat.iter().fold(sys.psi_hat[0].grid(), |g, p| g.join(&p.grid()));
                            let refined = sys.psi_hat.iter().map(|p| p.refine(grid)).collect::<Result<Vec<_>, _>>()?;
                            let names: Vec<String> = (1..=refined.len()).map(|l| format!("psi{l}")).collect();
                            let cols: Vec<(&str, &[Complex64])> = names.iter().map(String::as_str).zip(refined.iter().map(|p| p.values())).collect();
                            values_csv(&cols)
                        }
                    }
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Builtin { name, p, c, nu, r, out } => {
            let field = FieldParams::default_for(p, c).or_else(|_| FieldParams::first_irreducible(p, c))?;
            let setup = builtin(&name, &field, nu, r)?;
            emit(out.as_deref(), &json(&setup.to_repr())?)?;
            Ok(0)
        }
    }
}

fn export_one(f: &FreqFn, name: &str, format: Format) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => json(&f.to_repr())?,
        Format::Csv => values_csv(&[(name, f.values())]),
    })
}

/// Field of order `q = p^c` with the default modulus.
fn field_for_q(q: u32) -> anyhow::Result<FieldParams> {
    let p = (2..=q).find(|d| q % d == 0).with_context(|| format!("q = {q} is not a prime power"))?;
    let c = digits_of(q as usize, p as usize).with_context(|| format!("q = {q} is not a prime power"))?;
    Ok(FieldParams::default_for(p, c as u32).or_else(|_| FieldParams::first_irreducible(p, c as u32))?)
}

/// `L` with `q^L = dim`, `L >= 1`.
fn digits_of(dim: usize, q: usize) -> Option<usize> {
    let mut n = dim;
    let mut l = 0;
    while n > 1 && n % q == 0 {
        n /= q;
        l += 1;
    }
    (n == 1 && l >= 1).then_some(l)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
