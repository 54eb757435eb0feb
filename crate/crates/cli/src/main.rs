//! Command-line front end for the k3cft library.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use k3cft::cft::{
    cft_elliptic_genus, orbifold_sectors, spectral_flow_report, torus_sector, SectorLabel,
    TheoryHandle,
};
use k3cft::charclass::{geometric_elliptic_genus, todd_class, ChernRing, ManifoldData};
use k3cft::kummer::kummer_report;
use k3cft::modforms::{theta_series, ThetaIndex};
use k3cft::narain::{narain_from_torus, z_gamma_series, NarainLattice, TorusSpec};
use k3cft::rational::{fmt_rational, parse_rational};
use k3cft::verify::verify_all;
use k3cft::{Error, Rational};

#[derive(Parser)]
#[command(
    name = "k3cft",
    version,
    about = "Toroidal SCFTs, their Z2-orbifolds and K3 elliptic genera"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Truncation order in q, as an integer or "p/q".
    #[arg(long, default_value = "10")]
    order: String,
    /// Numeric tolerance for floating-point checks.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Jacobi theta function ϑ_k(τ, z) as a series.
    Theta {
        #[arg(long)]
        k: u8,
        #[command(flatten)]
        common: Common,
    },
    /// Charge lattices of toroidal theories.
    Narain {
        #[command(subcommand)]
        command: NarainCommand,
    },
    /// Sector partition functions and elliptic genera.
    Cft {
        #[command(subcommand)]
        command: CftCommand,
    },
    /// Geometric elliptic genus and Todd class.
    Genus {
        #[command(subcommand)]
        command: GenusCommand,
    },
    /// Kummer construction data.
    Kummer {
        #[command(subcommand)]
        command: KummerCommand,
    },
    /// Run every verification check.
    VerifyAll {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum NarainCommand {
    /// Build the charge lattice and report its Gram matrix.
    Check {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Numerator of the lattice partition sum.
    Zgamma {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum CftCommand {
    /// One sector partition function as a series in q, y, q̄, ȳ.
    Sector {
        spec: PathBuf,
        #[arg(long, default_value = "NS")]
        sector: SectorLabel,
        #[arg(long)]
        orbifold: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Conformal field theoretic elliptic genus.
    Ellgen {
        spec: Option<PathBuf>,
        #[arg(long)]
        orbifold: bool,
        /// Complex dimension of the cubic torus used when no spec is given.
        #[arg(long = "D", default_value_t = 2)]
        dim_d: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Check the spectral flow identities between sectors.
    CheckSpectralFlow {
        spec: PathBuf,
        #[arg(long)]
        orbifold: bool,
        /// Truncation order in q.
        #[arg(long, default_value = "3")]
        order: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum GenusCommand {
    /// Elliptic genus from Chern numbers via Riemann-Roch.
    Geometric {
        manifold: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Todd class in the truncated Chern ring.
    Todd {
        #[arg(long = "D")]
        dim_d: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum KummerCommand {
    /// Fixed points, Hodge diamonds, invariants and verdict.
    Report { spec: PathBuf },
}

/// A failed run and its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CutoffTooLarge { .. } => 3,
            Error::InvalidInput(_)
            | Error::SingularBasis
            | Error::ExponentOffLattice(_)
            | Error::UnsupportedDimension(_)
            | Error::OrderExceeded { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

type Run = Result<(String, bool), Failure>;

fn parse_order(s: &str) -> Result<Rational, Failure> {
    let order = parse_rational(s)?;
    if order <= Rational::from_integer(0.into()) {
        return Err(Error::InvalidInput(format!("order must be positive, got {s}")).into());
    }
    Ok(order)
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(v)
}

fn read_spec(path: &Path) -> Result<TorusSpec, Failure> {
    Ok(TorusSpec::from_json(&read_json(path)?)?)
}

fn read_lattice(path: &Path) -> Result<NarainLattice, Failure> {
    Ok(narain_from_torus(&read_spec(path)?)?)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn matrix_json(m: &k3cft::matrix::Matrix) -> Value {
    json!(m
        .to_rows()
        .iter()
        .map(|r| r.iter().map(fmt_rational).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn theory(lattice: NarainLattice, orbifold: bool) -> TheoryHandle {
    if orbifold {
        TheoryHandle::z2_orbifold(lattice)
    } else {
        TheoryHandle::toroidal(lattice)
    }
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Theta { k, common } => {
            let order = parse_order(&common.order)?;
            let t = theta_series(ThetaIndex::new(k)?, &order);
            let phase = t.phase.to_string();
            Ok(match common.format {
                Format::Json => {
                    let mut v = t.series.to_json();
                    v["phase"] = json!(phase);
                    (pretty(&v), true)
                }
                Format::Text => {
                    let header = if phase == "1" {
                        String::new()
                    } else {
                        format!("# phase {phase}\n")
                    };
                    (header + &t.series.to_canonical_text(), true)
                }
            })
        }
        Command::Narain { command } => match command {
            NarainCommand::Check { spec, common } => {
                let lat = read_lattice(&spec)?;
                let det = lat.gram_determinant();
                let v = json!({
                    "D": lat.dim_d(),
                    "gram": matrix_json(lat.gram()),
                    "even": lat.is_even(),
                    "det": fmt_rational(&det),
                });
                Ok(match common.format {
                    Format::Json => (pretty(&v), true),
                    Format::Text => {
                        let mut out = format!(
                            "D {}\neven {}\ndet {}\ngram\n",
                            lat.dim_d(),
                            lat.is_even(),
                            fmt_rational(&det)
                        );
                        for row in lat.gram().to_rows() {
                            let cells: Vec<_> = row.iter().map(fmt_rational).collect();
                            writeln!(out, "  {}", cells.join(" ")).expect("write to String");
                        }
                        (out, true)
                    }
                })
            }
            NarainCommand::Zgamma { spec, common } => {
                let order = parse_order(&common.order)?;
                let z = z_gamma_series(&read_lattice(&spec)?, &order)?;
                Ok(match common.format {
                    Format::Json => {
                        let mut v = z.numerator.to_json();
                        v["eta_power"] = json!(z.eta_power);
                        (pretty(&v), true)
                    }
                    Format::Text => (
                        format!(
                            "# numerator over |eta|^{}\n{}",
                            2 * z.eta_power,
                            z.numerator.to_canonical_text()
                        ),
                        true,
                    ),
                })
            }
        },
        Command::Cft { command } => match command {
            CftCommand::Sector {
                spec,
                sector,
                orbifold,
                common,
            } => {
                let order = parse_order(&common.order)?;
                let t = theory(read_lattice(&spec)?, orbifold);
                let f = if orbifold {
                    orbifold_sectors(&t, sector, &order)?
                } else {
                    torus_sector(&t, sector, &order)?
                };
                let series = f.expand()?.truncate(&order, &order);
                Ok(match common.format {
                    Format::Json => {
                        let mut v = series.to_json();
                        v["sector"] = json!(sector.name());
                        v["central_charge"] = json!(fmt_rational(&t.central_charge()));
                        (pretty(&v), true)
                    }
                    Format::Text => (series.to_canonical_text(), true),
                })
            }
            CftCommand::Ellgen {
                spec,
                orbifold,
                dim_d,
                common,
            } => {
                let order = parse_order(&common.order)?;
                let spec = match spec {
                    Some(p) => read_spec(&p)?,
                    None if dim_d >= 1 => TorusSpec::cubic(dim_d),
                    None => return Err(Error::InvalidInput("D must be positive".into()).into()),
                };
                let e = cft_elliptic_genus(&theory(narain_from_torus(&spec)?, orbifold), &order)?;
                Ok(match common.format {
                    Format::Json => (pretty(&e.to_json()), true),
                    Format::Text => (e.to_canonical_text(), true),
                })
            }
            CftCommand::CheckSpectralFlow {
                spec,
                orbifold,
                order,
                format,
            } => {
                let order = parse_order(&order)?;
                let report = spectral_flow_report(&theory(read_lattice(&spec)?, orbifold), &order)?;
                let passed = report.passed();
                Ok(match format {
                    Format::Json => (
                        pretty(&serde_json::to_value(&report).expect("serializable")),
                        passed,
                    ),
                    Format::Text => {
                        let mut out = String::new();
                        for i in &report.identities {
                            let status = if i.passed { "PASS" } else { "FAIL" };
                            write!(out, "{status} {}", i.identity).expect("write to String");
                            if let Some(m) = &i.first_mismatch {
                                write!(out, ": {m}").expect("write to String");
                            }
                            out.push('\n');
                        }
                        (out, passed)
                    }
                })
            }
        },
        Command::Genus { command } => match command {
            GenusCommand::Geometric { manifold, common } => {
                let order = parse_order(&common.order)?;
                let m = ManifoldData::from_json(&read_json(&manifold)?)?;
                let e = geometric_elliptic_genus(&m, &order)?;
                Ok(match common.format {
                    Format::Json => (pretty(&e.to_json()), true),
                    Format::Text => (e.to_canonical_text(), true),
                })
            }
            GenusCommand::Todd { dim_d, format } => {
                let td = todd_class(ChernRing::new(dim_d)?);
                Ok(match format {
                    Format::Json => {
                        let terms: serde_json::Map<String, Value> = td
                            .terms()
                            .map(|(m, c)| {
                                (k3cft::charclass::monomial_name(m), json!(fmt_rational(c)))
                            })
                            .collect();
                        (pretty(&json!({ "D": dim_d, "todd": terms })), true)
                    }
                    Format::Text => (format!("{td}\n"), true),
                })
            }
        },
        Command::Kummer { command } => match command {
            KummerCommand::Report { spec } => {
                Ok((pretty(&kummer_report(&read_spec(&spec)?)?), true))
            }
        },
        Command::VerifyAll { common } => {
            if !(common.tolerance > 0.0) {
                return Err(Error::InvalidInput("tolerance must be positive".into()).into());
            }
            let checks = verify_all(common.tolerance);
            let passed = checks.iter().all(|c| c.passed);
            Ok(match common.format {
                Format::Json => (
                    pretty(&serde_json::to_value(&checks).expect("serializable")),
                    passed,
                ),
                Format::Text => {
                    let mut out = String::new();
                    for c in &checks {
                        let status = if c.passed { "PASS" } else { "FAIL" };
                        writeln!(out, "{status} {} {}: {}", c.id, c.name, c.detail)
                            .expect("write to String");
                    }
                    (out, passed)
                }
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((out, passed)) => {
            print!("{out}");
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
