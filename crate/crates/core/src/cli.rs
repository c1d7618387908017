//! Command-line front end. Failures print a single `ERROR:<code>:<reason>`
//! line on stderr.
//!
//! Exit status: 0 success, 1 usage or I/O error, 2 validation or
//! verification failure, 3 synthesis infeasible.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde_json::json;

use crate::closed_loop::ClosedLoopMatrix;
use crate::network::{load_network_file, validate, Labeling, SignedNetwork};
use crate::outcome::Outcome;
use crate::signcons::{self, certify_sign, synthesize_sign, SignConfig};
use crate::simulate::{
    classify, integrate, random_initial_state, DEFAULT_CLASSIFY_TOL, DEFAULT_DT, DEFAULT_HORIZON,
};
use crate::tripartite::{self, synthesize_tripartite, verify_with_tol, KernelVerdict, SearchConfig, KERNEL_MATCH_TOL};
use crate::GainsRecord;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// Environment variable overriding the classification and kernel-match
/// tolerances.
pub const TOL_ENV: &str = "CONSENSUS_TOL";

#[derive(Debug, Parser)]
#[command(name = "tricon", version, about = "Stubbornness-gain synthesis for three-cluster signed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check clustering balance and list admissible labelings.
    Validate {
        network: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize gains for tripartite consensus.
    SynthTripartite {
        network: PathBuf,
        #[arg(long, num_args = 2, value_names = ["V2", "V3"], allow_negative_numbers = true)]
        ratios: Option<Vec<f64>>,
        /// Restrict to one labeling, given as three 1-based clusters.
        #[arg(long, num_args = 3, value_names = ["I1", "I2", "I3"])]
        labeling: Option<Vec<usize>>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Synthesize gains for sign consensus.
    SynthSign {
        network: PathBuf,
        /// `v1 entries ; v3 entries`, separated by spaces or commas.
        #[arg(long = "null-vectors", num_args = 1.., allow_negative_numbers = true)]
        null_vectors: Option<Vec<String>>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Integrate the closed loop and classify the limit.
    Simulate {
        network: PathBuf,
        #[arg(long)]
        gains: PathBuf,
        /// JSON array with the initial state.
        #[arg(long, conflicts_with = "seed")]
        x0: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long = "T", default_value_t = DEFAULT_HORIZON)]
        horizon: f64,
        /// Write every k-th sample to the CSV.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        verdict: Option<PathBuf>,
    },
    /// Re-certify a gains file against a network.
    Verify {
        network: PathBuf,
        #[arg(long)]
        gains: PathBuf,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub exit: i32,
    pub message: String,
}

impl CliError {
    fn new(code: &'static str, exit: i32, message: impl Into<String>) -> Self {
        Self { code, exit, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", EXIT_USAGE, message)
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new("io", EXIT_USAGE, format!("{}: {e}", path.display()))
    }

    pub fn line(&self) -> String {
        let flat: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("ERROR:{}:{flat}", self.code)
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let _ = writeln!(err, "{}", CliError::usage(first).line());
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.exit
        }
    }
}

fn tolerance() -> Result<Option<f64>, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(Some(t)),
            _ => Err(CliError::usage(format!("{TOL_ENV} must be a positive number, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn load(path: &Path) -> Result<SignedNetwork, CliError> {
    load_network_file(path).map_err(|e| match e {
        crate::network::NetworkError::Io(_) => CliError::io(path, e),
        _ => CliError::new("schema", EXIT_USAGE, format!("{}: {e}", path.display())),
    })
}

fn load_gains(path: &Path) -> Result<GainsRecord, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::new("schema", EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let tol = tolerance()?;
    match command {
        Command::Validate { network, json } => {
            let net = load(&network)?;
            let report = validate(&net);
            let text = if json { report.to_json() + "\n" } else { report.to_text() };
            emit(out, None, &text)?;
            if report.passed() {
                Ok(())
            } else {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
                Err(CliError::new("validation", EXIT_INVALID, format!("failed checks: {}", failed.join(", "))))
            }
        }
        Command::SynthTripartite { network, ratios, labeling, output } => {
            let net = load(&network)?;
            let cfg = SearchConfig {
                pinned: ratios.map(|r| (r[0], r[1])),
                kernel_tol: tol.unwrap_or(KERNEL_MATCH_TOL),
                ..SearchConfig::default()
            };
            let outcome = match labeling {
                Some(l) => {
                    let l = Labeling::from_one_based([l[0], l[1], l[2]]).map_err(|e| CliError::usage(e.to_string()))?;
                    synthesize_for_labeling(&net, l, &cfg)?
                }
                None => synthesize_tripartite(&net, &cfg),
            };
            match outcome {
                Outcome::Certified(r) => {
                    let text = pretty(&GainsRecord::Tripartite(r.gains.to_record()));
                    emit(out, output.as_deref(), &text)?;
                    if output.is_some() {
                        emit(out, None, &format!("certified labeling {} with v = {:?}\n", r.gains.labeling, r.gains.v))?;
                    }
                    Ok(())
                }
                Outcome::Infeasible(why) => Err(CliError::new("infeasible", EXIT_INFEASIBLE, why.to_string())),
            }
        }
        Command::SynthSign { network, null_vectors, output } => {
            let net = load(&network)?;
            let cfg = SignConfig {
                pinned: null_vectors.map(|t| parse_null_vectors(&t)).transpose()?,
                kernel_tol: tol.unwrap_or(KERNEL_MATCH_TOL),
                ..SignConfig::default()
            };
            match synthesize_sign(&net, &cfg) {
                Outcome::Certified(r) => {
                    let text = pretty(&GainsRecord::Sign(r.gains.to_record()));
                    emit(out, output.as_deref(), &text)?;
                    if output.is_some() {
                        emit(
                            out,
                            None,
                            &format!("certified labeling {} with margin {}\n", r.gains.labeling, r.gains.margin),
                        )?;
                    }
                    Ok(())
                }
                Outcome::Infeasible(why) => Err(CliError::new("infeasible", EXIT_INFEASIBLE, why.to_string())),
            }
        }
        Command::Simulate { network, gains, x0, seed, dt, horizon, stride, out: csv, verdict } => {
            let net = load(&network)?;
            let m = closed_loop_from(&net, &load_gains(&gains)?)?;
            let x0 = match x0 {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
                    let v: Vec<f64> = serde_json::from_str(&text)
                        .map_err(|e| CliError::new("schema", EXIT_USAGE, format!("{}: {e}", p.display())))?;
                    DVector::from_vec(v)
                }
                None => random_initial_state(net.size(), seed.unwrap_or(0)),
            };
            let sim = |e: crate::simulate::SimulateError| CliError::new("simulate", EXIT_USAGE, e.to_string());
            let traj = integrate(&m, &x0, dt, horizon).map_err(sim)?;
            let v = classify(&m, &net, &x0, tol.unwrap_or(DEFAULT_CLASSIFY_TOL)).map_err(sim)?;
            if let Some(p) = &csv {
                fs::write(p, traj.to_csv(stride)).map_err(|e| CliError::io(p, e))?;
            }
            emit(out, verdict.as_deref(), &(v.to_json() + "\n"))
        }
        Command::Verify { network, gains } => {
            let net = load(&network)?;
            let kernel_tol = tol.unwrap_or(KERNEL_MATCH_TOL);
            let (kind, verdict, spectrum) = match load_gains(&gains)? {
                GainsRecord::Tripartite(rec) => {
                    let g = tripartite::gains_from_record(&net, &rec).map_err(|e| CliError::new("schema", EXIT_USAGE, e.to_string()))?;
                    let r = verify_with_tol(&net, &g, kernel_tol);
                    ("tripartite", r.status, r.certificate)
                }
                GainsRecord::Sign(rec) => {
                    let g = signcons::gains_from_record(&net, &rec).map_err(|e| CliError::new("schema", EXIT_USAGE, e.to_string()))?;
                    let c = certify_sign(&net, &g, kernel_tol);
                    ("sign", c.status, c.certificate)
                }
            };
            let report = json!({
                "kind": kind,
                "verdict": verdict,
                "min_eigenvalue": spectrum.min_eigenvalue(),
                "zero_multiplicity": spectrum.zero_multiplicity,
            });
            emit(out, None, &pretty(&report))?;
            match verdict {
                KernelVerdict::Certified => Ok(()),
                KernelVerdict::Rejected(reason) => Err(CliError::new("verify", EXIT_INVALID, reason)),
            }
        }
    }
}

fn synthesize_for_labeling(
    net: &SignedNetwork,
    labeling: Labeling,
    cfg: &SearchConfig,
) -> Result<Outcome<tripartite::SynthesisResult>, CliError> {
    let candidates = crate::network::enumerate_admissible_labelings(net).tripartite;
    let mut why = crate::outcome::Infeasibility::default();
    for cand in candidates.iter().filter(|c| c.labeling == labeling) {
        match tripartite::search_ratios(net, labeling, cand.h, cfg) {
            Ok(Some((v2, v3))) => {
                let g = tripartite::gains_from_ratios(net, labeling, v2, v3)
                    .map_err(|e| CliError::new("internal", EXIT_USAGE, e.to_string()))?;
                return Ok(Outcome::Certified(verify_with_tol(net, &g, cfg.kernel_tol)));
            }
            Ok(None) => why.push(Some(labeling), format!("ratio grid exhausted (h = {})", cand.h + 1)),
            Err(e) => why.push(Some(labeling), e.to_string()),
        }
    }
    if why.attempts.is_empty() {
        why.push(Some(labeling), "labeling is not admissible");
    }
    Ok(Outcome::Infeasible(why))
}

fn closed_loop_from(net: &SignedNetwork, rec: &GainsRecord) -> Result<ClosedLoopMatrix, CliError> {
    let schema = |e: String| CliError::new("schema", EXIT_USAGE, e);
    match rec {
        GainsRecord::Tripartite(r) => tripartite::gains_from_record(net, r).map(|g| g.m).map_err(|e| schema(e.to_string())),
        GainsRecord::Sign(r) => signcons::gains_from_record(net, r).map(|g| g.m).map_err(|e| schema(e.to_string())),
    }
}

/// `["2", "1", ";", "-0.5", "-2"]` or `["2,1;-0.5,-2"]` into `(v1, v3)`.
pub fn parse_null_vectors(tokens: &[String]) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let joined = tokens.join(" ");
    let parts: Vec<&str> = joined.split(';').collect();
    if parts.len() != 2 {
        return Err(CliError::usage("--null-vectors needs exactly one ';' between v1 and v3"));
    }
    let parse = |s: &str| -> Result<Vec<f64>, CliError> {
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| CliError::usage(format!("bad number {t:?} in --null-vectors"))))
            .collect()
    };
    let (v1, v3) = (parse(parts[0])?, parse(parts[1])?);
    if v1.is_empty() || v3.is_empty() {
        return Err(CliError::usage("--null-vectors needs entries on both sides of ';'"));
    }
    Ok((v1, v3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn null_vector_forms() {
        let want = (vec![2.0, 1.0], vec![-0.5, -2.0]);
        assert_eq!(parse_null_vectors(&s(&["2", "1", ";", "-0.5", "-2"])).unwrap(), want);
        assert_eq!(parse_null_vectors(&s(&["2,1;-0.5,-2"])).unwrap(), want);
        assert_eq!(parse_null_vectors(&s(&["2", "1;", "-0.5", "-2"])).unwrap(), want);
        assert!(parse_null_vectors(&s(&["2", "1"])).is_err());
        assert!(parse_null_vectors(&s(&["2;x"])).is_err());
    }

    #[test]
    fn usage_errors_have_prefix() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["tricon", "frobnicate"], &mut o, &mut e), EXIT_USAGE);
        let msg = String::from_utf8(e).unwrap();
        assert!(msg.starts_with("ERROR:usage:"));
        assert_eq!(msg.lines().count(), 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["tricon", "validate", "/nonexistent/net.json"], &mut o, &mut e), EXIT_USAGE);
        assert!(String::from_utf8(e).unwrap().starts_with("ERROR:io:"));
    }
}
