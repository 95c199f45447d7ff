use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nullsynth::io::{ensure_dir, write_json};
use nullsynth::scenario::{Prepared, Scenario};
use nullsynth::{Error, ExcitationFormat, ExcitationVector};

#[derive(Parser)]
#[command(
    name = "nullsynth",
    version,
    about = "Constrained phased-array synthesis in the non-radiating subspace"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for the reference fitter and the swarm.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the scenario's `output`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// φ planes in degrees for pattern cuts, e.g. `0,90`.
    #[arg(long, value_delimiter = ',')]
    phi_cuts: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Singular values of the radiation operator and the rank at χ.
    Decompose(Common),
    /// Fit or load the reference excitations.
    Reference(Common),
    /// Full run: reference, minimum-norm excitations, swarm search, assembly.
    Synthesize(Common),
    /// Metrics of an excitation file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Excitation CSV to evaluate.
        #[arg(long)]
        excitations: PathBuf,
        /// Reference excitations for the pattern tolerance.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

enum Outcome {
    Done,
    Missed(String),
}

fn load(common: &Common) -> nullsynth::Result<(Scenario, PathBuf)> {
    let mut sc = Scenario::load(&common.config)?;
    if let Some(seed) = common.seed {
        sc.set_seed(seed);
    }
    if let Some(cuts) = &common.phi_cuts {
        sc.config.phi_cuts = Some(cuts.clone());
        sc.config.validate()?;
    }
    let out = sc.output_dir(common.output.as_deref());
    Ok((sc, out))
}

fn prepare(sc: &Scenario, out: &Path) -> nullsynth::Result<Prepared> {
    ensure_dir(out)?;
    sc.prepare()
}

fn run(cli: Cli) -> nullsynth::Result<Outcome> {
    match cli.command {
        Command::Decompose(common) => {
            let (sc, out) = load(&common)?;
            let prep = prepare(&sc, &out)?;
            sc.write_decomposition(&prep, &out)?;
            println!(
                "N = {}  M = {}  chi = {}  S = {}  sigma_S+1 = {:e}",
                prep.rank.n,
                prep.grid.len(),
                prep.rank.chi,
                prep.rank.s,
                prep.rank.leakage_bound
            );
            Ok(Outcome::Done)
        }
        Command::Reference(common) => {
            let (sc, out) = load(&common)?;
            let prep = prepare(&sc, &out)?;
            let r = sc.reference(&prep)?;
            prep.mask.write_csv(&out.join("mask.csv"), &prep.grid)?;
            r.excitations
                .write_csv(&out.join("w_ref.csv"), ExcitationFormat::Polar)?;
            sc.write_cuts(&prep, &out, "ref", &r.excitations)?;
            write_json(&out.join("reference.json"), &r.info)?;
            println!(
                "Phi_M = {:e}  iterations = {}",
                r.info.phi_m, r.info.iterations
            );
            if r.info.converged {
                Ok(Outcome::Done)
            } else {
                Ok(Outcome::Missed(format!(
                    "reference violates the mask (Phi_M = {:e})",
                    r.info.phi_m
                )))
            }
        }
        Command::Synthesize(common) => {
            let (sc, out) = load(&common)?;
            let prep = prepare(&sc, &out)?;
            let run = sc.synthesize(&prep)?;
            sc.write_run(&prep, &run, &out)?;
            let s = &run.summary;
            println!(
                "S = {}  {}: {:e} -> {:e}  Phi_M = {:e}  DRR {:.4} -> {:.4}  Q {:.4} -> {:.4}",
                s.s,
                s.constraint,
                s.cost_ra,
                s.cost_final,
                s.metrics_final.phi_m,
                s.metrics_ra.drr,
                s.metrics_final.drr,
                s.metrics_ra.q_factor,
                s.metrics_final.q_factor
            );
            match s.target_reached {
                Some(false) => Ok(Outcome::Missed(format!(
                    "cost {:e} above target {:e} after {} iterations",
                    s.cost_final,
                    s.target_cost.unwrap_or(0.0),
                    s.iterations
                ))),
                _ => Ok(Outcome::Done),
            }
        }
        Command::Evaluate {
            common,
            excitations,
            reference,
        } => {
            let (sc, out) = load(&common)?;
            let prep = prepare(&sc, &out)?;
            let w = ExcitationVector::read_csv(&excitations)?;
            let w_ref = reference
                .as_deref()
                .map(ExcitationVector::read_csv)
                .transpose()?;
            let metrics = sc.evaluate(&prep, &w, w_ref.as_ref())?;
            sc.write_cuts(&prep, &out, "eval", &w)?;
            write_json(&out.join("metrics.json"), &metrics)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&metrics).map_err(Error::from)?
            );
            Ok(Outcome::Done)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => 2,
        Error::Input(_) | Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Missed(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(5)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
