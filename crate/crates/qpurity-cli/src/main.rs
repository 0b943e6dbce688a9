//! Command-line driver: criterion reports, sweeps, self-validation and
//! reference-state generation.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid data or parameters,
//! 3 self-validation breach.

mod statefile;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qpurity::criteria::{chsh_horodecki, ksep_verdict};
use qpurity::experiments::{
    bd_geometry, configure_workers, cost_table, ghz_sweep, negativity_scan, nmeas_scan,
    werner_sweep, SweepResult,
};
use qpurity::output::write_json;
use qpurity::states::{
    bd_state, bell_state, noisy_ghz, random_fixed_purity, random_mixed, werner, BellState,
    MixedEnsemble, RngSeed,
};
use qpurity::validate::run_validation;
use qpurity::{DensityMatrix, Error, PartitionScheme, Result};

use statefile::StateFile;

const EXIT_DATA: u8 = 2;
const EXIT_BREACH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qpurity",
    version,
    about = "Correlation-tensor norms, purity links and separability tests"
)]
struct Cli {
    /// Worker threads for parallel scans (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the separability criterion on a state file.
    Criterion(CriterionArgs),
    /// Run a sweep or scan, writing `<name>.csv` and `<name>.meta.json`.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Run the internal cross-check suites; exits 3 on any breach.
    Validate(ValidateArgs),
    /// Write reference or random states as JSON files.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args)]
struct CriterionArgs {
    /// State file: JSON with factor dims and complex matrix entries.
    state: PathBuf,
    /// Block partition such as `0,1|2`; default is one block per factor.
    #[arg(long)]
    partition: Option<String>,
    /// Also report the two-setting-correlation test (two-qubit blocks only).
    #[arg(long)]
    chsh: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Noise-mixed Bell family over the mixing weight.
    Werner(WernerArgs),
    /// Noisy GHZ family, one uncertainty column per partition.
    Ghz(GhzArgs),
    /// Geometry of the diagonal-correlation tetrahedron.
    BdGeometry(BdGeometryArgs),
    /// Correlation measurements needed versus state purity.
    Nmeas(NmeasArgs),
    /// Criterion detection rate binned by negativity.
    Negativity(NegativityArgs),
    /// Measurement-count comparison across block-dimension profiles.
    Costs(CostsArgs),
}

/// Rejects zero at parse time so impossible counts fail as usage errors.
fn positive_usize(text: &str) -> std::result::Result<usize, String> {
    let value: usize = text
        .parse()
        .map_err(|_| format!("{text:?} is not a whole number"))?;
    if value == 0 {
        return Err("must be at least 1".to_string());
    }
    Ok(value)
}

#[derive(Args)]
struct WernerArgs {
    /// Number of grid points on the weight interval [0, 1].
    #[arg(long, default_value_t = 201, value_parser = positive_usize)]
    grid: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GhzArgs {
    #[arg(long, alias = "n", default_value_t = 3)]
    qubits: usize,
    #[arg(long, default_value_t = 201, value_parser = positive_usize)]
    grid: usize,
    /// `all`, or semicolon-separated partitions such as `0|1|2;0,1|2`.
    #[arg(long, default_value = "all")]
    partitions: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BdGeometryArgs {
    #[arg(long, default_value_t = 1_000_000, value_parser = positive_usize)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Cross-check every k-th sample against the matrix route (0 disables).
    #[arg(long, default_value_t = 1000)]
    audit_every: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NmeasArgs {
    #[arg(long, alias = "n", default_value_t = 6)]
    qubits: usize,
    /// Purity bins between 1/2^n and 1.
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    bins: usize,
    #[arg(long, default_value_t = 50, value_parser = positive_usize)]
    per_bin: usize,
    /// Random measurement orders averaged per state.
    #[arg(long, default_value_t = 32, value_parser = positive_usize)]
    shuffles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NegativityArgs {
    /// Accepted states (after the optional negativity filter).
    #[arg(long, default_value_t = 10_000, value_parser = positive_usize)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Keep only states with doubled negativity above this value.
    #[arg(long)]
    min_negativity: Option<f64>,
    /// Abort if this many draws do not yield the requested samples.
    #[arg(long, default_value_t = 50_000_000)]
    max_draws: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CostsArgs {
    /// Semicolon-separated dimension lists, e.g. `2,2,2;3,3`.
    #[arg(
        long,
        default_value = "2,2;2,2,2;2,2,2,2;2,2,2,2,2;2,2,2,2,2,2;3,3;3,3,3;4,4"
    )]
    profiles: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Random states per ensemble in each suite.
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    samples: usize,
    /// Write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// One of the four maximally entangled two-qubit states.
    Bell {
        /// `phi-plus`, `phi-minus`, `psi-plus` or `psi-minus`.
        #[arg(long, default_value = "phi-plus")]
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Noise-mixed Bell state with the given weight.
    Werner {
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value = "psi-minus")]
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// GHZ state on n qubits mixed with white noise; weight 1 is pure.
    Ghz {
        #[arg(long, default_value_t = 3)]
        qubits: usize,
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-qubit state with diagonal correlation matrix `(t1, t2, t3)`.
    BellDiagonal {
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
        #[arg(long)]
        t3: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random mixed state from a named ensemble.
    Random {
        /// Comma-separated factor dimensions.
        #[arg(long, default_value = "2,2")]
        dims: String,
        /// `hs` (Hilbert-Schmidt) or `bures`.
        #[arg(long, default_value = "hs")]
        ensemble: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random state with exact purity.
    FixedPurity {
        #[arg(long, default_value = "2,2")]
        dims: String,
        #[arg(long)]
        purity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(workers) = cli.workers {
        if let Err(e) = configure_workers(workers) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_DATA);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Criterion(args) => run_criterion(args),
        Command::Sweep(cmd) => run_sweep(cmd),
        Command::Validate(args) => run_validate(args),
        Command::Gen(cmd) => run_gen(cmd),
    }
}

fn run_criterion(args: CriterionArgs) -> Result<ExitCode> {
    let rho = StateFile::read(&args.state)?.into_density()?;
    let partition = match &args.partition {
        Some(text) => PartitionScheme::parse(text, rho.n_factors())?,
        None => PartitionScheme::singletons(rho.n_factors()),
    };
    let report = ksep_verdict(&rho, &partition)?;
    let mut doc = serde_json::to_value(&report)?;
    if args.chsh {
        let block_dims = partition.block_dims(rho.dims())?;
        if block_dims != [2, 2] {
            return Err(Error::inapplicable(format!(
                "the two-setting test needs two qubit blocks, got {block_dims:?}"
            )));
        }
        let blocks = partition.blocks();
        let chsh = chsh_horodecki(&rho, &blocks[0], &blocks[1])?;
        doc["chsh"] = serde_json::to_value(&chsh)?;
    }
    match &args.out {
        Some(path) => {
            write_json(path, &doc)?;
            println!("{}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&doc)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(result: &SweepResult, dir: &Path, headline: String) -> Result<ExitCode> {
    let (csv, meta) = result.write(dir)?;
    println!("{}", csv.display());
    println!("{}", meta.display());
    println!("{headline}");
    Ok(ExitCode::SUCCESS)
}

fn meta_f64(result: &SweepResult, path: &[&str]) -> f64 {
    let mut value = &result.meta;
    for key in path {
        value = &value[key];
    }
    value.as_f64().unwrap_or(f64::NAN)
}

fn run_sweep(command: SweepCommand) -> Result<ExitCode> {
    match command {
        SweepCommand::Werner(args) => {
            let sweep = werner_sweep(args.grid)?;
            let headline = format!(
                "criterion weight {:.9}, two-setting weight {:.9}, boundary purities {:.9}/{:.9}/{:.9}",
                meta_f64(&sweep, &["boundaries", "criterion_weight"]),
                meta_f64(&sweep, &["boundaries", "chsh_weight"]),
                meta_f64(&sweep, &["boundaries", "purity_at_ppt"]),
                meta_f64(&sweep, &["boundaries", "purity_at_criterion"]),
                meta_f64(&sweep, &["boundaries", "purity_at_chsh"]),
            );
            emit(&sweep, &args.out, headline)
        }
        SweepCommand::Ghz(args) => {
            let partitions = parse_partitions(&args.partitions, args.qubits)?;
            let sweep = ghz_sweep(args.qubits, args.grid, &partitions)?;
            let crossings = sweep.meta["delta_zero_crossings"]
                .as_object()
                .map_or(0, |m| m.values().filter(|v| !v.is_null()).count());
            let headline = format!(
                "{} partitions, {crossings} zero crossings, reference weight {:.9}",
                partitions.len(),
                meta_f64(&sweep, &["gme_weight_reference"]),
            );
            emit(&sweep, &args.out, headline)
        }
        SweepCommand::BdGeometry(args) => {
            let seed = RngSeed::new(args.seed, args.stream);
            let (estimate, sweep) = bd_geometry(args.samples, seed, args.audit_every)?;
            if estimate.audit_failures > 0 {
                eprintln!(
                    "error: {} of {} audited samples failed the matrix cross-check",
                    estimate.audit_failures, estimate.audited
                );
                sweep.write(&args.out)?;
                return Ok(ExitCode::from(EXIT_BREACH));
            }
            let headline = format!(
                "entangled {:.4}, detected/entangled {:.4} (closed form {:.4}), {} audits clean",
                estimate.entangled_fraction,
                estimate.detected_over_entangled,
                estimate.closed_form_ratio,
                estimate.audited,
            );
            emit(&sweep, &args.out, headline)
        }
        SweepCommand::Nmeas(args) => {
            let seed = RngSeed::new(args.seed, args.stream);
            let sweep = nmeas_scan(args.qubits, args.bins, args.per_bin, args.shuffles, seed)?;
            let headline = format!(
                "tensor route {} entries, purity route {} values",
                meta_f64(&sweep, &["full_cost"]),
                meta_f64(&sweep, &["purity_route_cost"]),
            );
            emit(&sweep, &args.out, headline)
        }
        SweepCommand::Negativity(args) => {
            let seed = RngSeed::new(args.seed, args.stream);
            let sweep = negativity_scan(args.samples, seed, args.min_negativity, args.max_draws)?;
            let headline = format!(
                "{} states, {} undetected above doubled negativity 0.5",
                meta_f64(&sweep, &["accepted"]),
                meta_f64(&sweep, &["undetected_above_0.5"]),
            );
            emit(&sweep, &args.out, headline)
        }
        SweepCommand::Costs(args) => {
            let profiles = parse_profiles(&args.profiles)?;
            let headline = format!("{} dimension profiles", profiles.len());
            emit(&cost_table(&profiles)?, &args.out, headline)
        }
    }
}

fn run_validate(args: ValidateArgs) -> Result<ExitCode> {
    const MAX_PRINTED_FAILURES: usize = 20;
    let report = run_validation(RngSeed::new(args.seed, args.stream), args.samples)?;
    for suite in &report.suites {
        println!(
            "{}: {} checks, {} failures",
            suite.name,
            suite.assertions,
            suite.failures.len()
        );
        for failure in suite.failures.iter().take(MAX_PRINTED_FAILURES) {
            println!("  {failure}");
        }
        if suite.failures.len() > MAX_PRINTED_FAILURES {
            println!(
                "  ... and {} more (see --out report for the full list)",
                suite.failures.len() - MAX_PRINTED_FAILURES
            );
        }
    }
    if let Some(path) = &args.out {
        write_json(path, &serde_json::to_value(&report)?)?;
        println!("{}", path.display());
    }
    if report.passed() {
        println!("validation passed ({} checks)", report.total_assertions());
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "validation FAILED ({} of {} checks)",
            report.total_failures(),
            report.total_assertions()
        );
        Ok(ExitCode::from(EXIT_BREACH))
    }
}

fn run_gen(command: GenCommand) -> Result<ExitCode> {
    let (rho, out): (DensityMatrix, PathBuf) = match command {
        GenCommand::Bell { which, out } => (bell_state(which.parse::<BellState>()?), out),
        GenCommand::Werner { omega, which, out } => {
            (werner(omega, which.parse::<BellState>()?)?, out)
        }
        GenCommand::Ghz {
            qubits,
            weight,
            out,
        } => (noisy_ghz(qubits, weight)?, out),
        GenCommand::BellDiagonal { t1, t2, t3, out } => (bd_state([t1, t2, t3])?, out),
        GenCommand::Random {
            dims,
            ensemble,
            seed,
            stream,
            out,
        } => {
            let dims = parse_dims(&dims)?;
            let ensemble = ensemble.parse::<MixedEnsemble>()?;
            let mut rng = RngSeed::new(seed, stream).rng();
            (random_mixed(&dims, ensemble, &mut rng)?, out)
        }
        GenCommand::FixedPurity {
            dims,
            purity,
            seed,
            stream,
            out,
        } => {
            let dims = parse_dims(&dims)?;
            let mut rng = RngSeed::new(seed, stream).rng();
            (random_fixed_purity(&dims, purity, 1e-12, &mut rng)?, out)
        }
    };
    StateFile::from_density(&rho).write(&out)?;
    println!("{}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::parameter(format!("bad dimension {tok:?}")))
        })
        .collect()
}

fn parse_profiles(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';').map(parse_dims).collect()
}

fn parse_partitions(text: &str, n_factors: usize) -> Result<Vec<PartitionScheme>> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(PartitionScheme::all_partitions(n_factors));
    }
    text.split(';')
        .map(|p| PartitionScheme::parse(p, n_factors))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_and_profiles_parse() {
        assert_eq!(parse_dims("2, 3,4").unwrap(), vec![2, 3, 4]);
        assert!(parse_dims("2,x").is_err());
        assert_eq!(
            parse_profiles("2,2;3,3").unwrap(),
            vec![vec![2, 2], vec![3, 3]]
        );
    }

    #[test]
    fn partition_lists_parse() {
        assert_eq!(parse_partitions("all", 3).unwrap().len(), 5);
        let two = parse_partitions("0|1|2;0,1|2", 3).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].to_string(), "0,1|2");
        assert!(parse_partitions("0|1", 3).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
