use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heglab::oversight::{BatchScenario, detection_probability, simulate_batch_smuggling};
use heglab::repro;
use heglab::scenario::{Format, config_schema, emit_report, parse_config, run_scenario};
use heglab::stability::{
    DEFAULT_SIMULTANEOUS_WIN_PROB, StabilityParams, SweepRow, boundary_curve, classify_game,
    parse_grid, payoff_matrix, pwd_threshold, write_boundary_csv,
};

#[derive(Parser)]
#[command(name = "heglab", version, about = "Chip-governance protocol simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Treaty stability model.
    #[command(subcommand)]
    Stability(StabilityCmd),
    /// Production sampling and oversight.
    #[command(subcommand)]
    Oversight(OversightCmd),
    /// Scenario runs.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
    /// Reference checks.
    #[command(subcommand)]
    Repro(ReproCmd),
}

#[derive(Subcommand)]
enum StabilityCmd {
    /// Evaluate one parameter point.
    Eval {
        #[arg(long)]
        uw: f64,
        #[arg(long)]
        pdoom: f64,
        #[arg(long)]
        pwd: f64,
        #[arg(long, default_value_t = 1.0)]
        uc: f64,
    },
    /// Stability boundary p_doom(u_w) at a fixed win probability, as CSV.
    Sweep {
        #[arg(long)]
        pwd: f64,
        /// `start:end:count`
        #[arg(long = "uw-grid")]
        uw_grid: String,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OversightCmd {
    /// Analytic detection probability against a Monte Carlo estimate.
    Mc {
        /// Per-device sampling probability.
        #[arg(long)]
        p: f64,
        /// Compromised devices.
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "HEGLAB_OUT_DIR", default_value = "heglab-out")]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_values = ["csv", "json"])]
    format: Vec<FormatArg>,
}

#[derive(Subcommand)]
enum ProtocolCmd {
    /// Run a scenario file and write its report.
    Run(RunArgs),
    /// Print the scenario JSON schema.
    Schema,
}

#[derive(Subcommand)]
enum ReproCmd {
    /// Run every reference check and print a table.
    Paper,
}

/// A failure that ends the process: message and exit code.
struct Fail(String, u8);

fn invalid(e: impl ToString) -> Fail {
    Fail(e.to_string(), 1)
}

fn stability(cmd: StabilityCmd) -> Result<(), Fail> {
    match cmd {
        StabilityCmd::Eval { uw, pdoom, pwd, uc } => {
            let p = StabilityParams::new(uw, pdoom, pwd)
                .and_then(|p| p.with_u_c(uc))
                .map_err(invalid)?;
            let row = SweepRow::eval(&p);
            let threshold = pwd_threshold(uw, pdoom).map_err(invalid)?;
            let class = classify_game(&payoff_matrix(&p, DEFAULT_SIMULTANEOUS_WIN_PROB).map_err(invalid)?);
            let t = threshold.value().map(|v| v.to_string()).unwrap_or_else(|| "unconditional".into());
            println!("u_c,u_w,p_doom,p_w_given_d,defector_payoff,stable,pwd_threshold,game");
            println!(
                "{uc},{},{},{},{},{},{t},{class:?}",
                row.u_w, row.p_doom, row.p_w_given_d, row.defector_payoff, row.stable
            );
            Ok(())
        }
        StabilityCmd::Sweep { pwd, uw_grid, out } => {
            let grid = parse_grid(&uw_grid).map_err(invalid)?;
            let points = boundary_curve(pwd, &grid).map_err(invalid)?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                    write_boundary_csv(&points, file).map_err(invalid)
                }
                None => write_boundary_csv(&points, io::stdout().lock()).map_err(invalid),
            }
        }
    }
}

fn oversight(cmd: OversightCmd) -> Result<(), Fail> {
    let OversightCmd::Mc { p, n, trials, seed } = cmd;
    let analytic = detection_probability(p, n).map_err(invalid)?;
    let scenario = BatchScenario {
        population: n.max(1),
        compromised: n,
        sampling_rate: p,
        batches: vec![n.max(1)],
        customers: 1,
    };
    let estimate = simulate_batch_smuggling(seed, &scenario, trials).map_err(invalid)?;
    let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    println!("p,n,trials,seed,analytic,monte_carlo,abs_error,std_error");
    println!(
        "{p},{n},{trials},{seed},{analytic:.5},{estimate:.5},{:.5},{se:.5}",
        (estimate - analytic).abs()
    );
    Ok(())
}

fn protocol(cmd: ProtocolCmd) -> Result<(), Fail> {
    match cmd {
        ProtocolCmd::Schema => {
            print!("{}", config_schema());
            Ok(())
        }
        ProtocolCmd::Run(args) => {
            let text = fs::read_to_string(&args.scenario)
                .map_err(|e| invalid(format!("{}: {e}", args.scenario.display())))?;
            let mut cfg = parse_config(&text).map_err(|e| invalid(format!("{}: {e}", args.scenario.display())))?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let formats: Vec<Format> = args
                .format
                .iter()
                .map(|f| match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                })
                .collect();
            let report = run_scenario(&cfg);
            let written = emit_report(&report, &args.out_dir, &formats).map_err(invalid)?;
            for path in written {
                println!("{}", path.display());
            }
            eprintln!("checksum {}", report.checksum);
            Ok(())
        }
    }
}

fn repro_paper() -> Result<(), Fail> {
    let results = repro::run_all();
    let mut out = io::stdout().lock();
    for r in &results {
        let _ = writeln!(out, "{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} of {} checks passed", results.len() - failed, results.len());
    if failed > 0 {
        return Err(Fail(format!("{failed} checks failed"), 2));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Stability(c) => stability(c),
        Command::Oversight(c) => oversight(c),
        Command::Protocol(c) => protocol(c),
        Command::Repro(ReproCmd::Paper) => repro_paper(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
