use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsdc_core::attack::AttackModel;
use qsdc_core::coding::{random_bit_rate, CodeDescription, WiretapCode};
use qsdc_core::experiments::{
    run_capacity_sweep, run_e2e, run_stability, write_stability_csv, write_sweep_csv, SweepSpec,
};
use qsdc_core::protocol::{ProtocolConfig, SessionOutcome};
use qsdc_core::security::{secrecy_capacity, ErrorRates, RateParams};
use qsdc_core::state::survival_from_db;
use qsdc_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SECURITY_ABORT: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_SESSION_ABORT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "qsdc-sim",
    version,
    about = "DL04 quantum secure direct communication simulator"
)]
struct Cli {
    /// Protocol configuration (TOML). Defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secrecy capacity at a single operating point.
    Capacity(CapacityArgs),
    /// Per-block error estimates over independent blocks (CSV).
    Stability {
        #[arg(long, default_value_t = 50)]
        blocks: usize,
        #[command(flatten)]
        attack: AttackArgs,
        /// CSV destination; stdout if omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// I(A:B), I(A:E) and C_s across a loss range (CSV).
    Sweep {
        #[arg(long, default_value_t = 5.0)]
        from_db: f64,
        #[arg(long, default_value_t = 35.0)]
        to_db: f64,
        #[arg(long, default_value_t = 0.1)]
        step_db: f64,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Sends a file through the full protocol.
    Send {
        #[arg(long, short)]
        input: PathBuf,
        /// Where the recovered bytes are written.
        #[arg(long, short)]
        output: PathBuf,
        /// JSONL transcript, one block per line then a summary.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Code description to use instead of the configured code parameters.
        #[arg(long)]
        code: Option<PathBuf>,
        #[command(flatten)]
        attack: AttackArgs,
    },
    /// Exports or verifies a code description.
    #[command(subcommand)]
    Code(CodeCommand),
    /// Prints the effective configuration as TOML.
    Config,
}

#[derive(Subcommand)]
enum CodeCommand {
    /// Builds the configured code and writes its description.
    Export {
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Rebuilds a code from its description and checks the checksums.
    Import { description: PathBuf },
}

#[derive(Args)]
struct RateArgs {
    /// Alice-to-Bob error rate; the configured prior if omitted.
    #[arg(long)]
    e: Option<f64>,
    #[arg(long)]
    e_x: Option<f64>,
    #[arg(long)]
    e_z: Option<f64>,
    /// Eve's survival advantage; derived from the configured back-channel loss if omitted.
    #[arg(long)]
    g: Option<f64>,
}

#[derive(Args)]
struct CapacityArgs {
    /// Bob's detection probability; the configured round trip if omitted.
    #[arg(long, conflicts_with = "loss_db")]
    q_bob: Option<f64>,
    /// Total loss, as an alternative to --q-bob.
    #[arg(long)]
    loss_db: Option<f64>,
    #[command(flatten)]
    rates: RateArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKind {
    None,
    InterceptResend,
    Collective,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, value_enum, default_value_t = AttackKind::None)]
    attack: AttackKind,
    /// Intercepted fraction for intercept-resend.
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    /// Target X-basis check error for the collective attack.
    #[arg(long, default_value_t = 0.0)]
    target_e_x: f64,
    #[arg(long, default_value_t = 0.0)]
    target_e_z: f64,
}

impl AttackArgs {
    fn model(&self) -> qsdc_core::Result<AttackModel> {
        let model = match self.attack {
            AttackKind::None => AttackModel::None,
            AttackKind::InterceptResend => AttackModel::InterceptResend {
                fraction: self.fraction,
            },
            AttackKind::Collective => AttackModel::OptimalCollective {
                e_x: self.target_e_x,
                e_z: self.target_e_z,
            },
        };
        model.validate()?;
        Ok(model)
    }
}

impl RateArgs {
    fn resolve(&self, cfg: &ProtocolConfig) -> qsdc_core::Result<(ErrorRates, f64)> {
        let (rp, design) = cfg.design_point()?;
        let rates = ErrorRates::new(
            self.e.unwrap_or(design.e),
            self.e_x.unwrap_or(design.e_x),
            self.e_z.unwrap_or(design.e_z),
        )?;
        Ok((rates, self.g.unwrap_or(rp.g)))
    }
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ProtocolConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ProtocolConfig::load_unchecked(path).map_err(|e| with_path(path, e))?,
        None => ProtocolConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn with_path(path: &Path, e: Error) -> Failure {
    match Failure::from(e) {
        Failure::Io(msg) => Failure::Io(format!("{}: {msg}", path.display())),
        Failure::Other(msg) => Failure::Other(format!("{}: {msg}", path.display())),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| with_path(p, e.into()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = load_config(&cli)?;
    // `send --code` replaces the code parameters before validating.
    if !matches!(cli.command, Command::Send { code: Some(_), .. }) {
        cfg.validate()?;
    }
    match cli.command {
        Command::Capacity(args) => capacity(&cfg, &args),
        Command::Stability { blocks, attack, output } => {
            let attack = attack.model()?;
            let code = cfg.build_code()?;
            let started = Instant::now();
            let report = run_stability(&cfg, &code, blocks, &attack)?;
            write_stability_csv(&report.rows, sink(output.as_deref())?)?;
            let delivered = report.rows.iter().filter(|r| r.delivered).count();
            eprintln!(
                "blocks {blocks}, delivered {delivered}, e_x {:.5} +/- {:.5}, e_z {:.5} +/- {:.5}, e {:.5} +/- {:.5}, {:.1?}",
                report.e_x.mean,
                report.e_x.std,
                report.e_z.mean,
                report.e_z.std,
                report.e.mean,
                report.e.std,
                started.elapsed()
            );
            Ok(0)
        }
        Command::Sweep {
            from_db,
            to_db,
            step_db,
            rates,
            output,
        } => {
            let (rates, g) = rates.resolve(&cfg)?;
            let spec = SweepSpec {
                loss_start_db: from_db,
                loss_end_db: to_db,
                loss_step_db: step_db,
                rates,
                g,
            };
            let rows = run_capacity_sweep(&spec)?;
            write_sweep_csv(&rows, sink(output.as_deref())?)?;
            Ok(0)
        }
        Command::Send {
            input,
            output,
            transcript,
            code,
            attack,
        } => send(cfg, &input, &output, transcript.as_deref(), code.as_deref(), &attack),
        Command::Code(CodeCommand::Export { output }) => {
            let desc = cfg.build_code()?.describe();
            let mut w = sink(output.as_deref())?;
            w.write_all(desc.to_toml()?.as_bytes()).map_err(Error::from)?;
            w.flush().map_err(Error::from)?;
            Ok(0)
        }
        Command::Code(CodeCommand::Import { description }) => {
            let code = import_code(&description)?;
            let p = code.params();
            println!(
                "ok: l {} k_u {} k_r {} k_m {} N {} seed {}, random-bit rate {:.4e}",
                p.l,
                p.k_u,
                p.k_r,
                code.k_m(),
                p.n_spread,
                p.seed,
                random_bit_rate(&code)
            );
            Ok(0)
        }
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            Ok(0)
        }
    }
}

fn capacity(cfg: &ProtocolConfig, args: &CapacityArgs) -> Result<u8, Failure> {
    let (rates, g) = args.rates.resolve(cfg)?;
    let q_bob = match (args.q_bob, args.loss_db) {
        (Some(q), _) => q,
        (None, Some(db)) => survival_from_db(db),
        (None, None) => cfg.channel.q_bob(),
    };
    let rp = RateParams::new(q_bob, g)?;
    let est = secrecy_capacity(&rp, &rates)?;
    if args.json {
        println!("{}", serde_json::to_string(&est).map_err(Error::from)?);
    } else {
        println!("q_bob {q_bob:.6e}");
        println!("g {g:.4}");
        println!("p_star {:.4}", est.p_star);
        println!("i_ab {:.6e}", est.i_ab);
        println!("i_ae {:.6e}", est.i_ae);
        println!("c_s {:.6e}", est.c_s);
        println!("c_s_half {:.6e}", est.closed_form);
    }
    Ok(0)
}

fn import_code(path: &Path) -> Result<WiretapCode, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| with_path(path, e.into()))?;
    CodeDescription::from_toml(&text)
        .and_then(|d| d.instantiate())
        .map_err(|e| with_path(path, e))
}

fn send(
    mut cfg: ProtocolConfig,
    input: &Path,
    output: &Path,
    transcript: Option<&Path>,
    code_path: Option<&Path>,
    attack: &AttackArgs,
) -> Result<u8, Failure> {
    let attack = attack.model()?;
    let code = match code_path {
        Some(p) => {
            let code = import_code(p)?;
            cfg.code = *code.params();
            cfg.validate()?;
            code
        }
        None => cfg.build_code()?,
    };
    if !input.is_file() {
        return Err(Failure::Io(format!("{}: not a readable file", input.display())));
    }
    let report = run_e2e(&cfg, &code, input, output, &attack)?;
    if let Some(path) = transcript {
        let mut w = BufWriter::new(File::create(path).map_err(|e| with_path(path, e.into()))?);
        report.transcript.write_jsonl(&mut w)?;
        w.flush().map_err(Error::from)?;
    }
    let s = &report.transcript.summary;
    eprintln!(
        "sent {} bytes, delivered {}, {} blocks, {} pulses",
        s.message_bytes, s.delivered_bytes, s.blocks, s.total_pulses
    );
    eprintln!(
        "throughput {:.2} bps, one block per chunk {:.2} bps, code random-bit rate {:.1} bps",
        s.throughput_bps, s.nominal_block_bps, s.random_bit_rate_bps
    );
    match s.outcome {
        SessionOutcome::Completed => Ok(0),
        SessionOutcome::Aborted { block_index, cause } => {
            let at = block_index.map_or("before the first block".to_string(), |b| format!("at block {b}"));
            eprintln!("aborted {at}: {cause:?}");
            Ok(if cause.is_security() {
                EXIT_SECURITY_ABORT
            } else {
                EXIT_SESSION_ABORT
            })
        }
    }
}
