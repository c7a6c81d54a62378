use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use sls_core::beacon::{unix_now, MockBeacon};
use sls_core::bench::{self, ReportFormat, DEFAULT_TRIALS, MIN_SAMPLE_T};
use sls_core::{sls, BeaconValue, Freshness, FreshnessContext, SecurityConfig, Verdict};

use crate::formats;
use crate::{CliError, EXIT_OK, EXIT_REJECT};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sls", version, about = "Short-lived signatures from time-lock puzzles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate public parameters and a signing key.
    Setup(SetupArgs),
    /// Sign a message bound to a beacon round.
    Sign(SignArgs),
    /// Produce a signature without the secret key by solving the puzzle.
    Forge(ForgeArgs),
    /// Verify a signature; optionally judge its freshness.
    Verify(VerifyArgs),
    /// Local mock beacon.
    #[command(subcommand)]
    Beacon(BeaconCommand),
    /// Measure sequential squarings per second.
    Calibrate(CalibrateArgs),
    /// Run a timing sweep and write a CSV report.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SetupArgs {
    /// Bit length of each prime factor of N.
    #[arg(long)]
    pub lambda: u64,
    /// Number of sequential squarings T.
    #[arg(long = "t")]
    pub time_bound: u64,
    /// Public parameter file; the key goes to `<out>.sk`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the factorization of N to `<out>.trapdoor`.
    #[arg(long)]
    pub test_mode: bool,
    /// Hex seed for reproducible setup.
    #[arg(long, env = "SLS_SEED")]
    pub seed: Option<String>,
}

#[derive(Debug, Args)]
pub struct BeaconChoice {
    /// Beacon file from `sls beacon init`.
    #[arg(long)]
    pub beacon: PathBuf,
    /// Beacon round; defaults to the latest published round.
    #[arg(long)]
    pub round: Option<u64>,
    /// Current Unix time in seconds; defaults to the system clock.
    #[arg(long)]
    pub now: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SignArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub sk: PathBuf,
    /// File holding the message bytes.
    #[arg(long)]
    pub message: PathBuf,
    #[command(flatten)]
    pub beacon: BeaconChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForgeArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub message: PathBuf,
    #[command(flatten)]
    pub beacon: BeaconChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub message: PathBuf,
    #[arg(long)]
    pub signature: PathBuf,
    /// Check the embedded beacon value against this beacon.
    #[arg(long)]
    pub beacon: Option<PathBuf>,
    /// Calibration file; enables the freshness verdict.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub now: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum BeaconCommand {
    /// Create a beacon file.
    Init {
        #[arg(long)]
        out: PathBuf,
        /// 32-byte seed as hex; random if omitted.
        #[arg(long)]
        seed: Option<String>,
        /// Seconds between rounds.
        #[arg(long, default_value_t = 30)]
        period: u64,
        /// Unix time of round 0; defaults to now.
        #[arg(long)]
        genesis: Option<u64>,
    },
    /// Print a published round.
    Get(BeaconChoice),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub lambda: u64,
    #[arg(long, default_value_t = MIN_SAMPLE_T)]
    pub sample_t: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Eval,
    Tdeval,
    Sls,
}

/// Inclusive `a..b`, or a single `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JRange(pub u32, pub u32);

impl FromStr for JRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("expected `a..b` or `a`, got {s:?}");
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
            None => {
                let a = s.parse().map_err(|_| bad())?;
                (a, a)
            }
        };
        if a > b || b > 62 {
            return Err(format!("need a <= b <= 62, got {a}..{b}"));
        }
        Ok(JRange(a, b))
    }
}

impl JRange {
    pub fn values(self) -> Vec<u32> {
        (self.0..=self.1).collect()
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub sweep: SweepKind,
    /// Prime size for `eval` and `sls` sweeps.
    #[arg(long, default_value_t = 32)]
    pub lambda: u64,
    /// Prime sizes for `tdeval` sweeps.
    #[arg(long, value_delimiter = ',', default_value = "128,256,512")]
    pub lambdas: Vec<u64>,
    /// Exponents j with T = 2^j.
    #[arg(long, default_value = "16..24")]
    pub j: JRange,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: u32,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG plot path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Stop an `eval` sweep after this many seconds.
    #[arg(long)]
    pub budget_secs: Option<u64>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Setup(a) => setup(a, out),
        Command::Sign(a) => sign(a, out),
        Command::Forge(a) => forge(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Beacon(BeaconCommand::Init {
            out: path,
            seed,
            period,
            genesis,
        }) => beacon_init(&path, seed.as_deref(), period, genesis, out),
        Command::Beacon(BeaconCommand::Get(a)) => beacon_get(a, out),
        Command::Calibrate(a) => calibrate(a, out),
        Command::Bench(a) => run_bench(a, out),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str, secret: bool) -> Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    if secret {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = secret;
    opts.open(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Internal(e.to_string()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Seeded runs hash the decoded seed bytes into a ChaCha20 key.
fn setup_rng(seed: Option<&str>) -> Result<ChaCha20Rng> {
    match seed {
        Some(hex_seed) => {
            let bytes = hex::decode(hex_seed.trim())
                .map_err(|e| CliError::Usage(format!("--seed: {e}")))?;
            Ok(ChaCha20Rng::from_seed(Sha256::digest(bytes).into()))
        }
        None => Ok(ChaCha20Rng::from_entropy()),
    }
}

fn setup(a: SetupArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = SecurityConfig::new(a.lambda)?;
    let mut rng = setup_rng(a.seed.as_deref())?;
    let (pp, sk, trapdoor) = sls::sls_setup_test_mode(cfg, a.time_bound, &mut rng)?;
    let sk_path = with_suffix(&a.out, ".sk");
    write_file(&a.out, &formats::params_to_string(&pp), false)?;
    write_file(&sk_path, &formats::secret_key_to_string(&sk), true)?;
    emit(out, format_args!("params: {}", a.out.display()))?;
    emit(out, format_args!("secret key: {}", sk_path.display()))?;
    if a.test_mode {
        let td_path = with_suffix(&a.out, ".trapdoor");
        write_file(&td_path, &formats::trapdoor_to_string(&trapdoor), true)?;
        emit(out, format_args!("trapdoor: {}", td_path.display()))?;
    }
    Ok(EXIT_OK)
}

fn load_beacon(path: &Path) -> Result<MockBeacon> {
    Ok(MockBeacon::parse(&read_text(path)?)?)
}

fn pick_round(choice: &BeaconChoice) -> Result<BeaconValue> {
    let beacon = load_beacon(&choice.beacon)?;
    let now = choice.now.unwrap_or_else(unix_now);
    let round = match choice.round {
        Some(r) => r,
        None => beacon
            .latest_round_at(now)
            .ok_or_else(|| CliError::Usage("beacon has not published round 0 yet".into()))?,
    };
    Ok(beacon.get_at(round, now)?)
}

fn sign(a: SignArgs, out: &mut dyn Write) -> Result<i32> {
    let pp = formats::parse_params(&read_text(&a.params)?)?;
    let sk = formats::parse_secret_key(&read_text(&a.sk)?)?;
    let message = read_bytes(&a.message)?;
    let bv = pick_round(&a.beacon)?;
    let sig = sls::sls_sign(&pp, &message, &bv, &sk)?;
    write_file(&a.out, &formats::signature_to_string(&sig), false)?;
    emit(out, format_args!("signed with beacon round {}", bv.round))?;
    Ok(EXIT_OK)
}

fn forge(a: ForgeArgs, out: &mut dyn Write) -> Result<i32> {
    let pp = formats::parse_params(&read_text(&a.params)?)?;
    let message = read_bytes(&a.message)?;
    let bv = pick_round(&a.beacon)?;
    let sig = sls::sls_forge_sign(&pp, &message, &bv)?;
    write_file(&a.out, &formats::signature_to_string(&sig), false)?;
    emit(out, format_args!("forged with beacon round {}", bv.round))?;
    Ok(EXIT_OK)
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let pp = formats::parse_params(&read_text(&a.params)?)?;
    let message = read_bytes(&a.message)?;
    let sig = formats::parse_signature(&read_text(&a.signature)?)?;
    let calibration = match &a.calibration {
        Some(p) => Some(formats::parse_calibration(&read_text(p)?)?),
        None => None,
    };
    let reference = match &a.beacon {
        Some(path) => {
            let beacon = load_beacon(path)?;
            BeaconValue {
                round: sig.beacon.round,
                value: beacon.value_at(sig.beacon.round),
                timestamp: beacon.timestamp_of(sig.beacon.round),
            }
        }
        None => sig.beacon,
    };
    let verdict = if reference.timestamp == sig.beacon.timestamp {
        sls::sls_verify(&pp, &message, &reference, &sig)
    } else {
        Verdict::Reject
    };
    emit(out, format_args!("{}", verdict.as_str()))?;

    if let Some(cal) = calibration {
        if cal.lambda * 2 != pp.modulus().bit_length() {
            eprintln!(
                "warning: calibration is for lambda {}, parameters use a {}-bit modulus",
                cal.lambda,
                pp.modulus().bit_length()
            );
        }
        let now = a.now.unwrap_or_else(unix_now);
        match FreshnessContext::new(reference.timestamp, now, Some(cal.rate)) {
            Ok(ctx) => {
                let f: Freshness = sls::sls_check_freshness(&ctx, &pp)?;
                emit(out, format_args!("freshness: {}", f.as_str()))?;
            }
            Err(e) => emit(out, format_args!("freshness: unknown ({e})"))?,
        }
    }
    Ok(if verdict.is_accept() { EXIT_OK } else { EXIT_REJECT })
}

fn beacon_init(
    path: &Path,
    seed: Option<&str>,
    period: u64,
    genesis: Option<u64>,
    out: &mut dyn Write,
) -> Result<i32> {
    let seed: [u8; 32] = match seed {
        Some(s) => hex::decode(s.trim())
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| CliError::Usage("--seed must be 64 hex characters".into()))?,
        None => {
            let mut s = [0u8; 32];
            rand::thread_rng().fill_bytes(&mut s);
            s
        }
    };
    let beacon = MockBeacon::with_genesis(seed, period, genesis.unwrap_or_else(unix_now))?;
    write_file(path, &beacon.to_file_string(), false)?;
    emit(out, format_args!("beacon: {}", path.display()))?;
    Ok(EXIT_OK)
}

fn beacon_get(choice: BeaconChoice, out: &mut dyn Write) -> Result<i32> {
    let bv = pick_round(&choice)?;
    emit(out, format_args!("round: {}", bv.round))?;
    emit(out, format_args!("value: {}", hex::encode(bv.value)))?;
    emit(out, format_args!("timestamp: {}", bv.timestamp))?;
    Ok(EXIT_OK)
}

fn calibrate(a: CalibrateArgs, out: &mut dyn Write) -> Result<i32> {
    SecurityConfig::new(a.lambda)?;
    let cal = bench::calibrate(a.lambda, a.sample_t)?;
    if let Some(path) = &a.out {
        write_file(path, &formats::calibration_to_string(&cal), false)?;
    }
    emit(out, format_args!("rate: {}", cal.rate))?;
    Ok(EXIT_OK)
}

fn run_bench(a: BenchArgs, out: &mut dyn Write) -> Result<i32> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let js = a.j.values();
    let records = match a.sweep {
        SweepKind::Eval => {
            SecurityConfig::new(a.lambda)?;
            let budget = a.budget_secs.map(Duration::from_secs);
            let sweep = bench::bench_eval_sweep(a.lambda, (a.j.0, a.j.1), a.trials, budget)?;
            if sweep.truncated {
                eprintln!("warning: time budget exhausted, sweep truncated");
            }
            sweep.records
        }
        SweepKind::Tdeval => {
            for &l in &a.lambdas {
                SecurityConfig::new(l)?;
            }
            bench::bench_tdeval_grid(&a.lambdas, &js, a.trials)?
        }
        SweepKind::Sls => {
            SecurityConfig::new(a.lambda)?;
            bench::bench_sls(a.lambda, &js, a.trials)?
        }
    };
    bench::emit_report(&records, ReportFormat::Csv, &a.out)?;
    if let Some(svg) = &a.svg {
        bench::emit_report(&records, ReportFormat::Svg, svg)?;
    }
    for (op, lambda, j, m) in bench::medians(&records) {
        emit(out, format_args!("{op} lambda={lambda} j={j} median={m:.6}s"))?;
    }
    Ok(EXIT_OK)
}
