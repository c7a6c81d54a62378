//! Timing harness: calibration of the squaring rate, sweeps over `T = 2^j`
//! and over `lambda`, and CSV/SVG reports.
//!
//! Timed sections run one at a time on the calling thread. Each sweep is
//! preceded by a discarded warm-up run, and the reported statistic is the
//! median over trials.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::beacon::BeaconValue;
use crate::hash::tagged_hash;
use crate::numtheory::{GroupElement, SecurityConfig, TrapdoorSecret};
use crate::rsw::{self, RswPublicParams};
use crate::sls::{self, SlsPublicParams, SlsSecretKey};
use crate::{dlog, Error, Result};

/// Calibration refuses samples shorter than this many squarings.
pub const MIN_SAMPLE_T: u64 = 1 << 16;

pub const CALIBRATION_TRIALS: usize = 5;

pub const DEFAULT_TRIALS: u32 = 5;

/// Default `j` range for evaluation sweeps.
pub const DEFAULT_J_RANGE: (u32, u32) = (16, 24);

pub const CSV_HEADER: &str = "operation,lambda,j,trial,wall_time_s";

const MIN_MEASURABLE: Duration = Duration::from_millis(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operation {
    Eval,
    TdEval,
    Sign,
    Forge,
    Verify,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Eval => "eval",
            Operation::TdEval => "td_eval",
            Operation::Sign => "sign",
            Operation::Forge => "forge",
            Operation::Verify => "verify",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eval" => Operation::Eval,
            "td_eval" => Operation::TdEval,
            "sign" => Operation::Sign,
            "forge" => Operation::Forge,
            "verify" => Operation::Verify,
            other => return Err(Error::Parse(format!("unknown operation {other:?}"))),
        })
    }
}

/// One timed run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub operation: Operation,
    pub lambda: u64,
    /// `T = 2^j`.
    pub j: u32,
    pub trial: u32,
    /// Seconds, monotonic clock.
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationResult {
    /// Sequential squarings per second.
    pub rate: f64,
    pub lambda: u64,
    pub sample_t: u64,
}

/// Output of a budgeted sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sweep {
    pub records: Vec<BenchRecord>,
    /// Set when the budget ran out before every `(j, trial)` was measured.
    pub truncated: bool,
}

pub fn median<F: Float>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Some(sorted[mid])
    } else {
        let two = F::one() + F::one();
        Some((sorted[mid - 1] + sorted[mid]) / two)
    }
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation<F: Float>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let n = F::from(values.len())?;
    let mean = values.iter().fold(F::zero(), |a, &v| a + v) / n;
    if mean == F::zero() {
        return None;
    }
    let var = values.iter().fold(F::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
    Some(var.sqrt() / mean)
}

pub fn time_once<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn seconds(d: Duration) -> f64 {
    d.as_secs_f64().max(1e-9)
}

/// Median wall time per `(operation, lambda, j)`, in key order.
pub fn medians(records: &[BenchRecord]) -> Vec<(Operation, u64, u32, f64)> {
    let mut groups: BTreeMap<(Operation, u64, u32), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.operation, r.lambda, r.j))
            .or_default()
            .push(r.wall_time);
    }
    groups
        .into_iter()
        .map(|((op, lambda, j), times)| (op, lambda, j, median(&times).unwrap()))
        .collect()
}

/// Reproducible benchmark puzzle for a given `lambda`: modulus, trapdoor and
/// input all derive from a fixed seed.
pub fn bench_puzzle(lambda: u64) -> Result<(RswPublicParams, TrapdoorSecret, GroupElement)> {
    let cfg = SecurityConfig::new(lambda)?;
    let mut rng = ChaCha20Rng::from_seed(tagged_hash("bench-puzzle", &[&lambda.to_be_bytes()]));
    let (pp, sp) = rsw::rsw_setup(cfg, 0, &mut rng)?;
    let x = rsw::rsw_sample(&pp, &mut rng);
    Ok((pp, sp, x))
}

fn time_bound_for(j: u32) -> Result<u64> {
    if j > 62 {
        return Err(Error::TimeBoundTooLarge(u64::MAX));
    }
    Ok(1u64 << j)
}

pub fn calibrate(lambda: u64, sample_t: u64) -> Result<CalibrationResult> {
    if sample_t < MIN_SAMPLE_T {
        return Err(Error::SampleTooSmall {
            sample_t,
            min: MIN_SAMPLE_T,
        });
    }
    let (pp, _, x) = bench_puzzle(lambda)?;
    calibrate_with(&pp, &x, lambda, sample_t)
}

/// Squarings per second on `pp`'s modulus: `sample_t` over the median of
/// [`CALIBRATION_TRIALS`] timed evaluations.
pub fn calibrate_with(
    pp: &RswPublicParams,
    x: &GroupElement,
    lambda: u64,
    sample_t: u64,
) -> Result<CalibrationResult> {
    if sample_t < MIN_SAMPLE_T {
        return Err(Error::SampleTooSmall {
            sample_t,
            min: MIN_SAMPLE_T,
        });
    }
    let pp = pp.with_time_bound(sample_t)?;
    rsw::rsw_eval(&pp.with_time_bound(sample_t / 8)?, x)?;
    let mut times = Vec::with_capacity(CALIBRATION_TRIALS);
    for _ in 0..CALIBRATION_TRIALS {
        let (out, dt) = time_once(|| rsw::rsw_eval(&pp, x));
        out?;
        times.push(dt);
    }
    times.sort();
    let mid = times[times.len() / 2];
    if mid < MIN_MEASURABLE {
        return Err(Error::TimerResolution(mid));
    }
    Ok(CalibrationResult {
        rate: sample_t as f64 / mid.as_secs_f64(),
        lambda,
        sample_t,
    })
}

/// Sequential evaluation time for `T = 2^j`, `j` in `j_min..=j_max`.
pub fn bench_eval_sweep(
    lambda: u64,
    j_range: (u32, u32),
    trials: u32,
    budget: Option<Duration>,
) -> Result<Sweep> {
    if trials == 0 || j_range.0 > j_range.1 {
        return Ok(Sweep::default());
    }
    let (pp, _, x) = bench_puzzle(lambda)?;
    bench_eval_sweep_with(&pp, &x, lambda, j_range, trials, budget)
}

pub fn bench_eval_sweep_with(
    pp: &RswPublicParams,
    x: &GroupElement,
    lambda: u64,
    (j_min, j_max): (u32, u32),
    trials: u32,
    budget: Option<Duration>,
) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    if trials == 0 || j_min > j_max {
        return Ok(sweep);
    }
    let started = Instant::now();
    rsw::rsw_eval(&pp.with_time_bound(time_bound_for(j_min)?)?, x)?;
    'outer: for j in j_min..=j_max {
        let pp_j = pp.with_time_bound(time_bound_for(j)?)?;
        for trial in 0..trials {
            if budget.is_some_and(|b| started.elapsed() > b) {
                sweep.truncated = true;
                break 'outer;
            }
            let (out, dt) = time_once(|| rsw::rsw_eval(&pp_j, x));
            out?;
            sweep.records.push(BenchRecord {
                operation: Operation::Eval,
                lambda,
                j,
                trial,
                wall_time: seconds(dt),
            });
        }
    }
    Ok(sweep)
}

/// Trapdoor evaluation time for every `(lambda, j)` pair. At each `lambda`
/// the trials cycle through all `j` in turn.
pub fn bench_tdeval_grid(lambdas: &[u64], js: &[u32], trials: u32) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::new();
    if trials == 0 || js.is_empty() {
        return Ok(records);
    }
    for &lambda in lambdas {
        let (pp, sp, x) = bench_puzzle(lambda)?;
        let cases = js
            .iter()
            .map(|&j| Ok((j, pp.with_time_bound(time_bound_for(j)?)?)))
            .collect::<Result<Vec<_>>>()?;
        rsw::rsw_td_eval(&cases[0].1, &sp, &x)?;
        for trial in 0..trials {
            for (j, pp_j) in &cases {
                let (out, dt) = time_once(|| rsw::rsw_td_eval(pp_j, &sp, &x));
                out?;
                records.push(BenchRecord {
                    operation: Operation::TdEval,
                    lambda,
                    j: *j,
                    trial,
                    wall_time: seconds(dt),
                });
            }
        }
    }
    records.sort_by_key(|r| (r.lambda, r.j, r.trial));
    Ok(records)
}

/// Trapdoor evaluation across `lambda_list` at `T = 2^fixed_j`.
pub fn bench_tdeval_sweep(lambda_list: &[u64], fixed_j: u32, trials: u32) -> Result<Vec<BenchRecord>> {
    bench_tdeval_grid(lambda_list, &[fixed_j], trials)
}

/// Signature costs on one modulus across `T = 2^j`: eval, forge, sign and
/// verify for each `j`. Each trial round visits every `j` and operation in
/// turn, so drift hits all series alike.
pub fn bench_sls(lambda: u64, js: &[u32], trials: u32) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::new();
    if trials == 0 || js.is_empty() {
        return Ok(records);
    }
    let (base, sp, x) = bench_puzzle(lambda)?;
    let group = dlog::SchnorrGroup::for_modulus_bits(base.modulus().bit_length())?;
    let mut rng = ChaCha20Rng::from_seed(tagged_hash("bench-sls", &[&lambda.to_be_bytes()]));
    let keypair = dlog::Keypair::generate(group, &mut rng);
    let beacon = BeaconValue {
        round: 0,
        value: tagged_hash("bench-beacon", &[]),
        timestamp: 0,
    };
    let message = b"benchmark message";

    let mut cases = Vec::with_capacity(js.len());
    for &j in js {
        let rsw_pp = base.with_time_bound(time_bound_for(j)?)?;
        let (pp, sk): (SlsPublicParams, SlsSecretKey) =
            sls::sls_setup_with(rsw_pp.clone(), &sp, x.clone(), &keypair)?;
        let sig = sls::sls_sign(&pp, message, &beacon, &sk)?;
        cases.push((j, rsw_pp, pp, sk, sig));
    }

    // warm-up
    if let Some((_, rsw_pp, pp, _, sig)) = cases.first() {
        rsw::rsw_eval(rsw_pp, &x)?;
        sls::sls_verify(pp, message, &beacon, sig);
    }

    let mut push = |operation, j, trial, dt| {
        records.push(BenchRecord {
            operation,
            lambda,
            j,
            trial,
            wall_time: seconds(dt),
        })
    };
    for trial in 0..trials {
        for (j, rsw_pp, pp, sk, sig) in &cases {
            let (out, dt) = time_once(|| rsw::rsw_eval(rsw_pp, &x));
            out?;
            push(Operation::Eval, *j, trial, dt);
            let (out, dt) = time_once(|| sls::sls_forge_sign(pp, message, &beacon));
            out?;
            push(Operation::Forge, *j, trial, dt);
            let (out, dt) = time_once(|| sls::sls_sign(pp, message, &beacon, sk));
            out?;
            push(Operation::Sign, *j, trial, dt);
            let (verdict, dt) = time_once(|| sls::sls_verify(pp, message, &beacon, sig));
            if !verdict.is_accept() {
                return Err(Error::MalformedParameters("benchmark signature failed to verify"));
            }
            push(Operation::Verify, *j, trial, dt);
        }
    }
    records.sort_by_key(|r| (r.j, r.operation, r.trial));
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(Error::Parse(format!("unknown report format {other:?}"))),
        }
    }
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(out, "{},{},{},{},{}", r.operation, r.lambda, r.j, r.trial, r.wall_time).unwrap();
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("bad CSV header {other:?}"))),
    }
    let bad = |line: &str| Error::Parse(format!("bad CSV row {line:?}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let [op, lambda, j, trial, wall] = fields[..] else {
                return Err(bad(line));
            };
            let wall_time: f64 = wall.parse().map_err(|_| bad(line))?;
            if !(wall_time > 0.0) {
                return Err(bad(line));
            }
            Ok(BenchRecord {
                operation: op.parse()?,
                lambda: lambda.parse().map_err(|_| bad(line))?,
                j: j.parse().map_err(|_| bad(line))?,
                trial: trial.parse().map_err(|_| bad(line))?,
                wall_time,
            })
        })
        .collect()
}

/// Line chart of medians. Records that sweep `lambda` at a single `j` are
/// plotted against `lambda`, everything else against `j`.
pub fn to_svg(records: &[BenchRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Report("cannot chart an empty record set".into()));
    }
    let meds = medians(records);
    let single_j = meds.iter().all(|m| m.2 == meds[0].2);
    let multi_lambda = meds.iter().any(|m| m.1 != meds[0].1);
    let by_lambda = single_j && multi_lambda;
    let (title, x_label) = if by_lambda {
        ("Trapdoor Evaluation Time", "Security Parameter (bits per prime)")
    } else {
        ("Evaluation Time", "Number of Exponentiations")
    };

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for &(op, lambda, j, t) in &meds {
        let (key, x) = if by_lambda {
            (op.to_string(), lambda as f64)
        } else if multi_lambda {
            (format!("{op} (lambda={lambda})"), j as f64)
        } else {
            (op.to_string(), j as f64)
        };
        series.entry(key).or_default().push((x, t));
    }

    let (w, h, margin) = (640.0, 400.0, 60.0);
    let xs = meds.iter().map(|m| if by_lambda { m.1 as f64 } else { m.2 as f64 });
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let y_max = meds.iter().map(|m| m.3).fold(0.0, f64::max);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_span = if y_max > 0.0 { y_max } else { 1.0 };
    let px = |x: f64| margin + (x - x_min) / x_span * (w - 2.0 * margin);
    let py = |y: f64| h - margin - y / y_span * (h - 2.0 * margin);

    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0).unwrap();
    writeln!(svg, r#"<line x1="{margin}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - margin, w - margin).unwrap();
    writeln!(svg, r#"<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{}" stroke="black"/>"#, h - margin).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#, w / 2.0, h - 15.0).unwrap();
    writeln!(
        svg,
        r#"<text x="15" y="{0}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {0})">Time (s)</text>"#,
        h / 2.0
    )
    .unwrap();
    writeln!(svg, r#"<text x="{margin}" y="{}" font-size="10" text-anchor="middle">{x_min}</text>"#, h - margin + 14.0).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">{x_max}</text>"#, w - margin, h - margin + 14.0).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y_max:.3e}</text>"#, margin - 4.0, margin + 4.0).unwrap();
    for (i, (name, points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" data-series="{name}" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            margin + 10.0,
            margin + 14.0 * (i as f64 + 1.0)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_report(records: &[BenchRecord], format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => to_csv(records),
        ReportFormat::Svg => to_svg(records)?,
    };
    fs::write(path, body)?;
    Ok(())
}
