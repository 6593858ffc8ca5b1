use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cas_core::checker::{measure_recovery, run_check, storage_report, Verdict, CHECK_NAMES};
use cas_core::coding::{rs_decode, rs_encode, share_secret, Field, FieldElement, Polynomial, ShareVector};
use cas_core::sim::{run, Scenario, Trace};

/// Coded atomic storage simulator and checkers.
#[derive(Parser)]
#[command(name = "cas", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario file and check the resulting traces.
    Run(RunArgs),
    /// Check a recorded trace file.
    Check(CheckArgs),
    /// Encode or decode shares by hand.
    #[command(subcommand)]
    Codec(CodecCmd),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Comma-separated checks, or "all".
    #[arg(long, default_value = "atomicity,liveness")]
    check: String,
    /// Seed range such as 1..50 (inclusive) or a single seed. Defaults to the scenario's seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Step budget override.
    #[arg(long)]
    budget: Option<u64>,
    /// Where to write the trace. With several seeds the seed is appended.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Concurrency bound used by the storage check.
    #[arg(long)]
    delta: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    trace: PathBuf,
    #[arg(long, default_value = "atomicity,liveness")]
    check: String,
    #[arg(long)]
    delta: Option<usize>,
}

#[derive(Args)]
struct CodeParams {
    #[arg(long, default_value_t = 257)]
    p: u64,
    #[arg(long)]
    k: usize,
    /// Replace share i (1-based) with v, as i=v. Repeatable.
    #[arg(long, value_parser = parse_corruption)]
    corrupt: Vec<(usize, u64)>,
    /// Erase share i (1-based). Repeatable.
    #[arg(long)]
    erase: Vec<usize>,
}

#[derive(Subcommand)]
enum CodecCmd {
    /// Print the n shares of a secret.
    Encode {
        #[command(flatten)]
        params: CodeParams,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        secret: u64,
        /// Higher coefficients, comma-separated; drawn from --seed when absent.
        #[arg(long, value_delimiter = ',')]
        coeffs: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover the secret from shares; "_" marks a missing share.
    Decode {
        #[command(flatten)]
        params: CodeParams,
        #[arg(required = true, num_args = 1..)]
        shares: Vec<String>,
    },
}

fn parse_corruption(s: &str) -> Result<(usize, u64), String> {
    let (i, v) = s.split_once('=').ok_or_else(|| format!("expected i=v, got {s:?}"))?;
    Ok((i.parse().map_err(|_| format!("bad index {i:?}"))?, v.parse().map_err(|_| format!("bad value {v:?}"))?))
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let num = |x: &str| x.trim().parse::<u64>().with_context(|| format!("bad seed {x:?}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if a > b {
        bail!("empty seed range {s}");
    }
    Ok((a..=b).collect())
}

fn parse_checks(list: &str) -> Result<Vec<&'static str>> {
    if list == "all" {
        return Ok(CHECK_NAMES.to_vec());
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| CHECK_NAMES.iter().copied().find(|c| *c == name).ok_or_else(|| anyhow!("unknown check {name:?}")))
        .collect()
}

/// Usage and input errors exit with 2, failed checks with 1.
enum Failure {
    Usage(anyhow::Error),
    Check,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::Usage(e)
    }
}

struct Report {
    seed: u64,
    digest: u64,
    steps: u64,
    cycles: u64,
    complete: bool,
    recovery: Option<u64>,
    max_storage: usize,
    trace_path: Option<PathBuf>,
    verdicts: Vec<(&'static str, Verdict)>,
}

impl Report {
    fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, v)| !v.is_fail())
    }

    fn print(&self) {
        let opt = |v: Option<u64>| v.map_or("-".into(), |c| c.to_string());
        println!(
            "seed {} digest {:016x} steps {} cycles {} finished {} recovery-cycle {} max-storage {} trace {}",
            self.seed,
            self.digest,
            self.steps,
            self.cycles,
            self.complete,
            opt(self.recovery),
            self.max_storage,
            self.trace_path.as_deref().map_or("-".into(), |p| p.display().to_string()),
        );
        for (name, v) in &self.verdicts {
            match v {
                Verdict::Pass => println!("CHECK {name} PASS"),
                Verdict::Fail(m) | Verdict::Skip(m) => println!("CHECK {name} {} {m}", v.label()),
            }
        }
    }
}

fn trace_stats(trace: &Trace) -> (u64, u64) {
    let last = trace.events.last();
    (last.map_or(0, |e| e.step), last.map_or(0, |e| e.cycle))
}

fn evaluate(trace: &Trace, checks: &[&'static str], delta: Option<usize>) -> Vec<(&'static str, Verdict)> {
    checks
        .iter()
        .map(|&c| (c, run_check(c, trace, delta).expect("names validated")))
        .collect()
}

fn trace_file(base: &Path, seed: u64, batch: bool) -> PathBuf {
    if !batch {
        return base.to_path_buf();
    }
    let mut name = base.as_os_str().to_owned();
    name.push(format!(".{seed}"));
    PathBuf::from(name)
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let checks = parse_checks(&a.check)?;
    let text = fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let mut base = Scenario::parse(&text).map_err(|e| anyhow!("{}: {e}", a.scenario.display()))?;
    if let Some(b) = a.budget {
        base.budget = b;
    }
    let seeds = match &a.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![base.seed],
    };
    let batch = seeds.len() > 1;
    let reports: Vec<Result<Report>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut sc = base.clone();
            sc.seed = seed;
            let trace = run(&sc)?;
            let trace_path = a.trace.as_deref().map(|p| trace_file(p, seed, batch));
            if let Some(p) = &trace_path {
                fs::write(p, trace.to_text()).with_context(|| format!("writing {}", p.display()))?;
            }
            let (steps, cycles) = trace_stats(&trace);
            Ok(Report {
                seed,
                digest: sc.digest(),
                steps,
                cycles,
                complete: trace.is_complete(),
                recovery: measure_recovery(&trace).ok().map(|r| r.cycle),
                max_storage: storage_report(&trace, usize::MAX).max_overall,
                trace_path,
                verdicts: evaluate(&trace, &checks, a.delta),
            })
        })
        .collect();
    let reports: Vec<Report> = reports.into_iter().collect::<Result<_>>()?;
    for r in &reports {
        r.print();
    }
    if batch {
        let passed = reports.iter().filter(|r| r.passed()).count();
        let per_check: Vec<String> = checks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let ok = reports.iter().filter(|r| !r.verdicts[i].1.is_fail()).count();
                format!("{c} {ok}/{}", reports.len())
            })
            .collect();
        println!("summary runs {} passed {passed} failed {} ({})", reports.len(), reports.len() - passed, per_check.join(", "));
    }
    if reports.iter().all(Report::passed) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_check(a: &CheckArgs) -> Result<(), Failure> {
    let checks = parse_checks(&a.check)?;
    let text = fs::read_to_string(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let trace = Trace::parse(&text).map_err(|e| anyhow!("{}: {e}", a.trace.display()))?;
    let verdicts = evaluate(&trace, &checks, a.delta);
    for (name, v) in &verdicts {
        match v {
            Verdict::Pass => println!("CHECK {name} PASS"),
            Verdict::Fail(m) | Verdict::Skip(m) => println!("CHECK {name} {} {m}", v.label()),
        }
    }
    if verdicts.iter().any(|(_, v)| v.is_fail()) {
        return Err(Failure::Check);
    }
    Ok(())
}

fn element(field: &Field, v: u64) -> Result<FieldElement> {
    let e = FieldElement(v);
    if !field.contains(e) {
        bail!("{v} is not an element of GF({})", field.modulus());
    }
    Ok(e)
}

fn tamper(field: &Field, sv: &mut ShareVector, params: &CodeParams) -> Result<()> {
    let n = sv.n();
    let check = |i: usize| {
        if i == 0 || i > n {
            bail!("share index {i} out of range 1..={n}");
        }
        Ok(())
    };
    for &(i, v) in &params.corrupt {
        check(i)?;
        sv.set(i, element(field, v)?);
    }
    for &i in &params.erase {
        check(i)?;
        sv.erase(i);
    }
    Ok(())
}

fn cmd_codec(c: &CodecCmd) -> Result<(), Failure> {
    match c {
        CodecCmd::Encode { params, n, secret, coeffs, seed } => {
            let field = Field::new(params.p).map_err(anyhow::Error::from)?;
            let secret = element(&field, *secret)?;
            let mut sv = if coeffs.is_empty() {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                share_secret(&field, secret, params.k, *n, &mut rng).map_err(anyhow::Error::from)?.1
            } else {
                if coeffs.len() + 1 != params.k {
                    return Err(anyhow!("need k-1 = {} coefficients, got {}", params.k.saturating_sub(1), coeffs.len()).into());
                }
                let mut all = vec![secret];
                for &v in coeffs {
                    all.push(element(&field, v)?);
                }
                rs_encode(&field, &Polynomial::new(all), *n).map_err(anyhow::Error::from)?
            };
            tamper(&field, &mut sv, params)?;
            println!("{sv}");
            Ok(())
        }
        CodecCmd::Decode { params, shares } => {
            let field = Field::new(params.p).map_err(anyhow::Error::from)?;
            let slots = shares
                .iter()
                .flat_map(|s| s.split([' ', ',']))
                .filter(|s| !s.is_empty())
                .map(|s| match s {
                    "_" => Ok(None),
                    _ => element(&field, s.parse().with_context(|| format!("bad share {s:?}"))?).map(Some),
                })
                .collect::<Result<Vec<_>>>()?;
            let mut sv = ShareVector::from_slots(slots);
            tamper(&field, &mut sv, params)?;
            if params.k == 0 || params.k > sv.n() {
                return Err(anyhow!("need 1 <= k <= {}", sv.n()).into());
            }
            match rs_decode(&field, &sv, params.k) {
                Some(poly) => {
                    println!("{}", poly.secret());
                    Ok(())
                }
                None => {
                    eprintln!("decode failed: {} shares available, k={}", sv.n_avail(), params.k);
                    Err(Failure::Check)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Codec(c) => cmd_codec(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
