//! `ergolab` command-line driver.
//!
//! Exit codes: 0 on success, 1 on configuration errors (bad flags, bad
//! config files, parameter violations), 2 when a precondition or a
//! verification fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::parse_config;
use super::{conjugation_target, genericity_sample, sample_to_csv, scenario_build, Scenario, ScenarioKind};
use crate::approx::{make_piecewise, piecewise_approximate};
use crate::conjugator::{build_conjugator, check_level_agreement, conjugate, verify_closeness};
use crate::error::Error;
use crate::skew::{flatten, SkewSystem};
use crate::space::{fmt_ratio, hamming_distance, Automorphism, CellSpace, Rational};
use crate::tower::{build_tower, refine_tower};
use crate::wm::{format_float, wm_profile, WM_CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "ergolab", about = "Exact permutation experiments for skew products and relative weak mixing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Build and print a Rohlin tower for the base map.
    Tower,
    /// Piecewise-constant approximation report.
    Approx,
    /// Approximate, build tower, refine, build the conjugator and verify closeness.
    Conjugate,
    /// Relative weak mixing profile as CSV.
    Wm,
    /// Seeded genericity sample as CSV.
    Sample,
    /// Serialize and parse the system back, checking byte equality.
    Roundtrip,
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// trivial | compact | product_wm | random_piecewise | conjugation_demo
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Base resolution.
    #[arg(long = "N", global = true)]
    base: Option<usize>,
    /// Fiber resolution.
    #[arg(long = "M", global = true)]
    fiber: Option<usize>,
    /// Tower height.
    #[arg(long = "n", global = true)]
    height: Option<usize>,
    /// Rational (`p/q`) or decimal threshold.
    #[arg(long, global = true)]
    eps: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Comma-separated step counts.
    #[arg(long, global = true)]
    steps: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report statistics from exact rational arithmetic.
    #[arg(long, global = true)]
    exact: bool,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Serialized system (or permutation, for `tower`) instead of a scenario.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Serialized system approximated as the `conjugate` target.
    #[arg(long, global = true)]
    target: Option<PathBuf>,
    /// Dyadic depth of the `wm` test family.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Largest threshold denominator `k` (thresholds 1/1 … 1/k) for `wm`.
    #[arg(long, global = true)]
    kmax: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Aperiodic { .. }
            | Error::TowerTooCoarse { .. }
            | Error::DegenerateFiber(_)
            | Error::Structural(_)
            | Error::Overflow(_) => CliError::Failure(e.to_string()),
            Error::Dimension { .. }
            | Error::InvalidPermutation(_)
            | Error::InvalidCellSet(_)
            | Error::Parse { .. }
            | Error::InvalidParameter(_) => CliError::Config(e.to_string()),
        }
    }
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub trials: usize,
    pub out: Option<PathBuf>,
    pub exact: bool,
    pub threads: Option<usize>,
    pub input: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub depth: usize,
    pub kmax: usize,
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Config(format!("invalid value {raw:?} for {key}")))
}

/// Accepts `p/q`, an integer, or a plain decimal such as `0.05`.
pub fn parse_rational(raw: &str) -> Option<Rational> {
    if let Some((p, q)) = raw.split_once('/') {
        let (p, q): (i128, i128) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
        return (q != 0).then(|| Rational::new(p, q));
    }
    let (int, frac) = raw.split_once('.').unwrap_or((raw, ""));
    if frac.len() > 30 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer: i128 = digits.parse().ok()?;
    Some(Rational::new(numer, 10i128.pow(frac.len() as u32)))
}

fn parse_steps(raw: &str) -> Result<Vec<usize>, CliError> {
    let steps = raw
        .split(',')
        .map(|s| parse_value::<usize>("steps", s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if steps.is_empty() || steps.contains(&0) {
        return Err(CliError::Config("steps must be positive integers".into()));
    }
    Ok(steps)
}

fn resolve(flags: Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text).map_err(CliError::Config)?
        }
        None => Default::default(),
    };
    let pick = |cli: Option<String>, key: &str| cli.or_else(|| file.get(key).cloned());

    let kind = pick(flags.scenario, "scenario").unwrap_or_else(|| "trivial".into());
    let kind: ScenarioKind = kind.parse().map_err(|e: Error| CliError::Config(e.to_string()))?;
    let num = |cli: Option<usize>, key: &str, default: usize| -> Result<usize, CliError> {
        match cli {
            Some(v) => Ok(v),
            None => file.get(key).map_or(Ok(default), |raw| parse_value(key, raw)),
        }
    };
    let base = num(flags.base, "N", 16)?;
    let fiber = num(flags.fiber, "M", 3)?;
    let height = num(flags.height, "n", 4)?;
    let trials = num(flags.trials, "trials", 10)?;
    let depth = num(flags.depth, "depth", 1)?;
    let kmax = num(flags.kmax, "kmax", 4)?;
    let seed = match flags.seed {
        Some(s) => s,
        None => file.get("seed").map_or(Ok(0), |raw| parse_value("seed", raw))?,
    };
    let eps_raw = pick(flags.eps, "eps").unwrap_or_else(|| "1/4".into());
    let eps = parse_rational(&eps_raw)
        .filter(|e| *e > Rational::from_integer(0))
        .ok_or_else(|| CliError::Config(format!("eps must be a positive rational, got {eps_raw:?}")))?;
    let steps = parse_steps(&pick(flags.steps, "steps").unwrap_or_else(|| "64".into()))?;
    let exact = flags.exact || file.get("exact").map_or(Ok(false), |raw| parse_value("exact", raw))?;
    let threads = match flags.threads {
        Some(t) => Some(t),
        None => file.get("threads").map(|raw| parse_value("threads", raw)).transpose()?,
    };
    if threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    let path = |cli: Option<PathBuf>, key: &str| cli.or_else(|| file.get(key).map(PathBuf::from));
    Ok(RunConfig {
        scenario: Scenario {
            kind,
            base,
            fiber,
            height,
            eps,
            seed,
            steps,
        },
        trials,
        out: path(flags.out, "out"),
        exact,
        threads,
        input: path(flags.input, "input"),
        target: path(flags.target, "target"),
        depth,
        kmax,
    })
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_system(cfg: &RunConfig) -> Result<SkewSystem, CliError> {
    match &cfg.input {
        Some(path) => Ok(SkewSystem::from_text(&read_file(path)?)?),
        None => Ok(scenario_build(&cfg.scenario)?),
    }
}

fn load_base(cfg: &RunConfig) -> Result<Automorphism, CliError> {
    if let Some(path) = &cfg.input {
        let text = read_file(path)?;
        if text.starts_with("ergolab-perm ") {
            return Ok(Automorphism::from_text(&text)?);
        }
    }
    Ok(load_system(cfg)?.base_map().clone())
}

/// Output text plus whether the run verified successfully.
type Outcome = (String, bool);

fn run_tower(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let base = load_base(cfg)?;
    let tower = build_tower(&base, cfg.scenario.height, cfg.scenario.eps)?;
    let mut out = String::new();
    let _ = writeln!(out, "N {}", base.resolution());
    let _ = writeln!(out, "height {}", tower.height());
    let _ = writeln!(out, "base_cells {}", tower.base_set().len());
    let _ = writeln!(out, "error_mass {}", fmt_ratio(&tower.error_mass()));
    out.push_str(&tower.render());
    Ok((out, true))
}

fn run_approx(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = load_system(cfg)?;
    let spec = piecewise_approximate(&t, cfg.scenario.eps)?;
    let r = make_piecewise(t.base_map(), &spec)?;
    let mut out = String::new();
    let _ = writeln!(out, "eps {}", fmt_ratio(&cfg.scenario.eps));
    let _ = writeln!(out, "labels {}", spec.reps().len());
    let _ = writeln!(out, "grid_distance {}", fmt_ratio(&hamming_distance(&flatten(&t), &flatten(&r))?));
    out.push_str(&spec.render());
    Ok((out, true))
}

fn run_conjugate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = load_system(cfg)?;
    let target = match &cfg.target {
        Some(path) => SkewSystem::from_text(&read_file(path)?)?,
        None if cfg.input.is_none() && cfg.scenario.kind == ScenarioKind::ConjugationDemo => conjugation_target(&cfg.scenario)?,
        None => t.clone(),
    };
    if target.base_map() != t.base_map() || target.fiber_resolution() != t.fiber_resolution() {
        return Err(CliError::Config("target must share the base map and fiber resolution of the system".into()));
    }
    let spec = piecewise_approximate(&target, cfg.scenario.eps)?;
    let r = make_piecewise(t.base_map(), &spec)?;
    let tower = build_tower(t.base_map(), cfg.scenario.height, Rational::from_integer(1))?;
    let refined = refine_tower(&tower, t.base_map(), spec.partition())?;
    let q = build_conjugator(&t, &refined, &spec)?;
    let v = conjugate(&q, &t)?;
    let levels_exact = check_level_agreement(&v, &r, &tower).is_ok();
    let closeness = verify_closeness(&v, &r, tower.height(), tower.error_mass())?;
    let ok = closeness.ok && levels_exact;
    let mut out = String::new();
    let _ = writeln!(out, "labels {}", spec.reps().len());
    let _ = writeln!(out, "height {}", tower.height());
    let _ = writeln!(out, "columns {}", refined.columns().len());
    let _ = writeln!(out, "tower_error {}", fmt_ratio(&tower.error_mass()));
    let _ = writeln!(out, "levels_exact {levels_exact}");
    let _ = writeln!(out, "distance {}", fmt_ratio(&closeness.distance));
    let _ = writeln!(out, "bound {}", fmt_ratio(&closeness.bound));
    let _ = writeln!(out, "ok {ok}");
    Ok((out, ok))
}

fn system_id(cfg: &RunConfig) -> String {
    match &cfg.input {
        Some(_) => "input".into(),
        None => format!("{}-s{}", cfg.scenario.kind.name(), cfg.scenario.seed),
    }
}

fn run_wm(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = load_system(cfg)?;
    let max_steps = cfg.scenario.steps.iter().copied().max().unwrap_or(1);
    let report = wm_profile(&t, cfg.depth, cfg.kmax, max_steps)?;
    let id = system_id(cfg);
    let csv = if cfg.exact {
        report.to_csv(&id)
    } else {
        let mut out = String::from(WM_CSV_HEADER);
        out.push('\n');
        for p in &report.pairs {
            let _ = writeln!(
                out,
                "{id},{},{},{},{},1/{},{}",
                p.a_index,
                p.b_index,
                p.first_pass.unwrap_or(max_steps),
                format_float(p.dn.float),
                p.k,
                p.first_pass.is_some()
            );
        }
        out
    };
    eprint!("{}", report.summary());
    Ok((csv, true))
}

fn run_sample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let base = Automorphism::rotation(CellSpace::new(cfg.scenario.base)?);
    let rows = genericity_sample(&base, cfg.trials, cfg.scenario.fiber, cfg.scenario.seed, &cfg.scenario.steps)?;
    Ok((sample_to_csv(&rows, cfg.scenario.eps, cfg.exact), true))
}

fn run_roundtrip(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = load_system(cfg)?;
    let text = t.to_text();
    let back = SkewSystem::from_text(&text)?;
    let perm_text = t.base_map().to_text();
    let perm_back = Automorphism::from_text(&perm_text)?;
    let ok = back == t && back.to_text() == text && perm_back.to_text() == perm_text;
    if !ok {
        return Err(CliError::Failure("serialization round trip is not bit-exact".into()));
    }
    Ok((text, true))
}

fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Tower => run_tower(cfg),
        Command::Approx => run_approx(cfg),
        Command::Conjugate => run_conjugate(cfg),
        Command::Wm => run_wm(cfg),
        Command::Sample => run_sample(cfg),
        Command::Roundtrip => run_roundtrip(cfg),
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Config(format!("cannot write output: {e}")))
        }
    }
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = std::io::stdout().write_all(e.to_string().as_bytes());
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    let cfg = match resolve(cli.flags) {
        Ok(cfg) => cfg,
        Err(CliError::Config(msg) | CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let run = || execute(cli.command, &cfg).and_then(|(text, ok)| emit(&cfg, &text).map(|_| ok));
    let result = match cfg.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(CliError::Config(format!("cannot start thread pool: {e}"))),
        },
        None => run(),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: verification failed");
            2
        }
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
