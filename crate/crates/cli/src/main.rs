//! `stokes`: compute Stokes waves, Babenko spectra and Floquet stability
//! spectra from the command line.
//!
//! Exit status: 0 success, 1 numerical failure, 2 usage error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use stokes_core::babenko::{self, EigOptions, EigenPair, Parity};
use stokes_core::stability::{self, ShiftPolicy, StabilityOptions};
use stokes_core::stokes::{
    self, compute_hamiltonian, continue_branch, BranchState, ContinuationPolicy, StokesWave, LIMITING_STEEPNESS,
};

const THREADS_ENV: &str = "STOKES_THREADS";

#[derive(Parser, Debug)]
#[command(name = "stokes", version, about = "Stokes waves, Babenko spectra and Floquet stability spectra")]
#[command(args_override_self = true)]
struct Cli {
    /// Key-value file (`key = value` per line, keys are long flag names)
    /// read before the command-line flags, which take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continue from the flat surface (or a seed wave) to a target steepness.
    Wave(WaveArgs),
    /// Eigenvalues of the linearized Babenko operator.
    Babenko(BabenkoArgs),
    /// Floquet stability spectrum over a schedule of mu values.
    Stability(StabilityArgs),
}

#[derive(Args, Debug)]
struct WaveArgs {
    /// Target steepness `s = H / lambda`.
    #[arg(long)]
    steepness: f64,
    /// Number of Fourier modes `N` (even, at least 8).
    #[arg(long, default_value_t = 512)]
    modes: usize,
    /// Auxiliary conformal map parameter in (0, 1]; 1 is the identity.
    #[arg(long, default_value_t = 1.0)]
    aux: f64,
    #[arg(long, default_value_t = 1.0)]
    gravity: f64,
    /// Start from this wave file instead of the flat surface.
    #[arg(long, value_name = "FILE")]
    seed: Option<PathBuf>,
    /// Refine `N` and tighten the map as the wave steepens.
    #[arg(long)]
    adaptive: bool,
    /// Largest continuation step in `s`.
    #[arg(long, default_value_t = 0.004)]
    max_step: f64,
    /// Output wave file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Branch summary table `s,c,kinetic,potential`; defaults to `<out>.branch.csv`.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// Also store every wave of the branch in this directory.
    #[arg(long, value_name = "DIR")]
    branch_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParityArg {
    Even,
    Odd,
    Any,
}

impl ParityArg {
    fn parity(self) -> Option<Parity> {
        match self {
            ParityArg::Even => Some(Parity::Even),
            ParityArg::Odd => Some(Parity::Odd),
            ParityArg::Any => None,
        }
    }
}

#[derive(Args, Debug)]
struct BabenkoArgs {
    /// Wave file; the eigenvalues nearest each shift are computed on it.
    #[arg(long, value_name = "FILE", required_unless_present = "branch")]
    wave: Option<PathBuf>,
    /// Directory of wave files forming a branch (as written by `wave --branch-dir`).
    #[arg(long, value_name = "DIR", conflicts_with = "wave")]
    branch: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Comma-separated real shifts.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    shifts: Vec<f64>,
    /// Eigenvalues per shift.
    #[arg(long, default_value_t = 1)]
    nev: usize,
    /// Parity class (only meaningful at mu = 0 and mu = 1/2).
    #[arg(long, value_enum, default_value_t = ParityArg::Any)]
    parity: ParityArg,
    /// With `--branch`: locate the zero of the eigenvalue nearest 0 inside `LO,HI`.
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "LO,HI", requires = "branch")]
    bisect: Option<Vec<f64>>,
    /// Bisection tolerance in `s`.
    #[arg(long, default_value_t = 1e-5)]
    tol_s: f64,
    /// Output table; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[arg(long, value_name = "FILE")]
    wave: PathBuf,
    /// Linear schedule on the half-open interval (A, B].
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "mu_log")]
    mu: Option<Vec<f64>>,
    /// Logarithmic schedule from A to B inclusive.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    mu_log: Option<Vec<f64>>,
    /// Number of mu values.
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// `zero`, `track:SIGMA` or `ladder:S1,S2,...`.
    #[arg(long, default_value = "zero", value_parser = parse_policy, allow_hyphen_values = true)]
    shift: ShiftPolicy,
    /// Eigenvalues per shift.
    #[arg(long, default_value_t = 4)]
    nev: usize,
    /// Sweep export; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn parse_policy(text: &str) -> Result<ShiftPolicy, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad shift `{t}`: {e}"));
    match text.split_once(':') {
        None if text == "zero" => Ok(ShiftPolicy::Zero),
        Some(("track", v)) => Ok(ShiftPolicy::Track(num(v)?)),
        Some(("ladder", v)) => Ok(ShiftPolicy::Ladder(v.split(',').map(num).collect::<Result<_, _>>()?)),
        _ => Err(format!("expected `zero`, `track:SIGMA` or `ladder:S1,S2,...`, got `{text}`")),
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

fn usage(msg: String) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg))
}

fn numerical(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Numerical(e.into())
}

/// Turns `key = value` lines into flags placed right after the subcommand.
fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), no + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.extend(value.split_whitespace().map(str::to_string));
            }
        }
    }
    Ok(out)
}

fn config_path(raw: &[String]) -> Option<PathBuf> {
    let mut it = raw.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn parse(raw: Vec<String>) -> Result<Cli, clap::Error> {
    let sub = raw.iter().position(|a| matches!(a.as_str(), "wave" | "babenko" | "stability"));
    let (Some(path), Some(sub)) = (config_path(&raw), sub) else { return Cli::try_parse_from(&raw) };
    let extra = config_args(&path)
        .map_err(|e| Cli::command().error(clap::error::ErrorKind::InvalidValue, format!("{e:#}")))?;
    let mut merged: Vec<String> = raw[..=sub].to_vec();
    merged.extend(extra);
    merged.extend(raw[sub + 1..].iter().cloned());
    let matches = Cli::command().try_get_matches_from(merged)?;
    Cli::from_arg_matches(&matches)
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => Ok(Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display())).map_err(Failure::Usage)?,
        ))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn load_wave(path: &Path) -> Result<StokesWave, Failure> {
    stokes::read_wave(path).with_context(|| format!("reading wave {}", path.display())).map_err(Failure::Usage)
}

fn load_branch(dir: &Path) -> Result<BranchState, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading branch directory {}", dir.display()))
        .map_err(Failure::Usage)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wave"))
        .collect();
    files.sort();
    let mut waves = files.iter().map(|p| load_wave(p)).collect::<Result<Vec<_>, _>>()?;
    waves.sort_by(|a, b| a.steepness().total_cmp(&b.steepness()));
    let mut branch = BranchState::new();
    for w in waves {
        branch.push(w).map_err(|e| Failure::Usage(anyhow::anyhow!("{}: {e}", dir.display())))?;
    }
    if branch.is_empty() {
        return Err(usage(format!("no .wave files in {}", dir.display())));
    }
    Ok(branch)
}

fn check_mu(mu: f64) -> Result<(), Failure> {
    if (0.0..1.0).contains(&mu) {
        Ok(())
    } else {
        Err(usage(format!("mu = {mu} outside [0, 1)")))
    }
}

fn cmd_wave(a: &WaveArgs) -> Result<(), Failure> {
    if !(a.steepness >= 0.0 && a.steepness < LIMITING_STEEPNESS) {
        return Err(usage(format!("steepness {} outside [0, {LIMITING_STEEPNESS})", a.steepness)));
    }
    if a.modes < 8 || a.modes % 2 != 0 {
        return Err(usage(format!("modes = {} must be even and at least 8", a.modes)));
    }
    if !(a.aux > 0.0 && a.aux <= 1.0) {
        return Err(usage(format!("aux = {} outside (0, 1]", a.aux)));
    }
    if !(a.gravity > 0.0) || !(a.max_step > 0.0) {
        return Err(usage("gravity and max-step must be positive".into()));
    }
    let start = match &a.seed {
        Some(p) => load_wave(p)?,
        None if a.aux == 1.0 => StokesWave::flat(a.modes, a.gravity).map_err(numerical)?,
        None => StokesWave::flat_mapped(a.modes, a.gravity, a.aux).map_err(numerical)?,
    };
    let base = if a.adaptive { ContinuationPolicy::default() } else { ContinuationPolicy::fixed_resolution() };
    let policy = ContinuationPolicy {
        max_step: a.max_step,
        initial_step: base.initial_step.min(a.max_step),
        stops: vec![a.steepness],
        ..base
    };
    let (branch, err) = if a.steepness <= start.steepness() {
        let mut b = BranchState::new();
        b.push(start).map_err(numerical)?;
        (b, None)
    } else {
        match continue_branch(&start, a.steepness, &policy) {
            Ok(b) => (b, None),
            Err(f) => (f.partial, Some(f.error)),
        }
    };
    let summary = a.summary.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".branch.csv");
        PathBuf::from(s)
    });
    let mut table = open_out(&Some(summary))?;
    writeln!(table, "s,c,kinetic,potential").map_err(numerical)?;
    for w in &branch.waves {
        let h = compute_hamiltonian(w);
        writeln!(table, "{:.16e},{:.16e},{:.16e},{:.16e}", w.steepness(), w.c(), h.kinetic, h.potential)
            .map_err(numerical)?;
    }
    table.flush().map_err(numerical)?;
    if let Some(dir) = &a.branch_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::Usage)?;
        for (i, w) in branch.waves.iter().enumerate() {
            stokes::write_wave(w, dir.join(format!("wave_{i:04}.wave"))).map_err(numerical)?;
        }
    }
    if let Some(e) = err {
        let reached = branch.last().map_or(0.0, |w| w.steepness());
        return Err(numerical(anyhow::anyhow!("continuation stopped at s = {reached}: {e}")));
    }
    let w = branch.last().expect("branch holds the start wave");
    stokes::write_wave(w, &a.out).map_err(numerical)?;
    eprintln!(
        "s = {:.10}, c = {:.15}, N = {}, L = {}, residual = {:.2e}",
        w.steepness(),
        w.c(),
        w.n_modes(),
        w.l(),
        w.residual_norm()
    );
    Ok(())
}

fn cmd_babenko(a: &BabenkoArgs) -> Result<(), Failure> {
    check_mu(a.mu)?;
    if a.nev == 0 || a.shifts.is_empty() || a.shifts.iter().any(|s| !s.is_finite()) {
        return Err(usage("need nev >= 1 and at least one finite shift".into()));
    }
    let opts = EigOptions { parity: a.parity.parity(), ..Default::default() };
    let mut out = open_out(&a.out)?;
    if let (Some(dir), Some(b)) = (&a.branch, &a.bisect) {
        if b.len() != 2 || !(b[0] < b[1]) || !(a.tol_s > 0.0) {
            return Err(usage("--bisect takes LO,HI with LO < HI".into()));
        }
        let branch = load_branch(dir)?;
        let bp = babenko::find_branch_point(&branch, a.mu, (b[0], b[1]), a.tol_s, &opts).map_err(numerical)?;
        writeln!(out, "s_star,mu,kind,bracket_width").map_err(numerical)?;
        writeln!(out, "{:.16e},{:.16e},{:?},{:.16e}", bp.s_star, bp.mu, bp.kind, bp.bracket_width)
            .map_err(numerical)?;
        return out.flush().map_err(numerical);
    }
    let mut rows: Vec<(f64, EigenPair)> = Vec::new();
    let mut err = None;
    if let Some(dir) = &a.branch {
        let branch = load_branch(dir)?;
        let first = &branch.waves[0];
        'seeds: for &sigma in &a.shifts {
            let seeds = match babenko::eigs_nearest(first, sigma, a.mu, a.nev, None, &opts) {
                Ok(p) => p,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            };
            for seed in &seeds {
                match babenko::track_eigenvalue_branch(&branch, seed, &opts) {
                    Ok(track) => rows.extend(track),
                    Err(e) => {
                        err = Some(e);
                        break 'seeds;
                    }
                }
            }
        }
    } else {
        let w = load_wave(a.wave.as_deref().expect("clap requires --wave or --branch"))?;
        for &sigma in &a.shifts {
            match babenko::eigs_nearest(&w, sigma, a.mu, a.nev, None, &opts) {
                Ok(pairs) => rows.extend(pairs.into_iter().map(|p| (w.steepness(), p))),
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
    }
    babenko::write_spectrum(&mut out, &rows).map_err(numerical)?;
    out.flush().map_err(numerical)?;
    match err {
        Some(e) => Err(numerical(e)),
        None => Ok(()),
    }
}

fn cmd_stability(a: &StabilityArgs) -> Result<(), Failure> {
    if a.points == 0 || a.nev == 0 {
        return Err(usage("points and nev must be positive".into()));
    }
    let schedule = match (&a.mu, &a.mu_log) {
        (_, Some(r)) => {
            if !(r[0] > 0.0 && r[0] < r[1]) {
                return Err(usage(format!("--mu-log needs 0 < A < B, got {} {}", r[0], r[1])));
            }
            stability::mu_log(r[0], r[1], a.points)
        }
        (Some(r), None) => {
            if !(r[0] < r[1]) {
                return Err(usage(format!("--mu needs A < B, got {} {}", r[0], r[1])));
            }
            (1..=a.points).map(|i| r[0] + (r[1] - r[0]) * i as f64 / a.points as f64).collect()
        }
        (None, None) => return Err(usage("one of --mu A B or --mu-log A B is required".into())),
    };
    for &mu in &schedule {
        check_mu(mu)?;
    }
    let w = load_wave(&a.wave)?;
    let sweep =
        stability::floquet_sweep(&w, &schedule, &a.shift, a.nev, &StabilityOptions::default()).map_err(numerical)?;
    let mut out = open_out(&a.out)?;
    stability::write_sweep(&mut out, &w, &sweep).map_err(numerical)?;
    out.flush().map_err(numerical)?;
    let (mu_star, gamma_star) = sweep.max_growth;
    println!("mu* = {mu_star:.16e}, gamma* = {gamma_star:.16e}");
    if !sweep.failures.is_empty() {
        for (mu, msg) in &sweep.failures {
            eprintln!("mu = {mu}: {msg}");
        }
        return Err(numerical(anyhow::anyhow!("{} failed solves", sweep.failures.len())));
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| usage(format!("{THREADS_ENV} = `{v}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args().collect()) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Wave(a) => cmd_wave(a),
        Command::Babenko(a) => cmd_babenko(a),
        Command::Stability(a) => cmd_stability(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
