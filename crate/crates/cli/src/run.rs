//! Command dispatch and artifact writing.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use ugc_equilibrium::fullinfo::{perturbed_dynamics, solve, DynamicsOptions, DynamicsResult, SolveOptions, Verdict};
use ugc_equilibrium::model::{ActionSpace, Information};
use ugc_equilibrium::partialinfo::{calibrate_beta, solve_m5, solve_m7, M7Options};
use ugc_equilibrium::svg::strategy_svg;
use ugc_equilibrium::verify::{
    enumerate_binary_equilibria, grid_nonexistence_scan, mc_symmetric_check, verify_pne, CandidateStrategy,
};
use ugc_equilibrium::{ActionProfile, Error, GameConfig, Mechanism, SymmetricStrategy};

use crate::config::{parse_config, RunConfig};

pub const EXIT_OK: i32 = 0;
/// A non-existence verdict.
pub const EXIT_NONE: i32 = 1;
/// Bad input: unreadable or invalid config, unsupported command.
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNCERTIFIED: i32 = 3;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DEFAULT_M7_SAMPLES: usize = 100_000;
pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_EPSILON: f64 = 1e-8;
/// Scan cells per unit for the non-existence oracle (step 0.05).
pub const DEFAULT_SCAN_CELLS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Verify,
    Curve,
    Dynamics,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub seed: u64,
    pub mc_samples: Option<usize>,
    pub tol: Option<f64>,
    pub all: bool,
    pub grid: Option<usize>,
    /// JSON array holding the profile for `verify`; overrides the config's.
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub command: Command,
    pub config: PathBuf,
    /// Main artifact path; standard output when absent.
    pub out: Option<PathBuf>,
    pub options: RunOptions,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Exhausted(_) => EXIT_UNCERTIFIED,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

/// Runs one request, writing artifacts and returning the exit code. All
/// diagnostics go to standard error.
pub fn run(req: &RunRequest) -> i32 {
    match execute(req) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(req: &RunRequest) -> Result<i32, Failure> {
    let cfg = parse_config(&req.config).map_err(|e| input(format!("invalid config: {e}")))?;
    match req.command {
        Command::Solve => cmd_solve(&cfg, req),
        Command::Verify => cmd_verify(&cfg, req),
        Command::Curve => cmd_curve(&cfg, req),
        Command::Dynamics => cmd_dynamics(&cfg, req),
        Command::Oracle => cmd_oracle(&cfg, req),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| input(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| input(format!("cannot write to stdout: {e}"))),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("results serialize");
    text.push('\n');
    emit(out, &text)
}

fn mc_samples(req: &RunRequest, default: usize) -> Result<usize, Failure> {
    match req.options.mc_samples {
        Some(0) => Err(input("--mc-samples must be positive")),
        Some(n) => Ok(n),
        None => Ok(default),
    }
}

fn grid(req: &RunRequest) -> usize {
    req.options.grid.unwrap_or(DEFAULT_GRID)
}

fn m7_options(req: &RunRequest) -> Result<M7Options, Failure> {
    Ok(M7Options { samples: mc_samples(req, DEFAULT_M7_SAMPLES)?, seed: req.options.seed, ..Default::default() })
}

fn calibrated(cfg: &GameConfig, req: &RunRequest) -> Result<SymmetricStrategy, Failure> {
    let strategy = calibrate_beta(cfg, grid(req))?;
    if strategy.fallback {
        eprintln!("warning: a crossing had no slope-one point; the bid was pinned to the diagonal up to 1");
    }
    Ok(strategy)
}

fn strategy_failures(strategy: &SymmetricStrategy) -> Option<Failure> {
    let violations = strategy.invariant_violations();
    (!violations.is_empty()).then(|| Failure {
        code: EXIT_UNCERTIFIED,
        message: format!("calibrated strategy is malformed: {}", violations.join("; ")),
    })
}

fn cmd_solve(cfg: &RunConfig, req: &RunRequest) -> Result<i32, Failure> {
    let game = &cfg.game;
    let out = req.out.as_deref();
    match game.mechanism() {
        Mechanism::M5 => emit_json(out, &solve_m5(game)?)?,
        Mechanism::M6 => {
            let strategy = calibrated(game, req)?;
            emit_json(out, &strategy)?;
            if let Some(f) = strategy_failures(&strategy) {
                return Err(f);
            }
        }
        Mechanism::M7 => emit_json(out, &solve_m7(game, m7_options(req)?)?)?,
        _ => {
            let outcome = solve(game, SolveOptions { all: req.options.all, ..Default::default() })?;
            emit_json(out, &outcome)?;
            if outcome.verdict == Verdict::None {
                for note in &outcome.notes {
                    eprintln!("note: {note}");
                }
                return Ok(EXIT_NONE);
            }
        }
    }
    Ok(EXIT_OK)
}

fn default_tol(game: &GameConfig) -> f64 {
    match game.mechanism().action_space() {
        ActionSpace::Binary => 0.0,
        ActionSpace::Continuous => 1e-9,
    }
}

/// Reads either a bare JSON array or a `solve` output document, in which
/// case every profile listed there is checked.
fn read_profiles(path: &Path) -> Result<Vec<ActionProfile>, Failure> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum ProfileFile {
        Bare(ActionProfile),
        Outcome { profiles: Vec<ActionProfile> },
    }
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let parsed: ProfileFile = serde_json::from_str(&text)
        .map_err(|_| input(format!("profile {}: expected an array of actions or a solve result", path.display())))?;
    match parsed {
        ProfileFile::Bare(p) => Ok(vec![p]),
        ProfileFile::Outcome { profiles } if profiles.is_empty() => Err(input(format!("{} lists no profiles", path.display()))),
        ProfileFile::Outcome { profiles } => Ok(profiles),
    }
}

/// Checks a full-information profile, or the solved symmetric strategy of
/// a partial-information game, and writes the deviation report.
fn cmd_verify(cfg: &RunConfig, req: &RunRequest) -> Result<i32, Failure> {
    let game = &cfg.game;
    if game.mechanism().information() == Information::Partial {
        return mc_check(game, req);
    }
    let profiles = match (&req.options.profile, &cfg.profile) {
        (Some(path), _) => read_profiles(path)?,
        (None, Some(p)) => vec![p.clone()],
        (None, None) => return Err(input("verify needs a profile: pass --profile <file> or set `profile` in the config")),
    };
    let tol = req.options.tol.unwrap_or_else(|| default_tol(game));
    if tol.is_nan() || tol < 0.0 {
        return Err(input("--tol must be non-negative"));
    }
    let reports = profiles.iter().map(|p| verify_pne(p, game, tol)).collect::<Result<Vec<_>, _>>()?;
    let certified = reports.iter().all(|r| r.is_equilibrium);
    match reports.as_slice() {
        [single] => emit_json(req.out.as_deref(), single)?,
        many => emit_json(req.out.as_deref(), &many)?,
    }
    Ok(if certified { EXIT_OK } else { EXIT_UNCERTIFIED })
}

fn mc_check(game: &GameConfig, req: &RunRequest) -> Result<i32, Failure> {
    let samples = mc_samples(req, DEFAULT_MC_SAMPLES)?;
    let seed = req.options.seed;
    let report = match game.mechanism() {
        Mechanism::M5 => mc_symmetric_check(CandidateStrategy::Cutoff(solve_m5(game)?.threshold), game, samples, seed)?,
        Mechanism::M6 => {
            let strategy = calibrated(game, req)?;
            mc_symmetric_check(CandidateStrategy::Symmetric(&strategy), game, samples, seed)?
        }
        _ => {
            let eq = solve_m7(game, m7_options(req)?)?;
            mc_symmetric_check(CandidateStrategy::Cutoff(eq.threshold), game, samples, seed)?
        }
    };
    emit_json(req.out.as_deref(), &report)?;
    Ok(if report.is_equilibrium { EXIT_OK } else { EXIT_UNCERTIFIED })
}

/// CSV with columns `x,beta_star,segment_kind`.
pub fn curve_csv(strategy: &SymmetricStrategy) -> String {
    let mut s = String::from("x,beta_star,segment_kind\n");
    for p in &strategy.grid {
        let _ = writeln!(s, "{},{},{}", p.x, p.beta_star, p.kind);
    }
    s
}

/// Writes the strategy plot as a standalone SVG file.
pub fn render_curve_svg(strategy: &SymmetricStrategy, path: &Path) -> Result<(), String> {
    let svg = strategy_svg(strategy).map_err(|e| e.to_string())?;
    std::fs::write(path, svg).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// The calibrated M6 curve as CSV, plus an SVG next to `--out`.
fn cmd_curve(cfg: &RunConfig, req: &RunRequest) -> Result<i32, Failure> {
    if cfg.game.mechanism() != Mechanism::M6 {
        return Err(input(format!("curve applies to M6 only, not {}", cfg.game.mechanism())));
    }
    let strategy = calibrated(&cfg.game, req)?;
    emit(req.out.as_deref(), &curve_csv(&strategy))?;
    match &req.out {
        Some(path) => render_curve_svg(&strategy, &path.with_extension("svg")).map_err(input)?,
        None => eprintln!("note: no --out given, SVG not written"),
    }
    Ok(match strategy_failures(&strategy) {
        Some(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
        None => EXIT_OK,
    })
}

/// CSV with one row per iterate: `attempt,iteration,damping,x1..xN`.
pub fn dynamics_csv(result: &DynamicsResult, n: usize) -> String {
    let mut s = String::from("attempt,iteration,damping");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for row in &result.trajectory {
        let _ = write!(s, "{},{},{}", row.attempt, row.iteration, row.damping);
        for x in &row.profile {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    s
}

fn cmd_dynamics(cfg: &RunConfig, req: &RunRequest) -> Result<i32, Failure> {
    if cfg.game.mechanism() != Mechanism::M4 {
        return Err(input(format!("dynamics applies to M4 only, not {}", cfg.game.mechanism())));
    }
    let mut opts = DynamicsOptions { epsilon: cfg.epsilon.unwrap_or(DEFAULT_EPSILON), record_trajectory: true, ..Default::default() };
    if let Some(tol) = req.options.tol {
        if tol.is_nan() || tol < 0.0 {
            return Err(input("--tol must be non-negative"));
        }
        opts.tol = tol;
    }
    let result = perturbed_dynamics(&cfg.game, opts)?;
    emit(req.out.as_deref(), &dynamics_csv(&result, cfg.game.n_users()))?;
    if result.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("error: no convergence within {} iterations (last step {})", opts.max_iters, result.last_step);
        Ok(EXIT_UNCERTIFIED)
    }
}

#[derive(Serialize)]
struct Enumeration<'a> {
    mechanism: Mechanism,
    equilibria: &'a [ActionProfile],
}

/// Brute force matching the mechanism: subset enumeration (M1, M3), grid
/// scan (M2, M4) or the Monte Carlo deviation check (M5-M7).
fn cmd_oracle(cfg: &RunConfig, req: &RunRequest) -> Result<i32, Failure> {
    let game = &cfg.game;
    let out = req.out.as_deref();
    match game.mechanism() {
        Mechanism::M1 | Mechanism::M3 => {
            let found = enumerate_binary_equilibria(game)?;
            emit_json(out, &Enumeration { mechanism: game.mechanism(), equilibria: &found })?;
            Ok(if found.is_empty() { EXIT_NONE } else { EXIT_OK })
        }
        Mechanism::M2 | Mechanism::M4 => {
            let cells = req.options.grid.unwrap_or(DEFAULT_SCAN_CELLS);
            if cells == 0 {
                return Err(input("--grid must be positive"));
            }
            let scan = grid_nonexistence_scan(game, 1.0 / cells as f64)?;
            emit_json(out, &scan)?;
            Ok(if scan.all_deviate { EXIT_NONE } else { EXIT_OK })
        }
        _ => mc_check(game, req),
    }
}
