// SPDX-License-Identifier: Apache-2.0

//! The `zne` command line: plan, simulate, sweep, grid and verify.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::allocation::{allocate_shots_with_floor, ShotPlan};
use crate::analysis::{
    bias_sweep, density_grid, n_hat, stationarity_check, verify_omega, verify_optimality, CheckResult, SweepAxis,
    SweepNoise, SweepSpec, Verdict,
};
use crate::error::ZneError;
use crate::estimator::{simulate_fake_experiment, FakeNodeMap};
use crate::nodes::{lagrange_weights, nodes_for_overhead, NodeSet, SpacingFamily};
use crate::noise::NoiseModel;

/// Largest `n` considered when `--n` is left for the tool to choose.
const DEFAULT_N_MAX: usize = 15;
/// Relative agreement required between plan weights and recomputed ones.
const PLAN_WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "zne", version, about = "Zero-noise extrapolation planning, simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the nodes at a target overhead and allocate shots.
    Plan(PlanArgs),
    /// Run a simulated mitigated experiment and report the estimate.
    Simulate(SimulateArgs),
    /// Bias of mitigation over lambda0, eta or n (bias_sweep.csv).
    Sweep(SweepArgs),
    /// (n+1)!/C_n over families, node counts and overheads (grid.csv).
    Grid(GridArgs),
    /// Numerical checks of the tilted-node optimality conditions (verify.csv).
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub nodes: NodeArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Output file or directory (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NodeArgs {
    #[arg(long, default_value = "tilted", value_parser = parse_family)]
    pub family: SpacingFamily,
    /// Number of nodes minus one; chosen to maximize (n+1)!/C_n when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// Overhead root Lambda = sum |gamma_j|.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Treat the nodes as fake nodes under S(x) = x^2.
    #[arg(long)]
    pub fake_square: bool,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Total number of shots.
    #[arg(long, conflicts_with = "neff")]
    pub ntot: Option<u64>,
    /// Effective shots N_tot / Lambda^2.
    #[arg(long)]
    pub neff: Option<f64>,
    /// Single-shot standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Minimum shots per weighted node.
    #[arg(long, default_value_t = 1)]
    pub shot_floor: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseChoice {
    Markovian,
    Nonmarkovian,
    Table,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, value_enum)]
    pub noise: Option<NoiseChoice>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Two-column `x,E` CSV for `--noise table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Zero-noise value of a tabulated curve, if known.
    #[arg(long)]
    pub e_star: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub nodes: NodeArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Take nodes, weights and shots from a `plan` document.
    #[arg(long)]
    pub from_plan: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisChoice {
    Lambda0,
    Eta,
    N,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Scanned parameter (default: lambda0 for closed-form noise, n for a table).
    #[arg(long, value_enum)]
    pub axis: Option<AxisChoice>,
    /// Explicit axis values instead of the default grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Comma-separated families or `all`.
    #[arg(long, alias = "family", default_value = "tilted", value_parser = parse_families)]
    pub families: FamilyList,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    /// Node counts (default 1..9).
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub fake_square: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, alias = "family", default_value = "all", value_parser = parse_families)]
    pub families: FamilyList,
    /// Rows for n = 1..=nmax.
    #[arg(long, default_value_t = 10, conflicts_with = "n")]
    pub nmax: usize,
    /// Explicit node counts.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,32,256")]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub check: VerifyCommand,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Omega_k identity for n = 1..=nmax.
    Omega {
        #[arg(long, default_value_t = 1000)]
        nmax: usize,
    },
    /// Stationarity of tilted nodes for n = 1..=nmax.
    Stationarity {
        #[arg(long, default_value_t = 50)]
        nmax: usize,
        #[arg(long, value_delimiter = ',', default_value = "4,32,256")]
        lambdas: Vec<f64>,
    },
    /// Brute-force minimization of C_n against the tilted nodes.
    Optimality {
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "7,10,32")]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyList(pub Vec<SpacingFamily>);

fn parse_family(s: &str) -> Result<SpacingFamily, String> {
    s.parse().map_err(|e: ZneError| e.to_string())
}

fn parse_families(s: &str) -> Result<FamilyList, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(FamilyList(SpacingFamily::ALL.to_vec()));
    }
    s.split(',').map(parse_family).collect::<Result<Vec<_>, _>>().map(FamilyList)
}

/// Failure of a command, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] ZneError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Usage(_) => 1,
            CliError::Verification(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(ZneError::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Output of `plan`, also accepted by `simulate --from-plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub family: Option<SpacingFamily>,
    pub n: usize,
    /// Extrapolation nodes (fake nodes when `fake_map` is set).
    pub xs: Vec<f64>,
    /// Noise amplification factors to measure at.
    pub noise_levels: Vec<f64>,
    pub fake_map: Option<String>,
    pub gammas: Vec<f64>,
    pub shots: Vec<u64>,
    pub n_tot: u64,
    pub n_eff: f64,
    pub lambda_overhead: f64,
    pub overhead: f64,
    pub cn: f64,
    pub sigma: f64,
    /// `sigma / sqrt(n_eff)`.
    pub std_dev: f64,
}

impl PlanDocument {
    fn map(&self) -> CliResult<FakeNodeMap<f64>> {
        match self.fake_map.as_deref() {
            None => Ok(FakeNodeMap::Identity),
            Some("square") => Ok(FakeNodeMap::Square),
            Some(other) => usage(format!("unknown fake_map '{other}' in plan")),
        }
    }
}

/// Runs a parsed command and writes its output.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Plan(args) => {
            let doc = build_plan(&args.nodes, &args.budget)?;
            emit(args.out.as_deref(), "plan.json", &to_json(&doc)?)
        }
        Command::Simulate(args) => {
            let report = cmd_simulate(&args)?;
            emit(args.out.as_deref(), "report.json", &to_json(&report)?)
        }
        Command::Sweep(args) => {
            let csv = cmd_sweep(&args)?;
            emit(args.out.as_deref(), "bias_sweep.csv", &csv)
        }
        Command::Grid(args) => {
            let csv = cmd_grid(&args)?;
            emit(args.out.as_deref(), "grid.csv", &csv)
        }
        Command::Verify(args) => {
            let rows = cmd_verify(&args.check)?;
            emit(args.out.as_deref(), "verify.csv", &verify_csv(&rows)?)?;
            let failed = rows.iter().filter(|(r, _)| !r.pass).count();
            if failed > 0 {
                return Err(CliError::Verification(format!("{failed} of {} checks did not pass", rows.len())));
            }
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(ZneError::from)?;
    s.push('\n');
    Ok(s)
}

/// Writes to `out` (a file, or `default_name` inside an existing directory) or standard output.
fn emit(out: Option<&Path>, default_name: &str, content: &str) -> CliResult<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) if path.is_dir() => fs::write(path.join(default_name), content)?,
        Some(path) => fs::write(path, content)?,
    }
    Ok(())
}

pub fn build_plan(nodes_args: &NodeArgs, budget: &BudgetArgs) -> CliResult<PlanDocument> {
    let family = nodes_args.family;
    let n = match (nodes_args.n, nodes_args.lambda) {
        (Some(n), _) => n,
        (None, Some(lambda)) => n_hat(family, lambda, DEFAULT_N_MAX)?,
        (None, None) => return usage("--lambda is required (and --n unless it should be chosen automatically)"),
    };
    let nodes = if n == 0 {
        if nodes_args.lambda.is_some_and(|l| l != 1.0) {
            warn!("--lambda is ignored for n = 0; the overhead root is 1");
        }
        nodes_for_overhead(family, 0, 1.0)?
    } else {
        let Some(lambda) = nodes_args.lambda else {
            return usage(format!("--lambda is required for n = {n}"));
        };
        nodes_for_overhead(family, n, lambda)?
    };
    let weights = lagrange_weights(&nodes)?;
    let overhead = weights.overhead();
    let n_tot = match (budget.ntot, budget.neff) {
        (Some(t), None) => t,
        (None, Some(e)) if e > 0.0 && e.is_finite() => {
            let t = (e * overhead).round();
            if t > u64::MAX as f64 {
                return usage(format!("--neff {e} needs more than {} shots", u64::MAX));
            }
            t as u64
        }
        (None, Some(e)) => return usage(format!("--neff must be finite and > 0, got {e}")),
        _ => return usage("exactly one of --ntot and --neff is required"),
    };
    let plan = allocate_shots_with_floor(&weights, n_tot, budget.shot_floor)?;
    let sigma = budget.sigma.unwrap_or(1.0);
    check_sigma(sigma)?;
    let map = if nodes_args.fake_square { FakeNodeMap::Square } else { FakeNodeMap::Identity };
    Ok(PlanDocument {
        family: nodes.family(),
        n,
        xs: nodes.xs().to_vec(),
        noise_levels: nodes.xs().iter().map(|&x| map.inverse(x)).collect(),
        fake_map: nodes_args.fake_square.then(|| "square".to_string()),
        gammas: weights.gammas.clone(),
        shots: plan.shots,
        n_tot: plan.n_tot,
        n_eff: plan.n_eff,
        lambda_overhead: weights.lambda_overhead,
        overhead,
        cn: weights.cn,
        sigma,
        std_dev: sigma / plan.n_eff.sqrt(),
    })
}

fn check_sigma(sigma: f64) -> CliResult<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return usage(format!("--sigma must be finite and >= 0, got {sigma}"));
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<crate::estimator::MitigationReport> {
    let model = noise_model(&args.noise)?;
    let doc = match &args.from_plan {
        Some(path) => {
            if args.nodes.n.is_some()
                || args.nodes.lambda.is_some()
                || args.budget.ntot.is_some()
                || args.budget.neff.is_some()
            {
                return usage("--from-plan takes nodes and shots from the plan; drop --n, --lambda, --ntot and --neff");
            }
            let text = fs::read_to_string(path)?;
            let mut doc: PlanDocument = serde_json::from_str(&text).map_err(ZneError::from)?;
            if let Some(sigma) = args.budget.sigma {
                doc.sigma = sigma;
            }
            doc
        }
        None => build_plan(&args.nodes, &args.budget)?,
    };
    check_sigma(doc.sigma)?;
    let nodes = NodeSet::new(doc.xs.clone())?;
    let weights = lagrange_weights(&nodes)?;
    if doc.gammas.len() != weights.gammas.len() {
        return Err(ZneError::ShapeMismatch { expected: weights.gammas.len(), got: doc.gammas.len() }.into());
    }
    for (j, (&given, &computed)) in doc.gammas.iter().zip(&weights.gammas).enumerate() {
        if (given - computed).abs() > PLAN_WEIGHT_TOL * computed.abs().max(1.0) {
            return usage(format!("plan weight gamma_{j} = {given} does not match the nodes (expected {computed})"));
        }
    }
    let total: u64 = doc.shots.iter().sum();
    if total != doc.n_tot {
        return usage(format!("plan shots sum to {total}, but n_tot is {}", doc.n_tot));
    }
    let plan = ShotPlan {
        shots: doc.shots.clone(),
        n_tot: doc.n_tot,
        n_eff: doc.n_tot as f64 / weights.overhead(),
        overhead: weights.overhead(),
    };
    let map = if args.nodes.fake_square { FakeNodeMap::Square } else { doc.map()? };
    Ok(simulate_fake_experiment(&model, &nodes, &plan, doc.sigma, args.seed, map)?)
}

fn noise_model(args: &NoiseArgs) -> CliResult<NoiseModel<f64>> {
    let Some(kind) = args.noise else {
        return usage("--noise is required (markovian, nonmarkovian or table)");
    };
    match kind {
        NoiseChoice::Markovian => Ok(NoiseModel::markovian(need(args.lambda0, "--lambda0")?)?),
        NoiseChoice::Nonmarkovian => {
            Ok(NoiseModel::non_markovian(need(args.eta, "--eta")?, need(args.lambda0, "--lambda0")?)?)
        }
        NoiseChoice::Table => {
            let Some(path) = &args.table else {
                return usage("--noise table needs --table <csv>");
            };
            Ok(NoiseModel::from_csv_path(path, args.e_star)?)
        }
    }
}

fn need(value: Option<f64>, flag: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::Usage(format!("{flag} is required for this noise model")))
}

/// Builds the sweep described by the flags.
pub fn sweep_spec(args: &SweepArgs) -> CliResult<SweepSpec> {
    let Some(kind) = args.noise.noise else {
        return usage("--noise is required (markovian, nonmarkovian or table)");
    };
    let axis = args.axis.unwrap_or(if kind == NoiseChoice::Table { AxisChoice::N } else { AxisChoice::Lambda0 });
    // the scanned parameter need not be given; the placeholder is never evaluated
    let lambda0 = match axis {
        AxisChoice::Lambda0 => args.noise.lambda0.unwrap_or(1.0),
        _ if kind == NoiseChoice::Table => 1.0,
        _ => need(args.noise.lambda0, "--lambda0")?,
    };
    let noise = match kind {
        NoiseChoice::Markovian => SweepNoise::Markovian { lambda0 },
        NoiseChoice::Nonmarkovian => {
            let eta =
                if axis == AxisChoice::Eta { args.noise.eta.unwrap_or(0.0) } else { need(args.noise.eta, "--eta")? };
            SweepNoise::NonMarkovian { eta, lambda0 }
        }
        NoiseChoice::Table => SweepNoise::Table { model: noise_model(&args.noise)? },
    };
    let axis = match (axis, &args.values) {
        (AxisChoice::Lambda0, Some(v)) => SweepAxis::Lambda0(v.clone()),
        (AxisChoice::Lambda0, None) => SweepAxis::default_lambda0(),
        (AxisChoice::Eta, Some(v)) => SweepAxis::Eta(v.clone()),
        (AxisChoice::Eta, None) => SweepAxis::default_eta(),
        (AxisChoice::N, None) => SweepAxis::N,
        (AxisChoice::N, Some(_)) => return usage("an n sweep takes its values from --n, not --values"),
    };
    let spec = SweepSpec {
        noise,
        axis,
        families: args.families.0.clone(),
        lambdas: args.lambdas.clone(),
        ns: args.n.clone().unwrap_or_else(|| (1..=9).collect()),
        fake_square: args.fake_square,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<String> {
    let spec = sweep_spec(args)?;
    let rows = bias_sweep(&spec)?;
    let mut header = vec!["family", "n", "lambda", "axis_name", "axis_value", "abs_bias", "abs_bias_unmitigated"];
    if spec.fake_square {
        header.push("abs_bias_fake_square");
    }
    header.push("error");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(ZneError::from)?;
    for r in &rows {
        let ok = r.error.is_none();
        let mut rec = vec![
            r.family.to_string(),
            r.n.to_string(),
            num(r.lambda),
            r.axis_name.to_string(),
            num(r.axis_value),
            num_or_empty(ok, r.abs_bias),
            num_or_empty(ok, r.abs_bias_unmitigated),
        ];
        if spec.fake_square {
            rec.push(r.abs_bias_fake_square.map(num).unwrap_or_default());
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(ZneError::from)?;
    }
    finish_csv(w)
}

fn cmd_grid(args: &GridArgs) -> CliResult<String> {
    let ns: Vec<usize> = args.n.clone().unwrap_or_else(|| (1..=args.nmax).collect());
    if ns.is_empty() || args.lambdas.is_empty() || args.families.0.is_empty() {
        return usage("grid needs at least one family, node count and overhead");
    }
    let grid = density_grid(&args.families.0, &ns, &args.lambdas)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "n", "lambda", "cn", "ratio", "error"]).map_err(ZneError::from)?;
    for r in &grid.rows {
        let ok = r.error.is_none();
        w.write_record([
            r.family.to_string(),
            r.n.to_string(),
            num(r.lambda),
            num_or_empty(ok, r.cn),
            num_or_empty(ok, r.ratio),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(ZneError::from)?;
    }
    finish_csv(w)
}

/// Check rows, each with an optional verdict label overriding `pass`.
fn cmd_verify(check: &VerifyCommand) -> CliResult<Vec<(CheckResult, Option<&'static str>)>> {
    let mut rows = Vec::new();
    match check {
        VerifyCommand::Omega { nmax } => {
            if *nmax == 0 {
                return usage("--nmax must be >= 1");
            }
            for n in 1..=*nmax {
                rows.push((verify_omega(n)?, None));
            }
        }
        VerifyCommand::Stationarity { nmax, lambdas } => {
            if *nmax == 0 || lambdas.is_empty() {
                return usage("stationarity needs --nmax >= 1 and at least one overhead");
            }
            for &lambda in lambdas {
                for n in 1..=*nmax {
                    rows.push((stationarity_check(n, lambda)?, None));
                }
            }
        }
        VerifyCommand::Optimality { n, lambda, starts, seed } => {
            if n.is_empty() || lambda.is_empty() {
                return usage("optimality needs at least one --n and --lambda");
            }
            for &n in n {
                if !(1..=4).contains(&n) {
                    warn!("brute-force optimality at n = {n} is outside the range it is meant for (n <= 4)");
                }
                for &l in lambda {
                    let c = verify_optimality(n, l, *starts, *seed)?;
                    let label = (c.verdict == Verdict::Inconclusive).then_some("inconclusive");
                    rows.push((c.as_check_result(), label));
                }
            }
        }
    }
    Ok(rows)
}

fn verify_csv(rows: &[(CheckResult, Option<&'static str>)]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "n", "lambda", "pass", "max_residual"]).map_err(ZneError::from)?;
    for (r, label) in rows {
        w.write_record([
            r.check.to_string(),
            r.n.to_string(),
            r.lambda.map(num).unwrap_or_default(),
            label.map(str::to_string).unwrap_or_else(|| r.pass.to_string()),
            num(r.max_residual),
        ])
        .map_err(ZneError::from)?;
    }
    finish_csv(w)
}

/// Shortest round-trip form, switching to exponent notation for very small or large values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn num_or_empty(ok: bool, v: f64) -> String {
    if ok {
        num(v)
    } else {
        String::new()
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> CliResult<String> {
    let bytes = w.into_inner().map_err(|e| ZneError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
