//! Command-line surface for the cloning-game toolkit.
//!
//! Every subcommand prints one machine-readable report to stdout: JSON
//! by default, or flat CSV with `--out csv`. Floating-point values are
//! rounded to 12 significant digits before printing, and any stochastic
//! subcommand is reproducible from `--seed` (byte-identical output for
//! identical invocations). Exit codes: 0 success, 2 validation or usage
//! error, 3 resource guard.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clonegame::game::{self, GameSpec, Strategy};
use clonegame::io as cg_io;
use clonegame::parallel::{
    analytic_upper_bound, eval_parallel_strategy, overlap_bound, seesaw_scan, tensor_lower_bound,
    BitString, ParallelSpec, SeesawConfig,
};
use clonegame::qpv::{
    custom_plain_exact, exact_acceptance, nope_plain_exact, simulate_transcript, AttackModel,
    RoundConfig,
};
use clonegame::rom::{
    builtin, builtin_names, compare_games, run_games, soundness_epsilon, GameMode, HRoutingConfig,
};
use clonegame::seesaw::EngineConfig;
use clonegame::tol::DEFAULT_SEED;
use clonegame::{Error, StateVector};

#[derive(Parser)]
#[command(
    name = "clonegame",
    about = "Exact values, bounds and protocol simulation for k-party entanglement cloning games",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,

    /// Convergence tolerance for iterative searches.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Exact optimal value of the k-party game with the maximally
    /// entangled target.
    Value(ValueArgs),
    /// Exact optimal value for an arbitrary two-register target state.
    PsiValue(PsiValueArgs),
    /// Evaluate a strategy file against its game.
    Eval(EvalArgs),
    /// Emit the optimal shared state for the maximally entangled target.
    OptimalState(OptimalStateArgs),
    /// Bounds, brute-force values and overlap tables for the n-fold
    /// parallel two-party game.
    Parallel(ParallelArgs),
    /// Alternating-optimization lower bounds.
    Seesaw(SeesawArgs),
    /// Routing position-verification simulation.
    Qpv(QpvArgs),
    /// Hash-routing oracle games.
    Rom(RomArgs),
    /// Soundness bound for the hash-routing protocol.
    Epsilon(EpsilonArgs),
}

#[derive(Args)]
struct ValueArgs {
    /// Number of parties.
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct PsiValueArgs {
    #[arg(long)]
    k: usize,
    /// Target state file (two-register state in the interchange format).
    #[arg(long, conflicts_with = "random_target")]
    target: Option<PathBuf>,
    /// Draw a seeded Haar-random two-qubit target instead.
    #[arg(long)]
    random_target: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Strategy file in the documented JSON format.
    #[arg(long)]
    strategy: PathBuf,
}

#[derive(Args)]
struct OptimalStateArgs {
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct ParallelArgs {
    /// Number of parallel rounds.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = ParallelMode::Bounds)]
    mode: ParallelMode,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParallelMode {
    /// Closed-form lower and upper bounds.
    Bounds,
    /// Evaluate the explicit tensor-power strategy.
    Brute,
    /// Pairwise projector overlap bounds.
    Overlap,
}

#[derive(Args)]
struct SeesawArgs {
    /// Parallel-game mode: number of rounds.
    #[arg(long, conflicts_with = "k")]
    n: Option<usize>,
    /// Game mode: number of parties.
    #[arg(long)]
    k: Option<usize>,
    /// Target state file for game mode (defaults to the maximally
    /// entangled pair).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Independent restarts (seeds seed, seed+1, …).
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    ancilla_a: usize,
    #[arg(long, default_value_t = 1)]
    ancilla_b: usize,
}

#[derive(Args)]
struct QpvArgs {
    /// Built-in attack (`honest`, `nope-optimal`) or `custom` with
    /// --strategy.
    #[arg(long, default_value = "honest")]
    attack: String,
    /// Attack file for `--attack custom`.
    #[arg(long)]
    strategy: Option<PathBuf>,
    /// Parallel rounds per protocol execution.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Monte-Carlo executions.
    #[arg(long, default_value_t = 10_000)]
    rounds: u64,
    /// Verification wiring: purified (Bell check) or plain projective.
    #[arg(
        long,
        default_value_t = true,
        action = clap::ArgAction::Set,
        num_args = 0..=1,
        default_missing_value = "true",
        value_parser = clap::builder::BoolishValueParser::new()
    )]
    purified: bool,
    /// Write per-round transcripts to a CSV file.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct RomArgs {
    /// Built-in adversary name.
    #[arg(long, default_value = "split-query")]
    adversary: String,
    /// Oracle input width in bits.
    #[arg(long, default_value_t = 8)]
    ell: u32,
    /// Rounds (oracle output width).
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Harness cap on adversary queries.
    #[arg(long, default_value_t = 8)]
    q_max: u64,
    /// Monte-Carlo executions per mode.
    #[arg(long, default_value_t = 20_000)]
    runs: u64,
    /// `standard`, `reprogrammed`, or `compare` for both plus the
    /// reprogramming bound.
    #[arg(long, default_value = "compare")]
    mode: String,
}

#[derive(Args)]
struct EpsilonArgs {
    /// Adversary query budget.
    #[arg(long)]
    q: u64,
    /// Oracle input width in bits.
    #[arg(long)]
    ell: u32,
    /// Parallel rounds.
    #[arg(long)]
    n: u32,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let report = json!({
                "error": {"kind": "usage", "message": err.to_string()}
            });
            println!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(value) => {
            if let Err(err) = emit(&value, cli.out) {
                let report = json!({"error": {"kind": "io", "message": err.to_string()}});
                println!("{report}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let (kind, code) = classify(&err);
            let report = json!({"error": {"kind": kind, "message": err.to_string()}});
            println!("{report}");
            ExitCode::from(code)
        }
    }
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(String),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) | CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn classify(err: &CliError) -> (&'static str, u8) {
    match err {
        CliError::Core(Error::ResourceGuard { .. }) => ("resource", 3),
        CliError::Core(Error::Structural(_)) => ("structural", 2),
        CliError::Core(Error::QueryBudget { .. }) => ("budget", 2),
        CliError::Core(Error::Parse(_)) => ("parse", 2),
        CliError::Core(_) => ("validation", 2),
        CliError::Io(_) => ("io", 2),
        CliError::Usage(_) => ("usage", 2),
    }
}

type CliResult<T> = Result<T, CliError>;

/// Round to 12 significant digits so the printed decimal is stable and
/// short; the parsed value round-trips to exactly the printed string.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float")
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(sig12(x))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("cannot parse {}: {e}", path.display())))
}

fn run(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Value(args) => cmd_value(args),
        Command::PsiValue(args) => cmd_psi_value(args, cli.seed),
        Command::Eval(args) => cmd_eval(args),
        Command::OptimalState(args) => cmd_optimal_state(args, cli.out),
        Command::Parallel(args) => cmd_parallel(args),
        Command::Seesaw(args) => cmd_seesaw(args, cli.seed, cli.tol),
        Command::Qpv(args) => cmd_qpv(args, cli.seed),
        Command::Rom(args) => cmd_rom(args, cli.seed),
        Command::Epsilon(args) => cmd_epsilon(args),
    }
}

fn cmd_value(args: &ValueArgs) -> CliResult<Value> {
    let spec = GameSpec::epr(args.k)?;
    let report = game::game_value(&spec)?;
    Ok(json!({
        "k": args.k,
        "value": num(report.value),
        "operator_norm": num(report.operator_norm),
        "closed_form": num(game::epr_closed_form(args.k)),
    }))
}

fn cmd_psi_value(args: &PsiValueArgs, seed: u64) -> CliResult<Value> {
    let (target, source) = match (&args.target, args.random_target) {
        (Some(path), _) => {
            let json: cg_io::MatrixJson = read_json(path)?;
            (cg_io::state_from_json(&json)?, "file".to_string())
        }
        (None, true) => {
            let layout = clonegame::RegisterLayout::new([("R", 2), ("P", 2)])?;
            let mut rng = clonegame::rng::derived(seed, 0x7A26E7);
            let target =
                StateVector::new(layout, clonegame::rng::random_state_amplitudes(&mut rng, 4))?;
            (target, "seeded".to_string())
        }
        (None, false) => {
            return Err(CliError::Usage(
                "psi-value needs --target FILE or --random-target".into(),
            ))
        }
    };
    let spec = GameSpec::with_target(args.k, target)?;
    let report = game::game_value(&spec)?;
    Ok(json!({
        "k": args.k,
        "value": num(report.value),
        "operator_norm": num(report.operator_norm),
        "target_source": source,
    }))
}

fn cmd_eval(args: &EvalArgs) -> CliResult<Value> {
    let file: cg_io::StrategyFile = read_json(&args.strategy)?;
    let spec = file.to_spec()?;
    let strategy = file.to_strategy()?;
    let value = game::evaluate_strategy(&spec, &strategy)?;
    let bound = game::game_value(&spec)?.value;
    Ok(json!({
        "k": spec.k(),
        "value": num(value),
        "optimal_value": num(bound),
        "gap": num(bound - value),
    }))
}

fn cmd_optimal_state(args: &OptimalStateArgs, out: OutFormat) -> CliResult<Value> {
    if out == OutFormat::Csv {
        return Err(CliError::Usage(
            "optimal-state emits a nested state; use the JSON output".into(),
        ));
    }
    let state = game::optimal_state(args.k)?;
    let spec = GameSpec::epr(args.k)?;
    let strategy = Strategy::trivial(&spec, &state)?;
    let value = game::evaluate_strategy(&spec, &strategy)?;
    let state_json = cg_io::state_to_json(&state);
    Ok(json!({
        "k": args.k,
        "value": num(value),
        "closed_form": num(game::epr_closed_form(args.k)),
        "state": {
            "layout": state_json.layout,
            "entries": state_json.entries.iter().map(|(re, im)| json!([num(*re), num(*im)])).collect::<Vec<_>>(),
        },
    }))
}

fn cmd_parallel(args: &ParallelArgs) -> CliResult<Value> {
    let spec = ParallelSpec::new(args.n)?;
    match args.mode {
        ParallelMode::Bounds => {
            let upper = analytic_upper_bound(args.n);
            let (lower, _) = tensor_lower_bound(&spec);
            Ok(json!({
                "n": args.n,
                "lower": num(lower),
                "upper": num(upper.closed_form),
                "binomial_sum": num(upper.binomial_sum),
            }))
        }
        ParallelMode::Brute => {
            let (lower, strategy) = tensor_lower_bound(&spec);
            let strategy = strategy.ok_or(CliError::Core(Error::InvalidArgument(
                "n too large for brute-force evaluation".into(),
            )))?;
            let value = eval_parallel_strategy(&spec, &strategy)?;
            Ok(json!({
                "n": args.n,
                "lower": num(lower),
                "tensored_value": num(value),
                "upper": num(analytic_upper_bound(args.n).closed_form),
            }))
        }
        ParallelMode::Overlap => {
            let mut rows = Vec::new();
            for x in BitString::all(args.n) {
                for y in BitString::all(args.n) {
                    let report = overlap_bound(x, y)?;
                    rows.push(json!({
                        "x": x.to_string(),
                        "x_prime": y.to_string(),
                        "t": report.t,
                        "t_a": report.t_a,
                        "analytic": num(report.analytic),
                        "numeric": report.numeric.map(num).unwrap_or(Value::Null),
                    }));
                }
            }
            Ok(Value::Array(rows))
        }
    }
}

fn cmd_seesaw(args: &SeesawArgs, seed: u64, tol: f64) -> CliResult<Value> {
    match (args.n, args.k) {
        (Some(n), None) => {
            let spec = ParallelSpec::new(n)?;
            let cfg = SeesawConfig {
                ancilla_dim_a: args.ancilla_a,
                ancilla_dim_b: args.ancilla_b,
                max_iters: args.max_iters,
                convergence_tol: tol,
                seed,
            };
            let scan = seesaw_scan(&spec, &cfg, args.seeds)?;
            let (lower, _) = tensor_lower_bound(&spec);
            Ok(json!({
                "n": n,
                "lower": num(lower),
                "upper": num(analytic_upper_bound(n).closed_form),
                "seesaw_best": num(scan.best),
                "seeds": args.seeds,
                "iters": scan.total_sweeps,
            }))
        }
        (None, Some(k)) => {
            let spec = match &args.target {
                Some(path) => {
                    let json: cg_io::MatrixJson = read_json(path)?;
                    GameSpec::with_target(k, cg_io::state_from_json(&json)?)?
                }
                None => GameSpec::epr(k)?,
            };
            let ancilla = vec![args.ancilla_a; k];
            let mut best = f64::NEG_INFINITY;
            let mut iters = 0usize;
            for i in 0..args.seeds.max(1) {
                let outcome = game::seesaw_game_value(
                    &spec,
                    &ancilla,
                    &EngineConfig {
                        max_sweeps: args.max_iters,
                        tol,
                        seed: seed.wrapping_add(i as u64),
                    },
                )?;
                best = best.max(outcome.best);
                iters += outcome.sweeps;
            }
            let exact = game::game_value(&spec)?.value;
            Ok(json!({
                "k": k,
                "norm_value": num(exact),
                "seesaw_best": num(best),
                "seeds": args.seeds.max(1),
                "iters": iters,
            }))
        }
        _ => Err(CliError::Usage(
            "seesaw needs exactly one of --n (parallel game) or --k (cloning game)".into(),
        )),
    }
}

fn cmd_qpv(args: &QpvArgs, seed: u64) -> CliResult<Value> {
    let cfg = RoundConfig::new(args.n, args.purified, seed)?;
    let attack = match args.attack.as_str() {
        "honest" => AttackModel::Honest,
        "nope-optimal" => AttackModel::NopeOptimal,
        "custom" => {
            let path = args
                .strategy
                .as_ref()
                .ok_or_else(|| CliError::Usage("--attack custom needs --strategy FILE".into()))?;
            let file: cg_io::AttackFile = read_json(path)?;
            AttackModel::Custom(Box::new(file.to_attack()?))
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown attack `{other}` (honest, nope-optimal, custom)"
            )))
        }
    };
    let exact = match (&attack, args.purified) {
        (AttackModel::Honest, _) => 1.0,
        (AttackModel::NopeOptimal, true) => exact_acceptance(&cfg, &attack)?,
        (AttackModel::NopeOptimal, false) => {
            if args.n == 1 {
                nope_plain_exact()?
            } else {
                f64::NAN
            }
        }
        (AttackModel::Custom(custom), purified) => {
            if purified {
                exact_acceptance(&cfg, &attack)?
            } else {
                custom_plain_exact(custom)?
            }
        }
    };
    let collect = args.transcript.is_some();
    let (report, transcripts) = simulate_transcript(&cfg, &attack, args.rounds, collect)?;
    if let Some(path) = &args.transcript {
        write_transcripts(path, &transcripts)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(json!({
        "config": {"n": args.n, "purified": args.purified, "seed": seed},
        "attack": args.attack,
        "rounds": args.rounds,
        "accept_rate": num(report.rate),
        "ci95": [num(report.ci_low), num(report.ci_high)],
        "exact": if exact.is_nan() { Value::Null } else { num(exact) },
    }))
}

fn write_transcripts(
    path: &PathBuf,
    transcripts: &[clonegame::qpv::ProtocolRun],
) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(
        file,
        "run,round,challenge,x,bell_a,bell_b,routed_to,accepted,phase_send,phase_relay,phase_verify"
    )?;
    for (run_idx, run) in transcripts.iter().enumerate() {
        for record in &run.rounds {
            let (bell_a, bell_b) = record
                .bell_outcome
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .unwrap_or_default();
            writeln!(
                file,
                "{},{},{},{},{},{},{},{},{},{},{}",
                run_idx,
                record.round,
                record.challenge,
                record.x_bit,
                bell_a,
                bell_b,
                record.routed_to.map(|v| v.to_string()).unwrap_or_default(),
                record.accepted,
                run.phase_tags[0],
                run.phase_tags[1],
                run.phase_tags[2],
            )?;
        }
    }
    Ok(())
}

fn cmd_rom(args: &RomArgs, seed: u64) -> CliResult<Value> {
    let cfg = HRoutingConfig::new(args.ell, args.n, args.q_max, seed)?;
    let adversary = builtin(&args.adversary).map_err(|_| {
        CliError::Usage(format!(
            "unknown adversary `{}` (available: {})",
            args.adversary,
            builtin_names().join(", ")
        ))
    })?;
    let eps = soundness_epsilon(adversary.query_budget(), args.ell, args.n as u32);
    match args.mode.as_str() {
        "compare" => {
            let cmp = compare_games(&cfg, adversary.as_ref(), args.runs)?;
            Ok(json!({
                "adversary": args.adversary,
                "ell": args.ell,
                "n": args.n,
                "q_max": args.q_max,
                "runs": args.runs,
                "standard_rate": num(cmp.standard.rate),
                "reprogrammed_rate": num(cmp.reprogrammed.rate),
                "delta": num(cmp.delta),
                "sigma_delta": num(cmp.sigma_delta),
                "reprogram_bound": num(cmp.bound),
                "epsilon": num(eps.epsilon),
                "vacuous": eps.vacuous,
            }))
        }
        mode => {
            let mode = GameMode::parse(mode)?;
            let report = run_games(&cfg, adversary.as_ref(), mode, args.runs)?;
            Ok(json!({
                "adversary": args.adversary,
                "mode": mode.label(),
                "ell": args.ell,
                "n": args.n,
                "q_max": args.q_max,
                "runs": args.runs,
                "accept_rate": num(report.rate),
                "ci95": [num(report.ci_low), num(report.ci_high)],
                "epsilon": num(eps.epsilon),
                "vacuous": eps.vacuous,
            }))
        }
    }
}

fn cmd_epsilon(args: &EpsilonArgs) -> CliResult<Value> {
    let report = soundness_epsilon(args.q, args.ell, args.n);
    Ok(json!({
        "epsilon": num(report.epsilon),
        "vacuous": report.vacuous,
    }))
}

fn emit(value: &Value, out: OutFormat) -> std::io::Result<()> {
    match out {
        OutFormat::Json => {
            println!("{value}");
            Ok(())
        }
        OutFormat::Csv => {
            let rows = match value {
                Value::Array(rows) => rows.clone(),
                other => vec![other.clone()],
            };
            let mut flattened: Vec<Map<String, Value>> = Vec::with_capacity(rows.len());
            for row in &rows {
                let mut flat = Map::new();
                flatten_into(&mut flat, "", row);
                flattened.push(flat);
            }
            let header: Vec<String> = flattened
                .first()
                .map(|m| m.keys().cloned().collect())
                .unwrap_or_default();
            println!("{}", header.join(","));
            for row in &flattened {
                let cells: Vec<String> = header
                    .iter()
                    .map(|key| row.get(key).map(csv_cell).unwrap_or_default())
                    .collect();
                println!("{}", cells.join(","));
            }
            Ok(())
        }
    }
}

fn flatten_into(out: &mut Map<String, Value>, prefix: &str, value: &Value) {
    match value {
        Value::Object(map) => {
            for (key, inner) in map {
                let name = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}_{key}")
                };
                flatten_into(out, &name, inner);
            }
        }
        Value::Array(items) => {
            let joined = items.iter().map(csv_cell).collect::<Vec<_>>().join(";");
            out.insert(prefix.to_string(), Value::String(joined));
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

fn csv_cell(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
