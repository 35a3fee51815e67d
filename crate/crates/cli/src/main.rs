mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sda_core::consensus::{
    assign_roles_degree, assign_roles_kcore, default_role_counts, message_cost, run_round,
    Behavior, ConsensusError, RoleStrategy, RoundTranscript,
};
use sda_core::graph::{ActuatorGraph, ClosenessMode, Edge};
use sda_core::simulation::{
    export_csv, export_geojson, read_edges_csv, read_globals_csv, read_nodes_csv,
    records_from_csv, run_simulation, summaries_from_globals, summarize_records,
    table1_fractions, write_summary_csv, ConsensusSettings, SimulationConfig, SimulationError,
    SnapshotOptions, SummaryRow,
};
use sda_core::tle::{load_catalog, CatalogError, ErrorPolicy, LoadOptions};
use sda_core::{OrbitRegime, Timestamp};

const DEFAULT_OUTPUT: &str = "sda-output";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::BucketTooSmall { .. } => CliError::precondition(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<ConsensusError> for CliError {
    fn from(e: ConsensusError) -> Self {
        CliError::precondition(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "sda", version, about = "Actuator topology simulator for space domain awareness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a TLE catalog and print per-regime counts.
    Parse(ParseArgs),
    /// Run the time-stepped topology simulation.
    Simulate(SimulateArgs),
    /// Recompute metrics from a nodes.csv/edges.csv pair.
    Metrics(MetricsArgs),
    /// Run one consensus round on a snapshot from edges.csv.
    Consensus(ConsensusArgs),
    /// Fold globals.csv into summary.csv.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct ParseArgs {
    tle: PathBuf,
    /// Stop at the first malformed element set.
    #[arg(long)]
    fail_fast: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tle: Option<PathBuf>,
    /// LEO, MEO, GEO or HEO.
    #[arg(long)]
    regime: Option<String>,
    /// Comma-separated percentages.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// `default` (5..95 step 10) or `table1`.
    #[arg(long)]
    preset: Option<String>,
    /// Seconds between snapshots.
    #[arg(long)]
    step: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<u64>,
    /// ISO-8601 UTC start; defaults to the latest element epoch.
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run a consensus round per snapshot: `degree` or `kcore`.
    #[arg(long)]
    consensus: Option<String>,
    #[arg(long)]
    approvers: Option<usize>,
    #[arg(long)]
    verifiers: Option<usize>,
    /// `raw` or `normalized`.
    #[arg(long)]
    closeness: Option<String>,
    /// Also write one GeoJSON file per snapshot.
    #[arg(long)]
    geojson: bool,
    #[arg(long, env = "SDA_OUTPUT_DIR")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    closeness: Option<String>,
    #[arg(long, env = "SDA_OUTPUT_DIR")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Snapshot to use; defaults to the first one in the file.
    #[arg(long)]
    timestamp: Option<String>,
    #[arg(long)]
    fraction: Option<f64>,
    /// `degree` or `kcore`.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    approvers: Option<usize>,
    #[arg(long)]
    verifiers: Option<usize>,
    /// Node that signs a corrupted payload; repeatable.
    #[arg(long)]
    tamper: Vec<u32>,
    /// Bytes to agree on; defaults to the snapshot's edge list.
    #[arg(long)]
    payload: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use degree roles when the k-core split has no usable shell.
    #[arg(long)]
    fallback: bool,
    /// Append the transcript line to this file.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    globals: PathBuf,
    /// Defaults to the regime in a nodes.csv beside the globals file.
    #[arg(long)]
    regime: Option<String>,
    /// Defaults to summary.csv beside the globals file.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_regime(text: &str) -> Result<OrbitRegime, CliError> {
    text.parse().map_err(CliError::input)
}

fn parse_closeness(text: Option<&str>) -> Result<ClosenessMode, CliError> {
    match text.map(str::to_ascii_lowercase).as_deref() {
        None | Some("raw") => Ok(ClosenessMode::Raw),
        Some("normalized") => Ok(ClosenessMode::Normalized),
        Some(other) => Err(CliError::input(format!("unknown closeness mode `{other}`"))),
    }
}

fn parse_strategy(text: &str) -> Result<RoleStrategy, CliError> {
    match text.to_ascii_lowercase().as_str() {
        "degree" => Ok(RoleStrategy::DegreeMode),
        "kcore" => Ok(RoleStrategy::KCoreShell),
        other => Err(CliError::input(format!("unknown role strategy `{other}`"))),
    }
}

fn parse_time(text: &str) -> Result<Timestamp, CliError> {
    Timestamp::parse_iso8601(text).map_err(|e| CliError::input(e.to_string()))
}

fn cmd_parse(args: ParseArgs) -> Result<(), CliError> {
    let file = File::open(&args.tle)
        .map_err(|e| CliError::input(format!("{}: {e}", args.tle.display())))?;
    let options = LoadOptions {
        policy: if args.fail_fast {
            ErrorPolicy::FailFast
        } else {
            ErrorPolicy::SkipAndReport
        },
        ..Default::default()
    };
    let load = load_catalog(BufReader::new(file), &options).map_err(|e| match e {
        CatalogError::Empty => CliError::input(format!("{}: catalog is empty", args.tle.display())),
        other => CliError::input(format!("{}: {other}", args.tle.display())),
    })?;
    for d in &load.diagnostics {
        eprintln!("{}: {d}", args.tle.display());
    }
    let counts = load.catalog.regime_counts();
    for regime in OrbitRegime::ALL {
        println!("{regime}: {}", counts.get(&regime).copied().unwrap_or(0));
    }
    println!("records: {}", load.catalog.len());
    println!("skipped: {}", load.diagnostics.len());
    if load.catalog.is_empty() {
        return Err(CliError::input("no valid element sets"));
    }
    Ok(())
}

#[derive(Serialize)]
struct EffectiveSimulation {
    tle: PathBuf,
    regime: OrbitRegime,
    fractions: Vec<f64>,
    step: u64,
    duration: u64,
    start: String,
    seed: u64,
    consensus: Option<String>,
    approvers: Option<usize>,
    verifiers: Option<usize>,
    closeness: ClosenessMode,
    geojson: bool,
    output: PathBuf,
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<6} {:>8} {:>9} {:>8} {:>9} {:>9} {:>8}",
        "regime", "percent", "mean_ecc", "max_ecc", "mean_D", "mean_R", "min_R"
    );
    for r in rows {
        let s = &r.summary;
        println!(
            "{:<6} {:>8} {:>9.3} {:>8} {:>9.3} {:>9.3} {:>8}",
            r.regime.as_str(),
            r.fraction_pct,
            s.mean_ecc,
            s.max_ecc,
            s.mean_diameter,
            s.mean_radius,
            s.min_radius
        );
    }
}

/// Fails with an internal error if a summary row breaks R <= D <= 2R.
fn check_extents(rows: &[SummaryRow]) -> Result<(), CliError> {
    for r in rows {
        let s = &r.summary;
        if s.mean_ecc != s.mean_diameter
            || s.mean_radius > s.mean_diameter
            || s.mean_diameter > 2.0 * s.mean_radius
        {
            return Err(CliError::internal(format!(
                "{} at {}%: summary violates R <= D <= 2R",
                r.regime, r.fraction_pct
            )));
        }
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file: config::SimulateFile = config::load(args.config.as_deref())?;
    let tle = args
        .tle
        .or(file.tle)
        .ok_or_else(|| CliError::input("--tle is required"))?;
    let regime = parse_regime(args.regime.or(file.regime).as_deref().unwrap_or("LEO"))?;
    let fractions = match (args.fractions.or(file.fractions), args.preset.or(file.preset)) {
        (Some(f), _) => f,
        (None, Some(p)) if p == "table1" => table1_fractions(regime),
        (None, Some(p)) if p == "default" => sda_core::simulation::default_fractions(),
        (None, Some(p)) => return Err(CliError::input(format!("unknown preset `{p}`"))),
        (None, None) => sda_core::simulation::default_fractions(),
    };
    let strategy = args.consensus.or(file.consensus);
    let approvers = args.approvers.or(file.approvers);
    let verifiers = args.verifiers.or(file.verifiers);
    let closeness = parse_closeness(args.closeness.or(file.closeness).as_deref())?;
    let output = args
        .output
        .or(file.output)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let defaults = SimulationConfig::default();
    let mut sim = SimulationConfig {
        regime,
        fractions,
        time_step_s: args.step.or(file.step).unwrap_or(defaults.time_step_s),
        duration_s: args.duration.or(file.duration).unwrap_or(defaults.duration_s),
        start_time: args.start.or(file.start).as_deref().map(parse_time).transpose()?,
        rng_seed: args.seed.or(file.seed).unwrap_or(0),
        consensus: strategy
            .as_deref()
            .map(parse_strategy)
            .transpose()?
            .map(|strategy| ConsensusSettings { strategy, approvers, verifiers }),
        closeness,
        geojson: args.geojson || file.geojson.unwrap_or(false),
        output_dir: Some(output.clone()),
    };
    sim.validate()?;

    let reader = File::open(&tle).map_err(|e| CliError::input(format!("{}: {e}", tle.display())))?;
    let load = load_catalog(BufReader::new(reader), &LoadOptions::default())
        .map_err(|e| CliError::input(format!("{}: {e}", tle.display())))?;
    for d in &load.diagnostics {
        log::warn!("{}: {d}", tle.display());
    }
    let catalog = load.catalog;
    if sim.start_time.is_none() {
        sim.start_time = catalog.records().iter().map(|r| r.epoch()).max();
    }

    let out = run_simulation(&sim, &catalog)?;
    std::fs::create_dir_all(&output)
        .map_err(|e| CliError::input(format!("{}: {e}", output.display())))?;
    config::echo(
        &EffectiveSimulation {
            tle,
            regime,
            fractions: sim.fractions.clone(),
            step: sim.time_step_s,
            duration: sim.duration_s,
            start: sim.start_time.map(|t| t.to_iso8601()).unwrap_or_default(),
            seed: sim.rng_seed,
            consensus: sim.consensus.as_ref().map(|c| c.strategy.to_string()),
            approvers,
            verifiers,
            closeness,
            geojson: sim.geojson,
            output: output.clone(),
        },
        &output,
    )?;
    export_csv(&out.records, &out.summaries, &output)?;
    if sim.geojson {
        let dir = output.join("geojson");
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        for r in out.records.iter().filter(|r| r.geometry.is_some()) {
            let name = format!("{}pct_{}.geojson", r.fraction_pct, r.timestamp.millis());
            export_geojson(r, &dir.join(name))?;
        }
    }
    let invalid = out.records.iter().filter(|r| !r.is_valid()).count();
    if invalid > 0 {
        eprintln!("{invalid} of {} snapshots invalid; see invalid_snapshots.csv", out.records.len());
    }
    print_summary(&out.summaries);
    check_extents(&out.summaries)
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), CliError> {
    let file: config::MetricsFile = config::load(args.config.as_deref())?;
    let nodes = args
        .nodes
        .or(file.nodes)
        .ok_or_else(|| CliError::input("--nodes is required"))?;
    let edges = args
        .edges
        .or(file.edges)
        .ok_or_else(|| CliError::input("--edges is required"))?;
    let closeness = parse_closeness(args.closeness.or(file.closeness).as_deref())?;
    let output = args
        .output
        .or(file.output)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let options = SnapshotOptions {
        metrics: sda_core::MetricsOptions { closeness },
        ..Default::default()
    };
    let records = records_from_csv(&nodes, &edges, &options)?;
    let summaries = summarize_records(&records);
    std::fs::create_dir_all(&output)
        .map_err(|e| CliError::input(format!("{}: {e}", output.display())))?;
    #[derive(Serialize)]
    struct Effective<'a> {
        nodes: &'a Path,
        edges: &'a Path,
        closeness: ClosenessMode,
        output: &'a Path,
    }
    config::echo(&Effective { nodes: &nodes, edges: &edges, closeness, output: &output }, &output)?;
    export_csv(&records, &summaries, &output)?;
    let invalid: Vec<_> = records.iter().filter(|r| !r.is_valid()).collect();
    for r in &invalid {
        eprintln!(
            "{} at {}%: {}",
            r.timestamp,
            r.fraction_pct,
            r.invalid.as_deref().unwrap_or_default()
        );
    }
    println!("snapshots: {}", records.len());
    print_summary(&summaries);
    if !invalid.is_empty() {
        return Err(CliError::precondition(format!("{} snapshots failed metric preconditions", invalid.len())));
    }
    Ok(())
}

fn cmd_consensus(args: ConsensusArgs) -> Result<(), CliError> {
    let file: config::ConsensusFile = config::load(args.config.as_deref())?;
    let edges_path = args
        .edges
        .or(file.edges)
        .ok_or_else(|| CliError::input("--edges is required"))?;
    let rows = read_edges_csv(&edges_path)?;
    let want_time = args.timestamp.or(file.timestamp).as_deref().map(parse_time).transpose()?;
    let want_fraction = args.fraction.or(file.fraction);
    let first = rows
        .iter()
        .find(|r| {
            want_time.map_or(true, |t| parse_time(&r.timestamp).ok() == Some(t))
                && want_fraction.map_or(true, |f| r.fraction_pct == f)
        })
        .ok_or_else(|| CliError::input(format!("{}: no matching snapshot", edges_path.display())))?;
    let (ts_text, fraction) = (first.timestamp.clone(), first.fraction_pct);
    let timestamp = parse_time(&ts_text)?;
    let snapshot: Vec<_> = rows
        .iter()
        .filter(|r| r.timestamp == ts_text && r.fraction_pct == fraction)
        .collect();

    let ids: Vec<u32> = snapshot
        .iter()
        .flat_map(|r| [r.norad_a, r.norad_b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let g = ActuatorGraph::from_edges(
        ids,
        snapshot.iter().map(|r| Edge {
            a: index[&r.norad_a],
            b: index[&r.norad_b],
            great_circle_km: r.great_circle_km,
            chord_km: r.chord_km,
        }),
    )
    .map_err(|e| CliError::input(e.to_string()))?;

    let strategy = parse_strategy(args.strategy.or(file.strategy).as_deref().unwrap_or("degree"))?;
    let (default_a, default_v) = default_role_counts(g.node_count());
    let approvers = args.approvers.or(file.approvers).unwrap_or(default_a);
    let verifiers = args.verifiers.or(file.verifiers).unwrap_or(default_v);
    let fallback = args.fallback || file.fallback.unwrap_or(false);
    let assignment = match strategy {
        RoleStrategy::DegreeMode => assign_roles_degree(&g, approvers, verifiers)?,
        RoleStrategy::KCoreShell => match assign_roles_kcore(&g) {
            Err(e) if fallback && e.is_fallback_signal() => {
                eprintln!("{e}");
                assign_roles_degree(&g, approvers, verifiers)?
            }
            other => other?,
        },
    }
    .with_time(timestamp);

    let payload = match args.payload.or(file.payload) {
        Some(p) => p.into_bytes(),
        None => snapshot
            .iter()
            .map(|r| format!("{}-{}", r.norad_a, r.norad_b))
            .collect::<Vec<_>>()
            .join(";")
            .into_bytes(),
    };
    let mut tampered = payload.clone();
    tampered.push(b'!');
    let tamper: Vec<u32> = if args.tamper.is_empty() {
        file.tamper.unwrap_or_default()
    } else {
        args.tamper
    };
    let mut behavior = BTreeMap::new();
    for id in tamper {
        if !assignment.approvers.contains(&id) && !assignment.verifiers.contains(&id) {
            eprintln!("node {id} holds no role; tampering has no effect");
        }
        behavior.insert(id, Behavior::Tamper(tampered.clone()));
    }

    let round = run_round(&payload, &assignment, &g, &behavior, args.seed.or(file.seed).unwrap_or(0))?;
    let cost = message_cost(&assignment);
    let join = |s: &BTreeSet<u32>| s.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    println!("snapshot: {ts_text} at {fraction}%");
    println!("strategy: {}", assignment.strategy);
    println!("approvers: {}", join(&assignment.approvers));
    println!("verifiers: {}", join(&assignment.verifiers));
    println!(
        "messages: approval {} verification {} total {}",
        cost.approval_msgs, cost.verification_msgs, cost.total
    );
    let outcome = round
        .outcome()
        .ok_or_else(|| CliError::internal("round finished without an outcome"))?;
    println!("{outcome}");

    if let Some(path) = args.transcript.or(file.transcript) {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        writeln!(f, "{}", RoundTranscript::from_round(&round).to_json_line())
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<(), CliError> {
    let rows = read_globals_csv(&args.globals)?;
    let dir = args.globals.parent().unwrap_or(Path::new("."));
    let regime = match args.regime {
        Some(r) => parse_regime(&r)?,
        None => {
            let nodes = dir.join("nodes.csv");
            let first = read_nodes_csv(&nodes)
                .map_err(|_| CliError::input("--regime is required when nodes.csv is not beside the globals file"))?
                .into_iter()
                .next()
                .ok_or_else(|| CliError::input(format!("{}: no rows", nodes.display())))?;
            parse_regime(&first.regime)?
        }
    };
    let summaries = summaries_from_globals(&rows, regime);
    if summaries.is_empty() {
        return Err(CliError::input(format!("{}: no rows to summarize", args.globals.display())));
    }
    let output = args.output.unwrap_or_else(|| dir.join("summary.csv"));
    write_summary_csv(&summaries, &output)?;
    print_summary(&summaries);
    check_extents(&summaries)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Consensus(a) => cmd_consensus(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
