//! Subcommands of the `skillchain` binary.
//!
//! Each `cmd_*` function takes its parsed arguments, writes its artifacts
//! into the output directory, records them in the directory's manifest and
//! returns the text to print.

pub mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use skillchain::annotation::{validate, DatasetStats, DEFAULT_DILATION};
use skillchain::dataset::{read_annotated, read_demos, write_annotated, write_demos, AnnotatedDemo, Demonstration};
use skillchain::estimator::{EstimatorKind, KnnEstimator, OracleEstimator, ProgressEstimator, DEFAULT_K};
use skillchain::pipeline::{annotate_dataset, build_library, generate_dataset};
use skillchain::runner::{evaluate, write_decisions_csv, write_trace_csv, Cell, Runner};
use skillchain::scenario::{ScenarioConfig, SpawnRegion};
use skillchain::selector::SequenceLibrary;
use skillchain::sim::Corner;
use skillchain::skills::{ControllerRegistry, PolicyBank};

pub use manifest::{write_atomic, RunManifest, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "skillchain", version, about = "Progress-guided skill chaining on a simulated pick-and-pack task")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scripted demonstrations.
    Generate(GenerateArgs),
    /// Detect skill windows and label progress.
    Annotate(AnnotateArgs),
    /// Fit the k-NN progress estimator.
    Fit(FitArgs),
    /// Build the sequence library.
    Library(Common),
    /// Run one closed-loop episode.
    Run(RunArgs),
    /// Run seeded trials over a grid of cells.
    Evaluate(EvaluateArgs),
    /// Write the annotated dataset as one CSV row per step.
    Export(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory; holds the manifest.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Manifest file or directory, when it is not in --out.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl Common {
    pub fn at(out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            manifest: None,
        }
    }

    fn load(&self) -> Result<RunManifest, CliError> {
        RunManifest::load(self.manifest.as_deref().unwrap_or(&self.out))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Scenario file or built-in name (gc, central, ms_central, ms_edge);
    /// repeat to pool several scenarios into one dataset.
    #[arg(long, default_value = "gc")]
    pub scenario: Vec<String>,
    /// Comma-separated skill ordering; repeatable.
    #[arg(long)]
    pub orderings: Vec<String>,
    /// Demos per scenario and ordering.
    #[arg(long, default_value_t = 60)]
    pub count: usize,
    /// Fix the goal corner instead of cycling through all four.
    #[arg(long)]
    pub goal: Option<Corner>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Default for GenerateArgs {
    fn default() -> Self {
        Self {
            scenario: vec!["gc".into()],
            orderings: Vec::new(),
            count: 60,
            goal: None,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Suction label dilation radius, ticks.
    #[arg(long, default_value_t = DEFAULT_DILATION)]
    pub k_dilation: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Neighbors averaged per query.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "oracle")]
    pub estimator: EstimatorKind,
    /// Scenario file or name; defaults to the manifest's first scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub goal: Option<Corner>,
    /// Episode seed; defaults to the manifest seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// single, nearest or hysteresis; defaults to the scenario's choice.
    #[arg(long)]
    pub selector: Option<String>,
    /// Tick-level trace CSV; the decision log goes next to it.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "oracle")]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Cells as `scenario` (all four goals) or `scenario:goal`, comma
    /// separated; defaults to every manifest scenario at every goal.
    #[arg(long, value_delimiter = ',')]
    pub cells: Vec<String>,
    /// First trial seed; defaults to the manifest seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub selector: Option<String>,
    /// Metrics CSV path; defaults to metrics.csv in the output directory.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Usage(String::new())
        }
        _ => CliError::Usage(e.to_string()),
    })?;
    dispatch(cli.command)
}

pub fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Annotate(a) => cmd_annotate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Library(a) => cmd_library(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Export(a) => cmd_export(&a),
    }
}

/// Built-in scenarios, goal bottom-left.
pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    let goal = Corner::BottomLeft;
    Some(match name {
        "gc" => ScenarioConfig::goal_conditioned(goal),
        "central" => ScenarioConfig::central(goal),
        "ms_central" => ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, goal),
        "ms_edge" => ScenarioConfig::multi_sequence(SpawnRegion::Edge, goal),
        _ => return None,
    })
}

fn resolve_scenario(spec: &str) -> Result<ScenarioConfig, CliError> {
    if let Some(s) = builtin_scenario(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "scenario `{spec}` is neither a file nor one of gc, central, ms_central, ms_edge"
        )));
    }
    ScenarioConfig::load(path).map_err(|e| match e {
        skillchain::scenario::ConfigError::Io { path, source } => CliError::Io { path, source },
        other => invalid(other),
    })
}

fn bank_for(scenario: &ScenarioConfig) -> Result<PolicyBank, CliError> {
    PolicyBank::from_config(&scenario.skills, &ControllerRegistry::builtin()).map_err(invalid)
}

fn manifest_scenarios(m: &RunManifest) -> Result<Vec<ScenarioConfig>, CliError> {
    if m.scenarios.is_empty() {
        return Err(invalid(format!(
            "manifest in {} lists no scenario; run `skillchain generate` first",
            m.dir.display()
        )));
    }
    m.scenarios
        .iter()
        .map(|p| {
            let path = m.dir.join(p);
            ScenarioConfig::load(&path).map_err(|e| match e {
                skillchain::scenario::ConfigError::Io { path, source } => CliError::Io { path, source },
                other => invalid(other),
            })
        })
        .collect()
}

/// Looks a scenario up among the manifest's, then the built-ins, then
/// the file system.
fn find_scenario(known: &[ScenarioConfig], spec: &str) -> Result<ScenarioConfig, CliError> {
    match known.iter().find(|s| s.name == spec) {
        Some(s) => Ok(s.clone()),
        None => resolve_scenario(spec),
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_demos(m: &RunManifest) -> Result<Vec<Demonstration>, CliError> {
    let path = m.artifact(&m.demos, "demo dataset", "generate")?;
    read_demos(open(&path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_annotated(m: &RunManifest) -> Result<Vec<AnnotatedDemo>, CliError> {
    let path = m.artifact(&m.annotated, "annotated dataset", "annotate")?;
    read_annotated(open(&path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_stats(m: &RunManifest) -> Result<DatasetStats, CliError> {
    let path = m.artifact(&m.stats, "dataset stats", "annotate")?;
    serde_json::from_str(&read_text(&path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// The recorded library, or one built on the fly from the annotated set.
fn load_library(m: &RunManifest, bank: &PolicyBank) -> Result<SequenceLibrary, CliError> {
    if m.library.is_some() {
        let path = m.artifact(&m.library, "sequence library", "library")?;
        return SequenceLibrary::from_toml_str(&read_text(&path)?)
            .map_err(|e| invalid(format!("{}: {e}", path.display())));
    }
    build_library(&load_annotated(m)?, &load_stats(m)?, bank).map_err(invalid)
}

fn load_estimator(
    m: &RunManifest,
    kind: EstimatorKind,
    bank: &PolicyBank,
    scenario: &ScenarioConfig,
    lib: &SequenceLibrary,
) -> Result<Box<dyn ProgressEstimator>, CliError> {
    Ok(match kind {
        EstimatorKind::Oracle => {
            Box::new(OracleEstimator::from_library(bank.clone(), scenario.sim.clone(), lib).map_err(invalid)?)
        }
        EstimatorKind::Knn => {
            let path = m.artifact(&m.estimator, "estimator snapshot", "fit")?;
            let knn = KnnEstimator::from_json(&read_text(&path)?)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            if knn.skills() != bank.skills().iter().map(|s| s.name.clone()).collect::<Vec<_>>() {
                return Err(invalid(format!(
                    "{}: estimator skills {:?} do not match the scenario",
                    path.display(),
                    knn.skills()
                )));
            }
            Box::new(knn)
        }
    })
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<String, CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let scenarios = a
        .scenario
        .iter()
        .map(|s| resolve_scenario(s))
        .collect::<Result<Vec<_>, _>>()?;
    for pair in scenarios.windows(2) {
        if pair[0].skills != pair[1].skills {
            return Err(invalid("pooled scenarios must share one skill set"));
        }
        if pair[0].name == pair[1].name {
            return Err(invalid(format!("scenario `{}` given twice", pair[0].name)));
        }
    }
    let bank = bank_for(&scenarios[0])?;
    let orderings = if a.orderings.is_empty() {
        vec![(0..bank.len()).collect::<Vec<_>>()]
    } else {
        a.orderings
            .iter()
            .map(|o| bank.parse_ordering(o).map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?
    };
    let goals: Vec<Corner> = match a.goal {
        Some(g) => vec![g],
        None => Corner::ALL.to_vec(),
    };

    let mut demos = Vec::new();
    let mut report = String::new();
    let per_scenario = (orderings.len() * a.count) as u64;
    for (s, sc) in scenarios.iter().enumerate() {
        let base = a.seed.wrapping_add(s as u64 * per_scenario);
        let (got, skipped) = generate_dataset(&bank, sc, &orderings, &goals, a.count, base).map_err(invalid)?;
        for o in &orderings {
            let lens: Vec<usize> = got.iter().filter(|d| &d.ordering == o).map(|d| d.steps.len()).collect();
            let skip = skipped.iter().filter(|k| &k.ordering == o).count();
            let mean = lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64;
            let _ = writeln!(
                report,
                "{} {}: {} demos, mean length {:.0} ticks, {} skipped",
                sc.name,
                bank.ordering_label(o),
                lens.len(),
                mean,
                skip
            );
        }
        if let Some(k) = skipped.first() {
            let _ = writeln!(report, "  e.g. seed {}: {}", k.seed, k.error);
        }
        demos.extend(got);
    }
    if demos.is_empty() {
        return Err(invalid(format!("{report}every demo was skipped")));
    }

    let mut m = RunManifest::new(&a.out, a.seed);
    for sc in &scenarios {
        let name = format!("scenario_{}.toml", sc.name);
        let text = sc.to_toml_string();
        write_atomic(&m.path(&name), |w| io::Write::write_all(w, text.as_bytes()))?;
        m.scenarios.push(name.into());
    }
    write_atomic(&m.path("demos.jsonl"), |w| write_demos(w, &demos))?;
    m.demos = Some("demos.jsonl".into());
    let path = m.save()?;
    let _ = writeln!(report, "{} demos written; manifest {}", demos.len(), path.display());
    Ok(report)
}

pub fn cmd_annotate(a: &AnnotateArgs) -> Result<String, CliError> {
    let mut m = a.common.load()?;
    let scenario = &manifest_scenarios(&m)?[0];
    let bank = bank_for(scenario)?;
    let demos = load_demos(&m)?;
    let (stats, annotated) = annotate_dataset(&demos, &bank, a.k_dilation).map_err(invalid)?;

    let mut report = String::new();
    let mut problems = 0;
    for (i, ad) in annotated.iter().enumerate() {
        for issue in validate(ad) {
            problems += 1;
            let _ = writeln!(report, "demo {i} (seed {}): {issue}", ad.demo.seed);
        }
    }
    for (spec, st) in bank.skills().iter().zip(&stats.per_skill) {
        match st {
            Some(st) => {
                let _ = writeln!(
                    report,
                    "{}: {} demos, longest window {} ticks, segment means {:?}",
                    spec.name, st.demos, st.max_duration, st.segment_durations
                );
            }
            None => {
                let _ = writeln!(report, "{}: not demonstrated", spec.name);
            }
        }
    }
    if problems > 0 {
        return Err(invalid(format!("{report}{problems} annotation invariant violations")));
    }
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    write_atomic(&m.path("annotated.jsonl"), |w| write_annotated(w, &annotated))?;
    write_atomic(&m.path("stats.json"), |w| io::Write::write_all(w, stats_json.as_bytes()))?;
    m.annotated = Some("annotated.jsonl".into());
    m.stats = Some("stats.json".into());
    m.save()?;
    let _ = writeln!(report, "{} demos annotated, all invariants hold", annotated.len());
    Ok(report)
}

pub fn cmd_fit(a: &FitArgs) -> Result<String, CliError> {
    let mut m = a.common.load()?;
    let scenario = &manifest_scenarios(&m)?[0];
    let annotated = load_annotated(&m)?;
    let knn = KnnEstimator::fit(&annotated, a.k, &scenario.sim).map_err(invalid)?;
    let json = knn.to_json();
    write_atomic(&m.path("knn.json"), |w| io::Write::write_all(w, json.as_bytes()))?;
    m.estimator = Some("knn.json".into());
    m.save()?;
    Ok(format!("k-NN estimator fitted on {} steps, k = {}\n", knn.len(), knn.k()))
}

pub fn cmd_library(a: &Common) -> Result<String, CliError> {
    let mut m = a.load()?;
    let scenario = &manifest_scenarios(&m)?[0];
    let bank = bank_for(scenario)?;
    let lib = build_library(&load_annotated(&m)?, &load_stats(&m)?, &bank).map_err(invalid)?;
    let text = lib.to_toml_string();
    write_atomic(&m.path("library.toml"), |w| io::Write::write_all(w, text.as_bytes()))?;
    m.library = Some("library.toml".into());
    m.save()?;
    let mut report = String::new();
    for t in &lib.trajectories {
        let _ = writeln!(report, "trajectory {} ({} vertices)", bank.ordering_label(&t.ordering), t.vertices.len());
    }
    Ok(report)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn cmd_run(a: &RunArgs) -> Result<String, CliError> {
    let m = a.common.load()?;
    let known = manifest_scenarios(&m)?;
    let mut scenario = match &a.scenario {
        Some(s) => find_scenario(&known, s)?,
        None => known[0].clone(),
    };
    if let Some(g) = a.goal {
        scenario.goal = g;
    }
    let bank = bank_for(&scenario)?;
    let lib = load_library(&m, &bank)?;
    let est = load_estimator(&m, a.estimator, &bank, &scenario, &lib)?;
    let seed = a.seed.unwrap_or(m.seed);
    let ep = Runner {
        scenario: &scenario,
        bank: &bank,
        estimator: est.as_ref(),
        library: &lib,
        selector: a.selector.as_deref(),
    }
    .run(seed)
    .map_err(invalid)?;

    let trace = a.trace.clone().unwrap_or_else(|| a.common.out.join("trace.csv"));
    let decisions = sibling(&trace, "_decisions.csv");
    write_atomic(&trace, |w| write_trace_csv(w, &ep.trace).map_err(io::Error::other))?;
    write_atomic(&decisions, |w| {
        write_decisions_csv(w, &bank, &ep.decisions).map_err(io::Error::other)
    })?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "{} goal {} seed {} estimator {}: {} after {} ticks, {} cycles",
        scenario.name,
        scenario.goal,
        seed,
        est.name(),
        ep.outcome,
        ep.ticks,
        ep.decisions.len()
    );
    let flags: Vec<String> = ep
        .ordering
        .iter()
        .zip(&ep.flags)
        .map(|(&s, &f)| format!("{}={}", bank.skills()[s].name, if f { "done" } else { "no" }))
        .collect();
    let _ = writeln!(report, "ordering {}: {}", bank.ordering_label(&ep.ordering), flags.join(" "));
    let _ = writeln!(
        report,
        "execution time: {}",
        ep.execution_time.map_or("none".into(), |t| format!("{t} ticks"))
    );
    let _ = writeln!(report, "trace {}, decisions {}", trace.display(), decisions.display());
    Ok(report)
}

/// Expands `--cells` entries into evaluation cells.
pub fn parse_cells(known: &[ScenarioConfig], specs: &[String]) -> Result<Vec<Cell>, CliError> {
    let mut cells = Vec::new();
    if specs.is_empty() {
        for sc in known {
            cells.extend(Corner::ALL.iter().map(|&g| Cell::new(sc, g)));
        }
        return Ok(cells);
    }
    for spec in specs {
        let (name, goal) = match spec.split_once(':') {
            Some((n, g)) => (n, Some(g.parse::<Corner>().map_err(CliError::Usage)?)),
            None => (spec.as_str(), None),
        };
        let sc = find_scenario(known, name)?;
        match goal {
            Some(g) => cells.push(Cell::new(&sc, g)),
            None => cells.extend(Corner::ALL.iter().map(|&g| Cell::new(&sc, g))),
        }
    }
    Ok(cells)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<String, CliError> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let m = a.common.load()?;
    let known = manifest_scenarios(&m)?;
    let cells = parse_cells(&known, &a.cells)?;
    let bank = bank_for(&known[0])?;
    if cells.iter().any(|c| c.scenario.skills != known[0].skills) {
        return Err(invalid("every cell must use the manifest's skill set"));
    }
    let lib = load_library(&m, &bank)?;
    let est = load_estimator(&m, a.estimator, &bank, &known[0], &lib)?;
    let seed = a.seed.unwrap_or(m.seed);
    let (table, _) = evaluate(&cells, &bank, est.as_ref(), &lib, a.selector.as_deref(), a.trials, seed)
        .map_err(invalid)?;
    let path = a.metrics.clone().unwrap_or_else(|| a.common.out.join("metrics.csv"));
    write_atomic(&path, |w| table.write_csv(w).map_err(io::Error::other))?;
    Ok(format!("{}metrics {}\n", table.pretty(), path.display()))
}

pub fn cmd_export(a: &Common) -> Result<String, CliError> {
    let m = a.load()?;
    let annotated = load_annotated(&m)?;
    let skills = annotated.first().map(|d| d.demo.skills.clone()).unwrap_or_default();
    let path = a.out.join("labels.csv");
    let rows: usize = annotated.iter().map(|d| d.demo.steps.len()).sum();
    write_atomic(&path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = [
            "demo", "scenario", "seed", "goal", "tick", "robot_x", "robot_y", "robot_z", "robot_yaw",
            "suction_on", "object_x", "object_y", "object_z", "object_yaw", "upright", "attached",
            "target_x", "target_y", "target_z", "target_yaw", "suction", "suction_dilated", "skill",
            "segment",
        ]
        .map(String::from)
        .to_vec();
        header.extend(skills.iter().map(|s| format!("rho_{s}")));
        out.write_record(&header)?;
        for (i, ad) in annotated.iter().enumerate() {
            let d = &ad.demo;
            for (t, s) in d.steps.iter().enumerate() {
                let o = &s.obs;
                let mut rec = vec![
                    i.to_string(),
                    d.scenario.clone(),
                    d.seed.to_string(),
                    d.goal.corner.to_string(),
                    o.tick.to_string(),
                    o.robot.x.to_string(),
                    o.robot.y.to_string(),
                    o.robot.z.to_string(),
                    o.robot.yaw.to_string(),
                    o.suction_on.to_string(),
                    o.object.pose.x.to_string(),
                    o.object.pose.y.to_string(),
                    o.object.pose.z.to_string(),
                    o.object.pose.yaw.to_string(),
                    o.object.upright.to_string(),
                    o.object.attached.to_string(),
                    s.action.target.x.to_string(),
                    s.action.target.y.to_string(),
                    s.action.target.z.to_string(),
                    s.action.target.yaw.to_string(),
                    s.action.suction.value().to_string(),
                    ad.dilated_suction[t].to_string(),
                    s.marker.map_or(String::new(), |mk| d.skills[mk.skill].clone()),
                    s.marker.map_or(String::new(), |mk| mk.segment.to_string()),
                ];
                rec.extend(ad.progress[t].iter().map(|v| v.to_string()));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    Ok(format!("{rows} labeled steps written to {}\n", path.display()))
}
