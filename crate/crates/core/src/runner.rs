//! Closed-loop execution: estimate, select, plan a chunk, simulate.

use std::fmt;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::ProgressEstimator;
use crate::scenario::ScenarioConfig;
use crate::selector::{selector_by_name, Decision, SelectError, SequenceLibrary};
use crate::sim::{wrap_angle, Corner, GoalSpec, SimError, Simulator, Suction, TraceRow};
use crate::skills::{plan_chunk, retreat_chunk, ChunkOptions, PolicyBank, SkillError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "skill", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    SkillFailure(String),
    Timeout,
    Aborted,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::SkillFailure(_) => "skill_failure",
            Outcome::Timeout => "timeout",
            Outcome::Aborted => "aborted",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::SkillFailure(s) => write!(f, "skill_failure({s})"),
            other => f.write_str(other.label()),
        }
    }
}

/// One control cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub tick: u64,
    pub rho: Vec<f64>,
    pub decision: Decision,
    /// Library trajectory the decision followed.
    pub trajectory: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub goal: GoalSpec,
    /// One row per tick, plus the final state.
    pub trace: Vec<TraceRow>,
    pub decisions: Vec<CycleRecord>,
    /// Library trajectory chosen at the first executing cycle.
    pub chosen: Option<usize>,
    /// Skills of the chosen ordering.
    pub ordering: Vec<usize>,
    /// Completion per skill of `ordering`; false from the first failure on.
    pub flags: Vec<bool>,
    pub execution_time: Option<u64>,
    pub outcome: Outcome,
    pub ticks: u64,
}

impl EpisodeResult {
    pub fn executed(&self, skill: usize) -> bool {
        self.decisions.iter().any(|c| c.decision.skill() == Some(skill))
    }
}

/// First tick from which the object stays within tolerance of the goal
/// pose for `hold` consecutive ticks of the trace.
pub fn execution_time(
    trace: &[TraceRow],
    goal: &GoalSpec,
    position_tol: f64,
    yaw_tol: f64,
    hold: u64,
) -> Option<u64> {
    let mut run_start: Option<u64> = None;
    let mut prev: Option<u64> = None;
    for row in trace {
        let ok = row.object.distance(&goal.target_pose) <= position_tol
            && wrap_angle(row.object.yaw - goal.target_pose.yaw).abs() <= yaw_tol;
        let contiguous = prev.is_some_and(|p| row.tick == p + 1);
        prev = Some(row.tick);
        if !ok {
            run_start = None;
            continue;
        }
        if run_start.is_none() || !contiguous {
            run_start = Some(row.tick);
        }
        let s = run_start.expect("set above");
        if hold == 0 || row.tick + 1 - s >= hold {
            return Some(s);
        }
    }
    None
}

/// Everything one closed-loop episode needs besides the seed.
pub struct Runner<'a> {
    pub scenario: &'a ScenarioConfig,
    pub bank: &'a PolicyBank,
    pub estimator: &'a dyn ProgressEstimator,
    pub library: &'a SequenceLibrary,
    /// Selection strategy; `None` picks hysteresis or nearest from the
    /// scenario.
    pub selector: Option<&'a str>,
}

impl Runner<'_> {
    pub fn check(&self) -> Result<(), RunError> {
        let n = self.bank.len();
        let dim = |what: &str, got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(RunError::Dimension(format!("{what} has {got} skills, bank has {n}")))
            }
        };
        dim("estimator", self.estimator.dim())?;
        dim("library", self.library.dim())?;
        dim("scenario", self.scenario.skills.len())?;
        self.library.validate().map_err(RunError::Dimension)?;
        for (i, b) in self.library.bounds.iter().enumerate() {
            if b.len() != self.bank.skills()[i].segments.len() {
                return Err(RunError::Dimension(format!(
                    "library has {} segment bounds for skill {i}",
                    b.len()
                )));
            }
        }
        self.scenario
            .validate()
            .map_err(|e| RunError::Scenario(e.to_string()))
    }

    fn selector_name(&self) -> &str {
        match self.selector {
            Some(s) => s,
            None if self.scenario.hysteresis => "hysteresis",
            None => "nearest",
        }
    }

    pub fn run(&self, seed: u64) -> Result<EpisodeResult, RunError> {
        self.check()?;
        let sc = self.scenario;
        let sim = Simulator::new(sc.sim.clone());
        let p = &sim.params;
        let thresholds = self.bank.thresholds();
        let mut selector = selector_by_name(self.selector_name(), sc.hysteresis_margin)?;
        let mut world = sim.spawn(sc, seed)?;
        let goal = world.goal;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00c1_05ed_100b);

        let mut events = sc.disturbances.clone();
        events.sort_by_key(|e| e.at_tick);
        let mut next_event = 0;
        let fire = |world: &mut crate::sim::WorldState, next_event: &mut usize| {
            while *next_event < events.len() && events[*next_event].at_tick <= world.tick {
                sim.apply_disturbance(world, &events[*next_event].kind);
                *next_event += 1;
            }
        };
        fire(&mut world, &mut next_event);

        let n = self.bank.len();
        let mut trace = Vec::new();
        let mut decisions: Vec<CycleRecord> = Vec::new();
        let mut achieved = vec![false; n];
        let mark = |world: &crate::sim::WorldState, achieved: &mut Vec<bool>| {
            let obs = sim.observe(world);
            for (s, a) in achieved.iter_mut().enumerate() {
                if !*a && self.bank.skill_satisfied(s, &obs, &goal, p).unwrap_or(false) {
                    *a = true;
                }
            }
        };
        mark(&world, &mut achieved);

        let mut chosen: Option<usize> = None;
        let mut stall = 0u32;
        let mut hold = 0u64;
        let outcome = loop {
            if world.tick >= sc.max_ticks {
                break Outcome::Timeout;
            }
            let obs = sim.observe(&world);
            let rho = self.estimator.estimate(&world, &obs, &goal);
            if rho.len() != n {
                return Err(RunError::Dimension(format!(
                    "estimator returned {} values for {n} skills",
                    rho.len()
                )));
            }
            let (decision, traj) = selector.select(&rho, self.library, &thresholds)?;

            if let (Some(prev), Decision::Execute { skill, .. }) = (decisions.last(), decision) {
                if prev.decision == decision && rho[skill] - prev.rho[skill] < sc.abort_gain {
                    stall += 1;
                } else {
                    stall = 0;
                }
            } else {
                stall = 0;
            }
            if stall >= sc.abort_cycles {
                break Outcome::Aborted;
            }
            if chosen.is_none() && matches!(decision, Decision::Execute { .. }) {
                chosen = Some(traj);
            }
            decisions.push(CycleRecord {
                cycle: decisions.len(),
                tick: world.tick,
                rho,
                decision,
                trajectory: traj,
            });

            let opts = ChunkOptions {
                horizon: sc.horizon,
                noise_sigma: sc.noise_sigma,
                noise_seed: rng.next_u64(),
                tempo: 1.0,
            };
            let chunk = match decision {
                Decision::Execute { skill, segment } => {
                    hold = 0;
                    plan_chunk(self.bank, skill, segment, &obs, &goal, p, &opts)?
                }
                Decision::Complete => retreat_chunk(&obs, p, &opts),
            };
            let budget = (sc.max_ticks - world.tick) as usize;
            for action in chunk.actions.iter().take(budget) {
                trace.push(sim.trace_row(&world, action.suction));
                // a rejected target still uses up its tick
                let _ = sim.step(&mut world, action);
                fire(&mut world, &mut next_event);
                mark(&world, &mut achieved);
            }
            if decision == Decision::Complete {
                hold += sc.horizon as u64;
                if hold >= sc.hold_ticks {
                    let obs = sim.observe(&world);
                    let ord = &self.library.trajectories[chosen.unwrap_or(traj)].ordering;
                    let failing = ord
                        .iter()
                        .find(|&&s| !self.bank.skill_satisfied(s, &obs, &goal, p).unwrap_or(false));
                    break match failing {
                        None => Outcome::Success,
                        Some(&s) => Outcome::SkillFailure(self.bank.skills()[s].name.clone()),
                    };
                }
            }
        };
        trace.push(sim.trace_row(&world, Suction::Hold));

        let traj = chosen.or(decisions.first().map(|c| c.trajectory)).unwrap_or(0);
        let ordering = self.library.trajectories[traj].ordering.clone();
        let mut flags = Vec::with_capacity(ordering.len());
        let mut ok = true;
        for &s in &ordering {
            ok = ok && achieved[s];
            flags.push(ok);
        }
        let execution_time = execution_time(
            &trace,
            &goal,
            p.position_tolerance,
            p.yaw_tolerance,
            sc.hold_ticks,
        );
        Ok(EpisodeResult {
            seed,
            goal,
            trace,
            decisions,
            chosen,
            ordering,
            flags,
            execution_time,
            outcome,
            ticks: world.tick,
        })
    }
}

/// One evaluation cell: a scenario with its goal corner fixed.
#[derive(Clone, Debug)]
pub struct Cell {
    pub name: String,
    pub scenario: ScenarioConfig,
}

impl Cell {
    pub fn new(scenario: &ScenarioConfig, goal: Corner) -> Self {
        let mut scenario = scenario.clone();
        scenario.goal = goal;
        Self {
            name: scenario.name.clone(),
            scenario,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub goal: String,
    /// `task`, `skill`, `outcome` or `ordering`.
    pub metric: String,
    pub key: String,
    pub count: usize,
    pub trials: usize,
    /// Mean execution time over the counted episodes that have one.
    pub mean_execution_time: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn find(&self, scenario: &str, goal: &str, metric: &str, key: &str) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.goal == goal && r.metric == metric && r.key == key)
    }

    /// Sums a metric over every goal of a scenario; returns (count, trials).
    pub fn total(&self, scenario: &str, metric: &str, key: &str) -> (usize, usize) {
        let mut count = 0;
        let mut trials = 0;
        for r in &self.rows {
            if r.scenario == scenario && r.metric == metric && r.key == key {
                count += r.count;
                trials += r.trials;
            }
        }
        (count, trials)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn pretty(&self) -> String {
        let header = ["scenario", "goal", "metric", "key", "count", "rate", "exec time"];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.scenario.clone(),
                    r.goal.clone(),
                    r.metric.clone(),
                    r.key.clone(),
                    format!("{}/{}", r.count, r.trials),
                    format!("{:.1}%", 100.0 * r.count as f64 / r.trials.max(1) as f64),
                    r.mean_execution_time.map_or("-".into(), |t| format!("{t:.0}")),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &body {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(header.to_vec());
        out.push('\n');
        for row in &body {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }
}

/// Aggregates the episodes of one cell into metric rows.
pub fn cell_metrics(cell: &Cell, bank: &PolicyBank, lib: &SequenceLibrary, eps: &[EpisodeResult]) -> Vec<MetricsRow> {
    let trials = eps.len();
    let goal = cell.scenario.goal.code().to_string();
    let mean_time = |sel: &dyn Fn(&EpisodeResult) -> bool| {
        let times: Vec<f64> = eps
            .iter()
            .filter(|e| sel(e))
            .filter_map(|e| e.execution_time.map(|t| t as f64))
            .collect();
        (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
    };
    let row = |metric: &str, key: String, count: usize, t: Option<f64>| MetricsRow {
        scenario: cell.name.clone(),
        goal: goal.clone(),
        metric: metric.into(),
        key,
        count,
        trials,
        mean_execution_time: t,
    };
    let mut rows = Vec::new();
    let success = |e: &EpisodeResult| e.outcome == Outcome::Success;
    rows.push(row(
        "task",
        "success".into(),
        eps.iter().filter(|e| success(e)).count(),
        mean_time(&success),
    ));
    for (s, spec) in bank.skills().iter().enumerate() {
        let done = |e: &EpisodeResult| {
            e.ordering
                .iter()
                .position(|&o| o == s)
                .is_some_and(|k| e.flags[k])
        };
        if eps.iter().any(|e| e.ordering.contains(&s)) {
            rows.push(row("skill", spec.name.clone(), eps.iter().filter(|e| done(e)).count(), None));
        }
    }
    for label in ["success", "skill_failure", "timeout", "aborted"] {
        let c = eps.iter().filter(|e| e.outcome.label() == label).count();
        rows.push(row("outcome", label.into(), c, None));
    }
    if lib.len() > 1 {
        for (i, t) in lib.trajectories.iter().enumerate() {
            let c = eps.iter().filter(|e| e.chosen == Some(i)).count();
            rows.push(row("ordering", bank.ordering_label(&t.ordering), c, None));
        }
    }
    rows
}

/// Runs `trials` seeded episodes per cell, in parallel, with seeds
/// `base_seed..base_seed + trials`. Rows come out in cell order whatever
/// the scheduling.
pub fn evaluate(
    cells: &[Cell],
    bank: &PolicyBank,
    estimator: &dyn ProgressEstimator,
    library: &SequenceLibrary,
    selector: Option<&str>,
    trials: usize,
    base_seed: u64,
) -> Result<(MetricsTable, Vec<Vec<EpisodeResult>>), RunError> {
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..trials as u64).map(move |t| (c, base_seed.wrapping_add(t))))
        .collect();
    let results: Vec<EpisodeResult> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            Runner {
                scenario: &cells[c].scenario,
                bank,
                estimator,
                library,
                selector,
            }
            .run(seed)
        })
        .collect::<Result<_, _>>()?;
    let mut per_cell: Vec<Vec<EpisodeResult>> = vec![Vec::new(); cells.len()];
    for ((c, _), r) in jobs.iter().zip(results) {
        per_cell[*c].push(r);
    }
    let mut table = MetricsTable::default();
    for (cell, eps) in cells.iter().zip(&per_cell) {
        table.rows.extend(cell_metrics(cell, bank, library, eps));
    }
    Ok((table, per_cell))
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tick", "robot_x", "robot_y", "robot_z", "robot_yaw", "suction", "suction_on", "object_x",
        "object_y", "object_z", "object_yaw", "upright", "attached", "contact",
    ])?;
    for r in trace {
        w.write_record([
            r.tick.to_string(),
            r.robot.x.to_string(),
            r.robot.y.to_string(),
            r.robot.z.to_string(),
            r.robot.yaw.to_string(),
            r.suction.to_string(),
            r.suction_on.to_string(),
            r.object.x.to_string(),
            r.object.y.to_string(),
            r.object.z.to_string(),
            r.object.yaw.to_string(),
            r.upright.to_string(),
            r.attached.to_string(),
            r.contact.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_decisions_csv<W: Write>(
    out: W,
    bank: &PolicyBank,
    decisions: &[CycleRecord],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cycle".to_string(), "tick".to_string()];
    header.extend(bank.skills().iter().map(|s| format!("rho_{}", s.name)));
    header.extend(["decision", "skill", "segment", "trajectory"].map(String::from));
    w.write_record(&header)?;
    for c in decisions {
        let mut rec = vec![c.cycle.to_string(), c.tick.to_string()];
        rec.extend(c.rho.iter().map(|v| v.to_string()));
        match c.decision {
            Decision::Execute { skill, segment } => {
                let spec = &bank.skills()[skill];
                rec.push("execute".into());
                rec.push(spec.name.clone());
                rec.push(spec.segments[segment].clone());
            }
            Decision::Complete => rec.extend(["complete".into(), String::new(), String::new()]),
        }
        rec.push(c.trajectory.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
