use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skillchain::estimator::OracleEstimator;
use skillchain::pipeline::{annotate_dataset, build_library, generate_dataset};
use skillchain::runner::{evaluate, execution_time, Cell, EpisodeResult, Outcome, Runner};
use skillchain::scenario::ScenarioConfig;
use skillchain::selector::{Decision, SequenceLibrary};
use skillchain::sim::{Corner, DisturbanceEvent, DisturbanceKind, GoalSource, GoalSpec, Pose4, TraceRow};
use skillchain::skills::PolicyBank;

fn gc_library(bank: &PolicyBank) -> SequenceLibrary {
    let sc = ScenarioConfig::goal_conditioned(Corner::BottomLeft);
    let (demos, _) = generate_dataset(bank, &sc, &[vec![0, 1, 2, 3]], &Corner::ALL, 20, 1000).unwrap();
    let (stats, ann) = annotate_dataset(&demos, bank, 2).unwrap();
    build_library(&ann, &stats, bank).unwrap()
}

fn run(sc: &ScenarioConfig, bank: &PolicyBank, lib: &SequenceLibrary, seed: u64) -> EpisodeResult {
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), lib).unwrap();
    Runner {
        scenario: sc,
        bank,
        estimator: &oracle,
        library: lib,
        selector: None,
    }
    .run(seed)
    .unwrap()
}

fn row(tick: u64, x: f64, yaw: f64) -> TraceRow {
    TraceRow {
        tick,
        robot: Pose4::new(0.0, 0.0, 0.1, 0.0),
        suction: 0,
        suction_on: false,
        object: Pose4::new(x, 0.0, 0.0, yaw),
        upright: false,
        attached: false,
        contact: false,
    }
}

fn origin_goal() -> GoalSpec {
    GoalSpec {
        corner: Corner::TopLeft,
        target_pose: Pose4::new(0.0, 0.0, 0.0, 0.0),
        source: GoalSource::Language,
    }
}

/// Slides a window of `hold` rows over the trace; ticks must be consecutive.
fn execution_time_reference(trace: &[TraceRow], goal: &GoalSpec, tol: f64, yaw_tol: f64, hold: usize) -> Option<u64> {
    let ok = |r: &TraceRow| {
        r.object.distance(&goal.target_pose) <= tol
            && skillchain::sim::wrap_angle(r.object.yaw - goal.target_pose.yaw).abs() <= yaw_tol
    };
    (0..trace.len()).find_map(|i| {
        let w = trace.get(i..i + hold)?;
        let consecutive = w.windows(2).all(|p| p[1].tick == p[0].tick + 1);
        (consecutive && w.iter().all(ok)).then_some(trace[i].tick)
    })
}

#[test]
fn execution_time_matches_sliding_window() {
    let goal = origin_goal();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..200 {
        let n = rng.random_range(0..400);
        let hold = rng.random_range(1..=120);
        let p_in = rng.random_range(0.5..1.0);
        let mut tick = rng.random_range(0..50);
        let mut trace = Vec::with_capacity(n);
        let mut in_run = false;
        for _ in 0..n {
            // sticky runs of in-tolerance ticks, occasional gaps in ticks
            if rng.random_bool(0.1) {
                in_run = rng.random_bool(p_in);
            }
            let x = if in_run { rng.random_range(0.0..0.02) } else { rng.random_range(0.021..0.2) };
            let yaw = if in_run || rng.random_bool(0.5) { rng.random_range(-0.05..0.05) } else { 0.3 };
            trace.push(row(tick, x, yaw));
            tick += if rng.random_bool(0.01) { 2 } else { 1 };
        }
        let got = execution_time(&trace, &goal, 0.02, 0.05, hold as u64);
        let want = execution_time_reference(&trace, &goal, 0.02, 0.05, hold);
        assert_eq!(got, want, "case {case}");
    }
}

#[test]
fn execution_time_needs_exactly_the_hold_window() {
    let goal = origin_goal();
    let far = |t| row(t, 0.5, 0.0);
    let near = |t| row(t, 0.0, 0.0);
    let mut trace: Vec<TraceRow> = (0..10).map(far).collect();
    trace.extend((10..110).map(near));
    assert_eq!(execution_time(&trace, &goal, 0.02, 0.05, 100), Some(10));
    trace.pop();
    assert_eq!(execution_time(&trace, &goal, 0.02, 0.05, 100), None);
    trace.push(far(109));
    trace.extend((110..210).map(near));
    assert_eq!(execution_time(&trace, &goal, 0.02, 0.05, 100), Some(110));
    // a yaw outside tolerance breaks the run
    let mut yawed: Vec<TraceRow> = (0..100).map(near).collect();
    yawed[50].object.yaw = 0.2;
    assert_eq!(execution_time(&yawed, &goal, 0.02, 0.05, 100), None);
    // missing ticks break the run
    let gap: Vec<TraceRow> = (0..50).chain(51..101).map(near).collect();
    assert_eq!(execution_time(&gap, &goal, 0.02, 0.05, 100), None);
    assert_eq!(execution_time(&[], &goal, 0.02, 0.05, 100), None);
}

fn check_episode(ep: &EpisodeResult, sc: &ScenarioConfig, bank: &PolicyBank) {
    let h = sc.horizon as u64;
    assert_eq!(ep.decisions.len() as u64, ep.ticks.div_ceil(h), "seed {}", ep.seed);
    assert!(ep.ticks <= sc.max_ticks);
    let thresholds = bank.thresholds();
    for (i, c) in ep.decisions.iter().enumerate() {
        assert_eq!(c.cycle, i);
        assert_eq!(c.tick, i as u64 * h);
        if let Decision::Execute { skill, .. } = c.decision {
            assert!(c.rho[skill] < thresholds[skill], "cycle {i}: {:?}", c.rho);
        }
    }
    // failure propagates down the ordering
    if let Some(k) = ep.flags.iter().position(|f| !f) {
        assert!(ep.flags[k..].iter().all(|f| !f));
    }
    match &ep.outcome {
        Outcome::Success => {
            assert!(ep.flags.iter().all(|&f| f));
            let tail = &ep.decisions[ep.decisions.len() - (sc.hold_ticks / h) as usize..];
            assert!(tail.iter().all(|c| c.decision == Decision::Complete));
        }
        Outcome::Timeout => assert!(ep.ticks >= sc.max_ticks),
        _ => {}
    }
    assert_eq!(ep.trace.len() as u64, ep.ticks + 1);
}

#[test]
fn episodes_keep_their_invariants() {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let mut sc = ScenarioConfig::goal_conditioned(Corner::TopRight);
    for seed in 0..8 {
        let ep = run(&sc, &bank, &lib, seed);
        check_episode(&ep, &sc, &bank);
        assert_eq!(ep.outcome, Outcome::Success);
        assert!(ep.execution_time.is_some());
    }
    // too short to finish
    sc.max_ticks = 120;
    for seed in 0..3 {
        let ep = run(&sc, &bank, &lib, seed);
        check_episode(&ep, &sc, &bank);
        assert_eq!(ep.outcome, Outcome::Timeout);
        assert_eq!(ep.ticks, 120);
    }
}

#[test]
fn wall_reset_after_flip_is_redone() {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let mut sc = ScenarioConfig::goal_conditioned(Corner::BottomRight);
    sc.disturbances.push(DisturbanceEvent {
        at_tick: 160,
        kind: DisturbanceKind::ResetObjectToWall,
    });
    for seed in 0..4 {
        let ep = run(&sc, &bank, &lib, seed);
        check_episode(&ep, &sc, &bank);
        assert!(!ep.trace[159].upright, "flip should be done before the reset");
        assert!(ep.trace[161].upright);
        let redo = ep.decisions.iter().any(|c| c.tick > 160 && c.decision.skill() == Some(0));
        assert!(redo, "seed {seed}");
        assert_eq!(ep.outcome, Outcome::Success);
    }
}

#[test]
fn flat_start_skips_flip() {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let sc = ScenarioConfig::central(Corner::TopLeft);
    for seed in 0..4 {
        let ep = run(&sc, &bank, &lib, seed);
        assert!(!ep.executed(0));
        assert_eq!(ep.outcome, Outcome::Success);
    }
}

#[test]
fn evaluate_is_deterministic_and_ordered() {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let sc = ScenarioConfig::goal_conditioned(Corner::BottomLeft);
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), &lib).unwrap();
    let cells: Vec<Cell> = [Corner::TopLeft, Corner::BottomRight].iter().map(|&c| Cell::new(&sc, c)).collect();
    let (t1, e1) = evaluate(&cells, &bank, &oracle, &lib, None, 4, 50).unwrap();
    let (t2, e2) = evaluate(&cells, &bank, &oracle, &lib, None, 4, 50).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(e1, e2);
    for (cell, eps) in cells.iter().zip(&e1) {
        let seeds: Vec<u64> = eps.iter().map(|e| e.seed).collect();
        assert_eq!(seeds, vec![50, 51, 52, 53]);
        assert!(eps.iter().all(|e| e.goal.corner == cell.scenario.goal));
        let single = run(&cell.scenario, &bank, &lib, 52);
        assert_eq!(single, eps[2]);
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    t1.write_csv(&mut a).unwrap();
    t2.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mismatched_library_is_rejected() {
    let bank = PolicyBank::standard();
    let mut lib = gc_library(&bank);
    lib.bounds[3] = vec![1.0];
    let sc = ScenarioConfig::goal_conditioned(Corner::BottomLeft);
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), &gc_library(&bank)).unwrap();
    let r = Runner {
        scenario: &sc,
        bank: &bank,
        estimator: &oracle,
        library: &lib,
        selector: None,
    };
    assert!(r.run(0).is_err());
}
