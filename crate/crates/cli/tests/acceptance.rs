//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skillchain::annotation::{dilate_suction, segment_bounds, validate};
use skillchain::dataset::{AnnotatedDemo, Demonstration};
use skillchain::estimator::{featurize, KnnEstimator, OracleEstimator, ProgressEstimator};
use skillchain::pipeline::{annotate_dataset, build_library, generate_dataset};
use skillchain::runner::{evaluate, execution_time, Cell, EpisodeResult, Outcome, Runner};
use skillchain::scenario::{ScenarioConfig, SkillConfig, SpawnRegion};
use skillchain::selector::{
    build_trajectory_map, nearest_sequence, select_single, Decision, SequenceLibrary,
};
use skillchain::sim::{
    wrap_angle, Corner, DisturbanceEvent, DisturbanceKind, GoalSource, GoalSpec, Observation, Pose4,
    Simulator, TraceRow, WorldState,
};
use skillchain::skills::{generate_demo, plan_chunk, ChunkOptions, ControllerRegistry, PolicyBank, SkillSpec};
use skillchain_cli::{cmd_annotate, cmd_evaluate, cmd_generate, AnnotateArgs, Common, EvaluateArgs, GenerateArgs};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("selector worked example", worked_example),
        ("annotation invariants", annotation_invariants),
        ("nearest sequence vs dense sampling", nearest_sequence_brute_force),
        ("closed-loop goal-conditioned task", goal_conditioned_task),
        ("redo after disturbance", redo),
        ("skip when already done", skip),
        ("multi-sequence choice", multi_sequence),
        ("k-NN held-out accuracy", knn_accuracy),
        ("suction dilation", dilation),
        ("execution time metric", execution_time_metric),
        ("expansion isolation", expansion_isolation),
        ("evaluation determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn worked_example() -> Check {
    let d = select_single(&[1.0, 0.2, 0.0, 1.0], &[0, 1, 2, 3], &[0.9; 4], &vec![vec![1.0]; 4]).map_err(|e| e.to_string())?;
    ensure(d == Decision::Execute { skill: 1, segment: 0 }, || format!("got {d:?}"))?;
    Ok("executes the second skill".into())
}

fn random_demos(count: usize, seed: u64) -> Vec<Demonstration> {
    let bank = PolicyBank::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let goal = Corner::ALL[rng.random_range(0..4)];
        let (sc, ord) = match rng.random_range(0..5) {
            0 => (ScenarioConfig::goal_conditioned(goal), vec![0, 1, 2, 3]),
            1 => (ScenarioConfig::central(goal), vec![0, 1, 2, 3]),
            2 => (ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, goal), vec![0, 1, 2, 3]),
            3 => (ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, goal), vec![1, 2, 0, 3]),
            _ => (ScenarioConfig::multi_sequence(SpawnRegion::Edge, goal), vec![0, 1, 2, 3]),
        };
        if let Ok(g) = generate_demo(&bank, &ord, &sc, rng.random::<u32>() as u64) {
            out.push(g.demo);
        }
    }
    out
}

fn annotation_invariants() -> Check {
    let bank = PolicyBank::standard();
    let demos = random_demos(500, 101);
    let (stats, ann) = annotate_dataset(&demos, &bank, 2).map_err(|e| e.to_string())?;
    let mut windows = 0;
    for (d, a) in ann.iter().enumerate() {
        ensure(validate(a).is_empty(), || format!("demo {d}: {:?}", validate(a)))?;
        for skill in 0..a.demo.skills.len() {
            let col: Vec<f64> = a.progress.iter().map(|r| r[skill]).collect();
            ensure(col.windows(2).all(|w| w[1] >= w[0]), || format!("demo {d} skill {skill} not monotone"))?;
            let Some(w) = a.windows.iter().find(|w| w.skill == skill) else {
                ensure(col.iter().all(|&v| v == 1.0), || format!("demo {d}: absent skill {skill} not 1"))?;
                continue;
            };
            windows += 1;
            let at = |t: u64| col[a.demo.index_of(t)];
            let m = stats.get(skill).unwrap().max_duration as f64;
            ensure(at(w.start) == w.alpha && at(w.end) == 1.0, || format!("demo {d} skill {skill} endpoints"))?;
            ensure((w.alpha - (1.0 - (w.end - w.start) as f64 / m)).abs() < 1e-12, || "alpha".into())?;
            let slope = (at(w.end) - at(w.start)) / (w.end - w.start) as f64;
            ensure((slope - 1.0 / m).abs() < 1e-9, || format!("demo {d} skill {skill} slope {slope}"))?;
            if w.segment_starts.len() == 1 {
                for t in w.start..w.end {
                    let step = at(t + 1) - at(t);
                    ensure((step - 1.0 / m).abs() < 1e-9, || format!("demo {d} tick {t} step {step}"))?;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..1000 {
        let alpha = rng.random_range(0.0..1.0);
        let durations: Vec<u64> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..200)).collect();
        let b = segment_bounds(alpha, &durations);
        ensure(*b.last().unwrap() == 1.0, || format!("{alpha} {durations:?} -> {b:?}"))?;
        ensure(b.windows(2).all(|p| p[1] >= p[0]) && b[0] >= alpha, || format!("{b:?}"))?;
    }
    Ok(format!("500 demos, {windows} windows; 1000 bound sets end at 1.0"))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Arc-length sampling with `samples` points, then a ternary search on
/// the edges around the best sample.
fn sampled_distance(rho: &[f64], v: &[Vec<f64>], samples: usize) -> f64 {
    if v.len() == 1 {
        return euclid(rho, &v[0]);
    }
    let point = |e: usize, t: f64| -> Vec<f64> { v[e].iter().zip(&v[e + 1]).map(|(a, b)| a + t * (b - a)).collect() };
    let lengths: Vec<f64> = v.windows(2).map(|w| euclid(&w[0], &w[1])).collect();
    let total: f64 = lengths.iter().sum();
    let mut best = (f64::INFINITY, 0);
    for (e, len) in lengths.iter().enumerate() {
        let n = if total > 0.0 { ((samples as f64) * len / total).ceil() as usize } else { 1 }.max(1);
        for s in 0..=n {
            let d = euclid(rho, &point(e, s as f64 / n as f64));
            if d < best.0 {
                best = (d, e);
            }
        }
    }
    let mut out = best.0;
    for e in best.1.saturating_sub(1)..=(best.1 + 1).min(lengths.len() - 1) {
        let f = |t: f64| euclid(rho, &point(e, t));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        out = out.min(f(0.5 * (lo + hi)));
    }
    out
}

fn random_library(rng: &mut ChaCha8Rng) -> SequenceLibrary {
    let count = rng.random_range(2..=5);
    let mut orderings: Vec<Vec<usize>> = Vec::new();
    while orderings.len() < count {
        let mut ord: Vec<usize> = (0..4).collect();
        ord.shuffle(rng);
        ord.truncate(rng.random_range(2..=4));
        if !orderings.contains(&ord) {
            orderings.push(ord);
        }
    }
    let alphas: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.8)).collect();
    let bounds: Vec<Vec<f64>> = alphas
        .iter()
        .map(|&a| if rng.random_bool(0.4) { vec![rng.random_range(a..1.0), 1.0] } else { vec![1.0] })
        .collect();
    let names: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
    build_trajectory_map(&names, &orderings, &alphas, &bounds).unwrap()
}

fn nearest_sequence_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    let mut lib = random_library(&mut rng);
    for q in 0..1000 {
        if q % 25 == 0 {
            lib = random_library(&mut rng);
        }
        let rho: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        let brute: Vec<f64> = lib.trajectories.iter().map(|t| sampled_distance(&rho, &t.vertices, 10_000)).collect();
        let min = brute.iter().cloned().fold(f64::INFINITY, f64::min);
        let (idx, dist) = nearest_sequence(&rho, &lib).map_err(|e| e.to_string())?;
        worst = worst.max((dist - min).abs());
        ensure((dist - min).abs() <= 1e-6, || format!("query {q}: {dist} vs {min}"))?;
        // ties resolve to the earliest trajectory
        let first = brute.iter().position(|&b| b <= min + 1e-9).unwrap();
        ensure(idx == first, || format!("query {q}: picked {idx}, brute force {brute:?}"))?;
    }
    Ok(format!("1000 queries, max distance gap {worst:.1e}"))
}

fn gc_library(bank: &PolicyBank) -> SequenceLibrary {
    let sc = ScenarioConfig::goal_conditioned(Corner::BottomLeft);
    let (demos, _) = generate_dataset(bank, &sc, &[vec![0, 1, 2, 3]], &Corner::ALL, 60, 0).unwrap();
    let (stats, ann) = annotate_dataset(&demos, bank, 2).unwrap();
    build_library(&ann, &stats, bank).unwrap()
}

fn run_cells(sc: &ScenarioConfig, bank: &PolicyBank, lib: &SequenceLibrary, trials: usize, seed: u64) -> Vec<EpisodeResult> {
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), lib).unwrap();
    let cells: Vec<Cell> = Corner::ALL.iter().map(|&c| Cell::new(sc, c)).collect();
    let (_, eps) = evaluate(&cells, bank, &oracle, lib, None, trials, seed).unwrap();
    eps.into_iter().flatten().collect()
}

fn successes(eps: &[EpisodeResult]) -> usize {
    eps.iter().filter(|e| e.outcome == Outcome::Success).count()
}

fn goal_conditioned_task() -> Check {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let mut sc = ScenarioConfig::goal_conditioned(Corner::BottomLeft);
    let clean = successes(&run_cells(&sc, &bank, &lib, 10, 1000));
    sc.noise_sigma = 0.002;
    let noisy = successes(&run_cells(&sc, &bank, &lib, 10, 1000));
    ensure(clean >= 38 && noisy >= 34, || format!("{clean}/40 without noise, {noisy}/40 with noise"))?;
    Ok(format!("{clean}/40 without noise, {noisy}/40 at 2 mm noise"))
}

fn redo() -> Check {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let mut sc = ScenarioConfig::goal_conditioned(Corner::BottomRight);
    let at = 160;
    sc.disturbances.push(DisturbanceEvent {
        at_tick: at,
        kind: DisturbanceKind::ResetObjectToWall,
    });
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), &lib).unwrap();
    let mut good = 0;
    for seed in 0..10 {
        let ep = Runner {
            scenario: &sc,
            bank: &bank,
            estimator: &oracle,
            library: &lib,
            selector: None,
        }
        .run(2000 + seed)
        .unwrap();
        let flipped_before = ep.decisions.iter().any(|c| c.tick < at && c.decision.skill() == Some(0))
            && !ep.trace[at as usize - 1].upright;
        let redone = ep.decisions.iter().any(|c| c.tick > at && c.decision.skill() == Some(0));
        if flipped_before && redone && ep.outcome == Outcome::Success {
            good += 1;
        }
    }
    ensure(good >= 9, || format!("{good}/10 redo and succeed"))?;
    Ok(format!("{good}/10 re-select flip after the reset and succeed"))
}

fn skip() -> Check {
    let bank = PolicyBank::standard();
    let lib = gc_library(&bank);
    let sc = ScenarioConfig::central(Corner::TopRight);
    let oracle = OracleEstimator::from_library(bank.clone(), sc.sim.clone(), &lib).unwrap();
    let mut good = 0;
    for seed in 0..10 {
        let ep = Runner {
            scenario: &sc,
            bank: &bank,
            estimator: &oracle,
            library: &lib,
            selector: None,
        }
        .run(3000 + seed)
        .unwrap();
        if !ep.executed(0) && ep.outcome == Outcome::Success {
            good += 1;
        }
    }
    ensure(good == 10, || format!("{good}/10 skip flip and succeed"))?;
    Ok("10/10 never select flip and succeed".into())
}

fn multi_sequence() -> Check {
    let bank = PolicyBank::standard();
    let ff = vec![0, 1, 2, 3];
    let pf = vec![1, 2, 0, 3];
    let central = ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, Corner::BottomLeft);
    let edge = ScenarioConfig::multi_sequence(SpawnRegion::Edge, Corner::BottomLeft);
    let mut demos = Vec::new();
    for (i, sc) in [&central, &edge].into_iter().enumerate() {
        let (got, _) = generate_dataset(&bank, sc, &[ff.clone(), pf.clone()], &Corner::ALL, 50, 4000 + 100 * i as u64)
            .map_err(|e| e.to_string())?;
        demos.extend(got);
    }
    let (stats, ann) = annotate_dataset(&demos, &bank, 2).map_err(|e| e.to_string())?;
    let lib = build_library(&ann, &stats, &bank).map_err(|e| e.to_string())?;
    let knn = KnnEstimator::fit(&ann, 5, &central.sim).map_err(|e| e.to_string())?;
    ensure(lib.trajectories.len() == 2, || format!("{} orderings in the library", lib.trajectories.len()))?;

    let chose = |sc: &ScenarioConfig| -> (usize, usize, usize) {
        let cells: Vec<Cell> = Corner::ALL.iter().map(|&c| Cell::new(sc, c)).collect();
        let (_, eps) = evaluate(&cells, &bank, &knn, &lib, None, 20, 5000).unwrap();
        let eps: Vec<EpisodeResult> = eps.into_iter().flatten().collect();
        let n_ff = eps.iter().filter(|e| e.ordering == ff).count();
        let n_pf = eps.iter().filter(|e| e.ordering == pf).count();
        (n_ff, n_pf, successes(&eps))
    };
    let (c_ff, c_pf, c_ok) = chose(&central);
    let (e_ff, _, e_ok) = chose(&edge);
    let detail = format!(
        "central: flip-first {c_ff}/80, pick-first {c_pf}/80, {c_ok} successes; edge: flip-first {e_ff}/80, {e_ok} successes"
    );
    ensure(c_ff >= 16 && c_pf >= 16 && e_ff >= 76, || detail.clone())?;
    Ok(detail)
}

fn knn_accuracy() -> Check {
    let bank = PolicyBank::standard();
    let sc = ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, Corner::BottomLeft);
    let (demos, _) = generate_dataset(&bank, &sc, &[vec![0, 1, 2, 3], vec![1, 2, 0, 3]], &Corner::ALL, 25, 6000)
        .map_err(|e| e.to_string())?;
    let (_, mut ann) = annotate_dataset(&demos, &bank, 2).map_err(|e| e.to_string())?;
    ann.shuffle(&mut ChaCha8Rng::seed_from_u64(104));
    let cut = ann.len() * 4 / 5;
    let (train, test): (&[AnnotatedDemo], &[AnnotatedDemo]) = ann.split_at(cut);
    let knn = KnnEstimator::fit(train, 5, &sc.sim).map_err(|e| e.to_string())?;
    let mut err = vec![0.0; bank.len()];
    let mut steps = 0;
    for a in test {
        for (s, label) in a.demo.steps.iter().zip(&a.progress) {
            let pred = knn.predict_features(&featurize(&sc.sim, &s.obs, &a.demo.goal));
            for (e, (p, l)) in err.iter_mut().zip(pred.iter().zip(label)) {
                *e += (p - l).abs();
            }
            steps += 1;
        }
    }
    let mae: Vec<f64> = err.iter().map(|e| e / steps as f64).collect();
    let detail = format!("{steps} held-out steps, MAE {}", mae.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(" "));
    ensure(mae.iter().all(|&m| m <= 0.1), || detail.clone())?;
    Ok(detail)
}

fn dilation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for case in 0..1000 {
        let n = rng.random_range(0..80);
        let density = rng.random_range(0.0..0.3);
        let signal: Vec<i8> = (0..n)
            .map(|_| if rng.random_bool(density) { if rng.random_bool(0.5) { 1 } else { -1 } } else { 0 })
            .collect();
        for k in [0usize, 1, 2, 5] {
            let out = dilate_suction(&signal, k);
            for i in 0..n {
                // nearest event within k, the earlier one on a tie
                let nearest = (0..n)
                    .filter(|&j| signal[j] != 0 && i.abs_diff(j) <= k)
                    .min_by_key(|&j| (i.abs_diff(j), j));
                let want = if signal[i] != 0 { signal[i] } else { nearest.map_or(0, |j| signal[j]) };
                ensure(out[i] == want, || format!("case {case} k {k} index {i}: {signal:?} -> {out:?}"))?;
                ensure((out[i] != 0) == nearest.is_some(), || format!("case {case} k {k} index {i}"))?;
            }
        }
    }
    Ok("1000 signals at k = 0, 1, 2, 5 match the reference".into())
}

fn trace_row(tick: u64, x: f64, yaw: f64) -> TraceRow {
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

fn execution_time_metric() -> Check {
    let goal = GoalSpec {
        corner: Corner::TopLeft,
        target_pose: Pose4::new(0.0, 0.0, 0.0, 0.0),
        source: GoalSource::Language,
    };
    let within = |r: &TraceRow| r.object.distance(&goal.target_pose) <= 0.02 && wrap_angle(r.object.yaw).abs() <= 0.05;
    let reference = |trace: &[TraceRow], hold: usize| {
        (0..trace.len()).find_map(|i| {
            let w = trace.get(i..i + hold)?;
            (w.windows(2).all(|p| p[1].tick == p[0].tick + 1) && w.iter().all(within)).then_some(trace[i].tick)
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for case in 0..200 {
        let n = rng.random_range(0..400);
        let hold = if case % 2 == 0 { 100 } else { rng.random_range(1..=120) };
        let mut tick = rng.random_range(0..50);
        let mut inside = false;
        let mut trace = Vec::new();
        for _ in 0..n {
            if rng.random_bool(0.08) {
                inside = rng.random_bool(0.7);
            }
            let x = if inside { rng.random_range(0.0..0.02) } else { rng.random_range(0.021..0.2) };
            let yaw = if inside || rng.random_bool(0.5) { rng.random_range(-0.05..0.05) } else { 0.3 };
            trace.push(trace_row(tick, x, yaw));
            tick += if rng.random_bool(0.01) { 2 } else { 1 };
        }
        let got = execution_time(&trace, &goal, 0.02, 0.05, hold as u64);
        ensure(got == reference(&trace, hold), || format!("case {case}: {got:?}"))?;
    }
    // exactly 100 ticks are needed, 99 are not
    let mut trace: Vec<TraceRow> = (0..10).map(|t| trace_row(t, 0.5, 0.0)).collect();
    trace.extend((10..110).map(|t| trace_row(t, 0.0, 0.0)));
    ensure(execution_time(&trace, &goal, 0.02, 0.05, 100) == Some(10), || "100-tick hold".into())?;
    trace.pop();
    ensure(execution_time(&trace, &goal, 0.02, 0.05, 100).is_none(), || "99-tick hold".into())?;
    Ok("200 random traces and the 99/100-tick edge cases match".into())
}

/// Reports the added fifth skill as done.
struct Pinned<'a>(&'a dyn ProgressEstimator);

impl ProgressEstimator for Pinned<'_> {
    fn name(&self) -> &'static str {
        "pinned"
    }

    fn dim(&self) -> usize {
        self.0.dim() + 1
    }

    fn estimate(&self, world: &WorldState, obs: &Observation, goal: &GoalSpec) -> Vec<f64> {
        let mut rho = self.0.estimate(world, obs, goal);
        rho.push(1.0);
        rho
    }
}

fn expansion_isolation() -> Check {
    let bank4 = PolicyBank::standard();
    let retreat = SkillSpec {
        id: 4,
        name: "retreat".into(),
        threshold: 0.9,
        segments: vec!["retreat".into()],
    };
    let bank5 = bank4
        .register_skill(retreat, vec![ControllerRegistry::builtin().create("retreat").unwrap()])
        .map_err(|e| e.to_string())?;
    let lib4 = gc_library(&bank4);
    let mut skills = lib4.skills.clone();
    skills.push("retreat".into());
    let mut alphas = lib4.alphas.clone();
    alphas.push(1.0);
    let mut bounds = lib4.bounds.clone();
    bounds.push(vec![1.0]);
    let orderings: Vec<Vec<usize>> = lib4.trajectories.iter().map(|t| t.ordering.clone()).collect();
    let lib5 = build_trajectory_map(&skills, &orderings, &alphas, &bounds).map_err(|e| e.to_string())?;

    let sc4 = ScenarioConfig::goal_conditioned(Corner::BottomLeft);
    let mut sc5 = sc4.clone();
    sc5.skills.push(SkillConfig {
        name: "retreat".into(),
        threshold: 0.9,
        segments: vec!["retreat".into()],
    });
    let oracle = OracleEstimator::from_library(bank4.clone(), sc4.sim.clone(), &lib4).unwrap();
    let pinned = Pinned(&oracle);
    let sim = Simulator::new(sc4.sim.clone());
    let mut chunks = 0;
    for seed in 0..20u64 {
        let (mut a4, mut a5) = (sc4.clone(), sc5.clone());
        a4.goal = Corner::ALL[seed as usize % 4];
        a5.goal = a4.goal;
        let r4 = Runner { scenario: &a4, bank: &bank4, estimator: &oracle, library: &lib4, selector: None }
            .run(7000 + seed)
            .map_err(|e| e.to_string())?;
        let r5 = Runner { scenario: &a5, bank: &bank5, estimator: &pinned, library: &lib5, selector: None }
            .run(7000 + seed)
            .map_err(|e| e.to_string())?;
        ensure(r4.trace == r5.trace && r4.outcome == r5.outcome, || format!("seed {seed}: episodes differ"))?;
        let same = r4.decisions.len() == r5.decisions.len()
            && r4.decisions.iter().zip(&r5.decisions).all(|(a, b)| a.decision == b.decision && a.rho[..] == b.rho[..4]);
        ensure(same, || format!("seed {seed}: decisions differ"))?;

        let mut world = sim.spawn(&a4, 7000 + seed).map_err(|e| e.to_string())?;
        let goal = world.goal;
        for row in r4.trace.iter().step_by(41) {
            world.robot = row.robot;
            world.object.pose = row.object;
            world.object.upright = row.upright;
            world.tick = row.tick;
            let obs = sim.observe(&world);
            for (s, spec) in bank4.skills().iter().enumerate() {
                for j in 0..spec.segments.len() {
                    let mut opts = ChunkOptions::new(50);
                    opts.noise_sigma = 0.002;
                    opts.noise_seed = seed ^ row.tick;
                    let c4 = plan_chunk(&bank4, s, j, &obs, &goal, &sim.params, &opts).map_err(|e| e.to_string())?;
                    let c5 = plan_chunk(&bank5, s, j, &obs, &goal, &sim.params, &opts).map_err(|e| e.to_string())?;
                    ensure(c4 == c5, || format!("seed {seed}: chunk for skill {s} segment {j} differs"))?;
                    chunks += 1;
                }
            }
        }
    }
    Ok(format!("20 episodes and {chunks} chunks identical"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().to_path_buf();
    let err = |e: skillchain_cli::CliError| e.to_string();
    cmd_generate(&GenerateArgs {
        count: 8,
        seed: 42,
        out: out.clone(),
        ..GenerateArgs::default()
    })
    .map_err(err)?;
    cmd_annotate(&AnnotateArgs {
        common: Common::at(&out),
        k_dilation: 2,
    })
    .map_err(err)?;
    let eval = |name: &str| -> Result<Vec<u8>, String> {
        let path = out.join(name);
        cmd_evaluate(&EvaluateArgs {
            common: Common::at(&out),
            estimator: skillchain::estimator::EstimatorKind::Oracle,
            trials: 3,
            cells: Vec::new(),
            seed: None,
            selector: None,
            metrics: Some(path.clone()),
        })
        .map_err(err)?;
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let a = eval("metrics_a.csv")?;
    let b = eval("metrics_b.csv")?;
    ensure(!a.is_empty() && a == b, || "metrics differ between runs".into())?;
    Ok(format!("two runs wrote the same {} bytes", a.len()))
}
