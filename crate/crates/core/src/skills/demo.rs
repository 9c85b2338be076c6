use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DemoStep, Demonstration, SegmentMarker};
use crate::scenario::ScenarioConfig;
use crate::sim::{distance_to_object, Simulator, Suction, WorldState};

use super::{plan_chunk, ChunkOptions, Path, PolicyBank, SkillError};

/// Chunks a segment may take in a demonstration before it is declared
/// infeasible.
pub const MAX_CHUNKS_PER_SEGMENT: usize = 3;

/// Window of one executed skill as the generator saw it, from privileged
/// world state. For checking window detection only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthWindow {
    pub skill: usize,
    pub start: u64,
    pub end: u64,
    pub segment_starts: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct GeneratedDemo {
    pub demo: Demonstration,
    pub truth: Vec<TruthWindow>,
}

/// Rolls the scripted controllers through `ordering` from the scenario's
/// spawn state, logging every observation and action.
///
/// Segments whose postcondition already holds are skipped, and skills that
/// end up with no executed segment are left out of the recorded ordering.
/// Contact-phase speed varies per skill by a random tempo in [0.8, 1].
pub fn generate_demo(
    bank: &PolicyBank,
    ordering: &[usize],
    scenario: &ScenarioConfig,
    seed: u64,
) -> Result<GeneratedDemo, SkillError> {
    let sim = Simulator::new(scenario.sim.clone());
    let p = &sim.params;
    let mut world = sim.spawn(scenario, seed)?;
    let goal = world.goal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_de30);

    let mut steps: Vec<DemoStep> = Vec::new();
    let mut states: Vec<WorldState> = Vec::new();
    let mut executed = Vec::new();

    for &skill in ordering {
        let spec = bank.skill(skill)?;
        let tempo = rng.random_range(0.8..=1.0);
        let mut ran = false;
        for segment in 0..spec.segments.len() {
            let mut chunks = 0;
            loop {
                let obs = sim.observe(&world);
                if bank.segment_satisfied(skill, segment, &obs, &goal, p)? {
                    break;
                }
                if chunks == MAX_CHUNKS_PER_SEGMENT {
                    return Err(SkillError::InfeasibleOrdering {
                        skill: spec.segments[segment].clone(),
                        chunks,
                    });
                }
                let opts = ChunkOptions {
                    horizon: scenario.horizon,
                    noise_sigma: scenario.noise_sigma,
                    noise_seed: rng.next_u64(),
                    tempo,
                };
                let chunk = plan_chunk(bank, skill, segment, &obs, &goal, p, &opts)?;
                let marker = SegmentMarker { skill, segment };
                for action in chunk.actions {
                    steps.push(DemoStep {
                        obs: sim.observe(&world),
                        action,
                        marker: Some(marker),
                    });
                    states.push(world.clone());
                    sim.step(&mut world, &action)?;
                }
                chunks += 1;
                ran = true;
            }
        }
        if ran {
            executed.push(skill);
        }
    }

    let mut path = Path::new(world.robot, p.max_step);
    path.retreat(p.home, p.hover_height);
    for action in path.into_actions() {
        steps.push(DemoStep {
            obs: sim.observe(&world),
            action,
            marker: None,
        });
        states.push(world.clone());
        sim.step(&mut world, &action)?;
    }

    let truth = executed
        .iter()
        .filter_map(|&skill| {
            let segments = bank.skills()[skill].segments.len();
            truth_window(&sim, &states, &steps, skill, segments)
        })
        .collect();

    Ok(GeneratedDemo {
        demo: Demonstration {
            scenario: scenario.name.clone(),
            seed,
            goal,
            skills: bank.skills().iter().map(|s| s.name.clone()).collect(),
            ordering: executed,
            steps,
        },
        truth,
    })
}

/// First contact in the skill's phase to the last contact tick whose action
/// left the object still moving (5-tick trailing displacement above 1 mm)
/// or fired a suction event.
fn truth_window(
    sim: &Simulator,
    states: &[WorldState],
    steps: &[DemoStep],
    skill: usize,
    segments: usize,
) -> Option<TruthWindow> {
    let p = &sim.params;
    let phase: Vec<usize> = (0..steps.len())
        .filter(|&i| steps[i].marker.is_some_and(|m| m.skill == skill))
        .collect();
    let touching = |i: usize| {
        let w = &states[i];
        w.object.attached || distance_to_object(p, &w.object, &w.robot) <= p.contact_radius
    };
    let moving = |i: usize| {
        let after = (i + 1).min(states.len() - 1);
        let a = states[after].object.pose;
        let b = states[after.saturating_sub(5)].object.pose;
        let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
        d > 1e-3 || steps[i].action.suction != Suction::Hold
    };
    let first = *phase.iter().find(|&&i| touching(i))?;
    let last_contact = *phase.iter().rev().find(|&&i| touching(i))?;
    let last = phase
        .iter()
        .rev()
        .copied()
        .find(|&i| touching(i) && moving(i))
        .unwrap_or(last_contact)
        .max(first);
    let tick = |i: usize| states[i].tick;
    let mut segment_starts = vec![tick(first)];
    for j in 1..segments {
        let at = phase
            .iter()
            .copied()
            .find(|&i| steps[i].marker.is_some_and(|m| m.segment >= j))
            .map_or(last, |i| i.clamp(first, last));
        segment_starts.push(tick(at));
    }
    Some(TruthWindow {
        skill,
        start: tick(first),
        end: tick(last),
        segment_starts,
    })
}
