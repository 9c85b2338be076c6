//! Demo generation through to a sequence library, as plain functions.

use crate::annotation::{annotate, dataset_stats, segment_bounds, AnnotationError, DatasetStats};
use crate::dataset::{AnnotatedDemo, Demonstration};
use crate::scenario::ScenarioConfig;
use crate::selector::{build_trajectory_map, SelectError, SequenceLibrary};
use crate::sim::Corner;
use crate::skills::{generate_demo, PolicyBank, SkillError};

/// A demo that could not be generated.
#[derive(Clone, Debug)]
pub struct Skipped {
    pub scenario: String,
    pub ordering: Vec<usize>,
    pub seed: u64,
    pub error: String,
}

/// Generates `count` demos for each ordering, cycling the goal over
/// `goals` (the scenario's own goal when empty). Demo `i` of ordering `o`
/// uses seed `base_seed + o * count + i`. Infeasible demos are skipped and
/// reported.
pub fn generate_dataset(
    bank: &PolicyBank,
    scenario: &ScenarioConfig,
    orderings: &[Vec<usize>],
    goals: &[Corner],
    count: usize,
    base_seed: u64,
) -> Result<(Vec<Demonstration>, Vec<Skipped>), SkillError> {
    let mut demos = Vec::new();
    let mut skipped = Vec::new();
    for (o, ord) in orderings.iter().enumerate() {
        for i in 0..count {
            let seed = base_seed.wrapping_add((o * count + i) as u64);
            let mut sc = scenario.clone();
            if !goals.is_empty() {
                sc.goal = goals[i % goals.len()];
            }
            match generate_demo(bank, ord, &sc, seed) {
                Ok(g) => demos.push(g.demo),
                Err(e @ SkillError::InfeasibleOrdering { .. }) => skipped.push(Skipped {
                    scenario: sc.name.clone(),
                    ordering: ord.clone(),
                    seed,
                    error: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok((demos, skipped))
}

pub fn annotate_dataset(
    demos: &[Demonstration],
    bank: &PolicyBank,
    dilation_k: usize,
) -> Result<(DatasetStats, Vec<AnnotatedDemo>), AnnotationError> {
    let stats = dataset_stats(demos, &bank.segment_counts())?;
    let annotated = demos
        .iter()
        .map(|d| annotate(d, &stats, dilation_k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((stats, annotated))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Library of the demonstrated orderings. Each skill's canonical starting
/// progress is the median of its annotated window alphas; segment bounds
/// come from the dataset's mean segment durations.
pub fn build_library(
    annotated: &[AnnotatedDemo],
    stats: &DatasetStats,
    bank: &PolicyBank,
) -> Result<SequenceLibrary, SelectError> {
    let n = bank.len();
    let mut alphas = vec![1.0; n];
    let mut bounds: Vec<Vec<f64>> = bank
        .segment_counts()
        .iter()
        .map(|&k| {
            let mut b = vec![1.0; k];
            for (j, v) in b.iter_mut().enumerate() {
                *v = (j + 1) as f64 / k as f64;
            }
            b
        })
        .collect();
    for (s, (alpha, bound)) in alphas.iter_mut().zip(&mut bounds).enumerate() {
        let values: Vec<f64> = annotated
            .iter()
            .flat_map(|a| a.windows.iter().filter(|w| w.skill == s).map(|w| w.alpha))
            .collect();
        if values.is_empty() {
            continue;
        }
        *alpha = median(values);
        if let Ok(st) = stats.get(s) {
            *bound = segment_bounds(*alpha, &st.segment_durations);
        }
    }
    let orderings: Vec<Vec<usize>> = annotated.iter().map(|a| a.demo.ordering.clone()).collect();
    let skills: Vec<String> = bank.skills().iter().map(|s| s.name.clone()).collect();
    build_trajectory_map(&skills, &orderings, &alphas, &bounds)
}
