//! Object-centric progress labels for demonstrations.
//!
//! A skill's label sits at its episode level `alpha` until the robot starts
//! handling the object for that skill, ramps linearly to 1 over the
//! execution window and stays at 1 afterwards. `alpha = 1 - t / M` where `t`
//! is the window length and `M` the longest window of that skill in the
//! dataset, so every window ramps at the same rate `1 / M` per tick. Skills a
//! demo never executes are labeled 1 throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AnnotatedDemo, Demonstration, SkillWindow};

/// Trailing window, in ticks, of the object-motion test.
pub const TRAIL_TICKS: usize = 5;
/// Displacement over the trailing window that counts as motion, meters.
pub const MOTION_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_DILATION: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("skill {0} is not in the demo's ordering")]
    SkillNotExecuted(usize),
    #[error("no step of the demo is marked with skill {0}")]
    MissingMarkers(usize),
    #[error("skill {0}: no contact tick inside its phase")]
    NoContactFound(usize),
    #[error("empty execution window (t = 0)")]
    EmptyWindow,
    #[error("window length {t} exceeds the dataset maximum {max}")]
    DurationExceedsMax { t: u64, max: u64 },
    #[error("no statistics for skill {0}")]
    MissingSkillCoverage(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("demo has {got} skills, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// `1 - t / m`.
pub fn compute_alpha(t: u64, m: u64) -> Result<f64, AnnotationError> {
    if t == 0 {
        return Err(AnnotationError::EmptyWindow);
    }
    if t > m {
        return Err(AnnotationError::DurationExceedsMax { t, max: m });
    }
    Ok(1.0 - t as f64 / m as f64)
}

/// Upper progress bound of each segment. Segment `j` gets a share of
/// `1 - alpha` proportional to its mean duration; the last bound is exactly 1.
pub fn segment_bounds(alpha: f64, durations: &[u64]) -> Vec<f64> {
    let total: u64 = durations.iter().sum();
    let mut out = Vec::with_capacity(durations.len());
    let mut cum = 0u64;
    for (j, &d) in durations.iter().enumerate() {
        cum += d;
        if j + 1 == durations.len() || total == 0 {
            out.push(if j + 1 == durations.len() { 1.0 } else { alpha });
        } else {
            out.push(alpha + (1.0 - alpha) * cum as f64 / total as f64);
        }
    }
    out
}

/// Widens every non-zero suction event to its `k` neighbors on each side.
///
/// Originals are never overwritten. An index within reach of two events
/// takes the nearer one, and the earlier one on a tie.
pub fn dilate_suction(signal: &[i8], k: usize) -> Vec<i8> {
    let n = signal.len();
    let mut prev = vec![None; n];
    let mut last = None;
    for i in 0..n {
        if signal[i] != 0 {
            last = Some(i);
        }
        prev[i] = last;
    }
    let mut out = signal.to_vec();
    let mut next = None;
    for i in (0..n).rev() {
        if signal[i] != 0 {
            next = Some(i);
            continue;
        }
        let left = prev[i].map(|j| (i - j, j));
        let right = next.map(|j: usize| (j - i, j));
        let pick = match (left, right) {
            (Some(l), Some(r)) => Some(if l.0 <= r.0 { l } else { r }),
            (l, r) => l.or(r),
        };
        if let Some((d, j)) = pick {
            if d <= k {
                out[i] = signal[j];
            }
        }
    }
    out
}

/// Step indices the generator spent on `skill`.
fn phase(demo: &Demonstration, skill: usize) -> Result<Vec<usize>, AnnotationError> {
    if !demo.ordering.contains(&skill) {
        return Err(AnnotationError::SkillNotExecuted(skill));
    }
    let idx: Vec<usize> = (0..demo.steps.len())
        .filter(|&i| demo.steps[i].marker.is_some_and(|m| m.skill == skill))
        .collect();
    if idx.is_empty() {
        return Err(AnnotationError::MissingMarkers(skill));
    }
    Ok(idx)
}

/// Whether the action at step `i` leaves the object displaced over the
/// trailing window, or toggles suction.
fn object_moving(demo: &Demonstration, i: usize) -> bool {
    let after = (i + 1).min(demo.steps.len() - 1);
    let a = demo.steps[after].obs.object.pose;
    let b = demo.steps[after.saturating_sub(TRAIL_TICKS)].obs.object.pose;
    a.distance(&b) > MOTION_THRESHOLD || demo.steps[i].action.suction.value() != 0
}

/// Execution window of a skill: from the first contact inside its phase to
/// the last contact at which the object was moving or suction toggled.
pub fn detect_execution_window(
    demo: &Demonstration,
    skill: usize,
) -> Result<(u64, u64), AnnotationError> {
    let idx = phase(demo, skill)?;
    let contact = |i: &&usize| demo.steps[**i].obs.contact;
    let first = *idx
        .iter()
        .find(contact)
        .ok_or(AnnotationError::NoContactFound(skill))?;
    let last_contact = *idx.iter().rev().find(contact).expect("found forward");
    let last = idx
        .iter()
        .rev()
        .copied()
        .find(|&i| demo.steps[i].obs.contact && object_moving(demo, i))
        .unwrap_or(last_contact)
        .max(first);
    Ok((demo.steps[first].obs.tick, demo.steps[last].obs.tick))
}

/// First tick of each segment inside a window, from the segment markers.
/// Segments that never ran start where the next one does.
pub fn detect_segment_starts(
    demo: &Demonstration,
    skill: usize,
    segments: usize,
    window: (u64, u64),
) -> Result<Vec<u64>, AnnotationError> {
    let idx = phase(demo, skill)?;
    let (start, end) = window;
    let mut out = vec![start];
    for j in 1..segments {
        let tick = idx
            .iter()
            .find(|&&i| demo.steps[i].marker.is_some_and(|m| m.segment >= j))
            .map_or(end, |&i| demo.steps[i].obs.tick.clamp(start, end));
        out.push(tick);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillStats {
    /// Longest execution window in the dataset, ticks.
    pub max_duration: u64,
    /// Mean duration of each segment, rounded, at least 1.
    pub segment_durations: Vec<u64>,
    pub demos: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub skills: Vec<String>,
    /// `None` for skills no demo executed.
    pub per_skill: Vec<Option<SkillStats>>,
}

impl DatasetStats {
    pub fn get(&self, skill: usize) -> Result<&SkillStats, AnnotationError> {
        self.per_skill
            .get(skill)
            .and_then(Option::as_ref)
            .ok_or(AnnotationError::MissingSkillCoverage(skill))
    }
}

/// Per-skill maximum window and mean segment durations over a dataset.
pub fn dataset_stats(
    demos: &[Demonstration],
    segment_counts: &[usize],
) -> Result<DatasetStats, AnnotationError> {
    let first = demos.first().ok_or(AnnotationError::EmptyDataset)?;
    let n = segment_counts.len();
    let mut max = vec![0u64; n];
    let mut sums = segment_counts.iter().map(|&k| vec![0u64; k]).collect::<Vec<_>>();
    let mut counts = segment_counts.iter().map(|&k| vec![0usize; k]).collect::<Vec<_>>();
    let mut seen = vec![0usize; n];
    for d in demos {
        if d.skills.len() != n {
            return Err(AnnotationError::DimensionMismatch {
                got: d.skills.len(),
                expected: n,
            });
        }
        for &skill in &d.ordering {
            let w = detect_execution_window(d, skill)?;
            let starts = detect_segment_starts(d, skill, segment_counts[skill], w)?;
            max[skill] = max[skill].max(w.1 - w.0);
            seen[skill] += 1;
            for j in 0..starts.len() {
                let stop = starts.get(j + 1).copied().unwrap_or(w.1);
                let len = stop - starts[j];
                if len > 0 {
                    sums[skill][j] += len;
                    counts[skill][j] += 1;
                }
            }
        }
    }
    let per_skill = (0..n)
        .map(|i| {
            if seen[i] == 0 {
                return Ok(None);
            }
            if max[i] == 0 {
                return Err(AnnotationError::EmptyWindow);
            }
            let segment_durations = sums[i]
                .iter()
                .zip(&counts[i])
                .map(|(&s, &c)| if c == 0 { 1 } else { ((s as f64 / c as f64).round() as u64).max(1) })
                .collect();
            Ok(Some(SkillStats {
                max_duration: max[i],
                segment_durations,
                demos: seen[i],
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DatasetStats {
        skills: first.skills.clone(),
        per_skill,
    })
}

/// Labels every step of a demo with a progress vector.
pub fn annotate(
    demo: &Demonstration,
    stats: &DatasetStats,
    dilation_k: usize,
) -> Result<AnnotatedDemo, AnnotationError> {
    let n = stats.per_skill.len();
    if demo.skills.len() != n {
        return Err(AnnotationError::DimensionMismatch {
            got: demo.skills.len(),
            expected: n,
        });
    }
    let mut windows = Vec::new();
    let mut progress = vec![vec![1.0; n]; demo.steps.len()];
    for &skill in &demo.ordering {
        let st = stats.get(skill)?;
        let (start, end) = detect_execution_window(demo, skill)?;
        let alpha = compute_alpha(end - start, st.max_duration)?;
        let starts = detect_segment_starts(demo, skill, st.segment_durations.len(), (start, end))?;
        let bounds = segment_bounds(alpha, &st.segment_durations);
        for (i, step) in demo.steps.iter().enumerate() {
            progress[i][skill] = label(step.obs.tick, alpha, &bounds, &starts, end);
        }
        windows.push(SkillWindow {
            skill,
            start,
            end,
            segment_starts: starts,
            alpha,
            bounds,
        });
    }
    Ok(AnnotatedDemo {
        demo: demo.clone(),
        windows,
        progress,
        dilated_suction: dilate_suction(&demo.suction_signal(), dilation_k),
        dilation_k,
    })
}

fn label(tick: u64, alpha: f64, bounds: &[f64], starts: &[u64], end: u64) -> f64 {
    if tick < starts[0] {
        return alpha;
    }
    if tick >= end {
        return 1.0;
    }
    let j = starts.iter().rposition(|&s| s <= tick).expect("tick after start");
    let lo = if j == 0 { alpha } else { bounds[j - 1] };
    let hi = bounds[j];
    let s0 = starts[j];
    let s1 = starts.get(j + 1).copied().unwrap_or(end);
    let f = (tick - s0) as f64 / (s1 - s0) as f64;
    (lo + (hi - lo) * f).clamp(0.0, 1.0)
}

/// Checks the label invariants; returns one message per violation.
pub fn validate(a: &AnnotatedDemo) -> Vec<String> {
    let mut issues = Vec::new();
    let n = a.demo.skills.len();
    if a.progress.len() != a.demo.steps.len() {
        issues.push(format!(
            "{} progress rows for {} steps",
            a.progress.len(),
            a.demo.steps.len()
        ));
        return issues;
    }
    for (i, row) in a.progress.iter().enumerate() {
        if row.len() != n {
            issues.push(format!("step {i}: {} progress values for {n} skills", row.len()));
            return issues;
        }
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            issues.push(format!("step {i}: progress outside [0, 1]"));
        }
    }
    for skill in 0..n {
        let col: Vec<f64> = a.progress.iter().map(|r| r[skill]).collect();
        if col.windows(2).any(|w| w[1] < w[0]) {
            issues.push(format!("skill {skill}: progress decreases"));
        }
        match a.windows.iter().find(|w| w.skill == skill) {
            None => {
                if col.iter().any(|&v| v != 1.0) {
                    issues.push(format!("skill {skill}: not executed but progress is not 1"));
                }
            }
            Some(w) => {
                let at = |t: u64| col[a.demo.index_of(t)];
                if at(w.start) != w.alpha {
                    issues.push(format!("skill {skill}: progress at window start is not alpha"));
                }
                if at(w.end) != 1.0 {
                    issues.push(format!("skill {skill}: progress at window end is not 1"));
                }
                if w.bounds.last() != Some(&1.0) {
                    issues.push(format!("skill {skill}: last segment bound is not 1"));
                }
            }
        }
    }
    issues
}
