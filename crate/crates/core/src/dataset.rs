//! Demonstration logs and their annotated form, stored as JSON lines.
//!
//! A dataset file holds one or more demos back to back. Each demo is a
//! `header` record followed by its `step` records; annotated datasets carry
//! the windows and progress labels in the same records. See
//! `docs/formats.md` for the field list.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Action, GoalSpec, Observation, Pose4, Suction};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which controller produced an action: skill id and segment index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMarker {
    pub skill: usize,
    pub segment: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoStep {
    pub obs: Observation,
    pub action: Action,
    /// `None` during the final retreat.
    pub marker: Option<SegmentMarker>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub scenario: String,
    pub seed: u64,
    pub goal: GoalSpec,
    /// Skill names indexed by id; fixes the progress dimension.
    pub skills: Vec<String>,
    /// Skills actually executed, in order.
    pub ordering: Vec<usize>,
    pub steps: Vec<DemoStep>,
}

impl Demonstration {
    pub fn tick0(&self) -> u64 {
        self.steps.first().map_or(0, |s| s.obs.tick)
    }

    /// Step index of an observation tick.
    pub fn index_of(&self, tick: u64) -> usize {
        (tick - self.tick0()) as usize
    }

    pub fn suction_signal(&self) -> Vec<i8> {
        self.steps.iter().map(|s| s.action.suction.value()).collect()
    }
}

/// Execution window of one skill, in observation ticks, both ends included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillWindow {
    pub skill: usize,
    pub start: u64,
    pub end: u64,
    /// First tick of every segment; the first entry equals `start`.
    pub segment_starts: Vec<u64>,
    pub alpha: f64,
    /// Upper progress bound of every segment; the last is 1.
    pub bounds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedDemo {
    pub demo: Demonstration,
    pub windows: Vec<SkillWindow>,
    /// One progress vector per step.
    pub progress: Vec<Vec<f64>>,
    /// Suction labels after neighborhood dilation.
    pub dilated_suction: Vec<i8>,
    pub dilation_k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(Header),
    Step(StepRecord),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    scenario: String,
    seed: u64,
    goal: GoalSpec,
    skills: Vec<String>,
    ordering: Vec<usize>,
    steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    windows: Option<Vec<SkillWindow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dilation_k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepRecord {
    #[serde(flatten)]
    obs: Observation,
    target: Pose4,
    suction: Suction,
    segment_marker: Option<SegmentMarker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    progress: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    suction_dilated: Option<i8>,
}

fn header(demo: &Demonstration) -> Header {
    Header {
        schema_version: DATASET_SCHEMA_VERSION,
        scenario: demo.scenario.clone(),
        seed: demo.seed,
        goal: demo.goal,
        skills: demo.skills.clone(),
        ordering: demo.ordering.clone(),
        steps: demo.steps.len(),
        windows: None,
        dilation_k: None,
    }
}

fn step_record(s: &DemoStep) -> StepRecord {
    StepRecord {
        obs: s.obs.clone(),
        target: s.action.target,
        suction: s.action.suction,
        segment_marker: s.marker,
        progress: None,
        suction_dilated: None,
    }
}

fn write_record<W: Write>(out: &mut W, r: &Record) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, r)?;
    out.write_all(b"\n")
}

pub fn write_demos<W: Write>(out: &mut W, demos: &[Demonstration]) -> std::io::Result<()> {
    for d in demos {
        write_record(out, &Record::Header(header(d)))?;
        for s in &d.steps {
            write_record(out, &Record::Step(step_record(s)))?;
        }
    }
    Ok(())
}

pub fn write_annotated<W: Write>(out: &mut W, demos: &[AnnotatedDemo]) -> std::io::Result<()> {
    for a in demos {
        let mut h = header(&a.demo);
        h.windows = Some(a.windows.clone());
        h.dilation_k = Some(a.dilation_k);
        write_record(out, &Record::Header(h))?;
        for (i, s) in a.demo.steps.iter().enumerate() {
            let mut r = step_record(s);
            r.progress = Some(a.progress[i].clone());
            r.suction_dilated = Some(a.dilated_suction[i]);
            write_record(out, &Record::Step(r))?;
        }
    }
    Ok(())
}

struct Parsed {
    demo: Demonstration,
    windows: Option<Vec<SkillWindow>>,
    dilation_k: Option<usize>,
    progress: Vec<Option<Vec<f64>>>,
    dilated: Vec<Option<i8>>,
}

fn parse<R: BufRead>(input: R) -> Result<Vec<Parsed>, DatasetError> {
    let mut out: Vec<Parsed> = Vec::new();
    let mut expected = 0usize;
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| DatasetError::Parse {
            line: line_no,
            message,
        };
        let rec: Record = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        match rec {
            Record::Header(h) => {
                if let Some(prev) = out.last() {
                    if prev.demo.steps.len() != expected {
                        return Err(err(format!(
                            "previous demo has {} steps, header announced {expected}",
                            prev.demo.steps.len()
                        )));
                    }
                }
                if h.schema_version != DATASET_SCHEMA_VERSION {
                    return Err(err(format!(
                        "schema_version {} is not supported (expected {DATASET_SCHEMA_VERSION})",
                        h.schema_version
                    )));
                }
                if let Some(&bad) = h.ordering.iter().find(|&&i| i >= h.skills.len()) {
                    return Err(err(format!("ordering refers to unknown skill {bad}")));
                }
                expected = h.steps;
                out.push(Parsed {
                    demo: Demonstration {
                        scenario: h.scenario,
                        seed: h.seed,
                        goal: h.goal,
                        skills: h.skills,
                        ordering: h.ordering,
                        steps: Vec::with_capacity(h.steps),
                    },
                    windows: h.windows,
                    dilation_k: h.dilation_k,
                    progress: Vec::new(),
                    dilated: Vec::new(),
                });
            }
            Record::Step(s) => {
                let Some(cur) = out.last_mut() else {
                    return Err(err("step record before any header".into()));
                };
                if let Some(prev) = cur.demo.steps.last() {
                    if s.obs.tick != prev.obs.tick + 1 {
                        return Err(err(format!(
                            "tick {} does not follow tick {}",
                            s.obs.tick, prev.obs.tick
                        )));
                    }
                }
                if let Some(p) = &s.progress {
                    if p.len() != cur.demo.skills.len() {
                        return Err(err(format!(
                            "progress has {} entries for {} skills",
                            p.len(),
                            cur.demo.skills.len()
                        )));
                    }
                }
                if let Some(m) = s.segment_marker {
                    if m.skill >= cur.demo.skills.len() {
                        return Err(err(format!("segment marker names unknown skill {}", m.skill)));
                    }
                }
                cur.progress.push(s.progress);
                cur.dilated.push(s.suction_dilated);
                cur.demo.steps.push(DemoStep {
                    obs: s.obs,
                    action: Action {
                        target: s.target,
                        suction: s.suction,
                    },
                    marker: s.segment_marker,
                });
            }
        }
    }
    if let Some(prev) = out.last() {
        if prev.demo.steps.len() != expected {
            return Err(DatasetError::Parse {
                line: last_line,
                message: format!(
                    "last demo has {} steps, header announced {expected}",
                    prev.demo.steps.len()
                ),
            });
        }
    }
    if out.iter().any(|p| p.demo.steps.is_empty()) {
        return Err(DatasetError::Parse {
            line: last_line,
            message: "demo without steps".into(),
        });
    }
    Ok(out)
}

/// Reads plain or annotated demos; annotations are ignored.
pub fn read_demos<R: BufRead>(input: R) -> Result<Vec<Demonstration>, DatasetError> {
    Ok(parse(input)?.into_iter().map(|p| p.demo).collect())
}

pub fn read_annotated<R: BufRead>(input: R) -> Result<Vec<AnnotatedDemo>, DatasetError> {
    let mut out = Vec::new();
    for (n, p) in parse(input)?.into_iter().enumerate() {
        let missing = |what: &str| DatasetError::Parse {
            line: 0,
            message: format!("demo {n} is not annotated: {what} missing"),
        };
        let windows = p.windows.ok_or_else(|| missing("windows"))?;
        let dilation_k = p.dilation_k.ok_or_else(|| missing("dilation_k"))?;
        let progress = p
            .progress
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| missing("progress"))?;
        let dilated = p
            .dilated
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| missing("suction_dilated"))?;
        out.push(AnnotatedDemo {
            demo: p.demo,
            windows,
            progress,
            dilated_suction: dilated,
            dilation_k,
        });
    }
    Ok(out)
}
