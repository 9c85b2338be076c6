//! Skills, their controllers, and the policy bank that serves action chunks.
//!
//! A skill is a named list of segments; each segment is driven by a
//! [`SkillController`] looked up by name in a [`ControllerRegistry`]. The
//! controllers are scripted, plan from the current observation only, and
//! can be re-invoked at any point of their own execution.

mod controllers;
mod demo;
mod path;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::SkillConfig;
use crate::sim::{Action, GoalSpec, Observation, Pose4, SimError, SimParams};

pub use controllers::{
    FlipController, PackController, PickController, PushOrientationController,
    PushPositionController, RetreatController,
};
pub use demo::{generate_demo, GeneratedDemo, TruthWindow, MAX_CHUNKS_PER_SEGMENT};
pub use path::Path;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("unknown skill id {0}")]
    UnknownSkill(usize),
    #[error("skill {skill} has no segment {segment}")]
    UnknownSegment { skill: usize, segment: usize },
    #[error("no controller registered under `{0}`")]
    UnknownController(String),
    #[error("skill `{0}` is already registered")]
    DuplicateId(String),
    #[error("skill id {got} is not the next free id {expected}")]
    NonContiguousId { got: usize, expected: usize },
    #[error("invalid skill spec: {0}")]
    InvalidSpec(String),
    #[error("skill `{skill}` did not reach its postcondition within {chunks} chunks")]
    InfeasibleOrdering { skill: String, chunks: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub id: usize,
    pub name: String,
    pub threshold: f64,
    pub segments: Vec<String>,
}

impl SkillSpec {
    fn validate(&self) -> Result<(), SkillError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(SkillError::InvalidSpec(format!(
                "{}: threshold {} outside (0, 1]",
                self.name, self.threshold
            )));
        }
        if self.segments.is_empty() {
            return Err(SkillError::InvalidSpec(format!("{}: no segments", self.name)));
        }
        Ok(())
    }
}

/// Knobs a controller may read while planning.
#[derive(Clone, Copy, Debug)]
pub struct PlanContext<'a> {
    pub params: &'a SimParams,
    /// Speed multiplier for the contact-rich part of a skill. Demonstrations
    /// draw it per skill; closed-loop execution runs at 1.
    pub tempo: f64,
}

impl<'a> PlanContext<'a> {
    pub fn new(params: &'a SimParams) -> Self {
        Self { params, tempo: 1.0 }
    }
}

/// One segment of a skill.
pub trait SkillController: Send + Sync {
    /// Waypoint actions from the observed state to the end of the segment.
    /// An empty plan means there is nothing left to do.
    fn plan(&self, obs: &Observation, goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action>;

    /// Postcondition of the segment.
    fn satisfied(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> bool;

    /// Geometric completion fraction in [0, 1] while unsatisfied.
    fn completion(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> f64;
}

type Factory = fn() -> Arc<dyn SkillController>;

/// Controllers available by name.
#[derive(Clone)]
pub struct ControllerRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for ControllerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("flip", || Arc::new(FlipController));
        r.register("pick", || Arc::new(PickController));
        r.register("pack", || Arc::new(PackController));
        r.register("push_orientation", || Arc::new(PushOrientationController));
        r.register("push_position", || Arc::new(PushPositionController));
        r.register("retreat", || Arc::new(RetreatController));
        r
    }

    /// Adds or replaces a controller factory.
    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn create(&self, name: &str) -> Result<Arc<dyn SkillController>, SkillError> {
        self.factories
            .get(name)
            .map(|f| f())
            .ok_or_else(|| SkillError::UnknownController(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

/// The skill set and one controller per (skill, segment).
///
/// Cloning is cheap and shares the controllers.
#[derive(Clone)]
pub struct PolicyBank {
    skills: Vec<SkillSpec>,
    controllers: Vec<Vec<Arc<dyn SkillController>>>,
}

impl fmt::Debug for PolicyBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolicyBank").field("skills", &self.skills).finish()
    }
}

impl PolicyBank {
    pub fn from_config(
        skills: &[SkillConfig],
        registry: &ControllerRegistry,
    ) -> Result<Self, SkillError> {
        let mut bank = Self {
            skills: Vec::new(),
            controllers: Vec::new(),
        };
        for cfg in skills {
            let spec = SkillSpec {
                id: bank.len(),
                name: cfg.name.clone(),
                threshold: cfg.threshold,
                segments: cfg.segments.clone(),
            };
            let ctrls = cfg
                .segments
                .iter()
                .map(|s| registry.create(s))
                .collect::<Result<Vec<_>, _>>()?;
            bank = bank.register_skill(spec, ctrls)?;
        }
        Ok(bank)
    }

    /// Flip, pick, pack and two-segment push, threshold 0.9.
    pub fn standard() -> Self {
        Self::from_config(&crate::scenario::default_skills(), &ControllerRegistry::builtin())
            .expect("builtin skills resolve")
    }

    /// Returns a bank with one more skill. Existing controllers are shared,
    /// not copied.
    pub fn register_skill(
        &self,
        spec: SkillSpec,
        controllers: Vec<Arc<dyn SkillController>>,
    ) -> Result<Self, SkillError> {
        if self.skills.iter().any(|s| s.name == spec.name) {
            return Err(SkillError::DuplicateId(spec.name));
        }
        if spec.id < self.len() {
            return Err(SkillError::DuplicateId(format!("#{}", spec.id)));
        }
        if spec.id != self.len() {
            return Err(SkillError::NonContiguousId {
                got: spec.id,
                expected: self.len(),
            });
        }
        spec.validate()?;
        if controllers.len() != spec.segments.len() {
            return Err(SkillError::InvalidSpec(format!(
                "{}: {} segments but {} controllers",
                spec.name,
                spec.segments.len(),
                controllers.len()
            )));
        }
        let mut next = self.clone();
        next.skills.push(spec);
        next.controllers.push(controllers);
        Ok(next)
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn skills(&self) -> &[SkillSpec] {
        &self.skills
    }

    pub fn skill(&self, id: usize) -> Result<&SkillSpec, SkillError> {
        self.skills.get(id).ok_or(SkillError::UnknownSkill(id))
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.skills.iter().position(|s| s.name == name)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.skills.iter().map(|s| s.threshold).collect()
    }

    pub fn segment_counts(&self) -> Vec<usize> {
        self.skills.iter().map(|s| s.segments.len()).collect()
    }

    pub fn controller(
        &self,
        skill: usize,
        segment: usize,
    ) -> Result<&Arc<dyn SkillController>, SkillError> {
        let row = self.controllers.get(skill).ok_or(SkillError::UnknownSkill(skill))?;
        row.get(segment)
            .ok_or(SkillError::UnknownSegment { skill, segment })
    }

    pub fn segment_satisfied(
        &self,
        skill: usize,
        segment: usize,
        obs: &Observation,
        goal: &GoalSpec,
        params: &SimParams,
    ) -> Result<bool, SkillError> {
        Ok(self.controller(skill, segment)?.satisfied(obs, goal, params))
    }

    /// A skill is done when every one of its segments is.
    pub fn skill_satisfied(
        &self,
        skill: usize,
        obs: &Observation,
        goal: &GoalSpec,
        params: &SimParams,
    ) -> Result<bool, SkillError> {
        let row = self.controllers.get(skill).ok_or(SkillError::UnknownSkill(skill))?;
        Ok(row.iter().all(|c| c.satisfied(obs, goal, params)))
    }

    /// Parses `flip,pick,pack` style orderings into skill ids.
    pub fn parse_ordering(&self, text: &str) -> Result<Vec<usize>, SkillError> {
        let mut ids = Vec::new();
        for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let id = self
                .id_of(name)
                .ok_or_else(|| SkillError::InvalidSpec(format!("unknown skill `{name}`")))?;
            if ids.contains(&id) {
                return Err(SkillError::InvalidSpec(format!("skill `{name}` repeated")));
            }
            ids.push(id);
        }
        if ids.is_empty() {
            return Err(SkillError::InvalidSpec("empty ordering".into()));
        }
        Ok(ids)
    }

    pub fn ordering_label(&self, ordering: &[usize]) -> String {
        ordering
            .iter()
            .map(|&i| self.skills.get(i).map_or("?", |s| s.name.as_str()))
            .collect::<Vec<_>>()
            .join(">")
    }
}

/// Fixed-length block of actions executed open loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionChunk {
    pub actions: Vec<Action>,
    /// Segment whose controller produced the plan; `None` for a retreat.
    pub segment: Option<usize>,
}

/// Noise and pacing applied on top of a controller plan.
#[derive(Clone, Copy, Debug)]
pub struct ChunkOptions {
    pub horizon: usize,
    /// Standard deviation of planar target noise, meters.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub tempo: f64,
}

impl ChunkOptions {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            noise_sigma: 0.0,
            noise_seed: 0,
            tempo: 1.0,
        }
    }
}

/// Plans one chunk for a (skill, segment): the controller plan, cut or
/// padded with holds to exactly `horizon` actions, plus optional noise.
///
/// If the requested segment already reports done, the skill's first
/// unfinished segment runs instead; `ActionChunk::segment` says which ran.
pub fn plan_chunk(
    bank: &PolicyBank,
    skill: usize,
    segment: usize,
    obs: &Observation,
    goal: &GoalSpec,
    params: &SimParams,
    opts: &ChunkOptions,
) -> Result<ActionChunk, SkillError> {
    if opts.horizon == 0 {
        return Err(SkillError::InvalidSpec("horizon must be positive".into()));
    }
    let mut segment = segment;
    if bank.segment_satisfied(skill, segment, obs, goal, params)? {
        let count = bank.skill(skill)?.segments.len();
        if let Some(j) = (0..count).find(|&j| !bank.controllers[skill][j].satisfied(obs, goal, params)) {
            segment = j;
        }
    }
    let ctx = PlanContext {
        params,
        tempo: opts.tempo,
    };
    let plan = bank.controller(skill, segment)?.plan(obs, goal, &ctx);
    let mut chunk = finish_chunk(plan, obs.robot, params, opts);
    chunk.segment = Some(segment);
    Ok(chunk)
}

/// Chunk that takes the robot back to its rest pose and idles there.
pub fn retreat_chunk(obs: &Observation, params: &SimParams, opts: &ChunkOptions) -> ActionChunk {
    let mut path = Path::new(obs.robot, params.max_step);
    path.retreat(params.home, params.hover_height);
    finish_chunk(path.into_actions(), obs.robot, params, opts)
}

fn finish_chunk(
    mut plan: Vec<Action>,
    robot: Pose4,
    params: &SimParams,
    opts: &ChunkOptions,
) -> ActionChunk {
    plan.truncate(opts.horizon);
    let last = plan.last().map_or(robot, |a| a.target);
    plan.resize(opts.horizon, Action::hold_at(last));
    if opts.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.noise_seed);
        let normal = Normal::new(0.0, opts.noise_sigma).expect("finite sigma");
        for a in &mut plan {
            a.target.x += normal.sample(&mut rng);
            a.target.y += normal.sample(&mut rng);
            a.target = params.workspace.clamp(a.target);
        }
    }
    ActionChunk {
        actions: plan,
        segment: None,
    }
}
